"""Export trained tree ensembles to the cfforest interchange format."""

from .boosted import export_boosted
from .manifest import ExportError, check_manifest, load_manifest, manifest_from_data
from .sklearn_export import export_forest, export_isolation

__all__ = [
    "ExportError", "check_manifest", "load_manifest", "manifest_from_data",
    "export_forest", "export_isolation", "export_boosted",
]

__version__ = "0.1.0"

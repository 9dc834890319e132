"""Bridge from trained per-depth models to the treeood engine's wire formats."""

from .export import ExportError, export, scan_dataset
from .manifest import ExportManifest, ManifestError

__all__ = ["ExportError", "ExportManifest", "ManifestError", "export", "scan_dataset"]

"""Command-line entry point: ``probexport <manifest.json>``."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, export
from .manifest import ExportManifest, ManifestError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="probexport",
        description="run per-depth TorchScript classifiers over an image "
                    "folder and write probability/logit matrices")
    parser.add_argument("manifest", help="export manifest JSON")
    args = parser.parse_args(argv)
    try:
        manifest = ExportManifest.load(args.manifest)
        written = export(manifest)
    except (ManifestError, ExportError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Export manifest: which checkpoints to run and how to lay out the output."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class DepthModel:
    depth: int
    checkpoint: Path
    class_ids: tuple[int, ...]


@dataclass(frozen=True)
class ExportManifest:
    """Parsed manifest.

    ``class_ids`` per depth is the column ordering the engine expects
    (ascending node ids of its depth class index); this tool copies it
    verbatim into the file headers and never interprets the hierarchy.
    """

    dataset_root: Path
    output_dir: Path
    depths: tuple[DepthModel, ...]
    batch_size: int = 16
    image_size: tuple[int, int] = (32, 32)
    normalize_mean: Optional[tuple[float, ...]] = None
    normalize_std: Optional[tuple[float, ...]] = None

    @staticmethod
    def load(path: str | Path) -> "ExportManifest":
        base = Path(path).resolve().parent
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
        return ExportManifest.from_dict(doc, base=base)

    @staticmethod
    def from_dict(doc: dict, base: Path = Path(".")) -> "ExportManifest":
        def resolve(p: str) -> Path:
            q = Path(p)
            return q if q.is_absolute() else base / q

        for key in ("dataset_root", "output_dir", "depths"):
            if key not in doc:
                raise ManifestError(f"manifest is missing {key!r}")
        depths = []
        for entry in doc["depths"]:
            for key in ("depth", "checkpoint", "class_ids"):
                if key not in entry:
                    raise ManifestError(f"depth entry is missing {key!r}: {entry}")
            ids = [int(c) for c in entry["class_ids"]]
            if len(set(ids)) != len(ids):
                raise ManifestError(f"depth {entry['depth']}: duplicate class ids")
            depths.append(DepthModel(depth=int(entry["depth"]),
                                     checkpoint=resolve(entry["checkpoint"]),
                                     class_ids=tuple(ids)))
        depths.sort(key=lambda d: d.depth)
        seen = [d.depth for d in depths]
        if len(set(seen)) != len(seen):
            raise ManifestError(f"duplicate depths in manifest: {seen}")
        if seen != list(range(1, len(seen) + 1)):
            raise ManifestError(f"depths must cover 1..D without gaps, got {seen}")

        norm = doc.get("normalize") or {}
        size = doc.get("image_size", [32, 32])
        if len(size) != 2:
            raise ManifestError(f"image_size must be [height, width], got {size}")
        m = ExportManifest(
            dataset_root=resolve(doc["dataset_root"]),
            output_dir=resolve(doc["output_dir"]),
            depths=tuple(depths),
            batch_size=int(doc.get("batch_size", 16)),
            image_size=(int(size[0]), int(size[1])),
            normalize_mean=tuple(norm["mean"]) if "mean" in norm else None,
            normalize_std=tuple(norm["std"]) if "std" in norm else None,
        )
        if m.batch_size < 1:
            raise ManifestError(f"batch_size must be >= 1, got {m.batch_size}")
        if (m.normalize_mean is None) != (m.normalize_std is None):
            raise ManifestError("normalize needs both mean and std")
        return m

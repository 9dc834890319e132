"""Batch inference over an image folder, dumped as wire-format matrices.

Dataset layout: ``<root>/<partition>/<label node id>/<image files>`` where
partition is ``id_train``, ``id_test`` or ``ood_test``.  Sample ids are the
slash-separated relative paths, and rows are written sorted by sample id so
batch order never leaks into the output.

All files are produced only after every forward pass succeeds; a failing
checkpoint or an empty dataset leaves the output directory untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .manifest import ExportManifest

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
PARTITIONS = ("id_train", "id_test", "ood_test")


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImageRecord:
    sample_id: str
    path: Path
    label: int
    partition: str


def scan_dataset(root: Path) -> list[ImageRecord]:
    if not root.is_dir():
        raise ExportError(f"dataset root {root} is not a directory")
    records = []
    for part_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if part_dir.name not in PARTITIONS:
            raise ExportError(
                f"{part_dir}: expected partition directories {PARTITIONS}")
        for label_dir in sorted(p for p in part_dir.iterdir() if p.is_dir()):
            try:
                label = int(label_dir.name)
            except ValueError:
                raise ExportError(
                    f"{label_dir}: directory name must be a node id") from None
            for img in sorted(label_dir.iterdir()):
                if img.suffix.lower() in IMAGE_SUFFIXES:
                    records.append(ImageRecord(
                        sample_id=img.relative_to(root).as_posix(),
                        path=img, label=label, partition=part_dir.name))
    if not records:
        raise ExportError(f"no images found under {root}")
    records.sort(key=lambda r: r.sample_id)
    return records


def load_batch(records: list[ImageRecord], manifest: ExportManifest) -> torch.Tensor:
    h, w = manifest.image_size
    arrays = []
    for rec in records:
        with Image.open(rec.path) as img:
            arr = np.asarray(img.convert("RGB").resize((w, h)), dtype=np.float32)
        arrays.append(arr.transpose(2, 0, 1) / 255.0)  # HWC -> CHW in [0, 1]
    batch = torch.from_numpy(np.stack(arrays))
    if manifest.normalize_mean is not None:
        mean = torch.tensor(manifest.normalize_mean, dtype=torch.float32).view(1, -1, 1, 1)
        std = torch.tensor(manifest.normalize_std, dtype=torch.float32).view(1, -1, 1, 1)
        batch = (batch - mean) / std
    return batch


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_matrix(path: Path, class_ids, sample_ids, matrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [str(c) for c in class_ids])
        for sid, row in zip(sample_ids, matrix):
            writer.writerow([sid] + [_fmt(v) for v in row])


def export(manifest: ExportManifest) -> list[Path]:
    """Run every depth's checkpoint over the dataset and write, per depth,
    one probability and one logit CSV, plus a single labels CSV.

    Returns the written paths.  Probabilities are the softmax of the exact
    logits written next to them (computed in float64 from one forward pass).
    """
    records = scan_dataset(manifest.dataset_root)

    models = []
    for dm in manifest.depths:
        if not dm.checkpoint.exists():
            raise ExportError(f"checkpoint not found: {dm.checkpoint}")
        try:
            model = torch.jit.load(str(dm.checkpoint), map_location="cpu")
        except Exception as exc:
            raise ExportError(f"cannot load checkpoint {dm.checkpoint}: {exc}") from exc
        model.eval()
        models.append(model)

    sample_ids = [r.sample_id for r in records]
    logits_per_depth: list[np.ndarray] = []
    with torch.no_grad():
        for dm, model in zip(manifest.depths, models):
            chunks = []
            for start in range(0, len(records), manifest.batch_size):
                batch = load_batch(records[start:start + manifest.batch_size], manifest)
                out = model(batch)
                if out.ndim != 2 or out.shape[0] != batch.shape[0]:
                    raise ExportError(
                        f"depth {dm.depth}: checkpoint returned shape "
                        f"{tuple(out.shape)}, expected [batch, classes]")
                if out.shape[1] != len(dm.class_ids):
                    raise ExportError(
                        f"depth {dm.depth}: checkpoint emits {out.shape[1]} classes "
                        f"but the manifest lists {len(dm.class_ids)} class ids")
                chunks.append(out.double().cpu().numpy())
            logits_per_depth.append(np.concatenate(chunks, axis=0))

    out_dir = manifest.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for dm, logits in zip(manifest.depths, logits_per_depth):
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        p_path = out_dir / f"probs_d{dm.depth}.csv"
        l_path = out_dir / f"logits_d{dm.depth}.csv"
        _write_matrix(p_path, dm.class_ids, sample_ids, probs)
        _write_matrix(l_path, dm.class_ids, sample_ids, logits)
        written += [p_path, l_path]

    labels_path = out_dir / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "node_id", "partition"])
        for rec in records:
            writer.writerow([rec.sample_id, rec.label, rec.partition])
    written.append(labels_path)
    return written

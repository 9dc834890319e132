"""Wire formats: hierarchy/split JSON, label and prediction CSV, per-depth
probability matrices, and evaluation reports.

Text formats throughout; probabilities are written with 17 significant
digits so write-then-read is the identity on float64 values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .conditionals import ProbabilityStack
from .engine import StackBatch
from .errors import (
    HeaderMismatch,
    RowSumViolation,
    SampleSetMismatch,
)
from .hierarchy import (
    DepthClassIndex,
    Hierarchy,
    LabeledDataset,
    NodeId,
    PARTITIONS,
    Sample,
    SplitSpec,
    build_hierarchy,
)
from .inference import Prediction
from .metrics import EvalReport

#: Looser than the in-memory 1e-6 tolerance, to absorb text rounding.
FILE_ROW_SUM_TOL = 1e-5


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# -- hierarchy and split spec -------------------------------------------------

def read_hierarchy(path: str | Path) -> Hierarchy:
    doc = json.loads(Path(path).read_text())
    return build_hierarchy((n["id"], n["name"], n["parent"]) for n in doc["nodes"])


def write_hierarchy(h: Hierarchy, path: str | Path) -> None:
    nodes = [{"id": n, "name": h.name(n), "parent": h.parent(n)} for n in h.node_ids]
    Path(path).write_text(json.dumps({"nodes": nodes}, indent=1) + "\n")


def read_split_spec(path: str | Path) -> SplitSpec:
    doc = json.loads(Path(path).read_text())
    return SplitSpec.of(doc["ood_roots"])


def write_split_spec(spec: SplitSpec, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"ood_roots": sorted(spec.ood_roots)}, indent=1) + "\n")


# -- labels --------------------------------------------------------------------

def read_labels(path: str | Path) -> LabeledDataset:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"sample_id", "node_id", "partition"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise HeaderMismatch(
                f"label file needs columns {sorted(need)}, got {reader.fieldnames}")
        for row in reader:
            if row["partition"] not in PARTITIONS:
                raise ValueError(
                    f"sample {row['sample_id']!r}: unknown partition {row['partition']!r}")
            samples.append(Sample(row["sample_id"], int(row["node_id"]), row["partition"]))
    return LabeledDataset(samples=tuple(samples))


def write_labels(dataset: LabeledDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "node_id", "partition"])
        for s in sorted(dataset.samples, key=lambda s: s.sample_id):
            writer.writerow([s.sample_id, s.label, s.partition])


# -- probability matrices -------------------------------------------------------

def probs_path(directory: str | Path, d: int) -> Path:
    return Path(directory) / f"probs_d{d}.csv"


def logits_path(directory: str | Path, d: int) -> Path:
    return Path(directory) / f"logits_d{d}.csv"


def write_stack_files(batch: StackBatch, index: DepthClassIndex,
                      directory: str | Path) -> None:
    """One probability CSV per depth (plus logits when present), rows sorted
    by sample id, header = the depth's ascending class node ids."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    order = np.argsort(np.array(batch.sample_ids))
    for d in range(1, index.max_depth + 1):
        tables = [(probs_path(directory, d), np.asarray(batch.probs[d - 1]))]
        if batch.logits is not None:
            tables.append((logits_path(directory, d), np.asarray(batch.logits[d - 1])))
        for path, mat in tables:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["sample_id"] + [str(c) for c in index.classes(d)])
                for i in order:
                    writer.writerow([batch.sample_ids[i]] + [_fmt(v) for v in mat[i]])


def _read_matrix(path: Path, d: int, index: DepthClassIndex,
                 check_row_sums: bool) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise HeaderMismatch(f"{path}: empty file")
        expected = ["sample_id"] + [str(c) for c in index.classes(d)]
        if header != expected:
            for col, (got, want) in enumerate(zip(header, expected)):
                if got != want:
                    raise HeaderMismatch(
                        f"{path}: depth {d} column {col} is {got!r}, expected {want!r}")
            raise HeaderMismatch(
                f"{path}: depth {d} has {len(header) - 1} classes, "
                f"expected {index.n_classes(d)}")
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
        mat = np.array(rows, dtype=np.float64)
        if check_row_sums and len(rows):
            sums = mat.sum(axis=1)
            bad = np.abs(sums - 1.0) > FILE_ROW_SUM_TOL
            if bad.any():
                i = int(np.argmax(bad))
                raise RowSumViolation(
                    f"{path}: sample {ids[i]!r} row sums to {float(sums[i])} at depth {d}")
        return ids, mat


def load_stack_batch(directory: str | Path, index: DepthClassIndex) -> StackBatch:
    """Read every depth's probability file (and logits when present) into one
    aligned batch, rows sorted by sample id.

    Raises HeaderMismatch / SampleSetMismatch / RowSumViolation with the
    offending depth, column, or sample named.
    """
    directory = Path(directory)
    prob_mats, logit_mats = [], []
    ref_ids: Optional[list[str]] = None
    have_logits = all(logits_path(directory, d).exists()
                      for d in range(1, index.max_depth + 1))
    for d in range(1, index.max_depth + 1):
        path = probs_path(directory, d)
        if not path.exists():
            raise SampleSetMismatch(f"missing probability file for depth {d}: {path}")
        ids, mat = _read_matrix(path, d, index, check_row_sums=True)
        order = sorted(range(len(ids)), key=lambda i: ids[i])
        ids = [ids[i] for i in order]
        mat = mat[order]
        if len(set(ids)) != len(ids):
            dupes = sorted({s for s in ids if ids.count(s) > 1})
            raise SampleSetMismatch(f"depth {d}: duplicate sample ids {dupes[:5]}")
        if ref_ids is None:
            ref_ids = ids
        elif ids != ref_ids:
            extra = sorted(set(ids) ^ set(ref_ids))
            raise SampleSetMismatch(
                f"depth {d} sample set differs from depth 1 (e.g. {extra[:5]})")
        prob_mats.append(mat)
        if have_logits:
            lids, lmat = _read_matrix(logits_path(directory, d), d, index,
                                      check_row_sums=False)
            lorder = sorted(range(len(lids)), key=lambda i: lids[i])
            if [lids[i] for i in lorder] != ref_ids:
                raise SampleSetMismatch(f"depth {d} logits sample set differs")
            logit_mats.append(lmat[lorder])
    return StackBatch(sample_ids=tuple(ref_ids or ()), probs=tuple(prob_mats),
                      logits=tuple(logit_mats) if have_logits else None)


def load_stack_files(directory: str | Path, index: DepthClassIndex,
                     ) -> Iterator[tuple[str, ProbabilityStack]]:
    """Stream validated per-sample stacks in sample-id order."""
    batch = load_stack_batch(directory, index)
    for row, sid in enumerate(batch.sample_ids):
        yield sid, batch.stack_for(row)


# -- predictions -----------------------------------------------------------------

PREDICTION_COLUMNS = ["sample_id", "predicted_node", "rule", "expected_dist", "prob_mass"]


def write_predictions(sample_ids: Sequence[str], predictions: Sequence[Prediction],
                      path: str | Path) -> None:
    rows = sorted(zip(sample_ids, predictions), key=lambda t: t[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_COLUMNS)
        for sid, p in rows:
            writer.writerow([
                sid, p.node, p.rule.value,
                "" if p.expected_dist is None else _fmt(p.expected_dist),
                "" if p.prob_mass is None else _fmt(p.prob_mass),
            ])


def read_predictions(path: str | Path) -> dict[str, NodeId]:
    out: dict[str, NodeId] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PREDICTION_COLUMNS:
            raise HeaderMismatch(
                f"prediction file header {reader.fieldnames} != {PREDICTION_COLUMNS}")
        for row in reader:
            out[row["sample_id"]] = int(row["predicted_node"])
    return out


# -- reports ----------------------------------------------------------------------

def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")


def read_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


def write_histogram(histogram: Mapping[tuple[int, int], int], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["overdist", "underdist", "count"])
        for (o, u), n in sorted(histogram.items()):
            writer.writerow([o, u, n])

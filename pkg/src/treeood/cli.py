"""Batch command-line pipeline.

Subcommands wire the library into file-level stages so the engine runs the
same way on synthetic data and on externally exported model outputs:

    treeood validate  --hierarchy h.json [--split s.json] [--labels l.csv] [--stacks DIR]
    treeood split     --hierarchy full.json --spec s.json [--out-hierarchy ...] [--out-map ...]
    treeood infer     --hierarchy h.json --stacks DIR --score M --rule R --out pred.csv
    treeood eval      --hierarchy h.json --predictions pred.csv --labels l.csv --out rep.json
    treeood synth run --config cfg.json --out-dir DIR [--seed N]
    treeood report    rep1.json [rep2.json ...]

Exit codes: 0 success, 1 data error (single machine-parsable stderr line),
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import fileio
from .conditionals import ScoreModel
from .engine import FlatTree, infer_batch
from .errors import SampleSetMismatch, TreeOodError
from .hierarchy import LabeledDataset, Sample, depth_class_index, split_id_ood
from .inference import DecisionRule
from .metrics import evaluate
from .synthetic import SyntheticConfig, predict_batch, fit, generate


def _add_score_rule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--score", default="entcompprob",
                   choices=[m.value for m in ScoreModel],
                   help="conditional ood score model")
    p.add_argument("--rule", default="minexp",
                   choices=[r.value for r in DecisionRule],
                   help="decision rule")
    p.add_argument("--root-ood", action="store_true",
                   help="attach a root ood entry driven by deepest-vector entropy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeood",
        description="hierarchical out-of-distribution classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate hierarchy / split / label / stack files")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--split", help="split spec JSON to check against the hierarchy")
    p.add_argument("--labels", help="label CSV to check against the hierarchy")
    p.add_argument("--stacks", help="directory of probs_d*.csv (and logits_d*.csv)")

    p = sub.add_parser("split", help="carve an ID hierarchy out of a full one")
    p.add_argument("--hierarchy", required=True, help="full hierarchy JSON")
    p.add_argument("--spec", required=True, help="split spec JSON (ood roots)")
    p.add_argument("--out-hierarchy", help="write the pruned ID hierarchy JSON here")
    p.add_argument("--out-map", help="write removed-leaf,mapped-node CSV here")
    p.add_argument("--labels", help="optional label CSV with full-hierarchy leaf labels")
    p.add_argument("--out-labels", help="rewrite --labels with ood labels remapped")

    p = sub.add_parser("infer", help="predict nodes from per-depth probability files")
    p.add_argument("--hierarchy", required=True, help="ID hierarchy JSON")
    p.add_argument("--stacks", required=True, help="directory of probs_d*.csv")
    p.add_argument("--labels", help="label CSV (required by --rule oracle)")
    p.add_argument("--out", required=True, help="output prediction CSV")
    _add_score_rule_flags(p)

    p = sub.add_parser("eval", help="score predictions against labels")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--histogram", help="optional overdist,underdist,count CSV")

    synth = sub.add_parser("synth", help="synthetic data commands")
    synth_sub = synth.add_subparsers(dest="synth_command", required=True)
    p = synth_sub.add_parser("run", help="generate data, fit classifiers, write wire files")
    p.add_argument("--config", required=True, help="SyntheticConfig JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("report", help="pretty-print evaluation reports side by side")
    p.add_argument("reports", nargs="+", help="report JSON files")
    p.add_argument("--names", nargs="*", help="display names (default: file stems)")

    return parser


def cmd_validate(args) -> int:
    h = fileio.read_hierarchy(args.hierarchy)
    print(f"hierarchy ok: {len(h.node_ids)} nodes, {len(h.leaves)} leaves, "
          f"{len(h.internal_nodes)} internal, max depth {h.max_depth}")
    if args.split:
        spec = fileio.read_split_spec(args.split)
        id_h, ood_map = split_id_ood(h, spec)
        print(f"split ok: {len(id_h.leaves)} id leaves, {len(ood_map)} ood classes")
    if args.labels:
        dataset = fileio.read_labels(args.labels)
        dataset.validate_against(h)
        counts = {p: len(dataset.partition_samples(p))
                  for p in ("id_train", "id_test", "ood_test")}
        print(f"labels ok: {counts}")
    if args.stacks:
        index = depth_class_index(h)
        batch = fileio.load_stack_batch(args.stacks, index)
        for row in range(batch.n_samples):
            batch.stack_for(row).validate(index, atol=fileio.FILE_ROW_SUM_TOL)
        print(f"stacks ok: {batch.n_samples} samples x depths 1..{index.max_depth}"
              f"{' with logits' if batch.logits is not None else ''}")
    return 0


def cmd_split(args) -> int:
    full = fileio.read_hierarchy(args.hierarchy)
    spec = fileio.read_split_spec(args.spec)
    id_h, ood_map = split_id_ood(full, spec)
    print(f"id leaves: {len(id_h.leaves)}")
    print(f"ood classes: {len(ood_map)}")
    print(f"internal nodes: {len(id_h.internal_nodes)}")
    print(f"max depth: {id_h.max_depth}")
    if args.out_hierarchy:
        fileio.write_hierarchy(id_h, args.out_hierarchy)
    if args.out_map:
        with open(args.out_map, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["removed_leaf", "mapped_node"])
            for leaf in sorted(ood_map):
                writer.writerow([leaf, ood_map[leaf]])
    if args.labels and args.out_labels:
        dataset = fileio.read_labels(args.labels)
        remapped = []
        for s in dataset.samples:
            if s.label in ood_map:
                remapped.append(Sample(s.sample_id, ood_map[s.label], "ood_test"))
            else:
                remapped.append(s)
        fileio.write_labels(LabeledDataset(samples=tuple(remapped)), args.out_labels)
    return 0


def cmd_infer(args) -> int:
    h = fileio.read_hierarchy(args.hierarchy)
    index = depth_class_index(h)
    batch = fileio.load_stack_batch(args.stacks, index)
    rule = DecisionRule(args.rule)
    labels = None
    if rule is DecisionRule.DEPTH_ORACLE:
        if not args.labels:
            raise TreeOodError("--rule oracle needs --labels")
        dataset = fileio.read_labels(args.labels)
        by_id = {s.sample_id: s.label for s in dataset.samples}
        missing = [sid for sid in batch.sample_ids if sid not in by_id]
        if missing:
            raise SampleSetMismatch(
                f"label file is missing {len(missing)} stack sample(s), "
                f"e.g. {missing[:3]}")
        labels = [by_id[sid] for sid in batch.sample_ids]
    flat = FlatTree(h, index)
    result = infer_batch(flat, batch, ScoreModel(args.score), rule,
                         root_ood=args.root_ood, true_labels=labels)
    fileio.write_predictions(result.sample_ids, result.predictions, args.out)
    print(f"wrote {len(result.sample_ids)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    h = fileio.read_hierarchy(args.hierarchy)
    predictions = fileio.read_predictions(args.predictions)
    dataset = fileio.read_labels(args.labels)
    missing = [s.sample_id for s in dataset.samples
               if s.partition != "id_train" and s.sample_id not in predictions]
    if missing:
        raise SampleSetMismatch(
            f"prediction file is missing {len(missing)} test sample(s), "
            f"e.g. {missing[:3]}")
    report = evaluate(h, predictions, dataset)
    fileio.write_report(report, args.out)
    if args.histogram:
        fileio.write_histogram(report.lca_histogram, args.histogram)
    summary = {k: report.to_dict()[k]
               for k in ("mix_bacc", "mix_bmhd", "n_id_test", "n_ood_test")}
    print(f"wrote report to {args.out}: {summary}")
    return 0


def cmd_synth_run(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = SyntheticConfig.from_dict(doc)
    h, dataset, features = generate(cfg)
    index = depth_class_index(h)
    clf = fit(h, index, dataset, features)
    test = sorted((s for s in dataset.samples if s.partition != "id_train"),
                  key=lambda s: s.sample_id)
    batch = predict_batch(clf, [s.sample_id for s in test],
                          features.rows_for([s.sample_id for s in test]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_hierarchy(h, out / "hierarchy.json")
    fileio.write_labels(dataset, out / "labels.csv")
    fileio.write_stack_files(batch, index, out)
    print(f"wrote hierarchy.json, labels.csv and depth 1..{index.max_depth} "
          f"stack files for {batch.n_samples} test samples to {out}")
    return 0


def cmd_report(args) -> int:
    names = args.names or [Path(p).stem for p in args.reports]
    if len(names) != len(args.reports):
        raise TreeOodError("--names must match the number of report files")
    reports = [fileio.read_report(p) for p in args.reports]
    cols = ["bacc_id", "bacc_ood", "mix_bacc", "bmhd_id", "bmhd_ood", "mix_bmhd"]
    width = max(len(n) for n in names + ["run"])
    header = f"{'run':<{width}}" + "".join(f"  {c:>9}" for c in cols)
    print(header)
    print("-" * len(header))
    for name, rep in zip(names, reports):
        doc = rep.to_dict()
        cells = "".join(
            f"  {doc[c]:>9.3f}" if doc[c] is not None else f"  {'-':>9}" for c in cols)
        print(f"{name:<{width}}" + cells)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "split":
            return cmd_split(args)
        if args.command == "infer":
            return cmd_infer(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "synth":
            return cmd_synth_run(args)
        if args.command == "report":
            return cmd_report(args)
    except TreeOodError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())

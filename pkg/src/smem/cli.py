"""Experiment front-end: spec parsing, sweep execution, CSV/JSON emission.

A JSON spec file describes the dataset, model, and active-learning setup
plus the (strategies x seeds) grid to run.  Results land in the output
directory as one JSON file per run, an aggregate ``results.csv``, and
accuracy figures rendered next to the CSV.  The summarize command
aggregates a results CSV into per-strategy mean and stddev per stage.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .acquisition import STRATEGIES, AcquisitionConfig
from .alloop import ALConfig, StageRecord, run_experiment
from .dataset import DatasetConfig
from .model import ModelConfig, TrainConfig

__all__ = [
    "ExperimentSpec",
    "ParseError",
    "SchemaError",
    "SummaryRow",
    "ValidationError",
    "main",
    "parse_spec",
    "run",
    "summarize",
]

CSV_HEADER = ["strategy", "seed", "stage", "labeled_count", "vqa_accuracy", "top1_accuracy"]
CSV_NAME = "results.csv"
SEEDS_ENV_VAR = "SMEM_SEEDS"

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_SPEC_FAILURE = 2


class ParseError(ValueError):
    """The spec file is not syntactically valid."""


class ValidationError(ValueError):
    """The spec file violates an invariant of the documented key schema."""


class SchemaError(ValueError):
    """A results CSV does not match the emitted schema."""


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetConfig
    model: ModelConfig
    al: ALConfig
    strategies: list[str]
    seeds: list[int]
    output_dir: str


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    stage: int
    labeled_count: int
    vqa_mean: float
    vqa_std: float
    top1_mean: float
    top1_std: float


def _take(mapping: dict, allowed: tuple[str, ...], context: str) -> dict:
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")
    return mapping


def _build(cls, values: dict, context: str, rename: dict[str, str] | None = None):
    values = dict(values)
    for file_key, field_name in (rename or {}).items():
        if file_key in values:
            values[field_name] = values.pop(file_key)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{context}: {exc}") from exc


def parse_spec(text: str) -> ExperimentSpec:
    """Parse and validate a JSON experiment spec, filling documented defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError("spec must be a JSON object")
    _take(data, ("dataset", "model", "al", "strategies", "seeds", "output_dir"), "spec")

    dataset_raw = _take(
        dict(data.get("dataset", {})),
        ("pool_size", "test_size", "num_classes", "dim_v", "dim_q",
         "mode_fractions", "label_noise", "seed"),
        "dataset",
    )
    if "mode_fractions" in dataset_raw:
        dataset_raw["mode_fractions"] = tuple(dataset_raw["mode_fractions"])
    dataset = _build(DatasetConfig, dataset_raw, "dataset")

    model_raw = _take(dict(data.get("model", {})),
                      ("dim_v", "dim_q", "hidden", "num_classes", "lambda", "seed"), "model")
    # feature widths and class count default to the dataset's
    model_raw.setdefault("dim_v", dataset.dim_v)
    model_raw.setdefault("dim_q", dataset.dim_q)
    model_raw.setdefault("num_classes", dataset.num_classes)
    model = _build(ModelConfig, model_raw, "model", rename={"lambda": "distill_weight"})
    if model.dim_v != dataset.dim_v or model.dim_q != dataset.dim_q:
        raise ValidationError("model feature widths must match the dataset")
    if model.num_classes != dataset.num_classes:
        raise ValidationError("model num_classes must match the dataset")

    al_raw = _take(
        dict(data.get("al", {})),
        ("initial_labeled", "budget_per_stage", "num_stages", "reinit_per_stage",
         "eval_best_epoch", "train", "acquisition", "seed"),
        "al",
    )
    train_raw = _take(
        dict(al_raw.pop("train", {})),
        ("learning_rate", "max_epoch", "batch_size", "optimizer", "adamax_betas", "adamax_eps"),
        "al.train",
    )
    if "adamax_betas" in train_raw:
        train_raw["adamax_betas"] = tuple(train_raw["adamax_betas"])
    acq_raw = _take(dict(al_raw.pop("acquisition", {})),
                    ("alpha", "beta", "gamma", "kl_smoothing"), "al.acquisition")
    al = _build(
        ALConfig,
        {
            **al_raw,
            "train": _build(TrainConfig, train_raw, "al.train"),
            "acquisition": _build(AcquisitionConfig, acq_raw, "al.acquisition"),
        },
        "al",
    )
    if al.initial_labeled + al.num_stages * al.budget_per_stage > dataset.pool_size:
        raise ValidationError("initial_labeled + num_stages * budget_per_stage <= pool_size")

    strategies = data.get("strategies", [])
    if not strategies or not isinstance(strategies, list):
        raise ValidationError("strategies must be a non-empty list")
    for name in strategies:
        if name not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {name!r}; valid names: {', '.join(STRATEGIES)}"
            )

    seeds = data.get("seeds", [])
    if not seeds or not isinstance(seeds, list):
        raise ValidationError("seeds must be a non-empty list")
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")

    return ExperimentSpec(
        dataset=dataset,
        model=model,
        al=al,
        strategies=list(strategies),
        seeds=seeds,
        output_dir=str(data.get("output_dir", "results")),
    )


def _run_one(spec: ExperimentSpec, strategy: str, seed: int) -> list[StageRecord]:
    al = replace(
        spec.al,
        seed=seed,
        acquisition=replace(spec.al.acquisition, strategy=strategy),
    )
    model = replace(spec.model, seed=seed)
    return run_experiment(al, spec.dataset, model)


def _write_run_json(out_dir: Path, spec: ExperimentSpec, strategy: str, seed: int,
                    records: list[StageRecord]) -> None:
    payload = {
        "strategy": strategy,
        "seed": seed,
        "dataset": asdict(spec.dataset),
        "model": asdict(spec.model),
        "al": asdict(replace(spec.al, seed=seed,
                             acquisition=replace(spec.al.acquisition, strategy=strategy))),
        "stages": [asdict(r) for r in records],
    }
    path = out_dir / "runs" / f"{strategy}_seed{seed}.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="ascii")


def _format_csv(rows: list[tuple]) -> str:
    lines = [",".join(CSV_HEADER)]
    for strategy, seed, record in rows:
        lines.append(
            f"{strategy},{seed},{record.stage},{record.labeled_count},"
            f"{record.vqa_accuracy:.7g},{record.top1_accuracy:.7g}"
        )
    return "\n".join(lines) + "\n"


def run(spec: ExperimentSpec, workers: int = 1, out_dir: str | None = None) -> Path:
    """Execute the (strategy x seed) grid and write JSON, CSV, and figures.

    Results are assembled in spec order regardless of worker scheduling, so
    the aggregate CSV is byte-identical across reruns.  Returns the CSV
    path.
    """
    out = Path(out_dir if out_dir is not None else spec.output_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    jobs = [(strategy, seed) for strategy in spec.strategies for seed in spec.seeds]

    results: dict[tuple[str, int], list[StageRecord]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {job: pool.submit(_run_one, spec, *job) for job in jobs}
            for job, future in futures.items():
                results[job] = future.result()
                print(f"finished {job[0]} seed {job[1]}", file=sys.stderr)
    else:
        for job in jobs:
            results[job] = _run_one(spec, *job)
            print(f"finished {job[0]} seed {job[1]}", file=sys.stderr)

    for (strategy, seed), records in results.items():
        _write_run_json(out, spec, strategy, seed, records)

    rows = [
        (strategy, seed, record)
        for strategy in spec.strategies
        for seed in spec.seeds
        for record in results[(strategy, seed)]
    ]
    csv_path = out / CSV_NAME
    tmp_path = out / (CSV_NAME + ".tmp")
    tmp_path.write_text(_format_csv(rows), encoding="ascii", newline="")
    os.replace(tmp_path, csv_path)

    from .plots import save_summary_figures

    save_summary_figures(_aggregate(_read_csv(csv_path)), out, csv_path.stem)
    return csv_path


def _read_csv(path) -> list[dict]:
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty results file") from None
        if header != CSV_HEADER:
            raise SchemaError(f"unexpected header {header!r}")
        rows = []
        for line in reader:
            if len(line) != len(CSV_HEADER):
                raise SchemaError(f"malformed row: {line!r}")
            try:
                rows.append(
                    {
                        "strategy": line[0],
                        "seed": int(line[1]),
                        "stage": int(line[2]),
                        "labeled_count": int(line[3]),
                        "vqa_accuracy": float(line[4]),
                        "top1_accuracy": float(line[5]),
                    }
                )
            except ValueError as exc:
                raise SchemaError(f"malformed row {line!r}: {exc}") from exc
    if not rows:
        raise SchemaError("results file has no data rows")
    return rows


def _aggregate(rows: list[dict]) -> list[SummaryRow]:
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["strategy"], row["stage"]), []).append(row)
    out = []
    for (strategy, stage) in sorted(groups):
        members = groups[(strategy, stage)]
        vqa = [m["vqa_accuracy"] for m in members]
        top1 = [m["top1_accuracy"] for m in members]
        out.append(
            SummaryRow(
                strategy=strategy,
                stage=stage,
                labeled_count=members[0]["labeled_count"],
                vqa_mean=statistics.mean(vqa),
                vqa_std=statistics.stdev(vqa) if len(vqa) > 1 else 0.0,
                top1_mean=statistics.mean(top1),
                top1_std=statistics.stdev(top1) if len(top1) > 1 else 0.0,
            )
        )
    return out


def summarize(csv_path) -> list[SummaryRow]:
    """Aggregate a results CSV by (strategy, stage) and print the table."""
    rows = _aggregate(_read_csv(csv_path))
    print(f"{'strategy':<16} {'stage':>5} {'labeled':>8} "
          f"{'vqa_mean':>10} {'vqa_std':>10} {'top1_mean':>10} {'top1_std':>10}")
    for r in rows:
        print(
            f"{r.strategy:<16} {r.stage:>5} {r.labeled_count:>8} "
            f"{r.vqa_mean:>10.7f} {r.vqa_std:>10.7f} {r.top1_mean:>10.7f} {r.top1_std:>10.7f}"
        )
    return rows


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smem",
        description="Run or summarize multi-modal active-learning sweeps.",
    )
    parser.add_argument("--spec", type=Path, help="JSON experiment spec to run")
    parser.add_argument("--out", type=Path, help="output directory (overrides the spec)")
    parser.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
    parser.add_argument("--summarize", type=Path, metavar="CSV",
                        help="aggregate an existing results CSV and render figures")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_arg_parser().parse_args(argv)
    if args.summarize is None and args.spec is None:
        print("error: provide --spec to run or --summarize to aggregate", file=sys.stderr)
        return EXIT_SPEC_FAILURE

    if args.summarize is not None:
        try:
            rows = summarize(args.summarize)
        except (SchemaError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SPEC_FAILURE
        from .plots import save_summary_figures

        save_summary_figures(rows, args.summarize.parent, args.summarize.stem)
        return EXIT_OK

    try:
        spec = parse_spec(args.spec.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"error: cannot read spec: {exc}", file=sys.stderr)
        return EXIT_SPEC_FAILURE
    except (ParseError, ValidationError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_FAILURE

    seeds_override = os.environ.get(SEEDS_ENV_VAR)
    if seeds_override:
        try:
            seeds = [int(s) for s in seeds_override.replace(",", " ").split()]
        except ValueError:
            print(f"spec error: bad {SEEDS_ENV_VAR} value {seeds_override!r}", file=sys.stderr)
            return EXIT_SPEC_FAILURE
        if not seeds or len(set(seeds)) != len(seeds):
            print(f"spec error: {SEEDS_ENV_VAR} must list distinct seeds", file=sys.stderr)
            return EXIT_SPEC_FAILURE
        spec = replace(spec, seeds=seeds)

    try:
        csv_path = run(spec, workers=max(1, args.workers),
                       out_dir=str(args.out) if args.out else None)
    except Exception as exc:  # noqa: BLE001 - surface any run failure with code 1
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    print(f"wrote {csv_path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

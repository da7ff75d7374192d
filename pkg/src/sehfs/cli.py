"""Command-line entry point: ``sehfs {select,eval,grid,scenarios,stats}``.

Exit codes: 0 success, 2 validation error, 3 numerical abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetError, load_dataset
from .evaluation import METRICS, evaluate_selection, format_mean_std, n_selected
from .optimizer import GRID_VALUES, VARIANTS, Hyperparams, NumericalError, fit, resolve_variant
from .stats import bonferroni_dunn_cd, bonferroni_dunn_q, friedman_ranks
from .structural import CONVENTION_NOTE, SCENARIOS, analyze_scenario

logger = logging.getLogger("sehfs")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
SWEEP_FRACTIONS = (0.03, 0.06, 0.09, 0.12, 0.15, 0.18, 0.21, 1.0)
WEIGHT_NAMES = ("alpha", "beta", "gamma", "lam")
TRACE_FIELDS = ("total", "fit", "se", "recon_xf", "recon_s", "lap", "specific")


def parse_weight(text: str) -> list[float]:
    """A single value, a comma list, or ``grid`` / ``10^-3..10^3`` for the seven decades."""
    t = str(text).strip()
    if t in ("grid", "10^-3..10^3"):
        return list(GRID_VALUES)
    try:
        values = [float(x) for x in t.split(",")]
    except ValueError:
        raise ValueError(f"bad weight specification {text!r}") from None
    if any(v <= 0 for v in values):
        raise ValueError(f"weights must be positive: {text!r}")
    return values


@dataclass
class RunConfig:
    manifest: str
    weights: dict[str, list[float]] = field(default_factory=lambda: {k: [1.0] for k in WEIGHT_NAMES})
    variant: str = "full"
    fractions: list[float] = field(default_factory=lambda: [0.2])
    folds: int = 10
    seed: int = 0
    out: str = "."
    jobs: int = 1
    max_iter: int = 100
    normalization: str = "minmax"
    mlknn_k: int = 10

    def hyperparams(self, **override) -> Hyperparams:
        values = {k: v[0] for k, v in self.weights.items()}
        values.update(override)
        return Hyperparams(
            **values,
            seed=self.seed,
            max_outer_iters=self.max_iter,
            normalization=self.normalization,
        )

    def config_hash(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def metadata(self) -> dict:
        return {
            "version": __version__,
            "seed": self.seed,
            "variant": self.variant,
            "config_hash": self.config_hash(),
        }


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- select


def cmd_select(config: RunConfig) -> dict[str, Path]:
    data = load_dataset(config.manifest)
    variant = resolve_variant(config.variant)
    hp = config.hyperparams()
    result = fit(data, hp, variant)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "metadata": config.metadata(),
        "dataset": data.name,
        "manifest": str(config.manifest),
        **result.to_dict(),
    }
    sel = out / "selection.json"
    _write_json(sel, payload)
    trace = out / "trace.csv"
    with trace.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("iteration",) + TRACE_FIELDS)
        for i, b in enumerate(result.trace):
            w.writerow([i] + [repr(getattr(b, f)) for f in TRACE_FIELDS])
    logger.info("selected %d features in %d iterations -> %s", data.d, result.iterations, sel)
    return {"selection": sel, "trace": trace}


# ---------------------------------------------------------------- eval

METRIC_COLUMNS = (
    ["dataset", "variant", "fraction", "n_features"]
    + [c for m in METRICS for c in (m, f"{m}_std")]
    + [f"{m}_fmt" for m in METRICS]
)


def _metrics_row(dataset, variant, fraction, nfeat, rep) -> dict:
    row = {"dataset": dataset, "variant": variant, "fraction": fraction, "n_features": nfeat}
    for m in METRICS:
        row[m] = getattr(rep, m)
        row[f"{m}_std"] = getattr(rep, f"{m}_std")
        row[f"{m}_fmt"] = format_mean_std(row[m], row[f"{m}_std"])
    return row


def _eval_one(args):
    manifest, ranking, fraction, folds, k, seed, normalization = args
    data = load_dataset(manifest)
    return evaluate_selection(data, ranking, fraction, folds, k, seed, normalization)


def cmd_eval(config: RunConfig, selection) -> dict[str, Path]:
    sel_path = Path(selection)
    if sel_path.is_dir():
        sel_path = sel_path / "selection.json"
    if not sel_path.is_file():
        raise FileNotFoundError(f"missing selection: {sel_path}")
    sel = json.loads(sel_path.read_text())
    data = load_dataset(config.manifest)
    ranking = sel["ranking"]
    if len(ranking) != data.d:
        raise DatasetError(f"selection ranks {len(ranking)} features, dataset has {data.d}")
    tasks = [
        (config.manifest, ranking, f, config.folds, config.mlknn_k, config.seed, config.normalization)
        for f in config.fractions
    ]
    reports = _map(_eval_one, tasks, config.jobs)
    variant = sel.get("variant", config.variant)
    rows = [
        _metrics_row(data.name, variant, f, n_selected(data.d, f), rep)
        for f, rep in zip(config.fractions, reports)
    ]
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    mjson = out / "metrics.json"
    _write_json(mjson, {
        "metadata": config.metadata(),
        "selection": str(sel_path),
        "results": [dict(r, per_fold=rep.per_fold, skipped=rep.skipped) for r, rep in zip(rows, reports)],
    })
    mcsv = out / "metrics.csv"
    with mcsv.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return {"json": mjson, "csv": mcsv}


# ---------------------------------------------------------------- grid


def grid_points(config: RunConfig) -> list[dict[str, float]]:
    names = list(WEIGHT_NAMES)
    return [dict(zip(names, combo)) for combo in itertools.product(*(config.weights[n] for n in names))]


def _grid_one(args):
    manifest, point, config = args
    data = load_dataset(manifest)
    hp = config.hyperparams(**point)
    result = fit(data, hp, config.variant)
    rep = evaluate_selection(
        data, result.ranking, config.fractions[0], config.folds, config.mlknn_k, config.seed,
        config.normalization,
    )
    return point, rep, result.iterations, result.converged


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_grid(config: RunConfig) -> dict[str, Path]:
    points = grid_points(config)
    results = _map(_grid_one, [(config.manifest, p, config) for p in points], config.jobs)
    rows = []
    for point, rep, iters, conv in results:
        row = {k: point[k] for k in WEIGHT_NAMES}
        row.update({m: getattr(rep, m) for m in METRICS})
        row.update({f"{m}_std": getattr(rep, f"{m}_std") for m in METRICS})
        row.update(iterations=iters, converged=conv)
        rows.append(row)
    rows.sort(key=lambda r: -r["ap"])
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    board = out / "leaderboard.csv"
    with board.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    best = out / "best.json"
    _write_json(best, {"metadata": config.metadata(), "runs": len(rows), "best": rows[0]})
    return {"leaderboard": board, "best": best}


# ---------------------------------------------------------------- scenarios


def cmd_scenarios(eps: float = 1e-6) -> str:
    lines = [
        f"{'scenario':<10} {'H*':>8} {'H2':>8} {'gap2':>8} {'HT':>8} {'gapT':>8} "
        f"{'HT_ref':>8} {'gapT_ref':>8}  gapT<gap2",
    ]
    for which in SCENARIOS:
        r = analyze_scenario(which, eps)
        lines.append(
            f"{which:<10} {r.joint_entropy:8.4f} {r.second_order:8.4f} {r.second_order_gap:8.4f} "
            f"{r.tree_entropy:8.4f} {r.tree_gap:8.4f} {r.reference_tree_entropy:8.4f} "
            f"{r.reference_tree_gap:8.4f}  {'pass' if r.tree_beats_second_order else 'FAIL'}"
        )
    lines.append("")
    lines.append(CONVENTION_NOTE)
    return "\n".join(lines)


# ---------------------------------------------------------------- stats


def read_score_table(path) -> tuple[list[str], list[str], np.ndarray]:
    """CSV with header ``dataset,<method>,...`` and one row per dataset.

    Returns (methods, datasets, methods x datasets scores).
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DatasetError(f"{path}: need a header and at least one dataset row")
    methods = [m.strip() for m in rows[0][1:]]
    datasets = [r[0].strip() for r in rows[1:]]
    try:
        table = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if table.shape[1] != len(methods):
        raise DatasetError(f"{path}: ragged table")
    return methods, datasets, table.T


def cmd_stats(table_path, higher_is_better=True, q_alpha=None, alpha=0.05, out=None) -> str:
    methods, datasets, scores = read_score_table(table_path)
    k, N = scores.shape
    if k < 2:
        raise ValueError("need ≥2 methods")
    if N < 2:
        raise ValueError("need ≥2 datasets")
    fr = friedman_ranks(scores, higher_is_better, alpha)
    q = bonferroni_dunn_q(k, alpha) if q_alpha is None else q_alpha
    cd = bonferroni_dunn_cd(k, N, q)
    lines = [f"methods={k} datasets={N}"]
    for name, r in sorted(zip(methods, fr.avg_ranks), key=lambda t: t[1]):
        lines.append(f"  {name:<16} avg rank {r:.4f}")
    lines.append(f"chi2_F = {fr.chi2:.4f}")
    lines.append(f"F_F = {fr.ff:.4f} (critical value {fr.critical_value:.4f} at alpha={alpha})")
    lines.append(f"q_alpha = {q:.4f}")
    lines.append(f"CD = {cd:.4f}")
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "ranks.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "avg_rank"] + datasets)
            for name, avg, row in zip(methods, fr.avg_ranks, fr.rank_table):
                w.writerow([name, repr(float(avg))] + [repr(float(x)) for x in row])
        _write_json(out / "stats.json", {
            "methods": methods, "datasets": datasets,
            "avg_ranks": [float(x) for x in fr.avg_ranks],
            "chi2_F": fr.chi2, "F_F": fr.ff if np.isfinite(fr.ff) else "inf",
            "critical_value": fr.critical_value, "q_alpha": q, "cd": cd,
        })
    return "\n".join(lines)


# ---------------------------------------------------------------- argument parsing


def _default_seed() -> int:
    return int(os.environ.get("SEHFS_SEED", "0"))


def _add_run_args(p, fractions_default="0.2"):
    p.add_argument("--manifest", required=True, help="dataset manifest.json or its directory")
    for name, flag in zip(WEIGHT_NAMES, ("--alpha", "--beta", "--gamma", "--lambda")):
        p.add_argument(flag, dest=name, default="1", help="value, comma list, or 'grid'")
    p.add_argument("--variant", default="full", help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--fraction", default=fractions_default, help="fraction(s) of features kept")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="defaults to $SEHFS_SEED or 0")
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--normalization", default="minmax", choices=("none", "minmax", "zscore"))
    p.add_argument("--mlknn-k", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sehfs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run feature selection; writes selection.json and trace.csv")
    _add_run_args(p)
    p = sub.add_parser("eval", help="evaluate a selection with cross-validated ML-kNN")
    _add_run_args(p)
    p.add_argument("--selection", required=True, help="selection.json or its directory")
    p.add_argument("--sweep", action="store_true", help="evaluate 3%%..21%% and all features")
    p = sub.add_parser("grid", help="hyperparameter grid ranked by AP")
    _add_run_args(p)
    p = sub.add_parser("scenarios", help="entropy report for the synergy / redundancy scenarios")
    p.add_argument("--eps", type=float, default=1e-6)
    p = sub.add_parser("stats", help="Friedman test and Bonferroni-Dunn critical difference")
    p.add_argument("--table", required=True, help="CSV: dataset,<method>,... one row per dataset")
    p.add_argument("--lower-is-better", action="store_true")
    p.add_argument("--q-alpha", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None)
    return parser


def config_from_args(args) -> RunConfig:
    weights = {name: parse_weight(getattr(args, name)) for name in WEIGHT_NAMES}
    if args.command != "grid":
        multi = [n for n, v in weights.items() if len(v) > 1]
        if multi:
            raise ValueError(f"{', '.join(multi)} given several values; use the grid command")
    if getattr(args, "sweep", False):
        fractions = list(SWEEP_FRACTIONS)
    else:
        fractions = [float(x) for x in str(args.fraction).split(",")]
    for f in fractions:
        n_selected(1, f)  # range check
    return RunConfig(
        manifest=args.manifest,
        weights=weights,
        variant=resolve_variant(args.variant),
        fractions=fractions,
        folds=args.folds,
        seed=_default_seed() if args.seed is None else args.seed,
        out=args.out,
        jobs=max(1, args.jobs),
        max_iter=args.max_iter,
        normalization=args.normalization,
        mlknn_k=args.mlknn_k,
    )


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scenarios":
            print(cmd_scenarios(args.eps))
        elif args.command == "stats":
            print(cmd_stats(args.table, not args.lower_is_better, args.q_alpha, args.alpha, args.out))
        else:
            config = config_from_args(args)
            if args.command == "select":
                paths = cmd_select(config)
            elif args.command == "eval":
                paths = cmd_eval(config, args.selection)
            else:
                paths = cmd_grid(config)
            for key, path in paths.items():
                print(f"{key}: {path}")
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

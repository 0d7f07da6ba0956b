"""Experiment runner.

Commands: ``bench``, ``engineering``, ``segment`` and ``stats``. Settings come
from an optional flat JSON document (``--config``) overridden by flags.
Every command writes CSV data plus a ``manifest.json`` that echoes the
resolved configuration and seeds. Wall-clock figures only go to files listed
under ``timing_files`` in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .apo import ApoParams, ApoResult, optimize
from .baseline import random_search
from .benchfns import REGISTRY, get_function, load_transform
from .constraints import PROBLEMS, PenaltyPolicy, get_problem, is_feasible, penalize
from .core import ConfigError, ProtozoaError
from .metrics import (
    RunRecord,
    diversity_trace,
    friedman_mean_ranks,
    stability_summary,
    wilcoxon_signed_rank,
)
from .pnm import read_ppm, write_ppm
from .segmentation import SSIM_WINDOW, psnr, segment_rgb, ssim

ALGORITHMS = ("apo", "random")

DEFAULTS: dict[str, Any] = {
    "algo": "apo",
    "dim": 20,
    "ps": 100,
    "np": 1,
    "pfmax": 0.1,
    "maxfes": None,
    "iters": None,
    "repeats": None,
    "seed": 0,
    "out": "results",
    "penalty": 1e10,
    "alpha": 0.05,
    "column": "best",
}

# per-command budget and repeat defaults
COMMAND_DEFAULTS = {
    "bench": {"maxfes": 100_000, "repeats": 30, "fn": "sphere"},
    "engineering": {"iters": 500, "repeats": 31, "problem": ",".join(PROBLEMS)},
    "segment": {"iters": 100, "repeats": 31, "thresholds": "2,4,6,8,10"},
    "stats": {},
}


def fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _names(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [s.strip() for s in str(value).split(",") if s.strip()]


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat JSON object")
        cfg.update(data)
    for key, val in vars(args).items():
        if key not in ("command", "config", "func") and val is not None:
            cfg[key] = val
    cfg["command"] = command
    if cfg.get("repeats") is not None and int(cfg["repeats"]) < 1:
        raise ConfigError("repeats must be at least 1")
    if cfg.get("algo") not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.get('algo')!r}; valid: {', '.join(ALGORITHMS)}")
    return cfg


def _params(cfg: dict) -> ApoParams:
    ps = int(cfg["ps"])
    if cfg.get("maxfes") is not None:
        max_fes = int(cfg["maxfes"])
    elif cfg.get("iters") is not None:
        max_fes = int(cfg["iters"]) * ps
    else:
        raise ConfigError("set either maxfes or iters")
    try:
        return ApoParams(ps=ps, np_pairs=int(cfg["np"]), pf_max=float(cfg["pfmax"]), max_fes=max_fes)
    except ProtozoaError as exc:
        raise ConfigError(str(exc)) from exc


def _run(objective, params: ApoParams, algo: str, seed: int, callback=None) -> ApoResult:
    if algo == "apo":
        return optimize(objective, params, seed, callback=callback)
    return random_search(objective, params.max_fes, seed, batch=params.ps, callback=callback)


def write_manifest(out: Path, cfg: dict, seeds: list, files: list, timing_files=(), extra=None) -> None:
    doc = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "seeds": seeds,
        "files": sorted(files),
        "timing_files": sorted(timing_files),
        "versions": {
            "protozoa": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ bench --

def run_bench(cfg: dict) -> list[Path]:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    params = _params(cfg)
    dim, repeats, base = int(cfg["dim"]), int(cfg["repeats"]), int(cfg["seed"])
    names = _names(cfg["fn"])
    for n in names:
        if n not in REGISTRY:
            raise ConfigError(f"unknown function {n!r}; valid: {', '.join(sorted(REGISTRY))}")
    transform = load_transform(cfg["transform"]) if cfg.get("transform") else None

    files, summary, run_rows = [], [], []
    for name in names:
        fn = get_function(name)
        if transform is not None:
            fn = fn.with_transform(transform)
        objective = fn.objective(dim)
        bests = []
        for r in range(repeats):
            seed = base + r
            res = _run(objective, params, cfg["algo"], seed)
            dt = diversity_trace([row.diversity for row in res.trace])
            path = out / "traces" / f"{name}_{cfg['algo']}_run{r:03d}.csv"
            write_csv(path, ["iter", "fes", "best", "div", "err", "eir"],
                      [(row.iter, row.fes, row.best, row.diversity, e, i)
                       for row, e, i in zip(res.trace, dt.err, dt.eir)])
            files.append(path)
            bests.append(res.best_fitness)
            run_rows.append((name, cfg["algo"], r, seed, res.best_fitness, res.fes_used))
        arr = np.array(bests)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        summary.append((name, cfg["algo"], dim, repeats, arr.mean(), std, arr.min()))

    runs_path = out / "bench_runs.csv"
    write_csv(runs_path, ["function", "algorithm", "run", "seed", "best", "fes"], run_rows)
    sum_path = out / "bench_summary.csv"
    write_csv(sum_path, ["function", "algorithm", "dim", "repeats", "mean", "std", "min"], summary)
    files += [runs_path, sum_path]
    write_manifest(out, cfg, [base + r for r in range(repeats)], [str(f.relative_to(out)) for f in files])
    return files


# ------------------------------------------------------------ engineering --

def _load_targets(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read targets {path}: {exc}") from exc
    return {str(k): float(v) for k, v in data.items()}


def run_engineering(cfg: dict) -> list[Path]:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    params = _params(cfg)
    repeats, base = int(cfg["repeats"]), int(cfg["seed"])
    names = _names(cfg["problem"])
    for n in names:
        if n not in PROBLEMS:
            raise ConfigError(f"unknown problem {n!r}; valid: {', '.join(PROBLEMS)}")
    targets = _load_targets(cfg["targets"]) if cfg.get("targets") else None
    if targets is None:
        print("notice: no targets given; stability table skipped", file=sys.stderr)
    policy = PenaltyPolicy(float(cfg["penalty"]))

    files, timing, run_rows, stab_rows, time_rows = [], [], [], [], []
    for name in names:
        problem = get_problem(name)
        objective = penalize(problem, policy)
        target = None if targets is None else targets.get(name)
        records, results = [], []
        for r in range(repeats):
            seed = base + r
            hit: dict = {}
            start = time.perf_counter()

            def watch(fes, best, _hit=hit, _start=start):
                if target is None or _hit:
                    return
                if best.fitness <= target and is_feasible(problem, best.position):
                    _hit["fes"] = fes
                    _hit["seconds"] = time.perf_counter() - _start

            res = _run(objective, params, cfg["algo"], seed, callback=watch)
            results.append(res)
            feasible = is_feasible(problem, res.best.position)
            raw = float(problem.objective(res.best.position))
            run_rows.append((name, cfg["algo"], r, seed, raw, feasible, hit.get("fes")))
            records.append(RunRecord(bool(hit), hit.get("fes"), hit.get("seconds", 0.0)))
            time_rows.append((name, cfg["algo"], r, seed, hit.get("seconds")))

        order = sorted(range(repeats), key=lambda i: (not is_feasible(problem, results[i].best.position),
                                                     results[i].best_fitness))
        top = results[order[0]]
        best_path = out / f"engineering_{name}_best.csv"
        write_csv(best_path, ["algorithm", "seed", *problem.variables, "optimum", "feasible"],
                  [(cfg["algo"], base + order[0], *top.best.position,
                    float(problem.objective(top.best.position)),
                    is_feasible(problem, top.best.position))])
        files.append(best_path)
        if not is_feasible(problem, top.best.position):
            print(f"notice: no feasible design found for {name}", file=sys.stderr)
        if target is not None:
            s = stability_summary(records)
            stab_rows.append((name, cfg["algo"], target, s.sr, s.afes, s.acds))

    runs_path = out / "engineering_runs.csv"
    write_csv(runs_path, ["problem", "algorithm", "run", "seed", "objective", "feasible",
                          "fes_to_target"], run_rows)
    files.append(runs_path)
    if targets is not None:
        stab_path = out / "engineering_stability.csv"
        write_csv(stab_path, ["problem", "algorithm", "target", "sr", "afes", "acds"], stab_rows)
        time_path = out / "engineering_timing.csv"
        write_csv(time_path, ["problem", "algorithm", "run", "seed", "seconds_to_target"], time_rows)
        files += [stab_path, time_path]
        timing += [stab_path, time_path]
    rel = lambda fs: [str(f.relative_to(out)) for f in fs]
    write_manifest(out, cfg, [base + r for r in range(repeats)], rel(files), rel(timing))
    return files


# ---------------------------------------------------------------- segment --

def run_segment(cfg: dict) -> list[Path]:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.get("image"):
        raise ConfigError("segment needs --image")
    img = read_ppm(cfg["image"])
    params = _params(cfg)
    repeats, base = int(cfg["repeats"]), int(cfg["seed"])
    levels = [int(n) for n in _names(cfg["thresholds"])]
    if any(n < 1 for n in levels):
        raise ConfigError("threshold counts must be positive")

    files, thr_rows, met_rows, sum_rows = [], [], [], []
    for n in levels:
        best = None
        for r in range(repeats):
            seed = base + r
            seg, res = segment_rgb(img, n, params, seed)
            p, s = psnr(img, seg), ssim(img, seg)
            for c, tr in enumerate(res):
                thr_rows += [(n, r, "rgb"[c], k + 1, t) for k, t in enumerate(tr.thresholds)]
            values = [tr.value for tr in res]
            met_rows.append((n, r, seed, p, s, *values))
            if best is None or p > best[0]:
                best = (p, s, values, seg)
        p, s, values, seg = best
        img_path = out / f"segmented_n{n:02d}.ppm"
        write_ppm(seg, img_path)
        files.append(img_path)
        sum_rows.append((n, p, s, *values))

    paths = {
        "segment_thresholds.csv": (["n", "run", "channel", "k", "t_k"], thr_rows),
        "segment_metrics.csv": (["n", "run", "seed", "psnr", "ssim", "mcet_r", "mcet_g", "mcet_b"],
                                met_rows),
        "segment_summary.csv": (["n", "psnr", "ssim", "mcet_r", "mcet_g", "mcet_b"], sum_rows),
    }
    for fname, (header, rows) in paths.items():
        write_csv(out / fname, header, rows)
        files.append(out / fname)
    write_manifest(out, cfg, [base + r for r in range(repeats)],
                   [str(f.relative_to(out)) for f in files],
                   extra={"ssim_window": SSIM_WINDOW, "channel_seeds": "run seed + channel index"})
    return files


# ------------------------------------------------------------------ stats --

def _read_rows(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _column(path, name) -> list[float]:
    rows = _read_rows(path)
    if not rows or name not in rows[0]:
        raise ConfigError(f"{path} has no column {name!r}")
    return [float(r[name]) for r in rows]


def run_stats(cfg: dict) -> list[Path]:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if cfg.get("matrix"):
        with open(cfg["matrix"], newline="") as fh:
            rows = list(csv.reader(fh))
        labels = rows[0][1:]
        m = [[float(v) for v in row[1:]] for row in rows[1:] if row]
        res = friedman_mean_ranks(m, labels)
        path = out / "friedman_ranks.csv"
        write_csv(path, ["algorithm", "mean_rank", "ranking"],
                  zip(res.labels, res.mean_ranks, res.ranking))
        files.append(path)
    if cfg.get("pair"):
        a_path, b_path = cfg["pair"]
        res = wilcoxon_signed_rank(_column(a_path, cfg["column"]), _column(b_path, cfg["column"]),
                                   float(cfg["alpha"]))
        path = out / "wilcoxon.csv"
        write_csv(path, ["n", "r_plus", "r_minus", "p_value", "method", "verdict"],
                  [(res.n, res.r_plus, res.r_minus, res.p_value, res.method, res.verdict)])
        files.append(path)
    if cfg.get("runs"):
        recs = []
        for row in _read_rows(cfg["runs"]):
            fes = row.get("fes_to_target") or row.get("fes_to_feasible")
            ok = fes not in (None, "", "-")
            recs.append(RunRecord(ok, int(float(fes)) if ok else None,
                                  float(row.get("duration_seconds") or 0.0)))
        s = stability_summary(recs)
        path = out / "stability.csv"
        write_csv(path, ["runs", "successes", "sr", "afes", "acds"],
                  [(s.runs, s.successes, s.sr, s.afes, s.acds)])
        files.append(path)
    if not files:
        raise ConfigError("stats needs --matrix, --pair or --runs")
    write_manifest(out, cfg, [], [str(f.relative_to(out)) for f in files])
    return files


COMMANDS = {"bench": run_bench, "engineering": run_engineering,
            "segment": run_segment, "stats": run_stats}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protozoa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON document with default settings")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="base seed; run r uses seed + r")

    def budget(p):
        p.add_argument("--algo", help="apo or random")
        p.add_argument("--ps", type=int, help="population size")
        p.add_argument("--np", type=int, help="neighbor pairs")
        p.add_argument("--pfmax", type=float, help="maximum proportion fraction")
        p.add_argument("--maxfes", type=int, help="evaluation budget per run")
        p.add_argument("--iters", type=int, help="iterations per run (budget = iters * ps)")
        p.add_argument("--repeats", type=int, help="independent runs")

    p = sub.add_parser("bench", help="unconstrained test functions")
    common(p), budget(p)
    p.add_argument("--fn", help="comma-separated function names")
    p.add_argument("--dim", type=int)
    p.add_argument("--transform", help="shift/rotation file applied to every function")

    p = sub.add_parser("engineering", help="constrained design problems")
    common(p), budget(p)
    p.add_argument("--problem", help="comma-separated problem names")
    p.add_argument("--targets", help="JSON object mapping problem name to target objective")
    p.add_argument("--penalty", type=float, help="penalty coefficient")

    p = sub.add_parser("segment", help="multilevel colour thresholding of a PPM image")
    common(p), budget(p)
    p.add_argument("--image", help="binary PPM input")
    p.add_argument("--thresholds", help="comma-separated threshold counts")

    p = sub.add_parser("stats", help="rank statistics over existing CSV files")
    common(p)
    p.add_argument("--matrix", help="CSV: first column problem, one column per algorithm")
    p.add_argument("--pair", nargs=2, metavar=("A", "B"), help="two CSVs compared column-wise")
    p.add_argument("--column", help="column used by --pair (default best)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--runs", help="CSV with fes_to_target (or fes_to_feasible) per run")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        for path in COMMANDS[args.command](cfg):
            print(path)
    except (ProtozoaError, KeyError, ValueError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Experiment harness: ``msns {gen,solve,cv,bench,estimate} --config run.yaml``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 solver error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import CV_VALUES, CvGrid, Dataset, cv_grid_search, generate_synthetic, load_csv, load_libsvm, run_tasks, write_csv
from .estimator import SOLVERS, MSNSClassifier, derive_parameters
from .exceptions import ConfigError, DataError, MSNSError, SolverError
from .solver import TRACE_HEADER

logger = logging.getLogger("msns")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
PROBLEMS = ("synthetic", "csv", "libsvm")


@dataclass
class RunConfig:
    """Flat run configuration; see the README for every key."""

    problem: str = "synthetic"
    n: int = 20
    NS: int = 2000
    K_test: int = 50000
    path: str | None = None
    test_path: str | None = None
    label_map: dict | None = None
    eps: float | None = 0.1
    lambda1: float = 0.5
    t: float = 10.0
    solver: str = "msns"
    bench_solvers: list = field(default_factory=lambda: ["msns", "mmdsa", "rspg"])
    seeds: list = field(default_factory=lambda: [0])
    master_seed: int = 0
    N: int | None = None
    m: int | None = None
    mu: float | None = None
    x0: list | None = None
    trace_stride: int | None = None
    compute_gap: bool = True
    output_dir: str = "out"
    workers: int = 1
    cv_t_values: list = field(default_factory=lambda: list(CV_VALUES))
    cv_lambda_values: list = field(default_factory=lambda: list(CV_VALUES))
    cv_folds: int = 3
    cv_repeats: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.problem != "synthetic" and not self.path:
            raise ConfigError(f"problem {self.problem!r} needs a path")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        bad = [s for s in self.bench_solvers if s not in SOLVERS]
        if bad:
            raise ConfigError(f"unknown bench solvers {bad}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if any(int(s) != s for s in self.seeds):
            raise ConfigError("seeds must be integers")
        overridden = self.N is not None and self.m is not None and self.mu is not None
        if self.eps is None and not overridden:
            raise ConfigError("eps is required unless N, m and mu are all given")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if not self.t > 0 or self.lambda1 < 0:
            raise ConfigError("t must be positive and lambda1 nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for name in ("n", "NS", "K_test", "cv_folds", "cv_repeats"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def from_mapping(cls, data) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping of keys to values")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return RunConfig.from_mapping(data)


def dump_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_mapping(), fh, sort_keys=True)


def _seq(cfg: RunConfig, seed: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(cfg.master_seed), int(seed), stream])


def load_problem(cfg: RunConfig, seed: int):
    """Return ``(train, test, x_bar)``; ``x_bar`` is ``None`` for files."""
    if cfg.problem == "synthetic":
        return generate_synthetic(cfg.n, cfg.NS, cfg.K_test, cfg.t, _seq(cfg, seed, 0))
    loader = load_csv if cfg.problem == "csv" else load_libsvm
    try:
        train = loader(cfg.path, cfg.label_map)
        test = loader(cfg.test_path, cfg.label_map) if cfg.test_path else train
    except OSError as exc:
        raise DataError(str(exc)) from None
    if test.n != train.n:
        raise DataError(f"test data has {test.n} features, training data {train.n}")
    return train, test, None


def _fit(cfg: RunConfig, train: Dataset, seed: int, solver: str) -> MSNSClassifier:
    clf = MSNSClassifier(eps=cfg.eps, lambda1=cfg.lambda1, t=cfg.t, solver=solver, N=cfg.N, m=cfg.m,
                         mu=cfg.mu, x0=cfg.x0, trace_stride=cfg.trace_stride,
                         compute_gap=cfg.compute_gap and solver == "msns", random_state=_seq(cfg, seed, 1))
    try:
        return clf.fit(train.Z, train.y)
    except MSNSError:
        raise
    except ValueError as exc:
        raise SolverError(f"seed {seed}: {exc}") from exc


def _run_row(clf: MSNSClassifier, train: Dataset, test: Dataset, seed: int) -> dict:
    rep, p, est = clf.report_, clf.params_, clf.estimates_
    return {
        "seed": int(seed),
        "solver": rep.solver,
        "x_hat": [float(v) for v in clf.coef_],
        "train_obj": clf.objective(train.Z, train.y),
        "test_obj": clf.objective(test.Z, test.y),
        "accuracy": float(clf.score(test.Z, test.y)),
        "gap": rep.gap,
        "u_hat": None if np.isnan(rep.u_hat) else rep.u_hat,
        "oracle_calls": rep.oracle_calls,
        "wall_time": rep.wall_time,
        "params": {"N": p.N, "m": p.m, "mu": p.mu, "A_norm": est.A_norm, "sigma2": est.sigma2,
                   "L_f": est.L_f, "L": p.L_total, "Sigma_norm": est.Sigma_norm},
        "meta": {k: v for k, v in rep.meta.items() if k not in ("N", "m")},
    }


def _solve_task(args):
    cfg_map, seed, solvers = args
    cfg = RunConfig.from_mapping(cfg_map)
    train, test, _ = load_problem(cfg, seed)
    out = []
    for s in solvers:
        clf = _fit(cfg, train, seed, s)
        out.append((_run_row(clf, train, test, seed), clf.report_.trace))
    return out


def write_trace(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow([r.k, r.oracle_calls] + [format(v, ".17g") for v in r[2:]])


def read_trace(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: (int(v) if k in ("k", "oracle_calls") else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def _aggregate(rows: list[dict]) -> dict:
    test = np.array([r["test_obj"] for r in rows])
    return {
        "test_obj_mean": float(test.mean()),
        "test_obj_var": float(test.var()),
        "accuracy_mean": float(np.mean([r["accuracy"] for r in rows])),
        "wall_time_mean": float(np.mean([r["wall_time"] for r in rows])),
    }


class _Staging:
    """Write outputs into a scratch directory; move them into place only on success."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)

    def __enter__(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for p in sorted(self.tmp.rglob("*")):
                dest = self.out_dir / p.relative_to(self.tmp)
                if p.is_dir():
                    dest.mkdir(parents=True, exist_ok=True)
                else:
                    p.replace(dest)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_gen(cfg: RunConfig) -> dict:
    if cfg.problem != "synthetic":
        raise ConfigError("gen only applies to the synthetic problem")
    seed = cfg.seeds[0]
    train, test, x_bar = load_problem(cfg, seed)
    manifest = {"n": cfg.n, "NS": cfg.NS, "K_test": cfg.K_test, "t": cfg.t, "master_seed": cfg.master_seed,
                "seed": seed, "x_bar": [float(v) for v in x_bar]}
    with _Staging(cfg.output_dir) as tmp:
        write_csv(tmp / "train.csv", train)
        write_csv(tmp / "test.csv", test)
        _write_json(tmp / "manifest.json", manifest)
    return manifest


def cmd_solve(cfg: RunConfig) -> dict:
    """Estimate, derive ``(N, m, mu)``, solve and evaluate for every seed."""
    tasks = [(cfg.to_mapping(), s, [cfg.solver]) for s in cfg.seeds]
    results = [r for group in run_tasks(_solve_task, tasks, cfg.workers) for r in group]
    rows = [row for row, _ in results]
    summary = {"solver": cfg.solver, "per_seed": rows, "aggregate": _aggregate(rows)}
    with _Staging(cfg.output_dir) as tmp:
        (tmp / "traces").mkdir()
        for row, trace in results:
            write_trace(tmp / "traces" / f"{cfg.solver}_seed{row['seed']}.csv", trace)
        _write_json(tmp / "summary.json", summary)
    return summary


def cmd_bench(cfg: RunConfig) -> dict:
    """Run every solver in ``bench_solvers`` on the same data, parameters and budget."""
    if len(cfg.bench_solvers) < 2:
        raise ConfigError("bench needs at least two solvers")
    tasks = [(cfg.to_mapping(), s, list(cfg.bench_solvers)) for s in cfg.seeds]
    groups = run_tasks(_solve_task, tasks, cfg.workers)
    per_solver = {s: [] for s in cfg.bench_solvers}
    for group in groups:
        for row, _ in group:
            per_solver[row["solver"]].append(row)
    summary = {
        "solvers": list(cfg.bench_solvers),
        "per_solver": {s: {"per_seed": rows, "aggregate": _aggregate(rows)} for s, rows in per_solver.items()},
        "budgets": {s: sorted({r["oracle_calls"] for r in rows}) for s, rows in per_solver.items()},
    }
    if "msns" in per_solver and "mmdsa" in per_solver:
        summary["msns_le_mmdsa_seeds"] = sum(
            a["train_obj"] <= b["train_obj"] for a, b in zip(per_solver["msns"], per_solver["mmdsa"]))
    with _Staging(cfg.output_dir) as tmp:
        (tmp / "traces").mkdir()
        for group in groups:
            for row, trace in group:
                write_trace(tmp / "traces" / f"bench_{row['solver']}_seed{row['seed']}.csv", trace)
        _write_json(tmp / "bench_summary.json", summary)
    return summary


def cmd_cv(cfg: RunConfig) -> dict:
    train, _, _ = load_problem(cfg, cfg.seeds[0])
    grid = CvGrid(cfg.cv_t_values, cfg.cv_lambda_values, cfg.cv_folds, cfg.cv_repeats)
    est = {"eps": cfg.eps, "solver": cfg.solver, "N": cfg.N, "m": cfg.m, "mu": cfg.mu}
    res = cv_grid_search(train, grid, est, rng_seed=cfg.master_seed, workers=cfg.workers)
    with _Staging(cfg.output_dir) as tmp:
        with open(tmp / "cv_table.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "lambda1", "mean_accuracy", "mean_N", "cpu_time_s"])
            for t in grid.t_values:
                for lam in grid.lambda_values:
                    key = (t, lam)
                    w.writerow([format(t, ".17g"), format(lam, ".17g"), format(res.accuracy[key], ".17g"),
                                format(res.iterations[key], ".17g"), format(res.cpu_time[key], ".17g")])
        summary = {"best_t": res.best_t, "best_lambda1": res.best_lambda1,
                   "best_accuracy": res.accuracy[(res.best_t, res.best_lambda1)]}
        _write_json(tmp / "cv_summary.json", summary)
    return summary


def cmd_estimate(cfg: RunConfig) -> dict:
    train, _, _ = load_problem(cfg, cfg.seeds[0])
    seq = _seq(cfg, cfg.seeds[0], 1).spawn(1)[0]  # same stream the classifier uses for estimation
    try:
        _, _, p, est = derive_parameters(train.Z, train.y, cfg.eps, cfg.lambda1, cfg.t, seq,
                                         N=cfg.N, m=cfg.m, mu=cfg.mu)
    except ValueError as exc:
        raise SolverError(str(exc)) from exc
    return {"Sigma_norm": est.Sigma_norm, "A_norm": est.A_norm, "sigma2": est.sigma2, "L_f": est.L_f,
            "N": p.N, "m": p.m, "mu": p.mu, "L_h_mu": p.L_h_mu, "L": p.L_total}


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "cv": cmd_cv, "bench": cmd_bench, "estimate": cmd_estimate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msns", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--workers", type=int, help="worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("master_seed", args.seed), ("output_dir", args.out),
                                       ("workers", args.workers)) if v is not None}
        if overrides:
            cfg = RunConfig.from_mapping({**cfg.to_mapping(), **overrides})
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except (SolverError, MSNSError) as exc:
        logger.error("solver error: %s", exc)
        return EXIT_SOLVER
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

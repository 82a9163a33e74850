"""Datasets: synthetic generation, CSV/LIBSVM loading, k-fold splits and CV grid search.

CSV format
----------
UTF-8, comma separated, one sample per row: the label first, then the
features. An optional first line ``#label_map 2:-1 4:1`` maps raw label
tokens to -1/+1; without it labels must already be -1 or +1. Rows with an
empty field or one of ``? NA NaN nan`` are dropped and counted.

LIBSVM format
-------------
``<label> <idx>:<value> ...`` with 1-based, strictly increasing indices.
Features are densified to the largest index seen in the file.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BallSet
from .exceptions import DataError, MSNSError, SolverError
from .svm import sample_in_ball

MISSING = {"", "?", "NA", "NaN", "nan"}
CV_VALUES = (1e-2, 1e-1, 2.0**-2, 2.0**-1, 1.0)


@dataclass
class Dataset:
    Z: np.ndarray
    y: np.ndarray
    name: str = "data"
    dropped: int = 0

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.Z.ndim != 2 or self.Z.shape[0] == 0:
            raise DataError(f"{self.name}: dataset is empty")
        if self.y.shape != (self.Z.shape[0],):
            raise DataError(f"{self.name}: {self.y.shape[0]} labels for {self.Z.shape[0]} rows")
        if not np.all((self.y == 1.0) | (self.y == -1.0)):
            raise DataError(f"{self.name}: labels must be -1 or +1")
        if not np.all(np.isfinite(self.Z)):
            raise DataError(f"{self.name}: non-finite feature values")

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    def __len__(self) -> int:
        return self.Z.shape[0]

    def subset(self, idx, name=None) -> Dataset:
        return Dataset(self.Z[idx], self.y[idx], name or self.name)


def generate_synthetic(n: int, NS: int, K_test: int, t: float, rng_seed=None):
    """Sparse Gaussian features with labels from a hidden separator.

    Each feature entry is a standard normal draw kept with probability 0.1.
    The separator ``x_bar`` is uniform in the ball ``||x||^2 <= t`` and the
    label is ``+1`` when ``<x_bar, z> >= 0``.

    Returns
    -------
    train, test : Dataset
    x_bar : ndarray
    """
    for name, v in (("n", n), ("NS", NS), ("K_test", K_test)):
        if int(v) != v or v < 1:
            raise DataError(f"{name} must be a positive integer, got {v}")
    rng = np.random.default_rng(rng_seed)
    x_bar = sample_in_ball(rng, BallSet(float(t), int(n)), 1)[0]

    def draw(rows):
        Z = rng.standard_normal((rows, n)) * (rng.random((rows, n)) < 0.1)
        y = np.where(Z @ x_bar >= 0.0, 1.0, -1.0)
        return Z, y

    train = Dataset(*draw(int(NS)), name="train")
    test = Dataset(*draw(int(K_test)), name="test")
    return train, test, x_bar


def _parse_label_map(spec: str, where: str) -> dict:
    out = {}
    for tok in spec.split():
        raw, _, mapped = tok.partition(":")
        if not raw or mapped not in ("-1", "1", "+1"):
            raise DataError(f"{where}: bad label_map entry {tok!r}")
        out[raw] = float(mapped)
    return out


def _map_label(tok: str, label_map: dict | None, where: str) -> float:
    tok = tok.strip()
    if label_map is not None:
        if tok in label_map:
            return float(label_map[tok])
        try:
            v = float(tok)
        except ValueError:
            v = None
        for k, mapped in label_map.items():
            try:
                if v is not None and float(k) == v:
                    return float(mapped)
            except ValueError:
                pass
        raise DataError(f"{where}: label {tok!r} is not in the label map")
    try:
        v = float(tok)
    except ValueError:
        raise DataError(f"{where}: unmappable label {tok!r}") from None
    if v not in (1.0, -1.0):
        raise DataError(f"{where}: label {tok!r} is not -1/+1 and no label map was given")
    return v


def load_csv(path, label_map: dict | None = None) -> Dataset:
    """Load a CSV dataset (label first). See the module docstring for the format."""
    path = Path(path)
    labels, rows = [], []
    dropped = 0
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            first = rec[0].strip()
            if first.startswith("#"):
                if first.startswith("#label_map"):
                    if label_map is None:
                        label_map = _parse_label_map(",".join(rec)[len("#label_map"):], f"{path}:{lineno}")
                continue
            if width is None:
                width = len(rec)
                if width < 2:
                    raise DataError(f"{path}:{lineno}: need a label and at least one feature")
            elif len(rec) != width:
                raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(rec)}")
            if any(f.strip() in MISSING for f in rec):
                dropped += 1
                continue
            where = f"{path}:{lineno}"
            labels.append(_map_label(rec[0], label_map, where))
            try:
                rows.append([float(f) for f in rec[1:]])
            except ValueError as exc:
                raise DataError(f"{where}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no usable rows")
    return Dataset(np.array(rows), np.array(labels), name=path.stem, dropped=dropped)


def load_libsvm(path, label_map: dict | None = None) -> Dataset:
    """Load a LIBSVM/SVMlight file into a dense dataset.

    Labels are taken as -1/+1 directly, ``0`` is read as ``-1``; anything
    else needs ``label_map``.
    """
    path = Path(path)
    labels, entries = [], []
    n = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            toks = line.split()
            lab = toks[0]
            if label_map is None and lab.strip() in ("0", "0.0"):
                labels.append(-1.0)
            else:
                labels.append(_map_label(lab, label_map, where))
            row, last = {}, 0
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataError(f"{where}: bad token {tok!r}") from None
                if not sep or idx < 1:
                    raise DataError(f"{where}: bad token {tok!r}")
                if idx <= last:
                    raise DataError(f"{where}: feature indices must be strictly increasing")
                row[idx - 1] = val
                last = idx
            n = max(n, last)
            entries.append(row)
    if not labels:
        raise DataError(f"{path}: empty file")
    Z = np.zeros((len(labels), max(n, 1)))
    for i, row in enumerate(entries):
        for j, v in row.items():
            Z[i, j] = v
    return Dataset(Z, np.array(labels), name=path.stem)


def write_csv(path, data: Dataset):
    """Write ``data`` in the CSV format read by :func:`load_csv` (shortest round-trip floats)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for yi, zi in zip(data.y, data.Z):
            w.writerow([repr(int(yi))] + [repr(float(v)) for v in zi])


def kfold_split(n_samples: int, k: int = 3, rng_seed=None):
    """Seeded shuffle into ``k`` contiguous folds; the first ``NS % k`` folds get one extra index.

    Returns a list of ``(train_idx, validate_idx)`` pairs.
    """
    if n_samples < k:
        raise DataError(f"cannot split {n_samples} samples into {k} folds")
    perm = np.random.default_rng(rng_seed).permutation(n_samples)
    folds = np.array_split(perm, k)
    return [(np.concatenate(folds[:i] + folds[i + 1:]), folds[i]) for i in range(k)]


@dataclass
class CvGrid:
    t_values: tuple = CV_VALUES
    lambda_values: tuple = CV_VALUES
    folds: int = 3
    repeats: int = 20

    def __post_init__(self):
        self.t_values = tuple(float(v) for v in self.t_values)
        self.lambda_values = tuple(float(v) for v in self.lambda_values)
        if not self.t_values or not self.lambda_values:
            raise ValueError("grid must be nonempty")
        if min(self.t_values + self.lambda_values) <= 0:
            raise ValueError("grid values must be strictly positive")


@dataclass
class CvResult:
    best_t: float
    best_lambda1: float
    accuracy: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    cpu_time: dict = field(default_factory=dict)


def _split_seed(master, rep):
    # splits are shared by all cells of a repeat so cells are compared on the same folds
    return np.random.SeedSequence(int(master), spawn_key=(0, rep))


def _cell_seed(master, ti, li, rep, fold):
    return np.random.SeedSequence(int(master), spawn_key=(1, ti, li, rep, fold))


def _cv_task(args):
    data, train_idx, val_idx, t, lam, est_params, seed = args
    from .estimator import MSNSClassifier

    clf = MSNSClassifier(**{**est_params, "t": t, "lambda1": lam, "random_state": seed})
    start = time.process_time()
    try:
        clf.fit(data.Z[train_idx], data.y[train_idx])
    except (MSNSError, ValueError) as exc:
        raise SolverError(f"cv cell t={t!r}, lambda1={lam!r} failed: {exc}") from exc
    cpu = time.process_time() - start
    return clf.score(data.Z[val_idx], data.y[val_idx]), clf.params_.N, cpu


def cv_grid_search(data: Dataset, grid: CvGrid, solver_config: dict | None = None, rng_seed=0,
                   workers: int = 1) -> CvResult:
    """Grid search over ``(t, lambda1)`` by repeated k-fold cross-validation.

    Each cell's score is the mean validation accuracy over ``repeats x folds``
    fits. Ties go to the smaller ``t``, then the smaller ``lambda1``. Every
    fit draws its randomness from ``(rng_seed, t index, lambda index, repeat,
    fold)`` so results do not depend on ``workers``.
    """
    solver_config = dict(solver_config or {})
    tasks, keys = [], []
    splits = [kfold_split(len(data), grid.folds, _split_seed(rng_seed, rep)) for rep in range(grid.repeats)]
    for ti, t in enumerate(grid.t_values):
        for li, lam in enumerate(grid.lambda_values):
            for rep in range(grid.repeats):
                for f, (tr, va) in enumerate(splits[rep]):
                    seed = _cell_seed(rng_seed, ti, li, rep, f)
                    tasks.append((data, tr, va, t, lam, solver_config, seed))
                    keys.append((t, lam))
    results = run_tasks(_cv_task, tasks, workers)
    acc, iters, cpu = {}, {}, {}
    for key, (a, N, c) in zip(keys, results):
        acc.setdefault(key, []).append(a)
        iters.setdefault(key, []).append(N)
        cpu.setdefault(key, []).append(c)
    mean_acc = {k: float(np.mean(v)) for k, v in acc.items()}
    best = max(sorted(mean_acc), key=lambda k: mean_acc[k])  # sorted + max keeps the first maximum
    return CvResult(
        best_t=best[0],
        best_lambda1=best[1],
        accuracy=mean_acc,
        iterations={k: float(np.mean(v)) for k, v in iters.items()},
        cpu_time={k: float(np.mean(v)) for k, v in cpu.items()},
    )


def run_tasks(fn, tasks, workers: int = 1):
    """Map ``fn`` over ``tasks`` in order, optionally on a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


__all__ = [
    "CV_VALUES",
    "CvGrid",
    "CvResult",
    "Dataset",
    "cv_grid_search",
    "generate_synthetic",
    "kfold_split",
    "load_csv",
    "load_libsvm",
    "run_tasks",
    "write_csv",
]

"""Repeated-trial evaluation of pruning methods.

A baseline model is fitted on the full training set. Each trial prunes the
training samples, refits the baseline's terms on the kept samples, and
scores the refit by the R-squared between its coefficient vector and the
baseline's (intercept included). Trials are summarised by median and sample
standard deviation; sweeps repeat this over a grid of one hyperparameter.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import narx
from .datasets import Dataset
from .dictionary import KMeansOptions, learn_dictionary
from .exceptions import NarxPruneError, NumericalError
from .narx import NarxPreset, ReducedNarxModel
from .pruning import (
    MINIBATCH_FASTCAN,
    RANDOM,
    prune_minibatch_fastcan,
    prune_random,
    resolve_batch_size,
)
from .termlib import TermLibrary, build_library

FORMAT_VERSION = 1

ATOM_SIZE = "atom_size"
BATCH_SIZE = "batch_size"
SAMPLE_SIZE = "sample_size"
AXES = (ATOM_SIZE, BATCH_SIZE, SAMPLE_SIZE)


class DegenerateBaselineError(NumericalError):
    pass


def coefficient_r2(baseline, pruned):
    """R-squared of ``pruned`` coefficients taking ``baseline`` as ground truth."""
    b = np.asarray(baseline, dtype=float)
    p = np.asarray(pruned, dtype=float)
    if b.shape != p.shape or b.ndim != 1 or b.size < 2:
        raise ValueError(
            f"need two equal-length vectors of length >= 2, got {b.shape} and {p.shape}"
        )
    ss_tot = np.sum((b - b.mean()) ** 2)
    if ss_tot == 0:
        raise DegenerateBaselineError("degenerate baseline: all coefficients are equal")
    return float(1.0 - np.sum((p - b) ** 2) / ss_tot)


@dataclass(frozen=True, eq=False)
class Baseline:
    """Full-data model plus the library it was selected from."""

    dataset: str
    preset: NarxPreset
    library: TermLibrary
    term_indices: tuple
    model: ReducedNarxModel

    @property
    def X(self):
        """Selected term rows, ``(m, N)``: the sample matrix that gets pruned."""
        return self.library.X[list(self.term_indices)]

    @property
    def n_samples(self):
        return self.library.n_samples

    @property
    def coefficients(self):
        return self.model.full_coefficients()


def fit_baseline(dataset: Dataset, preset: NarxPreset, term_indices=None):
    """Select ``preset.n_terms`` terms on the pooled training records and fit them.

    ``term_indices`` skips selection (used when a saved model fixes the terms).
    """
    lib = build_library(list(dataset.train), preset.n_y, preset.n_u, preset.degree)
    if term_indices is None:
        term_indices = narx.select_terms(lib, preset.n_terms)
    model = narx.fit(lib, term_indices)
    return Baseline(
        dataset=dataset.name,
        preset=preset,
        library=lib,
        term_indices=tuple(int(i) for i in term_indices),
        model=model,
    )


def baseline_from_model(dataset, preset, model):
    """Rebuild a baseline whose terms are those of a saved model."""
    lib = build_library(list(dataset.train), preset.n_y, preset.n_u, preset.degree)
    pos = {d: i for i, d in enumerate(lib.descriptors)}
    try:
        idx = [pos[t] for t in model.terms]
    except KeyError as exc:
        raise NarxPruneError(f"model term {exc} not in the {preset.name} library") from None
    return fit_baseline(dataset, preset, idx)


@dataclass
class TrialReport:
    """Outcome of one pruning trial."""

    method: str
    trial: int
    seed: int
    config: dict
    selected_indices: tuple = ()
    refit_coefficients: tuple | None = None
    r2_coefficients: float = math.nan
    runtime_ms: float = 0.0
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    def to_json(self, timing=False):
        d = asdict(self)
        d["selected_indices"] = [int(i) for i in self.selected_indices]
        if self.refit_coefficients is not None:
            d["refit_coefficients"] = [float(c) for c in self.refit_coefficients]
        d["r2_coefficients"] = _num(self.r2_coefficients)
        if not timing:
            del d["runtime_ms"]
        return d


@dataclass(frozen=True)
class TrialSummary:
    method: str
    n_trials: int
    n_failed: int
    median: float
    sd: float
    mean: float
    minimum: float
    maximum: float

    @classmethod
    def from_values(cls, method, values, n_failed=0):
        v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
        n = v.size + n_failed
        if v.size == 0:
            nan = math.nan
            return cls(method, n, n_failed, nan, nan, nan, nan, nan)
        sd = float(np.std(v, ddof=1)) if v.size > 1 else math.nan
        return cls(
            method=method,
            n_trials=n,
            n_failed=n_failed,
            median=float(np.median(v)),
            sd=sd,
            mean=float(np.mean(v)),
            minimum=float(v.min()),
            maximum=float(v.max()),
        )

    def to_json(self):
        return {
            k: v if isinstance(v, (str, int)) else _num(v) for k, v in asdict(self).items()
        }


@dataclass
class TrialSet:
    reports: list
    summary: TrialSummary
    config: dict = field(default_factory=dict)

    @property
    def r2(self):
        return np.array([r.r2_coefficients for r in self.reports])

    def to_json(self, timing=False):
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config,
            "summary": self.summary.to_json(),
            "trials": [r.to_json(timing) for r in self.reports],
        }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _trial_config(baseline, method, n, q, p, center, kmeans):
    cfg = {
        "dataset": baseline.dataset,
        "preset": baseline.preset.name,
        "method": method,
        "n": n,
        "n_candidates": baseline.n_samples,
        "coefficients_include_intercept": True,
    }
    if method == MINIBATCH_FASTCAN:
        cfg.update(
            q=q,
            p_requested=p,
            p=resolve_batch_size(n, q, len(baseline.term_indices), p),
            center=center,
            feature_scaling="none",
            kmeans=asdict(kmeans),
        )
    return cfg


def run_trial(baseline, method, n, q=None, p=None, seed=0, trial=0, center=False,
              kmeans=KMeansOptions(), sample_indices=None):
    """Prune once, refit the baseline terms and score the refit.

    ``sample_indices`` bypasses pruning and refits on exactly those samples.
    Errors are recorded in the report rather than raised.
    """
    cfg = _trial_config(baseline, method, n, q, p, center, kmeans)
    report = TrialReport(method=method, trial=trial, seed=seed, config=cfg)
    start = time.perf_counter()
    try:
        if sample_indices is not None:
            idx = np.asarray(sample_indices, dtype=int)
        elif method == RANDOM:
            idx = prune_random(baseline.n_samples, n, seed).indices
        elif method == MINIBATCH_FASTCAN:
            X = baseline.X
            dic = learn_dictionary(X, q, seed=seed, options=kmeans)
            idx = prune_minibatch_fastcan(X, dic, n, p, center=center).indices
        else:
            raise ValueError(f"unknown method {method!r}")
        report.selected_indices = tuple(int(i) for i in idx)
        model = narx.fit(baseline.library, baseline.term_indices, idx)
        coef = model.full_coefficients()
        report.refit_coefficients = tuple(float(c) for c in coef)
        report.r2_coefficients = coefficient_r2(baseline.coefficients, coef)
    except (NarxPruneError, ValueError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    report.runtime_ms = (time.perf_counter() - start) * 1e3
    return report


# one baseline per worker process, installed by the pool initializer
_WORKER_BASELINE = None


def _init_worker(baseline):
    global _WORKER_BASELINE
    _WORKER_BASELINE = baseline


def _run_task(task):
    return run_trial(_WORKER_BASELINE, **task)


def _map_trials(baseline, tasks, jobs):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [run_trial(baseline, **t) for t in tasks]
    with ProcessPoolExecutor(
        max_workers=min(jobs, len(tasks)), initializer=_init_worker, initargs=(baseline,)
    ) as pool:
        # map keeps task order whatever the completion order
        return list(pool.map(_run_task, tasks))


def _summarise(method, reports):
    failed = sum(1 for r in reports if not r.ok)
    return TrialSummary.from_values(method, [r.r2_coefficients for r in reports], failed)


def run_trials(baseline, method, n, q=None, p=None, trials=10, base_seed=0, jobs=1,
               center=False, kmeans=KMeansOptions()):
    """Repeat :func:`run_trial` with seeds ``base_seed + i``.

    Returns
    -------
    TrialSet
    """
    if method == MINIBATCH_FASTCAN and q is None:
        q = baseline.preset.n_atoms
    tasks = [
        dict(method=method, n=n, q=q, p=p, seed=base_seed + i, trial=i,
             center=center, kmeans=kmeans)
        for i in range(trials)
    ]
    reports = _map_trials(baseline, tasks, jobs)
    config = dict(
        _trial_config(baseline, method, n, q, p, center, kmeans),
        trials=trials,
        base_seed=base_seed,
    )
    return TrialSet(reports=reports, summary=_summarise(method, reports), config=config)


@dataclass(frozen=True)
class SweepPoint:
    value: int
    method: str
    summary: TrialSummary
    n: int
    q: int | None
    p: int | None

    def to_json(self):
        return {
            "value": self.value,
            "method": self.method,
            "n": self.n,
            "q": self.q,
            "p": self.p,
            **self.summary.to_json(),
        }


@dataclass
class SweepReport:
    axis: str
    grid: list
    points: list
    trials: int
    config: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)

    def best(self, method=MINIBATCH_FASTCAN):
        """Grid value with the highest median for ``method``."""
        pts = [pt for pt in self.points if pt.method == method and np.isfinite(pt.summary.median)]
        if not pts:
            return None
        return max(pts, key=lambda pt: pt.summary.median).value

    def to_json(self):
        methods = sorted({pt.method for pt in self.points})
        return {
            "format_version": FORMAT_VERSION,
            "axis": self.axis,
            "grid": list(self.grid),
            "trials": self.trials,
            "config": self.config,
            "best": {m: self.best(m) for m in methods},
            "points": [pt.to_json() for pt in self.points],
        }


def _point_params(baseline, axis, value, n, q, p):
    if axis == ATOM_SIZE:
        return n, int(value), None
    if axis == BATCH_SIZE:
        return n, baseline.preset.n_atoms if q is None else q, int(value)
    if axis == SAMPLE_SIZE:
        return int(value), baseline.preset.n_atoms if q is None else q, p
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")


def sweep(baseline, axis, grid, n=100, q=None, p=None, methods=(MINIBATCH_FASTCAN,),
          trials=10, base_seed=0, jobs=1, center=False, kmeans=KMeansOptions()):
    """Run :func:`run_trials` at every grid value of one hyperparameter.

    ``atom_size`` varies ``q`` and leaves the batch size to its default
    rule; ``batch_size`` varies ``p`` with ``q`` pinned (to the preset's atom
    count unless given); ``sample_size`` varies ``n``.
    """
    grid = [int(g) for g in grid]
    if not grid:
        raise ValueError("empty sweep grid")
    tasks, keys = [], []
    for value in grid:
        n_i, q_i, p_i = _point_params(baseline, axis, value, n, q, p)
        for method in methods:
            for i in range(trials):
                tasks.append(dict(method=method, n=n_i, q=q_i if method == MINIBATCH_FASTCAN else None,
                                  p=p_i if method == MINIBATCH_FASTCAN else None,
                                  seed=base_seed + i, trial=i, center=center, kmeans=kmeans))
            keys.append((value, method, n_i, q_i, p_i))
    reports = _map_trials(baseline, tasks, jobs)
    points, runs = [], []
    for k, (value, method, n_i, q_i, p_i) in enumerate(keys):
        chunk = reports[k * trials:(k + 1) * trials]
        if method == MINIBATCH_FASTCAN:
            p_eff = resolve_batch_size(n_i, q_i, len(baseline.term_indices), p_i)
        else:
            q_i = p_eff = None
        points.append(SweepPoint(value, method, _summarise(method, chunk), n_i, q_i, p_eff))
        runs.append(chunk)
    config = {
        "dataset": baseline.dataset,
        "preset": baseline.preset.name,
        "axis": axis,
        "n": n,
        "q": q,
        "p": p,
        "methods": list(methods),
        "trials": trials,
        "base_seed": base_seed,
        "center": center,
        "kmeans": asdict(kmeans),
    }
    return SweepReport(axis=axis, grid=grid, points=points, trials=trials, config=config, runs=runs)


@dataclass(frozen=True, eq=False)
class PCAProjection:
    """Samples and extra points in the plane of the top two principal axes."""

    coords: np.ndarray
    extra: dict
    components: np.ndarray
    mean: np.ndarray
    variance: np.ndarray


def pca_project(X, extra=None):
    """Project samples (columns of ``X``) onto their first two principal axes.

    Parameters
    ----------
    X : array-like of shape (m, N)
    extra : dict of str to array-like of shape (m, k), optional
        Further points (atoms, selected samples) projected in the same frame.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    P = np.asarray(X, dtype=float).T
    N, m = P.shape
    if N < 2:
        raise ValueError("need at least two samples")
    mean = P.mean(axis=0)
    _, s, Vt = np.linalg.svd(P - mean, full_matrices=False)
    comps = np.zeros((2, m))
    var = np.zeros(2)
    r = min(2, Vt.shape[0])
    comps[:r] = Vt[:r]
    var[:r] = s[:r] ** 2 / (N - 1)
    for i in range(r):
        lead = np.argmax(np.abs(comps[i]))
        if comps[i, lead] < 0:
            comps[i] = -comps[i]
    out = {
        k: (np.asarray(v, dtype=float).T - mean) @ comps.T for k, v in (extra or {}).items()
    }
    return PCAProjection(coords=(P - mean) @ comps.T, extra=out, components=comps, mean=mean, variance=var)


# ---------------------------------------------------------------------------
# flat exports
# ---------------------------------------------------------------------------

TRIAL_CSV_FIELDS = ["method", "trial", "seed", "n", "q", "p", "r2_coefficients", "error"]
SWEEP_CSV_FIELDS = [
    "axis", "value", "method", "n", "q", "p", "n_trials", "n_failed",
    "median", "sd", "mean", "minimum", "maximum",
]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return str(x)


def write_trials_csv(trial_sets, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_CSV_FIELDS)
        for ts in trial_sets:
            for r in ts.reports:
                w.writerow([_fmt(v) for v in (
                    r.method, r.trial, r.seed, r.config.get("n"), r.config.get("q"),
                    r.config.get("p"), r.r2_coefficients, r.error,
                )])


def write_sweep_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_CSV_FIELDS)
        for pt in report.points:
            s = pt.summary
            w.writerow([_fmt(v) for v in (
                report.axis, pt.value, pt.method, pt.n, pt.q, pt.p, s.n_trials, s.n_failed,
                s.median, s.sd, s.mean, s.minimum, s.maximum,
            )])


PCA_KINDS = ("sample", "atom", "selected_fastcan", "selected_random")


def write_pca_csv(projection, path):
    """``pc1,pc2,kind`` rows: every sample, then each extra group."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pc1", "pc2", "kind"])
        for row in projection.coords:
            w.writerow([repr(float(row[0])), repr(float(row[1])), "sample"])
        for kind, pts in projection.extra.items():
            for row in pts:
                w.writerow([repr(float(row[0])), repr(float(row[1])), kind])

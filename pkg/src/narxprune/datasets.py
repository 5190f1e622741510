"""Datasets: the dual-stable-equilibria oscillator, the sine demo and CSV records.

The oscillator is

    y'' + y' - y + y**2 + y**3 = u(t),   u(t) = 0.1 cos(0.2 pi t)

integrated with classical fourth-order Runge-Kutta. Unforced, it has a
saddle at ``y = 0`` and two stable foci at ``y = (-1 +/- sqrt(5)) / 2``.
Trajectories are tagged ``left`` or ``right`` by the focus their initial
condition is attracted to when the forcing is switched off.

Records on disk are CSV files with a ``t,u,y`` header, grouped by a JSON
manifest that lists each file with its split and tag.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError, NumericalError, ParseError
from .termlib import TimeSeries

FORMAT_VERSION = 1

FORCING_AMPLITUDE = 0.1
FORCING_OMEGA = 0.2 * math.pi

SADDLE = 0.0
LEFT_EQUILIBRIUM = (-1.0 - math.sqrt(5.0)) / 2.0
RIGHT_EQUILIBRIUM = (-1.0 + math.sqrt(5.0)) / 2.0
EQUILIBRIA = {"left": LEFT_EQUILIBRIUM, "right": RIGHT_EQUILIBRIUM}

DEFAULT_DT = 0.1
DEFAULT_DURATION = 50.0
# generated records keep every 5th integration step (0.5 s sampling)
DEFAULT_SAMPLE_EVERY = 5
IC_HALF_WIDTH = 0.5
N_TEST = 2


def forcing(t):
    return FORCING_AMPLITUDE * np.cos(FORCING_OMEGA * t)


def dse_rhs(t, state, forced=True):
    """Vector field of the oscillator; ``state[..., 0] = y``, ``state[..., 1] = y'``."""
    y = state[..., 0]
    v = state[..., 1]
    u = forcing(t) if forced else 0.0
    return np.stack([v, -v + y - y**2 - y**3 + u], axis=-1)


def potential(y):
    """Potential whose minima are the stable equilibria."""
    return -(y**2) / 2 + y**3 / 3 + y**4 / 4


def energy(y, v):
    return v**2 / 2 + potential(y)


def rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(x0, dt, n_steps, forced=True, t0=0.0):
    """RK4 trajectories for a batch of initial states.

    ``x0`` is ``(..., 2)``. Returns times ``(n_steps + 1,)`` and states
    ``(n_steps + 1, ..., 2)``.
    """
    x = np.array(x0, dtype=float)
    out = np.empty((n_steps + 1,) + x.shape)
    out[0] = x
    t = t0 + dt * np.arange(n_steps + 1)

    def f(tt, xx):
        return dse_rhs(tt, xx, forced)

    for k in range(n_steps):
        x = rk4_step(f, t[k], x, dt)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state at t={t[k + 1]:.6g}")
        out[k + 1] = x
    return t, out


@dataclass(frozen=True)
class SimulationConfig:
    """Settings for :func:`simulate_dse`.

    ``initial_conditions`` is a list of ``(y0, dy0)`` pairs, one trajectory
    each. ``dt`` is the integration step; records keep every
    ``sample_every``-th step.
    """

    initial_conditions: tuple
    dt: float = DEFAULT_DT
    duration: float = DEFAULT_DURATION
    forcing: bool = True
    seed: int | None = None
    sample_every: int = 1

    def __post_init__(self):
        ics = tuple((float(a), float(b)) for a, b in self.initial_conditions)
        object.__setattr__(self, "initial_conditions", ics)
        if not ics:
            raise DataError("need at least one initial condition")
        if not self.dt > 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise DataError("duration must be at least one step")
        if self.sample_every < 1 or self.n_steps % self.sample_every:
            raise DataError("sample_every must divide the number of steps")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))


def simulate_dse(config, meta=None):
    """One :class:`TimeSeries` per initial condition.

    ``u`` is the forcing at the sample instants (zero when
    ``config.forcing`` is false).
    """
    t, states = integrate(
        np.array(config.initial_conditions), config.dt, config.n_steps, config.forcing
    )
    t = t[:: config.sample_every]
    states = states[:: config.sample_every]
    u = forcing(t) if config.forcing else np.zeros_like(t)
    out = []
    for i in range(states.shape[1]):
        m = {"trajectory": i}
        if meta is not None:
            m.update(meta[i])
        out.append(TimeSeries(t=t, u=u, y=states[:, i, 0], meta=m))
    return out


def classify_basin(initial_conditions, horizon=100.0, dt=0.05):
    """Which focus each ``(y0, dy0)`` settles on with the forcing off."""
    x0 = np.atleast_2d(np.asarray(initial_conditions, dtype=float))
    _, states = integrate(x0, dt, int(round(horizon / dt)), forced=False)
    y_end = states[-1, :, 0]
    return np.where(
        np.abs(y_end - LEFT_EQUILIBRIUM) < np.abs(y_end - RIGHT_EQUILIBRIUM),
        "left",
        "right",
    )


def draw_initial_conditions(rng, basin, count, half_width=IC_HALF_WIDTH):
    """Uniform draws around a stable focus, kept only if they stay in its basin."""
    centre = EQUILIBRIA[basin]
    accepted = []
    for _ in range(100):
        need = count - len(accepted)
        if need == 0:
            break
        cand = np.column_stack(
            [
                centre + rng.uniform(-half_width, half_width, size=2 * need),
                rng.uniform(-half_width, half_width, size=2 * need),
            ]
        )
        ok = classify_basin(cand) == basin
        accepted.extend(map(tuple, cand[ok][:need]))
    if len(accepted) < count:
        raise NumericalError(f"could not place {count} initial conditions in the {basin} basin")
    return accepted


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training and test records plus the settings that produced them."""

    name: str
    train: tuple
    test: tuple = ()
    info: dict = field(default_factory=dict)

    def tags(self, split="train"):
        records = self.train if split == "train" else self.test
        return [s.meta.get("basin") for s in records]


def generate_dse(
    name,
    n_left,
    n_right,
    seed,
    dt=DEFAULT_DT,
    duration=DEFAULT_DURATION,
    sample_every=DEFAULT_SAMPLE_EVERY,
):
    """Forced oscillator records with a given number per basin.

    Training trajectories come left-first; two extra test trajectories (one
    per basin) are drawn after them from the same generator.
    """
    rng = np.random.default_rng(seed)
    plan = [("left", n_left), ("right", n_right)]
    train_ics, train_meta = [], []
    for basin, count in plan:
        for ic in draw_initial_conditions(rng, basin, count):
            train_ics.append(ic)
            train_meta.append({"dataset": name, "basin": basin, "split": "train"})
    test_ics, test_meta = [], []
    for basin in ("left", "right"):
        for ic in draw_initial_conditions(rng, basin, N_TEST // 2):
            test_ics.append(ic)
            test_meta.append({"dataset": name, "basin": basin, "split": "test"})

    def run(ics, meta):
        cfg = SimulationConfig(
            tuple(ics), dt=dt, duration=duration, forcing=True, seed=seed,
            sample_every=sample_every,
        )
        for m, ic in zip(meta, ics):
            m["initial_condition"] = [float(ic[0]), float(ic[1])]
        return tuple(simulate_dse(cfg, meta))

    info = {
        "generator": name,
        "seed": seed,
        "dt": dt,
        "sample_every": sample_every,
        "duration": duration,
        "n_left": n_left,
        "n_right": n_right,
        "ic_half_width": IC_HALF_WIDTH,
        "pooling": "concatenated with per-trajectory lag trimming",
    }
    return Dataset(name=name, train=run(train_ics, train_meta), test=run(test_ics, test_meta), info=info)


def generate_sdse(seed=0, **kwargs):
    """Balanced dataset: five training trajectories per basin."""
    return generate_dse("sdse", 5, 5, seed, **kwargs)


def generate_adse(seed=0, **kwargs):
    """Imbalanced dataset: two left and 98 right training trajectories."""
    return generate_dse("adse", 2, 98, seed, **kwargs)


def generate_sine_demo():
    """100 samples of ``sin(2 pi t)`` spanning ``[0, 1]``, zero input."""
    t = np.linspace(0.0, 1.0, 100)
    series = TimeSeries(t=t, u=np.zeros_like(t), y=np.sin(2 * np.pi * t), meta={"dataset": "sine-demo"})
    return Dataset(name="sine-demo", train=(series,), info={"generator": "sine-demo"})


GENERATORS = {
    "sdse": generate_sdse,
    "adse": generate_adse,
}


def make_dataset(name, seed=0):
    name = name.lower()
    if name == "sine-demo":
        return generate_sine_demo()
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise DataError(f"unknown dataset generator {name!r}") from None
    return gen(seed)


# ---------------------------------------------------------------------------
# CSV records and manifests
# ---------------------------------------------------------------------------

DEFAULT_COLUMNS = {"t": "t", "u": "u", "y": "y"}


def write_series_csv(series, path):
    """Write ``t,u,y`` with round-trip exact float formatting."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u", "y"])
        for row in zip(series.t, series.u, series.y):
            w.writerow([repr(float(v)) for v in row])
    return path


def load_benchmark_csv(path, columns=None, meta=None):
    """Read a record from CSV.

    Parameters
    ----------
    path : path-like
    columns : dict, optional
        Maps ``t``, ``u`` and ``y`` to header names in the file; defaults to
        the identical names.
    meta : dict, optional
        Attached to the returned series.

    Returns
    -------
    TimeSeries
    """
    path = Path(path)
    columns = {**DEFAULT_COLUMNS, **(columns or {})}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        try:
            pos = {k: header.index(v) for k, v in columns.items()}
        except ValueError as exc:
            raise ParseError(f"missing column ({exc}); header is {header}", path, 1) from None
        data = {k: [] for k in pos}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", path, line
                )
            for k, i in pos.items():
                try:
                    v = float(row[i])
                except ValueError:
                    raise ParseError(f"not a number: {row[i]!r}", path, line) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value {row[i]!r}", path, line)
                data[k].append(v)
    m = {"source": str(path)}
    m.update(meta or {})
    return TimeSeries(t=np.array(data["t"]), u=np.array(data["u"]), y=np.array(data["y"]), meta=m)


def write_dataset(dataset, out_dir):
    """Write every record as CSV plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for split, records in (("train", dataset.train), ("test", dataset.test)):
        for i, s in enumerate(records):
            fname = f"{dataset.name}_{split}_{i:03d}.csv"
            write_series_csv(s, out_dir / fname)
            entries.append(
                {
                    "file": fname,
                    "split": split,
                    "tag": s.meta.get("basin"),
                    "meta": _jsonable(s.meta),
                }
            )
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset": dataset.name,
        "info": _jsonable(dataset.info),
        "columns": DEFAULT_COLUMNS,
        "series": entries,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path):
    """Load a dataset from a manifest.

    The manifest is JSON::

        {
          "format_version": 1,
          "dataset": "emps",
          "columns": {"t": "t", "u": "u", "y": "y"},     # optional
          "series": [
            {"file": "train.csv", "split": "train", "tag": null},
            {"file": "test.csv", "split": "test"}
          ]
        }

    File names are relative to the manifest's directory.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    if not isinstance(manifest, dict) or "series" not in manifest:
        raise ParseError("manifest needs a 'series' list", path)
    columns = manifest.get("columns")
    train, test = [], []
    for entry in manifest["series"]:
        meta = dict(entry.get("meta") or {})
        meta.setdefault("split", entry.get("split", "train"))
        if entry.get("tag") is not None:
            meta["basin"] = entry["tag"]
        s = load_benchmark_csv(path.parent / entry["file"], columns, meta)
        (test if meta["split"] == "test" else train).append(s)
    if not train:
        raise DataError(f"{path}: manifest lists no training series")
    return Dataset(
        name=manifest.get("dataset", path.parent.name),
        train=tuple(train),
        test=tuple(test),
        info=dict(manifest.get("info") or {}, manifest=os.fspath(path)),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj

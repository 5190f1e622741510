"""Command line: generate data, fit a baseline, prune, evaluate, sweep.

Every output file carries a ``config`` block holding the command and all of
its options; passing that file back with ``--config`` reruns the command.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from . import __version__, datasets, narx
from .datasets import load_manifest, make_dataset, write_dataset
from .dictionary import learn_dictionary
from .evaluation import (
    AXES,
    FORMAT_VERSION,
    Baseline,
    baseline_from_model,
    fit_baseline,
    pca_project,
    run_trials,
    sweep,
    write_pca_csv,
    write_sweep_csv,
    write_trials_csv,
)
from .exceptions import DataError, NarxPruneError, NumericalError
from .pruning import MINIBATCH_FASTCAN, RANDOM, prune_minibatch_fastcan, prune_random

log = logging.getLogger("narxprune")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
OUTPUT_ENV = "NARXPRUNE_OUTPUT_DIR"
DEFAULT_OUTPUT = "narxprune-out"

METHOD_NAMES = {"minibatch-fastcan": MINIBATCH_FASTCAN, "random": RANDOM}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text):
    """``"5:40:5"`` (inclusive) or ``"5,10,20"``."""
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step <= 0:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step or a,b,c") from None


def _write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _out_dir(args):
    out = Path(args.out or os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{out}: cannot create output directory: {exc.strerror}") from exc
    return out


def _echo(args):
    """Options that reproduce this run; paths made absolute."""
    skip = {"func", "config", "out"}
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    for key in ("manifest", "model"):
        if opts.get(key):
            opts[key] = os.fspath(Path(opts[key]).resolve())
    return {
        "command": args.command,
        "args": opts,
        "format_version": FORMAT_VERSION,
        "version": __version__,
    }


def _dataset_from_args(args):
    if getattr(args, "manifest", None):
        return load_manifest(args.manifest)
    if not getattr(args, "dataset", None):
        raise UsageError("give --dataset NAME or --manifest PATH")
    return make_dataset(args.dataset, args.seed)


def _load_model(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read model: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file: {exc.msg}") from None
    if data.get("kind") != "reduced_narx_model":
        raise DataError(f"{path}: not a model file")
    return data


def _baseline_from_model_file(path) -> tuple[Baseline, dict]:
    data = _load_model(path)
    src = data["dataset"]
    if src.get("manifest"):
        ds = load_manifest(src["manifest"])
    else:
        ds = make_dataset(src["generator"], src["seed"])
    preset = narx.NarxPreset(**data["preset"])
    model = narx.ReducedNarxModel.from_json(data["model"])
    base = baseline_from_model(ds, preset, model)
    return base, data


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args):
    ds = make_dataset(args.dataset, args.seed)
    out = _out_dir(args)
    path = write_dataset(ds, out)
    print(f"wrote {len(ds.train) + len(ds.test)} series and {path}")
    return EXIT_OK


def cmd_fit_baseline(args):
    ds = _dataset_from_args(args)
    preset_name = args.preset or ds.name
    preset = narx.get_preset(preset_name)
    if args.terms is not None:
        preset = narx.NarxPreset(preset.name, preset.n_y, preset.n_u, preset.degree, args.terms, preset.n_atoms)
    base = fit_baseline(ds, preset)
    model = base.model
    out = _out_dir(args)

    fitted = narx.predict_features(model, base.X)
    report = {
        "config": _echo(args),
        "n_train_samples": int(base.n_samples),
        "n_train_series": len(ds.train),
        "one_step_r2_train": float(narx.r2_score(base.library.target, fitted)),
        "one_step_rmse_train": narx.rmse(base.library.target, fitted),
        "free_run_test": [],
    }
    for i, s in enumerate(ds.test):
        entry = {"series": i, "meta": datasets._jsonable(s.meta)}
        try:
            ysim = narx.simulate_series(model, s)
            entry.update(r2=float(narx.r2_score(s.y, ysim)), rmse=narx.rmse(s.y, ysim))
        except NarxPruneError as exc:
            entry["error"] = str(exc)
        report["free_run_test"].append(entry)

    src = (
        {"manifest": os.fspath(Path(args.manifest).resolve())}
        if args.manifest
        else {"generator": ds.name, "seed": args.seed}
    )
    model_doc = {
        "kind": "reduced_narx_model",
        "format_version": FORMAT_VERSION,
        "config": _echo(args),
        "dataset": src,
        "preset": {
            "name": preset.name,
            "n_y": preset.n_y,
            "n_u": preset.n_u,
            "degree": preset.degree,
            "n_terms": preset.n_terms,
            "n_atoms": preset.n_atoms,
        },
        "term_indices": list(base.term_indices),
        "model": model.to_json(),
    }
    _write_json(out / "model.json", model_doc)
    _write_json(out / "fit_report.json", report)
    print(f"baseline: {model.n_terms} terms + intercept, train one-step R2 {report['one_step_r2_train']:.6f}")
    for t, c in zip(model.terms, model.coefficients):
        print(f"  {c:+.6g}  {t}")
    print(f"  {model.intercept:+.6g}  (intercept)")
    return EXIT_OK


def cmd_prune(args):
    base, _ = _baseline_from_model_file(args.model)
    method = METHOD_NAMES[args.method]
    n = base.n_samples if args.n is None else args.n
    if method == RANDOM:
        res = prune_random(base.n_samples, n, args.seed)
    else:
        q = args.atoms or base.preset.n_atoms
        dic = learn_dictionary(base.X, q, seed=args.seed)
        res = prune_minibatch_fastcan(base.X, dic, n, args.batch_size, center=args.center)
    out = _out_dir(args)
    doc = {"format_version": FORMAT_VERSION, "config": _echo(args), **res.to_json()}
    doc["n_candidates"] = int(base.n_samples)
    _write_json(out / "prune.json", doc)
    extra = f", p={res.config['p']}" if method == MINIBATCH_FASTCAN else ""
    print(f"{method}: selected {len(res)} of {base.n_samples} samples{extra}")
    return EXIT_OK


def _methods(args):
    return [METHOD_NAMES[m] for m in args.methods]


def cmd_evaluate(args):
    base, _ = _baseline_from_model_file(args.model)
    out = _out_dir(args)
    sets = []
    for method in _methods(args):
        ts = run_trials(
            base, method, args.n, args.atoms, args.batch_size, args.trials,
            args.base_seed, args.jobs, center=args.center,
        )
        sets.append(ts)
        s = ts.summary
        for r in ts.reports:
            status = f"{r.r2_coefficients:.6f}" if r.ok else f"FAILED {r.error}"
            print(f"{method:18s} trial {r.trial:3d} seed {r.seed:6d}  r2 {status}")
        print(f"{method:18s} median {s.median:.6f}  sd {s.sd:.6f}  mean {s.mean:.6f}  failed {s.n_failed}")
    doc = {
        "format_version": FORMAT_VERSION,
        "config": _echo(args),
        "baseline_coefficients": [float(c) for c in base.coefficients],
        "results": {ts.summary.method: ts.to_json() for ts in sets},
    }
    _write_json(out / "trials.json", doc)
    write_trials_csv(sets, out / "trials.csv")
    _write_json(out / "timings.json", {
        ts.summary.method: [r.runtime_ms for r in ts.reports] for ts in sets
    })
    if all(not r.ok for ts in sets for r in ts.reports):
        log.error("every trial failed")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args):
    base, _ = _baseline_from_model_file(args.model)
    out = _out_dir(args)
    axis = args.axis.replace("-", "_")
    methods = _methods(args) if args.methods else (
        [MINIBATCH_FASTCAN, RANDOM] if axis == "sample_size" else [MINIBATCH_FASTCAN]
    )
    rep = sweep(
        base, axis, args.grid, n=args.n, q=args.atoms, p=args.batch_size, methods=methods,
        trials=args.trials, base_seed=args.base_seed, jobs=args.jobs, center=args.center,
    )
    doc = rep.to_json()
    doc["config"] = {**_echo(args), "sweep": doc["config"]}
    _write_json(out / "sweep.json", doc)
    write_sweep_csv(rep, out / "sweep.csv")
    for pt in rep.points:
        s = pt.summary
        print(f"{axis}={pt.value:<5d} {pt.method:18s} n={pt.n} q={pt.q} p={pt.p}  "
              f"median {s.median:.6f}  sd {s.sd:.6f}  failed {s.n_failed}")
    if all(pt.summary.n_failed == pt.summary.n_trials for pt in rep.points):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_pca(args):
    base, _ = _baseline_from_model_file(args.model)
    out = _out_dir(args)
    q = args.atoms or base.preset.n_atoms
    dic = learn_dictionary(base.X, q, seed=args.seed)
    fast = prune_minibatch_fastcan(base.X, dic, args.n, args.batch_size, center=args.center)
    rnd = prune_random(base.n_samples, args.n, args.seed)
    proj = pca_project(base.X, {
        "atom": dic.atoms,
        "selected_fastcan": base.X[:, fast.indices],
        "selected_random": base.X[:, rnd.indices],
    })
    write_pca_csv(proj, out / "pca.csv")
    _write_json(out / "pca.json", {
        "format_version": FORMAT_VERSION,
        "config": _echo(args),
        "explained_variance": proj.variance.tolist(),
        "components": proj.components.tolist(),
        "term_names": [str(t) for t in base.model.terms],
    })
    print(f"wrote {out / 'pca.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--config", help="JSON options file, e.g. the config block of an earlier output")


def _add_pruning(p, n_default=100):
    p.add_argument("--model", required=True, help="model.json written by fit-baseline")
    p.add_argument("--n", type=int, default=n_default, help="samples to keep")
    p.add_argument("--atoms", type=int, help="dictionary size q (default: preset optimum)")
    p.add_argument("--batch-size", type=int, help="batch size p (default: ceil(n/q) capped at m)")
    p.add_argument("--center", action="store_true",
                   help="center sample and atom vectors before correlating")


def _add_trials(p):
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: logical CPUs)")


def build_parser():
    parser = _Parser(prog="narxprune", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate a dataset to CSV + manifest")
    p.add_argument("dataset", choices=["sdse", "adse", "sine-demo"])
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit-baseline", help="select terms and fit on the full training set")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", choices=["sdse", "adse"], help="generate in memory")
    src.add_argument("--manifest", help="dataset manifest.json")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--preset", choices=sorted(narx.PRESETS), help="model preset (default: dataset name)")
    p.add_argument("--terms", type=int, help="override the preset's term count")
    _add_common(p)
    p.set_defaults(func=cmd_fit_baseline)

    p = sub.add_parser("prune", help="select samples once")
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="minibatch-fastcan")
    p.add_argument("--seed", type=int, default=0)
    _add_pruning(p, n_default=None)
    _add_common(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("evaluate", help="repeated trials for each method")
    p.add_argument("--methods", nargs="+", choices=sorted(METHOD_NAMES),
                   default=["minibatch-fastcan", "random"])
    _add_pruning(p)
    _add_trials(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="trials over a grid of one hyperparameter")
    p.add_argument("--axis", required=True, choices=[a.replace("_", "-") for a in AXES])
    p.add_argument("--grid", required=True, type=parse_grid, help="start:stop:step or a,b,c")
    p.add_argument("--methods", nargs="+", choices=sorted(METHOD_NAMES))
    _add_pruning(p)
    _add_trials(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pca", help="2-D projection of samples, atoms and selections")
    p.add_argument("--seed", type=int, default=0)
    _add_pruning(p)
    _add_common(p)
    p.set_defaults(func=cmd_pca)
    return parser


def _peek(argv, flag):
    for i, tok in enumerate(argv):
        if tok == flag and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith(flag + "="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv``, taking defaults from a ``--config`` file; flags still win."""
    path = _peek(argv, "--config")
    if path is None:
        return parser.parse_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in subparsers), None)
    if command is None:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    cfg = cfg.get("config", cfg)
    if "args" in cfg:
        if cfg.get("command") not in (None, command):
            raise UsageError(f"config is for '{cfg['command']}', not '{command}'")
        cfg = cfg["args"]
    sub = subparsers[command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known - {"command", "verbose"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = {k: v for k, v in cfg.items() if k in known}
    sub.set_defaults(**cfg)
    positional = []
    for action in sub._actions:
        # options satisfied by the config file are no longer required
        if action.dest in cfg:
            action.required = False
            if not action.option_strings:
                positional.append(action)
    for action in positional:
        action.nargs = "?"
        action.default = cfg[action.dest]
    return parser.parse_args(argv)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"narxprune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"narxprune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"narxprune {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"narxprune {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NarxPruneError as exc:
        print(f"narxprune {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"narxprune {args.command}: invalid option value: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``beziergan <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 empty data,
3 training divergence, 4 no feasible design found.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import shutil
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import plots
from .dataset import (
    Corpus,
    CorpusFormatError,
    EmptyCorpusError,
    load_corpus,
    preprocess,
    read_dat_dir,
    save_corpus,
    synthetic_corpus,
    write_dat,
)

log = logging.getLogger("beziergan")

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_DIVERGED, EXIT_INFEASIBLE = 0, 1, 2, 3, 4
BASELINES = ("svd", "gmdv", "ffd")
METHODS = BASELINES + ("bezier-gan", "bezier-gan-c")
NOISE_DIMS = (0, 10, 20)
SYNTHETIC_CORPUS = "synthetic"


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    corpus: str | None = None
    checkpoint: str | None = None
    out: str = "run"
    latent_dim: int = 3
    noise_dim: int = 10
    degree: int = 31
    steps: int = 10_000
    batch_size: int = 32
    mmd_every: int = 100
    mmd_samples: int = 1000
    g_updates: int = 1
    seed: int = 0
    budget: int = 100
    seeds: list = field(default_factory=lambda: [0])
    method: str = "bezier-gan"
    evaluator: str = "synthetic"
    xfoil_path: str | None = None
    oso: bool = False
    num: int = 16
    num_test: int = 20

    def validate(self):
        if not 2 <= self.latent_dim <= 10:
            raise CliError(EXIT_USAGE, f"--latent-dim must be in [2, 10], got {self.latent_dim}")
        if self.noise_dim not in NOISE_DIMS:
            raise CliError(EXIT_USAGE, f"--noise-dim must be one of {NOISE_DIMS}, got {self.noise_dim}")
        if self.budget < 10:
            raise CliError(EXIT_USAGE, f"--budget must be at least 10, got {self.budget}")
        if self.steps < 0 or self.batch_size < 1 or self.g_updates < 1:
            raise CliError(EXIT_USAGE, "--steps must be >= 0, --batch-size and --g-updates >= 1")
        if self.evaluator not in ("synthetic", "xfoil"):
            raise CliError(EXIT_USAGE, f"unknown evaluator {self.evaluator!r}")
        return self

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["run"] = {k: _ini_value(v) for k, v in asdict(self).items() if v is not None}
        return cp


def _ini_value(v):
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def parse_seeds(text):
    """``"3"`` means seeds 0..2; ``"4,7"`` lists seeds; ``"2..5"`` is an inclusive range."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            seeds = list(range(int(a), int(b) + 1))
        elif "," in text:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        else:
            seeds = list(range(int(text)))
    except ValueError:
        raise CliError(EXIT_USAGE, f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise CliError(EXIT_USAGE, "no seeds given")
    return seeds


def parse_dims(text):
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def _coerce(name, raw):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if name == "seeds":
        return parse_seeds(raw)
    if "bool" in str(kind):
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if "int" in str(kind):
        return int(raw)
    return raw


def resolve_config(args):
    """Defaults, then the ``[run]`` section of ``--config``, then explicit flags."""
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise CliError(EXIT_USAGE, f"cannot read config file {args.config}")
        for key, raw in (cp["run"].items() if cp.has_section("run") else []):
            key = key.replace("-", "_")
            if key not in names:
                raise CliError(EXIT_USAGE, f"unknown config key {key!r}")
            try:
                setattr(cfg, key, _coerce(key, raw))
            except ValueError as exc:
                raise CliError(EXIT_USAGE, f"bad value for {key}: {exc}") from None
    for key in names:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            setattr(cfg, key, parse_seeds(val) if key == "seeds" else val)
    return cfg.validate()


def _outdir(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run.ini", "w") as fh:
        cfg.to_ini().write(fh)
    if getattr(args, "config", None):
        shutil.copyfile(args.config, out / "config.ini")
    return out


def _load_corpus(spec):
    if spec is None:
        raise CliError(EXIT_USAGE, "--corpus is required")
    if spec == SYNTHETIC_CORPUS or spec.startswith(SYNTHETIC_CORPUS + ":"):
        num = int(spec.split(":", 1)[1]) if ":" in spec else 500
        return synthetic_corpus(num, seed=0)
    path = Path(spec)
    if not path.is_file():
        raise CliError(EXIT_USAGE, f"corpus file {spec} does not exist")
    try:
        corpus = load_corpus(path)
    except CorpusFormatError as exc:
        raise CliError(EXIT_USAGE, f"{spec}: {exc}") from None
    if len(corpus) == 0:
        raise CliError(EXIT_EMPTY, f"corpus {spec} is empty")
    return corpus


def _load_model(path):
    from .gan import CheckpointError, load_model

    if path is None:
        raise CliError(EXIT_USAGE, "--checkpoint is required")
    if not Path(path).is_file():
        raise CliError(EXIT_USAGE, f"checkpoint {path} does not exist")
    try:
        return load_model(path)
    except CheckpointError as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from None


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- commands

def cmd_preprocess(args):
    src = Path(args.directory)
    if not src.is_dir():
        raise CliError(EXIT_USAGE, f"input directory {src} does not exist")
    airfoils, failures = read_dat_dir(src)
    try:
        corpus = preprocess(airfoils)
    except EmptyCorpusError as exc:
        for name, reason in failures:
            print(f"dropped {name}: {reason}")
        raise CliError(EXIT_EMPTY, f"empty corpus: {exc}") from None
    dropped = failures + corpus.dropped
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    print(f"kept {len(corpus)}, dropped {len(dropped)}")
    for name, reason in dropped:
        print(f"dropped {name}: {reason}")
    return EXIT_OK


def _sweep_grid(model, size=5):
    """Latent sweeps: first code down the rows, second across the columns, the rest at 0.5."""
    from .gan import synthesize

    d = model.cfg.latent_dim
    vals = np.linspace(0.0, 1.0, size)
    c = np.full((size * size, d), 0.5)
    c[:, 0] = np.repeat(vals, size)
    if d > 1:
        c[:, 1] = np.tile(vals, size)
    curves = synthesize(model, c)
    grid = [[curves[i * size + j] for j in range(size)] for i in range(size)]
    labels = [f"{v:.2f}" for v in vals]
    return plots.curve_grid_svg(grid, row_labels=labels, col_labels=labels, title="latent sweep (c1 rows, c2 columns)")


def cmd_train(args):
    from .gan import BezierGAN, GanConfig, TrainingDiverged, save_model, train

    cfg = resolve_config(args)
    corpus = _load_corpus(cfg.corpus)
    out = _outdir(cfg, args)
    gcfg = GanConfig(latent_dim=cfg.latent_dim, noise_dim=cfg.noise_dim, degree=cfg.degree,
                     num_points=corpus.curves.shape[1], batch_size=cfg.batch_size, steps=cfg.steps,
                     mmd_every=cfg.mmd_every, mmd_samples=cfg.mmd_samples, g_updates=cfg.g_updates)
    if len(corpus) < gcfg.batch_size:
        raise CliError(EXIT_EMPTY, f"corpus has {len(corpus)} curves, fewer than the batch size {gcfg.batch_size}")
    model = BezierGAN(gcfg, seed=cfg.seed)
    code, ckpt = EXIT_OK, out / "model.ckpt"
    try:
        model, history = train(corpus.curves, gcfg, seed=cfg.seed, model=model, log=log.info)
    except TrainingDiverged as exc:
        history = exc.history
        code, ckpt = EXIT_DIVERGED, out / "model.ckpt.diverged"
        print(f"error: {exc}", file=sys.stderr)
    save_model(model, ckpt, extra={"seed": cfg.seed, "steps_completed": len(history.losses)})
    loss_keys = ["step", "d_loss", "g_loss", "g_adv", "info", "r1", "r2", "r3", "r4"]
    _write_rows(out / "losses.csv", loss_keys, [[row[k] for k in loss_keys] for row in history.losses])
    _write_rows(out / "mmd.csv", ["step", "mmd2"], history.mmd)
    (out / "history.json").write_text(json.dumps(history.to_dict(), indent=1))
    if code == EXIT_OK:
        plots.write_svg(out / "samples.svg", _sweep_grid(model))
        print(f"wrote {ckpt}")
    return code


def cmd_sample(args):
    from .gan import synthesize

    cfg = resolve_config(args)
    model = _load_model(cfg.checkpoint)
    out = _outdir(cfg, args)
    rng = np.random.default_rng(cfg.seed)
    c, z = model.sample_inputs(cfg.num, rng)
    curves = synthesize(model, c, z)
    names = [f"sample-{k:04d}" for k in range(cfg.num)]
    save_corpus(Corpus(curves, names), out / "samples.corpus")
    cols = min(4, cfg.num)
    grid = [list(curves[r * cols:(r + 1) * cols]) for r in range(-(-cfg.num // cols))]
    plots.write_svg(out / "samples.svg", plots.curve_grid_svg(grid))
    plots.write_svg(out / "sweep.svg", _sweep_grid(model))
    print(f"wrote {cfg.num} samples to {out}")
    return EXIT_OK


def cmd_mmd(args):
    from .gan import model_mmd

    cfg = resolve_config(args)
    model = _load_model(cfg.checkpoint)
    corpus = _load_corpus(cfg.corpus)
    value = model_mmd(model, corpus.curves, cfg.mmd_samples, np.random.default_rng(cfg.seed))
    print(f"mmd2 {value:.8g}")
    if args.out:
        out = _outdir(cfg, args)
        (out / "mmd.json").write_text(json.dumps({"mmd2": value, "samples": min(cfg.mmd_samples, len(corpus))}))
    return EXIT_OK


def _split(corpus, num_test, seed):
    n = len(corpus)
    if n < 3:
        raise CliError(EXIT_EMPTY, f"corpus has {n} curves; fitting needs at least 3")
    num_test = max(1, min(num_test, n // 2))
    order = np.random.default_rng(seed).permutation(n)
    curves = np.asarray(corpus.curves, dtype=np.float64)
    return curves[order[num_test:]], curves[order[:num_test]]


def build_parameterization(method, dim, train_curves=None, model=None):
    from .baselines import GanParameterization, ffd_build, gmdv_build, svd_fit

    if method == "svd":
        if train_curves is None:
            raise CliError(EXIT_USAGE, "svd needs --corpus")
        try:
            return svd_fit(train_curves, dim)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
    if method == "gmdv":
        return gmdv_build(k=dim)
    if method == "ffd":
        return ffd_build()
    if method in ("bezier-gan", "bezier-gan-c"):
        if model is None:
            raise CliError(EXIT_USAGE, f"{method} needs --checkpoint")
        return GanParameterization(model, fit_noise=(method == "bezier-gan"))
    raise CliError(EXIT_USAGE, f"unknown method {method!r}; valid: {', '.join(METHODS)}")


def _fit_errors(param, tests, seed):
    from .baselines import least_squares_fit

    errs = []
    for k, target in enumerate(tests):
        initial = None
        if getattr(param, "fit_noise", False):
            # warm start (c, z) from the c-only optimum so noise can only help
            from .baselines import GanParameterization

            c_only = GanParameterization(param.model, fit_noise=False)
            c_best, _ = least_squares_fit(c_only, target, seed=seed + k)
            initial = np.concatenate([c_best, np.zeros(param.dn)])
        errs.append(least_squares_fit(param, target, seed=seed + k, initial=initial)[1])
    return errs


def cmd_fit_test(args):
    cfg = resolve_config(args)
    corpus = _load_corpus(cfg.corpus)
    model = _load_model(cfg.checkpoint) if cfg.method.startswith("bezier-gan") else None
    train_curves, tests = _split(corpus, cfg.num_test, cfg.seed)
    param = build_parameterization(cfg.method, cfg.latent_dim, train_curves, model)
    errs = _fit_errors(param, tests, cfg.seed)
    out = _outdir(cfg, args)
    _write_rows(out / "fit.csv", ["index", "mse"], list(enumerate(errs)))
    print(f"{cfg.method} dim {param.dim}: median MSE {np.median(errs):.6g} over {len(errs)} curves")
    return EXIT_OK


def make_evaluator(name, xfoil_path=None):
    """Returns ``curve -> value to minimise or None`` (the negated objective)."""
    from .evaluation import XfoilConfigError, evaluate_synthetic, evaluate_xfoil, find_xfoil

    if name == "synthetic":
        fn = evaluate_synthetic
    elif name == "xfoil":
        try:
            exe = find_xfoil(xfoil_path)
        except XfoilConfigError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None

        def fn(curve):
            return evaluate_xfoil(curve, executable=exe)
    else:
        raise CliError(EXIT_USAGE, f"unknown evaluator {name!r}")

    def minimise(curve):
        out = fn(curve)
        return -out.objective if out.valid else None

    return minimise


def run_method(method, evaluate, budget, seed, dim=None, train_curves=None, model=None, oso=False):
    """One optimisation run. Returns (history, best curve or None)."""
    from .optimizer import NoFeasibleDesign, ego_run, tso_run

    if method == "bezier-gan":
        param = build_parameterization("bezier-gan", dim, model=model)
        d, dn = param.d, param.dn

        def synth(c, z):
            return param.synthesize(np.concatenate([c, z]))
        try:
            res = tso_run(synth, evaluate, d, dn, budget, seed=seed, oso=oso)
        except NoFeasibleDesign:
            return None, None
        return res.history, res.curve
    param = build_parameterization(method, dim, train_curves, model)
    hist = ego_run(lambda v: evaluate(param.synthesize(v)), param.bounds, budget, seed=seed)
    best = hist.best()
    return hist, (None if best is None else param.synthesize(best.x))


def cmd_optimize(args):
    cfg = resolve_config(args)
    method = args.baseline or "bezier-gan"
    model = _load_model(cfg.checkpoint) if method == "bezier-gan" else None
    train_curves = None
    if method == "svd":
        train_curves = np.asarray(_load_corpus(cfg.corpus).curves, dtype=np.float64)
    evaluate = make_evaluator(cfg.evaluator, cfg.xfoil_path)
    out = _outdir(cfg, args)
    label = method + (" (one stage)" if cfg.oso and method == "bezier-gan" else "")
    traces, summary, failed = [], [], []
    for seed in cfg.seeds:
        hist, curve = run_method(method, evaluate, cfg.budget, seed, cfg.latent_dim, train_curves, model, cfg.oso)
        sdir = out / f"seed-{seed}"
        sdir.mkdir(exist_ok=True)
        if hist is None or curve is None:
            failed.append(seed)
            continue
        (sdir / "trace.jsonl").write_text(hist.to_jsonl())
        best = hist.best()
        traces.append(-hist.best_trace())
        summary.append({"seed": seed, "best_objective": -best.value, "best_step": best.step, "x": best.x})
        write_dat(f"{method}-seed{seed}", curve, sdir / "best.dat", precision=8)
        plots.write_svg(sdir / "best.svg", plots.airfoil_svg(curve, f"{label}, seed {seed}: {-best.value:.4g}"))
        print(f"seed {seed}: best objective {-best.value:.6g} at evaluation {best.step}")
    if traces:
        plots.write_svg(out / "convergence.svg", plots.convergence_svg({label: np.array(traces)}))
    (out / "summary.json").write_text(json.dumps({"method": label, "runs": summary, "infeasible_seeds": failed}, indent=1))
    if failed:
        print(f"error: no feasible design found for seeds {failed}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_benchmark(args):
    cfg = resolve_config(args)
    methods = [m.strip() for m in (args.methods or "").split(",") if m.strip()]
    if not methods:
        raise CliError(EXIT_USAGE, f"no methods given; valid: {', '.join(METHODS)}")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise CliError(EXIT_USAGE, f"unknown method(s) {', '.join(unknown)}; valid: {', '.join(METHODS)}")
    try:
        dims = parse_dims(args.dims)
    except ValueError:
        raise CliError(EXIT_USAGE, f"cannot parse dims {args.dims!r}") from None
    corpus = _load_corpus(cfg.corpus)
    model = _load_model(cfg.checkpoint) if any(m.startswith("bezier-gan") for m in methods) else None
    train_curves, tests = _split(corpus, cfg.num_test, cfg.seed)
    out = _outdir(cfg, args)

    rows, curves_by_method = [], {}
    for method in methods:
        method_dims = dims if method in ("svd", "gmdv") else [None]
        for dim in method_dims:
            param = build_parameterization(method, dim, train_curves, model)
            med = float(np.median(_fit_errors(param, tests, cfg.seed)))
            rows.append([method, param.dim, med])
            curves_by_method.setdefault(method, []).append((param.dim, med))
            print(f"{method:>13} dim {param.dim:3d}  median MSE {med:.6g}")
    _write_rows(out / "fit_table.csv", ["method", "dim", "median_mse"], rows)
    series = {m: (np.array([p[0] for p in v], float), np.array([p[1] for p in v])) for m, v in curves_by_method.items()}
    plots.write_svg(out / "fit_mse.svg", plots.line_plot_svg(series, "design variables", "median fitting MSE",
                                                              "Fitting error"))

    if args.optimize:
        evaluate = make_evaluator(cfg.evaluator, cfg.xfoil_path)
        traces = {}
        for method in methods:
            if method == "bezier-gan-c":
                continue
            runs = []
            for seed in cfg.seeds:
                hist, _ = run_method(method, evaluate, cfg.budget, seed, cfg.latent_dim, train_curves, model)
                if hist is not None:
                    (out / f"{method}-seed{seed}.jsonl").write_text(hist.to_jsonl())
                    runs.append(-hist.best_trace())
            if runs:
                traces[method] = np.array(runs)
        if traces:
            plots.write_svg(out / "convergence.svg", plots.convergence_svg(traces))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p, *flags):
    p.add_argument("--config", help="INI file with a [run] section; flags override it")
    opts = {
        "corpus": dict(help=f"corpus file, or '{SYNTHETIC_CORPUS}[:N]' for the built-in superellipse family"),
        "checkpoint": dict(help="trained model checkpoint"),
        "latent_dim": dict(type=int, help="latent code dimension d (mode count for linear baselines)"),
        "noise_dim": dict(type=int, help="noise dimension d'"),
        "budget": dict(type=int, help="evaluations per optimisation run"),
        "seeds": dict(help="seed count N, list a,b,c or range a..b"),
        "seed": dict(type=int, help="random seed"),
        "evaluator": dict(choices=("xfoil", "synthetic"), help="objective evaluator"),
        "xfoil_path": dict(help="XFOIL executable (default: $BEZIERGAN_XFOIL, then PATH)"),
        "out": dict(help="output directory"),
        "steps": dict(type=int, help="training steps"),
        "batch_size": dict(type=int),
        "mmd_every": dict(type=int, help="steps between MMD evaluations (0 disables)"),
        "mmd_samples": dict(type=int),
        "g_updates": dict(type=int, help="generator steps per discriminator step"),
        "num": dict(type=int, help="number of samples"),
        "num_test": dict(type=int, help="held-out curves for the fitting test"),
        "method": dict(help=f"parameterization: {', '.join(METHODS)}"),
    }
    for name in flags:
        p.add_argument("--" + name.replace("_", "-"), dest=name, **opts[name])


def build_parser():
    parser = _Parser(prog="beziergan", description="Bezier-GAN shape parameterization toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("preprocess", help="filter and resample a directory of .dat outlines")
    p.add_argument("directory")
    p.add_argument("--out", default="corpus.bin", help="corpus file to write")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on a corpus")
    _common(p, "corpus", "latent_dim", "noise_dim", "steps", "batch_size", "mmd_every", "mmd_samples", "g_updates",
            "seed", "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw designs from a trained model")
    _common(p, "checkpoint", "num", "seed", "out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mmd", help="MMD^2 between model samples and a corpus")
    _common(p, "checkpoint", "corpus", "mmd_samples", "seed", "out")
    p.set_defaults(func=cmd_mmd)

    p = sub.add_parser("fit-test", help="least-squares fit held-out curves with one parameterization")
    _common(p, "corpus", "checkpoint", "method", "latent_dim", "num_test", "seed", "out")
    p.set_defaults(func=cmd_fit_test)

    p = sub.add_parser("optimize", help="optimise a design with a model (two stage) or a baseline (EGO)")
    _common(p, "checkpoint", "corpus", "latent_dim", "budget", "seeds", "evaluator", "xfoil_path", "out")
    p.add_argument("--baseline", choices=BASELINES, help="optimise a baseline parameterization instead")
    p.add_argument("--oso", action="store_true", help="spend the whole budget on the latent stage")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("benchmark", help="fitting table over methods and dimensions, optional optimisation runs")
    _common(p, "corpus", "checkpoint", "latent_dim", "num_test", "budget", "seeds", "evaluator", "xfoil_path",
            "seed", "out")
    p.add_argument("--methods", default="", help=f"comma list from {', '.join(METHODS)}")
    p.add_argument("--dims", default="2..12", help="mode counts for svd/gmdv, e.g. 2..12 or 4,8")
    p.add_argument("--optimize", action="store_true", help="also run optimisation with --budget and --seeds")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(asctime)s %(message)s")
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}" if not str(exc).startswith(parser.prog) else str(exc), file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())

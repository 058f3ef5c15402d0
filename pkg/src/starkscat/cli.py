"""
Command line interface.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or argument
error, 3 numerical accuracy failure.  Every command writes a JSON run report
(and CSV data where relevant) atomically into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceptance as acc
from . import born_kernel as bk
from . import classical as cl
from . import oscillatory as osc
from . import parabolic as pb
from . import transport as tr
from .config import ExperimentConfig, make_rng
from .errors import (AccuracyError, ConfigError, ConstructionError, DivergenceError,
                     DomainError, IntegrationError)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunReport:
    """Machine-readable outcome of one command.

    Wall times go under ``timing`` so that everything else is a deterministic
    function of the configuration and seed.
    """

    command: str
    config_hash: str
    seed: int
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c["status"] in ("pass", "skip") for c in self.checks)

    def add(self, name, status, metrics=None, message=""):
        self.checks.append({"name": name, "status": status,
                            "metrics": acc.jsonable(metrics or {}), "message": message})

    def to_dict(self):
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "passed": self.passed, "checks": self.checks,
                "metrics": acc.jsonable(self.metrics), "timing": self.timing}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text):
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
    return buf.getvalue()


def _floats(text, name="value"):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name}: expected comma separated numbers, got {text!r}",
                          [name]) from exc


class Outputs:
    """Resolve output paths: ``--out`` ending in ``.csv``/``.json`` names the
    primary file, anything else is a directory."""

    def __init__(self, out, default_stem):
        p = Path(out)
        if p.suffix in (".csv", ".json"):
            self.dir, self.stem = p.parent, p.stem
        else:
            self.dir, self.stem = p, default_stem

    def path(self, suffix, tag=""):
        return self.dir / f"{self.stem}{tag}{suffix}"


def _outputs(args, cfg, stem):
    return Outputs(getattr(args, "out", None) or cfg.output, stem)


def _finish(report, out):
    atomic_write(out.path(".json"), report.to_json())
    for c in report.checks:
        msg = f" ({c['message']})" if c["message"] else ""
        print(f"[{c['status'].upper()}] {c['name']}{msg}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def _from_results(report, results):
    for r in results:
        report.add(f"criterion {r.number}: {r.name}", r.status, r.metrics, r.message)
        report.timing[f"criterion_{r.number}"] = round(r.runtime, 3)


def _phase_columns(d):
    return (["x"] + [f"y{i + 1}" for i in range(d - 1)] + ["eta"]
            + [f"zeta{i + 1}" for i in range(d - 1)])


# ---------------------------------------------------------------- commands


def cmd_parabolic(args, cfg, report):
    """Residual CSV on random points with ``r + x > 2`` plus criteria 1-3."""
    rng = make_rng(cfg.seed)
    d, n = cfg.d, args.points
    x = rng.uniform(5.0, 100.0, n)
    y = rng.normal(scale=1.0, size=(n, d - 1)) * (0.2 * x)[:, None]
    ort = pb.ort_residuals(x, y)
    eik = pb.eikonal_residual(x, y)
    flow1, flow2 = pb.flow_field_checks(x, y)
    named = {"ort_2r": ort[0], "ort_2x": ort[1], "ort_y": ort[2], "eikonal": eik,
             "jacobian_flow": flow1, "ratio_gradient": flow2}
    rows = [[x[i], *y[i], name, vals[i]] for name, vals in named.items() for i in range(n)]
    out = _outputs(args, cfg, "parabolic")
    header = ["x"] + [f"y{i + 1}" for i in range(d - 1)] + ["residual_name", "value"]
    atomic_write(out.path(".csv"), csv_text(header, rows))
    report.metrics.update({k: float(np.max(np.abs(v))) for k, v in named.items()})
    _from_results(report, acc.run_suite(cfg, only={1, 2, 3}))
    return _finish(report, out)


def cmd_orbit(args, cfg, report):
    d = cfg.d
    if args.point:
        z = _floats(args.point, "point")
        if len(z) != 2 * d:
            raise ConfigError(f"point: needs {2 * d} numbers (x, y..., eta, zeta...)", ["point"])
        p0 = cl.PhasePoint.from_array(np.array(z))
    else:
        spec = cl.InvariantRegionSpec(cfg.m, cfg.epsilon, 1)
        p0 = cl.sample_region(make_rng(cfg.seed), 1, spec, d=d, S_range=(20.0, 400.0))[0]
    q = cfg.potential
    t = np.linspace(0.0, args.T, args.samples)
    _, dense = cl.perturbed_flow(p0, args.T, q, dense=True)
    z = dense(t).T
    sol = cl.PhasePoint.from_array(z)
    a = cl.symbol_a(sol, cfg.m)
    E = cl.energy(sol, q)
    out = _outputs(args, cfg, "orbits")
    atomic_write(out.path(".csv"), csv_text(["t"] + _phase_columns(d) + ["a", "energy"],
                                            np.column_stack([t, z, a, E])))
    drift = float(np.max(np.abs(E - E[0])))
    report.metrics["initial_point"] = list(p0.to_array())
    report.metrics["energy_drift"] = drift
    for direction, label in ((1, "zeta_plus"), (-1, "zeta_minus")):
        am = cl.asymptotic_transverse_momentum(p0, q, direction=direction)
        report.metrics[label] = list(np.atleast_1d(am.zeta))
        report.metrics[label + "_bound"] = am.bound
    report.add("energy conservation", "pass" if drift < 1e-8 else "fail", {"drift": drift})
    return _finish(report, out)


def cmd_invariance(args, cfg, report):
    rng = make_rng(cfg.seed)
    T, steps = cfg.grids["flow_time"], int(cfg.grids["flow_steps"])
    signs = (1, -1) if args.sign == "both" else (int(args.sign + "1"),)
    for sign in signs:
        spec = cl.InvariantRegionSpec(cfg.m, cfg.epsilon, sign)
        p = cl.sample_region(rng, args.seeds, spec, d=cfg.d)
        rep = cl.region_invariance_check(p, spec, T, steps)
        slack = cl.mourre_monotonicity(p, spec, T, steps)
        ok = rep.passed and slack >= cfg.tolerances["mourre_slack"]
        report.add(f"invariance sign={sign:+d}", "pass" if ok else "fail",
                   rep.to_dict() | {"mourre_slack": slack})
    return _finish(report, _outputs(args, cfg, "invariance"))


def cmd_symbols(args, cfg, report):
    """Per-level CSVs of ``b_k`` with transport residuals, and the Borel cutoffs."""
    sign = int(args.sign + "1")
    seq = tr.SymbolSequence(cfg.potential, order=args.order, sign=sign, m=cfg.m, eps=cfg.epsilon)
    # sample well inside the region so the residual stencils stay in it
    spec = cl.InvariantRegionSpec(cfg.m, 0.5 * cfg.epsilon, sign)
    p = cl.sample_region(make_rng(cfg.seed), args.grid, spec, d=cfg.d, S_range=(20.0, 400.0))
    out = _outputs(args, cfg, "symbols")
    tol = cfg.tolerances["transport_residual"]
    for k in range(args.order + 1):
        b = np.broadcast_to(seq.b(k, p), p.x.shape)
        res = tr.transport_residual(seq, k, p) if k else np.zeros(len(p.x))
        rows = np.column_stack([np.arange(len(p.x)), p.to_array(), b.real, b.imag, res])
        atomic_write(out.path(".csv", f"_b{k}"),
                     csv_text(["point"] + _phase_columns(cfg.d) + ["Re_b", "Im_b", "residual"],
                              rows))
        worst = float(np.max(res))
        report.metrics[f"level{k}_max_residual"] = worst
        if k:
            report.add(f"transport residual level {k}", "pass" if worst <= tol else "fail",
                       {"max_residual": worst, "tol": tol})
    if args.borel:
        C, _ = tr.borel_cutoffs(seq, d=cfg.d)
        report.metrics["borel_C"] = list(C)
        atomic_write(out.path(".json", "_cutoffs"), json.dumps({"C": list(C)}, indent=2) + "\n")
        ladder = C[0] == 2 and all(C[k] > 1 + C[k - 1] for k in range(1, len(C)))
        report.add("borel cutoffs", "pass" if ladder else "fail", {"C": list(C)})
    return _finish(report, out)


def _parse_profile(text, dim):
    try:
        center, radius = text.split(":")
        c = [float(v) for v in center.split(",")]
        r = float(radius)
    except ValueError as exc:
        raise ConfigError(f"profile: expected CENTER[,CENTER]:RADIUS, got {text!r}",
                          ["profile"]) from exc
    if len(c) != dim:
        raise ConfigError(f"profile: centre needs {dim} components", ["profile"])
    return osc.TransverseProfile(tuple(c), r)


def _parse_grid(text):
    try:
        xs, ys = text.split(":")
        x0, x1, nx = (float(v) for v in xs.split(","))
        y0, y1, ny = (float(v) for v in ys.split(","))
    except ValueError as exc:
        raise ConfigError(f"grid: expected x0,x1,nx:y0,y1,ny, got {text!r}", ["grid"]) from exc
    if nx < 1 or ny < 1:
        raise ConfigError("grid: point counts must be positive", ["grid"])
    return np.linspace(x0, x1, int(nx)), np.linspace(y0, y1, int(ny))


def cmd_eigenfunction(args, cfg, report):
    d = cfg.d
    xi = _parse_profile(args.amplitude, d - 1)
    xs, ys = _parse_grid(args.grid)
    spec = osc.OscIntegralSpec(lam=cfg.lam)
    rows, worst = [], 0.0
    for x in xs:
        for yv in ys:
            y = np.zeros(d - 1)
            y[0] = yv
            res = osc.eval_phi(spec, xi, x, y)
            worst = max(worst, res.tail_bound)
            rows.append([x, *y, res.value.real, res.value.imag, abs(res.value)])
    header = ["x"] + [f"y{i + 1}" for i in range(d - 1)] + ["Re", "Im", "abs"]
    out = _outputs(args, cfg, "eigenfunction")
    atomic_write(out.path(".csv"), csv_text(header, rows))
    report.add("tail bound", "pass" if worst <= spec.tol else "fail", {"max_tail_bound": worst})
    return _finish(report, out)


def cmd_stationary(args, cfg, report):
    xs = _floats(args.x_list, "x-list") if args.x_list else cfg.grids["x_list"]
    omega = cfg.grids["omega"] if args.omega is None else args.omega
    xi = (_parse_profile(args.amplitude, 1) if args.amplitude
          else osc.TransverseProfile((omega,), 1.2 * omega))
    study = osc.asymptotic_error_study(xs, omega, cfg.lam, xi)
    band = cfg.tolerances["slope_band"]
    report.metrics.update(study)
    report.metrics["x_list"] = list(xs)
    report.add("relative error slope", "pass" if abs(study["slope"] - 1) <= band else "fail",
               {"slope": study["slope"]})
    report.add("hessian slope", "pass" if abs(study["hessian_slope"] - 1) <= band else "fail",
               {"hessian_slope": study["hessian_slope"]})
    print(json.dumps({"slope": study["slope"], "hessian_slope": study["hessian_slope"]}))
    return _finish(report, _outputs(args, cfg, "stationary_phase"))


def cmd_born_kernel(args, cfg, report):
    q, d = cfg.potential, cfg.d
    fit = bk.diagonal_singularity(q, d, cfg.grids["y_min"], cfg.grids["y_max"])
    out = _outputs(args, cfg, "kernel")
    rows = np.column_stack([fit.s, fit.T.real, fit.T.imag, np.abs(fit.T)])
    atomic_write(out.path(".csv"), csv_text(["s", "ReT", "ImT", "absT"], rows))
    report.metrics.update(fit.to_dict())
    if not fit.singular:
        report.add("singularity-fit", "skip", {}, "no singular part")
    else:
        target = 0.5 + q.alpha - d
        ok = (abs(fit.exponent - target) <= cfg.tolerances["exponent_band"]
              and fit.drift < cfg.tolerances["drift"])
        report.add("singularity-fit", "pass" if ok else "fail",
                   {"exponent": fit.exponent, "target": target, "drift": fit.drift})
    return _finish(report, out)


def cmd_singularity_fit(args, cfg, report):
    path = Path(args.input)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"in: cannot read kernel CSV {path}: {exc}", ["in"]) from exc
    if data.shape[1] < 3:
        raise ConfigError("in: expected columns s, ReT, ImT", ["in"])
    s, T = data[:, 0], data[:, 1] + 1j * data[:, 2]
    window = tuple(_floats(args.window, "window")) if args.window else bk.FIT_WINDOW
    fit = bk.fit_singularity(s, T, window, args.pin)
    result = {"exponent": fit.exponent, "coeff_re": fit.coefficient.real,
              "coeff_im": fit.coefficient.imag, "residual": fit.residual, "window": list(window)}
    print(json.dumps(acc.jsonable(result), sort_keys=True))
    report.metrics.update(result)
    if fit.singular:
        report.add("singularity-fit", "pass", result)
    else:
        report.add("singularity-fit", "skip", result, "no singular part")
    return _finish(report, _outputs(args, cfg, "singularity_fit"))


def cmd_suite(args, cfg, report):
    only = {int(v) for v in _floats(args.only, "only")} if args.only else None
    results = acc.run_suite(cfg, only)
    for r in results:
        print(r.line())
    _from_results(report, results)
    atomic_write(_outputs(args, cfg, "suite").path(".json"), report.to_json())
    return EXIT_PASS if report.passed else EXIT_FAIL


COMMANDS = {
    "parabolic": cmd_parabolic,
    "orbit": cmd_orbit,
    "invariance": cmd_invariance,
    "symbols": cmd_symbols,
    "eigenfunction": cmd_eigenfunction,
    "stationary-phase-check": cmd_stationary,
    "born-kernel": cmd_born_kernel,
    "singularity-fit": cmd_singularity_fit,
    "suite": cmd_suite,
}


# ---------------------------------------------------------------- parser


def _global_flags(parser, sub):
    # on subparsers the defaults are suppressed so they do not mask values
    # given before the subcommand
    default = argparse.SUPPRESS if sub else None
    parser.add_argument("--config", metavar="PATH", default=default, help="YAML config file")
    parser.add_argument("--out", metavar="DIR", default=default,
                        help="output directory (or primary .csv/.json file)")
    parser.add_argument("--seed", type=int, default=default, help="64-bit seed")


def _run_profile(parser, sub):
    parser.add_argument("--profile", dest="run_profile", choices=("quick", "full"),
                        default=argparse.SUPPRESS if sub else None)


_MODEL_FLAGS = {
    "potential": dict(help="family[:key=val,...], e.g. coulomb:kappa=0.5"),
    "kappa": dict(type=float),
    "alpha": dict(type=float),
    "d": dict(type=int),
    "m": dict(type=int),
    "eps": dict(type=float, help="epsilon of the region X^+-_eps"),
    "lambda": dict(type=float, dest="lam", help="energy"),
}


def _model_flags(parser, *names):
    for name in names:
        parser.add_argument(f"--{name}", default=argparse.SUPPRESS, **_MODEL_FLAGS[name])


def build_parser():
    parser = argparse.ArgumentParser(prog="starkscat",
                                     description="Stark scattering numerics and checks.")
    _global_flags(parser, sub=False)
    _run_profile(parser, sub=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_, profile=True):
        p = sub.add_parser(name, help=help_, description=help_)
        _global_flags(p, sub=True)
        if profile:
            _run_profile(p, sub=True)
        return p

    p = add("parabolic", "parabolic-coordinate identities and residual CSV")
    p.add_argument("action", nargs="?", default="check", choices=("check",))
    p.add_argument("--points", type=int, default=200)
    _model_flags(p, "d")

    p = add("orbit", "one perturbed orbit with its asymptotic transverse momenta")
    p.add_argument("--point", default=None, help="x,y...,eta,zeta...; random if omitted")
    p.add_argument("--T", type=float, default=50.0, help="integration time")
    p.add_argument("--samples", type=int, default=201)
    _model_flags(p, "potential", "kappa", "alpha", "d", "m", "eps")

    p = add("invariance", "free-flow invariance of X^+-_eps and the Mourre slack")
    p.add_argument("--sign", choices=("+", "-", "both"), default="both")
    p.add_argument("--seeds", type=int, default=1000, help="number of random initial points")
    _model_flags(p, "d", "m", "eps")

    p = add("symbols", "transport layers, residuals and Borel cutoffs")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--sign", choices=("+", "-"), default="+")
    p.add_argument("--grid", type=int, default=20, help="number of sampled region points")
    p.add_argument("--borel", action=argparse.BooleanOptionalAction, default=True)
    _model_flags(p, "potential", "kappa", "alpha", "d", "m", "eps")

    # here --profile is the transverse amplitude; the run profile goes before
    # the subcommand
    p = add("eigenfunction", "Fourier-Airy integral on an (x, y) grid", profile=False)
    p.add_argument("--profile", dest="amplitude", default="0.3,0:0.5",
                   help="transverse bump CENTER[,CENTER]:RADIUS")
    p.add_argument("--grid", default="5,50,4:-5,5,5", help="x0,x1,nx:y0,y1,ny")
    _model_flags(p, "d", "lambda")

    p = add("stationary-phase-check", "error order of the stationary-phase asymptotics")
    p.add_argument("--x-list", default=None, help="comma separated x values")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--amplitude", default=None, help="transverse bump CENTER:RADIUS")
    _model_flags(p, "lambda")

    p = add("born-kernel", "kernel of the principal symbol and its diagonal fit")
    _model_flags(p, "potential", "kappa", "alpha", "d")

    p = add("singularity-fit", "power-law fit of a kernel CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--window", default=None, help="s_min,s_max")
    p.add_argument("--pin", type=float, default=None, help="exponent used for the coefficient")

    p = add("suite", "acceptance battery")
    p.add_argument("--only", default=None, help="comma separated criterion numbers")
    _model_flags(p, "potential", "kappa", "alpha", "d")
    return parser


def _potential_override(text, current):
    family, _, rest = text.partition(":")
    family = family.strip()
    pot = dict(current) if family == current.get("family") else {"family": family}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        key = key.strip()
        try:
            pot[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"potential.{key}: not a number", [f"potential.{key}"]) from exc
    return pot


def load_config(args):
    """Config file (or defaults) with command line overrides, validated as a whole."""
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    data = base.to_dict()
    if getattr(args, "potential", None):
        data["potential"] = _potential_override(args.potential, data["potential"])
    for key in ("kappa", "alpha"):
        if hasattr(args, key):
            data["potential"][key] = getattr(args, key)
    for attr, key in (("d", "d"), ("m", "m"), ("eps", "epsilon"), ("lam", "lambda"),
                      ("seed", "seed"), ("run_profile", "profile")):
        val = getattr(args, attr, None)
        if val is not None:
            data[key] = val
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args)
        report = RunReport(args.command, cfg.hash(), cfg.seed)
        code = COMMANDS[args.command](args, cfg, report)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyError, IntegrationError, DivergenceError, ConstructionError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: {'pass' if code == 0 else 'FAIL'} "
          f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

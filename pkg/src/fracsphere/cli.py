"""Command-line entry point.

Every parameter can come from a flag or from a flat key=value config file
(--config, INI sections are merged); flags win over the file, the file wins
over defaults. Primary outputs are CSV or JSON; with --out a sidecar
<out>.meta.json echoes the resolved configuration, seed and version.
"""

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ArgumentError, ConsistencyError, DomainError, RangeError

# documented defaults per command; keys are the parameter names accepted in
# config files and (with '-' for '_') as flags
DEFAULTS = {
    "ml": {"nu": 0.5, "x_min": 0.0, "x_max": 10.0, "n": 101, "z": None},
    "wigner3j": {"l1": None, "l2": None, "l3": None, "m1": 0, "m2": 0, "m3": 0, "exact": False},
    "simulate-subordinator": {"nu": 0.5, "t_max": 1.0, "n_t": 101, "paths": 1, "grid_dt": 1e-3, "seed": 0},
    "simulate-trd": {"nu": 0.5, "theta0": 0.0, "phi0": 0.0, "t0": 0.0, "t_max": 1.0, "n_t": 101,
                     "paths": 1, "dt": 1e-3, "seed": 0},
    "density": {"nu": None, "t": None, "t0": 0.0, "theta0": 0.0, "phi0": 0.0, "l_max": None,
                "n_theta": 64, "n_phi": 129},
    "sample-field": {"alpha": 3.0, "amplitude": 1.0, "l_max": 20, "n_theta": 32, "n_phi": 65,
                     "realizations": 1, "seed": 0},
    "covariance-analytic": {"formula": "same-point", "nu": 0.6, "t0": 0.0, "t1": 0.5, "t2": 0.5,
                            "x_theta": 0.7, "x_phi": 0.2, "y_theta": 2.0, "y_phi": 1.0,
                            "alpha": 3.0, "amplitude": 1.0, "l_max": 20},
    "covariance-empirical": {"formula": "same-point", "nu": 0.6, "t0": 0.0, "t1": 0.5, "t2": 0.5,
                             "x_theta": 0.7, "x_phi": 0.2, "y_theta": 2.0, "y_phi": 1.0,
                             "alpha": 3.0, "amplitude": 1.0, "l_max": 20, "paths": 10000,
                             "dt": 1e-3, "estimator": "field", "seed": 0},
    "validate": {"suite": "all", "seed": 42, "budget": None, "record_runtime": False},
}

TYPES = {
    "nu": float, "x_min": float, "x_max": float, "n": int, "z": float, "l1": int, "l2": int, "l3": int,
    "m1": int, "m2": int, "m3": int, "exact": bool, "t_max": float, "n_t": int, "paths": int,
    "grid_dt": float, "seed": int, "theta0": float, "phi0": float, "t0": float, "t": float, "dt": float,
    "l_max": int, "n_theta": int, "n_phi": int, "alpha": float, "amplitude": float, "realizations": int,
    "formula": str, "t1": float, "t2": float, "x_theta": float, "x_phi": float, "y_theta": float,
    "y_phi": float, "estimator": str, "suite": str, "budget": float, "record_runtime": bool,
}

HELP = {
    "nu": "fractional order in (0,1]", "z": "single argument E_nu(-z) (overrides the x range)",
    "t": "evaluation time", "t0": "start time", "l_max": "series truncation (adaptive if omitted)",
    "grid_dt": "operational grid step", "dt": "operational step for the walk and clock",
    "paths": "number of paths / replications", "seed": "RNG seed", "formula": "covariance formula",
    "estimator": "field or conditional", "budget": "runtime budget in seconds (scales replications)",
    "record_runtime": "store measured runtime in the report (breaks byte-identity)",
    "exact": "also print the exact rational value", "alpha": "spectrum exponent in C_l = A (l+1)^-alpha",
}


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    sources: dict = field(default_factory=dict)


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ArgumentError(f"cannot read {v!r} as a boolean")


def _convert(key, v):
    if v is None:
        return None
    t = TYPES[key]
    try:
        if t is bool:
            return _bool(v)
        if t is int:
            f = float(v)
            if f != int(f):
                raise ValueError
            return int(f)
        return t(v)
    except ValueError:
        raise ArgumentError(f"parameter {key!r}: cannot read {v!r} as {t.__name__}") from None


def read_config_file(path, command):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ArgumentError(f"cannot read config file {path}: {e.strerror}") from None
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp.read_string(text)
    allowed = DEFAULTS[command]
    out = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            key = k.replace("-", "_")
            if key not in allowed:
                raise ArgumentError(f"unknown config key {k!r} for command {command!r}")
            out[key] = _convert(key, v)
    return out


def _check_range(command, p):
    def need(name, ok, bound):
        if p.get(name) is not None and not ok(p[name]):
            raise RangeError(f"parameter {name!r}={p[name]} out of range {bound}")

    need("nu", lambda v: 0.0 < v <= 1.0, "(0,1]")
    if command == "simulate-subordinator":
        need("nu", lambda v: 0.0 < v < 1.0, "(0,1)")
    for k in ("l_max", "l1", "l2", "l3"):
        need(k, lambda v: v >= 0, ">= 0")
    for k in ("paths", "n_t", "n", "n_theta", "n_phi", "realizations"):
        need(k, lambda v: v >= 1, ">= 1")
    for k in ("grid_dt", "dt", "t_max", "budget"):
        need(k, lambda v: v > 0, "> 0")
    need("t0", lambda v: v >= 0, ">= 0")
    need("theta0", lambda v: 0 <= v <= math.pi, "[0,pi]")
    need("phi0", lambda v: 0 <= v < 2 * math.pi, "[0,2pi)")
    for k in ("x_theta", "y_theta"):
        need(k, lambda v: 0 <= v <= math.pi, "[0,pi]")
    for k in ("x_phi", "y_phi"):
        need(k, lambda v: 0 <= v < 2 * math.pi, "[0,2pi)")
    if command == "density":
        for k in ("nu", "t"):
            if p.get(k) is None:
                raise ArgumentError(f"parameter {k!r} is required")
        if not p["t"] > p["t0"]:
            raise RangeError(f"parameter 't'={p['t']} out of range (t0, inf)")
    if command.startswith("covariance"):
        if not (p["t0"] <= p["t1"] <= p["t2"]):
            raise RangeError("times must be ordered t0 <= t1 <= t2")
    if command == "wigner3j":
        for k in ("l1", "l2", "l3"):
            if p.get(k) is None:
                raise ArgumentError(f"parameter {k!r} is required")
    if command == "ml" and p["x_min"] < 0:
        raise RangeError("parameter 'x_min' out of range >= 0")


def resolve(command, flags, config_path=None):
    """Merge defaults < config file < flags and range-check the result."""
    p = dict(DEFAULTS[command])
    src = {k: "default" for k in p}
    if config_path:
        for k, v in read_config_file(config_path, command).items():
            p[k] = v
            src[k] = "file"
    for k, v in flags.items():
        if k in p and v is not None:
            p[k] = _convert(k, v)
            src[k] = "flag"
    _check_range(command, p)
    return p, src


def build_parser():
    top = argparse.ArgumentParser(
        prog="fracsphere",
        description="Time-changed rotational diffusion on the sphere and random fields driven by it.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="cmd", required=True)

    def add(parser, command):
        parser.add_argument("--config", help="flat key=value config file (flags override it)")
        parser.add_argument("--out", help="output path (stdout if omitted)")
        parser.add_argument("--format", choices=("csv", "json"), default=None,
                            help="output format (default: from --out suffix, else csv)")
        parser.add_argument("--workers", type=int, default=1, help="worker threads (default: 1)")
        for k, d in DEFAULTS[command].items():
            flag = "--" + k.replace("_", "-")
            h = HELP.get(k, k.replace("_", " "))
            dh = "adaptive" if (d is None and k == "l_max") else ("required" if d is None else d)
            if TYPES[k] is bool:
                parser.add_argument(flag, dest=k, action="store_const", const=True, default=None,
                                    help=f"{h} (default: {dh})")
            else:
                parser.add_argument(flag, dest=k, default=None, help=f"{h} (default: {dh})")
        parser.set_defaults(command=command)

    add(sub.add_parser("ml", help="Mittag-Leffler E_nu(-x) on a grid"), "ml")
    add(sub.add_parser("wigner3j", help="Wigner 3j symbol"), "wigner3j")
    sim = sub.add_parser("simulate", help="simulate the inverse subordinator or the TRD")
    ss = sim.add_subparsers(dest="what", required=True)
    add(ss.add_parser("subordinator", help="inverse stable subordinator paths"), "simulate-subordinator")
    add(ss.add_parser("trd", help="time-changed rotational diffusion paths"), "simulate-trd")
    add(sub.add_parser("density", help="transition density on a quadrature grid"), "density")
    smp = sub.add_parser("sample", help="sample random objects")
    sf = smp.add_subparsers(dest="what", required=True)
    add(sf.add_parser("field", help="isotropic Gaussian field on a grid"), "sample-field")
    cov = sub.add_parser("covariance", help="covariances of the time-changed field")
    cs = cov.add_subparsers(dest="what", required=True)
    add(cs.add_parser("analytic", help="closed-form covariance"), "covariance-analytic")
    add(cs.add_parser("empirical", help="Monte Carlo covariance"), "covariance-empirical")
    add(sub.add_parser("validate", help="run a validation suite"), "validate")
    return top


def parse_config(argv):
    """Parse argv into a validated RunConfig."""
    ns = build_parser().parse_args(argv)
    flags = {k: getattr(ns, k) for k in DEFAULTS[ns.command] if hasattr(ns, k)}
    params, src = resolve(ns.command, flags, ns.config)
    fmt = ns.format or ("json" if ns.out and ns.out.endswith(".json") else "csv")
    if ns.workers < 1:
        raise RangeError("parameter 'workers' out of range >= 1")
    return RunConfig(ns.command, params, ns.out, fmt, ns.workers, src)


# output -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def render(records, fmt, columns=None):
    if fmt == "json":
        return json.dumps(_jsonable(records), indent=1, allow_nan=False) + "\n"
    cols = list(columns) if columns is not None else (list(records[0]) if records else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        if list(r) != cols:
            raise ArgumentError("records are not homogeneous")
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def write_output(records, fmt, path, columns=None, meta=None):
    """Write records as CSV (17 significant digits) or JSON; with a path,
    also write the <path>.meta.json sidecar."""
    text = render(records, fmt, columns)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if meta is not None:
            with open(path + ".meta.json", "w", encoding="utf-8") as fh:
                json.dump(_jsonable(meta), fh, indent=1)
                fh.write("\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from None


def read_csv(path):
    """Parse a CSV written by write_output back into float/str records."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    cols, out = rows[0], []
    for r in rows[1:]:
        rec = {}
        for c, v in zip(cols, r):
            try:
                rec[c] = float(v)
            except ValueError:
                rec[c] = v
        out.append(rec)
    return out


# commands ---------------------------------------------------------------

def _spectrum(p):
    from .fields import PowerSpectrum
    return PowerSpectrum.parametric(p["alpha"], p["amplitude"], lmax=p["l_max"])


def _points(p):
    from .sphgeom import SpherePoint
    return SpherePoint(p["x_theta"], p["x_phi"]), SpherePoint(p["y_theta"], p["y_phi"])


def cmd_ml(p, cfg):
    from .specfun import mittag_leffler
    xs = np.array([p["z"]]) if p["z"] is not None else np.linspace(p["x_min"], p["x_max"], p["n"])
    vals = mittag_leffler(p["nu"], -xs)
    return [{"nu": p["nu"], "x": float(x), "E": float(v)} for x, v in zip(xs, np.atleast_1d(vals))], {}


def cmd_wigner3j(p, cfg):
    from .wigner import wigner_3j, wigner_3j_exact
    idx = (p["l1"], p["l2"], p["l3"], p["m1"], p["m2"], p["m3"])
    v = wigner_3j(idx)
    rec = {"l1": idx[0], "l2": idx[1], "l3": idx[2], "m1": idx[3], "m2": idx[4], "m3": idx[5],
           "value": v}
    if p["exact"]:
        s, q = wigner_3j_exact(idx)
        rec["exact"] = "0" if s == 0 else f"{'-' if s < 0 else ''}sqrt({q.numerator}/{q.denominator})"
    return [rec], {}


def cmd_simulate_subordinator(p, cfg):
    from .rng import substream
    from .subordinate import StableParams, sample_inverse_paths
    t = np.linspace(0.0, p["t_max"], p["n_t"])
    L = sample_inverse_paths(StableParams(p["nu"], p["seed"], p["grid_dt"]), t, p["paths"],
                             rng=substream(p["seed"], "cli-subordinator"))
    recs = [{"path": i, "t": float(t[j]), "L": float(L[i, j])}
            for i in range(L.shape[0]) for j in range(t.size)]
    return recs, {"columns": ["path", "t", "L"]}


def cmd_simulate_trd(p, cfg):
    from .diffusion import simulate_trd
    from .rng import substream
    from .sphgeom import SpherePoint, vector_to_angles
    t = p["t0"] + np.linspace(0.0, p["t_max"], p["n_t"])
    ens = simulate_trd(SpherePoint(p["theta0"], p["phi0"]), p["nu"], t, rng=substream(p["seed"], "cli-trd"),
                       t0=p["t0"], dt=p["dt"], n_paths=p["paths"])
    th, ph = vector_to_angles(ens.vectors)
    recs = []
    for i in range(ens.vectors.shape[0]):
        for j in range(t.size):
            v = ens.vectors[i, j]
            recs.append({"path": i, "t": float(t[j]), "L": float(ens.op_times[i, j]), "theta": float(th[i, j]),
                         "phi": float(ph[i, j]), "x": float(v[0]), "y": float(v[1]), "z": float(v[2])})
    return recs, {"columns": ["path", "t", "L", "theta", "phi", "x", "y", "z"]}


def cmd_density(p, cfg):
    from .diffusion import DensityParams, density_coefficients, transition_density
    from .sphgeom import SpherePoint, build_quadrature
    g = build_quadrature(p["n_theta"], p["n_phi"])
    dp = DensityParams(p["nu"], p["l_max"], None, p["t0"])
    c, tail = density_coefficients(dp, p["t"])
    u = transition_density(g.vectors, p["t"], SpherePoint(p["theta0"], p["phi0"]), dp)
    recs = [{"theta": float(a), "phi": float(b), "weight": float(w), "density": float(v)}
            for a, b, w, v in zip(g.theta, g.phi, g.weights, u)]
    extra = {"l_max_used": len(c) - 1, "truncation_tail": tail, "integral": float(g.integrate(u)),
             "min_density": float(np.min(u))}
    return recs, {"columns": ["theta", "phi", "weight", "density"], "extra": extra}


def cmd_sample_field(p, cfg):
    from .fields import evaluate_field, sample_coefficients
    from .rng import substream
    from .sphgeom import build_quadrature
    g = build_quadrature(p["n_theta"], p["n_phi"])
    S = _spectrum(p)
    rng = substream(p["seed"], "cli-field")
    recs = []
    for r in range(p["realizations"]):
        a = sample_coefficients(S, rng)
        T = evaluate_field(a, g.theta, g.phi)
        recs += [{"realization": r, "theta": float(x), "phi": float(y), "value": float(v)}
                 for x, y, v in zip(g.theta, g.phi, T)]
    return recs, {"columns": ["realization", "theta", "phi", "value"],
                  "extra": {"variance": S.variance(), "tail_bound": S.tail_bound()}}


def _experiment(p):
    from .estimate import CovarianceExperiment
    x, y = _points(p)
    return CovarianceExperiment(p["formula"], p["nu"], p["t0"], p["t1"], p["t2"], x, y, _spectrum(p),
                                dt=p.get("dt", 1e-3), estimator=p.get("estimator", "field"))


def cmd_covariance_analytic(p, cfg):
    e = _experiment(p)
    v, tail = e.analytic()
    return [{"formula": e.formula, "nu": e.nu, "t0": e.t0, "t1": e.t1, "t2": e.t2, "value": v,
             "truncation_tail": tail}], {}


def cmd_covariance_empirical(p, cfg):
    from .estimate import empirical_covariance
    e = _experiment(p)
    est = empirical_covariance(e, p["paths"], p["seed"], workers=cfg.workers)
    v, tail = e.analytic()
    b = e.bias_bound()
    return [{"formula": e.formula, "nu": e.nu, "t0": e.t0, "t1": e.t1, "t2": e.t2, "estimate": est.value,
             "stderr": est.stderr, "n": est.n, "analytic": v, "bias_bound": b, "truncation_tail": tail,
             "within_tolerance": bool(abs(est.value - v) <= 3 * est.stderr + b)}], {}


COMMANDS = {
    "ml": cmd_ml, "wigner3j": cmd_wigner3j, "simulate-subordinator": cmd_simulate_subordinator,
    "simulate-trd": cmd_simulate_trd, "density": cmd_density, "sample-field": cmd_sample_field,
    "covariance-analytic": cmd_covariance_analytic, "covariance-empirical": cmd_covariance_empirical,
}


def _meta(cfg, extra=None):
    m = {"tool": "fracsphere", "version": __version__, "command": cfg.command, "config": cfg.params,
         "sources": cfg.sources, "seed": cfg.params.get("seed"), "format": cfg.fmt}
    if extra:
        m["results"] = extra
    return m


def run(cfg):
    """Execute a RunConfig; returns the process exit code."""
    if cfg.command == "validate":
        from .estimate import run_validation_suite
        p = cfg.params
        rep = run_validation_suite(p["suite"], p["seed"], p["budget"], cfg.workers)
        d = rep.to_dict(record_runtime=p["record_runtime"])
        text = json.dumps(d, indent=1) + "\n"
        if cfg.out:
            try:
                with open(cfg.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
                meta = _meta(cfg, {"runtime_s": rep.runtime, "n_checks": len(rep.checks),
                                   "n_failed": rep.n_failed})
                with open(cfg.out + ".meta.json", "w", encoding="utf-8") as fh:
                    json.dump(_jsonable(meta), fh, indent=1)
                    fh.write("\n")
            except OSError as e:
                raise OSError(f"cannot write {cfg.out}: {e.strerror}") from None
        else:
            sys.stdout.write(text)
        for c in rep.checks:
            if not c.passed:
                print(f"FAIL {c.name}: estimate={c.estimate:.6g} analytic={c.analytic:.6g} "
                      f"tolerance={c.tolerance:.3g}", file=sys.stderr)
        print(f"{rep.suite}: {len(rep.checks) - rep.n_failed}/{len(rep.checks)} checks passed",
              file=sys.stderr)
        return 0 if rep.passed else 1
    recs, info = COMMANDS[cfg.command](cfg.params, cfg)
    if cfg.command == "wigner3j" and cfg.out is None:
        r = recs[0]
        print(f"{r['value']:.15g}" + (f"  {r['exact']}" if "exact" in r else ""))
        return 0
    write_output(recs, cfg.fmt, cfg.out, info.get("columns"),
                 _meta(cfg, info.get("extra")) if cfg.out else None)
    return 0


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (ArgumentError, DomainError, RangeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ArgumentError, DomainError, RangeError, ConsistencyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: figure data, bound tables and the verification suite.

Parameters resolve in the order built-in default < TOML file < flag.  A TOML
file may set keys at top level or inside a table named after the
subcommand; the table wins over top level.  Everything is validated before
any computation starts.  All output is CSV with a header row and floats
printed with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import bounds, modulus, smoothing, systems, value, verify
from .bounds import ContinuityParams, LinearModulus
from .systems import MetricInterval, RngStream, TimeDomain

__all__ = ["ConfigError", "RunConfig", "build_config", "run", "main", "format_float"]

SUBCOMMANDS = ("figure1", "figure2", "bounds", "modulus", "roughness", "verify", "value")
U64 = 2**64


class ConfigError(ValueError):
    """Invalid parameter; raised before any computation."""


@dataclass(frozen=True)
class Param:
    kind: str  # "float", "int", "floats", "str"
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple = ()
    help: str = ""


def _gamma_ok(g):
    return 0.0 < g < 1.0


def _pos(x):
    return x > 0 and math.isfinite(x)


GAMMA = Param("float", 0.8, _gamma_ok, "must lie in (0, 1)", help="discount factor")
SYSTEMS = ("logistic", "power", "clipped_linear", "noisy_logistic")

PARAMS: dict[str, dict[str, Param]] = {
    "figure1": {
        "gamma": GAMMA,
        "sigma": Param("float", 0.01, _pos, "must be > 0", help="noise standard deviation"),
        "grid_points": Param("int", 14001, lambda n: n >= 101, "must be >= 101", help="solver grid size on [-0.2, 1.2]"),
        "points": Param("int", 197, lambda n: n >= 2, "must be >= 2", help="output states in [0.01, 0.99]"),
        "quad_nodes": Param("int", 64, lambda n: 8 <= n <= smoothing.MAX_QUAD_NODES,
                            f"must lie in [8, {smoothing.MAX_QUAD_NODES}]", help="Gauss-Hermite nodes for the gradient"),
        "tol": Param("float", 1e-8, _pos, "must be > 0", help="solver tolerance"),
        "h": Param("float", 2e-4, lambda h: 0 < h < 0.01, "must lie in (0, 0.01)",
                   help="finite-difference step, at least one grid spacing"),
        "eps": Param("float", 1e-12, _pos, "must be > 0", help="truncation error of the undisturbed value"),
    },
    "figure2": {
        "L": Param("float", 1.5, lambda L: L > 1 and math.isfinite(L), "must be > 1"),
        "gammas": Param("floats", (0.5, 0.9, 0.99), lambda gs: len(gs) >= 1 and all(map(_gamma_ok, gs)),
                        "must be a nonempty list in (0, 1)", help="discount factors"),
        "grid_points": Param("int", 2000, lambda n: n >= 2, "must be >= 2", help="state grid on [0, 1]"),
        "d0_points": Param("int", 100, lambda n: n >= 2, "must be >= 2"),
        "d0_min": Param("float", 1e-4, lambda d: 0 < d < 1, "must lie in (0, 1)"),
        "eps": Param("float", 1e-13, _pos, "must be > 0"),
        "workers": Param("int", 3, lambda n: n >= 1, "must be >= 1", help="parallel workers"),
    },
    "bounds": {
        "L": Param("float", 1.5, lambda L: L > 1 and math.isfinite(L), "must be > 1"),
        "gamma": Param("float", 0.9, _gamma_ok, "must lie in (0, 1)"),
        "D": Param("float", 1.0, _pos, "must be > 0", help="diameter of the state space"),
        "C": Param("float", 1.0, lambda c: c >= 0 and math.isfinite(c), "must be >= 0",
                   help="Lipschitz constant of the reward"),
        "beta": Param("float", None, lambda b: 0 < b < 1, "must lie in (0, 1)",
                      help="Hoelder exponent, required when L gamma = 1"),
        "time_domain": Param("str", "discrete", choices=("discrete", "continuous")),
        "d0_points": Param("int", 100, lambda n: n >= 2, "must be >= 2"),
        "d0_min": Param("float", 1e-4, _pos, "must be > 0"),
    },
    "modulus": {
        "system": Param("str", "power", choices=SYSTEMS),
        "L": Param("float", 1.5, lambda L: L > 1 and math.isfinite(L), "must be > 1",
                   help="expansion rate (power, clipped_linear); logistic uses 4"),
        "gamma": Param("float", 0.9, _gamma_ok, "must lie in (0, 1)"),
        "D": Param("float", 1.0, _pos, "must be > 0"),
        "sigma": Param("float", 0.01, _pos, "must be > 0"),
        "eps": Param("float", 1e-12, _pos, "must be > 0"),
        "samples": Param("int", 2000, lambda n: n >= 2, "must be >= 2"),
        "grid_points": Param("int", 2000, lambda n: n >= 2, "must be >= 2"),
        "d0_points": Param("int", 100, lambda n: n >= 2, "must be >= 2"),
        "d0_min": Param("float", 1e-4, _pos, "must be > 0"),
    },
    "roughness": {
        "gamma": GAMMA,
        "sigma": Param("float", 0.01, _pos, "must be > 0"),
        "hs": Param("floats", (1e-2, 1e-3, 1e-4, 1e-5), lambda hs: len(hs) >= 1 and all(0 < h <= 0.01 for h in hs),
                    "must be a nonempty list in (0, 0.01]", help="difference steps"),
        "points": Param("int", 2001, lambda n: n >= 2, "must be >= 2", help="states in [0, 0.99]"),
        "grid_points": Param("int", 14001, lambda n: n >= 101, "must be >= 101"),
        "eps": Param("float", 1e-12, _pos, "must be > 0"),
    },
    "verify": {
        "samples": Param("int", 2000, lambda n: n >= 100, "must be >= 100", help="Monte Carlo paths per check"),
        "variance_samples": Param("int", 1_000_000, lambda n: n >= 1000, "must be >= 1000"),
        "smoothing_grid": Param("int", 14001, lambda n: n >= 101, "must be >= 101"),
        "modulus_grid": Param("int", 2000, lambda n: n >= 2, "must be >= 2"),
    },
    "value": {
        "system": Param("str", "power", choices=SYSTEMS),
        "L": Param("float", 1.5, lambda L: L > 1 and math.isfinite(L), "must be > 1"),
        "gamma": Param("float", 0.9, _gamma_ok, "must lie in (0, 1)"),
        "D": Param("float", 1.0, _pos, "must be > 0"),
        "sigma": Param("float", 0.01, _pos, "must be > 0"),
        "eps": Param("float", 1e-10, _pos, "must be > 0"),
        "samples": Param("int", 10_000, lambda n: n >= 1, "must be >= 1"),
        "x": Param("floats", (0.0, 0.25, 0.5, 0.75, 1.0), lambda xs: len(xs) >= 1, "must be nonempty",
                   help="states to evaluate"),
    },
}

GLOBAL_KEYS = ("seed", "out")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: Path = Path("out")


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _coerce(name: str, p: Param, raw: Any) -> Any:
    try:
        if p.kind == "float":
            if isinstance(raw, bool):
                raise TypeError
            return float(raw)
        if p.kind == "int":
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise TypeError
            return int(raw)
        if p.kind == "floats":
            if isinstance(raw, str):
                raw = [s for s in raw.replace(",", " ").split()]
            if isinstance(raw, (int, float)):
                raw = [raw]
            return tuple(float(v) for v in raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot read {raw!r} as {p.kind}") from None


def _add_flag(sub: argparse.ArgumentParser, name: str, p: Param) -> None:
    flag = "--" + name.replace("_", "-")
    kw: dict[str, Any] = {"dest": name, "default": None}
    default = "" if p.default is None else f" (default {p.default})"
    kw["help"] = (p.help + default).strip()
    if p.kind == "floats":
        kw["nargs"] = "+"
    elif p.choices:
        kw["choices"] = p.choices
    sub.add_argument(flag, **kw)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", default=None, help="random seed, an unsigned 64-bit integer (default 0)")
    common.add_argument("--out", default=None, help="output directory (default ./out)")
    common.add_argument("--config", default=None, help="TOML file with parameters")
    parser = argparse.ArgumentParser(prog="valuecont", description="Continuity of discounted value functions.")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    blurbs = {
        "figure1": "undisturbed and smoothed logistic value, gradient identity vs finite differences",
        "figure2": "normalized power-map values and their moduli against the bound",
        "bounds": "tabulate K, H, the discrete bound and the Hoelder bound over d0",
        "modulus": "empirical modulus of a value function against closed form and bound",
        "roughness": "difference-quotient profiles of the undisturbed and smoothed value",
        "verify": "run the property suite; exit 0 iff every property passes",
        "value": "evaluate a value function at given states (CSV to stdout)",
    }
    for name in SUBCOMMANDS:
        sub = subs.add_parser(name, parents=[common], help=blurbs[name], description=blurbs[name])
        for key, p in PARAMS[name].items():
            _add_flag(sub, key, p)
    return parser


def _load_toml(path: str, subcommand: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    table = data.get(subcommand, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{subcommand}] must be a table")
    merged.update(table)
    known = set(PARAMS[subcommand]) | set(GLOBAL_KEYS)
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for {subcommand}: {', '.join(unknown)}")
    return merged


def _validate(name: str, p: Param, v: Any) -> None:
    if v is None:
        return
    if p.choices and v not in p.choices:
        raise ConfigError(f"{name}: {v!r} not one of {', '.join(p.choices)}")
    vals = v if isinstance(v, tuple) else (v,)
    if any(isinstance(x, float) and math.isnan(x) for x in vals):
        raise ConfigError(f"{name}: nan is not allowed")
    if p.check is not None and not p.check(v):
        raise ConfigError(f"{name}={v!r} {p.rule}")


def _cross_validate(sub: str, q: dict) -> None:
    if sub == "bounds":
        if q["d0_min"] >= q["D"]:
            raise ConfigError("d0_min must be < D")
        case = bounds.classify_case(q["L"], q["gamma"])
        if case is bounds.CaseLabel.EQUAL and q["beta"] is None:
            raise ConfigError("L gamma = 1 needs beta in (0, 1)")
    if sub == "modulus":
        D = q["D"] if q["system"] == "clipped_linear" else 1.0
        if q["d0_min"] >= D:
            raise ConfigError("d0_min must be < the diameter of the state space")
    if sub == "value":
        space = (0.0, q["D"]) if q["system"] == "clipped_linear" else (0.0, 1.0)
        if any(not space[0] <= x <= space[1] for x in q["x"]):
            raise ConfigError(f"x values must lie in [{space[0]}, {space[1]}]")


def build_config(argv: Sequence[str] | None = None) -> RunConfig:
    """Parse flags, merge the TOML file and validate.  Raises :class:`ConfigError`."""
    args = make_parser().parse_args(argv)
    sub = args.subcommand
    merged = _load_toml(args.config, sub) if args.config else {}
    flags = vars(args)

    params = {}
    for key, p in PARAMS[sub].items():
        raw = flags.get(key)
        if raw is None:
            raw = merged.get(key, p.default)
        v = None if raw is None else _coerce(key, p, raw)
        _validate(key, p, v)
        params[key] = v
    _cross_validate(sub, params)

    raw_seed = flags["seed"] if flags["seed"] is not None else merged.get("seed", 0)
    try:
        if isinstance(raw_seed, bool) or isinstance(raw_seed, float):
            raise ValueError
        seed = int(raw_seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed: cannot read {raw_seed!r} as an integer") from None
    if not 0 <= seed < U64:
        raise ConfigError("seed must lie in [0, 2**64)")
    out = Path(flags["out"] if flags["out"] is not None else merged.get("out", "out"))
    return RunConfig(sub, params, seed, out)


def _csv_text(header: Sequence[str], columns: Sequence[np.ndarray]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([format_float(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


IDENTITY = value.RewardSpec.linear(1.0)
UNIT = MetricInterval(0.0, 1.0)


def _d0_grid(lo: float, hi: float, n: int) -> np.ndarray:
    d0 = np.logspace(math.log10(lo), math.log10(hi), n)
    d0[-1] = hi
    return d0


def run_figure1(cfg: RunConfig) -> list[Path]:
    q = cfg.params
    lg = systems.Logistic()
    xs = np.linspace(*smoothing.DEFAULT_WINDOW, q["grid_points"])
    w = smoothing.solve_smoothed_value(lg, IDENTITY, q["gamma"], q["sigma"], xs, tol=q["tol"])
    x = np.linspace(0.01, 0.99, q["points"])
    v = value.value_discrete(lg, IDENTITY, q["gamma"], x, q["eps"]).value
    grad = smoothing.gradient_smoothed(w, lg, IDENTITY, x, q["quad_nodes"])
    fd = smoothing.finite_difference(w, x, q["h"])
    text = _csv_text(["x", "v_undisturbed", "w_smoothed", "dw_formula", "dw_finite_diff"], [x, v, w(x), grad, fd])
    return [_write(cfg.out / "figure1.csv", text)]


def run_figure2(cfg: RunConfig) -> list[Path]:
    q = cfg.params
    L, gammas = q["L"], q["gammas"]
    xs = np.linspace(0.0, 1.0, q["grid_points"])
    d0 = _d0_grid(q["d0_min"], 1.0, q["d0_points"])

    def panel(g: float):
        v = value.value_power_closed_series(L, g, xs, eps=q["eps"])
        W = modulus.empirical_modulus(modulus.GridFunction(xs, v, UNIT), d0).values
        bound = bounds.discrete_modulus_bound(ContinuityParams(L, g, 1.0), d0)
        return v, W, bound

    with ThreadPoolExecutor(max_workers=q["workers"]) as pool:
        panels = list(pool.map(panel, gammas))  # map keeps input order

    left = _csv_text(["x"] + [f"v_gamma{i}_norm" for i in range(len(gammas))], [xs] + [p[0] / np.max(p[0]) for p in panels])
    header, cols = ["d0"], [d0]
    for i, (_, W, bound) in enumerate(panels):
        header += [f"W_gamma{i}", f"bound_gamma{i}"]
        cols += [W, bound]
    # same scale as the left panel: divided by max v
    for i, (v, W, bound) in enumerate(panels):
        header += [f"W_gamma{i}_norm", f"bound_gamma{i}_norm"]
        cols += [W / np.max(v), bound / np.max(v)]
    right = _csv_text(header, cols)
    return [_write(cfg.out / "figure2_left.csv", left), _write(cfg.out / "figure2_right.csv", right)]


def run_bounds(cfg: RunConfig) -> list[Path]:
    q = cfg.params
    p = ContinuityParams(q["L"], q["gamma"], q["D"], LinearModulus(q["C"]))
    td = TimeDomain(q["time_domain"])
    d0 = _d0_grid(q["d0_min"], q["D"], q["d0_points"])
    beta = q["beta"] if p.case is bounds.CaseLabel.EQUAL else None
    cols = [
        d0,
        bounds.k_of(p, d0),
        bounds.h_of(p, d0),
        bounds.discrete_modulus_bound(p, d0),
        bounds.holder_bound(p, td, d0, beta),
    ]
    return [_write(cfg.out / "bounds.csv", _csv_text(["d0", "K", "H", "discrete_bound", "holder_bound"], cols))]


def _system(q: dict) -> systems.System:
    return systems.system_from_config(q["system"], q["L"], q["D"], q["sigma"])


def run_modulus(cfg: RunConfig) -> list[Path]:
    q = cfg.params
    system = _system(q)
    sp = system.space
    xs = np.linspace(sp.lo, sp.hi, q["grid_points"])
    d0 = _d0_grid(q["d0_min"], sp.diameter, q["d0_points"])
    g = q["gamma"]
    nan = np.full(d0.shape, np.nan)
    if isinstance(system, systems.ClippedLinear):
        v = value.value_clipped_linear_closed_form(1.0, system.L, g, system.D, xs)
        p = ContinuityParams(system.L, g, system.D)
        closed, bound = bounds.h_of(p, d0), bounds.h_of(p, d0)
    else:
        stream = RngStream(cfg.seed, 0)
        v = value.value_discrete(system, IDENTITY, g, xs, q["eps"], q["samples"], stream).value
        p = ContinuityParams(system.nominal_L, g, 1.0)
        bound = bounds.discrete_modulus_bound(p, d0)
        closed = modulus.modulus_power_example(system.L, g, d0, q["eps"]) if isinstance(system, systems.PowerMap) else nan
    W = modulus.empirical_modulus(modulus.GridFunction(xs, v, sp), d0).values
    text = _csv_text(["d0", "W_empirical", "W_closed_form", "bound"], [d0, W, closed, bound])
    return [_write(cfg.out / "modulus.csv", text)]


def run_roughness(cfg: RunConfig) -> list[Path]:
    q = cfg.params
    lg = systems.Logistic()
    x = np.linspace(0.0, 0.99, q["points"])
    hs = q["hs"]
    rough = modulus.difference_quotient_profile(lambda s: value.value_discrete(lg, IDENTITY, q["gamma"], s, q["eps"]).value, x, hs)
    w = smoothing.solve_smoothed_value(lg, IDENTITY, q["gamma"], q["sigma"], np.linspace(*smoothing.DEFAULT_WINDOW, q["grid_points"]))
    smooth = modulus.difference_quotient_profile(w, x, hs)
    text = _csv_text(["h", "max_quotient", "max_quotient_smoothed"], [rough[:, 0], rough[:, 1], smooth[:, 1]])
    return [_write(cfg.out / "roughness.csv", text)]


def verify_report(results: Sequence[verify.CheckResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["property", "observed", "threshold", "status", "detail"])
    for r in results:
        writer.writerow([r.name, format_float(r.observed), format_float(r.threshold), "pass" if r.passed else "FAIL", r.detail])
    return buf.getvalue()


def run_verify(cfg: RunConfig) -> tuple[list[Path], bool]:
    q = cfg.params
    vc = verify.VerifyConfig(cfg.seed, q["samples"], q["variance_samples"], q["smoothing_grid"], q["modulus_grid"])
    results = verify.run_checks(vc)
    text = verify_report(results)
    sys.stdout.write(text)
    return [_write(cfg.out / "verify.csv", text)], all(r.passed for r in results)


def run_value(cfg: RunConfig) -> str:
    q = cfg.params
    system = _system(q)
    x = np.asarray(q["x"], dtype=float)
    g = q["gamma"]
    if isinstance(system, systems.ClippedLinear):
        v = value.value_clipped_linear_closed_form(1.0, system.L, g, system.D, x)
        cols = [x, v, np.zeros_like(x), np.zeros_like(x), np.zeros_like(x)]
    else:
        est = value.value_discrete(system, IDENTITY, g, x, q["eps"], q["samples"], RngStream(cfg.seed, 0))
        n = np.full(x.shape, float(est.horizon_used))
        cols = [x, est.value, np.full(x.shape, est.truncation_error), np.broadcast_to(est.statistical_error, x.shape), n]
    return _csv_text(["x", "value", "trunc_err", "stat_err", "horizon"], cols)


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the process exit status."""
    if cfg.subcommand == "verify":
        _, ok = run_verify(cfg)
        return 0 if ok else 1
    if cfg.subcommand == "value":
        sys.stdout.write(run_value(cfg))
        return 0
    runner = {
        "figure1": run_figure1,
        "figure2": run_figure2,
        "bounds": run_bounds,
        "modulus": run_modulus,
        "roughness": run_roughness,
    }[cfg.subcommand]
    for path in runner(cfg):
        print(path)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = build_config(argv)
    except ConfigError as exc:
        print(f"valuecont: error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except OSError as exc:
        print(f"valuecont: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

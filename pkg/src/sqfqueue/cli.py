"""Command-line interface: analyze, tail, simulate, sweep, validate.

Tables go to stdout as CSV (header line, 17 significant digits). ``--json``
prints a CommandResult document instead; its ``inputs`` block can be fed
back through ``--config``. Diagnostics go to stderr.

Exit codes: 0 success, 2 invalid parameters or config, 3 analytic failure,
4 simulation precision not reached, 5 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import inversion, metrics, sim, solver, validation
from .exceptions import ParameterError, SimulationError, SQFError
from .model import Regime, validate_general, validate_symmetric

EXIT_OK, EXIT_PARAMS, EXIT_ANALYTIC, EXIT_SIM, EXIT_VALIDATION = 0, 2, 3, 4, 5

# every key a config document may carry; commands pick the ones they use
KNOWN_KEYS = frozenset({
    "lambda", "mu", "tol", "seed",
    "u_max", "points", "invert",
    "rho_min", "rho_max", "steps", "simulate",
    "level",
    "lambda1", "lambda2", "mu1", "mu2", "policy", "service_law", "cycles", "ccdf_grid",
    "laplace_grid", "replications", "target_half_width",
})


class ConfigError(ParameterError):
    pass


@dataclass
class CommandResult:
    command: str
    inputs: dict
    outputs: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    exit_code: int = EXIT_OK
    columns: list | None = None
    rows: list | None = None

    def as_dict(self):
        out = dict(self.outputs)
        if self.columns is not None:
            out["columns"] = list(self.columns)
            out["rows"] = [list(r) for r in self.rows]
        return {"command": self.command, "inputs": _jsonable(self.inputs),
                "outputs": _jsonable(out), "diagnostics": list(self.diagnostics),
                "exit_code": self.exit_code}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fmt(x) -> str:
    """CSV cell: 17 significant digits for reals, empty for None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# config documents
# ---------------------------------------------------------------------------

def _coerce(text: str):
    t = text.strip()
    try:
        return json.loads(t)
    except json.JSONDecodeError:
        low = t.lower()
        if low in ("true", "yes", "on"):
            return True
        if low in ("false", "no", "off"):
            return False
        return t


def parse_config(text: str) -> dict:
    """Parse a JSON object or ``key=value`` lines into a flat dict.

    A CommandResult document is accepted too; its ``inputs`` block is used.
    Keys may use '-' or '_'. Unknown keys raise ConfigError.
    """
    stripped = text.strip()
    data = None
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        if "command" in data and "inputs" in data:
            data = data["inputs"]
    else:
        data = {}
        for n, line in enumerate(stripped.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {n} is not key=value: {line!r}")
            k, v = line.split("=", 1)
            data[k.strip()] = _coerce(v)
    out = {}
    for k, v in data.items():
        key = str(k).replace("-", "_")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        out[key] = v
    return out


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None


def _merge(args, keys) -> dict:
    """Config values overridden by explicitly given flags."""
    merged = dict(args.config_data)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged


def _num(d, key, default=None, kind=float):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing value for {key!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"{key!r} must be a number, got {v!r}")
    try:
        x = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must be a number, got {v!r}") from None
    if kind is int and float(v) != x:
        raise ConfigError(f"{key!r} must be an integer, got {v!r}")
    return x


def _grid(v):
    if v is None:
        return None
    if isinstance(v, str):
        v = [x for x in v.replace(";", ",").split(",") if x.strip()]
    if not isinstance(v, (list, tuple)):
        v = [v]
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read grid {v!r}") from None


def _flag(v) -> bool:
    if isinstance(v, str):
        v = _coerce(v)
    return bool(v)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _symmetric(d):
    return validate_symmetric(_num(d, "lambda"), _num(d, "mu"))


def cmd_analyze(args) -> CommandResult:
    d = _merge(args, ["lambda", "mu"])
    p = _symmetric(d)
    tol = args.tol
    res = CommandResult("analyze", {"lambda": p.lam, "mu": p.mu, "tol": tol})
    from . import algebra
    eta1 = algebra.ramification_points(p).eta1
    g0 = solver.m_series((p.lam - 2.0 * p.mu) / 4.0, p, tol).value.real
    tail = metrics.sqf_tail_law(p)
    out = {"rho": p.rho, "sigma0": p.sigma0, "zeta_minus": p.zeta_minus,
           "zeta_plus": p.zeta_plus, "eta1": eta1, "regime": p.regime.value,
           "G0": g0, "P_empty": 1.0 - p.rho + g0, "tail_rate": tail.rate,
           "tail_power": tail.power, "tail_prefactor": tail.prefactor}
    if p.regime is Regime.CRITICAL:
        out.update(singularity_location=p.sigma0, singularity_kind=None,
                   singularity_leading_coeff=None)
        res.diagnostics.append("rho = 1/2: pole and branch point merge; no single singularity")
    else:
        rep = metrics.g_singularity(p)
        out.update(singularity_location=rep.location, singularity_kind=rep.kind.value,
                   singularity_leading_coeff=rep.leading_coeff)
    fe = solver.residual_functional_eq(1.0, p, tol)
    norm, _ = validation.normalization_check(p)
    out["residual_functional_eq"] = fe
    out["residual_normalization"] = norm
    if not (fe < 1e-9 and norm < 1e-8):
        res.exit_code = EXIT_ANALYTIC
        res.diagnostics.append(f"internal residual check failed: functional eq {fe:.3g}, "
                               f"normalization {norm:.3g}")
    res.outputs = out
    return res


def cmd_tail(args) -> CommandResult:
    d = _merge(args, ["lambda", "mu", "u_max", "points", "invert"])
    p = _symmetric(d)
    u_max = _num(d, "u_max", 30.0)
    points = _num(d, "points", 60, int)
    invert = _flag(d.get("invert", False))
    if not (u_max > 0 and points >= 1):
        raise ConfigError("need u_max > 0 and points >= 1")
    u = u_max * np.arange(1, points + 1) / points
    law = metrics.sqf_tail_law(p)
    res = CommandResult("tail", {"lambda": p.lam, "mu": p.mu, "u_max": u_max,
                                 "points": points, "invert": invert})
    res.outputs = law.as_dict()
    asym = law.ccdf(u)
    if not invert:
        res.columns = ["u", "asymptotic_ccdf"]
        res.rows = [[a, b] for a, b in zip(u, asym)]
        return res
    curve = inversion.ccdf_curve(u, params=p)
    res.diagnostics.extend(curve.diagnostics)
    inv = curve.value
    with np.errstate(all="ignore"):
        gap = np.where(curve.valid, (asym - inv) / inv, np.nan)
    res.columns = ["u", "asymptotic_ccdf", "inverted_ccdf", "rel_gap"]
    res.rows = [[a, b, c if ok else "invalid", g if ok else "invalid"]
                for a, b, c, g, ok in zip(u, asym, inv, gap, curve.valid)]
    bad = int((~curve.valid).sum())
    if bad > 0.1 * points:
        res.exit_code = EXIT_ANALYTIC
        res.diagnostics.append(f"{bad} of {points} inverted points are invalid")
    return res


SIM_KEYS = ["lambda1", "lambda2", "mu1", "mu2", "policy", "service_law", "cycles",
            "ccdf_grid", "laplace_grid", "replications", "target_half_width"]


def sim_config_from(d: dict, seed: int) -> sim.SimConfig:
    """Build a SimConfig from flat keys; 'lambda'/'mu' give the symmetric split."""
    if "lambda" in d or "mu" in d:
        lam, mu = _num(d, "lambda"), _num(d, "mu")
        d = {"lambda1": lam / 2.0, "lambda2": lam / 2.0, "mu1": mu, "mu2": mu, **{
            k: v for k, v in d.items() if k not in ("lambda", "mu")}}
    params = validate_general(_num(d, "lambda1"), _num(d, "lambda2"), _num(d, "mu1"),
                              _num(d, "mu2"))
    laws = d.get("service_law", "Exponential")
    if isinstance(laws, str):
        laws = [x.strip() for x in laws.split(";")]
    if len(laws) == 1:
        laws = laws * 2
    kw = {"params": params, "policy": d.get("policy", "SQF"), "service_law": tuple(laws),
          "cycles": _num(d, "cycles", 100_000, int), "seed": seed,
          "replications": _num(d, "replications", 1, int)}
    if d.get("ccdf_grid") is not None:
        kw["ccdf_grid"] = _grid(d["ccdf_grid"])
    if d.get("laplace_grid") is not None:
        kw["laplace_grid"] = _grid(d["laplace_grid"])
    if d.get("target_half_width") is not None:
        kw["target_half_width"] = _num(d, "target_half_width")
    try:
        return sim.SimConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def sim_inputs(cfg: sim.SimConfig) -> dict:
    p = cfg.params
    return {"lambda1": p.lambda1, "lambda2": p.lambda2, "mu1": p.mu1, "mu2": p.mu2,
            "policy": cfg.policy.value, "service_law": ";".join(str(x) for x in cfg.service_law),
            "cycles": cfg.cycles, "seed": cfg.seed, "ccdf_grid": list(cfg.ccdf_grid),
            "laplace_grid": list(cfg.laplace_grid), "replications": cfg.replications,
            "target_half_width": cfg.target_half_width}


def _seed(args, d):
    if args.seed is not None:
        return args.seed
    return _num(d, "seed", 0, int)


def cmd_simulate(args) -> CommandResult:
    d = _merge(args, ["lambda", "mu"] + SIM_KEYS)
    cfg = sim_config_from(d, _seed(args, d))
    out = sim.simulate(cfg)
    res = CommandResult("simulate", sim_inputs(cfg))
    rows = []
    for name in sim.SimOutput.SCALARS:
        e = getattr(out, name)
        rows.append([name, None, e.point, e.half_width_99, e.cycles])
    for name, seq, grid in (("ccdf_1", out.ccdf_1, out.ccdf_grid),
                            ("ccdf_total", out.ccdf_total, out.ccdf_grid),
                            ("laplace_1", out.laplace_1, out.laplace_grid)):
        for u, e in zip(grid, seq):
            rows.append([name, u, e.point, e.half_width_99, e.cycles])
    res.columns = ["metric", "u", "point", "half_width_99", "cycles"]
    res.rows = rows
    res.outputs = {"arrivals": out.arrivals, "ties": out.ties, "converged": out.converged,
                   "achieved_half_width": out.achieved_half_width}
    if not out.converged:
        res.exit_code = EXIT_SIM
        res.diagnostics.append(f"requested half-width {cfg.target_half_width!r} not reached; "
                               f"achieved {out.achieved_half_width:.3g} after {out.cycles} cycles")
    return res


def cmd_sweep(args) -> CommandResult:
    d = _merge(args, ["mu", "rho_min", "rho_max", "steps", "simulate", "cycles"])
    mu = _num(d, "mu")
    lo = _num(d, "rho_min")
    hi = _num(d, "rho_max")
    steps = _num(d, "steps", 20, int)
    do_sim = _flag(d.get("simulate", False))
    cycles = _num(d, "cycles", 20_000, int)
    if not (0.0 < lo <= hi < 1.0) or steps < 1 or not mu > 0:
        raise ConfigError("need 0 < rho_min <= rho_max < 1, steps >= 1 and mu > 0")
    seed = _seed(args, d)
    rhos = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
    inputs = {"mu": mu, "rho_min": lo, "rho_max": hi, "steps": steps, "simulate": do_sim}
    if do_sim:
        inputs.update(cycles=cycles, seed=seed)
    res = CommandResult("sweep", inputs)
    cols = ["rho", "P_empty_analytic", "P_empty_mm1", "P_empty_hol"]
    if do_sim:
        cols += ["P_empty_sim", "P_empty_sim_hw"]
    cols.append("status")
    rows = []
    failed = 0
    for rho in rhos:
        status = "ok"
        try:
            p = validate_symmetric(rho * mu, mu)
            analytic = metrics.empty_queue_probability(p)[1]
        except SQFError as exc:
            analytic, status = float("nan"), f"error: {exc}"
            failed += 1
        row = [rho, analytic, 1.0 - rho, 1.0 - rho / 2.0]
        if do_sim:
            out = sim.simulate(sim.symmetric_config(rho * mu, mu, cycles=cycles, seed=seed,
                                                    ccdf_grid=()))
            row += [out.p_empty_1.point, out.p_empty_1.half_width_99]
        row.append(status)
        rows.append(row)
    res.columns, res.rows = cols, rows
    if failed:
        res.diagnostics.append(f"{failed} row(s) failed")
        res.exit_code = EXIT_ANALYTIC
    return res


def cmd_validate(args) -> CommandResult:
    d = _merge(args, ["lambda", "mu", "level"])
    d.setdefault("lambda", 1.2)
    d.setdefault("mu", 2.0)
    level = d.get("level", "quick")
    if level not in ("quick", "full"):
        raise ConfigError("level must be 'quick' or 'full'")
    p = _symmetric(d)
    seed = _seed(args, d)
    checks = validation.run_battery(p, level, seed=seed, tol=args.tol)
    res = CommandResult("validate", {"lambda": p.lam, "mu": p.mu, "level": level, "seed": seed})
    res.columns = ["check", "value", "threshold", "passed", "seconds", "detail"]
    res.rows = [[c.name, c.value, c.threshold, c.passed, c.seconds, c.detail] for c in checks]
    failed = [c.name for c in checks if not c.passed]
    res.outputs = {"passed": not failed, "failed": failed}
    if failed:
        res.exit_code = EXIT_VALIDATION
        res.diagnostics.append("failed: " + ", ".join(failed))
    return res


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_options(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--json", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="print a JSON CommandResult instead of CSV")
    parser.add_argument("--seed", type=int, default=default, help="master random seed")
    parser.add_argument("--tol", type=float, default=default,
                        help="relative term tolerance of the M series")
    parser.add_argument("--config", default=default,
                        help="file with key=value lines or a JSON object")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqfqueue", description=__doc__.splitlines()[0])
    _global_options(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global_options(sp, suppress=True)
        return sp

    sp = add("analyze", "constants, G(0), P(U1 = 0), tail law and dominant singularity")
    sp.add_argument("--lambda", dest="lambda", type=float)
    sp.add_argument("--mu", type=float)

    sp = add("tail", "tail asymptote, optionally against the inverted CCDF")
    sp.add_argument("--lambda", dest="lambda", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--u-max", dest="u_max", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--invert", action="store_true", default=None)

    sp = add("simulate", "regenerative simulation")
    sp.add_argument("--lambda", dest="lambda", type=float, help="total rate, split evenly")
    sp.add_argument("--mu", type=float, help="service rate of both queues")
    for k in ("lambda1", "lambda2", "mu1", "mu2"):
        sp.add_argument(f"--{k}", type=float)
    sp.add_argument("--policy", choices=[p.value for p in sim.Policy])
    sp.add_argument("--service-law", dest="service_law",
                    help="'Exponential', 'Deterministic', 'HyperExp2(p,m1,m2)'; "
                         "'A;B' sets the two queues separately")
    sp.add_argument("--cycles", type=int)
    sp.add_argument("--ccdf-grid", dest="ccdf_grid", help="comma-separated u values")
    sp.add_argument("--laplace-grid", dest="laplace_grid", help="comma-separated s values")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--target-half-width", dest="target_half_width", type=float)

    sp = add("sweep", "P(U1 = 0) over a range of loads")
    sp.add_argument("--mu", type=float)
    sp.add_argument("--rho-min", dest="rho_min", type=float)
    sp.add_argument("--rho-max", dest="rho_max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--simulate", action="store_true", default=None)
    sp.add_argument("--cycles", type=int, help="cycles per simulated row")

    sp = add("validate", "invariant battery")
    sp.add_argument("--level", choices=["quick", "full"])
    sp.add_argument("--lambda", dest="lambda", type=float)
    sp.add_argument("--mu", type=float)
    return ap


COMMANDS = {"analyze": cmd_analyze, "tail": cmd_tail, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "validate": cmd_validate}


def run(argv=None) -> tuple[CommandResult | None, int, str, str]:
    """Run a command and return (result, exit_code, stdout_text, stderr_text)."""
    args = build_parser().parse_args(argv)
    if args.tol is None:
        args.tol = solver.DEFAULT_TOL
    err = []
    try:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive")
        args.config_data = _load_config(args.config)
        result = COMMANDS[args.command](args)
    except (ParameterError, SimulationError) as exc:
        return None, EXIT_PARAMS, "", f"error: {exc}\n"
    except SQFError as exc:
        return None, EXIT_ANALYTIC, "", f"error: {type(exc).__name__}: {exc}\n"
    if args.json:
        text = json.dumps(result.as_dict(), indent=2) + "\n"
    elif result.columns is not None:
        text = to_csv(result.columns, result.rows)
    else:
        text = to_csv(["quantity", "value"], list(result.outputs.items()))
    err.extend(f"{d}\n" for d in result.diagnostics)
    return result, result.exit_code, text, "".join(err)


def main(argv=None) -> int:
    _, code, out, err = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    raise SystemExit(main())

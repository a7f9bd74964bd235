"""Command-line interface: ``artifact {estimate,calibrate,risk,complexity}``.

Parameters come from a JSON config file (``--config``); anything missing
takes the defaults listed in ``--help``.  Every output carries the tool
version, the fully resolved config and the seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import __version__
from . import io as aio
from .calibration import CriticalValues, calibrate_mc, theoretical_cv
from .complexity import asymptotic_result, catalog, convergence_table, exact_count
from .complexity.exact import DEFAULT_CAP
from .design import DesignGrid, build_ladder
from .errors import ArtifactError, BudgetExceeded, ParseError, ValidationError
from .lepski import select
from .local_model import LocalModel, NoiseModel, PolynomialBasis, derivative_estimates
from .risk_lab import SimulationScenario, get_scenario, invariant_checks, oracle_report

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_PARSE = 0, 2, 3, 4

DEFAULTS = {
    "estimate": {
        "kernel": "rectangular", "p": 1, "h1": 0.1, "u": 1.5, "K": 4,
        "noise": "homoscedastic:1",
        "cv": {"method": "theoretical", "r": 1.0, "alpha": 1.0, "mu": 0.1,
               "replicates": 20000, "file": None},
        "points": [0.5],
    },
    "calibrate": {
        "method": "theoretical", "p": 1, "r": 1.0, "alpha": 1.0, "u": 1.5, "K": 5, "mu": 0.1,
        "n": 200, "x": 0.5, "kernel": "rectangular", "h1": 0.02, "sigma": 1.0,
        "replicates": 20000, "seed": 0,
    },
    "risk": {"scenario": "parametric-linear", "invariant_replicates": 0},
    "complexity": {
        "action": "exact", "field": "brownian-bridge", "rho": 0.5, "mu": 1.0,
        "epsilon": 0.5, "d": 1, "d_values": [1, 2, 3, 4, 5, 6], "cap": DEFAULT_CAP, "m": None,
    },
}

COMPLEXITY_COLUMNS = ["d", "n_exact", "n_asymptotic", "ratio", "theta", "zeta",
                      "count_at_zeta", "lower", "upper", "status"]


def _merge(defaults: dict, given: dict) -> dict:
    out = dict(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(command: str, given: dict, seed: int | None = None) -> dict:
    """Defaults overlaid with the config file; ``seed`` (if given) wins."""
    if command == "risk":
        base = {**DEFAULTS["risk"]}
        name = given.get("scenario", base["scenario"])
        scen = get_scenario(name)
        base.update({f.name: getattr(scen, f.name) for f in fields(SimulationScenario)
                     if f.name not in ("name", "extra")})
        unknown = set(given) - set(base)
        if unknown:
            raise ValidationError(f"unknown risk parameters: {sorted(unknown)}")
        cfg = _merge(base, given)
    else:
        cfg = _merge(DEFAULTS[command], given)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    return cfg


def _noise(spec, n: int) -> NoiseModel:
    if isinstance(spec, (int, float)):
        return NoiseModel.homoscedastic(n, float(spec))
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        if kind != "homoscedastic":
            raise ValidationError(f"noise: unknown model {spec!r}")
        try:
            sigma = float(arg) if arg else 1.0
        except ValueError:
            raise ValidationError(f"noise: cannot read sigma from {spec!r}") from None
        if not sigma > 0:
            raise ValidationError("noise: sigma must be positive")
        return NoiseModel.homoscedastic(n, sigma)
    if isinstance(spec, dict):
        s2 = np.asarray(spec.get("sigma2"), dtype=float)
        if s2.ndim == 0:
            s2 = np.full(n, float(s2))
        if s2.size != n:
            raise ValidationError(f"noise: sigma2 has {s2.size} entries, data has {n}")
        return NoiseModel(s2, s2, 0.0)
    raise ValidationError(f"noise: unsupported specification {spec!r}")


def _critical_values(cv: dict, model: LocalModel, seed: int) -> CriticalValues:
    if cv.get("file"):
        doc = aio.read_config(cv["file"])
        doc = doc.get("result", doc)
        out = CriticalValues.from_dict(doc)
        if out.K != model.K or out.p != model.p:
            raise ValidationError(f"cv file is for K={out.K}, p={out.p}; model has "
                                  f"K={model.K}, p={model.p}")
        return out
    method = cv.get("method", "theoretical")
    if method == "theoretical":
        return theoretical_cv(model.p, float(cv["r"]), float(cv["alpha"]), model.ladder.u,
                              model.K, float(cv["mu"]))
    if method == "monte-carlo":
        return calibrate_mc(model, float(cv["r"]), float(cv["alpha"]), int(cv["replicates"]), seed)
    raise ValidationError(f"cv.method: unknown method {method!r}")


def cmd_estimate(cfg: dict, data_path) -> list[dict]:
    if data_path is None:
        raise ValidationError("estimate needs --data")
    x, y = aio.read_xy(data_path)
    grid = DesignGrid(x)
    p = int(cfg["p"])
    noise = _noise(cfg["noise"], grid.n)
    records = []
    for x0 in cfg["points"]:
        ladder = build_ladder(grid, float(x0), cfg["kernel"], float(cfg["h1"]), float(cfg["u"]),
                              int(cfg["K"]), p)
        model = LocalModel(ladder, PolynomialBasis(p), noise)
        cv = _critical_values(cfg["cv"], model, int(cfg["seed"]))
        res = select(model.all_estimates(y), cv)
        est = res.estimates[res.k_hat - 1]
        records.append({
            "x": float(x0), "k_hat": res.k_hat,
            "h_hat": float(ladder.bandwidths.bandwidths[res.k_hat - 1]),
            "theta_hat": est.theta, "f_hat": float(est.theta[0]),
            "derivatives": derivative_estimates(est), "thresholds": cv.thresholds,
            "T_triangle": res.statistics,
        })
    return records


def cmd_calibrate(cfg: dict) -> dict:
    method = cfg["method"]
    p, r, alpha, u, K = int(cfg["p"]), float(cfg["r"]), float(cfg["alpha"]), float(cfg["u"]), int(cfg["K"])
    if method == "theoretical":
        cv = theoretical_cv(p, r, alpha, u, K, float(cfg["mu"]))
    elif method == "monte-carlo":
        aio.require(0 < alpha <= 1, f"alpha must lie in (0, 1], got {alpha}")
        aio.require(int(cfg["replicates"]) >= 1, "replicates must be >= 1")
        n = int(cfg["n"])
        grid = DesignGrid.equidistant(n)
        ladder = build_ladder(grid, float(cfg["x"]), cfg["kernel"], float(cfg["h1"]), u, K, p)
        model = LocalModel(ladder, PolynomialBasis(p),
                           NoiseModel.homoscedastic(n, float(cfg["sigma"])))
        cv = calibrate_mc(model, r, alpha, int(cfg["replicates"]), int(cfg["seed"]))
    else:
        raise ValidationError(f"method: unknown method {method!r}")
    return cv.to_dict()


def cmd_risk(cfg: dict) -> dict:
    over = {k: v for k, v in cfg.items()
            if k not in ("scenario", "invariant_replicates", "threads")}
    scen = replace(get_scenario(cfg["scenario"]), **over)
    model = scen.model()
    cv = scen.critical_values(model)
    rep = oracle_report(scen, cv, model=model)
    checks = invariant_checks(model, cv, int(cfg["invariant_replicates"]), int(cfg["seed"]) + 1)
    return {
        "scenario": scen.name,
        "oracle": rep.to_dict(),
        "critical_values": cv.to_dict(),
        "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks],
        "all_checks_passed": all(ok for _, ok, _ in checks),
    }


def cmd_complexity(cfg: dict) -> tuple[list[dict], BudgetExceeded | None]:
    """ComplexityResult rows; a budget overrun comes back with the partial rows."""
    params = {}
    if cfg["field"] == "geometric":
        params["rho"] = cfg["rho"]
    elif cfg["field"] == "pycke":
        params["mu"] = cfg["mu"]
    seq = catalog(cfg["field"], cfg["m"], **params)
    eps = float(cfg["epsilon"])
    aio.require(0 < eps < 1, f"epsilon must lie in (0, 1), got {eps}")
    action = cfg["action"]
    cap = int(cfg["cap"])
    aio.require(cap >= 1, "cap must be >= 1")
    if action in ("exact", "asymptotic"):
        d = cfg["d"]
        aio.require(isinstance(d, int) and d >= 1, f"d must be a positive integer, got {d!r}")
        if action == "exact":
            res = exact_count(seq, eps, d, cap)
        else:
            res = asymptotic_result(seq, eps, d)
        return [res.to_dict()], None
    if action == "table":
        ds = list(cfg["d_values"])
        aio.require(bool(ds) and all(isinstance(d, int) and d >= 1 for d in ds),
                    "d_values must be positive integers")
        rows = convergence_table(seq, eps, ds, cap)
        err = None
        part = [r for r in rows if r.status == "partial"]
        if part:
            err = BudgetExceeded(f"budget exceeded for d in {[r.d for r in part]}",
                                 part[0].lower, part[0].upper)
        return [r.to_dict() for r in rows], err
    raise ValidationError(f"action: unknown action {action!r}; choose exact, asymptotic or table")


def document(command: str, cfg: dict, result) -> dict:
    return {"tool": "artifact", "version": __version__, "command": command,
            "seed": cfg.get("seed"), "config": cfg, "result": result}


def _table_rows(command: str, result):
    if command == "complexity":
        return result, COMPLEXITY_COLUMNS
    if command == "estimate":
        return result, ["x", "k_hat", "h_hat", "f_hat", "derivatives"]
    if command == "calibrate":
        return [{"k": k + 1, "z": z} for k, z in enumerate(result["thresholds"])], ["k", "z"]
    rep = result["oracle"]
    rows = [{"k": k + 1, "Delta": dk, "k_hat_count": c}
            for k, (dk, c) in enumerate(zip(rep["Delta"], rep["k_hat_counts"]))]
    return rows, ["k", "Delta", "k_hat_count"]


def render(command: str, cfg: dict, result, fmt: str) -> str:
    if fmt == "records":
        return aio.dumps(document(command, cfg, result))
    rows, cols = _table_rows(command, result)
    head = (f"# artifact {__version__} {command}\n# seed: {cfg.get('seed')}\n"
            f"# config: {json.dumps(aio.to_jsonable(cfg), sort_keys=True)}\n")
    return head + aio.table(rows, cols)


def build_parser() -> argparse.ArgumentParser:
    def fmt_defaults(cmd):
        return "defaults: " + json.dumps(DEFAULTS[cmd], sort_keys=True)

    parser = argparse.ArgumentParser(
        prog="artifact", description=__doc__.splitlines()[0],
        epilog="exit codes: 0 success, 2 validation error, 3 budget exceeded, 4 parse error")
    parser.add_argument("--version", action="version", version=f"artifact {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON object of parameters")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, metavar="N", help="overrides the config seed")
    common.add_argument("--threads", type=int, metavar="N", default=None,
                        help="accepted for compatibility; computations run serially")
    common.add_argument("--format", choices=("table", "records"), default="records")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", parents=[common], help="adaptive local polynomial fit",
                       epilog=fmt_defaults("estimate"))
    p.add_argument("--data", metavar="PATH", help="comma-delimited file with header x,y")
    sub.add_parser("calibrate", parents=[common], help="critical values",
                   epilog=fmt_defaults("calibrate"))
    sub.add_parser("risk", parents=[common], help="simulation scenario report",
                   epilog=fmt_defaults("risk") + "; scenario fields may be overridden")
    sub.add_parser("complexity", parents=[common], help="information complexity n(eps, d)",
                   epilog=fmt_defaults("complexity"))
    return parser


def run(argv=None) -> tuple[int, str, str]:
    """Execute one command; returns ``(exit code, stdout text, stderr text)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    cmd = args.command
    try:
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        cfg = resolve_config(cmd, aio.read_config(args.config), args.seed)
        cfg["threads"] = args.threads or os.cpu_count() or 1
        err = None
        if cmd == "estimate":
            result = cmd_estimate(cfg, args.data)
        elif cmd == "calibrate":
            result = cmd_calibrate(cfg)
        elif cmd == "risk":
            result = cmd_risk(cfg)
        else:
            result, err = cmd_complexity(cfg)
        text = render(cmd, cfg, result, args.format)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
            text = ""
        if err is not None:
            return EXIT_BUDGET, text, f"error: {err} (bounds {err.lower}..{err.upper})\n"
        return EXIT_OK, text, ""
    except ParseError as exc:
        return EXIT_PARSE, "", f"parse error: {exc}\n"
    except BudgetExceeded as exc:
        return EXIT_BUDGET, "", f"error: {exc} (n in [{exc.lower}, {exc.upper}])\n"
    except (ArtifactError, ValueError, KeyError, TypeError) as exc:
        return EXIT_VALIDATION, "", f"error: {exc}\n"


def main(argv=None) -> int:
    code, out, err = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())

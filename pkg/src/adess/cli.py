"""Batch command-line front door.

Subcommands map one-to-one onto the library: `simulate` and `sweep` read a
JSON config whose keys mirror the ScenarioConfig / AttackParams field names;
the scalar commands (`min-xi`, `safe-v`, `profit`, ...) take everything as
flags.  Outputs land in `--out` (default ./out).  Identical flags and seed
produce byte-identical files.  Exit status: 0 success, 1 domain error,
2 usage error.  Diagnostic verbosity on stderr is controlled by the ADESS_LOG
environment variable (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import economics
from .economics import AttackParams
from .errors import AdessError, ConfigError, DomainError, SolverFailure
from .forkchoice import AdessParams
from .mining import (CertaintyEquivalent, DifficultyRule, Stochastic,
                     required_hashrate_series)
from .netsim import (ScenarioConfig, disconnected_node_probe,
                     latency_split_check, run_scenario)

log = logging.getLogger("adess")

SWEEP_HEADER = "param_point, revenue, cost, profit, xi_star, v_max"


def _setup_logging():
    level = os.environ.get("ADESS_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"ADESS_LOG must be one of {sorted(levels)}")
    logging.basicConfig(stream=sys.stderr, level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def _build(cls, data: dict, what: str):
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"bad {what} config: {e}") from None


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from parsed JSON; keys mirror field names."""
    data = dict(data)
    kwargs = {}
    if "adess" in data:
        kwargs["adess"] = _build(AdessParams, data.pop("adess"), "adess")
    if "attack" in data:
        kwargs["attack"] = _build(AttackParams, data.pop("attack"), "attack")
    if "mining" in data:
        m = dict(data.pop("mining"))
        mode = m.pop("mode", "ce")
        if mode == "ce":
            kwargs["mining"] = CertaintyEquivalent()
        elif mode == "stochastic":
            kwargs["mining"] = _build(Stochastic, m, "mining")
        else:
            raise ConfigError(f"unknown mining mode {mode!r}")
    if "difficulty" in data:
        kwargs["difficulty"] = _build(DifficultyRule, data.pop("difficulty"),
                                      "difficulty")
    if "delays" in data:
        raw = data.pop("delays")
        kwargs["delays"] = {(s, n): float(d) for s, n, d in raw}
    if "honest_hashrates" in data:
        kwargs["honest_hashrates"] = {
            k: float(v) for k, v in data.pop("honest_hashrates").items()}
    if "eclipse_set" in data:
        kwargs["eclipse_set"] = tuple(data.pop("eclipse_set"))
    if "eclipse_from_honest" in data:
        kwargs["eclipse_from_honest"] = tuple(data.pop("eclipse_from_honest"))
    known = {"protocol", "n_honest_nodes", "delay", "attacker_strategy",
             "growth", "attack_start_height", "horizon", "seed"}
    for key in list(data):
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = data.pop(key)
    cfg = _build(ScenarioConfig, kwargs, "scenario")
    cfg.validate()
    return cfg


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None


def _attack_params(args) -> AttackParams:
    kwargs = dict(v=args.v, p_B=args.pb, c=args.c, delta=args.delta,
                  alpha=args.alpha, sigma=args.sigma, B=args.b)
    if getattr(args, "xi", None) is not None:
        kwargs["xi"] = args.xi
    if getattr(args, "eps_extra", None) is not None:
        kwargs["epsilon_extra"] = args.eps_extra
    return AttackParams(**kwargs)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    data = _load_json(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = scenario_from_dict(data)
    log.info("running scenario: protocol=%s strategy=%s seed=%d",
             cfg.protocol, cfg.attacker_strategy, cfg.seed)
    report = run_scenario(cfg)
    out = _out_dir(args)
    _write(out / "report.txt", report.to_text())
    _write(out / "series.csv", report.series_csv())
    print(f"attack_succeeded = {report.attack_succeeded}")
    print(f"realized_cost = {report.realized_cost!r}")
    print(f"realized_revenue = {report.realized_revenue!r}")
    return 0


def cmd_min_xi(args) -> int:
    params = _attack_params(args)
    xi_star = economics.min_deterring_xi(args.v, params)
    profit = economics.adess_attack_profit(
        replace(params, v=args.v, xi=xi_star)).profit
    print(f"xi_star = {xi_star!r}")
    print(f"profit_at_xi_star = {profit!r}")
    return 0


def cmd_safe_v(args) -> int:
    params = _attack_params(args)
    v_max = economics.safe_value_interval(args.xi, params)
    print(f"v_max = {v_max!r}")
    return 0


def cmd_profit(args) -> int:
    params = _attack_params(args)
    br = economics.attack_plan_profit(params, tau=args.tau,
                                      N=args.n, B=args.b)
    print(f"revenue = {br.discounted_revenue!r}")
    print(f"cost = {br.discounted_cost!r}")
    print(f"profit = {br.profit!r}")
    return 0


def cmd_compare_protocols(args) -> int:
    params = _attack_params(args)
    lines = ["t,adess_cost,nakamoto_cost"]
    a_series, a_pv = economics.malicious_cost_series("adess", params,
                                                     args.horizon)
    n_series, n_pv = economics.malicious_cost_series("nakamoto", params,
                                                     args.horizon)
    for t, (a, n) in enumerate(zip(a_series, n_series), start=1):
        lines.append(f"{t},{a!r},{n!r}")
    out = _out_dir(args)
    _write(out / "malicious_cost.csv", "\n".join(lines) + "\n")
    print(f"adess_pv = {a_pv!r}")
    print(f"nakamoto_pv = {n_pv!r}")
    return 0


def _parse_krange(spec: str) -> List[int]:
    try:
        lo, hi = spec.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"bad k range {spec!r}, expected LO..HI") from None
    if hi < lo:
        raise ConfigError("empty k range")
    return list(range(lo, hi + 1))


def cmd_security_bound(args) -> int:
    ks = _parse_krange(args.k)
    lines = ["k,bound"]
    for k in ks:
        b = economics.guo_ren_bound(k, args.rho, args.lambda_rate,
                                    args.delta_prop, variant=args.variant)
        lines.append(f"{k},{b!r}")
    out = _out_dir(args)
    _write(out / "security_bound.csv", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


# -- sweeps -----------------------------------------------------------------

def _grid_points(grid: dict) -> List[float]:
    if "values" in grid:
        pts = [float(x) for x in grid["values"]]
    else:
        try:
            start, stop, step = (float(grid["start"]), float(grid["stop"]),
                                 float(grid["step"]))
        except KeyError as e:
            raise ConfigError(f"grid is missing {e}") from None
        if step <= 0:
            raise ConfigError("grid step must be > 0")
        pts = []
        x = start
        while x <= stop + 1e-12:
            pts.append(round(x, 12))
            x += step
    if not pts:
        raise ConfigError("empty grid")
    return pts


def _sweep_profit(params: AttackParams, grid: dict) -> List[str]:
    param = grid.get("param", "xi")
    if param not in ("xi", "v"):
        raise ConfigError(f"sweep parameter must be xi or v, got {param!r}")
    rows = [SWEEP_HEADER]
    for x in _grid_points(grid):
        pt = replace(params, **{param: x})
        br = economics.adess_attack_profit(pt)
        try:
            xi_star = economics.min_deterring_xi(pt.v, pt)
        except SolverFailure:
            xi_star = float("nan")
        v_max = economics.safe_value_interval(pt.xi, pt) if pt.xi > 0 \
            else float("nan")
        rows.append(f"{x!r}, {br.discounted_revenue!r}, "
                    f"{br.discounted_cost!r}, {br.profit!r}, "
                    f"{xi_star!r}, {v_max!r}")
    return rows


def _sweep_hashrate(params: AttackParams, grid: dict) -> List[str]:
    n_max = int(grid.get("n_max", 10))
    rule = DifficultyRule.full()
    series = required_hashrate_series(params.xi, n_max, rule)
    rows = ["n,hashrate"]
    for n, h in enumerate(series, start=1):
        rows.append(f"{n},{h!r}")
    return rows


def _sweep_malicious(params: AttackParams, grid: dict) -> List[str]:
    horizon = int(grid.get("horizon", 4 * params.horizon_blocks))
    rows = ["t,adess_cost,nakamoto_cost"]
    a, _ = economics.malicious_cost_series("adess", params, horizon)
    n, _ = economics.malicious_cost_series("nakamoto", params, horizon)
    for t, (ac, nc) in enumerate(zip(a, n), start=1):
        rows.append(f"{t},{ac!r},{nc!r}")
    return rows


def cmd_sweep(args) -> int:
    data = _load_json(args.config)
    kind = data.get("kind", "profit")
    params = _build(AttackParams, data.get("attack", {}), "attack")
    grid = data.get("grid", {})
    if kind == "profit":
        rows = _sweep_profit(params, grid)
    elif kind == "hashrate":
        rows = _sweep_hashrate(params, grid)
    elif kind == "malicious-cost":
        rows = _sweep_malicious(params, grid)
    else:
        raise ConfigError(f"unknown sweep kind {kind!r}")
    out = _out_dir(args)
    _write(out / "sweep.csv", "\n".join(rows) + "\n")
    meta = {"kind": kind, "grid": grid, "attack": asdict(params),
            "seed": args.seed if args.seed is not None else 0,
            "rows": len(rows) - 1}
    _write(out / "sweep.meta.json",
           json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"rows = {len(rows) - 1}")
    return 0


# -- property suites --------------------------------------------------------

def _suite_proposition1() -> Tuple[int, int]:
    from fractions import Fraction
    grid = []
    for xi10 in range(1, 21, 2):
        for eps100 in (1, 5):
            for N in (1, 2, 3, 6, 12):
                for adj in ("none", "full"):
                    xi = Fraction(xi10, 10)
                    eps = Fraction(eps100, 100)
                    if xi > eps:
                        grid.append((xi, eps, N, adj))
    results = economics.proposition1_check(grid)
    ok = sum(1 for r in results if r.adess_weakly_greater)
    return ok, len(results)


def _suite_theorem1() -> Tuple[int, int]:
    ok = total = 0
    for v in (0.1, 1.0, 10.0, 100.0):
        for depth in (2, 7):
            total += 1
            params = AttackParams(p_B=1.0, c=1.0, delta=0.999, alpha=depth,
                                  sigma=0)
            try:
                xi_star = economics.min_deterring_xi(v, params)
            except SolverFailure:
                continue
            profit = economics.adess_attack_profit(
                replace(params, v=v, xi=xi_star)).profit
            if profit < 0:
                ok += 1
    return ok, total


def _suite_corollary1() -> Tuple[int, int]:
    ok = total = 0
    for xi in (0.25, 0.5, 1.0, 2.0):
        params = AttackParams(p_B=1.0, c=1.0, delta=1.0, alpha=3, sigma=0,
                              xi=xi)
        v_max = economics.safe_value_interval(xi, params)
        for i in range(100):
            total += 1
            v = v_max * i / 100.0
            if economics.adess_attack_profit(replace(params, v=v)).profit < 0:
                ok += 1
    return ok, total


SUITES = {"proposition1": _suite_proposition1,
          "theorem1": _suite_theorem1,
          "corollary1": _suite_corollary1}


def cmd_check_props(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        if name not in SUITES:
            raise ConfigError(f"unknown suite {name!r}; "
                              f"choose from {sorted(SUITES) + ['all']}")
        ok, total = SUITES[name]()
        status = "pass" if ok == total else "FAIL"
        print(f"{name}: {ok}/{total} {status}")
        failed = failed or ok != total
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", default="./out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="RNG seed override")


def _add_econ_flags(p: argparse.ArgumentParser, with_xi=True):
    p.add_argument("--pb", type=float, default=1.0, help="block reward")
    p.add_argument("--c", type=float, default=1.0, help="unit hashrate cost")
    p.add_argument("--delta", type=float, default=1.0, help="discount factor")
    p.add_argument("--alpha", type=int, default=6, help="confirmation depth")
    p.add_argument("--sigma", type=int, default=0,
                   help="blocks between fork and the transaction")
    p.add_argument("--b", type=int, default=0, help="extra secret blocks")
    p.add_argument("--eps-extra", type=float, default=None,
                   help="classic attacker's surplus hashrate")
    if with_xi:
        p.add_argument("--xi", type=float, default=None,
                       help="penalty parameter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adess",
        description="Fork-choice penalty protocol laboratory: simulations "
                    "and attack economics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario from a JSON config")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("min-xi", help="smallest deterring penalty for v")
    p.add_argument("--v", type=float, required=True)
    _add_econ_flags(p, with_xi=False)
    _add_common(p)
    p.set_defaults(func=cmd_min_xi)

    p = sub.add_parser("safe-v", help="largest safe transaction value")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--v", type=float, default=0.0, help=argparse.SUPPRESS)
    _add_econ_flags(p, with_xi=False)
    _add_common(p)
    p.set_defaults(func=cmd_safe_v)

    p = sub.add_parser("profit", help="attack profit breakdown")
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--tau", type=int, default=0, help="extra pace blocks")
    p.add_argument("--n", type=int, default=None,
                   help="incumbent blocks at the boundary")
    _add_econ_flags(p, with_xi=False)
    _add_common(p)
    p.set_defaults(func=cmd_profit)

    p = sub.add_parser("compare-protocols",
                       help="malicious split cost under both protocols")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--v", type=float, default=0.0)
    p.add_argument("--xi", type=float, default=1.0)
    _add_econ_flags(p, with_xi=False)
    _add_common(p)
    p.set_defaults(func=cmd_compare_protocols)

    p = sub.add_parser("security-bound",
                       help="settlement failure bound over a k range")
    p.add_argument("--k", required=True, help="range LO..HI")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--lambda", dest="lambda_rate", type=float, required=True)
    p.add_argument("--delta-prop", type=float, required=True)
    p.add_argument("--variant", choices=("literal", "abs"), default="abs")
    _add_common(p)
    p.set_defaults(func=cmd_security_bound)

    p = sub.add_parser("sweep", help="grid sweep from a JSON config")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-props", help="run a property suite")
    p.add_argument("--suite", default="all")
    _add_common(p)
    p.set_defaults(func=cmd_check_props)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        if getattr(args, "n", "absent") is None:
            args.n = args.alpha + args.sigma
        return args.func(args)
    except (AdessError, ValueError) as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

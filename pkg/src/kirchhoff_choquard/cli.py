"""Command-line front end: config ingestion, subcommands, structured reports.

Subcommands: constants | gn | fiber | solve | bubbles | sweep.  Scalar results
go to JSON (with the fully resolved configuration embedded for the audit
trail), anything plottable goes to CSV.  Exit codes: 0 success, 1 hard
failure, 2 converged but with failed certificates.

Configuration is a single flat key=value file ('#' starts a comment); every
key can be overridden on the command line with --set key=value.  Reports are
deterministic for a fixed config up to the timestamp field.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bubbles as bub
from .constants import (
    PhysicalParams,
    build_constants,
    delta_lower_bound,
    energy_threshold,
)
from .fiber import FiberFunctionals, fiber_derivative, fiber_energy, find_fiber_critical
from .gn import shoot_ground_state
from .grid import RadialGrid, load_field, save_field
from .riesz import build_kernel
from .solver import (
    ConvergenceError,
    SolverConfig,
    all_certificates_ok,
    certify,
    solve_ground_state,
)

_CONFIG_DEFAULTS: dict[str, object] = {
    "a": 1.0,
    "b": 1.0,
    "rho": 0.5,
    "mu": 50.0,
    "q": 5.0,
    "alpha": 2.0,
    "grid_n": 2048,
    "r_max": 50.0,
    "grid_kind": "graded",
    "half_radius": 2.0,
    "seed_profile": "gaussian",
    "step": 1e-2,
    "tol_grad": 1e-5,
    "tol_poho": 1e-6,
    "max_iter": 5000,
    "armijo_shrink": 0.5,
    "armijo_c": 1e-4,
    "precondition": True,
    "eps_list": "0.2,0.1,0.05,0.025",
    "p_list": "",
    "gn_p": 5.0,
    "sweep_axis": "mu",
    "sweep_values": "",
    "threads": 1,
    "out_dir": ".",
}

_INT_KEYS = {"grid_n", "max_iter", "threads"}
_BOOL_KEYS = {"precondition"}
_STR_KEYS = {"grid_kind", "seed_profile", "eps_list", "p_list", "sweep_axis", "sweep_values", "out_dir"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(_CONFIG_DEFAULTS))

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        if key not in _CONFIG_DEFAULTS:
            raise KeyError(f"unknown config key: {key}")
        if key in _STR_KEYS:
            self.values[key] = raw
        elif key in _INT_KEYS:
            self.values[key] = int(raw)
        elif key in _BOOL_KEYS:
            self.values[key] = raw.strip().lower() in {"1", "true", "yes", "on"}
        else:
            self.values[key] = float(raw)

    def params(self) -> PhysicalParams:
        v = self.values
        return PhysicalParams(a=v["a"], b=v["b"], rho=v["rho"], mu=v["mu"], q=v["q"], alpha=v["alpha"])

    def grid(self) -> RadialGrid:
        v = self.values
        if v["grid_kind"] == "uniform":
            return RadialGrid.uniform(v["grid_n"], v["r_max"])
        return RadialGrid.graded(v["grid_n"], v["r_max"], v["half_radius"])

    def solver_config(self) -> SolverConfig:
        v = self.values
        return SolverConfig(
            step=v["step"],
            tol_grad=v["tol_grad"],
            tol_poho=v["tol_poho"],
            max_iter=v["max_iter"],
            seed_profile=v["seed_profile"],
            armijo_shrink=v["armijo_shrink"],
            armijo_c=v["armijo_c"],
            precondition=v["precondition"],
        )

    def eps_list(self) -> list[float]:
        return [float(x) for x in str(self.values["eps_list"]).split(",") if x.strip()]

    def p_list(self) -> list[float]:
        return [float(x) for x in str(self.values["p_list"]).split(",") if x.strip()]

    def sweep_values(self) -> list[float]:
        return [float(x) for x in str(self.values["sweep_values"]).split(",") if x.strip()]


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value'")
        key, raw = (tok.strip() for tok in line.split("=", 1))
        cfg.set(key, raw)
    return cfg


def _write_json(obj: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _report_scaffold(cfg: RunConfig) -> dict:
    return {"config": dict(cfg.values), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}


def _consts_with_cq(cfg: RunConfig, grid: RadialGrid):
    params = cfg.params()
    prof = shoot_ground_state(params.q, grid)
    return params, build_constants(params, c_q=prof.c_p), prof


# -- subcommands ---------------------------------------------------------------


def _cmd_constants(cfg: RunConfig, out: Path) -> int:
    params, consts, _ = _consts_with_cq(cfg, cfg.grid())
    doc = _report_scaffold(cfg)
    doc.update(
        {
            "a_alpha": consts.a_alpha,
            "c_alpha": consts.c_alpha,
            "s": consts.s,
            "s_alpha": consts.s_alpha,
            "gamma_q": consts.gamma_q,
            "c_q": consts.c_q,
            "delta": delta_lower_bound(params, consts),
            "threshold": energy_threshold(params, consts),
        }
    )
    _write_json(doc, out / "constants.json")
    print(json.dumps({k: doc[k] for k in
                      ("a_alpha", "c_alpha", "s", "s_alpha", "gamma_q", "c_q", "delta", "threshold")},
                     indent=2, sort_keys=True))
    return 0


def _cmd_gn(cfg: RunConfig, out: Path, p: float | None, profile_out: str | None) -> int:
    grid = cfg.grid()
    pval = p if p is not None else float(cfg["gn_p"])
    prof = shoot_ground_state(pval, grid)
    doc = _report_scaffold(cfg)
    doc.update({"p": prof.p, "omega0": prof.shoot_height, "l2_norm": prof.l2_norm, "c_p": prof.c_p})
    _write_json(doc, out / "gn.json")
    print(json.dumps({k: doc[k] for k in ("p", "omega0", "l2_norm", "c_p")}, indent=2, sort_keys=True))
    if profile_out:
        save_field(prof.profile, profile_out)
    return 0


def _cmd_fiber(cfg: RunConfig, out: Path, profile: str) -> int:
    params = cfg.params()
    u = load_field(profile)
    kernel = build_kernel(u.grid, params.alpha)
    f = FiberFunctionals.from_field(u, params, kernel)
    crit = find_fiber_critical(f, params)
    ts = np.geomspace(1e-2, 1e2, 401)
    rows = ["t,E,dE"]
    for t in ts:
        rows.append(f"{t!r},{fiber_energy(f, params, t)!r},{fiber_derivative(f, params, t)!r}")
    (out / "fiber.csv").write_text("\n".join(rows) + "\n")
    doc = _report_scaffold(cfg)
    doc.update({"t_u": crit.t_u, "energy_at_t": crit.e_at_t, "second_derivative": crit.e2_at_t})
    _write_json(doc, out / "fiber.json")
    print(json.dumps({"t_u": crit.t_u, "energy_at_t": crit.e_at_t}, indent=2, sort_keys=True))
    return 0


def _solve_once(cfg: RunConfig, grid, kernel, params, consts):
    config = cfg.solver_config()
    return solve_ground_state(params, config, grid, kernel, consts=consts)


def _cmd_solve(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    params, consts, _ = _consts_with_cq(cfg, grid)
    kernel = build_kernel(grid, params.alpha)
    # cheap empirical regime check; failures warn, they do not abort
    try:
        fam = bub.build_family(cfg.eps_list(), grid, kernel, params)
        if np.any(bub.check_A8(fam, params, consts) <= 0.0):
            warnings.warn("(rho, mu) outside the empirically certified smallness regime",
                          RuntimeWarning)
    except ValueError:
        pass
    doc = _report_scaffold(cfg)
    doc["kernel"] = {"build_seconds": kernel.build_seconds, "bytes": kernel.nbytes}
    try:
        report = _solve_once(cfg, grid, kernel, params, consts)
    except ConvergenceError as err:
        doc.update(err.report.scalar_dict())
        doc["error"] = str(err)
        _write_json(doc, out / "solve_report.json")
        save_field(err.report.u_star, out / "solution.csv")
        print(f"solve failed: {err}", file=sys.stderr)
        return 1
    doc.update(report.scalar_dict())
    doc["certificates"] = report.certificates
    doc["history"] = report.history
    _write_json(doc, out / "solve_report.json")
    save_field(report.u_star, out / "solution.csv")
    ok = all_certificates_ok(report.certificates)
    print(json.dumps({k: doc[k] for k in ("energy", "lambda", "iterations", "converged")},
                     indent=2, sort_keys=True))
    print("certificates:", "all passed" if ok else "FAILED "
          + ",".join(k for k, v in report.certificates.items() if not v["ok"]))
    return 0 if ok else 2


def _cmd_bubbles(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    params, consts, _ = _consts_with_cq(cfg, grid)
    kernel = build_kernel(grid, params.alpha)
    fam = bub.build_family(cfg.eps_list(), grid, kernel, params, p_list=cfg.p_list())
    summary = bub.measure_asymptotics(fam, consts, params.q)
    margins = bub.check_A8(fam, params, consts)
    mu_star = bub.estimate_mu_star(fam, params, consts)
    bound, below, maxima = bub.mountain_pass_upper_bound(fam, params, consts)
    rows = ["eps,grad_sq,mass_sq,choq,lq_pow,t_eps,a8_margin,fiber_max"]
    for i, e in enumerate(fam.epsilons):
        rows.append(
            f"{e!r},{fam.grad_sq[i]!r},{fam.mass[i]!r},{fam.choq[i]!r},"
            f"{fam.lp_pow[params.q][i]!r},{fam.t_eps[i]!r},{margins[i]!r},{maxima[i]!r}"
        )
    (out / "bubbles.csv").write_text("\n".join(rows) + "\n")
    doc = _report_scaffold(cfg)
    doc.update(
        {
            "asymptotics": summary.as_dict(),
            "a8_margins": margins.tolist(),
            "mu_star_estimate": mu_star,
            "mountain_pass_bound": bound,
            "below_threshold": bool(below),
            "threshold": energy_threshold(params, consts),
        }
    )
    _write_json(doc, out / "bubbles.json")
    print(json.dumps({"mu_star_estimate": mu_star, "mountain_pass_bound": bound,
                      "below_threshold": bool(below)}, indent=2, sort_keys=True))
    return 0


def _cmd_sweep(cfg: RunConfig, out: Path, axis: str | None, values: list[float] | None) -> int:
    axis = axis or str(cfg["sweep_axis"])
    vals = values if values else cfg.sweep_values()
    if axis not in {"rho", "mu"}:
        raise ValueError("sweep axis must be rho or mu")
    if not vals:
        raise ValueError("no sweep values given")
    grid = cfg.grid()
    base_params, consts, _ = _consts_with_cq(cfg, grid)
    kernel = build_kernel(grid, base_params.alpha)

    def run_one(x: float):
        params = base_params.with_(**{axis: x})
        try:
            rep = solve_ground_state(params, cfg.solver_config(), grid, kernel, consts=consts)
            certs = rep.certificates or {}
            return (x, rep.energy, rep.lambda_, sum(c["ok"] for c in certs.values()),
                    rep.iterations, "converged")
        except ConvergenceError as err:
            return (x, err.report.energy, err.report.lambda_, 0, err.report.iterations, "failed")
        except Exception as exc:  # pragma: no cover - defensive
            return (x, float("nan"), float("nan"), 0, 0, f"error:{exc}")

    threads = int(cfg["threads"])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, vals))
    else:
        results = [run_one(x) for x in vals]

    rows = [f"{axis},energy,lambda,certificates_passed,iterations,status"]
    for r in results:
        rows.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in r))
    (out / "sweep.csv").write_text("\n".join(rows) + "\n")
    print("\n".join(rows))
    if all(r[-1].startswith(("failed", "error")) for r in results):
        return 1
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kirchoq",
        description="Normalized Kirchhoff-Choquard ground states: solver and certificates",
    )
    ap.add_argument("--config", help="flat key=value configuration file")
    ap.add_argument("--out", default=None, help="output directory (default: config out_dir)")
    ap.add_argument("--grid-n", type=int, default=None)
    ap.add_argument("--r-max", type=float, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", help="dump the sharp-constant table")
    gn = sub.add_parser("gn", help="sharp Gagliardo-Nirenberg constant by shooting")
    gn.add_argument("--p", type=float, default=None)
    gn.add_argument("--profile-out", default=None, help="CSV path for the extremal profile")
    fb = sub.add_parser("fiber", help="fiber-map table and maximizer for a stored profile")
    fb.add_argument("--profile", required=True)
    sub.add_parser("solve", help="run the constrained ground-state solver")
    sub.add_parser("bubbles", help="bubble family asymptotics and min-max bound")
    sw = sub.add_parser("sweep", help="solve across a list of rho or mu values")
    sw.add_argument("--axis", choices=["rho", "mu"], default=None)
    sw.add_argument("--values", default=None, help="comma-separated list")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.grid_n is not None:
            cfg.set("grid_n", str(args.grid_n))
        if args.r_max is not None:
            cfg.set("r_max", str(args.r_max))
        if args.threads is not None:
            cfg.set("threads", str(args.threads))
        for item in args.set:
            key, _, raw = item.partition("=")
            cfg.set(key.strip(), raw.strip())
        out = Path(args.out) if args.out else Path(str(cfg["out_dir"]))
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "constants":
            return _cmd_constants(cfg, out)
        if args.command == "gn":
            return _cmd_gn(cfg, out, args.p, args.profile_out)
        if args.command == "fiber":
            return _cmd_fiber(cfg, out, args.profile)
        if args.command == "solve":
            return _cmd_solve(cfg, out)
        if args.command == "bubbles":
            return _cmd_bubbles(cfg, out)
        if args.command == "sweep":
            vals = [float(x) for x in args.values.split(",")] if args.values else None
            return _cmd_sweep(cfg, out, args.axis, vals)
        raise ValueError(f"unknown command {args.command}")
    except ConvergenceError:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: strict INI configs in, CSV traces and JSON reports out.

Subcommands: ``run``, ``compare``, ``sweep-alpha``, ``certify``.
Exit codes: 0 success, 1 configuration error, 2 failed certification.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dqm import AdmmConfig, AdmmSolver
from .netnewton import DgdSolver, NetworkNewtonSolver, NnConfig, ReferenceCache, theorem1_stepsize
from .objective import (
    NotStronglyConvexError,
    PenaltyObjective,
    QuadraticObjective,
    centralized_reference,
    global_constants,
    load_logistic_csv,
    random_quadratics,
    synthetic_logistic,
)
from .simharness import StopCriteria, run
from .spectral import (
    alpha_gap_study,
    certify_splitting,
    check_lemma3_theorem2,
    gradient_noise_floor,
    check_theorem1,
    fitted_linear_rate,
    rate_constants,
)
from .topology import (
    InvalidWeightsError,
    Topology,
    WeightBoundsViolation,
    WeightMatrix,
    build_random_topology,
    check_weight_bounds,
    complete_topology,
    custom_weights,
    metropolis_weights,
    path_topology,
    star_topology,
)

log = logging.getLogger("decopt")

EXIT_OK, EXIT_CONFIG, EXIT_CERT = 0, 1, 2
TRACE_COLUMNS = ("t", "alpha", "F", "F_gap", "grad_norm", "weighted_grad_norm_prev_D",
                 "rel_err", "msgs_cum")
SCHEMA_PATH = Path(__file__).with_name("schemas") / "report.schema.json"

SOLVER_KINDS = ("dgd", "nn", "ann", "dadmm", "dlm", "dqm")
ALLOWED = {
    "topology": {"kind", "n", "p_c", "seed", "weights_file"},
    "objective": {"kind", "p", "seed", "cond", "spread", "q", "reg", "scale", "signal", "dataset",
                  "centers", "allow_unregularized"},
    "solver": {"kind", "K", "eps", "alpha0", "tol", "c", "rho_lin", "alpha_divisor",
               "alpha_min"},
    "run": {"max_iters", "grad_tol", "rel_err_tol"},
    "diagnostics": {"certify_every", "rate_checks"},
    "sweep": {"alphas"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    topology: dict
    objective: dict
    solvers: dict  # name -> solver section
    run: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "topology": self.topology,
            "objective": self.objective,
            "solvers": self.solvers,
            "run": self.run,
            "diagnostics": self.diagnostics,
            "sweep": self.sweep,
        }


# -- parsing -----------------------------------------------------------------

def _num(section: str, key: str, raw: str, kind=float):
    try:
        if kind is int:
            val = int(raw)
        elif kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError
            val = low in ("true", "yes", "1", "on")
        else:
            val = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None
    return val


def _floats(section: str, key: str, raw: str) -> list[float]:
    parts = [s for s in raw.replace(";", ",").split(",") if s.strip()]
    return [_num(section, key, s) for s in parts]


def _parse_solver(name: str, sec: dict) -> dict:
    out: dict[str, Any] = {}
    kind = sec.get("kind")
    if kind not in SOLVER_KINDS:
        raise ConfigError(f"[{name}] kind must be one of {', '.join(SOLVER_KINDS)}, got {kind!r}")
    out["kind"] = kind
    for key, raw in sec.items():
        if key == "kind":
            continue
        if key == "K":
            out[key] = _num(name, key, raw, int)
        elif key == "eps" and raw.strip().lower() == "auto":
            out[key] = "auto"
        else:
            out[key] = _num(name, key, raw)
    eps = out.get("eps", 1.0)
    if eps != "auto" and not 0 < eps <= 1:
        raise ConfigError("eps must lie in (0,1]")
    if out.get("K", 0) < 0:
        raise ConfigError("K must be >= 0")
    if "alpha0" in out and not out["alpha0"] > 0:
        raise ConfigError("alpha0 must be positive")
    if kind in ("dadmm", "dlm", "dqm") and not out.get("c", 0) > 0:
        raise ConfigError(f"[{name}] requires c > 0")
    if kind == "dlm" and not out.get("rho_lin", 0) > 0:
        raise ConfigError(f"[{name}] requires rho_lin > 0")
    return out


def parse_config(source, seed_override: int | None = None) -> ExperimentConfig:
    """Parse an INI file path (or text) into a validated :class:`ExperimentConfig`.

    Unknown sections or keys raise :class:`ConfigError`.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        if isinstance(source, str) and "[" in source:
            cp.read_string(source)
        elif Path(source).is_file():
            with open(source, encoding="utf-8") as fh:
                cp.read_file(fh)
        else:
            raise ConfigError(f"config file not found: {source}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    sections: dict[str, dict] = {s: dict(cp[s]) for s in cp.sections()}
    solvers: dict[str, dict] = {}
    for name, sec in sections.items():
        base = "solver" if name == "solver" or name.startswith("solver:") else name
        if base not in ALLOWED:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(sec) - ALLOWED[base]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
        if base == "solver":
            label = name.split(":", 1)[1] if ":" in name else sec.get("kind", "solver")
            solvers[label] = _parse_solver(name, sec)

    for req in ("topology", "objective"):
        if req not in sections:
            raise ConfigError(f"missing section [{req}]")

    t = sections["topology"]
    topo: dict[str, Any] = {"kind": t.get("kind", "random")}
    if topo["kind"] not in ("random", "path", "star", "complete"):
        raise ConfigError(f"[topology] kind must be random|path|star|complete, got {topo['kind']!r}")
    if "n" not in t:
        raise ConfigError("[topology] n is required")
    topo["n"] = _num("topology", "n", t["n"], int)
    if topo["n"] < 2:
        raise ConfigError("[topology] n must be >= 2")
    topo["p_c"] = _num("topology", "p_c", t.get("p_c", "0.4"))
    if topo["kind"] == "random" and not 0 < topo["p_c"] <= 1:
        raise ConfigError("[topology] p_c must lie in (0,1]")
    topo["seed"] = _num("topology", "seed", t.get("seed", "0"), int)
    if "weights_file" in t:
        topo["weights_file"] = t["weights_file"]

    o = sections["objective"]
    obj: dict[str, Any] = {"kind": o.get("kind", "quadratic")}
    if obj["kind"] not in ("quadratic", "logistic", "centered"):
        raise ConfigError(f"[objective] kind must be quadratic|logistic|centered, got {obj['kind']!r}")
    obj["p"] = _num("objective", "p", o.get("p", "1"), int)
    obj["seed"] = _num("objective", "seed", o.get("seed", str(topo["seed"])), int)
    for key in ("cond", "spread", "reg", "scale", "signal"):
        if key in o:
            obj[key] = _num("objective", key, o[key])
    if "q" in o:
        obj["q"] = _num("objective", "q", o["q"], int)
    if "dataset" in o:
        obj["dataset"] = o["dataset"]
    if "centers" in o:
        obj["centers"] = _floats("objective", "centers", o["centers"])
    obj["allow_unregularized"] = _num("objective", "allow_unregularized",
                                      o.get("allow_unregularized", "false"), bool)
    if obj["kind"] == "logistic":
        reg = obj.get("reg", 1e-3)
        if reg < 0:
            raise ConfigError("[objective] reg must be >= 0")
        if reg == 0 and not obj["allow_unregularized"]:
            raise ConfigError("[objective] reg = 0 is not strongly convex; set reg > 0 "
                              "or allow_unregularized = true")
    if obj["kind"] == "centered":
        if "centers" not in obj:
            raise ConfigError("[objective] centered kind requires centers")
        if len(obj["centers"]) != topo["n"] * obj["p"]:
            raise ConfigError(f"[objective] centers needs n*p = {topo['n'] * obj['p']} values")

    r = sections.get("run", {})
    run_cfg: dict[str, Any] = {"max_iters": _num("run", "max_iters", r.get("max_iters", "100"), int)}
    for key in ("grad_tol", "rel_err_tol"):
        if key in r:
            run_cfg[key] = _num("run", key, r[key])
    if run_cfg["max_iters"] < 0:
        raise ConfigError("[run] max_iters must be >= 0")

    d = sections.get("diagnostics", {})
    diag = {
        "certify_every": _num("diagnostics", "certify_every", d.get("certify_every", "0"), int),
        "rate_checks": _num("diagnostics", "rate_checks", d.get("rate_checks", "false"), bool),
    }
    sweep = {}
    if "sweep" in sections and "alphas" in sections["sweep"]:
        sweep["alphas"] = _floats("sweep", "alphas", sections["sweep"]["alphas"])

    if seed_override is not None:
        topo["seed"] = seed_override
        obj["seed"] = seed_override
    return ExperimentConfig(topo, obj, solvers, run_cfg, diag, sweep)


# -- problem construction ------------------------------------------------------

def build_topology(cfg: ExperimentConfig) -> Topology:
    t = cfg.topology
    if t["kind"] == "random":
        return build_random_topology(t["n"], t["p_c"], t["seed"])
    return {"path": path_topology, "star": star_topology, "complete": complete_topology}[t["kind"]](t["n"])


def build_weights(cfg: ExperimentConfig, top: Topology) -> WeightMatrix:
    path = cfg.topology.get("weights_file")
    if path is None:
        return metropolis_weights(top)
    try:
        W = np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read weights_file: {exc}") from None
    try:
        return custom_weights(top, W)
    except InvalidWeightsError as exc:
        raise ConfigError(f"weights_file rejected: {exc}") from None


def build_locals(cfg: ExperimentConfig, n: int) -> list:
    o = cfg.objective
    p = o["p"]
    if o["kind"] == "quadratic":
        return random_quadratics(n, p, o["seed"], cond=o.get("cond", 10.0),
                                 spread=o.get("spread", 1.0))
    if o["kind"] == "centered":
        C = np.asarray(o["centers"]).reshape(n, p)
        return [QuadraticObjective.centered(np.eye(p), C[i]) for i in range(n)]
    reg = o.get("reg", 1e-3)
    if "dataset" in o:
        locs = load_logistic_csv(o["dataset"], n, reg)
        if locs[0].p != p:
            raise ConfigError(f"dataset has {locs[0].p} features but p = {p}")
        return locs
    return synthetic_logistic(n, o.get("q", 5), p, o["seed"], reg=reg, scale=o.get("scale", 1.0),
                              signal=o.get("signal", 1.0))


@dataclass
class Problem:
    top: Topology
    weights: WeightMatrix
    locals: list


def build_problem(cfg: ExperimentConfig) -> Problem:
    top = build_topology(cfg)
    return Problem(top, build_weights(cfg, top), build_locals(cfg, top.n))


def make_solver(opts: dict, prob: Problem, reference=None):
    kind = opts["kind"]
    if kind in ("dadmm", "dlm", "dqm"):
        cfg = AdmmConfig(c=opts["c"], variant=kind, rho_lin=opts.get("rho_lin"))
        return AdmmSolver(prob.top, prob.locals, cfg, reference=reference)
    alpha0 = opts.get("alpha0", 1e-2)
    P = PenaltyObjective(prob.weights, alpha0, prob.locals)
    eps = opts.get("eps", 1.0)
    if eps == "auto":
        eps = auto_stepsize(P, opts.get("K", 1))
    if kind == "dgd":
        return DgdSolver(P, eps)
    nn = NnConfig(K=opts.get("K", 1), eps=eps, alpha0=alpha0, tol=opts.get("tol"),
                  adaptive=kind == "ann", alpha_divisor=opts.get("alpha_divisor", 10.0),
                  alpha_min=opts.get("alpha_min", 1e-8))
    return NetworkNewtonSolver(P, nn)


def auto_stepsize(P: PenaltyObjective, K: int) -> float:
    """Stepsize from the linear-rate rule at ``y0 = 0``."""
    from .netnewton import series_constants

    consts = P.constants()
    sc = series_constants(consts, P.weights, P.alpha, K)
    _, F_star, _ = centralized_reference(P)
    gap = max(P.value(np.zeros((P.n, P.p))) - F_star, 0.0)
    return theorem1_stepsize(consts, P, sc.lam, sc.Lam, gap)


# -- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def _weights_block(W: WeightMatrix) -> dict:
    try:
        delta, Delta, rho_w = check_weight_bounds(W)
    except WeightBoundsViolation as exc:
        return {"delta": W.delta, "Delta": W.Delta, "rho_W": None, "pass": False, "error": str(exc)}
    return {"delta": delta, "Delta": Delta, "rho_W": rho_w, "pass": True, "error": None}


# -- commands ------------------------------------------------------------------

def _single_solver(cfg: ExperimentConfig) -> dict:
    if len(cfg.solvers) != 1:
        raise ConfigError(f"expected exactly one [solver] section, found {len(cfg.solvers)}")
    return next(iter(cfg.solvers.values()))


def _stop(cfg: ExperimentConfig) -> StopCriteria:
    return StopCriteria(max_iters=cfg.run["max_iters"], grad_tol=cfg.run.get("grad_tol"),
                        rel_err_tol=cfg.run.get("rel_err_tol"))


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    opts = _single_solver(cfg)
    prob = build_problem(cfg)
    diag_on = cfg.diagnostics["certify_every"] > 0 or cfg.diagnostics["rate_checks"]
    weights = _weights_block(prob.weights)
    report: dict[str, Any] = {
        "command": "run",
        "config": cfg.as_dict(),
        "weights": weights,
        "certificates": [],
        "rates": None,
        "failures": [],
    }
    if diag_on and not weights["pass"]:
        report["failures"].append(weights["error"])
        report["status"] = "fail"
        write_json(out / "report.json", report)
        log.error("%s", weights["error"])
        return EXIT_CERT

    solver = make_solver(opts, prob)
    every = cfg.diagnostics["certify_every"]
    penalty = opts["kind"] in ("nn", "ann", "dgd")
    if every > 0 and not penalty:
        raise ConfigError("certify_every applies to penalty solvers (dgd, nn, ann) only")
    try:
        consts = global_constants(prob.locals) if diag_on else None
    except NotStronglyConvexError as exc:
        raise ConfigError(f"diagnostics need strong convexity: {exc}") from None

    def observe(t, state):
        if every > 0 and t % every == 0:
            P = solver.P.with_alpha(state.alpha)
            rep = certify_splitting(P, state.y, opts.get("K", 0), consts)
            report["certificates"].append({"t": t, **rep.to_dict()})

    trace = run(solver, _stop(cfg), observer=observe)
    rows = [[rec.get(c) for c in TRACE_COLUMNS] for rec in trace.records]
    write_csv(out / "trace.csv", TRACE_COLUMNS, rows)

    last = trace.records[-1]
    report["summary"] = {"iterations": len(trace), "final_F": last["F"], "final_rel_err": last["rel_err"],
                         "vector_msgs": last["vector_msgs"], "signal_msgs": last["signal_msgs"]}
    report["meta"] = trace.meta
    for c in report["certificates"]:
        report["failures"].extend(f"t={c['t']}: {b['name']}" for b in c["bounds"] if not b["pass"])

    if cfg.diagnostics["rate_checks"] and opts["kind"] == "nn":
        report["rates"] = _rate_block(solver, opts, trace, consts)
        if not report["rates"]["theorem1"]["pass"] and report["rates"]["stepsize_rule_met"]:
            report["failures"].append("linear-rate envelope")
        if not report["rates"]["recursion"]["lemma3_holds"]:
            report["failures"].append("weighted-gradient recursion")
        if not report["rates"]["recursion"]["quadratic_phase_holds"]:
            report["failures"].append("quadratic-phase bound")
    report["status"] = "fail" if report["failures"] else "pass"
    write_json(out / "report.json", report)
    for f in report["failures"]:
        log.error("certification failed: %s", f)
    return EXIT_CERT if report["failures"] else EXIT_OK


def _rate_block(solver, opts, trace, consts) -> dict:
    from .netnewton import series_constants

    P = solver.P
    K = opts.get("K", 1)
    sc = series_constants(consts, P.weights, P.alpha, K)
    y_star, F_star = solver.reference(P.alpha)
    F = trace.column("F")
    gap0 = max(F[0] - F_star, 0.0)
    eps = solver.cfg.eps
    rule = theorem1_stepsize(consts, P, sc.lam, sc.Lam, gap0)
    rc = rate_constants(consts, P, sc.lam, sc.Lam, eps, gap0)
    t1 = check_theorem1(F, rc.zeta, F_star)
    rec = check_lemma3_theorem2(trace.column("weighted_grad_norm_prev_D"), rc.Gamma1, rc.Gamma2,
                                eps, rc.zeta, K, sc.rho,
                                floor=gradient_noise_floor(P, y_star))
    return {
        "zeta": rc.zeta,
        "Gamma1": rc.Gamma1,
        "Gamma2": rc.Gamma2,
        "status": rc.status,
        "stepsize_rule": rule,
        "stepsize_rule_met": bool(eps <= rule * (1 + 1e-12)),
        "theorem1": {"pass": t1.passed, "worst_iteration": t1.worst_iteration,
                     "worst_ratio": t1.worst_ratio, "violations": list(t1.violations)},
        "recursion": rec.to_dict(),
        "fitted_rate_F_gap": fitted_linear_rate(F - F_star),
    }


def cmd_compare(cfg: ExperimentConfig, out: Path) -> int:
    if len(cfg.solvers) < 2:
        raise ConfigError("compare needs at least two [solver:NAME] sections")
    prob = build_problem(cfg)
    stop = _stop(cfg)
    traces = {}
    for name, opts in cfg.solvers.items():
        traces[name] = run(make_solver(opts, prob), stop)
    names = list(traces)
    T = max(len(tr.records) for tr in traces.values())
    rows = []
    for t in range(T):
        row = [t]
        for nm in names:
            recs = traces[nm].records
            row.append(recs[t]["rel_err"] if t < len(recs) else None)
        rows.append(row)
    write_csv(out / "comparison.csv", ["t"] + [f"rel_err_{nm}" for nm in names], rows)
    summary = [[nm, traces[nm].iterations_to("rel_err", 1e-3), traces[nm].iterations_to("rel_err", 1e-9),
                traces[nm].records[-1]["msgs_cum"]] for nm in names]
    write_csv(out / "comparison_summary.csv", ["solver", "iters_to_1e-3", "iters_to_1e-9", "msgs_total"],
              summary)
    for nm, a, b, msgs in summary:
        print(f"{nm}: iterations to 1e-3 = {a}, to 1e-9 = {b}, messages = {msgs}")
    return EXIT_OK


def cmd_sweep_alpha(cfg: ExperimentConfig, out: Path, alphas: Sequence[float] | None) -> int:
    grid = list(alphas) if alphas else cfg.sweep.get("alphas", [])
    if not grid:
        raise ConfigError("alpha grid is empty")
    if any(not a > 0 for a in grid):
        raise ConfigError("alpha must be positive")
    opts = _single_solver(cfg) if cfg.solvers else {"kind": "nn", "K": 1, "eps": 1.0}
    if opts["kind"] not in ("nn", "ann", "dgd"):
        raise ConfigError("sweep-alpha needs a penalty solver (nn, ann or dgd)")
    prob = build_problem(cfg)
    P = PenaltyObjective(prob.weights, grid[0], prob.locals)
    study = alpha_gap_study(P, grid)
    rows = []
    for alpha, gap, scaled in study.rows:
        s = dict(opts, alpha0=alpha, kind="nn" if opts["kind"] == "ann" else opts["kind"])
        solver = make_solver(s, prob)
        trace = run(solver, _stop(cfg))
        rate = fitted_linear_rate(trace.column("F_gap"))
        rows.append([alpha, gap, scaled, rate])
    write_csv(out / "sweep.csv", ["alpha", "gap", "scaled_gap", "fitted_rate"], rows)
    return EXIT_OK


def cmd_certify(cfg: ExperimentConfig, out: Path) -> int:
    opts = _single_solver(cfg) if cfg.solvers else {"kind": "nn", "K": 1}
    prob = build_problem(cfg)
    weights = _weights_block(prob.weights)
    report: dict[str, Any] = {"command": "certify", "config": cfg.as_dict(), "weights": weights,
                              "certificates": [], "rates": None, "failures": []}
    if not weights["pass"]:
        report["failures"].append(weights["error"])
    else:
        try:
            consts = global_constants(prob.locals)
        except NotStronglyConvexError as exc:
            raise ConfigError(f"certification needs strong convexity: {exc}") from None
        P = PenaltyObjective(prob.weights, opts.get("alpha0", 1e-2), prob.locals)
        y_star, _, _ = centralized_reference(P)
        for label, y in (("initial", np.zeros((P.n, P.p))), ("optimum", y_star)):
            rep = certify_splitting(P, y, opts.get("K", 1), consts)
            report["certificates"].append({"t": label, **rep.to_dict()})
            report["failures"].extend(f"{label}: {c.name}" for c in rep.failures())
    report["status"] = "fail" if report["failures"] else "pass"
    write_json(out / "report.json", report)
    for f in report["failures"]:
        log.error("certification failed: %s", f)
    return EXIT_CERT if report["failures"] else EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "sweep-alpha", "certify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI experiment config")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override topology/objective seed")
        if name == "sweep-alpha":
            sp.add_argument("--alphas", default=None, help="comma-separated alpha grid")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = parse_config(Path(args.config), args.seed)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "compare":
            return cmd_compare(cfg, out)
        if args.command == "sweep-alpha":
            grid = None
            if args.alphas is not None:
                try:
                    grid = [float(a) for a in args.alphas.split(",") if a.strip()]
                except ValueError:
                    raise ConfigError(f"bad --alphas value {args.alphas!r}") from None
                if not grid:
                    raise ConfigError("alpha grid is empty")
            return cmd_sweep_alpha(cfg, out, grid)
        return cmd_certify(cfg, out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        log.error("configuration rejected: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end: ``pppcontract <subcommand> --config FILE [--out DIR]``.

The config file is flat ``key = value`` text with ``#`` comments. Unknown
keys are rejected. Floats are written with 12 significant digits.
"""
import argparse
import csv
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from . import hjb, model, risk, simulate

FMT = "{:.12g}"


@dataclass
class RunConfig:
    params: model.ModelParams = field(default_factory=model.ModelParams)
    bundle: str = "example"
    n: int = 500
    howard: hjb.HowardConfig = field(default_factory=hjb.HowardConfig)
    sim: simulate.SimConfig = field(default_factory=simulate.SimConfig)
    sweep: Tuple[float, ...] = (0.5, 0.8, 1.0)
    out: str = "out"
    record_every: int = 1000
    n_record: int = 20
    risk_horizon: float = 30.0
    confidence: float = 0.95
    risk_paths: int = 100_000
    risk_steps: int = 200


def _as_bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _as_floats(text):
    return tuple(float(p) for p in text.replace(",", " ").split())


# key -> (section, field name, parser)
KEYS = {
    "delta": ("params", "delta", float),
    "k": ("params", "k", float),
    "sigma": ("params", "sigma", float),
    "r_bar": ("params", "r_bar", float),
    "c0": ("params", "c0", float),
    "x0_welfare": ("params", "x0_welfare", float),
    "bundle": ("run", "bundle", str),
    "n": ("run", "n", int),
    "tol": ("howard", "tol", float),
    "max_iter": ("howard", "max_iter", int),
    "rent_grid": ("howard", "rent_grid", int),
    "effort_grid": ("howard", "effort_grid", int),
    "refine": ("howard", "refine", _as_bool),
    "x0": ("sim", "x0", float),
    "dt": ("sim", "dt", float),
    "horizon": ("sim", "horizon", float),
    "n_paths": ("sim", "n_paths", int),
    "seed": ("sim", "seed", int),
    "boundary": ("sim", "boundary", str),
    "sweep": ("run", "sweep", _as_floats),
    "out": ("run", "out", str),
    "record_every": ("run", "record_every", int),
    "n_record": ("run", "n_record", int),
    "risk_horizon": ("run", "risk_horizon", float),
    "confidence": ("run", "confidence", float),
    "risk_paths": ("run", "risk_paths", int),
    "risk_steps": ("run", "risk_steps", int),
}


class ConfigError(ValueError):
    pass


def parse_config(text, source="<config>"):
    """Parse config text into a validated :class:`RunConfig`."""
    sections = {"params": {}, "howard": {}, "sim": {}, "run": {}}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        section, name, conv = KEYS[key]
        try:
            sections[section][name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        lines[name] = (key, lineno)

    def build(factory, kwargs):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            msg = str(exc)
            for name, (key, lineno) in lines.items():
                if name in kwargs and msg.startswith(name):
                    raise ConfigError(f"{source}:{lineno}: invalid {key!r}: {msg}") from None
            raise ConfigError(f"{source}: {msg}") from None

    params = build(model.ModelParams, sections["params"])
    howard = build(hjb.HowardConfig, sections["howard"])
    sim = build(simulate.SimConfig, sections["sim"])
    cfg = RunConfig(params=params, howard=howard, sim=sim, **sections["run"])

    def fail(name, msg):
        key, lineno = lines.get(name, (name, "?"))
        raise ConfigError(f"{source}:{lineno}: invalid {key!r}: {msg}")

    if cfg.bundle not in model.BUNDLES:
        fail("bundle", f"unknown bundle, known: {sorted(model.BUNDLES)}")
    if cfg.n < 2:
        fail("n", "grid size must be >= 2")
    if params.r_bar <= params.k:
        fail("r_bar", "must exceed k")
    if not cfg.sweep or any(not (s > 0) for s in cfg.sweep):
        fail("sweep", "needs one or more positive sigma values")
    if cfg.record_every < 1:
        fail("record_every", "must be >= 1")
    if not 0.0 < cfg.confidence < 1.0:
        fail("confidence", "must lie in (0, 1)")
    if not cfg.risk_horizon > 0:
        fail("risk_horizon", "must be positive")
    return cfg


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(x):
    return FMT.format(float(x))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _check_line(name, ok):
    return f"[{'PASS' if ok else 'FAIL'}] {name}"


def solve_checks(result, params, bundle):
    """Hard invariant checks on a solved problem: list of ``(name, ok)``."""
    v = result.value.values
    v0 = result.v0
    system = hjb.assemble_system(result.policy, result.grid, params, bundle, v0)
    dominant, margin = hjb.check_diagonal_dominance(system)
    return [
        ("boundary v(0) = v0", v[0] == v0),
        ("boundary v(x_bar) = 0", v[-1] == 0.0),
        ("value bounds -1e-9 <= v <= v0 + 1e-9", bool(v.min() >= -1e-9 and v.max() <= v0 + 1e-9)),
        ("diagonal dominance (margin = delta)", dominant and abs(margin - params.delta) <= 1e-12),
        ("policy admissible", result.policy.admissibility_gap(bundle) <= 1e-12),
    ]


def _write_solution(out, result, params, bundle, cfg):
    os.makedirs(out, exist_ok=True)
    rows, curve = hjb.policy_curves(result.value, result.policy, result.grid)
    write_csv(os.path.join(out, "value.csv"), ["x", "v"], rows[:, :2])
    write_csv(os.path.join(out, "policy.csv"), ["x", "r_star", "a_star"], rows[:, [0, 2, 3]])
    write_csv(os.path.join(out, "rent_vs_effort.csv"), ["a_star", "r_star"], curve)
    checks = solve_checks(result, params, bundle)
    lines = [
        f"x_bar = {_fmt(result.grid.x_bar)}",
        f"v(0) = {_fmt(result.v0)}",
        f"N = {result.grid.n}",
        f"iterations = {result.iterations}",
        f"converged = {result.converged}",
        f"final sup-norm change = {_fmt(result.history[-1])}",
        "checks:",
    ] + ["  " + _check_line(n, ok) for n, ok in checks]
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return result.converged and all(ok for _, ok in checks)


def _solve(cfg, params=None):
    params = params or cfg.params
    bundle = model.get_bundle(cfg.bundle)
    result = hjb.solve(params, bundle, cfg.n, cfg.howard)
    return result, params, bundle


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_validate(cfg, out):
    bundle = model.get_bundle(cfg.bundle)
    report = model.validate_assumptions(bundle, domain_max=50.0, n_samples=500)
    os.makedirs(out, exist_ok=True)
    text = report.summary() + f"\npassed = {report.passed}\n"
    with open(os.path.join(out, "validation.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return report.passed


def run_solve(cfg, out):
    result, params, bundle = _solve(cfg)
    ok = _write_solution(out, result, params, bundle, cfg)
    print(f"solved N={result.grid.n} in {result.iterations} iterations (converged={result.converged}); "
          f"files in {out}")
    return ok


def _sigma_label(s):
    return FMT.format(s)


def run_sweep(cfg, out):
    os.makedirs(out, exist_ok=True)
    results = {}
    failures = []
    for s in cfg.sweep:
        sub = os.path.join(out, f"sigma_{_sigma_label(s)}")
        try:
            result, params, bundle = _solve(cfg, replace(cfg.params, sigma=s))
            ok = _write_solution(sub, result, params, bundle, cfg)
            results[s] = result
            if not ok:
                failures.append(f"sigma={_sigma_label(s)}: checks failed or not converged")
        except Exception as exc:  # recorded per sigma, the others proceed
            failures.append(f"sigma={_sigma_label(s)}: {exc}")
    lines = []
    if results:
        grids = {s: r.grid for s, r in results.items()}
        base = min(grids.values(), key=lambda g: g.x_bar)
        x = base.nodes
        sig = sorted(results)
        vcols = [np.interp(x, grids[s].nodes, results[s].value.values) for s in sig]
        acols = [np.interp(x, grids[s].nodes, results[s].policy.effort) for s in sig]
        write_csv(os.path.join(out, "sweep.csv"), ["x"] + [f"v_sigma={_sigma_label(s)}" for s in sig],
                  np.column_stack([x] + vcols))
        write_csv(os.path.join(out, "sweep_effort.csv"), ["x"] + [f"a_sigma={_sigma_label(s)}" for s in sig],
                  np.column_stack([x] + acols))
        frac = sigma_monotone_fraction(vcols)
        lines.append(f"v non-decreasing in sigma at {frac:.4f} of nodes (soft check, target >= 0.95): "
                     f"{'PASS' if frac >= 0.95 else 'WARN'}")
        small = x <= 0.2 * base.x_bar
        efrac = sigma_monotone_fraction([-a[small] for a in acols])
        lines.append(f"effort non-increasing in sigma on x <= 0.2 x_bar at {efrac:.4f} of nodes (reported only)")
    lines += [f"FAILED {f}" for f in failures]
    with open(os.path.join(out, "sweep_report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return not failures


def sigma_monotone_fraction(columns, slack=1e-12):
    """Share of nodes where the columns (ordered by sigma) never decrease."""
    stack = np.vstack(columns)
    if stack.shape[0] < 2:
        return 1.0
    return float(np.mean(np.all(np.diff(stack, axis=0) >= -slack, axis=0)))


def run_simulate(cfg, out):
    result, params, bundle = _solve(cfg)
    os.makedirs(out, exist_ok=True)
    _write_solution(out, result, params, bundle, cfg)
    grid, policy = result.grid, result.policy
    sim = cfg.sim
    every = cfg.record_every if sim.n_steps % cfg.record_every == 0 else 1
    rec_cfg = replace(sim, n_paths=min(cfg.n_record, sim.n_paths))
    paths = simulate.simulate_vc(policy, grid, params, bundle, rec_cfg, record_every=every)
    cost, welfare = simulate.simulate_cost_welfare(params, bundle, paths, rec_cfg)
    rows = []
    for p in range(paths.value.shape[0]):
        for i, t in enumerate(paths.times):
            rows.append((str(p), t, paths.value[p, i], paths.rent[p, i], paths.effort[p, i],
                         cost[p, i], welfare[p, i]))
    write_csv(os.path.join(out, "paths.csv"), ["path", "t", "v_c", "r", "a", "cost", "welfare"], rows)

    mc = simulate.mc_values(policy, grid, params, bundle, sim)
    v_x0 = float(np.interp(sim.x0, grid.nodes, result.value.values))
    checks = [
        ("consortium value ~ x0", mc.consortium, sim.x0, 0.01 * sim.x0),
        ("public value ~ v(x0)", mc.public, v_x0, 0.02 * v_x0),
    ]
    lines = [f"x0 = {_fmt(sim.x0)}", f"v(x0) = {_fmt(v_x0)}", f"paths = {sim.n_paths}, dt = {_fmt(sim.dt)}, "
             f"T = {_fmt(sim.horizon)}, seed = {sim.seed}",
             f"boundary = {sim.boundary}",
             ("absorbed path fraction = " if sim.boundary == "absorb" else "clamped step fraction = ")
             + _fmt(mc.exit_fraction)]
    ok = result.converged
    for name, stats, target, allowance in checks:
        verdict = stats.within(target, allowance)
        status = "SE undefined (single path)" if verdict is None else ("PASS" if verdict else "FAIL")
        ok = ok and bool(verdict)
        lines.append(f"{name}: estimate {_fmt(stats.mean)} (SE {_fmt(stats.std_error)}, "
                     f"truncation {_fmt(stats.truncation_bound)}) target {_fmt(target)} "
                     f"allowance {_fmt(allowance)} -> {status}")
    with open(os.path.join(out, "mc_report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return ok


def run_risk(cfg, out):
    p = cfg.params
    q = risk.RiskQuery(p.c0, p.k, p.sigma, cfg.risk_horizon, cfg.confidence)
    bound = risk.positivity_bound(q)
    prob = risk.hitting_probability(q)
    mc = risk.mc_hitting_probability(q, cfg.risk_paths, cfg.risk_steps, seed=cfg.sim.seed)
    cmin = risk.min_initial_cost(p.sigma, cfg.risk_horizon, cfg.confidence)
    # absolute slack at float resolution: a zero-variance estimate of a ~1e-55 probability is exact
    mc_ok = mc.within(prob, allowance=1e-12)
    lines = [
        f"c0 = {_fmt(q.c0)}, k = {_fmt(q.k)}, sigma = {_fmt(q.sigma)}, T = {_fmt(q.horizon)}",
        f"c0 / (sigma sqrt(T)) = {_fmt(q.z)}",
        f"positivity_bound = {_fmt(bound)}",
        f"hitting_probability = {_fmt(prob)}",
        f"mc_hitting_probability = {_fmt(mc.mean)} (SE {_fmt(mc.std_error)}) -> "
        f"{'PASS' if mc_ok else ('SE undefined' if mc_ok is None else 'FAIL')}",
        f"hitting_probability <= positivity_bound -> {'PASS' if prob <= bound + 1e-12 else 'FAIL'}",
        f"min_initial_cost(confidence={_fmt(cfg.confidence)}) = {_fmt(cmin)}",
    ]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "risk_report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return bool(mc_ok) and prob <= bound + 1e-12


COMMANDS = {
    "validate": run_validate,
    "solve": run_solve,
    "sweep": run_sweep,
    "simulate": run_simulate,
    "risk": run_risk,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="pppcontract", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file (defaults when omitted)")
        p.add_argument("--out", help="output directory (overrides the config's 'out')")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.out
    ok = COMMANDS[args.command](cfg, out)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

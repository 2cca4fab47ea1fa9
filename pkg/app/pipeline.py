from __future__ import annotations
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .checks.moments import chain_oracle, mc_consistency, psi_oracle, representation_check
from .checks.partitions import run_partition_suite
from .combinatorics.partitions import MAX_GROUND_SIZE
from .errors import ConfigError, ExitCode, SizeLimitError
from .io.files import header_lines, save_csv, save_json
from .models import (
    DirectionVector, ExperimentConfig, OUParams, PathEnsemble, ProjectedDiffusionParams, TimeGrid,
)
from .moments.gaussian import ou_transition
from .sim.diffusions import simulate_full_sbm, simulate_ou_paths, simulate_projected_sbm
from .sim.walks import make_direction, simulate_projection_paths, simulate_z_paths
from .stats.probes import (
    ConvergenceRow, FddReport, conditional_increment_check, convergence_sweep, fdd_compare,
    moment_bound_sweep, small_d_moment_bound, tightness_probe,
)
from .util.logger import error, info, table, warn

SWEEP_FIELDS = ["d", "statistic", "observed", "target", "gap"]


# ----------------- helpers -----------------
def _direction(cfg: ExperimentConfig, d: Optional[int] = None) -> DirectionVector:
    s = cfg.direction
    return make_direction(s.kind, d or cfg.walk.d, u=s.u, index=s.index, values=s.values, seed=s.seed)


def _emit(cfg: ExperimentConfig, command: str, rows: List[Dict[str, Any]], doc: Dict[str, Any],
          fieldnames: Optional[List[str]] = None):
    header = header_lines(cfg, command)
    if cfg.output.format == "json":
        save_json(cfg.output.path, doc, header)
    else:
        save_csv(cfg.output.path, rows, header, fieldnames)
    if cfg.output.path:
        info(f"Wrote {cfg.output.format.upper()} to {cfg.output.path}")


def _verdict(cfg: ExperimentConfig, passed: bool, counterexample: bool) -> ExitCode:
    if passed:
        return ExitCode.PASS
    if cfg.expect_fail and counterexample:
        info("Counterexample confirmed (expected failure).")
        return ExitCode.COUNTEREXAMPLE
    return ExitCode.FAIL


def _status(passed: bool) -> str:
    return "pass" if passed else "fail"


def _row_dicts(rows: Sequence[ConvergenceRow]) -> List[Dict[str, Any]]:
    return [{"d": r.d, "statistic": r.statistic, "observed": r.observed, "target": r.target, "gap": r.gap}
            for r in rows]


def _fdd_rows(report: FddReport) -> List[Dict[str, Any]]:
    return [{
        "draw": k, "phi": ";".join(repr(x) for x in r.phi), "target_mean": r.target_mean,
        "target_var": r.target_var, "ks": r.ks, "mean_z": r.mean_z, "second_z": r.second_z,
    } for k, r in enumerate(report.rows)]


def simulate_ensemble(cfg: ExperimentConfig) -> PathEnsemble:
    """Sample cfg.process on cfg.grid.times; every process starts at <theta, (1,...,1)> unless sde.y0 is set."""
    d = cfg.walk.d
    theta = _direction(cfg)
    seed, n, threads = cfg.run.seed, cfg.run.paths, cfg.run.threads
    if cfg.process in ("lnnrw", "z"):
        params = cfg.walk_params()
        grid = TimeGrid.build(cfg.grid.times, params.delta)
        sampler = simulate_projection_paths if cfg.process == "lnnrw" else simulate_z_paths
        return sampler(params, theta, grid, n, seed, threads)
    grid = TimeGrid.build(cfg.grid.times)
    y0 = cfg.sde.y0 if cfg.sde.y0 is not None else theta.start_projection
    if cfg.process == "ou":
        return simulate_ou_paths(OUParams(start=y0), grid, n, seed, threads)
    if cfg.process == "sbm1d":
        return simulate_projected_sbm(ProjectedDiffusionParams(d=d), y0, grid, n, cfg.sde.h, seed, threads)
    if cfg.sde.y0 is not None:
        warn("sbmfull starts at (1,...,1); sde.y0 is ignored")
    return simulate_full_sbm(d, np.ones(d), theta, grid, n, cfg.sde.h, seed, threads)


# ----------------- subcommands -----------------
def cmd_verify_partitions(cfg: ExperimentConfig, lmax: Optional[int] = None) -> ExitCode:
    lmax = cfg.run.lmax if lmax is None else lmax
    if not 1 <= lmax <= MAX_GROUND_SIZE:
        raise SizeLimitError(f"--lmax must lie in 1..{MAX_GROUND_SIZE}, got {lmax}")
    info(f"Verifying partition identities for L = 1..{lmax} (seed {cfg.run.seed})")
    rows = run_partition_suite(lmax, cfg.run.seed)
    table("verify-partitions", ["L", "checks", "failures", "status"],
          [[r.L, r.checks, r.failures, _status(r.passed)] for r in rows])
    passed = all(r.passed for r in rows)
    out = [{"L": r.L, "checks": r.checks, "failures": r.failures, "status": _status(r.passed),
            "first_failure": r.first_failure or "", "notes": "; ".join(r.notes)} for r in rows]
    _emit(cfg, "verify-partitions", out, {"status": _status(passed), "rows": out})
    if not passed:
        first = next(r for r in rows if not r.passed)
        error(f"First failure: {first.first_failure}")
    return ExitCode.PASS if passed else ExitCode.FAIL


def cmd_verify_moments(cfg: ExperimentConfig) -> ExitCode:
    if cfg.process not in ("lnnrw", "z"):
        raise ConfigError(f"verify-moments needs process lnnrw or z, got {cfg.process}")
    which = "X" if cfg.process == "lnnrw" else "Z"
    out: List[Dict[str, Any]] = []

    info("Exact chain oracle (d <= 4)")
    oracle = chain_oracle() + psi_oracle() + representation_check()
    for r in oracle:
        out.append({"suite": r.suite, "case": r.case, "observed": r.observed, "expected": r.expected,
                    "score": r.error, "limit": r.tolerance, "status": _status(r.passed)})

    params = cfg.walk_params()
    theta = _direction(cfg)
    info(f"Monte Carlo consistency: d={params.d}, N={cfg.run.paths}, L <= {cfg.run.lmax}")
    reports, case = mc_consistency(params, theta, cfg.grid.times, cfg.grid.weights, cfg.run.paths,
                                   cfg.run.seed, cfg.run.lmax, which, cfg.run.threads)
    for rep in reports:
        out.append({"suite": "monte_carlo", "case": f"{case} L={rep.order}", "observed": rep.empirical,
                    "expected": rep.exact, "score": rep.z, "limit": cfg.thresholds.z_max,
                    "status": _status(rep.passed(cfg.thresholds.z_max))})

    t_last = max(cfg.grid.times[-1], 1e-12)
    # a custom direction only exists at its own d
    bound_ds = [] if cfg.direction.kind == "custom" else cfg.sweep.d
    for L in (2, 4):
        if L > cfg.run.lmax:
            continue
        for r in moment_bound_sweep(L, bound_ds, t_last, cfg.direction.u, cfg.walk.p,
                                    cfg.direction.kind, cfg.direction.index, cfg.direction.seed):
            out.append({"suite": "moment_bound", "case": f"d={r.d} L={L} t={t_last!r}", "observed": r.observed,
                        "expected": r.target, "score": r.observed, "limit": r.target,
                        "status": _status(r.observed <= r.target)})
        for r in small_d_moment_bound(L, t_last, cfg.walk.p, cfg.direction.seed):
            out.append({"suite": "small_d_bound", "case": f"d={r.d} L={L} t={t_last!r}", "observed": r.observed,
                        "expected": r.target, "score": r.observed, "limit": r.target,
                        "status": _status(r.observed <= r.target)})

    passed = all(r["status"] == "pass" for r in out)
    table("verify-moments", ["suite", "checks", "failures"],
          [[s, sum(1 for r in out if r["suite"] == s), sum(1 for r in out if r["suite"] == s and r["status"] != "pass")]
           for s in dict.fromkeys(r["suite"] for r in out)])
    _emit(cfg, "verify-moments", out, {"status": _status(passed), "rows": out},
          ["suite", "case", "observed", "expected", "score", "limit", "status"])
    if not passed:
        first = next(r for r in out if r["status"] != "pass")
        error(f"Failing row: {first['suite']} {first['case']} observed={first['observed']!r} expected={first['expected']!r}")
    return ExitCode.PASS if passed else ExitCode.FAIL


def _strictly_shrinking(gaps: Sequence[float], floor: float = 1e-15) -> bool:
    return all(b < a or b <= floor for a, b in zip(gaps, gaps[1:]))


def cmd_converge(cfg: ExperimentConfig) -> ExitCode:
    if cfg.process not in ("lnnrw", "z"):
        raise ConfigError(f"converge needs process lnnrw or z, got {cfg.process}")
    th = cfg.thresholds
    ds = cfg.sweep.d
    t = cfg.grid.times[-1]
    if t <= 0:
        raise ConfigError("converge needs a positive observation time in grid.times")
    s = cfg.direction
    sweep_args = dict(p=cfg.walk.p, kind=s.kind, index=s.index, direction_seed=s.seed)
    info(f"Convergence sweep over d = {ds} at t = {t} ({s.kind}, u = {s.u})")

    rows: List[ConvergenceRow] = []
    for stat in ("exact_mean", "exact_var", "f_discrepancy", "ks"):
        rows += convergence_sweep(ds, stat, t, s.u, cfg.run.paths, cfg.run.seed, threads=cfg.run.threads,
                                  **sweep_args)

    d_top = ds[-1]
    params = cfg.walk_params(d_top)
    theta = _direction(cfg, d_top)
    grid = TimeGrid.build(cfg.grid.times, params.delta)
    sampler = simulate_projection_paths if cfg.process == "lnnrw" else simulate_z_paths
    info(f"fdd test at d = {d_top}: {cfg.fdd.draws} weight draws, N = {cfg.run.paths}")
    fdd = fdd_compare(sampler(params, theta, grid, cfg.run.paths, cfg.run.seed, cfg.run.threads),
                      cfg.fdd.draws, cfg.run.seed)
    rows.append(ConvergenceRow(d_top, "fdd_worst_ks", fdd.worst_ks, 0.0))

    def gaps(stat: str) -> List[float]:
        return [r.gap for r in rows if r.statistic == stat]

    checks = {
        "exact_mean_shrinking": _strictly_shrinking(gaps("exact_mean")),
        "exact_mean_small": gaps("exact_mean")[-1] < th.mean_gap,
        "f_discrepancy_shrinking": _strictly_shrinking(gaps("f_discrepancy")),
        "ks_marginal": gaps("ks")[-1] < th.ks_pass,
        "fdd": fdd.passed(th.ks_pass),
    }
    passed = all(checks.values())
    counterexample = fdd.counterexample(th.ks_fail) and gaps("ks")[-1] >= th.ks_fail

    table("converge", ["check", "status"], [[k, _status(v)] for k, v in checks.items()])
    for name, ok in checks.items():
        if not ok:
            warn(f"converge: {name} failed")
    out = _row_dicts(rows)
    _emit(cfg, "converge", out, {
        "status": _status(passed), "counterexample": counterexample, "checks": checks,
        "rows": out, "fdd": _fdd_rows(fdd),
    }, SWEEP_FIELDS)
    return _verdict(cfg, passed, counterexample)


def _summary(ens: PathEnsemble) -> List[Dict[str, Any]]:
    rows = []
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    for k, t in enumerate(ens.grid.times):
        col = ens.values[:, k]
        mean_t, var_t = ou_transition(OUParams(start=ens.start), t)
        q = np.quantile(col, qs)
        rows.append({
            "t": t, "n": ens.n_paths, "mean": float(col.mean()),
            "var": float(col.var(ddof=1)) if ens.n_paths > 1 else 0.0,
            **{f"q{int(100 * a):02d}": float(v) for a, v in zip(qs, q)},
            "ou_mean": mean_t, "ou_var": var_t,
        })
    return rows


def cmd_simulate(cfg: ExperimentConfig) -> ExitCode:
    info(f"Simulating {cfg.process}: d={cfg.walk.d}, N={cfg.run.paths}, times={cfg.grid.times}")
    ens = simulate_ensemble(cfg)
    if cfg.output.raw:
        names = ["path"] + [f"t={t!r}" for t in ens.grid.times]
        out = [dict(zip(names, [i] + [float(v) for v in row])) for i, row in enumerate(ens.values)]
        _emit(cfg, "simulate", out, {"process": ens.process, "times": list(ens.grid.times),
                                     "paths": ens.values.tolist()}, names)
    else:
        out = _summary(ens)
        _emit(cfg, "simulate", out, {"process": ens.process, "start": ens.start, "summary": out})
    return ExitCode.PASS


def cmd_fdd_test(cfg: ExperimentConfig) -> ExitCode:
    th = cfg.thresholds
    ens = simulate_ensemble(cfg)
    info(f"fdd test for {ens.process}: {cfg.fdd.draws} weight draws over {ens.grid.K} grid times")
    report = fdd_compare(ens, cfg.fdd.draws, cfg.run.seed)
    passed = report.passed(th.ks_pass)
    counterexample = report.counterexample(th.ks_fail)
    table("fdd-test", ["draw", "ks", "mean z", "second z"],
          [[k, f"{r.ks:.4f}", f"{r.mean_z:.2f}", f"{r.second_z:.2f}"] for k, r in enumerate(report.rows)])
    out = _fdd_rows(report)
    _emit(cfg, "fdd-test", out, {"status": _status(passed), "counterexample": counterexample,
                                 "worst_ks": report.worst_ks, "worst_z": report.worst_z, "rows": out})
    return _verdict(cfg, passed, counterexample)


def cmd_tightness_probe(cfg: ExperimentConfig) -> ExitCode:
    tc = cfg.tightness
    params = cfg.walk_params()
    theta = _direction(cfg)
    info(f"Tightness probe: d={params.d}, times={tc.times}, eps={tc.eps}, N={cfg.run.paths}")
    rep = tightness_probe(params, theta, tc.times, tc.eps, cfg.run.paths, cfg.run.seed, cfg.run.threads)
    inc = conditional_increment_check(params, theta, tc.times[0], tc.times[1], cfg.run.paths,
                                      cfg.run.seed, tc.bins, cfg.run.threads, tc.eps)
    out: List[Dict[str, Any]] = []
    for name, w in (("full", rep.full), ("half", rep.half)):
        out.append({"kind": "window", "label": name, "lo": w.times[0], "hi": w.times[2], "count": w.hits,
                    "estimate": w.probability, "reference": w.scale, "ci_low": w.ci_low,
                    "ci_high": w.ci_high, "extra": w.lattice_factor})
    for b in inc.bins:
        out.append({"kind": "increment_bin", "label": f"m={inc.pulses}", "lo": b.lo, "hi": b.hi,
                    "count": b.count, "estimate": b.empirical, "reference": b.exact,
                    "ci_low": b.empirical - cfg.thresholds.z_max * b.std_error,
                    "ci_high": b.empirical + cfg.thresholds.z_max * b.std_error, "extra": b.z})
        out.append({"kind": "increment_tail", "label": f"eps={tc.eps!r}", "lo": b.lo, "hi": b.hi,
                    "count": b.count, "estimate": b.tail, "reference": b.tail_bound, "ci_low": b.tail_ci_low,
                    "ci_high": b.tail_ci_high, "extra": b.tail_holds})
    passed = rep.monotone and inc.passed(cfg.thresholds.z_max)
    table("tightness-probe", ["check", "status"], [
        ["halved window not more likely", _status(rep.monotone)],
        ["conditional increments", _status(inc.passed(cfg.thresholds.z_max))],
        ["closed form below 2m delta (1 + 2y^2)", _status(inc.bound_holds)],
        ["increment tails under the Chebyshev bound", _status(all(b.tail_holds for b in inc.bins))],
    ])
    _emit(cfg, "tightness-probe", out, {"status": _status(passed), "monotone": rep.monotone,
                                        "bound_holds": inc.bound_holds, "rows": out})
    return ExitCode.PASS if passed else ExitCode.FAIL


COMMANDS = {
    "verify-moments": cmd_verify_moments,
    "converge": cmd_converge,
    "simulate": cmd_simulate,
    "fdd-test": cmd_fdd_test,
    "tightness-probe": cmd_tightness_probe,
}

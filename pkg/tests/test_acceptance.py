"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest,
where the lines are also collected into the terminal summary.
"""

from __future__ import annotations

import math
import sys
import tempfile
import time
from functools import cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_msp, enumerate_full_rank, random_instance  # noqa: E402
from sfnsleep.allocator import (  # noqa: E402
    AllocationError,
    AllocationProblem,
    InfeasibleBudgetError,
    NoSolutionError,
    UncoverableLayerError,
    check_solution,
    hmsp_step_bound,
    solve_hmsp,
    solve_msp_exact,
    solve_usp,
)
from sfnsleep.cli import main as cli_main  # noqa: E402
from sfnsleep.config import bundled_config, load_config  # noqa: E402
from sfnsleep.evaluation import cell_models, run_sweep  # noqa: E402
from sfnsleep.gf import FieldSpec  # noqa: E402
from sfnsleep.rate_model import db_to_linear, fit_lad, synthetic_samples  # noqa: E402
from sfnsleep.rlnc import decode_probability, monte_carlo_full_rank  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}
VIDEOS = ("videoA.cfg", "videoB.cfg")
INSTANCE_SEED = 20240601


def report(n: int, ok: bool, detail: str):
    RESULTS[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


@cache
def instances(count=200):
    rng = np.random.default_rng(INSTANCE_SEED)
    return [random_instance(rng) for _ in range(count)]


@cache
def sweep(video: str):
    cfg = load_config(video)
    model = cfg.rate_model()
    t0 = time.perf_counter()
    res = run_sweep(cfg.scenario(), cfg.stream(), cfg.run.budgets_w, cfg.run.rbp_counts,
                    ["msp", "hmsp", "upa"], model, model.tb_bandwidth_hz,
                    cfg.rate.rbp_bandwidth_hz)
    return cfg, res, time.perf_counter() - t0


def criterion_1():
    t0 = time.perf_counter()
    worst_exact = 0.0
    for k in range(0, 4):
        for n in range(0, 5):
            worst_exact = max(worst_exact, abs(decode_probability(k, n, 2) - enumerate_full_rank(k, n, 2)))
    worst_z, misses = 0.0, []
    for q in (2, 4):
        for k in range(1, 7):
            for n in range(0, 11):
                p = decode_probability(k, n, q)
                est = monte_carlo_full_rank(k, n, FieldSpec(q), 100_000, seed=0)
                se = math.sqrt(p * (1 - p) / 1e5)
                if se == 0:
                    if est != p:
                        misses.append((k, n, q))
                    continue
                z = abs(est - p) / se
                worst_z = max(worst_z, z)
                if z > 3:
                    misses.append((k, n, q))
    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 1e-12 and not misses and elapsed <= 60
    return ok, (f"enumeration max err {worst_exact:.1e}, MC max |z| {worst_z:.2f} "
                f"({len(misses)} beyond 3 SE), {elapsed:.1f} s")


def _msp_objective(stream, h, model, budget):
    try:
        return solve_msp_exact(stream, h, model, power_budget=budget).objective
    except (InfeasibleBudgetError, UncoverableLayerError):
        return None


def criterion_2():
    t0 = time.perf_counter()
    agree = 0
    feasible = 0
    for stream, h, model, budget in instances():
        oracle = brute_force_msp(stream, h, model, budget)
        want = None if oracle is None else oracle[0]
        got = _msp_objective(stream, h, model, budget)
        agree += got == want
        feasible += want is not None
    elapsed = time.perf_counter() - t0
    ok = agree == len(instances()) and elapsed <= 120
    return ok, f"{agree}/{len(instances())} objectives equal ({feasible} feasible), {elapsed:.1f} s"


def criterion_3():
    bad = []
    gaps = []
    checked = unchanged = 0
    for i, (stream, h, model, budget) in enumerate(instances()):
        problem = AllocationProblem(stream, h, model)
        try:
            usp = solve_usp(problem)
        except UncoverableLayerError:
            continue
        try:
            sol = solve_hmsp(problem, power_budget=budget)
        except NoSolutionError:
            if _msp_objective(stream, h, model, budget) is not None:
                # greedy may stall only when every layer already sits at d_GoP
                bad.append((i, "no_solution while exact is feasible"))
            continue
        checked += 1
        if check_solution(sol, stream, h, model, budget):
            bad.append((i, "re-check failed"))
        if sol.iterations > hmsp_step_bound(stream):
            bad.append((i, "step bound"))
        exact = _msp_objective(stream, h, model, budget)
        if exact is None or sol.objective < exact:
            bad.append((i, "objective below exact"))
        else:
            gaps.append(sol.objective - exact)
        if usp.total_power_watts <= budget:
            unchanged += 1
            if sol.allocations != usp.allocations or sol.iterations != 0:
                bad.append((i, "USP not returned unchanged"))
    mean_gap = float(np.mean(gaps)) if gaps else 0.0
    return not bad, (f"{checked} feasible H-MSP solutions verified, {unchanged} USP-slack cases "
                     f"unchanged, mean TTI gap to exact {mean_gap:.3f}"
                     + (f"; violations {bad[:5]}" if bad else ""))


def criterion_4():
    rng = np.random.default_rng(4)
    probes = violations = 0
    problems = [AllocationProblem(s, h, m) for s, h, m, _ in instances()[:100]]
    for video in VIDEOS:
        cfg = load_config(video)
        model = cfg.rate_model()
        for rbp in cfg.run.rbp_counts:
            sc, m = cell_models(cfg.scenario(), model, rbp, model.tb_bandwidth_hz)
            problems.append(AllocationProblem.build(cfg.stream(), sc, m))
    while probes < 1000:
        p = problems[int(rng.integers(len(problems)))]
        l = int(rng.integers(p.n_layers))
        k = p.stream.layers[l].k_symbols
        if k == p.d_gop:
            continue
        t = int(rng.integers(k, p.d_gop))
        probes += 1
        if not p.min_power(l, t + 1) <= p.min_power(l, t):
            violations += 1
    non_monotone = []
    for video in VIDEOS:
        cfg, res, _ = sweep(video)
        for rbp in cfg.run.rbp_counts:
            eps = [res.get("msp", b, rbp) for b in cfg.run.budgets_w]
            # an infeasible cell counts as -inf: feasibility itself must not be lost
            vals = [r.epsilon if r.feasible else -math.inf for r in eps]
            if any(b < a for a, b in zip(vals, vals[1:])):
                non_monotone.append((video, rbp))
    ok = violations == 0 and not non_monotone
    return ok, (f"{probes} curve probes, {violations} increases; epsilon(msp) monotone in budget "
                f"for {6 - len(non_monotone)}/6 (video, rbp) series")


def criterion_5():
    t0 = time.perf_counter()
    total = 0.0
    bad = []
    cells = 0
    gains = {}
    for video in VIDEOS:
        cfg, res, dt = sweep(video)
        total += dt
        for b in cfg.run.budgets_w:
            for rbp in cfg.run.rbp_counts:
                m, h, u = (res.get(s, b, rbp) for s in ("msp", "hmsp", "upa"))
                if not (m.feasible and h.feasible and u.feasible):
                    continue
                cells += 1
                if m.epsilon < u.epsilon or h.epsilon < u.epsilon - 1e-9:
                    bad.append((video, b, rbp))
        gains[video] = res.epsilon_gain("msp", "upa")
    total = max(total, time.perf_counter() - t0)
    shown = ", ".join(f"{v}: {g:.3f}" if g is not None else f"{v}: n/a" for v, g in gains.items())
    ok = not bad and total <= 300
    return ok, (f"{cells} all-feasible cells, {len(bad)} violations; max msp-upa epsilon gain "
                f"{shown}; sweep {total:.1f} s")


def criterion_6():
    lines = []
    ok = True
    for video in VIDEOS:
        _, res, _ = sweep(video)
        m, u = res.get("msp", 40.0, 9), res.get("upa", 40.0, 9)
        for lvl, (a, b) in enumerate(zip(m.coverage_m, u.coverage_m), start=1):
            if a < b:
                ok = False
        lines.append(f"{video} msp {list(m.coverage_m)} vs upa {list(u.coverage_m)} m")
    return ok, "; ".join(lines)


def criterion_7():
    errs = []
    worst_excess = -math.inf
    grid = np.arange(0.0, 35.01, 0.5)
    W = 1.62e6
    for a, b in ((0.17, 0.06), (0.5, 0.2), (1.0, 1.0)):
        samples = synthetic_samples(a, b, W, grid, lift=0.03)
        fit = fit_lad(samples, W, 6.33, 31.32)
        errs.append(max(abs(fit.alpha - a) / a, abs(fit.beta - b) / b))
        for s in samples:
            if 6.33 <= s.sinr_db <= 31.32:
                r = fit.alpha * W * math.log2(1 + fit.beta * float(db_to_linear(s.sinr_db)))
                worst_excess = max(worst_excess, (r - s.rate_bps) / s.rate_bps)
    ok = max(errs) <= 1e-2 and worst_excess <= 1e-9
    return ok, f"max relative parameter error {max(errs):.1e}, max curve excess {worst_excess:.1e}"


def criterion_8():
    diffs = []
    with tempfile.TemporaryDirectory() as tmp:
        for video in VIDEOS:
            outs = []
            for run in ("first", "second"):
                out = Path(tmp) / video / run
                cli_main(["run", "--config", str(bundled_config(video)), "--out", str(out),
                          "--seed", "0"])
                outs.append(out)
            for name in ("results.csv", "psnr.csv", "coverage.csv"):
                if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                    diffs.append(f"{video}/{name}")
    return not diffs, "byte-identical CSVs for both videos" if not diffs else f"differs: {diffs}"


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    report(n, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]()
        failed += not report(n, ok, detail)
    sys.exit(1 if failed else 0)

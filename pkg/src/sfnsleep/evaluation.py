"""Sleep-period, PSNR and coverage metrics, and the strategy/budget/TB-size sweep."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocator import (
    AllocationError,
    AllocationProblem,
    AllocationSolution,
    VideoStream,
    check_solution,
    solve_hmsp,
    solve_msp_exact,
    solve_upa,
    solve_usp,
)
from .propagation import RBP_BANDWIDTH_HZ, NetworkScenario
from .rate_model import RateModel, rate
from .rlnc import decode_probability, received_symbols

STRATEGIES = ("msp", "hmsp", "usp", "upa")


@dataclass(frozen=True)
class SleepReport:
    xi_ttis: int
    epsilon: float


def sleep_period(solution: AllocationSolution | tuple, d_gop: int) -> SleepReport:
    ts = solution.transmissions if isinstance(solution, AllocationSolution) else tuple(solution)
    xi = d_gop - max(ts)
    return SleepReport(xi, xi / d_gop)


def layer_probabilities(solution: AllocationSolution, stream: VideoStream, h: float,
                        model: RateModel) -> list[float]:
    """Recovery probability of each layer for a user with channel factor ``h``."""
    out = []
    for layer, a in zip(stream.layers, solution.allocations):
        r = rate(model, a.power_watts, h)
        n = received_symbols(r, a.transmissions, layer.symbol_size_bits, stream.tti_seconds)
        out.append(decode_probability(layer.k_symbols, n, stream.field))
    return out


def psnr_from_probabilities(psnr_db, probs, independent_layers=False) -> float:
    """Best PSNR level weighted by its recovery probability (level 0 scores 0 dB).

    By default level l needs every layer up to l; ``independent_layers``
    weights level l by layer l's own probability instead.
    """
    best = 0.0
    cum = 1.0
    for p_hat, g in zip(psnr_db, probs):
        cum *= g
        best = max(best, p_hat * (g if independent_layers else cum))
    return best


def _h_of(user, scenario):
    if isinstance(user, (int, float, np.floating)):
        return float(user)
    from .propagation import aggregate_channel_factor
    return aggregate_channel_factor(user, scenario)


def user_psnr(solution, stream, user, scenario, rate_model, independent_layers=False) -> float:
    """Max achievable PSNR for ``user`` (a UserTerminal or a channel factor)."""
    probs = layer_probabilities(solution, stream, _h_of(user, scenario), rate_model)
    return psnr_from_probabilities([l.psnr_db for l in stream.layers], probs, independent_layers)


def coverage_distance(solution, stream, users, scenario, rate_model, qos_level: int) -> float:
    """Farthest user distance at which layers 1..qos_level are jointly recovered.

    Returns 0.0 when no user qualifies; level 0 returns the farthest user.
    """
    best = 0.0
    for u in users:
        if qos_level == 0:
            ok = True
        else:
            probs = layer_probabilities(solution, stream, _h_of(u, scenario), rate_model)
            ok = math.prod(probs[:qos_level]) >= stream.target_prob
        if ok:
            best = max(best, u.distance_m)
    return best


@dataclass
class SweepRecord:
    strategy: str
    budget_w: float
    rbp: int
    feasible: bool
    epsilon: float | None
    transmissions: tuple = ()
    powers: tuple = ()
    iterations: int = 0
    coverage_m: tuple = ()
    error: str = ""
    solution: AllocationSolution | None = field(default=None, repr=False)

    @property
    def key(self):
        return (self.strategy, self.budget_w, self.rbp)


@dataclass
class SweepResult:
    records: list[SweepRecord]
    stream: VideoStream

    def get(self, strategy, budget, rbp) -> SweepRecord:
        for r in self.records:
            if r.key == (strategy, budget, rbp):
                return r
        raise KeyError((strategy, budget, rbp))

    def epsilon_gain(self, better="msp", baseline="upa"):
        """Largest epsilon margin of ``better`` over ``baseline`` across cells where both are feasible."""
        gains = []
        for r in self.records:
            if r.strategy != better or not r.feasible:
                continue
            try:
                b = self.get(baseline, r.budget_w, r.rbp)
            except KeyError:
                continue
            if b.feasible:
                gains.append(r.epsilon - b.epsilon)
        return max(gains) if gains else None


def cell_models(scenario: NetworkScenario, rate_model: RateModel, rbp: int,
                rate_bandwidth_per_rbp_hz: float | None = None,
                rbp_bandwidth_hz: float = RBP_BANDWIDTH_HZ):
    """Scenario and rate model for a TB of ``rbp`` resource-block pairs.

    The physical TB width (``rbp * rbp_bandwidth_hz``) sets noise and
    in-band interference; the rate model's bandwidth defaults to the same
    width unless a separate per-RBP normalization is given.
    """
    sc = scenario.with_bandwidth(rbp * rbp_bandwidth_hz)
    w_rate = rbp * (rate_bandwidth_per_rbp_hz or rbp_bandwidth_hz)
    return sc, rate_model.with_bandwidth(w_rate)


def _solve(strategy, problem, budget):
    if strategy == "msp":
        return solve_msp_exact(problem, power_budget=budget)
    if strategy == "hmsp":
        return solve_hmsp(problem, power_budget=budget)
    if strategy == "upa":
        return solve_upa(problem, power_budget=budget)
    if strategy == "usp":
        return solve_usp(problem)
    raise ValueError(f"unknown strategy {strategy!r}")


def run_cell(strategy, budget, rbp, stream, scenario, rate_model, h=None) -> SweepRecord:
    """Solve one (strategy, budget, TB size) cell and verify it independently."""
    if h is None:
        h = scenario.channel_factors()
    problem = AllocationProblem(stream, h, rate_model)
    L = len(stream.layers)
    try:
        sol = _solve(strategy, problem, budget)
    except AllocationError as e:
        return SweepRecord(strategy, budget, rbp, False, None, error=e.tag,
                           coverage_m=(0.0,) * L)
    violations = check_solution(sol, stream, h, rate_model, budget)
    feasible = not violations
    error = ""
    if violations:
        if sol.feasible and strategy != "usp":
            # a solver claimed feasibility that the re-check refutes
            error = "verification_failed"
        elif strategy == "upa":
            error = "coverage_failed"
        else:
            error = "over_budget"
    coverage = tuple(
        coverage_distance(sol, stream, scenario.users, scenario, rate_model, l)
        for l in range(1, L + 1)
    )
    rep = sleep_period(sol, stream.gop_budget_ttis)
    return SweepRecord(strategy, budget, rbp, feasible, rep.epsilon, sol.transmissions,
                       sol.powers, sol.iterations, coverage, error, sol)


def _rbp_block(args):
    scenario, stream, rate_model, rbp, budgets, strategies, w_rate, w_rbp = args
    sc, model = cell_models(scenario, rate_model, rbp, w_rate, w_rbp)
    h = sc.channel_factors()
    return [
        run_cell(s, b, rbp, stream, sc, model, h)
        for b in budgets
        for s in strategies
    ]


def run_sweep(scenario: NetworkScenario, stream: VideoStream, budgets, rbp_counts, strategies,
              rate_model: RateModel = RateModel(), rate_bandwidth_per_rbp_hz=None,
              rbp_bandwidth_hz=RBP_BANDWIDTH_HZ, jobs: int = 1) -> SweepResult:
    """Run every (TB size, budget, strategy) cell; failed cells are recorded, not raised.

    Records come out in (rbp, budget, strategy) input order whatever ``jobs`` is.
    """
    if not budgets or not rbp_counts or not strategies:
        raise ValueError("budgets, rbp_counts and strategies must be non-empty")
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}")
    tasks = [(scenario, stream, rate_model, rbp, list(budgets), list(strategies),
              rate_bandwidth_per_rbp_hz, rbp_bandwidth_hz) for rbp in rbp_counts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            blocks = list(ex.map(_rbp_block, tasks))
    else:
        blocks = [_rbp_block(t) for t in tasks]
    return SweepResult([r for b in blocks for r in b], stream)

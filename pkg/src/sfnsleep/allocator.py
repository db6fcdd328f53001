"""Per-layer power/transmission planning: USP, exact MSP, H-MSP and UPA.

Every solver works on the layer power curve ``min_power(l, t)``: the least
SFN power with which ``t`` transmissions of layer ``l`` reach the required
fraction of users.  The curve is non-increasing in ``t``, which makes the
exact min-max problem a one-dimensional monotone search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .gf import FieldSpec
from .propagation import NetworkScenario
from .rate_model import RateModel, UnreachableRateError, min_power_for_rate, rate
from .rlnc import TTI_SECONDS, decode_probability, received_symbols


class AllocationError(Exception):
    tag = "error"


class UnreachableTargetError(AllocationError, ValueError):
    tag = "unreachable_target"


class UncoverableLayerError(AllocationError):
    tag = "uncoverable"

    def __init__(self, layer, msg=None):
        self.layer = layer
        super().__init__(msg or f"layer {layer + 1} cannot reach its coverage target even at t = d_GoP")


class InfeasibleBudgetError(AllocationError):
    tag = "infeasible"


class NoSolutionError(AllocationError):
    tag = "no_solution"


@dataclass(frozen=True)
class VideoLayer:
    k_symbols: int
    symbol_size_bits: int = 4096
    bitrate_bps: float | None = None
    psnr_db: float = 0.0
    coverage_target: float = 1.0

    def __post_init__(self):
        if self.k_symbols < 1:
            raise ValueError("k_symbols must be >= 1")
        if self.symbol_size_bits <= 0:
            raise ValueError("symbol_size_bits must be positive")
        if not 0 < self.coverage_target <= 1:
            raise ValueError("coverage_target out of (0,1]")


@dataclass(frozen=True)
class VideoStream:
    layers: tuple[VideoLayer, ...]
    gop_budget_ttis: int = 320
    field: FieldSpec = FieldSpec(256)
    target_prob: float = 0.1
    tti_seconds: float = TTI_SECONDS
    t_mbms: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("stream needs at least one layer")
        if not 0 < self.target_prob <= 1:
            raise ValueError("target_prob out of (0,1]")
        kmax = max(l.k_symbols for l in self.layers)
        if self.gop_budget_ttis < kmax:
            raise ValueError(f"d_GoP = {self.gop_budget_ttis} is below the largest K = {kmax}")

    @property
    def gop_seconds(self) -> float:
        return self.gop_budget_ttis * self.tti_seconds / self.t_mbms

    @classmethod
    def from_bitrates(cls, bitrates_bps, psnr_db, coverage_targets, symbol_size_bits=4096,
                      gop_budget_ttis=320, t_mbms=0.6, tti_seconds=TTI_SECONDS,
                      field=FieldSpec(256), target_prob=0.1):
        """Size each layer's source block from its bitrate over one GoP."""
        gop_s = gop_budget_ttis * tti_seconds / t_mbms
        layers = []
        for r, p, th in zip(bitrates_bps, psnr_db, coverage_targets, strict=True):
            # tolerate float noise in r * t_GoP landing just above an integer
            k = math.ceil(r * gop_s / symbol_size_bits - 1e-9)
            layers.append(VideoLayer(k, symbol_size_bits, r, p, th))
        return cls(tuple(layers), gop_budget_ttis, field, target_prob, tti_seconds, t_mbms)


@dataclass(frozen=True)
class LayerAllocation:
    power_watts: float
    transmissions: int


@dataclass(frozen=True)
class AllocationSolution:
    allocations: tuple[LayerAllocation, ...]
    strategy: str
    feasible: bool = True
    iterations: int = 0
    budget: float | None = None
    coverage_failed: tuple[bool, ...] = ()

    @property
    def total_power_watts(self) -> float:
        return math.fsum(a.power_watts for a in self.allocations)

    @property
    def objective(self) -> int:
        return max(a.transmissions for a in self.allocations)

    @property
    def powers(self):
        return tuple(a.power_watts for a in self.allocations)

    @property
    def transmissions(self):
        return tuple(a.transmissions for a in self.allocations)


def coverage_count_needed(theta: float, users: int) -> int:
    # theta * U is often a decimal product like 0.3 * 80 = 24.000000000000004
    return max(1, math.ceil(round(theta * users, 9)))


def min_symbols_for_target(k: int, field: FieldSpec | int, target_prob: float) -> int:
    """Smallest N >= K whose full-rank probability reaches ``target_prob``."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not 0 < target_prob <= 1:
        raise ValueError("target_prob out of (0,1]")
    if target_prob >= 1:
        raise UnreachableTargetError("full-rank probability never reaches 1 for K >= 1")
    n = k
    while decode_probability(k, n, field) < target_prob:
        n += 1
    return n


def _channel(scenario) -> np.ndarray:
    if isinstance(scenario, NetworkScenario):
        return scenario.channel_factors()
    h = np.asarray(scenario, dtype=float).ravel()
    if h.size == 0 or not np.all(h > 0):
        raise ValueError("channel factors must be positive")
    return h


@dataclass
class AllocationProblem:
    """A stream, the users' channel factors and a rate model, with cached power curves."""

    stream: VideoStream
    h: np.ndarray
    model: RateModel
    _curves: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, stream, scenario, rate_model) -> "AllocationProblem":
        return cls(stream, _channel(scenario), rate_model)

    @property
    def n_layers(self) -> int:
        return len(self.stream.layers)

    @property
    def d_gop(self) -> int:
        return self.stream.gop_budget_ttis

    @cached_property
    def _h_desc(self):
        return np.sort(self.h)[::-1]

    @cached_property
    def symbols_needed(self) -> tuple[int, ...]:
        s = self.stream
        return tuple(min_symbols_for_target(l.k_symbols, s.field, s.target_prob) for l in s.layers)

    def users_needed(self, l: int) -> int:
        return coverage_count_needed(self.stream.layers[l].coverage_target, self.h.size)

    def required_rate(self, l: int, t: int) -> float:
        layer = self.stream.layers[l]
        return self.symbols_needed[l] * layer.symbol_size_bits / (self.stream.tti_seconds * t)

    def min_power(self, l: int, t: int) -> float:
        """Least power with which ``t`` transmissions cover layer ``l``; inf if none."""
        k = self.stream.layers[l].k_symbols
        if not k <= t <= self.d_gop:
            raise ValueError(f"t = {t} outside [{k}, {self.d_gop}] for layer {l + 1}")
        return float(self.curve(l)[t - k])

    def curve(self, l: int) -> np.ndarray:
        """``min_power(l, t)`` for t = K_l .. d_GoP."""
        if l not in self._curves:
            k = self.stream.layers[l].k_symbols
            self._curves[l] = np.array([self._min_power(l, t) for t in range(k, self.d_gop + 1)])
        return self._curves[l]

    def _min_power(self, l, t):
        # every user needs the same rate, so the m-th cheapest user is the one
        # with the m-th largest channel factor
        h_m = self._h_desc[self.users_needed(l) - 1]
        try:
            return min_power_for_rate(self.model, self.required_rate(l, t), h_m)
        except UnreachableRateError:
            return math.inf

    def covered_users(self, l: int, power: float, t: int) -> int:
        """Users recovering layer ``l`` with probability >= target, by forward evaluation."""
        s = self.stream
        layer = s.layers[l]
        count = 0
        for r in np.atleast_1d(rate(self.model, power, self.h)):
            n = received_symbols(float(r), t, layer.symbol_size_bits, s.tti_seconds)
            if decode_probability(layer.k_symbols, n, s.field) >= s.target_prob:
                count += 1
        return count


def min_power_for_layer(layer_index, t, stream, scenario, rate_model) -> float:
    return AllocationProblem.build(stream, scenario, rate_model).min_power(layer_index, t)


def _as_problem(stream, scenario, rate_model) -> AllocationProblem:
    if isinstance(stream, AllocationProblem):
        return stream
    return AllocationProblem.build(stream, scenario, rate_model)


def _first_true(lo, hi, pred):
    """Smallest x in [lo, hi] with pred(x), for pred monotone False..True; None if none."""
    if not pred(hi):
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def usp_layer(problem: AllocationProblem, l: int, linear: bool = False) -> int:
    k = problem.stream.layers[l].k_symbols
    finite = lambda t: math.isfinite(problem.min_power(l, t))
    if linear:
        t = next((t for t in range(k, problem.d_gop + 1) if finite(t)), None)
    else:
        t = _first_true(k, problem.d_gop, finite)
    if t is None:
        raise UncoverableLayerError(l)
    return t


def solve_usp(stream, scenario=None, rate_model=None, linear: bool = False) -> AllocationSolution:
    """Per-layer fewest transmissions, ignoring the power budget."""
    problem = _as_problem(stream, scenario, rate_model)
    allocs = []
    for l in range(problem.n_layers):
        t = usp_layer(problem, l, linear)
        allocs.append(LayerAllocation(problem.min_power(l, t), t))
    return AllocationSolution(tuple(allocs), "usp")


def solve_msp_exact(stream, scenario=None, rate_model=None, power_budget: float = 40.0
                    ) -> AllocationSolution:
    """Globally optimal min-max schedule under the total power budget.

    Binary search on the common deadline T: the total power at T is
    non-increasing in T, so feasibility is monotone.  All layers get t = T at
    their minimal power.
    """
    problem = _as_problem(stream, scenario, rate_model)
    if not power_budget > 0:
        raise ValueError("power budget must be positive")
    L = problem.n_layers
    for l in range(L):
        if not math.isfinite(problem.min_power(l, problem.d_gop)):
            raise UncoverableLayerError(l)

    def total(T):
        return math.fsum(problem.min_power(l, T) for l in range(L))

    lo = max(layer.k_symbols for layer in problem.stream.layers)
    T = _first_true(lo, problem.d_gop, lambda T: total(T) <= power_budget)
    if T is None:
        raise InfeasibleBudgetError(
            f"minimum total power {total(problem.d_gop):.6g} W exceeds budget {power_budget:.6g} W")
    allocs = tuple(LayerAllocation(problem.min_power(l, T), T) for l in range(L))
    return AllocationSolution(allocs, "msp", budget=power_budget)


def hmsp_step_bound(stream: VideoStream) -> int:
    return sum(stream.gop_budget_ttis - l.k_symbols for l in stream.layers)


def solve_hmsp(stream, scenario=None, rate_model=None, power_budget: float = 40.0,
               trace: list | None = None) -> AllocationSolution:
    """Greedy repair of the USP solution until the budget holds.

    Each round lengthens, by one TTI, the layer whose next transmission count
    is smallest (lowest index on ties) and drops it to the power that count
    needs.  ``trace`` collects ``(layer, t, power)`` for each committed step.
    """
    problem = _as_problem(stream, scenario, rate_model)
    if not power_budget > 0:
        raise ValueError("power budget must be positive")
    usp = solve_usp(problem)
    P = list(usp.powers)
    t = list(usp.transmissions)
    d_gop = problem.d_gop
    bound = hmsp_step_bound(problem.stream)
    steps = 0
    while math.fsum(P) > power_budget:
        cand = [t[l] + 1 if t[l] + 1 <= d_gop else math.inf for l in range(problem.n_layers)]
        if all(c == math.inf for c in cand):
            raise NoSolutionError(
                f"every layer at d_GoP and total power {math.fsum(P):.6g} W still exceeds "
                f"budget {power_budget:.6g} W")
        i = min(range(len(cand)), key=lambda l: (cand[l], l))
        t[i] = cand[i]
        P[i] = problem.min_power(i, t[i])
        steps += 1
        if trace is not None:
            trace.append((i, t[i], P[i]))
        assert steps <= bound, "H-MSP exceeded its step bound"
    allocs = tuple(LayerAllocation(p, n) for p, n in zip(P, t))
    return AllocationSolution(allocs, "hmsp", iterations=steps, budget=power_budget)


def solve_upa(stream, scenario=None, rate_model=None, power_budget: float = 40.0
              ) -> AllocationSolution:
    """Equal power per layer; each layer takes the fewest transmissions that cover it.

    Layers that stay uncovered at d_GoP keep t = d_GoP and are flagged.
    """
    problem = _as_problem(stream, scenario, rate_model)
    if not power_budget > 0:
        raise ValueError("power budget must be positive")
    L = problem.n_layers
    power = power_budget / L
    allocs, failed = [], []
    for l in range(L):
        need = problem.users_needed(l)
        k = problem.stream.layers[l].k_symbols
        t = _first_true(k, problem.d_gop, lambda t: problem.covered_users(l, power, t) >= need)
        failed.append(t is None)
        allocs.append(LayerAllocation(power, problem.d_gop if t is None else t))
    return AllocationSolution(tuple(allocs), "upa", feasible=not any(failed),
                              budget=power_budget, coverage_failed=tuple(failed))


def check_solution(solution: AllocationSolution, stream: VideoStream, scenario,
                   rate_model: RateModel, power_budget: float | None = None) -> list[str]:
    """Re-evaluate constraints from scratch; returns the list of violations.

    Uses only the forward chain rate -> received symbols -> decode probability
    per user, never the power curves the solvers rely on.
    """
    h = _channel(scenario)
    problems = []
    if len(solution.allocations) != len(stream.layers):
        return [f"solution has {len(solution.allocations)} layers, stream has {len(stream.layers)}"]
    for l, (layer, a) in enumerate(zip(stream.layers, solution.allocations)):
        if not layer.k_symbols <= a.transmissions <= stream.gop_budget_ttis:
            problems.append(f"layer {l + 1}: t = {a.transmissions} outside "
                            f"[{layer.k_symbols}, {stream.gop_budget_ttis}]")
        if not a.power_watts > 0:
            problems.append(f"layer {l + 1}: non-positive power {a.power_watts}")
        covered = 0
        for hu in h:
            r = rate(rate_model, a.power_watts, float(hu))
            n = received_symbols(r, a.transmissions, layer.symbol_size_bits, stream.tti_seconds)
            if decode_probability(layer.k_symbols, n, stream.field) >= stream.target_prob:
                covered += 1
        need = layer.coverage_target * len(h)
        if covered < need - 1e-9:
            problems.append(f"layer {l + 1}: {covered} users covered, need {need:g}")
    if power_budget is not None:
        total = math.fsum(a.power_watts for a in solution.allocations)
        if total > power_budget:
            problems.append(f"total power {total!r} W exceeds budget {power_budget!r} W")
    return problems

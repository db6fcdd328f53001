"""Corrected Shannon TB-rate model, its inverse, and the constrained LAD fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class UnreachableRateError(ValueError):
    """Target rate lies above the plateau of the rate model."""


class FitError(ValueError):
    pass


def db_to_linear(db):
    return 10 ** (np.asarray(db, dtype=float) / 10)


@dataclass(frozen=True)
class RateModel:
    alpha: float = 0.17
    beta: float = 0.06
    sigma_min_db: float = 6.33
    sigma_max_db: float = 31.32
    tb_bandwidth_hz: float = 9 * 180e3

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if not self.sigma_min_db < self.sigma_max_db:
            raise ValueError("sigma_min_db must be below sigma_max_db")
        if not self.tb_bandwidth_hz > 0:
            raise ValueError("TB bandwidth must be positive")

    @property
    def sigma_min(self) -> float:
        return float(db_to_linear(self.sigma_min_db))

    @property
    def sigma_max(self) -> float:
        return float(db_to_linear(self.sigma_max_db))

    @property
    def peak_rate(self) -> float:
        """Rate on the plateau above sigma_max."""
        return float(self.shannon(self.sigma_max))

    @property
    def floor_rate(self) -> float:
        """Lowest non-zero rate, reached at sigma_min."""
        return float(self.shannon(self.sigma_min))

    def shannon(self, sigma):
        return self.alpha * self.tb_bandwidth_hz * np.log2(1 + self.beta * sigma)

    def with_bandwidth(self, tb_bandwidth_hz: float) -> "RateModel":
        return replace(self, tb_bandwidth_hz=tb_bandwidth_hz)


@dataclass(frozen=True)
class RateSample:
    sinr_db: float
    rate_bps: float
    line: int | None = None

    def __post_init__(self):
        if self.rate_bps < 0:
            raise ValueError("rate_bps must be non-negative")


def rate(model: RateModel, p_watts, h):
    """TB reception rate at transmit power ``p_watts`` for channel factor ``h``.

    Zero below sigma_min, flat above sigma_max.  Vectorizes over numpy inputs.
    """
    sigma = np.asarray(h, dtype=float) * np.asarray(p_watts, dtype=float)
    out = np.where(
        sigma < model.sigma_min,
        0.0,
        model.shannon(np.minimum(sigma, model.sigma_max)),
    )
    return float(out) if out.ndim == 0 else out


def required_sinr(model: RateModel, target_bps: float) -> float:
    """Smallest SINR whose rate reaches ``target_bps``."""
    if not target_bps > 0:
        raise ValueError("target rate must be positive")
    if target_bps > model.peak_rate:
        raise UnreachableRateError(
            f"target {target_bps:.6g} bps exceeds peak rate {model.peak_rate:.6g} bps")
    sigma = math.expm1(target_bps / (model.alpha * model.tb_bandwidth_hz) * math.log(2)) / model.beta
    return min(max(sigma, model.sigma_min), model.sigma_max)


def min_power_for_rate(model: RateModel, target_bps: float, h: float) -> float:
    if not h > 0:
        raise ValueError("channel factor must be positive")
    power = required_sinr(model, target_bps) / h
    # nudge past floating-point shortfall at the boundary
    while rate(model, power, h) < target_bps:
        power = math.nextafter(power, math.inf)
    return power


# ---------------------------------------------------------------------------
# LAD regression


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: float
    residual: float
    used: int

    def model(self, sigma_min_db, sigma_max_db, tb_bandwidth_hz) -> RateModel:
        return RateModel(self.alpha, self.beta, sigma_min_db, sigma_max_db, tb_bandwidth_hz)


def _usable(samples, sigma_min_db, sigma_max_db):
    usable = [s for s in samples if sigma_min_db <= s.sinr_db <= sigma_max_db]
    if not usable:
        raise FitError("no samples inside [sigma_min, sigma_max]")
    for i, s in enumerate(usable):
        if s.rate_bps == 0:
            where = f"line {s.line}" if s.line is not None else f"sample {i}"
            raise FitError(f"zero-rate sample at {where} (sinr {s.sinr_db} dB) forces alpha = 0")
    return usable


def best_alpha(beta, sinr_lin, rates, W, invert=False):
    """Largest alpha keeping the curve under every sample (smallest above, if inverted)."""
    ratios = rates / (W * np.log2(1 + beta * sinr_lin))
    return ratios.max() if invert else ratios.min()


def lad_objective(beta, sinr_lin, rates, W, invert=False):
    alpha = best_alpha(beta, sinr_lin, rates, W, invert)
    return float(np.abs(rates - alpha * W * np.log2(1 + beta * sinr_lin)).sum())


def fit_lad(samples, W, sigma_min_db=6.33, sigma_max_db=31.32, invert_constraint=False,
            grid_points=64, beta_bounds=(1e-4, 10.0), rel_tol=1e-6) -> FitResult:
    """Least-absolute-deviation fit of ``alpha * W * log2(1 + beta * sinr)``.

    By default the fitted curve must stay at or below every usable sample;
    ``invert_constraint`` makes it stay at or above.  For fixed beta the
    optimal alpha is the tightest ratio, so only beta is searched: a
    log-spaced grid followed by golden-section refinement in log(beta).
    """
    if len(samples) < 2:
        raise FitError("need at least 2 samples")
    usable = _usable(samples, sigma_min_db, sigma_max_db)
    sinr_lin = db_to_linear(np.array([s.sinr_db for s in usable]))
    rates = np.array([s.rate_bps for s in usable], dtype=float)

    def f(log_beta):
        return lad_objective(math.exp(log_beta), sinr_lin, rates, W, invert_constraint)

    grid = np.linspace(math.log(beta_bounds[0]), math.log(beta_bounds[1]), grid_points)
    values = [f(g) for g in grid]
    i = int(np.argmin(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best_x, best_v = grid[i], values[i]

    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    # bracket width in log(beta) approximates relative width in beta
    while hi - lo > rel_tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    for x, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_x, best_v = x, v
    beta = math.exp(best_x)
    alpha = float(best_alpha(beta, sinr_lin, rates, W, invert_constraint))
    return FitResult(alpha, beta, best_v, len(usable))


def read_samples(path) -> list[RateSample]:
    """Parse ``sinr_db,rate_bps`` lines; '#' starts a comment."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise FitError(f"{path}:{lineno}: expected 'sinr_db,rate_bps', got {raw!r}")
        try:
            sinr, r = float(parts[0]), float(parts[1])
        except ValueError:
            raise FitError(f"{path}:{lineno}: non-numeric sample {raw!r}") from None
        if r < 0:
            raise FitError(f"{path}:{lineno}: negative rate")
        out.append(RateSample(sinr, r, line=lineno))
    return out


def write_samples(path, samples, header=None):
    lines = [f"# {h}" for h in (header or [])]
    lines += [f"{s.sinr_db!r},{s.rate_bps!r}" for s in samples]
    Path(path).write_text("\n".join(lines) + "\n")


def model_card(model: RateModel) -> str:
    return (
        f"alpha={model.alpha!r}\n"
        f"beta={model.beta!r}\n"
        f"sigma_min_db={model.sigma_min_db!r}\n"
        f"sigma_max_db={model.sigma_max_db!r}\n"
        f"W={model.tb_bandwidth_hz!r}\n"
    )


def synthetic_samples(alpha, beta, W, sinr_db, lift=0.0, every=2) -> list[RateSample]:
    """Samples on the curve, with every ``every``-th one lifted by a relative ``lift``.

    Lifted points sit strictly above the curve so the one-sided constraint is
    tight only on the unlifted ones.
    """
    out = []
    for i, s in enumerate(sinr_db):
        r = alpha * W * math.log2(1 + beta * 10 ** (s / 10))
        if lift and i % every == 1:
            r *= 1 + lift * (1 + (i % 5) / 5)
        out.append(RateSample(float(s), float(r)))
    return out

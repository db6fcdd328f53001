"""Sectioned ``key = value`` scenario configuration with Table-1 style defaults."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .allocator import VideoLayer, VideoStream
from .gf import FieldSpec, prime_power
from .propagation import RBP_BANDWIDTH_HZ, PropagationParams, build_scenario
from .rate_model import RateModel, fit_lad, read_samples

# highest-MCS transport block per PRB (I_TBS 26, one PRB): 712 bits per 1 ms TTI
PEAK_RATE_PER_RBP_BPS = 712e3


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(x) for x in _split(text)]


def _ints(text):
    return [int(x) for x in _split(text)]


def _split(text):
    return [x.strip() for x in text.replace(";", ",").split(",") if x.strip()]


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_ints(text):
    return None if text.strip().lower() in ("", "none", "auto") else _ints(text)


def _strs(text):
    return _split(text)


def _range_floats(text):
    """Comma list, or ``start:stop:step`` with inclusive stop."""
    text = text.strip()
    if ":" in text:
        a, b, c = (float(x) for x in text.split(":"))
        if c <= 0:
            raise ValueError("range step must be positive")
        n = int(math.floor((b - a) / c + 1e-9)) + 1
        return [a + i * c for i in range(max(n, 0))]
    return _floats(text)


@dataclass
class DeploymentConfig:
    isd_m: float = 500.0
    rings: int = 2
    sfn_site_indices: list | None = None
    sfn_count: int = 4
    interferer_power_w: float = 40.0
    axis_angle_deg: float = 0.0
    # interferers spread power over this band; "none" counts their full power
    system_bandwidth_hz: float | None = 20e6


@dataclass
class UsersConfig:
    count: int = 80
    spacing_m: float = 2.0
    start_m: float = 90.0
    extra_eval_positions: list = field(default_factory=lambda: _range_floats("272:496:8"))


@dataclass
class PropagationConfig:
    tx_gain_db: float = 14.0
    rx_gain_db: float = 0.0
    penetration_db: float = 20.0
    noise_dbm_per_hz: float = -168.0
    pathloss_intercept_db: float = 128.1
    pathloss_slope_db: float = 37.6
    min_coupling_m: float = 35.0
    eq3_interference_term: bool = False


@dataclass
class RateConfig:
    alpha: float = 0.17
    beta: float = 0.06
    sigma_min_db: float = 6.33
    sigma_max_db: float = 31.32
    samples: str | None = None
    # bandwidth the sample rates were measured over
    samples_w_hz: float = 9 * RBP_BANDWIDTH_HZ
    invert_constraint: bool = False
    # physical RBP width: noise and in-band interference
    rbp_bandwidth_hz: float = RBP_BANDWIDTH_HZ
    # rate-formula bandwidth per RBP; "none" derives it from peak_rate_per_rbp_bps
    w_per_rbp_hz: float | None = None
    peak_rate_per_rbp_bps: float = PEAK_RATE_PER_RBP_BPS


@dataclass
class VideoConfig:
    bitrate_bps: list | None = field(default_factory=lambda: [117.1e3, 402.5e3, 1506.3e3])
    k_symbols: list | None = None
    psnr_db: list = field(default_factory=lambda: [29.94, 34.78, 40.73])
    theta: list = field(default_factory=lambda: [0.3, 0.6, 0.9])
    symbol_size_bits: int = 4096
    q: int = 256
    phi: float = 0.1
    d_gop_ttis: int = 320
    t_mbms: float = 0.6
    tti_s: float = 1e-3


@dataclass
class RunConfig:
    strategies: list = field(default_factory=lambda: ["msp", "hmsp", "upa"])
    budgets_w: list = field(default_factory=lambda: [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0])
    rbp_counts: list = field(default_factory=lambda: [6, 9, 12])
    seed: int = 0
    psnr_budget_w: float = 40.0
    psnr_rbp: int = 9
    psnr_independent_layers: bool = False
    jobs: int = 1


_PARSERS = {
    "deployment": {
        "isd_m": float, "rings": int, "sfn_site_indices": _opt_ints, "sfn_count": int,
        "interferer_power_w": float, "axis_angle_deg": float, "system_bandwidth_hz": _opt_float,
    },
    "users": {
        "count": int, "spacing_m": float, "start_m": float,
        "extra_eval_positions": lambda t: [] if not t.strip() else _range_floats(t),
    },
    "propagation": {
        "tx_gain_db": float, "rx_gain_db": float, "penetration_db": float,
        "noise_dbm_per_hz": float, "pathloss_intercept_db": float, "pathloss_slope_db": float,
        "min_coupling_m": float, "eq3_interference_term": _bool,
    },
    "rate": {
        "alpha": float, "beta": float, "sigma_min_db": float, "sigma_max_db": float,
        "samples": lambda t: t.strip() or None, "samples_w_hz": float, "invert_constraint": _bool,
        "rbp_bandwidth_hz": float, "w_per_rbp_hz": _opt_float, "peak_rate_per_rbp_bps": float,
    },
    "video": {
        "bitrate_bps": lambda t: _floats(t) or None, "k_symbols": lambda t: _ints(t) or None,
        "psnr_db": _floats, "theta": _floats, "symbol_size_bits": int, "q": int,
        "phi": float, "d_gop_ttis": int, "t_mbms": float, "tti_s": float,
    },
    "run": {
        "strategies": _strs, "budgets_w": _range_floats, "rbp_counts": _ints, "seed": int,
        "psnr_budget_w": float, "psnr_rbp": int, "psnr_independent_layers": _bool, "jobs": int,
    },
}

_SECTIONS = {
    "deployment": DeploymentConfig, "users": UsersConfig, "propagation": PropagationConfig,
    "rate": RateConfig, "video": VideoConfig, "run": RunConfig,
}


@dataclass
class ScenarioConfig:
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    users: UsersConfig = field(default_factory=UsersConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    rate: RateConfig = field(default_factory=RateConfig)
    video: VideoConfig = field(default_factory=VideoConfig)
    run: RunConfig = field(default_factory=RunConfig)
    source: Path | None = None

    def validate(self):
        v = self.video
        n = len(v.k_symbols) if v.k_symbols else len(v.bitrate_bps or [])
        if n == 0:
            raise ConfigError("video: need bitrate_bps or k_symbols")
        if len(v.psnr_db) != n or len(v.theta) != n:
            raise ConfigError(f"video: psnr_db, theta and the layer list must have equal length ({n})")
        for th in v.theta:
            if not 0 < th <= 1:
                raise ConfigError(f"video: coverage_target out of (0,1]: {th}")
        if not 0 < v.phi <= 1:
            raise ConfigError(f"video: phi out of (0,1]: {v.phi}")
        if prime_power(v.q) is None:
            raise ConfigError(f"video: q = {v.q} is not a prime power")
        if v.symbol_size_bits <= 0 or v.d_gop_ttis <= 0 or v.t_mbms <= 0 or v.tti_s <= 0:
            raise ConfigError("video: symbol_size_bits, d_gop_ttis, t_mbms, tti_s must be positive")
        if self.users.count < 1 or self.users.spacing_m <= 0 or self.users.start_m < 0:
            raise ConfigError("users: count >= 1, spacing_m > 0, start_m >= 0 required")
        if self.deployment.isd_m <= 0 or self.deployment.rings < 0:
            raise ConfigError("deployment: isd_m > 0 and rings >= 0 required")
        r = self.rate
        if r.alpha <= 0 or r.beta <= 0 or r.sigma_min_db >= r.sigma_max_db:
            raise ConfigError("rate: alpha > 0, beta > 0 and sigma_min_db < sigma_max_db required")
        run = self.run
        for s in run.strategies:
            if s not in ("msp", "hmsp", "usp", "upa"):
                raise ConfigError(f"run: unknown strategy {s!r}")
        if not run.budgets_w or any(b <= 0 for b in run.budgets_w):
            raise ConfigError("run: budgets_w must be non-empty and positive")
        if not run.rbp_counts or any(c <= 0 for c in run.rbp_counts):
            raise ConfigError("run: rbp_counts must be non-empty and positive")
        try:
            self.stream()
        except ValueError as e:
            raise ConfigError(f"video: {e}") from None
        return self

    def stream(self) -> VideoStream:
        v = self.video
        fld = FieldSpec(v.q)
        if v.k_symbols:
            layers = [VideoLayer(k, v.symbol_size_bits, None, p, th)
                      for k, p, th in zip(v.k_symbols, v.psnr_db, v.theta)]
            return VideoStream(tuple(layers), v.d_gop_ttis, fld, v.phi, v.tti_s, v.t_mbms)
        return VideoStream.from_bitrates(v.bitrate_bps, v.psnr_db, v.theta, v.symbol_size_bits,
                                         v.d_gop_ttis, v.t_mbms, v.tti_s, fld, v.phi)

    def propagation_params(self) -> PropagationParams:
        p = self.propagation
        return PropagationParams(p.tx_gain_db, p.rx_gain_db, p.penetration_db, p.noise_dbm_per_hz,
                                 p.pathloss_intercept_db, p.pathloss_slope_db, p.min_coupling_m,
                                 p.eq3_interference_term)

    def scenario(self, rbp: int = 9):
        d, u = self.deployment, self.users
        return build_scenario(
            isd_m=d.isd_m, rings=d.rings, sfn_site_indices=d.sfn_site_indices,
            sfn_count=d.sfn_count, interferer_power_w=d.interferer_power_w,
            axis_direction=d.axis_angle_deg, user_count=u.count, spacing_m=u.spacing_m,
            start_m=u.start_m, extra_eval_distances=u.extra_eval_positions,
            params=self.propagation_params(), tb_bandwidth_hz=rbp * self.rate.rbp_bandwidth_hz,
            system_bandwidth_hz=d.system_bandwidth_hz)

    def rate_model(self) -> RateModel:
        """The configured model, or one fitted to ``rate.samples`` at one RBP of bandwidth."""
        r = self.rate
        if r.samples:
            path = Path(r.samples)
            if not path.is_absolute() and self.source is not None:
                path = self.source.parent / path
            fit = fit_lad(read_samples(path), r.samples_w_hz, r.sigma_min_db, r.sigma_max_db,
                          r.invert_constraint)
            w = self.rate_bandwidth_per_rbp(fit.alpha, fit.beta)
            return RateModel(fit.alpha, fit.beta, r.sigma_min_db, r.sigma_max_db, w)
        return RateModel(r.alpha, r.beta, r.sigma_min_db, r.sigma_max_db,
                         self.rate_bandwidth_per_rbp(r.alpha, r.beta))

    def rate_bandwidth_per_rbp(self, alpha=None, beta=None) -> float:
        """Rate-formula bandwidth per RBP.

        Unless set explicitly, chosen so the model's plateau above sigma_max
        equals the highest-MCS TB rate of one RBP.
        """
        r = self.rate
        if r.w_per_rbp_hz is not None:
            return r.w_per_rbp_hz
        alpha = r.alpha if alpha is None else alpha
        beta = r.beta if beta is None else beta
        spectral = alpha * math.log2(1 + beta * 10 ** (r.sigma_max_db / 10))
        return r.peak_rate_per_rbp_bps / spectral

    def canonical_text(self) -> str:
        """Fully resolved configuration, one ``key = value`` per line."""
        out = []
        for name in _SECTIONS:
            out.append(f"[{name}]")
            sec = getattr(self, name)
            for f in fields(sec):
                val = getattr(sec, f.name)
                if isinstance(val, list):
                    val = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in val)
                elif val is None:
                    val = "none"
                elif isinstance(val, float):
                    val = repr(val)
                out.append(f"{f.name} = {val}")
        return "\n".join(out) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _key_lines(text):
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif s and s[0] not in "#;" and section and ("=" in s or ":" in s):
            key = s.split("=", 1)[0].strip().lower()
            lines[(section, key)] = i
    return lines


def parse_config(text: str, source: Path | None = None) -> ScenarioConfig:
    where = str(source) if source else "<config>"
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text, source=where)
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}") from None
    key_lines = _key_lines(text)
    cfg = ScenarioConfig(source=source)
    for section in cp.sections():
        name = section.strip().lower()
        if name not in _SECTIONS:
            raise ConfigError(f"{where}: unknown section [{section}]")
        sec = getattr(cfg, name)
        for key, raw in cp.items(section):
            line = key_lines.get((name, key))
            at = f"{where}:{line}" if line else where
            parser = _PARSERS[name].get(key)
            if parser is None:
                raise ConfigError(f"{at}: unknown key '{key}' in [{name}]")
            try:
                setattr(sec, key, parser(raw))
            except (ValueError, TypeError) as e:
                raise ConfigError(f"{at}: bad value for {name}.{key}: {e}") from None
    if cfg.video.k_symbols:
        # explicit source-block sizes override the bitrate derivation
        cfg.video.bitrate_bps = None
    return cfg.validate()


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("sfnsleep") / "data" / name))


def resolve_config_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    cand = bundled_config(p.name)
    if cand.exists():
        return cand
    raise ConfigError(f"config file not found: {path}")


def load_config(path) -> ScenarioConfig:
    p = resolve_config_path(path)
    return parse_config(p.read_text(), p)

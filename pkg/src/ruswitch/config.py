"""Scenario configuration: parsing, validation, defaults, serialization.

The config file is INI-style text with the fixed sections
``[waveform] [channel] [pa] [circuit] [optimizer] [sweep]``.  Unknown
sections or keys are rejected (fail closed).  A ``ScenarioConfig`` is
immutable after load and safe to share across workers.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

SUPPORTED_QAM_ORDERS = (4, 16, 64, 256)
MAPPING_SCHEMES = ("split-localized", "localized")

THERMAL_NOISE_DBM_HZ = -174.0


class ConfigError(ValueError):
    """Raised for unparseable files, unknown keys, or invariant violations."""


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def lin_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError("dB conversion needs a positive value")
    return 10.0 * math.log10(x)


def dbm_to_w(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w / 1e-3)


@dataclass(frozen=True)
class PaProfile:
    """Amplifier description: saturation point, Rapp shape, efficiency law."""

    p_sat_dbm: float = 44.0
    smoothness: float = 3.0        # Rapp AM/AM exponent, > 0
    am_pm_alpha: float = 190.0 * math.pi / 180.0
    am_pm_beta: float = 0.1
    am_pm_q1: float = 3.8
    am_pm_q2: float = 2.5
    eta_sat: float = 0.45          # drain efficiency at saturation, in (0, 1]
    p_idle_w: float = 3.5

    @property
    def p_sat_w(self) -> float:
        return dbm_to_w(self.p_sat_dbm)


@dataclass(frozen=True)
class CircuitProfile:
    """Static front-end power draws, all in watts."""

    p_lo_w: float = 0.5
    p_filt_w: float = 0.02
    p_mix_w: float = 0.38
    p_dac_w: float = 3.5
    p_pa_idle_w: float = 3.5

    @property
    def per_chain_w(self) -> float:
        """Power added by each active transmit chain."""
        return self.p_filt_w + self.p_mix_w + self.p_dac_w + self.p_pa_idle_w

    def total_w(self, m_act: int) -> float:
        return self.p_lo_w + m_act * self.per_chain_w


@dataclass(frozen=True)
class SweepGrid:
    """Experiment grids shared by the CLI commands."""

    trials: int = 500
    seed: int = 1
    se_min: float = 0.25
    se_max: float = 10.0
    se_points: int = 40
    channel_draws: int = 1000
    backoff_min_db: float = 2.0
    backoff_max_db: float = 10.0
    backoff_step_db: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    # [waveform]
    carrier_frequency_hz: float = 3.5e9   # informational only, never enters the math
    subcarrier_spacing_hz: float = 15e3
    num_resource_blocks: int = 100
    allocated_tones: int = 1200
    fft_size: int = 2048
    bandwidth_hz: float = 20e6
    modulation_order: int = 64
    mapping_scheme: str = "split-localized"
    guard_tones: int = 100
    oversample_factor: int = 1
    papr_oversample: int = 4
    # [channel]
    delay_spread_ns: float = 300.0
    evm_snr_db: float = 40.0
    noise_figure_db: float = 9.0
    large_scale_gain_db: float = -104.0
    num_tx_antennas: int = 2
    num_rx_antennas: int = 2
    # [optimizer]
    overhead_factor: float = 0.9
    evm_requirement_db: float = -31.0
    sweep_evm_req_db: float = -28.0
    p_min_w: float = 0.0
    # nested profiles
    pa: PaProfile = PaProfile()
    circuit: CircuitProfile = CircuitProfile()
    sweep: SweepGrid = SweepGrid()

    @property
    def trials(self) -> int:
        return self.sweep.trials

    @property
    def seed(self) -> int:
        return self.sweep.seed

    @property
    def noise_psd_w_hz(self) -> float:
        """One-sided noise density: thermal floor plus the configured figure."""
        return 1e-3 * 10.0 ** ((THERMAL_NOISE_DBM_HZ + self.noise_figure_db) / 10.0)

    @property
    def noise_power_w(self) -> float:
        return self.noise_psd_w_hz * self.bandwidth_hz

    @property
    def large_scale_gain(self) -> float:
        return db_to_lin(self.large_scale_gain_db)

    @property
    def sample_rate_hz(self) -> float:
        return self.fft_size * self.subcarrier_spacing_hz

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.modulation_order)))


# section -> key -> (dataclass attribute path, type)
_SCHEMA: dict[str, dict[str, tuple[str, type]]] = {
    "waveform": {
        "carrier_frequency_hz": ("carrier_frequency_hz", float),
        "subcarrier_spacing_hz": ("subcarrier_spacing_hz", float),
        "num_resource_blocks": ("num_resource_blocks", int),
        "allocated_tones": ("allocated_tones", int),
        "fft_size": ("fft_size", int),
        "bandwidth_hz": ("bandwidth_hz", float),
        "modulation_order": ("modulation_order", int),
        "mapping_scheme": ("mapping_scheme", str),
        "guard_tones": ("guard_tones", int),
        "oversample_factor": ("oversample_factor", int),
        "papr_oversample": ("papr_oversample", int),
    },
    "channel": {
        "delay_spread_ns": ("delay_spread_ns", float),
        "evm_snr_db": ("evm_snr_db", float),
        "noise_figure_db": ("noise_figure_db", float),
        "large_scale_gain_db": ("large_scale_gain_db", float),
        "num_tx_antennas": ("num_tx_antennas", int),
        "num_rx_antennas": ("num_rx_antennas", int),
    },
    "pa": {
        "p_sat_dbm": ("pa.p_sat_dbm", float),
        "smoothness": ("pa.smoothness", float),
        "am_pm_alpha": ("pa.am_pm_alpha", float),
        "am_pm_beta": ("pa.am_pm_beta", float),
        "am_pm_q1": ("pa.am_pm_q1", float),
        "am_pm_q2": ("pa.am_pm_q2", float),
        "eta_sat": ("pa.eta_sat", float),
        "p_idle_w": ("pa.p_idle_w", float),
    },
    "circuit": {
        "p_lo_w": ("circuit.p_lo_w", float),
        "p_filt_w": ("circuit.p_filt_w", float),
        "p_mix_w": ("circuit.p_mix_w", float),
        "p_dac_w": ("circuit.p_dac_w", float),
        "p_pa_idle_w": ("circuit.p_pa_idle_w", float),
    },
    "optimizer": {
        "overhead_factor": ("overhead_factor", float),
        "evm_requirement_db": ("evm_requirement_db", float),
        "sweep_evm_req_db": ("sweep_evm_req_db", float),
        "p_min_w": ("p_min_w", float),
    },
    "sweep": {
        "trials": ("sweep.trials", int),
        "seed": ("sweep.seed", int),
        "se_min": ("sweep.se_min", float),
        "se_max": ("sweep.se_max", float),
        "se_points": ("sweep.se_points", int),
        "channel_draws": ("sweep.channel_draws", int),
        "backoff_min_db": ("sweep.backoff_min_db", float),
        "backoff_max_db": ("sweep.backoff_max_db", float),
        "backoff_step_db": ("sweep.backoff_step_db", float),
    },
}


def _coerce(section: str, key: str, raw: str, typ: type):
    try:
        if typ is int:
            as_float = float(raw)
            as_int = int(as_float)
            if as_int != as_float:
                raise ValueError("not an integer")
            return as_int
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from exc


def _require(cond: bool, field: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(f"{field}: violates constraint ({constraint})")


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every invariant; returns the config unchanged when valid."""
    m, n = cfg.allocated_tones, cfg.fft_size
    _require(cfg.subcarrier_spacing_hz > 0, "subcarrier_spacing_hz", "must be > 0")
    _require(cfg.num_resource_blocks > 0, "num_resource_blocks", "must be > 0")
    _require(n >= 1, "fft_size", "must be >= 1")
    _require(m == 12 * cfg.num_resource_blocks, "allocated_tones",
             f"must equal 12 x num_resource_blocks = {12 * cfg.num_resource_blocks}")
    _require(m <= n, "allocated_tones", "must not exceed fft_size")
    _require(cfg.bandwidth_hz > 0, "bandwidth_hz", "must be > 0")
    _require(cfg.modulation_order in SUPPORTED_QAM_ORDERS, "modulation_order",
             f"must be one of {SUPPORTED_QAM_ORDERS}")
    _require(cfg.mapping_scheme in MAPPING_SCHEMES, "mapping_scheme",
             f"must be one of {MAPPING_SCHEMES}")
    if cfg.mapping_scheme == "split-localized":
        _require(m % 2 == 0, "allocated_tones", "split-localized mapping needs an even count")
        _require(cfg.guard_tones >= 0 and 2 * cfg.guard_tones + m <= n, "guard_tones",
                 "band-edge guards plus the allocation must fit the grid")
    _require(cfg.oversample_factor >= 1, "oversample_factor", "must be >= 1")
    _require(cfg.papr_oversample >= 1, "papr_oversample", "must be >= 1")
    _require(cfg.delay_spread_ns >= 0, "delay_spread_ns", "must be >= 0")
    _require(math.isfinite(cfg.noise_figure_db), "noise_figure_db", "must be finite")
    _require(math.isfinite(cfg.large_scale_gain_db), "large_scale_gain_db", "must be finite")
    _require(cfg.num_tx_antennas == 2 and cfg.num_rx_antennas == 2,
             "num_tx_antennas/num_rx_antennas",
             "the closed-form link budget is specific to a 2x2 array")
    _require(0 < cfg.overhead_factor <= 1, "overhead_factor", "must lie in (0, 1]")
    _require(cfg.evm_requirement_db < 0, "evm_requirement_db", "must be negative (dB)")
    _require(cfg.sweep_evm_req_db < 0, "sweep_evm_req_db", "must be negative (dB)")
    _require(cfg.p_min_w >= 0, "p_min_w", "must be >= 0")
    _require(cfg.pa.smoothness > 0, "pa.smoothness", "must be > 0")
    _require(math.isfinite(cfg.pa.p_sat_dbm), "pa.p_sat_dbm", "must be finite")
    _require(0 < cfg.pa.eta_sat <= 1, "pa.eta_sat", "must lie in (0, 1]")
    _require(cfg.pa.p_idle_w >= 0, "pa.p_idle_w", "must be >= 0")
    for name in ("p_lo_w", "p_filt_w", "p_mix_w", "p_dac_w", "p_pa_idle_w"):
        _require(getattr(cfg.circuit, name) >= 0, f"circuit.{name}", "must be >= 0")
    _require(cfg.sweep.trials >= 1, "sweep.trials", "must be >= 1")
    _require(cfg.sweep.seed >= 0, "sweep.seed", "must be >= 0")
    _require(cfg.sweep.se_points >= 2, "sweep.se_points", "must be >= 2")
    _require(0 < cfg.sweep.se_min < cfg.sweep.se_max, "sweep.se_min/se_max",
             "need 0 < se_min < se_max")
    _require(cfg.sweep.channel_draws >= 1, "sweep.channel_draws", "must be >= 1")
    _require(cfg.sweep.backoff_step_db > 0, "sweep.backoff_step_db", "must be > 0")
    _require(cfg.sweep.backoff_min_db <= cfg.sweep.backoff_max_db,
             "sweep.backoff_min_db", "must not exceed backoff_max_db")
    return cfg


def _build(values: dict[str, object]) -> ScenarioConfig:
    pa_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("pa.")}
    circ_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("circuit.")}
    sweep_kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("sweep.")}
    top = {k: v for k, v in values.items() if "." not in k}
    return ScenarioConfig(pa=PaProfile(**pa_kwargs), circuit=CircuitProfile(**circ_kwargs),
                          sweep=SweepGrid(**sweep_kwargs), **top)


def _parse_ini(text: str, source: str) -> dict[str, object]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: parse failure: {exc}") from exc
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in section [{section}]")
            attr, typ = _SCHEMA[section][key]
            values[attr] = _coerce(section, key, raw, typ)
    return values


def _apply_overrides(values: dict[str, object], overrides: Iterable[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        target, raw = item.split("=", 1)
        target = target.strip()
        if "." not in target:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        section, key = target.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"override {item!r}: unknown key {section}.{key}")
        attr, typ = _SCHEMA[section][key]
        values[attr] = _coerce(section, key, raw.strip(), typ)


def _default_values() -> dict[str, object]:
    text = resources.files("ruswitch").joinpath("data/default.ini").read_text("utf-8")
    return _parse_ini(text, "default.ini")


def load_scenario(path: str | Path | None = None,
                  overrides: Sequence[str] = ()) -> ScenarioConfig:
    """Load a scenario file, apply overrides, validate.

    Defaults fill any key the file omits; overrides (``section.key=value``)
    win over file values.  ``path=None`` loads the bundled default file.
    """
    values = _default_values()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(_parse_ini(p.read_text("utf-8"), str(p)))
    _apply_overrides(values, overrides)
    return validate(_build(values))


def default_scenario() -> ScenarioConfig:
    """The bundled evaluation setup (20 MHz, 64QAM, TDL-C, 44 dBm PA)."""
    return load_scenario(None, ())


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    """Write ``cfg`` as a config file that reloads field-for-field equal."""
    lines: list[str] = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (attr, typ) in keys.items():
            obj: object = cfg
            for part in attr.split("."):
                obj = getattr(obj, part)
            lines.append(f"{key} = {obj!r}" if typ is not str else f"{key} = {obj}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def config_digest(cfg: ScenarioConfig) -> str:
    """Stable hash of the effective configuration."""
    import hashlib

    parts = []
    for section, keys in _SCHEMA.items():
        for key, (attr, _typ) in keys.items():
            obj: object = cfg
            for part in attr.split("."):
                obj = getattr(obj, part)
            parts.append(f"{section}.{key}={obj!r}")
    return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()

"""Pipeline configuration: one flat INI file, every key also a command-line flag."""

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import bpnn
from .bagging import BaggingConfig
from .dataset import DayRegimes, PowerCurveParams


def _opt(section, default, help=""):
    return field(default=default, metadata={"section": section, "help": help})


@dataclass(frozen=True)
class PipelineConfig:
    # data source
    source: str = _opt("data", "synthetic", "'synthetic' or a CSV file path")
    schema: str = _opt("data", "", "column mapping, e.g. 'wind_speed=WS,power=P'")
    # synthetic generator
    synth_seed: int = _opt("synth", 2024)
    synth_days: int = _opt("synth", 120)
    cut_in: float = _opt("synth", PowerCurveParams.cut_in)
    rated_speed: float = _opt("synth", PowerCurveParams.rated_speed)
    cut_out: float = _opt("synth", PowerCurveParams.cut_out)
    rated_power: float = _opt("synth", PowerCurveParams.rated_power)
    noise_std: float = _opt("synth", 40.0, "power noise in kW")
    regimes: bool = _opt("synth", True, "persistent day types (frontal/convective/stable)")
    regime_dwell_days: float = _opt("synth", 3.0)
    # cleaning
    clean: bool = _opt("clean", True)
    # feature selection
    relief_m: int = _opt("relief", 0, "anchor count, 0 = all samples")
    relief_k: int = _opt("relief", 10)
    relief_sigma: float = _opt("relief", 20.0)
    relief_threshold: float = _opt("relief", 0.01)
    forecastable: str = _opt("relief", "wind_speed,blade_angle,ambient_temp")
    forced_include: str = _opt("relief", "wind_speed,ambient_temp")
    # similar days
    use_clustering: bool = _opt("cluster", True)
    clusters: int = _opt("cluster", 3)
    restarts: int = _opt("cluster", 10)
    min_intersection: int = _opt("cluster", 5)
    kmeans_max_iter: int = _opt("cluster", 300)
    # network
    hidden_dim: int = _opt("net", 0, "0 = 2M+1")
    learning_rate: float = _opt("net", 20.0, "step on the batch-mean gradient")
    max_epochs: int = _opt("net", 20000)
    target_error: float = _opt("net", 1e-4)
    weight_init_range: float = _opt("net", 0.5)
    sweep_hidden: bool = _opt("net", False)
    # bagging
    bagging: bool = _opt("bagging", True)
    ensemble_size: int = _opt("bagging", 10)
    bootstrap_fraction: float = _opt("bagging", 1.0)
    workers: int = _opt("bagging", 1)
    # run
    granularity: str = _opt("run", "hourly", "'hourly' or '10min'")
    horizon_hours: int = _opt("run", 24)
    forecast_day: int = _opt("run", -1, "day index to forecast; negative counts from the end")
    history_days: int = _opt("run", 0, "historical days available for clustering, 0 = all")
    baseline_window: int = _opt("run", 29, "training days of the non-clustered baseline")
    seed: int = _opt("run", 0)
    weather_noise_std: float = _opt("run", 0.0, "noise std added to forecast-day wind speed and temperature")
    output_dir: str = _opt("run", "runs/latest")

    def __post_init__(self):
        if self.granularity not in ("hourly", "10min"):
            raise ValueError("granularity must be 'hourly' or '10min'")
        if self.synth_days < 1:
            raise ValueError("synth_days must be >= 1")
        if not 1 <= self.horizon_hours <= 24:
            raise ValueError("horizon_hours must lie in 1..24")
        if self.clusters < 1 or self.restarts < 1:
            raise ValueError("clusters and restarts must be >= 1")
        self.curve_params()
        self.day_regimes()

    # ---- typed views -------------------------------------------------
    def curve_params(self):
        return PowerCurveParams(self.cut_in, self.rated_speed, self.cut_out, self.rated_power, self.noise_std)

    def day_regimes(self):
        if not self.regimes:
            return None
        return DayRegimes(mean_dwell_days=self.regime_dwell_days)

    def schema_map(self):
        out = {}
        for item in _split(self.schema):
            key, _, col = item.partition("=")
            out[key.strip()] = col.strip()
        return out

    def net_config(self, input_dim, seed):
        return bpnn.NetConfig(input_dim, self.hidden_dim, self.learning_rate, self.max_epochs,
                              self.target_error, seed, self.weight_init_range)

    def bagging_config(self, net_config, master_seed):
        return BaggingConfig(self.ensemble_size, self.bootstrap_fraction, net_config, master_seed)

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _split(text):
    return [s.strip() for s in text.split(",") if s.strip()]


FIELDS = {f.name: f for f in fields(PipelineConfig)}


def parse_value(name, text):
    kind = FIELDS[name].type
    kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, kind)
    if kind is bool:
        low = str(text).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {text!r}")
    return kind(text)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_ini(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    for f in fields(cfg):
        section = f.metadata["section"]
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, f.name, format_value(getattr(cfg, f.name)))
    return parser


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        to_ini(cfg).write(fh)
    return Path(path)


def read_config_file(path):
    """Key/value overrides found in an INI file (sections are informational)."""
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"no such config file: {path}")
    out = {}
    for section in parser.sections():
        for key, text in parser.items(section):
            if key not in FIELDS:
                raise ValueError(f"{path}: unknown key {key!r} in section [{section}]")
            out[key] = parse_value(key, text)
    return out


def load_config(path=None, overrides=None):
    """Defaults, then file values, then explicit overrides."""
    values = read_config_file(path) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig(**values)


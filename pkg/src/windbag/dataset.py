"""SCADA-style records: CSV ingestion, hourly/daily aggregation and a synthetic generator.

Timestamps are abstract integer minutes; a dataset is a list of
:class:`SampleRecord` spaced 10 minutes apart.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

STEP_MINUTES = 10
RECORDS_PER_HOUR = 6
RECORDS_PER_DAY = 144

REQUIRED_FIELDS = ("timestamp", "wind_speed", "blade_angle", "ambient_temp", "power")
DEFAULT_SCHEMA = {name: name for name in REQUIRED_FIELDS}


class DatasetError(ValueError):
    """Raised for malformed or insufficient input data."""


class DuplicateTimestampError(DatasetError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    timestamp: int
    wind_speed: float
    blade_angle: float
    ambient_temp: float
    power: float
    extra_features: tuple = ()

    def extra(self, name):
        for key, value in self.extra_features:
            if key == name:
                return value
        raise KeyError(name)


@dataclass(frozen=True)
class Signature1:
    ws_max: float
    ws_min: float
    ws_mean: float
    t_max: float
    t_min: float
    t_mean: float

    def as_array(self):
        return np.array([self.ws_max, self.ws_min, self.ws_mean, self.t_max, self.t_min, self.t_mean])


@dataclass(frozen=True)
class Signature2:
    wp_max: float
    wp_min: float
    wp_mean: float

    def as_array(self):
        return np.array([self.wp_max, self.wp_min, self.wp_mean])


def signature1(records):
    ws = np.array([r.wind_speed for r in records], dtype=float)
    t = np.array([r.ambient_temp for r in records], dtype=float)
    return Signature1(
        float(ws.max()), float(ws.min()), float(_bounded_mean(ws)),
        float(t.max()), float(t.min()), float(_bounded_mean(t)),
    )


def signature2(records):
    p = np.array([r.power for r in records], dtype=float)
    return Signature2(float(p.max()), float(p.min()), float(_bounded_mean(p)))


def _bounded_mean(x):
    # a constant series must report mean == min == max bit-exactly
    return min(max(x.mean(), x.min()), x.max())


@dataclass(frozen=True)
class DayUnit:
    day_index: int
    records: tuple
    s1: Signature1
    s2: Signature2

    @classmethod
    def from_records(cls, day_index, records):
        records = tuple(records)
        if len(records) != RECORDS_PER_DAY:
            raise DatasetError(f"a day needs {RECORDS_PER_DAY} records, got {len(records)}")
        return cls(day_index, records, signature1(records), signature2(records))


@dataclass(frozen=True)
class PowerCurveParams:
    """Turbine power curve used by the synthetic generator (speeds in m/s, power in kW)."""

    cut_in: float = 3.0
    rated_speed: float = 12.0
    cut_out: float = 25.0
    rated_power: float = 2000.0
    noise_std: float = 0.0

    def __post_init__(self):
        if not 0 < self.cut_in < self.rated_speed < self.cut_out:
            raise ValueError("need 0 < cut_in < rated_speed < cut_out")
        if self.rated_power <= 0:
            raise ValueError("rated_power must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


@dataclass(frozen=True)
class DayRegime:
    """One synthetic weather/operating day type.

    Wind speed: day mean ``ws_mean`` plus a diurnal swing ``ws_diurnal``
    peaking at 15:00 (negative values peak at 03:00). Temperature:
    ``temp_offset`` over the seasonal drift with a diurnal swing
    ``temp_diurnal``. ``power_factor`` scales the turbine's curve output
    (curtailment, shear losses).
    """

    name: str
    ws_mean: float
    ws_diurnal: float
    temp_offset: float
    temp_diurnal: float
    power_factor: float = 1.0

    def __post_init__(self):
        if not 0 < self.power_factor <= 1:
            raise ValueError("power_factor must lie in (0, 1]")


DEFAULT_REGIMES = (
    DayRegime("frontal", ws_mean=10.5, ws_diurnal=0.5, temp_offset=-3.0, temp_diurnal=2.5, power_factor=0.7),
    DayRegime("convective", ws_mean=6.5, ws_diurnal=2.5, temp_offset=4.0, temp_diurnal=7.0, power_factor=1.0),
    DayRegime("stable", ws_mean=5.5, ws_diurnal=-1.5, temp_offset=-2.0, temp_diurnal=5.0, power_factor=0.85),
)


@dataclass(frozen=True)
class DayRegimes:
    """Markov chain over :class:`DayRegime` types for the synthetic generator.

    A day keeps the previous day's type with probability
    ``1 - 1/mean_dwell_days`` and otherwise redraws uniformly.
    """

    regimes: tuple = DEFAULT_REGIMES
    mean_dwell_days: float = 3.0

    def __post_init__(self):
        if not self.regimes:
            raise ValueError("need at least one regime")
        if self.mean_dwell_days < 1:
            raise ValueError("mean_dwell_days must be >= 1")


@dataclass(frozen=True)
class IngestResult:
    records: list
    rejects: list = field(default_factory=list)  # (csv line number, reason)


def power_curve(wind_speed, params):
    """Noise-free turbine output for ``wind_speed`` (scalar or array)."""
    ws = np.asarray(wind_speed, dtype=float)
    ci, rs, co = params.cut_in, params.rated_speed, params.cut_out
    frac = (ws**3 - ci**3) / (rs**3 - ci**3)
    out = np.where(ws < ci, 0.0, np.where(ws < rs, params.rated_power * frac, params.rated_power))
    out = np.where(ws > co, 0.0, out)
    return out if out.ndim else float(out)


def ingest_csv(path, schema=None, extras=None):
    """Read SCADA records from a headed CSV file.

    ``schema`` maps the required fields to column names (missing keys map to
    themselves). ``extras`` lists auxiliary columns to carry along; by default
    every unmapped column is carried. Rows with an unparseable required field
    are returned in ``rejects`` rather than dropped silently.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    cols = dict(DEFAULT_SCHEMA)
    cols.update(schema or {})

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [f"{name} (column {cols[name]!r})" for name in REQUIRED_FIELDS if cols[name] not in header]
        if missing:
            raise DatasetError(f"{path}: missing required column(s): {', '.join(missing)}")
        if extras is None:
            extras = [c for c in header if c not in cols.values()]
        else:
            unknown = [c for c in extras if c not in header]
            if unknown:
                raise DatasetError(f"{path}: missing extra column(s): {', '.join(unknown)}")

        parsed = []
        rejects = []
        for line_no, row in enumerate(reader, start=2):
            try:
                ts = int(row[cols["timestamp"]])
                vals = [float(row[cols[name]]) for name in REQUIRED_FIELDS[1:]]
            except (TypeError, ValueError):
                bad = [n for n in REQUIRED_FIELDS if not _parses(row[cols[n]], int if n == "timestamp" else float)]
                rejects.append((line_no, f"unparseable {', '.join(bad)}"))
                continue
            ex = tuple((c, _float_or_nan(row[c])) for c in extras)
            parsed.append((ts, line_no, vals, ex))

    parsed.sort(key=lambda item: item[0])
    for prev, cur in zip(parsed, parsed[1:]):
        if prev[0] == cur[0]:
            raise DuplicateTimestampError(
                f"{path}: duplicate timestamp {cur[0]} on line {cur[1]} (first seen on line {prev[1]})"
            )
    for line_no, reason in rejects:
        logger.warning("%s line %d rejected: %s", path, line_no, reason)

    records = [
        SampleRecord(ts, vals[0], vals[1] % 360.0, vals[2], vals[3], ex)
        for ts, _, vals, ex in parsed
    ]
    return IngestResult(records, rejects)


def _parses(text, kind):
    try:
        kind(text)
    except (TypeError, ValueError):
        return False
    return True


def _float_or_nan(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        return math.nan


def write_csv(records, path, schema=None):
    """Write records in the ingestion schema; float formatting is repr-exact."""
    cols = dict(DEFAULT_SCHEMA)
    cols.update(schema or {})
    extra_names = [name for name, _ in records[0].extra_features] if records else []
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([cols[n] for n in REQUIRED_FIELDS] + extra_names)
        for r in records:
            writer.writerow(
                [r.timestamp, repr(r.wind_speed), repr(r.blade_angle), repr(r.ambient_temp), repr(r.power)]
                + [repr(v) for _, v in r.extra_features]
            )
    return path


def check_spacing(records):
    ts = np.array([r.timestamp for r in records], dtype=np.int64)
    if len(ts) > 1 and np.any(np.diff(ts) != STEP_MINUTES):
        bad = int(np.flatnonzero(np.diff(ts) != STEP_MINUTES)[0])
        raise DatasetError(
            f"records must be spaced {STEP_MINUTES} minutes apart; gap after timestamp {ts[bad]}"
        )


def fill_grid(records):
    """Insert NaN placeholder records for missing 10-minute slots.

    Placeholders are later repaired by :func:`windbag.preprocess.clean`.
    Returns ``(records, inserted_timestamps)``.
    """
    if not records:
        return [], []
    out = [records[0]]
    inserted = []
    names = [name for name, _ in records[0].extra_features]
    nan_extras = tuple((n, math.nan) for n in names)
    for rec in records[1:]:
        gap = rec.timestamp - out[-1].timestamp
        if gap % STEP_MINUTES:
            raise DatasetError(f"timestamp {rec.timestamp} is off the {STEP_MINUTES}-minute grid")
        for ts in range(out[-1].timestamp + STEP_MINUTES, rec.timestamp, STEP_MINUTES):
            out.append(SampleRecord(ts, math.nan, math.nan, math.nan, math.nan, nan_extras))
            inserted.append(ts)
        out.append(rec)
    return out, inserted


def aggregate_hourly(records):
    """Collapse 10-minute records into hourly ones.

    Power is summed over the six slots; wind speed, temperature and extras
    are averaged; blade angle is averaged through its sine/cosine
    components. Returns ``(hourly_records, dropped_count)``.
    """
    if len(records) < RECORDS_PER_HOUR:
        raise DatasetError(f"need at least {RECORDS_PER_HOUR} records for one hour, got {len(records)}")
    check_spacing(records)
    n_hours = len(records) // RECORDS_PER_HOUR
    dropped = len(records) - n_hours * RECORDS_PER_HOUR
    if dropped:
        logger.warning("aggregate_hourly: dropping %d trailing record(s) of a partial hour", dropped)

    out = []
    for h in range(n_hours):
        chunk = records[h * RECORDS_PER_HOUR:(h + 1) * RECORDS_PER_HOUR]
        rad = np.radians([r.blade_angle for r in chunk])
        angle = math.degrees(math.atan2(np.sin(rad).mean(), np.cos(rad).mean())) % 360.0
        extras = tuple(
            (name, float(np.mean([r.extra_features[i][1] for r in chunk])))
            for i, (name, _) in enumerate(chunk[0].extra_features)
        )
        out.append(SampleRecord(
            timestamp=chunk[0].timestamp,
            wind_speed=float(np.mean([r.wind_speed for r in chunk])),
            blade_angle=angle,
            ambient_temp=float(np.mean([r.ambient_temp for r in chunk])),
            power=float(sum(r.power for r in chunk)),
            extra_features=extras,
        ))
    return out, dropped


def slice_days(records):
    """Cut 10-minute records into consecutive 144-record days.

    Returns ``(days, dropped_count)``; a trailing partial day is dropped.
    """
    if len(records) < RECORDS_PER_DAY:
        raise DatasetError(f"need at least {RECORDS_PER_DAY} records for one day, got {len(records)}")
    check_spacing(records)
    n_days = len(records) // RECORDS_PER_DAY
    dropped = len(records) - n_days * RECORDS_PER_DAY
    if dropped:
        logger.warning("slice_days: dropping %d trailing record(s) of a partial day", dropped)
    days = [
        DayUnit.from_records(d, records[d * RECORDS_PER_DAY:(d + 1) * RECORDS_PER_DAY])
        for d in range(n_days)
    ]
    return days, dropped


def synth_generate(seed, days, params=None, regimes=None):
    """Generate ``days`` days of seeded synthetic 10-minute SCADA records.

    See :func:`synth_arrays` for the generating process.
    """
    a = synth_arrays(seed, days, params, regimes)
    n = len(a["wind_speed"])
    return [
        SampleRecord(
            timestamp=int(i * STEP_MINUTES),
            wind_speed=float(a["wind_speed"][i]),
            blade_angle=float(a["blade_angle"][i]),
            ambient_temp=float(a["ambient_temp"][i]),
            power=float(a["power"][i]),
            extra_features=(("machine_temp", float(a["machine_temp"][i])),
                            ("bearing_temp", float(a["bearing_temp"][i]))),
        )
        for i in range(n)
    ]


def synth_arrays(seed, days, params=None, regimes=None):
    """Channel arrays behind :func:`synth_generate`, plus the day-level ``state``.

    Wind speed is a day-level AR(1) mean plus a diurnal cycle plus a
    10-minute AR(1) fluctuation. Power follows :func:`power_curve` with
    Gaussian noise clipped at zero. Temperature is a diurnal sinusoid over a
    mean-reverting day-level anomaly, blade angle a random walk. Machine-side and bearing
    temperatures track the turbine's own output.

    With ``regimes`` (a :class:`DayRegimes`), each day draws a type from a
    persistent Markov chain that sets its wind and temperature profile and
    scales its curve output; ``state`` holds the type index per day (None
    without regimes).
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    params = params or PowerCurveParams()
    rng = np.random.default_rng(seed)
    n = days * RECORDS_PER_DAY
    t = np.arange(n)
    hour = (t % RECORDS_PER_DAY) / RECORDS_PER_HOUR
    # day positions with samples at midday, so interpolated day levels stay smooth
    day_pos = (t + 0.5) / RECORDS_PER_DAY - 0.5
    afternoon = np.sin(2 * np.pi * (hour - 9.0) / 24.0)

    state = None
    if regimes is None:
        ws_day, ws_amp = np.full(days, 7.5), np.full(days, 1.2)
        t_off, t_amp = np.zeros(days), np.full(days, 6.0)
        factor = np.ones(days)
        ar_std = 2.0
    else:
        state = np.empty(days, dtype=int)
        state[0] = rng.integers(len(regimes.regimes))
        stay = 1.0 - 1.0 / regimes.mean_dwell_days
        for d in range(1, days):
            state[d] = state[d - 1] if rng.random() < stay else rng.integers(len(regimes.regimes))
        pick = lambda attr: np.array([getattr(regimes.regimes[s], attr) for s in state], dtype=float)
        ws_day, ws_amp = pick("ws_mean"), pick("ws_diurnal")
        t_off, t_amp = pick("temp_offset"), pick("temp_diurnal")
        factor = pick("power_factor")
        ar_std = 1.2

    level = np.empty(days)
    level[0] = rng.normal(0.0, ar_std)
    for d in range(1, days):
        level[d] = 0.6 * level[d - 1] + rng.normal(0.0, ar_std)
    smooth = lambda per_day: np.interp(day_pos, np.arange(days), per_day)
    fluct = np.empty(n)
    fluct[0] = rng.normal(0.0, 1.0)
    innov = rng.normal(0.0, 0.35, size=n)
    for i in range(1, n):
        fluct[i] = 0.95 * fluct[i - 1] + innov[i]
    wind_speed = np.maximum(smooth(ws_day + level) + smooth(ws_amp) * afternoon + fluct, 0.0)

    # mean-reverting day-level temperature anomaly (stationary std about 2.3 degrees)
    drift = np.empty(days)
    drift[0] = rng.normal(0.0, 2.3)
    for d in range(1, days):
        drift[d] = 0.9 * drift[d - 1] + rng.normal(0.0, 1.0)
    temp = 12.0 + smooth(drift + t_off) + smooth(t_amp) * afternoon + rng.normal(0.0, 0.4, size=n)

    blade = (rng.uniform(0, 360) + np.cumsum(rng.normal(0.0, 2.0, size=n))) % 360.0

    power = power_curve(wind_speed, params) * factor.repeat(RECORDS_PER_DAY)
    noise = rng.normal(0.0, 1.0, size=n) * params.noise_std
    power = np.maximum(power + noise, 0.0)

    machine_temp = temp + 0.012 * _smooth(power, 6) + rng.normal(0.0, 0.3, size=n)
    bearing_temp = temp + 0.006 * _smooth(power, 18) + rng.normal(0.0, 0.5, size=n)
    return {
        "wind_speed": wind_speed, "blade_angle": blade, "ambient_temp": temp, "power": power,
        "machine_temp": machine_temp, "bearing_temp": bearing_temp, "state": state,
    }


def _smooth(x, span):
    # causal exponential smoothing
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    acc = x[0]
    for i, val in enumerate(x):
        acc = alpha * val + (1 - alpha) * acc
        out[i] = acc
    return out


def records_to_array(records, fields):
    """Stack named channels of ``records`` into an ``(n, len(fields))`` float array.

    Besides record attributes and extras, ``blade_sin``/``blade_cos`` give the
    blade-angle components.
    """
    cols = []
    for name in fields:
        if name == "blade_sin":
            cols.append([math.sin(math.radians(r.blade_angle)) for r in records])
        elif name == "blade_cos":
            cols.append([math.cos(math.radians(r.blade_angle)) for r in records])
        elif name in REQUIRED_FIELDS:
            cols.append([getattr(r, name) for r in records])
        else:
            cols.append([r.extra(name) for r in records])
    return np.array(cols, dtype=float).T.reshape(len(records), len(fields))

"""End-to-end forecasting: data -> clean -> features -> similar days -> network -> forecast."""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import bagging, bpnn, dataset, metrics, preprocess, similar_days
from .bagging import derive_seed
from .config import save_config
from .dataset import RECORDS_PER_HOUR

logger = logging.getLogger(__name__)

APPROACHES = {
    "bpnn": dict(use_clustering=False, bagging=False),
    "bpnn_clustering": dict(use_clustering=True, bagging=False),
    "bagging_bpnn_clustering": dict(use_clustering=True, bagging=True),
}

ARTIFACTS = (
    "clean_report.json",
    "feature_weights.json",
    "selection.json",
    "model",
    "forecast.csv",
    "eval_report.json",
)

# sub-seed slots derived from the run seed
_SEED_CLUSTER, _SEED_ENSEMBLE, _SEED_NET, _SEED_WEATHER, _SEED_RELIEF = range(5)


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and a remediation hint."""

    def __init__(self, stage, cause, hint=""):
        self.stage = stage
        self.hint = hint
        msg = f"[{stage}] {cause}"
        if hint:
            msg += f" (hint: {hint})"
        super().__init__(msg)


class _stage:
    def __init__(self, name, hint=""):
        self.name, self.hint = name, hint

    def __enter__(self):
        logger.debug("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc, self.hint) from exc
        return False


@dataclass
class Prepared:
    """Stage outputs shared by every approach on one data set."""

    days: list
    history: list
    forecast: dataset.DayUnit
    clean_report: preprocess.CleanReport
    weights: preprocess.FeatureWeights
    features: list


@dataclass
class RunResult:
    approach: str
    timestamps: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    report: metrics.EvalReport
    selection: similar_days.SimilarDaySelection
    training_days: tuple
    model: object
    norm_x: preprocess.NormStats
    norm_y: preprocess.NormStats


def load_records(cfg):
    with _stage("ingest", "check the data path and schema mapping"):
        if cfg.source == "synthetic":
            return dataset.synth_generate(cfg.synth_seed, cfg.synth_days, cfg.curve_params(), cfg.day_regimes())
        result = dataset.ingest_csv(cfg.source, cfg.schema_map())
        if not result.records:
            raise dataset.DatasetError("no usable rows in the data file")
        records, inserted = dataset.fill_grid(result.records)
        if inserted:
            logger.warning("ingest: %d missing 10-minute slot(s) will be refilled by cleaning", len(inserted))
        return records


def day_samples(day, granularity):
    if granularity == "hourly":
        return dataset.aggregate_hourly(list(day.records))[0]
    return list(day.records)


def samples_of(days, granularity):
    out = []
    for d in days:
        out.extend(day_samples(d, granularity))
    return out


def candidate_features(records):
    base = ["wind_speed", "blade_angle", "ambient_temp"]
    return base + [name for name, _ in records[0].extra_features]


def prepare(cfg, records=None):
    """Shared stages: load, clean, slice into days, weight and select features."""
    if records is None:
        records = load_records(cfg)
    with _stage("clean", "inspect the input for runs of invalid records"):
        if cfg.clean:
            records, report = preprocess.clean(records)
        else:
            if any(preprocess._violations(r) for r in records):
                raise ValueError("invalid records present while cleaning is disabled")
            report = preprocess.CleanReport()
    with _stage("slice", "the series needs at least two full days of 10-minute data"):
        days, _ = dataset.slice_days(records)
        fd = cfg.forecast_day if cfg.forecast_day >= 0 else len(days) + cfg.forecast_day
        if not 1 <= fd < len(days):
            raise ValueError(f"forecast_day {cfg.forecast_day} needs at least one earlier day "
                             f"(data holds {len(days)} day(s))")
        history = days[:fd]
        if cfg.history_days > 0:
            history = history[-cfg.history_days:]
        forecast = days[fd]
    with _stage("features", "adjust forecastable / forced_include / relief_threshold"):
        hist = samples_of(history, cfg.granularity)
        names = candidate_features(hist)
        X = dataset.records_to_array(hist, names)
        y = np.array([r.power for r in hist])
        weights = preprocess.relief_weights(
            X, y, m=cfg.relief_m or None, k=cfg.relief_k, seed=derive_seed(cfg.seed, _SEED_RELIEF),
            sigma=cfg.relief_sigma, feature_names=names, threshold=cfg.relief_threshold,
        )
        features = preprocess.select_features(
            weights, _names(cfg.forecastable), forced_include=_names(cfg.forced_include)
        )
    return Prepared(days, history, forecast, report, weights, features)


def _names(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _xy(records, features):
    return dataset.records_to_array(records, features), np.array([r.power for r in records])


def run_approach(cfg, prep, name=None):
    """Train and forecast with the approach switches in ``cfg``."""
    name = name or _approach_name(cfg)
    by_index = {d.day_index: d for d in prep.history}
    with _stage("similar_days", "need at least `clusters` historical days; lower clusters or add data"):
        selection = None
        if cfg.use_clustering:
            ref = prep.history[-1]
            if ref.day_index != prep.forecast.day_index - 1:
                raise ValueError("the day before the forecast day is missing from the history")
            selection = similar_days.select_training_days(
                prep.history, ref, cfg.clusters,
                forecast_s1=dataset.signature1(prep.forecast.records),
                min_days=cfg.min_intersection, restarts=cfg.restarts,
                max_iter=cfg.kmeans_max_iter, seed=derive_seed(cfg.seed, _SEED_CLUSTER),
            )
            train_days = [by_index[i] for i in selection.training_days]
        else:
            train_days = prep.history[-cfg.baseline_window:]

    with _stage("normalize"):
        X, y = _xy(samples_of(train_days, cfg.granularity), prep.features)
        norm_x = preprocess.fit_norm(X)
        norm_y = preprocess.fit_norm(y[:, None], feature_range=(0.1, 0.9))
        Xn = preprocess.apply_norm(norm_x, X)
        yn = preprocess.apply_norm(norm_y, y[:, None])[:, 0]

    with _stage("train", "reduce learning_rate if training diverges"):
        net_cfg = cfg.net_config(len(prep.features), derive_seed(cfg.seed, _SEED_NET))
        if cfg.sweep_hidden:
            cut = max(1, int(len(yn) * 0.8))
            net_cfg, _ = bpnn.select_hidden_width(net_cfg, (Xn[:cut], yn[:cut]), (Xn[cut:], yn[cut:]))
        if cfg.bagging:
            model = bagging.train_ensemble(
                cfg.bagging_config(net_cfg, derive_seed(cfg.seed, _SEED_ENSEMBLE)), Xn, yn, workers=cfg.workers
            )
        else:
            model = bpnn.train(net_cfg, Xn, yn)

    with _stage("forecast"):
        fc = day_samples(prep.forecast, cfg.granularity)
        steps = cfg.horizon_hours * (1 if cfg.granularity == "hourly" else RECORDS_PER_HOUR)
        fc = fc[:steps]
        Xf, actual = _xy(fc, prep.features)
        if cfg.weather_noise_std > 0:
            rng = np.random.default_rng(derive_seed(cfg.seed, _SEED_WEATHER))
            for j, f in enumerate(prep.features):
                if f in ("wind_speed", "ambient_temp"):
                    Xf[:, j] += rng.normal(0.0, cfg.weather_noise_std, size=len(Xf))
            if "wind_speed" in prep.features:
                j = prep.features.index("wind_speed")
                Xf[:, j] = np.maximum(Xf[:, j], 0.0)
        Xfn = preprocess.apply_norm(norm_x, Xf)
        if cfg.bagging:
            out = bagging.predict(model, Xfn)
        else:
            out, _ = bpnn.forward(model, Xfn)
        predicted = preprocess.invert_norm(norm_y, np.asarray(out)[:, None])[:, 0]

    with _stage("evaluate"):
        report = metrics.EvalReport.from_series(name, actual, predicted)
    return RunResult(
        name, np.array([r.timestamp for r in fc]), actual, predicted, report, selection,
        tuple(d.day_index for d in train_days), model, norm_x, norm_y,
    )


def _approach_name(cfg):
    for name, flags in APPROACHES.items():
        if cfg.use_clustering == flags["use_clustering"] and cfg.bagging == flags["bagging"]:
            return name
    return "bagging_bpnn"


def write_forecast_csv(result, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual_kw", "predicted_kw"])
        for t, a, p in zip(result.timestamps, result.actual, result.predicted):
            w.writerow([int(t), repr(float(a)), repr(float(p))])


def write_model(result, prep, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    extra = {
        "features": list(prep.features),
        "norm_x": result.norm_x.to_dict(),
        "norm_y": result.norm_y.to_dict(),
    }
    if isinstance(result.model, bagging.BaggedEnsemble):
        bagging.save_ensemble(result.model, directory, extra)
    else:
        net = replace(result.model, norm_x=result.norm_x, norm_y=result.norm_y,
                      meta={"features": list(prep.features)})
        bpnn.save_net(net, directory / "model.json")
    return directory


def run_pipeline(cfg, records=None):
    """Run the configured approach and write every artifact into ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.ini")
    prep = prepare(cfg, records)
    result = run_approach(cfg, prep)
    preprocess.dump_json(prep.clean_report.to_dict(), out / "clean_report.json")
    preprocess.dump_json(prep.weights.to_dict() | {"features": prep.features}, out / "feature_weights.json")
    selection = result.selection.to_dict() if result.selection else {
        "clustering": False, "training_days": list(result.training_days),
    }
    preprocess.dump_json(selection, out / "selection.json")
    write_model(result, prep, out / "model")
    write_forecast_csv(result, out / "forecast.csv")
    preprocess.dump_json(result.report.to_dict(), out / "eval_report.json")
    logger.info("%s: RMSE %.3f kW, MAE %.3f kW", result.approach, result.report.rmse, result.report.mae)
    return out, result


def run_compare(cfg, records=None):
    """Run the three approaches on one data set and split; returns ``(comparison, results)``."""
    prep = prepare(cfg, records)
    results = [run_approach(replace(cfg, **flags), prep, name) for name, flags in APPROACHES.items()]
    return metrics.compare([r.report for r in results]), results

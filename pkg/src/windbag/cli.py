"""Command-line entry point: ``windbag synth | pipeline | compare | eval | inspect-model``.

Every PipelineConfig key is also a flag of the same name (``--synth_days 90``
or ``--synth-days 90``). Values resolve as flag > ``--config`` file > default.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bagging, bpnn, dataset, metrics, pipeline
from ._backend import BACKEND
from .config import FIELDS, PipelineConfig, load_config, parse_value, save_config

logger = logging.getLogger("windbag")

SYNTH_CSV = "synthetic.csv"
SYNTH_MANIFEST = "synthetic.manifest.json"
SYNTH_KEYS = ("synth_seed", "synth_days", "cut_in", "rated_speed", "cut_out", "rated_power",
              "noise_std", "regimes", "regime_dwell_days")


class UsageError(ValueError):
    pass


def _add_config_flags(parser):
    group = parser.add_argument_group("configuration (flag > --config file > default)")
    group.add_argument("--config", metavar="INI", help="INI file with PipelineConfig keys")
    for name, f in FIELDS.items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        group.add_argument(*flags, dest=name, metavar=getattr(f.type, "__name__", str(f.type)).upper(),
                           default=None, help=f"{f.metadata.get('help') or name} (default: {f.default})")


def _config_from_args(args):
    overrides = {}
    for name in FIELDS:
        text = getattr(args, name, None)
        if text is not None:
            try:
                overrides[name] = parse_value(name, text)
            except ValueError as exc:
                raise UsageError(f"--{name}: {exc}") from exc
    return load_config(args.config, overrides)


# ------------------------------------------------------------------ commands


def cmd_synth(cfg, out=None):
    """Write a synthetic dataset CSV plus a manifest recording how it was made."""
    if cfg.synth_days < 1:
        raise UsageError("synth_days must be >= 1")
    out = Path(out) if out else Path(cfg.output_dir) / SYNTH_CSV
    records = dataset.synth_generate(cfg.synth_seed, cfg.synth_days, cfg.curve_params(), cfg.day_regimes())
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_csv(records, out)
    manifest = {"generator": "windbag.dataset.synth_generate", "rows": len(records), "csv": out.name}
    manifest["params"] = {k: getattr(cfg, k) for k in SYNTH_KEYS}
    manifest_path = out.with_name(out.stem + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out, manifest_path


def config_from_manifest(path, base=None):
    with open(path, encoding="utf-8") as fh:
        params = json.load(fh)["params"]
    unknown = set(params) - set(SYNTH_KEYS)
    if unknown:
        raise UsageError(f"{path}: unknown manifest parameter(s) {sorted(unknown)}")
    return (base or PipelineConfig()).with_overrides(**params)


def cmd_pipeline(cfg):
    out, result = pipeline.run_pipeline(cfg)
    return out, result


def cmd_compare(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.ini")
    comparison, results = pipeline.run_compare(cfg)
    metrics.write_comparison(comparison, out / "comparison.json")
    for r in results:
        metrics.export_residuals(out / f"residuals_{r.approach}.csv", r.timestamps, r.actual, r.predicted)
    return out, comparison


def read_columns(path, actual_col, predicted_col):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {actual_col, predicted_col} - set(reader.fieldnames or ())
        if missing:
            raise UsageError(f"{path}: missing column(s) {sorted(missing)}")
        rows = list(reader)
    ts = [row.get("timestamp", i) for i, row in enumerate(rows)]
    actual = np.array([float(row[actual_col]) for row in rows])
    predicted = np.array([float(row[predicted_col]) for row in rows])
    return np.array(ts, dtype=np.int64), actual, predicted


def cmd_eval(path, actual_col="actual_kw", predicted_col="predicted_kw", name=None):
    ts, actual, predicted = read_columns(path, actual_col, predicted_col)
    report = metrics.EvalReport.from_series(name or Path(path).stem, actual, predicted)
    return report, ts, actual, predicted


def describe_model(path):
    """Summary dict for a saved single network or ensemble directory."""
    path = Path(path)
    if path.is_dir() and (path / "manifest.json").exists():
        ens, manifest = bagging.load_ensemble(path)
        first = ens.members[0]
        return {
            "kind": "ensemble",
            "members": len(ens.members),
            "input_dim": ens.input_dim,
            "hidden_dim": first.hidden_dim,
            "features": manifest.get("features"),
            "master_seed": ens.config.master_seed,
            "bootstrap_fraction": ens.config.bootstrap_fraction,
            "final_errors": [net.train_curve[-1] if net.train_curve else None for net in ens.members],
        }
    if path.is_dir():
        path = path / "model.json"
    net = bpnn.load_net(path)
    return {
        "kind": "network",
        "input_dim": net.input_dim,
        "hidden_dim": net.hidden_dim,
        "features": net.meta.get("features"),
        "epochs": len(net.train_curve),
        "final_error": net.train_curve[-1] if net.train_curve else None,
        "config": dict(net.config.__dict__),
    }


# ------------------------------------------------------------------ parser


def build_parser():
    parser = argparse.ArgumentParser(prog="windbag", description="Similar-day bagged BPNN wind power forecasting.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic 10-minute SCADA dataset")
    p.add_argument("--out", help=f"CSV path (default: <output_dir>/{SYNTH_CSV})")
    p.add_argument("--from-manifest", help="regenerate the dataset described by a manifest")
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="run one configured approach end to end")
    _add_config_flags(p)

    p = sub.add_parser("compare", help="plain BPNN vs clustering vs bagging+clustering on one split")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="RMSE/MAE of two CSV columns")
    p.add_argument("csv")
    p.add_argument("--actual-col", default="actual_kw")
    p.add_argument("--predicted-col", default="predicted_kw")
    p.add_argument("--json", help="write the report as JSON here")
    p.add_argument("--residuals", help="write a residual CSV here")

    p = sub.add_parser("inspect-model", help="summarize a saved network or ensemble")
    p.add_argument("path")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logger.debug("kernel backend: %s", BACKEND)
    try:
        return _dispatch(args)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    if args.command == "synth":
        cfg = _config_from_args(args)
        if args.from_manifest:
            cfg = config_from_manifest(args.from_manifest, cfg)
        csv_path, manifest = cmd_synth(cfg, args.out)
        print(f"wrote {csv_path} ({cfg.synth_days * dataset.RECORDS_PER_DAY} rows) and {manifest}")
    elif args.command == "pipeline":
        out, result = cmd_pipeline(_config_from_args(args))
        print(f"{result.approach}: RMSE {result.report.rmse:.3f} kW, MAE {result.report.mae:.3f} kW -> {out}")
    elif args.command == "compare":
        out, comparison = cmd_compare(_config_from_args(args))
        print(comparison.table())
        print(f"-> {out / 'comparison.json'}")
    elif args.command == "eval":
        report, ts, actual, predicted = cmd_eval(args.csv, args.actual_col, args.predicted_col)
        print(f"{report.approach_name}: n={report.n} RMSE {report.rmse:.6f} MAE {report.mae:.6f}")
        if args.json:
            with open(args.json, "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
        if args.residuals:
            metrics.export_residuals(args.residuals, ts, actual, predicted)
    elif args.command == "inspect-model":
        print(json.dumps(describe_model(args.path), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())

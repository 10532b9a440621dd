"""Forecast error metrics and comparison tables."""

import csv
import json
from dataclasses import dataclass
from itertools import permutations

import numpy as np


def _residuals(actual, predicted):
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.size == 0 or p.size == 0:
        raise ValueError("metrics need non-empty vectors")
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    return a - p


def rmse(actual, predicted):
    r = _residuals(actual, predicted)
    return float(np.sqrt(np.mean(r * r)))


def mae(actual, predicted):
    return float(np.mean(np.abs(_residuals(actual, predicted))))


@dataclass(frozen=True)
class EvalReport:
    approach_name: str
    rmse: float
    mae: float
    n: int
    per_hour_errors: tuple = None

    @classmethod
    def from_series(cls, name, actual, predicted, keep_errors=True):
        r = _residuals(actual, predicted)
        return cls(name, rmse(actual, predicted), mae(actual, predicted), int(r.size),
                   tuple(float(x) for x in r) if keep_errors else None)

    def to_dict(self):
        d = {"approach_name": self.approach_name, "rmse": self.rmse, "mae": self.mae, "n": self.n}
        if self.per_hour_errors is not None:
            d["per_hour_errors"] = list(self.per_hour_errors)
        return d


def reduction(baseline, candidate):
    """Percentage reduction of ``candidate`` relative to ``baseline``."""
    return (baseline - candidate) / baseline * 100.0


@dataclass(frozen=True)
class Comparison:
    reports: tuple
    # (baseline, candidate) -> {"rmse": pct, "mae": pct}
    reductions: dict

    def to_dict(self):
        return {
            "reports": [r.to_dict() for r in self.reports],
            "reductions": [
                {"baseline": b, "candidate": c, **vals} for (b, c), vals in self.reductions.items()
            ],
        }

    def table(self):
        width = max(len("approach"), *(len(r.approach_name) for r in self.reports))
        lines = [f"{'approach':<{width}}  {'RMSE(kW)':>12}  {'MAE(kW)':>12}"]
        lines += [f"{r.approach_name:<{width}}  {r.rmse:12.3f}  {r.mae:12.3f}" for r in self.reports]
        if self.reductions:
            lines.append("")
            lines.append("reductions (baseline -> candidate): RMSE%, MAE%")
            for (b, c), vals in self.reductions.items():
                lines.append(f"  {b} -> {c}: {vals['rmse']:.2f}%, {vals['mae']:.2f}%")
        return "\n".join(lines)


def compare(reports):
    """Tabulate reports and every pairwise percentage reduction."""
    reports = tuple(reports)
    if not reports:
        raise ValueError("compare needs at least one report")
    red = {}
    for b, c in permutations(reports, 2):
        red[(b.approach_name, c.approach_name)] = {
            "rmse": reduction(b.rmse, c.rmse),
            "mae": reduction(b.mae, c.mae),
        }
    return Comparison(reports, red)


def write_comparison(comparison, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(comparison.to_dict(), fh, indent=2)
        fh.write("\n")


def export_residuals(path, timestamps, actual, predicted):
    """CSV of per-step actual, predicted and residual power for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual_kw", "predicted_kw", "residual_kw"])
        for t, a, p in zip(timestamps, actual, predicted):
            w.writerow([int(t), repr(float(a)), repr(float(p)), repr(float(a) - float(p))])

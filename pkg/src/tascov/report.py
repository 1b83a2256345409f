"""Serialisation of estimates and benchmark reports to CSV and JSON.

Every JSON report embeds the tool version, the fully resolved configuration,
the seed and any warnings raised during the run, so a report is sufficient
to reproduce itself. Numbers are written with 17 significant digits.
"""

import csv
import json

import numpy as np

from . import __version__

FLOAT_FORMAT = "%.17g"


def fmt(value):
    """Decimal string with 17 significant digits."""
    return FLOAT_FORMAT % float(value)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def run_metadata(config, seed, duration_seconds, warnings_seen):
    return {
        "tool": "tascov",
        "version": __version__,
        "config": _jsonable(config),
        "seed": seed,
        "duration_seconds": float(duration_seconds),
        "warnings": [str(w) for w in warnings_seen],
    }


def write_json(payload, path):
    with open(path, "w") as handle:
        json.dump(_jsonable(payload), handle, indent=2)
        handle.write("\n")


def write_matrix_csv(matrix, path, labels=None):
    """Square matrix as headered CSV."""
    matrix = np.asarray(matrix, dtype=float)
    if labels is None:
        labels = [f"v{i + 1}" for i in range(matrix.shape[1])]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(labels)
        for row in matrix:
            writer.writerow([fmt(value) for value in row])


def estimate_payload(fit, target_set, distance_labels, distances, settings, warnings_seen):
    """JSON report body for a covariance estimate."""
    return {
        "run": settings,
        "target_weights": {
            label: float(w)
            for label, w in zip(fit.target_labels, fit.target_weights)
        },
        "sample_weight": float(fit.sample_weight),
        "alpha_grid": fit.table.alpha_grid.values,
        "log_marginal_likelihood": {
            "target_labels": list(fit.table.target_labels),
            "matrix": fit.table.log_ml,
        },
        "targets": [
            {"label": t.label, "provenance": t.provenance, "dim": t.dim}
            for t in target_set
        ],
        "target_distances": {"labels": distance_labels, "matrix": distances},
        "warnings": [str(w) for w in warnings_seen],
    }


def prial_report_payload(report, settings):
    return {
        "run": settings,
        "prial": {label: float(v) for label, v in report.prial.items()},
        "losses": {
            label: [[float(a), float(b)] for a, b in pairs]
            for label, pairs in report.losses.items()
        },
        "weights": {
            label: report.weights[label] for label in report.weights
        },
        "weight_labels": report.weight_labels,
        "reps": report.reps,
        "rng_seed": report.rng_seed,
        "protocol_config": report.config,
    }


def write_prial_csv(report, path):
    """One row per estimator with its PRIAL percentage."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["estimator", "prial_percent", "reps"])
        for label in report.estimator_labels:
            writer.writerow([label, fmt(report.prial[label]), report.reps])


def write_weights_csv(report, path):
    """Per-repetition target weights in long format (plot-ready)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["estimator", "repetition", "component", "weight"])
        for label, rows in report.weights.items():
            names = report.weight_labels[label]
            for m, row in enumerate(rows):
                for name, weight in zip(names, row):
                    writer.writerow([label, m, name, fmt(weight)])


def write_rows_csv(rows, path, columns):
    """List-of-dicts table as CSV with a fixed column order."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            out = []
            for column in columns:
                value = row[column]
                if isinstance(value, float):
                    out.append(fmt(value))
                elif value is None:
                    out.append("")
                else:
                    out.append(value)
            writer.writerow(out)

"""Command-line interface.

Input data CSVs have samples in rows and variables in columns, with a header
row of variable names; they are transposed internally so that estimation
works on a variables × samples matrix. Missing values are rejected. All
commands write delimited output plus a JSON report, and render figures
alongside unless ``--no-figures`` is given.
"""

import csv
import dataclasses
import os
import time
import warnings
from pathlib import Path

import click
import numpy as np

from . import estimator, plots, report, simulation, targets
from .errors import DimensionMismatch, ParseError, TascovError

OUT_DIR_ENV = "TASCOV_OUT_DIR"


def read_data_csv(path):
    """Read a samples × variables CSV into a variables × samples DataMatrix."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        labels = [name.strip() for name in header]
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(labels):
                raise ParseError(
                    f"{path}: row {row_number} has {len(row)} fields, "
                    f"expected {len(labels)}"
                )
            values = []
            for column_number, cell in enumerate(row, start=1):
                text = cell.strip()
                if text == "" or text.upper() in ("NA", "NAN"):
                    raise ParseError(
                        f"{path}: missing value at row {row_number}, "
                        f"column {column_number} ({labels[column_number - 1]})"
                    )
                try:
                    values.append(float(text))
                except ValueError:
                    raise ParseError(
                        f"{path}: cannot parse {text!r} at row {row_number}, "
                        f"column {column_number}"
                    ) from None
            rows.append(values)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 sample rows, got {len(rows)}")
    samples = np.asarray(rows, dtype=float)
    return targets.DataMatrix(samples.T, centered=False, variable_labels=tuple(labels))


def read_matrix_csv(path):
    """Read a headered square matrix CSV. Returns (labels, matrix)."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            labels = [name.strip() for name in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        rows = []
        for row_number, row in enumerate(reader, start=2):
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ParseError(f"{path}: row {row_number}: {exc}") from None
    matrix = np.asarray(rows, dtype=float)
    if matrix.shape != (len(labels), len(labels)):
        raise ParseError(
            f"{path}: expected a {len(labels)}x{len(labels)} matrix, "
            f"got shape {matrix.shape}"
        )
    return labels, matrix


def _resolve_out_dir(out_dir):
    resolved = Path(out_dir or os.environ.get(OUT_DIR_ENV) or ".")
    resolved.mkdir(parents=True, exist_ok=True)
    return resolved


def _parse_list(text, cast):
    return [cast(item) for item in str(text).split(",") if item != ""]


class _Run:
    """Collects warnings and timing for one command invocation."""

    def __init__(self):
        self.start = time.perf_counter()
        self._catcher = warnings.catch_warnings(record=True)
        self.records = []

    def __enter__(self):
        self.records = self._catcher.__enter__()
        warnings.simplefilter("always")
        return self

    def __exit__(self, *exc_info):
        return self._catcher.__exit__(*exc_info)

    @property
    def warning_messages(self):
        return [str(record.message) for record in self.records]

    def metadata(self, config, seed):
        return report.run_metadata(
            config, seed, time.perf_counter() - self.start, self.warning_messages
        )


def _fail(exc):
    raise click.ClickException(str(exc))


@click.group()
@click.version_option()
def main():
    """Multi-target linear shrinkage covariance estimation."""


def _load_extra_targets(external_target_files, external_data_files, expected_dim):
    extra = []
    for path in external_target_files:
        labels, matrix = read_matrix_csv(path)
        if matrix.shape[0] != expected_dim:
            raise DimensionMismatch(
                f"{path}: external target has dim {matrix.shape[0]}, "
                f"expected {expected_dim}"
            )
        name = Path(path).stem
        extra.append(
            targets.ShrinkageTarget(
                label=f"ext:{name}", matrix=matrix, provenance=f"external:{path}"
            )
        )
    for path in external_data_files:
        aux = read_data_csv(path)
        extra.append(
            targets.external_target(aux, Path(path).stem, expected_dim=expected_dim)
        )
    return extra


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--center/--no-center", default=True, show_default=True)
@click.option("--alpha-step", default=0.01, show_default=True)
@click.option(
    "--targets",
    "target_kinds",
    default=",".join(targets.CANONICAL_KINDS),
    show_default=True,
    help="Comma-separated subset of T1..T9.",
)
@click.option(
    "--external-target",
    "external_target_files",
    multiple=True,
    type=click.Path(exists=True),
    help="Precomputed square covariance CSV to add as a target.",
)
@click.option(
    "--external-data",
    "external_data_files",
    multiple=True,
    type=click.Path(exists=True),
    help="Auxiliary dataset CSV; regularised into a target.",
)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@click.option("--format", "formats", default="json,csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def estimate(
    input_path,
    center,
    alpha_step,
    target_kinds,
    external_target_files,
    external_data_files,
    seed,
    out_dir,
    formats,
    figures,
):
    """Estimate a covariance matrix from a dataset CSV."""
    out = _resolve_out_dir(out_dir)
    formats = set(_parse_list(formats, str))
    kinds = tuple(_parse_list(target_kinds, str))
    config = {
        "command": "estimate",
        "input": str(input_path),
        "center": center,
        "alpha_step": alpha_step,
        "targets": list(kinds),
        "external_targets": list(external_target_files),
        "external_data": list(external_data_files),
        "out_dir": str(out),
        "formats": sorted(formats),
    }
    try:
        with _Run() as run:
            data = read_data_csv(input_path)
            s = targets.sample_covariance(data, center=center)
            target_set = targets.build_default_target_set(s, kinds=kinds)
            for extra in _load_extra_targets(
                external_target_files, external_data_files, data.p
            ):
                target_set = target_set.with_target(extra)
            grid = estimator.AlphaGrid.equispaced(alpha_step)
            table = estimator.posterior_grid(s, data.n, grid, target_set)
            fit = estimator.tas_estimate(table, s, target_set)
            distance_labels, distances = targets.target_distance_matrix(
                target_set, extra=[("S", s)]
            )
            payload = report.estimate_payload(
                fit,
                target_set,
                distance_labels,
                distances,
                run.metadata(config, seed),
                run.warning_messages,
            )
    except TascovError as exc:
        _fail(exc)
    if "csv" in formats:
        report.write_matrix_csv(
            fit.sigma_hat, out / "estimate.csv", labels=data.variable_labels
        )
        report.write_matrix_csv(
            distances, out / "target_distances.csv", labels=distance_labels
        )
    if "json" in formats:
        report.write_json(payload, out / "estimate_report.json")
    if figures:
        plots.covariance_heatmap(fit.sigma_hat, out / "estimate_heatmap.png")
        plots.distance_heatmap(
            distance_labels, distances, out / "target_distances.png"
        )
        weights = np.append(fit.target_weights, fit.sample_weight)
        plots.prial_bars(
            dict(zip(list(fit.target_labels) + ["S"], weights)),
            out / "estimate_weights.png",
            title="Shrinkage weights",
        )
    click.echo(f"wrote estimate outputs to {out}")


@main.command(name="targets")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--center/--no-center", default=True, show_default=True)
@click.option(
    "--targets",
    "target_kinds",
    default=",".join(targets.CANONICAL_KINDS),
    show_default=True,
)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@click.option("--figures/--no-figures", default=True, show_default=True)
def targets_cmd(input_path, center, target_kinds, seed, out_dir, figures):
    """Build and export the canonical target set for a dataset."""
    out = _resolve_out_dir(out_dir)
    kinds = tuple(_parse_list(target_kinds, str))
    config = {
        "command": "targets",
        "input": str(input_path),
        "center": center,
        "targets": list(kinds),
        "out_dir": str(out),
    }
    try:
        with _Run() as run:
            data = read_data_csv(input_path)
            s = targets.sample_covariance(data, center=center)
            target_set = targets.build_default_target_set(s, kinds=kinds)
            distance_labels, distances = targets.target_distance_matrix(
                target_set, extra=[("S", s)]
            )
            payload = {
                "run": run.metadata(config, seed),
                "targets": [targets.target_descriptor(t) for t in target_set],
                "target_distances": {
                    "labels": distance_labels,
                    "matrix": distances,
                },
            }
    except TascovError as exc:
        _fail(exc)
    for target in target_set:
        targets.target_to_csv(
            target, out / f"target_{target.label}.csv", data.variable_labels
        )
    report.write_matrix_csv(
        distances, out / "target_distances.csv", labels=distance_labels
    )
    report.write_json(payload, out / "targets_report.json")
    if figures:
        plots.distance_heatmap(
            distance_labels, distances, out / "target_distances.png"
        )
    click.echo(f"wrote {len(target_set)} targets to {out}")


def _emit_prial_outputs(prial_report, payload, out, formats, figures, stem):
    if "csv" in formats:
        report.write_prial_csv(prial_report, out / f"{stem}_prial.csv")
        report.write_weights_csv(prial_report, out / f"{stem}_weights.csv")
    if "json" in formats:
        report.write_json(payload, out / f"{stem}_report.json")
    if figures:
        plots.prial_bars(prial_report.prial, out / f"{stem}_prial.png")
        for label, rows in prial_report.weights.items():
            plots.weights_boxplot(
                rows,
                prial_report.weight_labels[label],
                out / f"{stem}_weights_{label}.png",
                title=f"{label} shrinkage weights",
            )


@main.command()
@click.option("--scenario", type=click.IntRange(1, 4), required=True)
@click.option("--n", default=25, show_default=True)
@click.option("--p", default=100, show_default=True)
@click.option("--m", "--M", "reps", default=100, show_default=True)
@click.option("--alpha-step", default=0.01, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--fresh-sigma/--fixed-sigma",
    default=None,
    help="Redraw the ground truth each repetition (default: scenario-dependent).",
)
@click.option("--sts/--no-sts", default=True, show_default=True,
              help="Also benchmark the nine single-target estimators.")
@click.option("--out-dir", default=None)
@click.option("--format", "formats", default="json,csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def simulate(
    scenario, n, p, reps, alpha_step, seed, fresh_sigma, sts, out_dir, formats, figures
):
    """Model-based benchmark on synthetic covariance structures."""
    out = _resolve_out_dir(out_dir)
    formats = set(_parse_list(formats, str))
    config = {
        "command": "simulate",
        "scenario": scenario,
        "n": n,
        "p": p,
        "reps": reps,
        "alpha_step": alpha_step,
        "fresh_sigma": fresh_sigma,
        "sts": sts,
        "out_dir": str(out),
    }
    try:
        with _Run() as run:
            spec = simulation.ScenarioSpec(id=f"S{scenario}", p=p)
            configs = simulation.default_estimator_configs(include_sts=sts)
            if alpha_step != estimator.DEFAULT_ALPHA_STEP:
                configs = [
                    dataclasses.replace(c, alpha_step=alpha_step) for c in configs
                ]
            prial_report = simulation.run_model_simulation(
                spec, n, reps, configs=configs, seed=seed, fresh_sigma=fresh_sigma
            )
            payload = report.prial_report_payload(
                prial_report, run.metadata(config, seed)
            )
    except TascovError as exc:
        _fail(exc)
    _emit_prial_outputs(prial_report, payload, out, formats, figures, "simulate")
    click.echo(f"wrote simulation outputs to {out}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--n-small", required=True, type=int)
@click.option("--m", "--M", "reps", default=100, show_default=True)
@click.option("--center/--no-center", default=True, show_default=True)
@click.option(
    "--external-target",
    "external_target_files",
    multiple=True,
    type=click.Path(exists=True),
)
@click.option(
    "--external-data",
    "external_data_files",
    multiple=True,
    type=click.Path(exists=True),
)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@click.option("--format", "formats", default="json,csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def partition(
    input_path,
    n_small,
    reps,
    center,
    external_target_files,
    external_data_files,
    seed,
    out_dir,
    formats,
    figures,
):
    """Data-partition benchmark: fit on a small split, score against the
    sample covariance of the large split."""
    out = _resolve_out_dir(out_dir)
    formats = set(_parse_list(formats, str))
    config = {
        "command": "partition",
        "input": str(input_path),
        "n_small": n_small,
        "reps": reps,
        "center": center,
        "external_targets": list(external_target_files),
        "external_data": list(external_data_files),
        "out_dir": str(out),
    }
    try:
        with _Run() as run:
            data = read_data_csv(input_path)
            configs = [simulation.TasConfig()]
            extra = _load_extra_targets(
                external_target_files, external_data_files, data.p
            )
            if extra:
                extra_set = {t.label: t for t in extra}

                def _tas_info(s, n, _extra=tuple(extra)):
                    base = targets.build_default_target_set(s)
                    for t in _extra:
                        base = base.with_target(t)
                    grid = estimator.AlphaGrid.equispaced()
                    table = estimator.posterior_grid(s, n, grid, base)
                    return estimator.tas_estimate(table, s, base).sigma_hat

                configs.append(
                    simulation.PluginConfig(label="TAS-info", fn=_tas_info)
                )
                config["tas_info_targets"] = sorted(extra_set)
            prial_report = simulation.data_partition_run(
                data, n_small, reps, configs=configs, seed=seed, center=center
            )
            payload = report.prial_report_payload(
                prial_report, run.metadata(config, seed)
            )
    except TascovError as exc:
        _fail(exc)
    _emit_prial_outputs(prial_report, payload, out, formats, figures, "partition")
    click.echo(f"wrote partition outputs to {out}")


@main.command()
@click.option("--p", "p_list", default="50,100", show_default=True)
@click.option("--n-rules", default="10p,2p,p,p/2", show_default=True)
@click.option("--m", "--M", "reps", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@click.option("--format", "formats", default="json,csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def diagnose(p_list, n_rules, reps, seed, out_dir, formats, figures):
    """Error and conditioning of the raw sample covariance estimator."""
    out = _resolve_out_dir(out_dir)
    formats = set(_parse_list(formats, str))
    config = {
        "command": "diagnose",
        "p": p_list,
        "n_rules": n_rules,
        "reps": reps,
        "out_dir": str(out),
    }
    try:
        with _Run() as run:
            rows = simulation.mle_diagnostics(
                _parse_list(p_list, int),
                n_rules=_parse_list(n_rules, str),
                reps=reps,
                seed=seed,
            )
            payload = {"run": run.metadata(config, seed), "diagnostics": rows}
    except TascovError as exc:
        _fail(exc)
    columns = [
        "p",
        "n",
        "n_rule",
        "mean_frobenius_error_sq",
        "mean_condition_number",
        "singular_fraction",
    ]
    if "csv" in formats:
        report.write_rows_csv(rows, out / "diagnose.csv", columns)
    if "json" in formats:
        report.write_json(payload, out / "diagnose_report.json")
    if figures:
        plots.mle_diagnostics_plot(rows, out / "diagnose.png")
    click.echo(f"wrote diagnostics to {out}")


@main.command()
@click.option("--d", "d_list", default="0.2,0.1,0.05,0.01,0.005,0.001",
              show_default=True)
@click.option("--m", "--M", "reps", default=100, show_default=True)
@click.option("--p", default=100, show_default=True)
@click.option("--n", default=25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@click.option("--format", "formats", default="json,csv", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def gridstudy(d_list, reps, p, n, seed, out_dir, formats, figures):
    """PRIAL as a function of the intensity-grid step."""
    out = _resolve_out_dir(out_dir)
    formats = set(_parse_list(formats, str))
    config = {
        "command": "gridstudy",
        "d": d_list,
        "reps": reps,
        "p": p,
        "n": n,
        "out_dir": str(out),
    }
    try:
        with _Run() as run:
            rows = simulation.grid_cardinality_study(
                _parse_list(d_list, float), reps=reps, seed=seed, p=p, n=n
            )
            payload = {"run": run.metadata(config, seed), "gridstudy": rows}
    except TascovError as exc:
        _fail(exc)
    if "csv" in formats:
        report.write_rows_csv(
            rows, out / "gridstudy.csv", ["d", "cardinality", "prial"]
        )
    if "json" in formats:
        report.write_json(payload, out / "gridstudy_report.json")
    if figures:
        plots.gridstudy_plot(rows, out / "gridstudy.png")
    click.echo(f"wrote grid study to {out}")


if __name__ == "__main__":
    main()

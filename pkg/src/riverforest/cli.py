"""Command-line interface: synthesize, train, predict, evaluate, cross-validate.

Exit codes: 0 success, 2 input or data error, 3 training or cross-validation
error, 4 model-format error. All runs are reproducible by default (seed 42);
file writes are atomic.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
import time
from collections import Counter
from pathlib import Path
from typing import Optional

import click

from .data import (
    Dataset,
    PollutionLevel,
    QualityStandards,
    format_number,
    generate_synthetic,
    parse_csv,
    write_csv,
)
from .errors import DataError, InvalidDistribution, ModelFormatError, TrainingError
from .evaluation import (
    EvaluationReport,
    confusion_from_dict,
    evaluate,
    evaluate_matrix,
    k_fold_cross_validate,
    render_csv,
    render_json,
    render_text,
)
from .forest import (
    ForestConfig,
    ForestModel,
    _argmax_level,
    deserialize_model,
    forest_predict_proba,
    serialize_model,
    train_forest,
)
from .tree import TreeConfig

DEFAULT_SEED = 42

_EXIT_DATA = 2
_EXIT_TRAINING = 3
_EXIT_MODEL = 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(func):
    """Map package errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DataError as exc:
            _fail(f"{type(exc).__name__}: {exc}", _EXIT_DATA)
        except TrainingError as exc:
            _fail(f"{type(exc).__name__}: {exc}", _EXIT_TRAINING)
        except ModelFormatError as exc:
            _fail(f"{type(exc).__name__}: {exc}", _EXIT_MODEL)
        except OSError as exc:
            _fail(str(exc), _EXIT_DATA)

    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


def _write_atomic(path: Path, data) -> None:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _read_bytes(path: Path) -> bytes:
    return Path(path).read_bytes()


def _load_model(path: Path) -> ForestModel:
    return deserialize_model(_read_bytes(path))


def _forest_config(trees, features_per_split, min_samples_split, max_depth, seed) -> ForestConfig:
    try:
        return ForestConfig(
            n_trees=trees,
            seed=seed,
            tree=TreeConfig(
                features_per_split=features_per_split,
                min_samples_split=min_samples_split,
                max_depth=max_depth,
            ),
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _forest_options(func):
    options = [
        click.option("--trees", type=int, default=100, show_default=True, help="Trees in the ensemble."),
        click.option(
            "--features-per-split",
            type=int,
            default=2,
            show_default=True,
            help="Features drawn at random per node.",
        ),
        click.option(
            "--min-samples-split",
            type=int,
            default=2,
            show_default=True,
            help="Smallest node that may still be split.",
        ),
        click.option("--max-depth", type=int, default=None, help="Depth cap (unlimited when omitted)."),
        click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Random seed."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_standards(path: Optional[Path]) -> QualityStandards:
    if path is None:
        return QualityStandards()
    try:
        overrides = json.loads(_read_bytes(path))
        if not isinstance(overrides, dict):
            raise ValueError("standards file must hold a JSON object")
        return QualityStandards.from_dict(overrides)
    except (json.JSONDecodeError, ValueError) as exc:
        raise InvalidDistribution(f"invalid standards file {path}: {exc}") from None


def _parse_class_mix(text: Optional[str]):
    if text is None:
        return None
    mix = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not _:
            raise InvalidDistribution(f"class mix entry {part!r} is not name=weight")
        level = PollutionLevel.parse(name)
        try:
            mix[level] = float(value)
        except ValueError:
            raise InvalidDistribution(f"class mix weight {value!r} is not a number") from None
    return mix


def _render_report(report: EvaluationReport, fmt: str) -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    return render_text(report)


def _emit_report(report: EvaluationReport, out: Optional[Path], fmt: str) -> None:
    text = _render_report(report, fmt)
    if out is None:
        click.echo(text, nl=False)
    else:
        _write_atomic(out, text)


def _report_figures(report: EvaluationReport, figures: Optional[Path]) -> None:
    if figures is None:
        return
    from . import plots

    path = plots.save_confusion_heatmap(report.matrix, Path(figures) / "confusion_matrix.png")
    click.echo(f"wrote {path}", err=True)


_format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["text", "json", "csv"]),
    default="text",
    show_default=True,
    help="Report rendering.",
)
_figures_option = click.option(
    "--figures",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Also render figures (PNG) into this directory.",
)


@click.group()
@click.version_option(package_name="riverforest")
def main() -> None:
    """Train and evaluate a random-forest pollution-level classifier."""


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("model_out", type=click.Path(dir_okay=False, path_type=Path))
@_forest_options
@_guard
def train(data_csv: Path, model_out: Path, trees, features_per_split, min_samples_split, max_depth, seed):
    """Train a forest on a labeled CSV and write the model JSON."""
    dataset = parse_csv(_read_bytes(data_csv), require_label=True)
    config = _forest_config(trees, features_per_split, min_samples_split, max_depth, seed)
    started = time.perf_counter()
    model = train_forest(dataset, config)
    elapsed = time.perf_counter() - started
    _write_atomic(model_out, serialize_model(model))

    histogram = Counter(row.level for row in dataset)
    mix = " ".join(f"{level.label}={histogram.get(level, 0)}" for level in PollutionLevel)
    click.echo(f"trained {config.n_trees} trees on {len(dataset)} samples in {elapsed:.2f}s")
    click.echo(f"class distribution: {mix}")
    click.echo(f"model written to {model_out}")


@main.command()
@click.argument("model_in", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("out_csv", type=click.Path(dir_okay=False, path_type=Path))
@_guard
def predict(model_in: Path, data_csv: Path, out_csv: Path):
    """Predict levels for a CSV (labels optional) and append the results."""
    model = _load_model(model_in)
    dataset = parse_csv(_read_bytes(data_csv), require_label=False)

    base = write_csv(dataset).splitlines()
    lines = [base[0] + ",predicted_level,votes"]
    for row, source_line in zip(dataset, base[1:]):
        distribution = forest_predict_proba(model, row.sample)
        predicted = _argmax_level(distribution)
        votes = ";".join(
            f"{level.label}={format_number(distribution[level])}" for level in PollutionLevel
        )
        lines.append(f"{source_line},{predicted.label},{votes}")
    _write_atomic(out_csv, "\r\n".join(lines) + "\r\n")
    click.echo(f"wrote {len(dataset)} predictions to {out_csv}")


@main.command(name="evaluate")
@click.argument("model_in", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("labeled_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("report_out", type=click.Path(dir_okay=False, path_type=Path), required=False)
@_format_option
@_figures_option
@_guard
def evaluate_cmd(model_in: Path, labeled_csv: Path, report_out: Optional[Path], fmt: str, figures):
    """Predict a labeled CSV with a saved model and report the metrics."""
    model = _load_model(model_in)
    dataset = parse_csv(_read_bytes(labeled_csv), require_label=True)
    truths = [row.level for row in dataset]
    preds = [
        _argmax_level(forest_predict_proba(model, row.sample)) for row in dataset
    ]
    classes = tuple(sorted(set(truths) | set(preds)))
    report = evaluate(truths, preds, classes)
    _emit_report(report, report_out, fmt)
    _report_figures(report, figures)


@main.command()
@click.argument("labeled_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("report_out", type=click.Path(dir_okay=False, path_type=Path), required=False)
@click.option("--folds", type=int, default=10, show_default=True, help="Number of folds.")
@click.option("--no-stratify", is_flag=True, help="Deal folds without class stratification.")
@_forest_options
@_format_option
@_figures_option
@_guard
def crossval(
    labeled_csv: Path,
    report_out: Optional[Path],
    folds: int,
    no_stratify: bool,
    trees,
    features_per_split,
    min_samples_split,
    max_depth,
    seed,
    fmt: str,
    figures,
):
    """Run stratified k-fold cross-validation and report pooled metrics."""
    dataset = parse_csv(_read_bytes(labeled_csv), require_label=True)
    config = _forest_config(trees, features_per_split, min_samples_split, max_depth, seed)
    report = k_fold_cross_validate(dataset, folds, config, seed, stratified=not no_stratify)
    _emit_report(report, report_out, fmt)
    _report_figures(report, figures)


@main.command()
@click.argument("matrix_json", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("report_out", type=click.Path(dir_okay=False, path_type=Path), required=False)
@_format_option
@_figures_option
@_guard
def metrics(matrix_json: Path, report_out: Optional[Path], fmt: str, figures):
    """Compute the full report from a raw confusion-matrix JSON file."""
    try:
        doc = json.loads(_read_bytes(matrix_json))
    except json.JSONDecodeError as exc:
        raise DataError(f"matrix file is not valid JSON: {exc}") from None
    report = evaluate_matrix(confusion_from_dict(doc))
    _emit_report(report, report_out, fmt)
    _report_figures(report, figures)


@main.command()
@click.argument("out_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--samples", "-n", type=int, default=473, show_default=True, help="Rows to generate.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Random seed.")
@click.option("--noise", type=float, default=0.0, show_default=True, help="Label noise rate in [0, 1].")
@click.option(
    "--class-mix",
    type=str,
    default=None,
    help="Override the class mix, e.g. 'red=0.67,yellow=0.12,orange=0.16,green=0.05'.",
)
@click.option(
    "--standards",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON file overriding the default quality standards.",
)
@_guard
def synth(out_csv: Path, samples: int, seed: int, noise: float, class_mix, standards):
    """Write a synthetic labeled CSV that follows the violation-count rule."""
    dataset = generate_synthetic(
        samples,
        seed,
        standards=_load_standards(standards),
        noise_rate=noise,
        class_mix=_parse_class_mix(class_mix),
    )
    _write_atomic(out_csv, write_csv(dataset))
    click.echo(f"wrote {len(dataset)} rows to {out_csv}")


@main.command(name="plot-data")
@click.argument("model_in", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("labeled_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("out_csv", type=click.Path(dir_okay=False, path_type=Path))
@_figures_option
@_guard
def plot_data(model_in: Path, labeled_csv: Path, out_csv: Path, figures):
    """Export observed-vs-predicted rows for external scatter plotting."""
    model = _load_model(model_in)
    dataset = parse_csv(_read_bytes(labeled_csv), require_label=True)

    rows = []
    for i, row in enumerate(dataset):
        predicted = _argmax_level(forest_predict_proba(model, row.sample))
        rows.append((i, row.sample.features(), row.level, predicted))

    lines = ["index,do_mg_l,ph,bod_mg_l,tss_mg_l,true_level,predicted_level"]
    for i, features, true_level, predicted in rows:
        values = ",".join(format_number(v) for v in features)
        lines.append(f"{i},{values},{true_level.label},{predicted.label}")
    _write_atomic(out_csv, "\r\n".join(lines) + "\r\n")
    click.echo(f"wrote {len(rows)} rows to {out_csv}")

    if figures is not None:
        from . import plots

        for path in plots.save_scatter_pairs(rows, Path(figures)):
            click.echo(f"wrote {path}", err=True)


if __name__ == "__main__":
    main()

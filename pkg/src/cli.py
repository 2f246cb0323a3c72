"""Command-line interface for curvemix."""

import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from . import __version__
from .core.gp import default_prior, fit_gp
from .core.hetgp import fit_hetgp
from .core.monitoring import cross_validate_k, evaluate as evaluate_model, score_stream
from .core.omgp import OmgpModel, default_omgp_prior, fit_omgp, heteroscedastic_update
from .data.loader import apply_normalization, load_csv, load_dataset, normalize, split, write_csv
from .data.models import Dataset
from .data.outliers import knn_outlier_filter
from .data.synthetic import PRESETS, generate_synthetic
from .exporters.csv_export import (
    export_classification,
    export_crossval,
    export_curves,
    export_simplex,
)
from .exporters.json_export import export_to_json, export_to_jsonl
from .exporters.model_file import ModelFile, load_model, save_model
from .utils.config import FilterConfig, HetGpConfig, OmgpConfig, OptimizerConfig, config
from .utils.errors import CurveMixError, DataError, ModelFileError, NumericalError
from .utils.log import console as err_console
from .utils.log import setup_logging

console = Console()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

MODEL_KINDS = ["gp", "hetgp", "omgp", "omgp_het"]


class CurveMixGroup(click.Group):
    """Click group that maps failures onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            rv = EXIT_USAGE
        except click.ClickException as exc:
            exc.show()
            rv = exc.exit_code
        except click.Abort:
            err_console.print("Aborted!")
            rv = EXIT_USAGE
        except (DataError, ModelFileError) as exc:
            err_console.print(f"[red]Error: {exc}[/red]")
            rv = EXIT_DATA
        except NumericalError as exc:
            err_console.print(f"[red]Numerical failure: {exc}[/red]")
            rv = EXIT_NUMERICAL
        except CurveMixError as exc:
            err_console.print(f"[red]Error: {exc}[/red]")
            rv = EXIT_DATA

        code = rv if isinstance(rv, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


@click.group(cls=CurveMixGroup)
@click.version_option(version=__version__)
@click.option("--log-level", default=None, help="Log level (default: CURVEMIX_LOG or WARNING)")
def cli(log_level):
    """Power-curve modelling with mixtures of Gaussian processes."""
    setup_logging(log_level)


def main():
    """Console-script entry point."""
    cli()


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _prepare_data(data_path: str, fit_info: dict, model_file: Optional[ModelFile] = None):
    """Load, normalize and filter data the same way at fit and evaluation time."""
    records = load_csv(data_path)
    if not records:
        raise DataError(f"no usable records in {data_path}")
    if model_file is None:
        dataset = normalize(records)
    else:
        dataset = apply_normalization(records, model_file.norm_stats)

    knn = fit_info.get("filter")
    if knn:
        dataset, removed = knn_outlier_filter(dataset, knn["k"], knn["quantile"])
        console.print(f"[dim]Outlier filter removed {removed.size} points[/dim]")
    return dataset


def _train_test(dataset: Dataset, fit_info: dict) -> tuple[Dataset, Dataset]:
    fraction = fit_info.get("train_fraction", 1.0)
    if fraction >= 1.0:
        return dataset, dataset
    return split(dataset, fraction, fit_info.get("seed", 0))


def _param_table(title: str, rows: list[tuple[str, dict, dict]]) -> Table:
    table = Table(title=title)
    table.add_column("Component", style="cyan")
    table.add_column("Mean", style="green")
    table.add_column("Kernel", style="magenta")
    for name, mean, kernel in rows:
        table.add_row(
            name,
            ", ".join(f"{k}={v:.4g}" if k != "kind" else v for k, v in mean.items()),
            ", ".join(f"{k}={v:.4g}" if k != "kind" else v for k, v in kernel.items()),
        )
    return table


def _display_model(model) -> None:
    if isinstance(model, OmgpModel):
        rows = [
            (str(k), c.mean.to_dict(), c.kernel.to_dict())
            for k, c in enumerate(model.prior.component_priors)
        ]
        console.print(_param_table("Fitted components", rows))
        console.print(f"Shared noise std: [bold]{model.prior.shared_noise_std:.4g}[/bold]")
        console.print(f"Final bound: [bold]{model.bound:.4f}[/bold]")
        counts = np.bincount(
            np.argmax(model.responsibilities.pi_hat, axis=1), minlength=model.k_components
        )
        console.print(f"MAP counts: {counts.tolist()}")
        return

    prior = model.prior
    console.print(_param_table("Fitted GP", [("0", prior.mean.to_dict(), prior.kernel.to_dict())]))
    console.print(f"Noise std: [bold]{prior.noise_std:.4g}[/bold]")


def _fit(
    kind: str,
    train: Dataset,
    k: int,
    seed: int,
    opt: OptimizerConfig,
    max_em: int,
    em_restarts: int = 1,
):
    if kind in ("gp", "hetgp"):
        prior = default_prior(train)
        if kind == "gp":
            return fit_gp(train, prior, opt, seed=seed)
        return fit_hetgp(
            train, prior, HetGpConfig(optimizer=opt, noise_optimizer=opt), seed=seed
        )

    omgp_config = replace(OmgpConfig(), max_em=max_em, m_step=opt, em_restarts=em_restarts)
    model = fit_omgp(train, default_omgp_prior(train, k), omgp_config, seed=seed)
    if kind == "omgp_het":
        model = heteroscedastic_update(model, omgp_config, seed=seed)
    return model


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="three-trend")
@click.option("--n", "n_points", type=click.IntRange(min=1), default=3000, help="Points")
@click.option("--seed", type=int, default=None, help="Random seed (default: CURVEMIX_SEED)")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def generate(preset, n_points, seed, out_path):
    """Generate a labeled synthetic power-curve dataset as CSV."""
    seed = config.seed if seed is None else seed
    dataset = generate_synthetic(PRESETS[preset](n_points=n_points, seed=seed))
    path = write_csv(dataset, out_path)
    counts = np.bincount(dataset.labels).tolist()
    console.print(f"[green]✓ Wrote {len(dataset)} points to {path}[/green]")
    console.print(f"[dim]Component counts: {counts}[/dim]")


@cli.command(name="filter")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None)
@click.option("--k", type=click.IntRange(min=1), default=FilterConfig.k, help="Neighbour rank")
@click.option(
    "--quantile",
    type=click.FloatRange(0, 1, min_open=True),
    default=FilterConfig.quantile,
    help="Distance quantile kept",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def filter_outliers(data_path, k, quantile, out_path):
    """Remove kNN outliers from a CSV file."""
    dataset = load_dataset(data_path or config.data_path)
    kept, removed = knn_outlier_filter(dataset, k, quantile)
    path = write_csv(kept, out_path)
    console.print(f"[green]✓ Kept {len(kept)} points, removed {removed.size} → {path}[/green]")


@cli.command()
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None)
@click.option("--kind", type=click.Choice(MODEL_KINDS), default="omgp", help="Model type")
@click.option("--k", type=click.IntRange(min=1), default=3, help="Number of components")
@click.option(
    "--train-frac",
    type=click.FloatRange(0, 1, min_open=True),
    default=1 / 3,
    help="Training fraction (1 uses all data)",
)
@click.option("--seed", type=int, default=None, help="Random seed (default: CURVEMIX_SEED)")
@click.option("--filter-k", type=click.IntRange(min=1), default=None, help="Apply kNN filter")
@click.option("--filter-quantile", type=float, default=FilterConfig.quantile)
@click.option("--restarts", type=click.IntRange(min=1), default=1, help="Optimizer restarts")
@click.option("--max-iter", type=click.IntRange(min=1), default=50, help="Optimizer iterations")
@click.option("--max-em", type=click.IntRange(min=1), default=OmgpConfig.max_em, help="EM rounds")
@click.option(
    "--em-restarts",
    type=click.IntRange(min=1),
    default=OmgpConfig.em_restarts,
    help="Whole EM runs; the best final bound is kept",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="model.json")
def fit(
    data_path,
    kind,
    k,
    train_frac,
    seed,
    filter_k,
    filter_quantile,
    restarts,
    max_iter,
    max_em,
    em_restarts,
    out_path,
):
    """Fit a model and write it to a JSON model file."""
    seed = config.seed if seed is None else seed
    data_path = data_path or config.data_path
    fit_info = {
        "data": str(data_path),
        "seed": seed,
        "train_fraction": train_frac,
        "filter": None if filter_k is None else {"k": filter_k, "quantile": filter_quantile},
        "k": k if kind.startswith("omgp") else 1,
        "restarts": restarts,
        "max_iter": max_iter,
        "max_em": max_em,
        "em_restarts": em_restarts,
    }

    dataset = _prepare_data(data_path, fit_info)
    train, _ = _train_test(dataset, fit_info)
    opt = OptimizerConfig(restarts=restarts, max_iter=max_iter)

    with console.status(f"Fitting {kind} on {len(train)} points..."):
        model = _fit(kind, train, k, seed, opt, max_em, em_restarts)

    _display_model(model)
    path = save_model(model, out_path, dataset.norm_stats, fit_info)
    console.print(f"\n[green]✓ Model written to {path}[/green]")


@cli.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default="model.json")
@click.option("--grid-size", type=click.IntRange(min=2), default=200, help="Grid points")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def predict(model_path, grid_size, out_path):
    """Write per-component mean curves with 3-sigma bands."""
    model_file = load_model(model_path)
    model = model_file.model
    train_x = model.train_x if hasattr(model, "train_x") else model.f_model.train_x
    grid = np.linspace(float(train_x.min()), float(train_x.max()), grid_size)
    path = export_curves(model, grid, out_path, model_file.norm_stats)
    console.print(f"[green]✓ Curves written to {path}[/green]")


@cli.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default="model.json")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def classify(model_path, out_path):
    """Write the MAP component of every training point."""
    model_file = load_model(model_path)
    if not isinstance(model_file.model, OmgpModel):
        raise click.UsageError("classify needs a mixture model (omgp or omgp_het)")
    path = export_classification(model_file.model, out_path, model_file.norm_stats)

    counts = np.bincount(
        np.argmax(model_file.model.responsibilities.pi_hat, axis=1),
        minlength=model_file.model.k_components,
    )
    table = Table(title="Training points per component")
    table.add_column("Component", style="cyan")
    table.add_column("Points", style="green")
    for k, count in enumerate(counts):
        table.add_row(str(k), str(count))
    console.print(table)
    console.print(f"[green]✓ Labels written to {path}[/green]")


@cli.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default="model.json")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None)
@click.option("--threshold", type=float, default=None, help="Entropy threshold in nats")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--simplex", "simplex_path", type=click.Path(dir_okay=False), default=None)
def monitor(model_path, data_path, threshold, out_path, simplex_path):
    """Score new observations by component posterior entropy."""
    model_file = load_model(model_path)
    model = model_file.model
    if not isinstance(model, OmgpModel):
        raise click.UsageError("monitor needs a mixture model (omgp or omgp_het)")

    raw = load_csv(data_path or config.data_path)
    observations = apply_normalization(raw, model_file.norm_stats)
    records = score_stream(model, zip(observations.x, observations.y), threshold)
    path = export_to_jsonl(records, out_path)

    flagged = sum(r.flagged for r in records)
    console.print(f"[green]✓ Scored {len(records)} observations → {path}[/green]")
    console.print(f"Flagged: [bold]{flagged}[/bold]")

    if simplex_path:
        if model.k_components != 3:
            raise click.UsageError("simplex coordinates need exactly 3 components")
        export_simplex(records, simplex_path)
        console.print(f"[green]✓ Simplex coordinates written to {simplex_path}[/green]")


@cli.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default="model.json")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def evaluate(model_path, data_path, out_path):
    """Score a model on the held-out split recorded at fit time."""
    model_file = load_model(model_path)
    fit_info = model_file.fit_info
    data_path = data_path or fit_info.get("data") or config.data_path

    dataset = _prepare_data(data_path, fit_info, model_file)
    _, test = _train_test(dataset, fit_info)
    report = evaluate_model(model_file.model, test)

    table = Table(title=f"Evaluation ({report.model_kind})")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("NMSE (%)", f"{report.nmse_percent:.4f}")
    table.add_row("MSD", f"{report.msd:.4f}")
    table.add_row("Test points", str(report.n_test))
    table.add_row("Per component", str(report.per_component_counts))
    console.print(table)

    if out_path:
        path = export_to_json(report, out_path)
        console.print(f"[green]✓ Report written to {path}[/green]")


@cli.command()
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None)
@click.option("--k-min", type=click.IntRange(min=1), default=1)
@click.option("--k-max", type=click.IntRange(min=1), default=5)
@click.option("--repeats", type=click.IntRange(min=1), default=12)
@click.option("--seed", type=int, default=None, help="Random seed (default: CURVEMIX_SEED)")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel repeats")
@click.option("--max-iter", type=click.IntRange(min=1), default=50, help="Optimizer iterations")
@click.option("--max-em", type=click.IntRange(min=1), default=OmgpConfig.max_em, help="EM rounds")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def crossval(data_path, k_min, k_max, repeats, seed, workers, max_iter, max_em, out_path):
    """Compare the final bound across numbers of components."""
    if k_max < k_min:
        raise click.UsageError("--k-max must be >= --k-min")
    seed = config.seed if seed is None else seed
    dataset = load_dataset(data_path or config.data_path)
    omgp_config = replace(
        OmgpConfig(), max_em=max_em, m_step=OptimizerConfig(restarts=1, max_iter=max_iter)
    )

    with console.status(f"Fitting K={k_min}..{k_max} with {repeats} repeats..."):
        result = cross_validate_k(
            dataset,
            range(k_min, k_max + 1),
            repeats=repeats,
            seed=seed,
            config=omgp_config,
            workers=workers or config.workers,
        )

    table = Table(title="Corrected bound per K")
    table.add_column("K", style="cyan")
    table.add_column("Mean", style="green")
    table.add_column("Std", style="yellow")
    for row in result.rows():
        marker = " ←" if row["k"] == result.selected_k else ""
        table.add_row(f"{row['k']}{marker}", f"{row['mean_bound']:.3f}", f"{row['std_bound']:.3f}")
    console.print(table)
    console.print(f"Selected K: [bold]{result.selected_k}[/bold]")

    if out_path:
        path = export_crossval(result, Path(out_path))
        console.print(f"[green]✓ Bounds written to {path}[/green]")


if __name__ == "__main__":
    main()

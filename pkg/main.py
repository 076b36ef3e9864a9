"""Command-line entry point for the urban change agent."""

import logging
import os
import sys
from typing import Optional, Sequence

import click
import toml
from rich.console import Console
from rich.table import Table

from src.agent.loop import run_agent
from src.agent.providers import build_provider
from src.agent.trace import TraceWriter
from src.config import Settings, load_settings
from src.controller.gazetteer import Gazetteer
from src.data_loader import ingest_path
from src.errors import ProviderError, UrbanAgentError
from src.harness.ablation import ABLATION_ORDER, get_ablation
from src.harness.evaluation import LEVELS, format_report, run_eval
from src.harness.fixtures import CASES, generate_all
from src.harness.repl import PROMPT, Repl, describe_asset
from src.registry import AssetRegistry
from src.utils.latency_tracker import latency_tracker
from src.utils.logger import configure_logging, setup_logger

logger = setup_logger(__name__)
console = Console()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3

PROVIDERS = ("scripted", "remote")


def show_latency():
    """Print per-name latency statistics collected during the command."""
    stats = latency_tracker.get_statistics()
    if not stats:
        return
    table = Table(title="Latency (ms)")
    for column in ("name", "calls", "avg", "median", "min", "max"):
        table.add_column(column)
    for name, row in stats.items():
        table.add_row(name, str(row['total_calls']), f"{row['avg_response_time']:.1f}",
                      f"{row['median_response_time']:.1f}", f"{row['min_response_time']:.1f}",
                      f"{row['max_response_time']:.1f}")
    console.print(table)


def open_registry(settings: Settings, journal: Optional[str], alignment: bool = True) -> AssetRegistry:
    if journal:
        return AssetRegistry.open(journal, run_dir=settings.paths.run_dir, alignment=alignment)
    return AssetRegistry(run_dir=settings.paths.run_dir, alignment=alignment)


def load_gazetteer(settings: Settings, path: Optional[str]) -> Optional[Gazetteer]:
    path = path or settings.paths.gazetteer
    return Gazetteer.load(path, settings.aliases) if path else None


def ingest_all(paths: Sequence[str], registry: AssetRegistry) -> None:
    for path in paths:
        ingest_path(path, registry)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="TOML file overriding the default settings.")
@click.option("-v", "--verbose", is_flag=True, help="Echo INFO logs to the console.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Answer what / where / why questions about urban change from tables, vectors and rasters."""
    try:
        ctx.obj = load_settings(config_path)
    except (ValueError, toml.TomlDecodeError) as e:
        raise click.UsageError(f"Bad config {config_path}: {e}")
    configure_logging(ctx.obj.paths.log_dir, logging.INFO if verbose else logging.WARNING)


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--journal", type=click.Path(dir_okay=False), help="Registry journal to append to.")
@click.pass_obj
def ingest(settings, paths, journal):
    """Register data files, directories or manifest directories."""
    registry = open_registry(settings, journal)
    ingest_all(paths, registry)
    table = Table(title=f"{len(registry)} assets")
    for column in ("file", "alias", "modality", "extent", "time", "guid"):
        table.add_column(column)
    for asset in registry.list_assets():
        table.add_row(asset.filename, asset.name or "", asset.modality.value,
                      str(asset.geo_extent or ""), asset.time_tag or "", asset.guid)
    console.print(table)


@cli.command()
@click.argument("query")
@click.option("--data", "data_paths", multiple=True, type=click.Path(exists=True),
              help="File or directory to ingest before answering (repeatable).")
@click.option("--journal", type=click.Path(dir_okay=False), help="Registry journal to reuse.")
@click.option("--provider", "provider_kind", type=click.Choice(PROVIDERS), default="scripted", show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False), help="Transcript for the scripted provider.")
@click.option("--ablation", default="full", type=click.Choice(ABLATION_ORDER), show_default=True)
@click.option("--gazetteer", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Write the JSONL event trace here.")
@click.pass_obj
def ask(settings, query, data_paths, journal, provider_kind, script, ablation, gazetteer, trace_path):
    """Answer a single question and print the answer with its artifacts."""
    config = get_ablation(ablation)
    registry = open_registry(settings, journal, config.alignment)
    if config.data_ingested:
        ingest_all(data_paths, registry)
    provider = build_provider(provider_kind, settings.provider, script, registry)
    answer = run_agent(query, registry, config.toolset(), provider, settings,
                       gazetteer=load_gazetteer(settings, gazetteer), previews=config.previews,
                       trace=TraceWriter(trace_path))
    click.echo(answer.text)
    for guid in answer.artifacts:
        console.print(f"  artifact: {registry.resolve(guid).uri}")
    if answer.flags:
        console.print(f"[yellow]flags: {', '.join(answer.flags)}[/yellow]")
    show_latency()


@cli.command()
@click.option("--data", "data_paths", multiple=True, type=click.Path(exists=True))
@click.option("--journal", type=click.Path(dir_okay=False))
@click.option("--provider", "provider_kind", type=click.Choice(PROVIDERS), default="remote", show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--gazetteer", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def repl(settings, data_paths, journal, provider_kind, script, gazetteer):
    """Interactive multi-turn session (type :help for commands)."""
    registry = open_registry(settings, journal)
    ingest_all(data_paths, registry)
    provider = build_provider(provider_kind, settings.provider, script, registry)
    session = Repl(registry, get_ablation("full").toolset(), provider, settings,
                   load_gazetteer(settings, gazetteer),
                   TraceWriter(os.path.join(settings.paths.run_dir, "repl_trace.jsonl")))
    for guid in registry.assets:
        click.echo(describe_asset(registry, guid))

    def lines():
        while True:
            try:
                yield input(PROMPT)
            except EOFError:
                return

    session.run(lines(), click.echo)


@cli.command()
@click.option("--case", "case_id", type=click.Choice(CASES + ("all",)), default="all", show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="fixtures", show_default=True)
def fixture(case_id, seed, out_dir):
    """Generate synthetic case data, question banks, oracles and transcripts."""
    cases = CASES if case_id == "all" else (case_id,)
    for case in generate_all(seed, out_dir, cases):
        console.print(f"{case.case}: {len(case.questions)} questions in {case.directory}")


@cli.command(name="eval")
@click.option("--fixtures", "fixtures_dir", type=click.Path(exists=True, file_okay=False), default="fixtures",
              show_default=True)
@click.option("--ablation", "ablations", multiple=True, type=click.Choice(ABLATION_ORDER),
              help="Configuration to score (repeatable; default all).")
@click.option("--provider", "provider_kind", type=click.Choice(PROVIDERS), default="scripted", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Directory for run artifacts and scores.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_obj
def evaluate(settings, fixtures_dir, ablations, provider_kind, out_dir, workers):
    """Score the question bank under each ablation configuration."""
    reports = run_eval(fixtures_dir, ablations or ABLATION_ORDER, settings, out_dir, provider_kind,
                       workers=workers, progress=True)
    table = Table(title="Ablation scores")
    for column in ("config",) + LEVELS + ("Overall",):
        table.add_column(column)
    for report in reports:
        tally = report.tally()
        table.add_row(report.config, *[f"{tally[k][0]}/{tally[k][1]}" for k in LEVELS + ("Overall",)])
    console.print(table)
    click.echo(format_report(reports))
    show_latency()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures onto exit codes."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="urban-agent",
                          standalone_mode=False)
        return result if isinstance(result, int) else EXIT_OK
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except ProviderError as e:
        logger.error(f"Provider error: {str(e)}")
        console.print(f"[red]Provider error:[/red] {e}")
        return EXIT_PROVIDER
    except UrbanAgentError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        console.print(f"[red]{type(e).__name__}:[/red] {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Batch command-line entry point.

Subcommands: discover, evaluate-rule, oracle-sweep, map, serve. All JSON
artifacts are written deterministically (sorted keys, fixed separators) so
identical invocations produce byte-identical files. Exit codes: 0 success,
2 validation error, 1 runtime error.
"""

from __future__ import annotations

import json
import pathlib
import sys

import click

from .dataset import load_schema, load_table
from .discovery import DiscoveryConfig, discover, evaluate_rule, results_to_json
from .errors import (
    CandidateSpaceError,
    ConfigError,
    IngestionError,
    RuleSyntaxError,
    RuleValueError,
    SchemaError,
    SliceKitError,
)
from .ranking import RankingSpec
from .rules import parse_rule

_VALIDATION_ERRORS = (
    SchemaError, IngestionError, RuleSyntaxError, RuleValueError, ConfigError,
    CandidateSpaceError,
)


def _dump_json(payload, out):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_matrix(data, schema):
    return load_table(data, load_schema(schema))


def _specs_from_options(matrix, outcome, rank):
    """Build RankingSpecs from --rank kind[:weight] options; defaults to
    outcome-rate-high weight 2 plus group-size weight 1."""
    if outcome is None:
        outcome = matrix.first_binary_outcome()
        if outcome is None:
            outcome = next(iter(matrix.outcomes), None)
    if outcome is None:
        raise ConfigError("dataset has no outcome column")
    if not rank:
        return (
            RankingSpec(kind="outcome-rate-high", outcome=outcome, weight=2),
            RankingSpec(kind="group-size", weight=1),
        )
    specs = []
    for item in rank:
        kind, _, weight = item.partition(":")
        from .ranking import OUTCOME_KINDS

        specs.append(RankingSpec(
            kind=kind,
            outcome=outcome if kind in OUTCOME_KINDS else None,
            weight=int(weight) if weight else 1,
        ))
    return tuple(specs)


def _run(fn):
    try:
        fn()
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except SliceKitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.version_option()
def main():
    """Subgroup discovery over discrete tabular data."""


def _common_data_options(fn):
    fn = click.option("--data", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="CSV/TSV dataset path.")(fn)
    fn = click.option("--schema", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="JSON or TOML schema path.")(fn)
    return fn


@main.command("discover")
@_common_data_options
@click.option("--outcome", default=None, help="Outcome column to rank on.")
@click.option("--rank", multiple=True,
              help="Ranking function kind[:weight]; repeatable.")
@click.option("--n", "n_samples", default=100, show_default=True,
              help="Number of sampled source rows.")
@click.option("--min-size", default=0.01, show_default=True,
              help="Minimum subgroup size fraction.")
@click.option("--beam", default=50, show_default=True, help="Beam width.")
@click.option("--depth", default=3, show_default=True,
              help="Maximum rule length.")
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--max-results", default=100, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Output JSON path (stdout when omitted).")
def discover_cmd(data, schema, outcome, rank, n_samples, min_size, beam,
                 depth, seed, workers, max_results, out):
    """Run sampled beam-search discovery and write ranked results as JSON."""
    def go():
        matrix = _load_matrix(data, schema)
        specs = _specs_from_options(matrix, outcome, rank)
        config = DiscoveryConfig(
            specs=specs, n_samples=n_samples, min_size=min_size,
            beam_width=beam, max_length=depth, seed=seed, workers=workers,
            max_results=max_results,
        )
        results = discover(matrix, config)
        _dump_json(results_to_json(results, config), out)
        click.echo(f"seed={seed} results={len(results)}", err=True)

    _run(go)


@main.command("evaluate-rule")
@_common_data_options
@click.option("--rule", required=True, help="Rule text to evaluate.")
@click.option("--outcome", default=None)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def evaluate_rule_cmd(data, schema, rule, outcome, out):
    """Evaluate one rule and print its metrics on both splits."""
    def go():
        matrix = _load_matrix(data, schema)
        specs = _specs_from_options(matrix, outcome, ())
        parsed = parse_rule(rule, matrix)
        result = evaluate_rule(parsed, matrix, specs)
        if out is not None:
            _dump_json(result.to_json_dict(), out)
            return
        click.echo(f"rule: {result.rule}")
        for split_name, metrics in (("discovery", result.discovery),
                                    ("evaluation", result.evaluation)):
            click.echo(f"{split_name}: size={metrics.size} "
                       f"({metrics.size_fraction:.4%})")
            for name, stats in metrics.outcomes.items():
                parts = ", ".join(
                    f"{k}={v:.4f}" if v is not None else f"{k}=n/a"
                    for k, v in stats.items())
                click.echo(f"  {name}: {parts}")

    _run(go)


@main.command("oracle-sweep")
@_common_data_options
@click.option("--outcome", default=None)
@click.option("--n-grid", default="10,100,200", show_default=True,
              help="Comma-separated n_samples values.")
@click.option("--min-size-grid", default="0.01", show_default=True,
              help="Comma-separated p_min values.")
@click.option("--trials", default=3, show_default=True)
@click.option("--depth", default=3, show_default=True)
@click.option("--beam", default=50, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output CSV path.")
def oracle_sweep_cmd(data, schema, outcome, n_grid, min_size_grid, trials,
                     depth, beam, out):
    """Sweep runtime and recall@50 against the exhaustive baseline."""
    def go():
        from .oracle import run_sweep

        matrix = _load_matrix(data, schema)
        specs = _specs_from_options(matrix, outcome, ())
        cells = run_sweep(
            matrix,
            n_samples_grid=[int(v) for v in n_grid.split(",")],
            p_min_grid=[float(v) for v in min_size_grid.split(",")],
            trials=trials, specs=specs, max_length=depth, beam_width=beam,
            out_path=out,
        )
        click.echo(f"wrote {len(cells)} sweep cells to {out}", err=True)

    _run(go)


@main.command("map")
@_common_data_options
@click.option("--outcome", default=None)
@click.option("--rule", multiple=True,
              help="Subgroup rule text to overlay; repeatable, at most 8.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def map_cmd(data, schema, outcome, rule, seed, out):
    """Compute the 2-D subgroup map layout and write it as JSON."""
    def go():
        from .groupmap import build_layout

        matrix = _load_matrix(data, schema)
        rules = [parse_rule(text, matrix) for text in rule]
        layout = build_layout(matrix, seed=seed, subgroups=rules,
                              outcome=outcome)
        _dump_json(layout.to_json_dict(), out)
        click.echo(f"seed={seed} bubbles={len(layout.bubbles)}", err=True)

    _run(go)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--data-root", default=None, type=click.Path(file_okay=False),
              help="Directory that dataset paths resolve against.")
@click.option("--snapshot-dir", default=None, type=click.Path(file_okay=False),
              help="Directory for favorites/config snapshots.")
@click.option("--static", "static_dir", default=None,
              type=click.Path(file_okay=False),
              help="Built web client to serve at / (default: frontend/dist "
                   "if present).")
def serve_cmd(host, port, data_root, snapshot_dir, static_dir):
    """Start the exploration HTTP service."""
    from .server import main as serve_main

    if static_dir is None:
        default_static = pathlib.Path("frontend/dist")
        if default_static.is_dir():
            static_dir = str(default_static)
    serve_main(host=host, port=port, data_root=data_root,
               snapshot_dir=snapshot_dir, static_dir=static_dir)


if __name__ == "__main__":
    main()

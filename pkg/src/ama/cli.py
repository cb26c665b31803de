"""Command-line entry point: ``ama <command> --scenario FILE --out DIR [--seed N] [--eps1 X] [--eps2 X]``.

Failures print a JSON error record on stderr (also written to
``DIR/error.json`` when the directory can be created) and exit non-zero:
2 for scenario/validation problems, 1 for any other module error.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys

import click

from . import runner
from .model import ValidationError
from .scenario import ScenarioError, load_document, parse_scenario, scenario_from_dict

EXIT_INVALID = 2
EXIT_FAILED = 1


def _error_record(exc: Exception, command: str) -> dict:
    rec = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ScenarioError):
        rec["location"] = exc.location
        rec["message"] = exc.message
    return rec


def _fail(exc: Exception, command: str, out_dir) -> None:
    rec = _error_record(exc, command)
    text = json.dumps(rec, sort_keys=True)
    click.echo(text, err=True)
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass
    sys.exit(EXIT_INVALID if isinstance(exc, ValidationError) else EXIT_FAILED)


def _apply_overrides(sc, eps1, eps2):
    changes = {k: v for k, v in (("eps1", eps1), ("eps2", eps2)) if v is not None}
    if not changes:
        return sc
    return sc.with_changes(solver=dataclasses.replace(sc.solver, **changes))


def _common(f):
    f = click.option("--eps2", type=float, default=None, help="Override solver.eps2.")(f)
    f = click.option("--eps1", type=float, default=None, help="Override solver.eps1.")(f)
    f = click.option("--seed", type=click.IntRange(min=0), default=None,
                     help="Seed for UE generation, initial perturbation and random benchmarks.")(f)
    f = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
                     help="Directory for the result bundle.")(f)
    f = click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False),
                     help="Scenario file (YAML).")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Near-field UAV-swarm antenna simulator."""


def _make_command(name: str):
    @_common
    def cmd(scenario_path, out_dir, seed, eps1, eps2):
        try:
            sc = _apply_overrides(parse_scenario(scenario_path, seed), eps1, eps2)
            res = runner.run(name, sc, out_dir, seed)
        except Exception as exc:  # every module error becomes a record
            _fail(exc, name, out_dir)
            return
        if isinstance(res, dict):
            for m, b in res.items():
                click.echo(f"{m}: min average rate {runner.fmt(b.min_average)} bit/s/Hz")
        else:
            click.echo(f"{name}: min average rate {runner.fmt(res.min_average)} bit/s/Hz")

    cmd.__doc__ = f"Run {name} and write its result bundle."
    return click.command(name)(cmd)


for _name in runner.COMMANDS:
    main.add_command(_make_command(_name))


@main.command("sweep")
@click.option("--axis", type=click.Choice(runner.SWEEP_AXES), required=True)
@click.option("--values", required=True, help="Comma-separated sorted values, e.g. 10,20,30,40.")
@_common
def sweep_cmd(axis, values, scenario_path, out_dir, seed, eps1, eps2):
    """Run bench-suite once per value and tabulate the min average rates."""
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
        if axis == "K":
            vals = [int(v) for v in vals]
        doc = load_document(scenario_path)
        scenario_from_dict(doc, seed)  # fail before the first run on a bad base scenario
        if eps1 is not None or eps2 is not None:
            doc = dict(doc)
            solver = dict(doc.get("solver") or {})
            if eps1 is not None:
                solver["eps1"] = eps1
            if eps2 is not None:
                solver["eps2"] = eps2
            doc["solver"] = solver
        methods, rows = runner.sweep(axis, vals, doc, out_dir, seed)
    except Exception as exc:
        _fail(exc, "sweep", out_dir)
        return
    click.echo(",".join([axis] + list(methods)))
    for v, rates in rows:
        click.echo(",".join([runner.fmt(v)] + [runner.fmt(r) for r in rates]))


if __name__ == "__main__":
    main()

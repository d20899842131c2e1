"""Command-line front end: single runs, Monte-Carlo batches, log export.

Every run directory gets the fully resolved config written next to the
outputs, so a run can be replayed exactly from its own artifacts.  Exit
codes are 0 (success), 1 (usage or config error), 2 (task failure, i.e.
a failed trial).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click
import yaml

from .config import (
    ConfigError,
    ScenarioConfig,
    apply_override,
    default_config,
    dump_config,
    load_config,
)
from .pipeline import run_batch, run_trial
from .runlog import ChannelError, export_csv, read_runlog, write_runlog

__all__ = ["main", "cmd_run", "cmd_batch", "cmd_export", "cmd_validate"]


def _fail_usage(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load(config_path: Optional[str], overrides: Tuple[str, ...]) -> ScenarioConfig:
    try:
        cfg = load_config(config_path) if config_path else default_config()
        for assignment in overrides:
            apply_override(cfg, assignment)
    except ConfigError as exc:
        _fail_usage(str(exc))
    return cfg


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


_config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Scenario config file (defaults used when omitted).",
)
_set_option = click.option(
    "--set", "overrides", multiple=True, metavar="KEY=VALUE",
    help="Override one config value (dotted path, repeatable).",
)
_out_option = click.option(
    "--out", "out_dir", type=click.Path(file_okay=False), required=True,
    help="Output directory (created if missing).",
)


@click.group()
def main() -> None:
    """Dual-arm panel assembly simulator."""


@main.command("validate")
@_config_option
@_set_option
def cmd_validate(config_path: Optional[str], overrides: Tuple[str, ...]) -> None:
    """Parse and validate a scenario config."""
    _load(config_path, overrides)
    click.echo("config ok")


@main.command("run")
@_config_option
@_set_option
@_out_option
@click.option("--seed", type=int, default=None, help="Trial seed (default: config seed).")
@click.option("--randomize", is_flag=True, help="Randomize initial panel poses.")
def cmd_run(
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    out_dir: str,
    seed: Optional[int],
    randomize: bool,
) -> None:
    """Run one trial; write runlog.jsonl, outcome.json, config.yaml."""
    cfg = _load(config_path, overrides)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    outcome, records = run_trial(cfg, seed=seed, randomize=randomize)
    write_runlog(records, out / "runlog.jsonl")
    _write_json(out / "outcome.json", outcome.to_dict())
    if outcome.success:
        click.echo(f"success (final depth {outcome.final_depth_m * 1e3:.1f} mm)")
    else:
        click.echo(f"trial failed: {outcome.modality}", err=True)
        sys.exit(2)


def _sweep_values(sweep: str) -> Tuple[str, List]:
    if "=" not in sweep:
        _fail_usage("--sweep expects KEY=V1,V2,...")
    key, raw = sweep.split("=", 1)
    values = [yaml.safe_load(v) for v in raw.split(",") if v.strip() != ""]
    if not values:
        _fail_usage("--sweep needs at least one value")
    return key.strip(), values


def _run_point(cfg: ScenarioConfig, trials: int, seed: Optional[int], out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    summary, outcomes = run_batch(cfg, trials, seed=seed)
    _write_json(out / "summary.json", summary)
    _write_json(out / "outcomes.json", [o.to_dict() for o in outcomes])
    return summary


@main.command("batch")
@_config_option
@_set_option
@_out_option
@click.option("--trials", type=int, required=True, help="Trials per point (>= 1).")
@click.option("--seed", type=int, default=None, help="Base seed; trial i uses seed+i.")
@click.option(
    "--sweep", default=None, metavar="KEY=V1,V2,...",
    help="Sweep one config key over a list of values, one summary per point.",
)
def cmd_batch(
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    out_dir: str,
    trials: int,
    seed: Optional[int],
    sweep: Optional[str],
) -> None:
    """Run randomized trials; write summary.json and per-trial outcomes."""
    if trials < 1:
        _fail_usage("--trials must be >= 1")
    out = Path(out_dir)
    if sweep is None:
        cfg = _load(config_path, overrides)
        summary = _run_point(cfg, trials, seed, out)
        click.echo(json.dumps(summary, indent=2))
        return
    key, values = _sweep_values(sweep)
    points = []
    for value in values:
        cfg = _load(config_path, overrides)
        try:
            apply_override(cfg, f"{key}={json.dumps(value)}")
        except ConfigError as exc:
            _fail_usage(str(exc))
        leaf = key.rsplit(".", 1)[-1]
        point_dir = out / f"{leaf}={value}"
        summary = _run_point(cfg, trials, seed, point_dir)
        points.append({"key": key, "value": value, "dir": point_dir.name, "summary": summary})
        click.echo(f"{key}={value}: success_rate {summary['success_rate']:.3f}")
    _write_json(out / "sweep.json", {"key": key, "points": points})


@main.command("export")
@click.argument("runlog", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv", show_default=True)
@click.option(
    "--channels", required=True, metavar="A,B,...",
    help="Comma-separated channel names (dotted, e.g. yielding.pose.y).",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def cmd_export(runlog: str, fmt: str, channels: str, out_path: str) -> None:
    """Export run-log channels to CSV for plotting."""
    records = read_runlog(runlog)
    if not records:
        _fail_usage(f"{runlog}: run log is empty")
    names = [c.strip() for c in channels.split(",") if c.strip()]
    if not names:
        _fail_usage("--channels needs at least one channel")
    try:
        export_csv(records, names, out_path)
    except ChannelError as exc:
        _fail_usage(str(exc.args[0]))
    click.echo(f"wrote {out_path} ({len(records)} rows)")


if __name__ == "__main__":
    main()

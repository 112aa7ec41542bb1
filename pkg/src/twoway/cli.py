"""Command-line interface.

    twoway simulate       --config run.toml    one panel as a headerless CSV matrix
    twoway coverage-grid  --config run.toml    coverage of TWCR and bootstrap CIs per cell
    twoway qq             --config run.toml    QQ points of the sample mean
    twoway diagnose       --config run.toml    moment-ratio report
    twoway decide         [flags | --config]   can the TWCR standard error be used?
    twoway bootstrap-ci   --panel data.csv     TWCR and bootstrap CIs for one panel

Errors are reported on stderr as a single line
``twoway: error[<kind>]: <field>: <message>`` with exit status 2 for
configuration errors and 1 for anything else.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from twoway import __version__
from twoway import rng as rngmod
from twoway.bootstrap import BootstrapConfig, two_way_wild_bootstrap
from twoway.config import COMMANDS, PRECISIONS, ConfigError, RunConfig, parse_config
from twoway.decision import (
    DgpCharacterization,
    characterize_spec,
    explain_tree,
    table_verdict,
)
from twoway.dgp import Panel, sample_panel
from twoway.diagnostics import assumption_report, closed_form_report, closed_form_variance
from twoway.estimators import twcr_ci
from twoway.experiments import qq_cell, run_grid
from twoway.output import (
    emit_grid_csv,
    emit_intervals_csv,
    emit_panel_csv,
    emit_qq_csv,
    emit_report_csv,
    read_panel_csv,
)

_DECIDE_FLAGS = DgpCharacterization.TABLE_FIELDS + DgpCharacterization.TREE_FIELDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoway", description="Two-way cluster-robust inference experiments."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="overrides $TWOWAY_SEED and config")
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
        p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--precision", choices=PRECISIONS, help="real formatting (default 6 digits)")
        if name == "bootstrap-ci":
            p.add_argument("--panel", help="comma-separated numeric matrix without header")
        if name == "decide":
            p.add_argument("--j-small-threshold", type=int)
            for flag in _DECIDE_FLAGS:
                p.add_argument(
                    "--" + flag.replace("_", "-"),
                    dest=flag,
                    action=argparse.BooleanOptionalAction,
                    default=None,
                )
    return parser


def _load(args) -> RunConfig:
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
    if not text.strip() and args.command not in ("decide", "bootstrap-ci"):
        raise ConfigError("required for this command", "config")
    return parse_config(text, command=args.command, seed=args.seed)


def _override(cfg: RunConfig, args) -> dict:
    return {
        "output": args.output if args.output is not None else cfg.output_path,
        "workers": args.workers if args.workers is not None else (cfg.workers or 1),
        "precision": args.precision or cfg.precision,
    }


def _decide(cfg: RunConfig, args) -> str:
    flags = {f: getattr(args, f) for f in _DECIDE_FLAGS if getattr(args, f) is not None}
    threshold = args.j_small_threshold or cfg.j_small_threshold
    if cfg.spec is not None:
        base = characterize_spec(cfg.spec, threshold)
    elif cfg.characterization is not None:
        base = cfg.characterization
    else:
        base = DgpCharacterization()
    c = DgpCharacterization(**{**{f: getattr(base, f) for f in _DECIDE_FLAGS}, **flags})
    parts = []
    if c.has_tree_fields:
        verdict, gate = explain_tree(c)
        parts += [f"verdict={verdict.value}", f"gate={gate.value}"]
    if c.has_table_fields:
        parts.append(f"table={table_verdict(c).value}")
    if not parts:
        raise ConfigError(
            "give either a [spec] or the flags of the table or the tree", "decide"
        )
    return " ".join(parts)


def run(args) -> int:
    cfg = _load(args)
    opts = _override(cfg, args)
    out, workers, precision = opts["output"], opts["workers"], opts["precision"]

    if cfg.command == "simulate":
        panel = sample_panel(cfg.spec, rngmod.stream(cfg.seed, 0))
        emit_panel_csv(panel.data, out, precision="full")
    elif cfg.command == "coverage-grid":
        emit_grid_csv(run_grid(cfg.grid, workers=workers), out, precision)
    elif cfg.command == "qq":
        stats = qq_cell(cfg.spec, cfg.replications, cfg.seed, workers=workers)
        emit_qq_csv(stats, out, precision)
    elif cfg.command == "diagnose":
        mc = assumption_report(cfg.spec, cfg.mc_draws, rngmod.stream(cfg.seed, 0))
        exact = closed_form_report(cfg.spec)
        emit_report_csv(
            [("monte_carlo", mc), ("closed_form", exact)],
            closed_form_variance(cfg.spec),
            out,
            precision,
        )
    elif cfg.command == "decide":
        line = _decide(cfg, args)
        if out in (None, "-"):
            print(line)
        else:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(line + "\n")
    elif cfg.command == "bootstrap-ci":
        path = args.panel or cfg.panel_path
        if not path:
            raise ConfigError("required", "panel")
        panel = Panel(read_panel_csv(path))
        boot_cfg = cfg.bootstrap or BootstrapConfig(level=cfg.level)
        results = [
            twcr_ci(panel, level=cfg.level, correction=cfg.correction),
            two_way_wild_bootstrap(panel, boot_cfg, rngmod.stream(cfg.seed, 0)),
        ]
        emit_intervals_csv(results, out, precision)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"twoway: error[config]: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, TypeError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"twoway: error[{type(exc).__name__}]: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration files.

Configs are TOML documents: a handful of top-level keys plus the sections
``[spec]``, ``[grid]``, ``[bootstrap]`` and ``[decide]``. Parsing is strict:
unknown keys, and keys the chosen command does not use, are errors naming
the offending key.

Example (``qq``)::

    command = "qq"
    seed = 2023
    replications = 2000
    output = "qq.csv"

    [spec]
    n_rows = 50
    n_cols = 50
    n_factors = 1
    delta = 0.0
    phi = 0.5
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from twoway import rng as rngmod
from twoway.bootstrap import BootstrapConfig, Multiplier
from twoway.decision import DEFAULT_J_SMALL_THRESHOLD, DgpCharacterization
from twoway.dgp import DgpSpec
from twoway.experiments import GridSpec, MIN_REPLICATIONS

COMMANDS = ("simulate", "coverage-grid", "qq", "diagnose", "decide", "bootstrap-ci")
SEED_ENV_VAR = "TWOWAY_SEED"
PRECISIONS = ("6", "full")

_TOP_LEVEL = {
    "command",
    "seed",
    "output",
    "workers",
    "precision",
    "level",
    "correction",
    "replications",
    "mc_draws",
    "j_small_threshold",
    "panel",
    "spec",
    "grid",
    "bootstrap",
    "decide",
}
# keys (top level or section names) each command accepts beyond the common ones
_COMMON = {"command", "seed", "output", "workers", "precision"}
_BY_COMMAND = {
    "simulate": {"spec"},
    "coverage-grid": {"grid", "bootstrap", "level", "correction"},
    "qq": {"spec", "replications"},
    "diagnose": {"spec", "mc_draws"},
    "decide": {"spec", "decide", "j_small_threshold"},
    "bootstrap-ci": {"panel", "bootstrap", "level", "correction"},
}
_REQUIRED = {
    "simulate": {"spec"},
    "coverage-grid": {"grid"},
    "qq": {"spec", "replications"},
    "diagnose": {"spec", "mc_draws"},
    "decide": set(),
    "bootstrap-ci": set(),
}
_SPEC_KEYS = {"n_rows", "n_cols", "n_factors", "delta", "phi", "weights"}
_GRID_KEYS = {"deltas", "js", "phis", "n_rows", "n_cols", "replications"}
_BOOTSTRAP_KEYS = {"n_draws", "multiplier", "include_degenerate_term"}
_DECIDE_KEYS = set(DgpCharacterization.TABLE_FIELDS) | set(DgpCharacterization.TREE_FIELDS)


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    output_path: Optional[str] = None
    workers: Optional[int] = None
    precision: str = "6"
    spec: Optional[DgpSpec] = None
    grid: Optional[GridSpec] = None
    bootstrap: Optional[BootstrapConfig] = None
    replications: Optional[int] = None
    mc_draws: Optional[int] = None
    panel_path: Optional[str] = None
    level: float = 0.95
    correction: float = 1.0
    j_small_threshold: int = DEFAULT_J_SMALL_THRESHOLD
    characterization: Optional[DgpCharacterization] = None


def _check_keys(table: Mapping[str, Any], allowed: set, prefix: str = "") -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown key", prefix + key)


def _int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", name)
    if value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", name)
    return value


def _real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name)
    return float(value)


def _bool(value, name: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", name)
    return value


def _list(value, name: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty array", name)
    return value


def _seed(value, name: str) -> int:
    if isinstance(value, str):
        try:
            value = int(value, 0)
        except ValueError:
            raise ConfigError(f"not an integer: {value!r}", name) from None
    try:
        return rngmod.check_seed(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), name) from None


def _parse_spec(table) -> DgpSpec:
    if not isinstance(table, dict):
        raise ConfigError("expected a table", "spec")
    _check_keys(table, _SPEC_KEYS, "spec.")
    for key in ("n_rows", "n_cols"):
        if key not in table:
            raise ConfigError("required", f"spec.{key}")
    kwargs = {
        "n_rows": _int(table["n_rows"], "spec.n_rows", 1),
        "n_cols": _int(table["n_cols"], "spec.n_cols", 1),
        "n_factors": _int(table.get("n_factors", 1), "spec.n_factors", 1),
        "delta": _real(table.get("delta", 0.0), "spec.delta"),
        "phi": _real(table.get("phi", 0.0), "spec.phi"),
    }
    if "weights" in table:
        kwargs["weights"] = [_real(w, "spec.weights") for w in _list(table["weights"], "spec.weights")]
    try:
        return DgpSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        field = next((f"spec.{k}" for k in kwargs if k in str(exc)), "spec")
        raise ConfigError(str(exc), field) from None


def _parse_bootstrap(table, level: float) -> BootstrapConfig:
    if not isinstance(table, dict):
        raise ConfigError("expected a table", "bootstrap")
    _check_keys(table, _BOOTSTRAP_KEYS, "bootstrap.")
    n_draws = _int(table.get("n_draws", 399), "bootstrap.n_draws", 1)
    multiplier = table.get("multiplier", "gaussian")
    try:
        multiplier = Multiplier(multiplier)
    except ValueError:
        choices = ", ".join(m.value for m in Multiplier)
        raise ConfigError(f"expected one of {choices}, got {multiplier!r}", "bootstrap.multiplier") from None
    degenerate = _bool(
        table.get("include_degenerate_term", True), "bootstrap.include_degenerate_term"
    )
    return BootstrapConfig(n_draws, multiplier, degenerate, level)


def _parse_grid(table, bootstrap, level, correction, seed) -> GridSpec:
    if not isinstance(table, dict):
        raise ConfigError("expected a table", "grid")
    _check_keys(table, _GRID_KEYS, "grid.")
    for key in ("deltas", "js", "phis"):
        if key not in table:
            raise ConfigError("required", f"grid.{key}")
    deltas = [_real(d, "grid.deltas") for d in _list(table["deltas"], "grid.deltas")]
    js = [_int(j, "grid.js", 1) for j in _list(table["js"], "grid.js")]
    phis = [_real(p, "grid.phis") for p in _list(table["phis"], "grid.phis")]
    if any(p < 0 for p in phis):
        raise ConfigError("must be >= 0", "grid.phis")
    return GridSpec(
        deltas=tuple(deltas),
        js=tuple(js),
        phis=tuple(phis),
        n_rows=_int(table.get("n_rows", 50), "grid.n_rows", 2),
        n_cols=_int(table.get("n_cols", 50), "grid.n_cols", 2),
        replications=_int(table.get("replications", 2000), "grid.replications", MIN_REPLICATIONS),
        bootstrap=bootstrap,
        level=level,
        master_seed=seed,
        correction=correction,
    )


def _parse_decide(table) -> DgpCharacterization:
    if not isinstance(table, dict):
        raise ConfigError("expected a table", "decide")
    _check_keys(table, _DECIDE_KEYS, "decide.")
    return DgpCharacterization(**{k: _bool(v, f"decide.{k}") for k, v in table.items()})


def load_document(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None


def parse_config(
    text: str,
    *,
    command: Optional[str] = None,
    seed: Optional[int] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Parse and validate a config document.

    ``command`` (from the command line) must agree with the document's
    ``command`` key when both are given. The seed is taken from ``seed``,
    else from ``$TWOWAY_SEED``, else from the document.
    """
    doc = load_document(text)
    _check_keys(doc, _TOP_LEVEL)

    doc_command = doc.get("command")
    if doc_command is not None and command is not None and doc_command != command:
        raise ConfigError(
            f"config is for {doc_command!r} but {command!r} was requested", "command"
        )
    command = command or doc_command
    if command is None:
        raise ConfigError("required", "command")
    if command not in COMMANDS:
        raise ConfigError(f"expected one of {', '.join(COMMANDS)}, got {command!r}", "command")

    allowed = _COMMON | _BY_COMMAND[command]
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"not used by command {command!r}", key)
    for key in sorted(_REQUIRED[command]):
        if key not in doc:
            raise ConfigError("required", key)

    env = os.environ if env is None else env
    if seed is not None:
        resolved_seed = _seed(seed, "seed")
    elif env.get(SEED_ENV_VAR):
        resolved_seed = _seed(env[SEED_ENV_VAR], SEED_ENV_VAR)
    elif "seed" in doc:
        resolved_seed = _seed(doc["seed"], "seed")
    elif command == "decide":
        resolved_seed = 0
    else:
        raise ConfigError("required", "seed")

    level = _real(doc.get("level", 0.95), "level")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"must lie in (0, 1), got {level}", "level")
    correction = _real(doc.get("correction", 1.0), "correction")
    if not correction > 0:
        raise ConfigError(f"must be > 0, got {correction}", "correction")
    precision = str(doc.get("precision", "6"))
    if precision not in PRECISIONS:
        raise ConfigError(f"expected '6' or 'full', got {precision!r}", "precision")
    workers = _int(doc["workers"], "workers", 1) if "workers" in doc else None
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("expected a path string", "output")

    spec = _parse_spec(doc["spec"]) if "spec" in doc else None
    bootstrap = None
    if command in ("coverage-grid", "bootstrap-ci"):
        bootstrap = _parse_bootstrap(doc.get("bootstrap", {}), level)
    grid = None
    if command == "coverage-grid":
        grid = _parse_grid(doc["grid"], bootstrap, level, correction, resolved_seed)
    replications = None
    if "replications" in doc:
        replications = _int(doc["replications"], "replications", MIN_REPLICATIONS)
    mc_draws = _int(doc["mc_draws"], "mc_draws", 1000) if "mc_draws" in doc else None
    panel = doc.get("panel")
    if panel is not None and not isinstance(panel, str):
        raise ConfigError("expected a path string", "panel")
    threshold = _int(
        doc.get("j_small_threshold", DEFAULT_J_SMALL_THRESHOLD), "j_small_threshold", 1
    )
    characterization = _parse_decide(doc["decide"]) if "decide" in doc else None

    return RunConfig(
        command=command,
        seed=resolved_seed,
        output_path=output,
        workers=workers,
        precision=precision,
        spec=spec,
        grid=grid,
        bootstrap=bootstrap,
        replications=replications,
        mc_draws=mc_draws,
        panel_path=panel,
        level=level,
        correction=correction,
        j_small_threshold=threshold,
        characterization=characterization,
    )

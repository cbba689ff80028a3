"""Flat key = value configuration files for the CLI.

Grammar: one `key = value` pair per line; blank lines and `#` comments are
ignored.  Comma-separated values form a list.  The factorial axes true_hr,
target_censor and target_switch may be lists, in which case the file expands
to the full grid of scenarios; every other scenario key must be scalar.

Recognized keys:
    n, true_hr, target_censor, target_switch, effect_factors, level_mix,
    seed, reps, jobs, methods, a0, a1, a2, a3, a4, sigma
"""
from __future__ import annotations

import itertools
from pathlib import Path

from .errors import ConfigError
from .results import Method
from .simulate import ScenarioConfig, SimCoefficients

AXIS_KEYS = ("true_hr", "target_censor", "target_switch")
COEF_KEYS = ("a0", "a1", "a2", "a3", "a4", "sigma")
LIST_KEYS = ("effect_factors", "level_mix", "methods") + AXIS_KEYS
KNOWN_KEYS = ("n", "seed", "reps", "jobs") + LIST_KEYS + COEF_KEYS

_INT_KEYS = ("n", "seed", "reps", "jobs")


def _parse_scalar(raw: str, key: str, lineno: int):
    raw = raw.strip()
    if key == "methods":
        try:
            return Method(raw)
        except ValueError:
            valid = ", ".join(m.value for m in Method)
            raise ConfigError(
                f"line {lineno}: methods value {raw!r} is not one of {valid}"
            ) from None
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: key {key!r} has non-numeric value {raw!r}") from None


def parse_config(path: str | Path) -> dict:
    """Parse a config file into {key: scalar or tuple}; unknown keys and
    malformed lines raise ConfigError naming the offender."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        parts = [p for p in raw.split(",")]
        if len(parts) > 1 or key in LIST_KEYS:
            if key not in LIST_KEYS:
                raise ConfigError(f"line {lineno}: key {key!r} takes a single value")
            out[key] = tuple(_parse_scalar(p, key, lineno) for p in parts)
        else:
            out[key] = _parse_scalar(raw, key, lineno)
    return out


def _coefficients(cfg: dict) -> SimCoefficients:
    kwargs = {k: cfg[k] for k in COEF_KEYS if k in cfg}
    return SimCoefficients(**kwargs)


def _wrap_config_error(key: str, exc: ConfigError) -> ConfigError:
    return ConfigError(f"key {key!r}: {exc}")


def scenarios_from_config(cfg: dict, seed_override: int | None = None) -> list[ScenarioConfig]:
    """Expand a parsed config into the scenario grid (singleton axes give one
    scenario).  Each grid cell gets its own derived seed."""
    import numpy as np

    axes = []
    for key in AXIS_KEYS:
        value = cfg.get(key)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        axes.append(value if isinstance(value, tuple) else (value,))
    base_seed = int(cfg.get("seed", 0)) if seed_override is None else int(seed_override)
    common = {}
    if "n" in cfg:
        common["n"] = cfg["n"]
    if "effect_factors" in cfg:
        common["effect_factors"] = cfg["effect_factors"]
    if "level_mix" in cfg:
        common["level_mix"] = cfg["level_mix"]
    alpha = _coefficients(cfg)

    cells = list(itertools.product(*axes))
    scenarios = []
    for idx, (hr, cens, sw) in enumerate(cells):
        seed = (
            base_seed
            if len(cells) == 1
            else int(np.random.SeedSequence([base_seed, idx]).generate_state(1)[0])
        )
        try:
            scenarios.append(
                ScenarioConfig(
                    true_hr=hr,
                    target_censor=cens,
                    target_switch=sw,
                    seed=seed,
                    alpha=alpha,
                    **common,
                )
            )
        except ConfigError as exc:
            raise ConfigError(f"scenario (hr={hr}, censor={cens}, switch={sw}): {exc}") from None
    return scenarios


def single_scenario_from_config(cfg: dict, seed_override: int | None = None) -> ScenarioConfig:
    """A simulate config must name exactly one scenario; list axes are errors."""
    for key in AXIS_KEYS:
        if isinstance(cfg.get(key), tuple) and len(cfg[key]) > 1:
            raise ConfigError(f"key {key!r} must be a single value here, not a list")
    (scenario,) = scenarios_from_config(cfg, seed_override)
    return scenario


def methods_from_config(cfg: dict) -> tuple[Method, ...] | None:
    value = cfg.get("methods")
    if value is None:
        return None
    return value if isinstance(value, tuple) else (value,)

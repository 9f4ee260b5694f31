"""JSON run configuration: meta-parameters plus run wiring.

Keys are camelCase in the file and map 1:1 onto :class:`EvolutionParams`
fields plus the run-level keys ``env``, ``iset``, ``out``, ``log`` and
``logTimings``.  Unknown keys fault (catching typos beats silently
ignoring them); missing keys take the documented defaults; every value is
range-checked.  ``dump_config`` emits a canonical form that reloads to an
equal configuration.
"""

from __future__ import annotations

import dataclasses
import json

from .errors import ConfigError, ParamError
from .evolution import EvolutionParams

FORMAT_VERSION = 1


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(part.capitalize() for part in rest)


_PARAM_KEYS = {_camel(f.name): f.name for f in dataclasses.fields(EvolutionParams)}
_RUN_KEYS = ("env", "iset", "out", "log", "logTimings", "formatVersion")

_INT_PARAMS = {
    "seed", "nb_roots", "nb_generations", "max_init_outgoing_edges",
    "max_outgoing_edges", "max_program_size", "nb_registers",
    "nb_iterations_per_policy_evaluation", "max_steps_per_evaluation",
    "archive_size", "nb_threads", "originality_max_rounds",
}


@dataclasses.dataclass
class RunConfig:
    """A fully resolved training run: parameters, environment, outputs."""

    params: EvolutionParams
    env: str
    iset: str = "complex"
    out: str = None
    log: str = None
    log_timings: bool = True


def config_from_dict(raw: dict) -> RunConfig:
    """Validate and resolve a flat key/value mapping into a RunConfig."""
    for key in raw:
        if key not in _PARAM_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r}")

    version = raw.get("formatVersion", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"formatVersion: unsupported version {version!r}")

    kwargs = {}
    for key, field_name in _PARAM_KEYS.items():
        if key not in raw or raw[key] is None:
            continue
        value = raw[key]
        if field_name in _INT_PARAMS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
        elif field_name != "score_aggregation" and not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        kwargs[field_name] = value
    if "seed" not in kwargs:
        raise ConfigError("seed: required")

    params = EvolutionParams(**kwargs)
    try:
        params.validate()
    except ParamError as exc:
        field, _, rest = str(exc).partition(":")
        raise ConfigError(f"{_camel(field.strip())}:{rest}") from None

    env = raw.get("env")
    if not env:
        raise ConfigError("env: required")
    iset = raw.get("iset", "complex")
    log_timings = raw.get("logTimings", True)
    if not isinstance(log_timings, bool):
        raise ConfigError(f"logTimings: expected a boolean, got {log_timings!r}")
    return RunConfig(
        params=params,
        env=env,
        iset=iset,
        out=raw.get("out"),
        log=raw.get("log"),
        log_timings=log_timings,
    )


def load_config(text: str, overrides: dict = None) -> RunConfig:
    """Parse JSON text, apply CLI overrides (which win), and resolve."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in raw:
        if key not in _PARAM_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r}")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return config_from_dict(merged)


def dump_config(config: RunConfig) -> str:
    """Canonical JSON: every key present, sorted, defaults made explicit."""
    out = {"formatVersion": FORMAT_VERSION}
    for key, field_name in _PARAM_KEYS.items():
        out[key] = getattr(config.params, field_name)
    out["env"] = config.env
    out["iset"] = config.iset
    out["out"] = config.out
    out["log"] = config.log
    out["logTimings"] = config.log_timings
    return json.dumps(out, indent=2, sort_keys=True) + "\n"

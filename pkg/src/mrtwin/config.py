"""Run configuration: a TOML file with nested sections, validated fail-closed.

Unknown keys are rejected rather than ignored so a typo cannot silently
disable a threshold. Every default is visible via ``mrtwin config
--dump-defaults``, and the dumped document loads back to the defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from dataclasses import replace

from .errors import ConfigInvalid
from .odd import EnvConditions, OddSpec
from .relations import MrDefinition, MrRegistry, builtin_definitions
from .transforms import EnvDelta, GeomDelta, RetryPolicy, SemDelta

DEFAULT_NEGATIVE_PROMPT = "low quality, distorted, cartoonish, unrealistic"

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "odd": {
        "weather": ["clear", "rain", "snow", "fog"],
        "lighting": [0.05, 0.95],
        "visibility": 0.05,
    },
    "mr": {
        "enabled": ["mr1", "mr2", "mr3"],
        "epsilon_p": 0.05,
        "epsilon_d": 0.05,
        "theta_u": 0.01,
        "mr1": {"amplitude": 0.05},
        "mr2": {"density": 0.1},
        "mr3": {"narrow_factor": 0.8},
    },
    "temporal": {
        "window": 15,
        "epsilon_t": 0.1,
    },
    "generation": {
        "max_attempts": 5,
        "similarity_floor": 0.85,
        "strength": 0.2,
        "guidance_scale": 10.0,
        "negative_prompt": DEFAULT_NEGATIVE_PROMPT,
    },
    "backend": {
        "kind": "builtin",
        "command": [],
        "workdir": "",
    },
    "sut": {
        "kind": "stub",
        "command": [],
    },
    "eval": {
        "window_s": 5.0,
        "bin_width": 0.5,
    },
    "paths": {
        "runs_dir": "runs",
    },
}

_MR_PARAM_KEYS = {"amplitude", "density", "narrow_factor", "epsilon_p", "epsilon_d", "theta_u"}


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully resolved configuration."""

    seed: int = 0
    odd_weather: tuple[str, ...] = ("clear", "rain", "snow", "fog")
    odd_lighting: tuple[float, float] = (0.05, 0.95)
    odd_visibility: float = 0.05
    mr_enabled: tuple[str, ...] = ("mr1", "mr2", "mr3")
    epsilon_p: float = 0.05
    epsilon_d: float = 0.05
    theta_u: float = 0.01
    mr_params: Mapping[str, Mapping[str, float]] = field(
        default_factory=lambda: {"mr1": {"amplitude": 0.05},
                                 "mr2": {"density": 0.1},
                                 "mr3": {"narrow_factor": 0.8}}
    )
    window: int = 15
    epsilon_t: float = 0.1
    max_attempts: int = 5
    similarity_floor: float = 0.85
    strength: float = 0.2
    guidance_scale: float = 10.0
    negative_prompt: str = DEFAULT_NEGATIVE_PROMPT
    backend_kind: str = "builtin"
    backend_command: tuple[str, ...] = ()
    backend_workdir: str = ""
    sut_kind: str = "stub"
    sut_command: tuple[str, ...] = ()
    eval_window_s: float = 5.0
    eval_bin_width: float = 0.5
    runs_dir: str = "runs"

    def odd_spec(self) -> OddSpec:
        return OddSpec(environment=EnvConditions(
            lighting=self.odd_lighting,
            visibility=self.odd_visibility,
            weather=frozenset(self.odd_weather) if self.odd_weather else None,
        ))

    def retry_policy(self) -> RetryPolicy:
        return RetryPolicy(self.max_attempts, self.similarity_floor)

    def generator_params(self) -> dict[str, Any]:
        return {
            "strength": self.strength,
            "guidance_scale": self.guidance_scale,
            "negative_prompt": self.negative_prompt,
        }

    def enabled_definitions(self) -> list[MrDefinition]:
        registry = configured_registry(self)
        missing = [mr_id for mr_id in self.mr_enabled if mr_id not in registry]
        if missing:
            raise ConfigInvalid(f"unknown relation ids enabled: {', '.join(missing)}")
        return [registry.get(mr_id) for mr_id in self.mr_enabled]

    def snapshot(self) -> dict[str, Any]:
        """Plain nested mapping of the resolved values, stable key order."""
        return {
            "seed": self.seed,
            "odd": {
                "weather": list(self.odd_weather),
                "lighting": list(self.odd_lighting),
                "visibility": self.odd_visibility,
            },
            "mr": {
                "enabled": list(self.mr_enabled),
                "epsilon_p": self.epsilon_p,
                "epsilon_d": self.epsilon_d,
                "theta_u": self.theta_u,
                **{mr_id: dict(params) for mr_id, params in sorted(self.mr_params.items())},
            },
            "temporal": {"window": self.window, "epsilon_t": self.epsilon_t},
            "generation": {
                "max_attempts": self.max_attempts,
                "similarity_floor": self.similarity_floor,
                "strength": self.strength,
                "guidance_scale": self.guidance_scale,
                "negative_prompt": self.negative_prompt,
            },
            "backend": {
                "kind": self.backend_kind,
                "command": list(self.backend_command),
                "workdir": self.backend_workdir,
            },
            "sut": {"kind": self.sut_kind, "command": list(self.sut_command)},
            "eval": {"window_s": self.eval_window_s, "bin_width": self.eval_bin_width},
            "paths": {"runs_dir": self.runs_dir},
        }


def configured_registry(cfg: RunConfig) -> MrRegistry:
    """Builtin definitions with configured thresholds and transform knobs."""
    registry = builtin_definitions()
    out = MrRegistry()
    for defn in registry:
        params = dict(cfg.mr_params.get(defn.id, {}))
        epsilon_p = float(params.pop("epsilon_p", cfg.epsilon_p))
        epsilon_d = float(params.pop("epsilon_d", cfg.epsilon_d))
        theta_u = float(params.pop("theta_u", cfg.theta_u))
        transform = defn.transform
        if "amplitude" in params:
            transform = replace(transform, semantic=SemDelta(amplitude=float(params.pop("amplitude"))))
        if "density" in params:
            env = transform.environmental or EnvDelta(weather="snow")
            transform = replace(transform, environmental=replace(env, density=float(params.pop("density"))))
        if "narrow_factor" in params:
            transform = replace(transform, geometric=GeomDelta(lane_narrow=float(params.pop("narrow_factor"))))
        if params:
            raise ConfigInvalid(f"unknown parameter(s) for {defn.id}: {', '.join(sorted(params))}")
        out.register(replace(
            defn, transform=transform,
            epsilon_p=epsilon_p, epsilon_d=epsilon_d, theta_u=theta_u,
        ))
    return out


def _reject_unknown(data: Mapping, allowed: Mapping, path: str = "") -> None:
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in allowed:
            raise ConfigInvalid(f"unknown configuration key: {here}")
        if isinstance(allowed[key], dict):
            if not isinstance(value, dict):
                raise ConfigInvalid(f"{here} must be a section")
            _reject_unknown(value, allowed[key], here)


def _merge(defaults: Mapping, overrides: Mapping) -> dict:
    out: dict = dict(defaults)
    for key, value in overrides.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _mr_section_schema(data: Mapping) -> dict:
    """The [mr] section allows per-relation subsections keyed by relation id;
    build the allowed-key schema dynamically so mr.<id>.<param> validates."""
    schema: dict[str, Any] = {"enabled": None, "epsilon_p": None, "epsilon_d": None, "theta_u": None}
    for key, value in data.items():
        if isinstance(value, dict):
            schema[key] = {param: None for param in _MR_PARAM_KEYS}
    return schema


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigInvalid(message)


def _positive(value: float, name: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0,
            f"{name} must be a positive number")
    return float(value)


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a raw mapping (parsed TOML) into a RunConfig."""
    schema: dict[str, Any] = {
        "seed": None,
        "odd": {"weather": None, "lighting": None, "visibility": None},
        "mr": _mr_section_schema(data.get("mr", {}) if isinstance(data.get("mr", {}), dict) else {}),
        "temporal": {"window": None, "epsilon_t": None},
        "generation": {"max_attempts": None, "similarity_floor": None, "strength": None,
                       "guidance_scale": None, "negative_prompt": None},
        "backend": {"kind": None, "command": None, "workdir": None},
        "sut": {"kind": None, "command": None},
        "eval": {"window_s": None, "bin_width": None},
        "paths": {"runs_dir": None},
    }
    _reject_unknown(data, schema)
    merged = _merge(DEFAULTS, data)

    known_ids = set(builtin_definitions().ids())
    mr_section = merged["mr"]
    mr_params: dict[str, dict[str, float]] = {}
    for key, value in mr_section.items():
        if isinstance(value, dict):
            _expect(key in known_ids, f"[mr.{key}] does not name a known relation")
            for param, raw in value.items():
                _expect(param in _MR_PARAM_KEYS, f"unknown parameter mr.{key}.{param}")
                _expect(isinstance(raw, (int, float)) and not isinstance(raw, bool),
                        f"mr.{key}.{param} must be a number")
            mr_params[key] = {param: float(raw) for param, raw in value.items()}

    seed = merged["seed"]
    _expect(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
            "seed must be a non-negative integer")

    lighting = merged["odd"]["lighting"]
    _expect(isinstance(lighting, (list, tuple)) and len(lighting) == 2,
            "odd.lighting must be [low, high]")
    lighting = (float(lighting[0]), float(lighting[1]))
    _expect(0.0 <= lighting[0] <= lighting[1] <= 1.0, "odd.lighting must be ordered within [0,1]")
    visibility = merged["odd"]["visibility"]
    _expect(isinstance(visibility, (int, float)) and 0.0 <= float(visibility) <= 1.0,
            "odd.visibility must be in [0,1]")
    weather = merged["odd"]["weather"]
    _expect(isinstance(weather, list) and all(isinstance(w, str) for w in weather),
            "odd.weather must be a list of strings")

    enabled = merged["mr"]["enabled"]
    _expect(isinstance(enabled, list) and enabled and all(isinstance(m, str) for m in enabled),
            "mr.enabled must be a non-empty list of relation ids")
    _expect(len(set(enabled)) == len(enabled), "mr.enabled contains duplicates")
    unknown_enabled = [m for m in enabled if m not in known_ids]
    _expect(not unknown_enabled, f"mr.enabled names unknown relations: {', '.join(unknown_enabled)}")

    window = merged["temporal"]["window"]
    _expect(isinstance(window, int) and not isinstance(window, bool) and window >= 1,
            "temporal.window must be an integer >= 1")

    max_attempts = merged["generation"]["max_attempts"]
    _expect(isinstance(max_attempts, int) and not isinstance(max_attempts, bool) and max_attempts >= 1,
            "generation.max_attempts must be an integer >= 1")
    similarity_floor = merged["generation"]["similarity_floor"]
    _expect(isinstance(similarity_floor, (int, float)) and 0.0 <= float(similarity_floor) <= 1.0,
            "generation.similarity_floor must be in [0,1]")

    backend_kind = merged["backend"]["kind"]
    _expect(backend_kind in ("builtin", "external"), "backend.kind must be builtin or external")
    backend_command = merged["backend"]["command"]
    _expect(isinstance(backend_command, list) and all(isinstance(c, str) for c in backend_command),
            "backend.command must be a list of strings")
    _expect(backend_kind == "builtin" or bool(backend_command),
            "backend.kind=external requires backend.command")
    backend_workdir = merged["backend"]["workdir"]
    _expect(isinstance(backend_workdir, str), "backend.workdir must be a string")
    if backend_workdir:
        _expect(Path(backend_workdir).is_dir(), f"backend.workdir does not exist: {backend_workdir}")

    sut_kind = merged["sut"]["kind"]
    _expect(sut_kind in ("stub", "external"), "sut.kind must be stub or external")
    sut_command = merged["sut"]["command"]
    _expect(isinstance(sut_command, list) and all(isinstance(c, str) for c in sut_command),
            "sut.command must be a list of strings")
    _expect(sut_kind == "stub" or bool(sut_command), "sut.kind=external requires sut.command")

    negative_prompt = merged["generation"]["negative_prompt"]
    _expect(isinstance(negative_prompt, str), "generation.negative_prompt must be a string")
    runs_dir = merged["paths"]["runs_dir"]
    _expect(isinstance(runs_dir, str) and bool(runs_dir), "paths.runs_dir must be a non-empty string")

    return RunConfig(
        seed=seed,
        odd_weather=tuple(weather),
        odd_lighting=lighting,
        odd_visibility=float(visibility),
        mr_enabled=tuple(enabled),
        epsilon_p=_positive(merged["mr"]["epsilon_p"], "mr.epsilon_p"),
        epsilon_d=_positive(merged["mr"]["epsilon_d"], "mr.epsilon_d"),
        theta_u=_positive(merged["mr"]["theta_u"], "mr.theta_u"),
        mr_params=mr_params,
        window=window,
        epsilon_t=_positive(merged["temporal"]["epsilon_t"], "temporal.epsilon_t"),
        max_attempts=max_attempts,
        similarity_floor=float(similarity_floor),
        strength=_positive(merged["generation"]["strength"], "generation.strength"),
        guidance_scale=_positive(merged["generation"]["guidance_scale"], "generation.guidance_scale"),
        negative_prompt=negative_prompt,
        backend_kind=backend_kind,
        backend_command=tuple(backend_command),
        backend_workdir=backend_workdir,
        sut_kind=sut_kind,
        sut_command=tuple(sut_command),
        eval_window_s=_positive(merged["eval"]["window_s"], "eval.window_s"),
        eval_bin_width=_positive(merged["eval"]["bin_width"], "eval.bin_width"),
        runs_dir=runs_dir,
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Parse and validate a config file; None loads pure defaults."""
    if path is None:
        return parse_config({})
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"configuration file not found: {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ConfigInvalid(f"{path}: {err}") from err
    return parse_config(data)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot dump {type(value).__name__}")


def dump_defaults() -> str:
    """Render DEFAULTS as a TOML document that parses back to the defaults."""
    lines: list[str] = []
    scalars = {k: v for k, v in DEFAULTS.items() if not isinstance(v, dict)}
    for key, value in scalars.items():
        lines.append(f"{key} = {_toml_value(value)}")
    for section, body in DEFAULTS.items():
        if not isinstance(body, dict):
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in body.items():
            if isinstance(value, dict):
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        for key, value in body.items():
            if isinstance(value, dict):
                lines.append("")
                lines.append(f"[{section}.{key}]")
                for sub_key, sub_value in value.items():
                    lines.append(f"{sub_key} = {_toml_value(sub_value)}")
    return "\n".join(lines) + "\n"

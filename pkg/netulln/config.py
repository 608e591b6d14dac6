"""Load run configuration YAML with line-anchored validation errors."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from netulln.errors import ConfigError, NetullnError
from netulln.estimate import ESTIMATORS, WEIGHTINGS
from netulln.funcspace import (
    NET_ANCHORS,
    BoundedLipschitzFamily,
    ParamSpace,
    builtin_family,
)
from netulln.netgraph import AssumptionConstants, NetworkFamily
from netulln.process import DECAY_FORMS, DecayProfile, NoiseLaw, ProcessSpec
from netulln.verify.ulln import ORACLE_MODES

EXPERIMENTS = ("diagnose", "verify-ulln", "verify-maximal", "estimate", "full-suite")
DEFAULT_CONFIG_RESOURCE = "resources/default.yaml"
MAX_SEED = 2**64 - 1

_TOP_LEVEL_KEYS = (
    "experiment",
    "seed",
    "threads",
    "output_dir",
    "strict",
    "network",
    "process",
    "family",
    "parameter_space",
    "assumptions",
    "decay_override",
    "diagnose",
    "ulln",
    "maximal",
    "estimation",
    "acceptance",
)
# Replaced wholesale by a user file; every other section merges key by key.
_WHOLE_SECTIONS = frozenset(
    {"network", "process", "family", "parameter_space", "decay_override"}
)
_PROCESS_KEYS = (
    "kind",
    "radius",
    "weights",
    "rho",
    "shock_loading",
    "shock_decay",
    "location",
    "innovation",
    "shock",
)
_LAW_KEYS = ("law", "bound", "scale")
_ASSUMPTION_KEYS = ("p", "eta", "c1", "c2", "separation", "amplitude", "psi_constant")
_DECAY_KEYS = {
    "exact_table": ("form", "table", "tail"),
    "power_bound": ("form", "amplitude", "p"),
}


@dataclass(frozen=True)
class FamilyChoice:
    """Built-in family name plus its parameters."""

    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def build(self) -> BoundedLipschitzFamily:
        return builtin_family(self.name, dict(self.params))

    def to_mapping(self) -> dict[str, Any]:
        return {"name": self.name, **self.params}


@dataclass(frozen=True)
class DiagnoseOptions:
    n_grid: tuple[int, ...] = (100, 400, 1600, 6400)
    shell_s_max: int = 6
    probes: int = 100_000
    net_deltas: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    covariance_distances: tuple[int, ...] = (3, 4, 5)
    covariance_network_n: int = 400
    covariance_shock_draws: int = 100
    covariance_replications: int = 2000


@dataclass(frozen=True)
class UllnOptions:
    n_grid: tuple[int, ...] = (100, 400, 1600, 6400)
    replications: int = 200
    modes: tuple[str, ...] = ORACLE_MODES
    delta: float | None = None
    net_anchor: str = "endpoints"
    oracle_draws: int = 100_000
    oracle_se_ceiling: float | None = 0.01


@dataclass(frozen=True)
class MaximalOptions:
    n_grid: tuple[int, ...] = (256, 1024, 4096, 16384)
    replications: int = 500
    moment_order: int | None = None
    bootstrap: int = 1000
    block_sizes: tuple[int, ...] = (4, 8, 16, 32)
    block_network_n: int = 4096
    block_replications: int = 200
    rademacher_n: tuple[int, ...] = (8, 10, 12)
    rademacher_order: int = 4
    rademacher_replications: int = 20_000


@dataclass(frozen=True)
class EstimationOptions:
    n_grid: tuple[int, ...] = (100, 400, 1600, 6400)
    replications: int = 200
    theta0: tuple[float, ...] = (0.0,)
    net_delta: float = 0.05
    refine_tol: float = 1e-6
    estimators: tuple[str, ...] = ESTIMATORS
    weightings: tuple[str, ...] = WEIGHTINGS
    m_family: FamilyChoice = field(
        default_factory=lambda: FamilyChoice("neg_clipped_quadratic", {"clip": 16.0})
    )
    gmm_family: FamilyChoice = field(
        default_factory=lambda: FamilyChoice("clipped_location_pair", {"clip": 1.5})
    )


@dataclass(frozen=True)
class AcceptanceThresholds:
    ulln_slope_ceiling: float = -0.25
    maximal_tolerance: float = 0.15
    block_ratio_factor: float = 3.0
    rademacher_se_multiple: float = 4.0
    covariance_z: float = 3.0
    covariance_pass_rate: float = 0.95
    net_slope_tolerance: float = 0.15
    rmse_ratio: float = 0.3
    gmm_agreement: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    threads: int
    output_dir: Path
    strict: bool
    network: NetworkFamily
    process: ProcessSpec
    family: FamilyChoice
    parameter_space: ParamSpace
    assumptions: AssumptionConstants
    decay_override: DecayProfile | None
    diagnose: DiagnoseOptions
    ulln: UllnOptions
    maximal: MaximalOptions
    estimation: EstimationOptions
    acceptance: AcceptanceThresholds
    source: str = field(default="<defaults>", compare=False)

    def with_overrides(
        self,
        *,
        experiment: str | None = None,
        seed: int | None = None,
        output_dir: Path | None = None,
        threads: int | None = None,
        strict: bool | None = None,
    ) -> RunConfig:
        changes: dict[str, Any] = {}
        if experiment is not None:
            changes["experiment"] = experiment
        if seed is not None:
            if not 0 <= seed <= MAX_SEED:
                raise ConfigError(f"--seed must lie in 0..{MAX_SEED}")
            changes["seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be >= 1")
            changes["threads"] = threads
        if strict is not None:
            changes["strict"] = strict
        return dataclasses.replace(self, **changes)

    def to_mapping(self) -> dict[str, Any]:
        """Plain YAML/JSON mapping that loads back into an equal config."""
        process = self.process
        decay = self.decay_override
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "threads": self.threads,
            "output_dir": str(self.output_dir),
            "strict": self.strict,
            "network": {"kind": self.network.kind, **self.network.params},
            "process": {
                "kind": process.kind,
                "radius": process.radius,
                "weights": None if process.weights is None else list(process.weights),
                "rho": process.rho,
                "shock_loading": process.shock_loading,
                "shock_decay": process.shock_decay,
                "location": process.location,
                "innovation": _law_mapping(process.innovation),
                "shock": _law_mapping(process.shock),
            },
            "family": self.family.to_mapping(),
            "parameter_space": {
                "bounds": [
                    [low, high]
                    for low, high in zip(
                        self.parameter_space.lower, self.parameter_space.upper
                    )
                ]
            },
            "assumptions": {
                key: getattr(self.assumptions, key) for key in _ASSUMPTION_KEYS
            },
            "decay_override": None if decay is None else _decay_mapping(decay),
            "diagnose": _options_mapping(self.diagnose),
            "ulln": _options_mapping(self.ulln),
            "maximal": _options_mapping(self.maximal),
            "estimation": _options_mapping(self.estimation),
            "acceptance": _options_mapping(self.acceptance),
        }


def _law_mapping(law: NoiseLaw) -> dict[str, Any]:
    return {"law": law.name, "bound": law.bound, "scale": law.scale}


def _decay_mapping(decay: DecayProfile) -> dict[str, Any]:
    if decay.form == "exact_table":
        return {"form": decay.form, "table": list(decay.table), "tail": decay.tail}
    return {"form": decay.form, "amplitude": decay.amplitude, "p": decay.p}


def _options_mapping(options: Any) -> dict[str, Any]:
    mapping: dict[str, Any] = {}
    for option in dataclasses.fields(options):
        value = getattr(options, option.name)
        if isinstance(value, FamilyChoice):
            value = value.to_mapping()
        elif isinstance(value, tuple):
            value = list(value)
        mapping[option.name] = value
    return mapping


@dataclass(frozen=True)
class _Source:
    label: str
    lines: Mapping[str, int] = field(default_factory=dict)

    def where(self, key: str) -> str:
        probe = key
        while probe:
            line = self.lines.get(probe)
            if line is not None:
                return f"{self.label}:{line}"
            probe = _parent_key(probe)
        return self.label

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: '{key}' {message}")


def _parent_key(key: str) -> str:
    if key.endswith("]"):
        return key[: key.rindex("[")]
    return key.rpartition(".")[0]


def load_config(path: Path | str | None = None) -> RunConfig:
    """Defaults overlaid with ``path``; a run manifest is read through its config."""
    if path is None:
        return config_from_mapping({}, source=f"netulln/{DEFAULT_CONFIG_RESOURCE}")
    path = Path(path)
    mapping, lines = _read_yaml_mapping(path)
    if _is_manifest(mapping):
        inner = mapping["config"]
        if not isinstance(inner, dict):
            raise ConfigError(f"{path}: manifest 'config' must be a mapping")
        mapping = inner
        lines = {
            key.removeprefix("config."): line
            for key, line in lines.items()
            if key.startswith("config.")
        }
    return config_from_mapping(mapping, source=str(path), lines=lines)


def config_from_mapping(
    mapping: Mapping[str, Any],
    *,
    source: str = "<mapping>",
    lines: Mapping[str, int] | None = None,
) -> RunConfig:
    src = _Source(source, lines or {})
    _check_keys(mapping, _TOP_LEVEL_KEYS, "", src)
    merged = _merge_defaults(default_mapping(), mapping)
    return _parse_config(merged, src)


def default_mapping() -> dict[str, Any]:
    return copy.deepcopy(_load_default_mapping())


@lru_cache(maxsize=1)
def _load_default_mapping() -> dict[str, Any]:
    text = (
        resources.files("netulln")
        .joinpath(DEFAULT_CONFIG_RESOURCE)
        .read_text(encoding="utf-8")
    )
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigError(f"netulln/{DEFAULT_CONFIG_RESOURCE}: must be a YAML mapping")
    return raw


def _is_manifest(mapping: Mapping[str, Any]) -> bool:
    return "config" in mapping and "netulln_version" in mapping


def _read_yaml_mapping(path: Path) -> tuple[dict[str, Any], dict[str, int]]:
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text(encoding="utf-8")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        if path.suffix == ".json":
            # YAML 1.1 reads exponent floats such as 1e-06 as strings
            raw = json.loads(text)
        else:
            raw = yaml.safe_load(text) or {}
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path}: invalid JSON ({error})") from error
    except yaml.YAMLError as error:
        raise ConfigError(f"{path}: invalid YAML ({error})") from error
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a YAML mapping")
    return raw, _key_lines(node)


def _key_lines(node: yaml.Node | None, prefix: str = "") -> dict[str, int]:
    """1-based line of every mapping key and sequence item, by dotted path."""
    lines: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[key] = key_node.start_mark.line + 1
            lines.update(_key_lines(value_node, key))
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            key = f"{prefix}[{index}]"
            lines[key] = item.start_mark.line + 1
            lines.update(_key_lines(item, key))
    return lines


def _merge_defaults(
    defaults: dict[str, Any], overrides: Mapping[str, Any]
) -> dict[str, Any]:
    merged = dict(defaults)
    for key, value in overrides.items():
        base = merged.get(key)
        nested = isinstance(base, dict) and isinstance(value, dict)
        if key not in _WHOLE_SECTIONS and nested:
            merged[key] = {**base, **value}
        else:
            merged[key] = value
    return merged


def _parse_config(mapping: dict[str, Any], src: _Source) -> RunConfig:
    parameter_space = _parse_parameter_space(mapping.get("parameter_space"), src)
    assumptions = _parse_assumptions(
        mapping.get("assumptions"), src, dimension=parameter_space.dimension
    )
    return RunConfig(
        experiment=_parse_choice(
            mapping.get("experiment"), "experiment", src, EXPERIMENTS
        ),
        seed=_parse_int(mapping.get("seed"), "seed", src, minimum=0, maximum=MAX_SEED),
        threads=_parse_int(mapping.get("threads"), "threads", src, minimum=1),
        output_dir=Path(_require_str(mapping.get("output_dir"), "output_dir", src)),
        strict=_parse_bool(mapping.get("strict"), "strict", src),
        network=_parse_network(mapping.get("network"), src),
        process=_parse_process(mapping.get("process"), src),
        family=_parse_family(mapping.get("family"), "family", src),
        parameter_space=parameter_space,
        assumptions=assumptions,
        decay_override=_parse_decay(mapping.get("decay_override"), src),
        diagnose=_parse_diagnose(mapping.get("diagnose"), src),
        ulln=_parse_ulln(mapping.get("ulln"), src),
        maximal=_parse_maximal(mapping.get("maximal"), src),
        estimation=_parse_estimation(
            mapping.get("estimation"), src, dimension=parameter_space.dimension
        ),
        acceptance=_parse_acceptance(mapping.get("acceptance"), src),
        source=src.label,
    )


def _check_keys(
    mapping: Mapping[str, Any], allowed: tuple[str, ...], section: str, src: _Source
) -> None:
    unknown = sorted(str(key) for key in set(mapping) - set(allowed))
    if not unknown:
        return
    first = f"{section}.{unknown[0]}" if section else unknown[0]
    label = f"'{section}' key(s)" if section else "key(s)"
    raise ConfigError(
        f"{src.where(first)}: unknown {label}: {', '.join(unknown)}. "
        f"Allowed keys: {', '.join(allowed)}"
    )


def _require_mapping(value: Any, key: str, src: _Source) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise src.error(key, "must be a mapping")
    return value


def _require_str(value: Any, key: str, src: _Source) -> str:
    if not isinstance(value, str) or not value.strip():
        raise src.error(key, "must be a non-empty string")
    return value.strip()


def _parse_choice(value: Any, key: str, src: _Source, choices: tuple[str, ...]) -> str:
    if value not in choices:
        raise src.error(key, f"must be one of: {', '.join(choices)}")
    return str(value)


def _parse_bool(value: Any, key: str, src: _Source) -> bool:
    if not isinstance(value, bool):
        raise src.error(key, "must be true or false")
    return value


def _parse_int(
    value: Any,
    key: str,
    src: _Source,
    *,
    minimum: int | None = None,
    maximum: int | None = None,
) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise src.error(key, "must be an integer")
    if minimum is not None and value < minimum:
        raise src.error(key, f"must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise src.error(key, f"must be <= {maximum}")
    return value


def _parse_float(
    value: Any,
    key: str,
    src: _Source,
    *,
    positive: bool = False,
    nonnegative: bool = False,
) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise src.error(key, "must be a number")
    number = float(value)
    if not math.isfinite(number):
        raise src.error(key, "must be finite")
    if positive and not number > 0:
        raise src.error(key, "must be positive")
    if nonnegative and number < 0:
        raise src.error(key, "must be >= 0")
    return number


def _parse_optional_float(value: Any, key: str, src: _Source) -> float | None:
    if value is None:
        return None
    return _parse_float(value, key, src, positive=True)


def _parse_list(value: Any, key: str, src: _Source) -> list[Any]:
    if not isinstance(value, list) or not value:
        raise src.error(key, "must be a non-empty list")
    return value


def _parse_int_grid(
    value: Any, key: str, src: _Source, *, minimum: int = 1
) -> tuple[int, ...]:
    items = _parse_list(value, key, src)
    grid = tuple(
        _parse_int(item, f"{key}[{index}]", src, minimum=minimum)
        for index, item in enumerate(items)
    )
    for index in range(1, len(grid)):
        if grid[index] <= grid[index - 1]:
            raise src.error(f"{key}[{index}]", "must be strictly increasing")
    return grid


def _parse_float_list(value: Any, key: str, src: _Source) -> tuple[float, ...]:
    items = _parse_list(value, key, src)
    return tuple(
        _parse_float(item, f"{key}[{index}]", src) for index, item in enumerate(items)
    )


def _parse_choices(
    value: Any, key: str, src: _Source, choices: tuple[str, ...]
) -> tuple[str, ...]:
    items = _parse_list(value, key, src)
    parsed = tuple(
        _parse_choice(item, f"{key}[{index}]", src, choices)
        for index, item in enumerate(items)
    )
    if len(set(parsed)) != len(parsed):
        raise src.error(key, "must not repeat entries")
    return parsed


def _parse_network(value: Any, src: _Source) -> NetworkFamily:
    mapping = _require_mapping(value, "network", src)
    kind = _require_str(mapping.get("kind"), "network.kind", src)
    params = {key: item for key, item in mapping.items() if key != "kind"}
    for key, item in params.items():
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise src.error(f"network.{key}", "must be a number")
    try:
        return NetworkFamily(kind, params)
    except NetullnError as error:
        raise src.error("network", f"is invalid: {error}") from error


def _parse_law(value: Any, key: str, src: _Source) -> NoiseLaw:
    mapping = _require_mapping(value, key, src)
    _check_keys(mapping, _LAW_KEYS, key, src)
    defaults = NoiseLaw()
    try:
        return NoiseLaw(
            name=_require_str(mapping.get("law", defaults.name), f"{key}.law", src),
            bound=_parse_float(
                mapping.get("bound", defaults.bound), f"{key}.bound", src
            ),
            scale=_parse_float(
                mapping.get("scale", defaults.scale), f"{key}.scale", src
            ),
        )
    except ConfigError:
        raise
    except NetullnError as error:
        raise src.error(key, f"is invalid: {error}") from error


def _parse_process(value: Any, src: _Source) -> ProcessSpec:
    mapping = _require_mapping(value, "process", src)
    _check_keys(mapping, _PROCESS_KEYS, "process", src)
    defaults = ProcessSpec()
    weights = mapping.get("weights")
    rho = mapping.get("rho")
    fields: dict[str, Any] = {
        "kind": _require_str(mapping.get("kind", defaults.kind), "process.kind", src),
        "radius": _parse_int(
            mapping.get("radius", defaults.radius), "process.radius", src, minimum=0
        ),
        "weights": None
        if weights is None
        else _parse_float_list(weights, "process.weights", src),
        "rho": None if rho is None else _parse_float(rho, "process.rho", src),
        "shock_loading": _parse_float(
            mapping.get("shock_loading", defaults.shock_loading),
            "process.shock_loading",
            src,
        ),
        "shock_decay": _parse_float(
            mapping.get("shock_decay", defaults.shock_decay),
            "process.shock_decay",
            src,
            nonnegative=True,
        ),
        "location": _parse_float(
            mapping.get("location", defaults.location), "process.location", src
        ),
        "innovation": _parse_law(
            mapping.get("innovation", {}), "process.innovation", src
        ),
        "shock": _parse_law(mapping.get("shock", {}), "process.shock", src),
    }
    try:
        return ProcessSpec(**fields)
    except NetullnError as error:
        raise src.error("process", f"is invalid: {error}") from error


def _parse_family(value: Any, key: str, src: _Source) -> FamilyChoice:
    mapping = _require_mapping(value, key, src)
    name = _require_str(mapping.get("name"), f"{key}.name", src)
    params = {
        param: _parse_float(item, f"{key}.{param}", src)
        for param, item in mapping.items()
        if param != "name"
    }
    choice = FamilyChoice(name, params)
    try:
        choice.build()
    except NetullnError as error:
        raise src.error(key, f"is invalid: {error}") from error
    return choice


def _parse_parameter_space(value: Any, src: _Source) -> ParamSpace:
    mapping = _require_mapping(value, "parameter_space", src)
    _check_keys(mapping, ("bounds",), "parameter_space", src)
    intervals = _parse_list(mapping.get("bounds"), "parameter_space.bounds", src)
    pairs: list[tuple[float, float]] = []
    for index, interval in enumerate(intervals):
        key = f"parameter_space.bounds[{index}]"
        if not isinstance(interval, list) or len(interval) != 2:
            raise src.error(key, "must be a [lower, upper] pair")
        pairs.append(
            (
                _parse_float(interval[0], f"{key}[0]", src),
                _parse_float(interval[1], f"{key}[1]", src),
            )
        )
    try:
        return ParamSpace.from_bounds(pairs)
    except NetullnError as error:
        raise src.error("parameter_space.bounds", f"is invalid: {error}") from error


def _parse_assumptions(
    value: Any, src: _Source, *, dimension: int
) -> AssumptionConstants:
    mapping = _require_mapping(value, "assumptions", src)
    _check_keys(mapping, _ASSUMPTION_KEYS, "assumptions", src)
    p = mapping.get("p")
    if isinstance(p, bool) or not isinstance(p, int) or p <= 2:
        raise src.error("assumptions.p", "must be an integer > 2")
    eta = _parse_float(mapping.get("eta"), "assumptions.eta", src, positive=True)
    if not eta < 1:
        raise src.error("assumptions.eta", "must lie in (0, 1)")
    c1 = _parse_float(mapping.get("c1"), "assumptions.c1", src, positive=True)
    c2 = _parse_float(mapping.get("c2"), "assumptions.c2", src, positive=True)
    return AssumptionConstants(
        p=p,
        d=dimension,
        eta=eta,
        c1=c1,
        c2=c2,
        separation=_parse_float(
            mapping.get("separation"), "assumptions.separation", src, positive=True
        ),
        amplitude=_parse_float(
            mapping.get("amplitude"), "assumptions.amplitude", src, positive=True
        ),
        psi_constant=_parse_float(
            mapping.get("psi_constant"),
            "assumptions.psi_constant",
            src,
            nonnegative=True,
        ),
    )


def _parse_decay(value: Any, src: _Source) -> DecayProfile | None:
    if value is None:
        return None
    mapping = _require_mapping(value, "decay_override", src)
    form = _parse_choice(mapping.get("form"), "decay_override.form", src, DECAY_FORMS)
    _check_keys(mapping, _DECAY_KEYS[form], "decay_override", src)
    try:
        if form == "exact_table":
            tail = mapping.get("tail", 0.0)
            return DecayProfile(
                form=form,
                table=_parse_float_list(
                    mapping.get("table"), "decay_override.table", src
                ),
                tail=None
                if tail is None
                else _parse_float(tail, "decay_override.tail", src, nonnegative=True),
            )
        return DecayProfile(
            form=form,
            amplitude=_parse_float(
                mapping.get("amplitude"), "decay_override.amplitude", src, positive=True
            ),
            p=_parse_int(mapping.get("p"), "decay_override.p", src, minimum=2),
        )
    except ConfigError:
        raise
    except NetullnError as error:
        raise src.error("decay_override", f"is invalid: {error}") from error


def _section(value: Any, name: str, options_type: type, src: _Source) -> dict[str, Any]:
    mapping = _require_mapping(value, name, src)
    allowed = tuple(option.name for option in dataclasses.fields(options_type))
    _check_keys(mapping, allowed, name, src)
    missing = [key for key in allowed if key not in mapping]
    if missing:
        raise src.error(f"{name}.{missing[0]}", "is required")
    return mapping


def _parse_diagnose(value: Any, src: _Source) -> DiagnoseOptions:
    mapping = _section(value, "diagnose", DiagnoseOptions, src)
    deltas = _parse_float_list(mapping["net_deltas"], "diagnose.net_deltas", src)
    for index, delta in enumerate(deltas):
        if not delta > 0:
            raise src.error(f"diagnose.net_deltas[{index}]", "must be positive")
    return DiagnoseOptions(
        n_grid=_parse_int_grid(mapping["n_grid"], "diagnose.n_grid", src, minimum=3),
        shell_s_max=_parse_int(
            mapping["shell_s_max"], "diagnose.shell_s_max", src, minimum=0
        ),
        probes=_parse_int(mapping["probes"], "diagnose.probes", src, minimum=1),
        net_deltas=deltas,
        covariance_distances=_parse_int_grid(
            mapping["covariance_distances"], "diagnose.covariance_distances", src
        ),
        covariance_network_n=_parse_int(
            mapping["covariance_network_n"],
            "diagnose.covariance_network_n",
            src,
            minimum=3,
        ),
        covariance_shock_draws=_parse_int(
            mapping["covariance_shock_draws"],
            "diagnose.covariance_shock_draws",
            src,
            minimum=1,
        ),
        covariance_replications=_parse_int(
            mapping["covariance_replications"],
            "diagnose.covariance_replications",
            src,
            minimum=2,
        ),
    )


def _parse_ulln(value: Any, src: _Source) -> UllnOptions:
    mapping = _section(value, "ulln", UllnOptions, src)
    replications = _parse_int(
        mapping["replications"], "ulln.replications", src, minimum=1
    )
    oracle_draws = _parse_int(
        mapping["oracle_draws"], "ulln.oracle_draws", src, minimum=1
    )
    if oracle_draws < 10 * replications:
        raise src.error("ulln.oracle_draws", "must be at least 10x ulln.replications")
    return UllnOptions(
        n_grid=_parse_int_grid(mapping["n_grid"], "ulln.n_grid", src, minimum=3),
        replications=replications,
        modes=_parse_choices(mapping["modes"], "ulln.modes", src, ORACLE_MODES),
        delta=_parse_optional_float(mapping["delta"], "ulln.delta", src),
        net_anchor=_parse_choice(
            mapping["net_anchor"], "ulln.net_anchor", src, NET_ANCHORS
        ),
        oracle_draws=oracle_draws,
        oracle_se_ceiling=_parse_optional_float(
            mapping["oracle_se_ceiling"], "ulln.oracle_se_ceiling", src
        ),
    )


def _parse_maximal(value: Any, src: _Source) -> MaximalOptions:
    mapping = _section(value, "maximal", MaximalOptions, src)
    order = mapping["moment_order"]
    valid_order = isinstance(order, int) and not isinstance(order, bool) and order > 2
    if order is not None and not valid_order:
        raise src.error("maximal.moment_order", "must be null or an integer > 2")
    n_grid = _parse_int_grid(mapping["n_grid"], "maximal.n_grid", src, minimum=3)
    if len(n_grid) < 4:
        raise src.error("maximal.n_grid", "needs at least 4 grid points")
    rademacher_n = _parse_int_grid(mapping["rademacher_n"], "maximal.rademacher_n", src)
    if rademacher_n[-1] > 20:
        raise src.error("maximal.rademacher_n", "entries must be <= 20")
    return MaximalOptions(
        n_grid=n_grid,
        replications=_parse_int(
            mapping["replications"], "maximal.replications", src, minimum=2
        ),
        moment_order=order,
        bootstrap=_parse_int(mapping["bootstrap"], "maximal.bootstrap", src, minimum=1),
        block_sizes=_parse_int_grid(mapping["block_sizes"], "maximal.block_sizes", src),
        block_network_n=_parse_int(
            mapping["block_network_n"], "maximal.block_network_n", src, minimum=3
        ),
        block_replications=_parse_int(
            mapping["block_replications"], "maximal.block_replications", src, minimum=1
        ),
        rademacher_n=rademacher_n,
        rademacher_order=_parse_int(
            mapping["rademacher_order"], "maximal.rademacher_order", src, minimum=1
        ),
        rademacher_replications=_parse_int(
            mapping["rademacher_replications"],
            "maximal.rademacher_replications",
            src,
            minimum=2,
        ),
    )


def _parse_estimation(
    value: Any, src: _Source, *, dimension: int
) -> EstimationOptions:
    mapping = _section(value, "estimation", EstimationOptions, src)
    theta0 = _parse_float_list(mapping["theta0"], "estimation.theta0", src)
    if len(theta0) != dimension:
        raise src.error(
            "estimation.theta0",
            f"must have one entry per parameter dimension ({dimension})",
        )
    return EstimationOptions(
        n_grid=_parse_int_grid(mapping["n_grid"], "estimation.n_grid", src, minimum=3),
        replications=_parse_int(
            mapping["replications"], "estimation.replications", src, minimum=1
        ),
        theta0=theta0,
        net_delta=_parse_float(
            mapping["net_delta"], "estimation.net_delta", src, positive=True
        ),
        refine_tol=_parse_float(
            mapping["refine_tol"], "estimation.refine_tol", src, positive=True
        ),
        estimators=_parse_choices(
            mapping["estimators"], "estimation.estimators", src, ESTIMATORS
        ),
        weightings=_parse_choices(
            mapping["weightings"], "estimation.weightings", src, WEIGHTINGS
        ),
        m_family=_parse_family(mapping["m_family"], "estimation.m_family", src),
        gmm_family=_parse_family(mapping["gmm_family"], "estimation.gmm_family", src),
    )


def _parse_acceptance(value: Any, src: _Source) -> AcceptanceThresholds:
    mapping = _section(value, "acceptance", AcceptanceThresholds, src)
    parsed = {
        key: _parse_float(mapping[key], f"acceptance.{key}", src)
        for key in mapping
    }
    for key, number in parsed.items():
        if key != "ulln_slope_ceiling" and not number > 0:
            raise src.error(f"acceptance.{key}", "must be positive")
    if parsed["covariance_pass_rate"] > 1:
        raise src.error("acceptance.covariance_pass_rate", "must be <= 1")
    return AcceptanceThresholds(**parsed)

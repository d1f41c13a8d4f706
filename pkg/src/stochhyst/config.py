"""Experiment configuration: a flat YAML mapping with one key per field.

Unknown keys are rejected, and every validation error names the offending
line when the config came from a file.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Any

import yaml

from .environment import ParameterTable
from .solver import DEFAULT_MAX_ITER, DEFAULT_STEPS_PER_PERIOD, DEFAULT_TOL

MODES = ("run", "sweep-rates", "ensemble", "homogenize", "compare", "check")

FIGURE2_DELTAS = (1.0, 2.0**-2, 2.0**-4, 2.0**-6, 2.0**-8)
FIGURE4_EPS = (1 / 100, 1 / 200, 1 / 400, 1 / 800, 1 / 1600)


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.key, self.line, self.source = key, line, source
        where = ""
        if line is not None:
            where = f"{source or '<config>'}:{line}: "
        elif source:
            where = f"{source}: "
        super().__init__(where + (f"{key}: " if key else "") + message)


_FLOAT_LISTS = ("a_values", "mu_values", "nu_values", "a_weights", "mu_weights", "nu_weights",
                "eps_list", "delta_list")
_INTS = ("periods", "steps_per_period", "stride", "n_realizations", "base_seed", "max_iter",
         "omega_members", "macro_points")
_FLOATS = ("epsilon", "delta", "tol", "observe_time", "initial_amplitude")
_STRS = ("mode", "output_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "run"
    a_values: tuple[float, ...] = (1.0, 3.0)
    mu_values: tuple[float, ...] = (0.0, 0.4, 0.7)
    nu_values: tuple[float, ...] = (0.05, 0.1)
    a_weights: tuple[float, ...] | None = None
    mu_weights: tuple[float, ...] | None = None
    nu_weights: tuple[float, ...] | None = None
    epsilon: float = 1 / 200
    eps_list: tuple[float, ...] = FIGURE4_EPS[:4]
    delta: float = 0.1
    delta_list: tuple[float, ...] = FIGURE2_DELTAS
    periods: int = 2
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    stride: int = 1
    n_realizations: int = 30
    base_seed: int = 0
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    observe_time: float = 0.25
    omega_members: int = 0
    macro_points: int = 1
    initial_amplitude: float = 0.0
    output_dir: str = "out"
    _lines: dict = field(default_factory=dict, repr=False, compare=False)
    _source: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    # validation ----------------------------------------------------------

    def _fail(self, key: str, message: str):
        raise ConfigError(message, key, self._lines.get(key), self._source)

    def validate(self):
        if self.mode not in MODES:
            self._fail("mode", f"must be one of {', '.join(MODES)}, got {self.mode!r}")
        positive_ints = ("periods", "steps_per_period", "stride", "max_iter", "macro_points")
        for key in positive_ints:
            if getattr(self, key) < 1:
                self._fail(key, f"must be >= 1, got {getattr(self, key)}")
        if self.steps_per_period % self.stride:
            self._fail("stride", "must divide steps_per_period")
        if self.n_realizations < 1:
            self._fail("n_realizations", "must be >= 1")
        if self.mode == "ensemble" and self.n_realizations < 2:
            self._fail("n_realizations", "ensemble statistics need at least 2 realizations")
        if self.omega_members < 0:
            self._fail("omega_members", "must be >= 0 (0 enumerates the table)")
        if self.base_seed < 0:
            self._fail("base_seed", "must be >= 0")
        if not self.tol > 0:
            self._fail("tol", "must be > 0")
        if not 0 < self.epsilon <= 1:
            self._fail("epsilon", "must lie in (0, 1]")
        if not self.delta > 0:
            self._fail("delta", "must be > 0")
        if not self.eps_list:
            self._fail("eps_list", "must be nonempty")
        if any(not 0 < e <= 1 for e in self.eps_list):
            self._fail("eps_list", "entries must lie in (0, 1]")
        if not self.delta_list:
            self._fail("delta_list", "must be nonempty")
        if any(not d > 0 for d in self.delta_list):
            self._fail("delta_list", "entries must be > 0")
        if self.observe_time < 0:
            self._fail("observe_time", "must be >= 0")
        if self.mode == "ensemble" and self.observe_time > self.periods * 0.5 / self.delta:
            self._fail("observe_time", "lies beyond the simulated time range")
        try:
            self.table()
        except ValueError as err:
            msg = str(err)
            key = next((k for k in ("a_weights", "mu_weights", "nu_weights", "a_values",
                                    "mu_values", "nu_values") if msg.startswith(k)), "a_values")
            self._fail(key, msg)

    def table(self) -> ParameterTable:
        return ParameterTable(self.a_values, self.mu_values, self.nu_values,
                              self.a_weights, self.mu_weights, self.nu_weights)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            if f.name.startswith("_"):
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def content_hash(self) -> str:
        """SHA-256 of the canonical serialization, ignoring ``output_dir``."""
        d = self.to_dict()
        d.pop("output_dir")
        text = yaml.safe_dump(d, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, _lines={}, _source=None, **changes)

    @classmethod
    def from_mapping(cls, data: dict, lines: dict | None = None,
                     source: str | None = None, base: "ExperimentConfig | None" = None):
        lines = lines or {}
        known = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError("unknown key", str(key), lines.get(key), source)
            kwargs[key] = _coerce(key, value, lines.get(key), source)
        start = base.to_dict() if base is not None else {}
        start = {k: _coerce(k, v, None, None) for k, v in start.items()}
        start.update(kwargs)
        return cls(**start, _lines=lines, _source=source)

    @classmethod
    def from_yaml(cls, text: str, source: str | None = None,
                  base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        try:
            root = yaml.compose(text)
        except yaml.YAMLError as err:
            mark = getattr(err, "problem_mark", None)
            raise ConfigError(f"malformed YAML: {getattr(err, 'problem', err)}", None,
                              mark.line + 1 if mark else None, source) from None
        if root is None:
            return cls.from_mapping({}, source=source, base=base)
        if not isinstance(root, yaml.MappingNode):
            raise ConfigError("top level must be a mapping", None, root.start_mark.line + 1,
                              source)
        lines = {}
        for k, _ in root.value:
            if not isinstance(k, yaml.ScalarNode):
                raise ConfigError("keys must be plain names", None, k.start_mark.line + 1, source)
            if k.value in lines:
                raise ConfigError("duplicate key", k.value, k.start_mark.line + 1, source)
            lines[k.value] = k.start_mark.line + 1
        data = yaml.safe_load(text)
        return cls.from_mapping(data, lines, source, base)

    @classmethod
    def from_file(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_yaml(fh.read(), str(path), base)


def _coerce(key, value, line, source):
    def bad(what):
        raise ConfigError(f"expected {what}, got {value!r}", key, line, source)

    if key in _FLOAT_LISTS:
        if value is None and key.endswith("_weights"):
            return None
        if not isinstance(value, (list, tuple)):
            bad("a list of numbers")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            bad("a list of numbers")
        return tuple(float(v) for v in value)
    if key in _INTS:
        if isinstance(value, bool) or not isinstance(value, int):
            bad("an integer")
        return int(value)
    if key in _FLOATS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            bad("a number")
        return float(value)
    if key in _STRS:
        if not isinstance(value, str):
            bad("a string")
        return value
    return value


_FAST = dict(steps_per_period=400)

PRESETS: dict[str, dict[str, Any]] = {
    "figure2": dict(mode="sweep-rates", epsilon=1 / 200, delta_list=FIGURE2_DELTAS, periods=2,
                    base_seed=7),
    "figure2-fast": dict(mode="sweep-rates", epsilon=1 / 200,
                         delta_list=(2.0**-4, 2.0**-6, 2.0**-8), periods=2, base_seed=7,
                         **_FAST),
    "figure3": dict(mode="ensemble", eps_list=(1 / 1600,), delta=0.1, periods=2,
                    n_realizations=50, base_seed=12345),
    "figure3-fast": dict(mode="ensemble", eps_list=(1 / 400,), delta=0.1, periods=2,
                         n_realizations=10, base_seed=12345, **_FAST),
    "figure4": dict(mode="ensemble", eps_list=FIGURE4_EPS, delta=0.1, periods=2,
                    n_realizations=50, base_seed=12345),
    "figure4-fast": dict(mode="ensemble", eps_list=FIGURE4_EPS[:4], delta=0.1, periods=1,
                         n_realizations=30, base_seed=12345, **_FAST),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return ExperimentConfig(**PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None

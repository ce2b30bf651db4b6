"""TOML run and sweep configuration.

A run file has the sections ``[groups]`` or ``[dimensional]`` (at most one),
``[initial_state]``, ``[integrator]``, ``[analysis]`` and ``[output]``. Any
section or key left out takes the reference-run value or the integrator
default. A sweep file is a run file plus a ``[sweep]`` table::

    [sweep]
    parallelism = 4

    [[sweep.axis]]
    name = "n_f"
    min = 0.0
    max = 1.5
    count = 4
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .integrate import IntegratorConfig
from .model import REFERENCE_GROUPS, REFERENCE_INITIAL_STATE, DimensionalParams, DimensionlessGroups, ParameterError, State
from .scales import DEFAULT_EPSILON, DEFAULT_KAPPA, groups_from_dimensional

DEFAULT_HORIZON = (0.0, 200.0)
SWEEPABLE = DimensionlessGroups.field_names()


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class AnalysisOptions:
    limit_cycle: bool = True
    require_limit_cycle: bool = True
    phases: bool = True
    v_rate_threshold: float = 30.0
    transient_crossings: int = 2


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "out"
    trajectory_stride: int = 50
    plots: bool = False


@dataclass(frozen=True)
class RunConfig:
    groups: DimensionlessGroups = REFERENCE_GROUPS
    dimensional: DimensionalParams | None = None
    kappa: float = DEFAULT_KAPPA
    initial_state: State = REFERENCE_INITIAL_STATE
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    t0: float = DEFAULT_HORIZON[0]
    t1: float = DEFAULT_HORIZON[1]
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    output: OutputOptions = field(default_factory=OutputOptions)

    @property
    def source(self) -> str:
        return "dimensional" if self.dimensional is not None else "groups"

    def with_groups(self, **changes) -> "RunConfig":
        from dataclasses import replace

        return replace(self, groups=self.groups.replace(**changes), dimensional=None)

    def resolved(self) -> dict:
        """Fully resolved configuration, for provenance in outputs.

        The output directory is left out: where results are written does not
        change them, and keeping it would make relocated reruns differ.
        """
        output = asdict(self.output)
        del output["directory"]
        out = {
            "source": self.source,
            "groups": self.groups.as_dict(),
            "initial_state": dict(self.initial_state._asdict()),
            "integrator": {**asdict(self.integrator), "t0": self.t0, "t1": self.t1},
            "analysis": asdict(self.analysis),
            "output": output,
        }
        if self.dimensional is not None:
            out["dimensional"] = {**self.dimensional.as_dict(), "kappa": self.kappa}
        return out


@dataclass(frozen=True)
class SweepAxis:
    name: str
    min: float
    max: float
    count: int

    def values(self) -> list[float]:
        if self.count == 1:
            return [float(self.min)]
        return [float(v) for v in np.linspace(self.min, self.max, self.count)]


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig
    axes: tuple[SweepAxis, ...]
    parallelism: int = 1

    def grid(self) -> list[dict[str, float]]:
        """Grid points in row-major order, first axis outermost."""
        points = [{}]
        for axis in self.axes:
            points = [{**p, axis.name: v} for p in points for v in axis.values()]
        return points


def _read_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from None


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}].{key}: expected a number, got {value!r}")
    return float(value)


def _take(section: str, table: dict, allowed: dict[str, type]) -> dict:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(allowed)}")
    out = {}
    for key, value in table.items():
        kind = allowed[key]
        if kind is float:
            out[key] = _number(section, key, value)
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"[{section}].{key}: expected an integer, got {value!r}")
            out[key] = value
        elif kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"[{section}].{key}: expected true/false, got {value!r}")
            out[key] = value
        else:
            if not isinstance(value, str):
                raise ConfigError(f"[{section}].{key}: expected a string, got {value!r}")
            out[key] = value
    return out


def _build(section: str, factory, kwargs):
    try:
        return factory(**kwargs)
    except (ParameterError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


_SECTIONS = ("groups", "dimensional", "initial_state", "integrator", "analysis", "output", "sweep")


def parse_run_config(data: dict, base_dir: str | os.PathLike = ".") -> RunConfig:
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}; allowed: {', '.join(_SECTIONS)}")
    for name, value in data.items():
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table")
    if "groups" in data and "dimensional" in data:
        raise ConfigError("give exactly one parameter source: [groups] or [dimensional], not both")

    kappa = DEFAULT_KAPPA
    dimensional = None
    if "dimensional" in data:
        allowed = {f.name: float for f in fields(DimensionalParams)}
        allowed.update(kappa=float, epsilon=float)
        raw = _take("dimensional", data["dimensional"], allowed)
        kappa = raw.pop("kappa", DEFAULT_KAPPA)
        epsilon = raw.pop("epsilon", DEFAULT_EPSILON)
        missing = [f.name for f in fields(DimensionalParams) if f.name not in raw and f.name != "i_ext"]
        if missing:
            raise ConfigError(f"[dimensional]: missing key(s) {', '.join(missing)}")
        dimensional = _build("dimensional", DimensionalParams, raw)
        if dimensional.i_ext != 0.0:
            raise ConfigError(
                "[dimensional].i_ext: the dimensionless closed loop has no applied-current group; use 0"
            )
        try:
            groups = groups_from_dimensional(dimensional, kappa=kappa, epsilon=epsilon)
        except (ParameterError, ValueError) as exc:
            raise ConfigError(f"[dimensional]: {exc}") from None
    else:
        raw = _take("groups", data.get("groups", {}), {name: float for name in SWEEPABLE})
        groups = _build("groups", REFERENCE_GROUPS.replace, raw)

    raw = _take("initial_state", data.get("initial_state", {}), {name: float for name in State._fields})
    init = REFERENCE_INITIAL_STATE._replace(**raw)
    if not np.all(np.isfinite(init)):
        raise ConfigError("[initial_state]: entries must be finite")

    allowed = {f.name: (int if f.name in ("max_steps", "record_stride") else float) for f in fields(IntegratorConfig)}
    allowed.update(t0=float, t1=float)
    raw = _take("integrator", data.get("integrator", {}), allowed)
    t0 = raw.pop("t0", DEFAULT_HORIZON[0])
    t1 = raw.pop("t1", DEFAULT_HORIZON[1])
    if not t1 > t0:
        raise ConfigError(f"[integrator].t1: horizon must satisfy t1 > t0, got t0={t0!r}, t1={t1!r}")
    integ = _build("integrator", IntegratorConfig, raw)

    allowed = {f.name: f.type for f in fields(AnalysisOptions)}
    allowed = {k: {"bool": bool, "float": float, "int": int}[v if isinstance(v, str) else v.__name__] for k, v in allowed.items()}
    raw = _take("analysis", data.get("analysis", {}), allowed)
    analysis = AnalysisOptions(**raw)
    if analysis.v_rate_threshold <= 1.0:
        raise ConfigError("[analysis].v_rate_threshold: must be > 1")
    if analysis.transient_crossings < 0:
        raise ConfigError("[analysis].transient_crossings: must be >= 0")

    raw = _take("output", data.get("output", {}), {"directory": str, "trajectory_stride": int, "plots": bool})
    if "directory" in raw and not os.path.isabs(raw["directory"]):
        raw["directory"] = os.path.normpath(os.path.join(base_dir, raw["directory"]))
    output = OutputOptions(**raw)
    if output.trajectory_stride < 1:
        raise ConfigError("[output].trajectory_stride: must be >= 1")

    return RunConfig(
        groups=groups,
        dimensional=dimensional,
        kappa=kappa,
        initial_state=init,
        integrator=integ,
        t0=t0,
        t1=t1,
        analysis=analysis,
        output=output,
    )


def load_run_config(path) -> RunConfig:
    data = _read_toml(path)
    data.pop("sweep", None)
    return parse_run_config(data, base_dir=Path(path).parent)


def load_sweep_spec(path) -> SweepSpec:
    data = _read_toml(path)
    sweep = data.pop("sweep", None)
    if not isinstance(sweep, dict):
        raise ConfigError(f"{path}: missing [sweep] table")
    base = parse_run_config(data, base_dir=Path(path).parent)

    raw_axes = sweep.get("axis", [])
    if isinstance(raw_axes, dict):
        raw_axes = [raw_axes]
    unknown = sorted(set(sweep) - {"axis", "parallelism"})
    if unknown:
        raise ConfigError(f"[sweep]: unknown key(s) {', '.join(unknown)}")
    if not 1 <= len(raw_axes) <= 2:
        raise ConfigError("[sweep].axis: give one or two axes")
    axes = []
    for i, table in enumerate(raw_axes):
        where = f"sweep.axis[{i}]"
        raw = _take(where, table, {"name": str, "min": float, "max": float, "count": int})
        missing = [k for k in ("name", "min", "max", "count") if k not in raw]
        if missing:
            raise ConfigError(f"[{where}]: missing key(s) {', '.join(missing)}")
        if raw["name"] not in SWEEPABLE:
            raise ConfigError(f"[{where}].name: unknown group {raw['name']!r}; sweepable: {', '.join(SWEEPABLE)}")
        if raw["count"] < 1:
            raise ConfigError(f"[{where}].count: must be >= 1")
        if raw["count"] > 1 and not raw["max"] >= raw["min"]:
            raise ConfigError(f"[{where}]: need max >= min")
        axes.append(SweepAxis(**raw))
    if len({a.name for a in axes}) != len(axes):
        raise ConfigError("[sweep].axis: axis names must differ")

    parallelism = sweep.get("parallelism", 1)
    if isinstance(parallelism, bool) or not isinstance(parallelism, int) or parallelism < 1:
        raise ConfigError(f"[sweep].parallelism: expected a positive integer, got {parallelism!r}")
    return SweepSpec(base=base, axes=tuple(axes), parallelism=parallelism)

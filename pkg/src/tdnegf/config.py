"""Flat ``section.key = value`` run configuration files.

Lines starting with ``#`` are comments; inline ``#`` comments are stripped.
Numeric values may use ``pi`` and the four arithmetic operators, e.g.
``pulse.phi_cep = pi/2``.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DomainError
from .lattice import LatticeSpec, PlaneWaveSource
from .potentials import (
    DIPOLE_MODES,
    LaserPulse,
    NoPotential,
    PulseSpec,
    SquareBarrier,
    load_tabulated_csv,
)
from .propagate import MODES, RunConfig

# key -> (kind, default); default None means required when the section applies
SCHEMA = {
    "lattice.a": ("float", None),
    "lattice.m": ("float", 1.0),
    "lattice.M": ("int", None),
    "source.E": ("float", None),
    "run.dt": ("float", None),
    "run.n_steps": ("int", None),
    "run.mode": ("str", "auto"),
    "potential.variant": ("str", "none"),
    "barrier.U0": ("float", None),
    "barrier.j_lo": ("int", None),
    "barrier.j_hi": ("int", None),
    "barrier.t_on": ("float", 0.0),
    "barrier.t_off": ("float", math.inf),
    "barrier.ramp": ("float", "auto"),
    "pulse.eps0": ("float", None),
    "pulse.omega0": ("float", None),
    "pulse.phi_cep": ("float", 0.0),
    "pulse.T": ("float", None),
    "pulse.L": ("float", "auto"),
    "pulse.dipole_mode": ("str", "line_integral"),
    "tabulated.path": ("str", None),
    "output.out_dir": ("str", "."),
    "output.record_stride": ("int", 1),
    "output.format": ("str", "csv"),
}
VARIANT_SECTIONS = {"none": None, "square_barrier": "barrier", "laser_pulse": "pulse", "tabulated": "tabulated"}
FORMATS = ("csv", "tsv")

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "inf": math.inf}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str, kind: str = "float"):
    """Parse a numeric literal or a small arithmetic expression."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        try:
            value = float(_eval(ast.parse(text, mode="eval")))
        except (SyntaxError, ValueError, ZeroDivisionError, TypeError) as exc:
            raise ValueError(f"not a number: {text!r}") from exc
    if kind == "int":
        if not value.is_integer():
            raise ValueError(f"not an integer: {text!r}")
        return int(value)
    return value


def parse_text(text: str, origin: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{origin}:{lineno}: expected 'section.key = value'")
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


@dataclass
class CliConfig:
    """Raw key-value document plus the directory relative paths refer to."""

    values: dict[str, str]
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path) -> "CliConfig":
        path = Path(path)
        text = path.read_text()
        return cls(parse_text(text, str(path)), path.resolve().parent)

    def with_value(self, key: str, value: str) -> "CliConfig":
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        new = dict(self.values)
        new[key] = value
        return CliConfig(new, self.base_dir)

    def get(self, key: str):
        kind, default = SCHEMA[key]
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        text = self.values[key]
        if kind == "str":
            return text
        try:
            return parse_number(text, kind)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    def variant(self) -> str:
        variant = self.get("potential.variant")
        if variant not in VARIANT_SECTIONS:
            raise ConfigError(f"potential.variant: unknown variant {variant!r}")
        wanted = VARIANT_SECTIONS[variant]
        for key in self.values:
            section = key.split(".", 1)[0]
            if section in ("barrier", "pulse", "tabulated") and section != wanted:
                raise ConfigError(f"{key} does not apply to potential.variant = {variant}")
        return variant

    def output_format(self) -> str:
        fmt = self.get("output.format")
        if fmt not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}, got {fmt!r}")
        return fmt


def _guard(key, build):
    try:
        return build()
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def build_lattice(cfg: CliConfig) -> LatticeSpec:
    a, m, M = cfg.get("lattice.a"), cfg.get("lattice.m"), cfg.get("lattice.M")
    return _guard("lattice", lambda: LatticeSpec(a=a, m=m, M=M))


def build_potential(cfg: CliConfig, lat: LatticeSpec):
    variant = cfg.variant()
    if variant == "none":
        return NoPotential()
    if variant == "square_barrier":
        ramp = cfg.get("barrier.ramp")
        return SquareBarrier(
            U0=cfg.get("barrier.U0"),
            j_lo=cfg.get("barrier.j_lo"),
            j_hi=cfg.get("barrier.j_hi"),
            t_on=cfg.get("barrier.t_on"),
            t_off=cfg.get("barrier.t_off"),
            ramp=None if ramp == "auto" else ramp,
        )
    if variant == "laser_pulse":
        L = cfg.get("pulse.L")
        L = lat.length if L == "auto" else L
        mode = cfg.get("pulse.dipole_mode")
        if mode not in DIPOLE_MODES:
            raise ConfigError(f"pulse.dipole_mode must be one of {DIPOLE_MODES}, got {mode!r}")
        pulse = _guard("pulse", lambda: PulseSpec(
            eps0=cfg.get("pulse.eps0"),
            omega0=cfg.get("pulse.omega0"),
            phi_cep=cfg.get("pulse.phi_cep"),
            T=cfg.get("pulse.T"),
            L=L,
        ))
        return LaserPulse(pulse, mode)
    path = Path(cfg.get("tabulated.path"))
    if not path.is_absolute():
        path = cfg.base_dir / path
    return load_tabulated_csv(path)


def build_run(cfg: CliConfig) -> RunConfig:
    """Resolve a :class:`CliConfig` into a validated :class:`RunConfig`."""
    lat = build_lattice(cfg)
    src = _guard("source.E", lambda: PlaneWaveSource.at_energy(lat, cfg.get("source.E")))
    pot = build_potential(cfg, lat)
    mode = cfg.get("run.mode")
    if mode not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {mode!r}")
    return RunConfig(
        lat=lat,
        src=src,
        pot=pot,
        dt=cfg.get("run.dt"),
        n_steps=cfg.get("run.n_steps"),
        record_stride=cfg.get("output.record_stride"),
        mode=mode,
    )


def describe_run(run: RunConfig, fmt: str = "csv") -> dict:
    """Resolved and derived quantities for ``meta.csv``."""
    lat, src = run.lat, run.src
    meta = {
        "lattice.a": lat.a,
        "lattice.m": lat.m,
        "lattice.M": lat.M,
        "lattice.d": lat.d,
        "source.E": src.E,
        "source.k": src.k,
        "source.N": src.N,
        "run.dt": run.dt,
        "run.n_steps": run.n_steps,
        "run.t_end": run.n_steps * run.dt,
        "run.mode": run.mode,
        "run.stability_bound": run.stability_bound,
        "output.record_stride": run.record_stride,
        "output.format": fmt,
    }
    meta.update(run.pot.describe())
    if isinstance(run.pot, LaserPulse):
        t = run.dt * np.arange(run.n_steps + 1)
        edge = [run.pot.row(lat, tk, np.array([lat.M]))[0] for tk in t]
        meta["pulse.max_abs_U"] = float(np.max(np.abs(edge)))
    return meta

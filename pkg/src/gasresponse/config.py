"""Plain-text run configuration: ``key = value`` lines under ``[section]`` headers.

Distribution files use a ``[distribution]`` section, potentials a
``[potential]`` section, grids a ``[grid]`` section and perturbations one
``[orbital ...]`` section per Gaussian orbital.  Grid specifications may also
be given inline as ``key=value,key=value``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from .distributions import Family, MomentumDistribution, load_table
from .errors import ConfigError, ParameterDomainError
from .potentials import InteractionPotential, PotentialFamily

__all__ = [
    "read_sections",
    "parse_inline",
    "load_distribution",
    "load_potential",
    "GridSpec",
    "load_grid",
    "load_perturbation",
]


def _parser():
    p = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    p.optionxform = str
    return p


def read_sections(path):
    """Sections of a config file as ``{name: {key: value}}`` (order preserved)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    p = _parser()
    try:
        p.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: dict(p[s]) for s in p.sections()}


def parse_inline(text):
    """``"a=1, b=2"`` -> ``{"a": "1", "b": "2"}``."""
    out = {}
    for item in filter(None, (x.strip() for x in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"grid item {item!r} is not of the form key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        if not k:
            raise ConfigError(f"grid item {item!r} has an empty key")
        out[k] = v
    return out


def _section(sections, name, path):
    if name not in sections:
        raise ConfigError(f"{path}: missing [{name}] section")
    return sections[name]


def _number(table, key, where, *, default=None, kind=float):
    if key not in table or table[key] == "":
        if default is not None:
            return default
        raise ConfigError(f"{where}: missing field '{key}'")
    try:
        val = kind(table[key])
    except ValueError as exc:
        raise ConfigError(f"{where}: field '{key}' = {table[key]!r} is not a valid {kind.__name__}") from exc
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"{where}: field '{key}' must be finite")
    return val


def _resolve(base, value):
    p = Path(value)
    return p if p.is_absolute() else Path(base).parent / p


_FAMILY_NAMES = {f.value.lower(): f for f in Family}
_FAMILY_NAMES.update({f.name.lower(): f for f in Family})


def load_distribution(path):
    """MomentumDistribution from a ``[distribution]`` section."""
    sec = _section(read_sections(path), "distribution", path)
    where = f"{path} [distribution]"
    name = sec.get("family", "").strip().lower()
    if not name:
        raise ConfigError(f"{where}: missing field 'family'")
    if name not in _FAMILY_NAMES:
        raise ConfigError(f"{where}: unknown family {sec['family']!r}")
    fam = _FAMILY_NAMES[name]
    d = _number(sec, "dimension", where, default=2, kind=int)
    try:
        if fam is Family.TABULATED:
            if "table_path" not in sec:
                raise ConfigError(f"{where}: missing field 'table_path'")
            r, f = load_table(_resolve(path, sec["table_path"]))
            return MomentumDistribution.tabulated(r, f, d)
        mu = _number(sec, "mu", where)
        if fam is Family.FERMI_ZERO_T:
            return MomentumDistribution.fermi_zero_t(mu, d)
        T = _number(sec, "temperature", where)
        ctor = {Family.FERMI_DIRAC: MomentumDistribution.fermi_dirac,
                Family.BOSE_EINSTEIN: MomentumDistribution.bose_einstein,
                Family.BOLTZMANN: MomentumDistribution.boltzmann}[fam]
        return ctor(T, mu, d)
    except ParameterDomainError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_potential(path, dimension=2):
    """InteractionPotential from a ``[potential]`` section.

    ``family = Gaussian`` takes ``amplitude`` and ``width``;
    ``family = TabulatedRadialFourier`` takes ``table_path`` (two columns k, w_hat).
    """
    sec = _section(read_sections(path), "potential", path)
    where = f"{path} [potential]"
    name = sec.get("family", "").strip().lower()
    if not name:
        raise ConfigError(f"{where}: missing field 'family'")
    try:
        if name == PotentialFamily.GAUSSIAN.value.lower():
            return InteractionPotential.gaussian(_number(sec, "amplitude", where),
                                                 _number(sec, "width", where), dimension)
        if name in (PotentialFamily.TABULATED.value.lower(), "tabulated"):
            if "table_path" not in sec:
                raise ConfigError(f"{where}: missing field 'table_path'")
            data = np.loadtxt(_resolve(path, sec["table_path"]), delimiter=",", ndmin=2)
            if data.shape[1] != 2:
                raise ConfigError(f"{where}: potential table needs two columns (k, w_hat)")
            return InteractionPotential.tabulated(data[:, 0], data[:, 1], dimension)
    except (ParameterDomainError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown family {sec['family']!r}")


@dataclass(frozen=True)
class GridSpec:
    """Validated grid fields; ``source`` names where they came from."""

    fields: dict
    source: str

    def require(self, key, kind=float, default=None):
        return _number(self.fields, key, f"grid spec ({self.source})", default=default, kind=kind)

    def get(self, key, kind=float, default=None):
        if key not in self.fields:
            return default
        return self.require(key, kind)

    def __contains__(self, key):
        return key in self.fields


def load_grid(spec):
    """GridSpec from a file with a ``[grid]`` section or an inline ``k=v,...`` string."""
    if spec is None:
        return GridSpec({}, "defaults")
    p = Path(spec)
    if p.suffix in (".cfg", ".ini", ".conf", ".txt") or p.is_file():
        return GridSpec(_section(read_sections(p), "grid", p), str(p))
    return GridSpec(parse_inline(spec), "inline")


def load_perturbation(path):
    """FinitePerturbation from ``[orbital <name>]`` sections.

    Each section holds ``center_x, center_y, sigma, momentum_x, momentum_y, weight``.
    """
    from .dynamics.perturbation import FinitePerturbation

    sections = read_sections(path)
    params = []
    for name, sec in sections.items():
        if not name.split()[0] == "orbital":
            continue
        where = f"{path} [{name}]"
        params.append(tuple(_number(sec, key, where) for key in
                            ("center_x", "center_y", "sigma", "momentum_x", "momentum_y", "weight")))
    if not params:
        raise ConfigError(f"{path}: no [orbital ...] sections")
    try:
        return FinitePerturbation.gaussians(params)
    except ParameterDomainError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

"""Run configuration: INI sections, round-trip serialization and validation."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

from .mesh import DomainSpec

GRID_KINDS = ("masked", "radial")
GREEN_MODES = ("auto", "disk-closed-form", "grid-numeric")

# section of every field, in file order
_SECTIONS = {
    "domain": ("domain", "grid", "h", "n"),
    "alpha": ("alphas", "relative"),
    "solver": ("tol", "max_iter", "eig_tol", "eig_max_iter", "exp_cap", "p", "continuation"),
    "shoot": ("gamma", "A", "Lambda", "mu", "r_max", "shoot_tol", "delta"),
    "green": ("green_mode", "samples", "poles"),
    "bubble": ("r_min", "r_max_table", "n_radii"),
    "run": ("out", "seed", "start"),
}


def parse_number(text: str) -> float:
    """Float or exact fraction such as ``1/128``."""
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


@dataclass(frozen=True)
class RunConfig:
    domain: str = "disk:1"
    grid: str = "masked"
    h: float = 1 / 128
    n: int = 2049
    alphas: tuple[float, ...] = (0.0, 0.5)
    relative: bool = True
    tol: float = 1e-7
    max_iter: int = 500
    eig_tol: float = 1e-12
    eig_max_iter: int = 200
    exp_cap: float = 700.0
    p: float = 2.0
    continuation: bool = True
    gamma: float = 5.0
    A: float = 0.0
    Lambda: float = 0.0  # 0 means: derive from mu
    mu: float = 1.0
    r_max: float = 0.0  # 0 means: twice r_delta
    shoot_tol: float = 1e-10
    delta: float = 0.5
    green_mode: str = "auto"
    samples: int = 10000
    poles: int = 8
    r_min: float = 1e-3
    r_max_table: float = 1e3
    n_radii: int = 61
    out: str = "out"
    seed: int = 0
    start: str = "eigen"
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sect, names in _SECTIONS.items():
            cp[sect] = {k: _fmt(getattr(self, k)) for k in names}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        known = {k: s for s, names in _SECTIONS.items() for k in names}
        for sect in cp.sections():
            for key, raw in cp[sect].items():
                if known.get(key) != sect:
                    raise ConfigError(f"{sect}.{key}", "unknown setting")
                kw[key] = _parse(key, types[key], raw)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for names in _SECTIONS.values() for k in names}

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


class ConfigError(ValueError):
    def __init__(self, name: str, reason: str):
        super().__init__(f"{name}: {reason}")
        self.name = name


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(key: str, typ: str, raw: str):
    try:
        if typ == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return parse_number(raw)
        if typ.startswith("tuple"):
            return tuple(parse_number(x) for x in raw.split(",") if x.strip())
        return raw.strip()
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(key, f"cannot parse {raw!r}") from exc


def validate(cfg: RunConfig) -> list[str]:
    """All violations as ``"field: reason"`` strings; empty when valid."""
    out = []
    try:
        DomainSpec.parse(cfg.domain)
    except ValueError as exc:
        out.append(f"domain: {exc}")
    if cfg.grid not in GRID_KINDS:
        out.append(f"grid: must be one of {GRID_KINDS}")
    elif cfg.grid == "radial" and not cfg.domain.startswith("disk"):
        out.append("grid: radial grids need a disk domain")
    if not cfg.h > 0:
        out.append("h: must be positive")
    if cfg.n < 3:
        out.append("n: need at least 3 radial nodes")
    if not cfg.alphas:
        out.append("alphas: empty list")
    for a in cfg.alphas:
        if a < 0:
            out.append(f"alphas: {a!r} is negative")
        elif cfg.relative and a >= 1:
            out.append(
                f"alphas: fraction {a!r} must be < 1; the functional is finite only for alpha < lambda1"
            )
    for name in ("tol", "eig_tol", "shoot_tol", "exp_cap", "gamma", "mu"):
        if not getattr(cfg, name) > 0:
            out.append(f"{name}: must be positive")
    for name in ("max_iter", "eig_max_iter", "samples", "poles", "n_radii"):
        if getattr(cfg, name) < 1:
            out.append(f"{name}: must be at least 1")
    if cfg.p < 1:
        out.append("p: norm exponent must be >= 1")
    if cfg.A < 0:
        out.append("A: must be non-negative")
    if cfg.Lambda < 0:
        out.append("Lambda: must be non-negative (0 derives it from mu)")
    if cfg.r_max < 0:
        out.append("r_max: must be non-negative (0 picks twice r_delta)")
    if not 0 < cfg.delta < 1:
        out.append("delta: must lie in (0, 1)")
    if cfg.green_mode not in GREEN_MODES:
        out.append(f"green_mode: must be one of {GREEN_MODES}")
    if not 0 < cfg.r_min < cfg.r_max_table:
        out.append("r_min: need 0 < r_min < r_max_table")
    if cfg.seed < 0:
        out.append("seed: must be non-negative")
    return out

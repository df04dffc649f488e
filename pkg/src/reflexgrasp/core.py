"""Shared planar types, frame transforms and the reflex parameter set."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised for malformed config files or parameter sets that violate an invariant."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass(frozen=True, slots=True)
class PlanarVec:
    x: float
    y: float

    def __add__(self, other):
        return PlanarVec(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return PlanarVec(self.x - other.x, self.y - other.y)

    def __mul__(self, s):
        return PlanarVec(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self):
        return PlanarVec(-self.x, -self.y)

    def __iter__(self):
        yield self.x
        yield self.y

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def cross(self, other):
        return self.x * other.y - self.y * other.x

    def norm(self):
        return math.hypot(self.x, self.y)

    def unit(self):
        n = self.norm()
        if n == 0.0:
            raise ZeroDivisionError("cannot normalize a zero vector")
        return PlanarVec(self.x / n, self.y / n)

    def rotated(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return PlanarVec(c * self.x - s * self.y, s * self.x + c * self.y)

    @classmethod
    def polar(cls, angle, length=1.0):
        return cls(length * math.cos(angle), length * math.sin(angle))


def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True, slots=True)
class GripperFrame:
    """Palm-centred frame: +x along the approach direction, +y toward the left finger."""

    origin: PlanarVec
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def world_to_gripper(p, frame):
    dx = p.x - frame.origin.x
    dy = p.y - frame.origin.y
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    return PlanarVec(c * dx + s * dy, -s * dx + c * dy)


def gripper_to_world(p, frame):
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    return PlanarVec(frame.origin.x + c * p.x - s * p.y, frame.origin.y + s * p.x + c * p.y)


@dataclass(frozen=True, slots=True)
class DiskObject:
    id: str
    center: PlanarVec
    radius: float
    mass: float = 0.2
    class_label: str = "cup"
    static: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"object {self.id!r}: radius must be > 0, got {self.radius}")
        if not self.mass > 0:
            raise ValueError(f"object {self.id!r}: mass must be > 0, got {self.mass}")


@dataclass(frozen=True)
class ReflexConfig:
    """Thresholds, stiffnesses and timing constants for the reflex controller (SI units).

    ``theta_close`` is compared against each fingertip's outward-positive distal
    heading; ``clearance_baseline`` is the extra fingertip gap the baseline
    controller leaves around the object. ``antipodal_check`` toggles the
    ``gamma_a`` test applied after pinch-type re-grasps.
    """

    d_thresh_out: float = 0.09
    d_thresh_forward: float = 0.09
    d_thresh_in: float = 0.09
    d_des_in: float = 0.06
    K_out: float = 20.0
    K_forward: float = 30.0
    K_in: float = 12.0
    d_near: float = 0.05
    d_far: float = 0.09
    d_occlude: float = 0.04
    gamma_a: float = math.radians(20.0)
    r_power: float = 0.03
    gamma_v: float = 0.2
    gamma_F: float = 0.5
    t_fail: float = 3.0
    theta_close: float = 0.0
    clearance_baseline: float = 0.010
    antipodal_check: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "antipodal_check":
                if not isinstance(v, bool):
                    raise ConfigError(f"{f.name} must be a boolean, got {v!r}", key=f.name)
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{f.name} must be a number, got {v!r}", key=f.name)
            if not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite, got {v!r}", key=f.name)
            if f.name != "theta_close" and not v > 0:
                raise ConfigError(f"{f.name} must be > 0, got {v!r}", key=f.name)
        if not self.d_des_in < self.d_thresh_in:
            raise ConfigError(
                f"d_des_in ({self.d_des_in}) must be smaller than d_thresh_in ({self.d_thresh_in})",
                key="d_des_in",
            )


CONFIG_KEYS = tuple(f.name for f in fields(ReflexConfig))


def _key_line(text, key):
    for i, line in enumerate(text.splitlines(), start=1):
        if line.split("=", 1)[0].strip() == key:
            return i
    return None


def parse_config(text, source="<string>"):
    """Parse config text (flat TOML, one ``key = value`` per line)."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from exc
    for key, value in data.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{_key_line(text, key)}: unknown key {key!r}",
                              key=key, line=_key_line(text, key))
        if isinstance(value, dict):
            raise ConfigError(f"{source}: tables are not allowed ({key!r})", key=key)
    try:
        return ReflexConfig(**data)
    except ConfigError as exc:
        line = _key_line(text, exc.key) if exc.key else None
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {exc}", key=exc.key, line=line) from None


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def dump_config(cfg):
    lines = []
    for key, value in asdict(cfg).items():
        if isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        else:
            lines.append(f"{key} = {float(value)!r}")
    return "\n".join(lines) + "\n"


def save_config(cfg, path):
    Path(path).write_text(dump_config(cfg), encoding="utf-8")

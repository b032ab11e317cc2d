"""Disk domain and chord geometry.

The scanning domain is a disk of radius R centered at the origin. A chord
is parameterized by an angle alpha in [0, pi) and a signed offset s with
|s| < R: the chord direction is theta = (cos alpha, sin alpha), the
perpendicular is theta_perp = (-sin alpha, cos alpha), and the chord is
the segment {s * theta_perp + t * theta} inside the disk.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoIntersectionError, NotOnBoundaryError

# |v . n| <= TANGENT_TOL * |v| counts as tangential incidence
TANGENT_TOL = 1e-12


@dataclass(frozen=True)
class DiskDomain:
    """Disk of given radius centered at the origin."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def xi(self, x):
        """Defining function R^2 - |x|^2: positive inside, zero on the boundary."""
        x = np.asarray(x, dtype=float)
        return self.radius**2 - np.sum(x * x, axis=-1)

    def normal(self, x):
        """Outward unit normal x/|x| (valid on and near the boundary)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return x / r

    def contains(self, x):
        return self.xi(x) > 0.0


def line_exit(domain: DiskDomain, x, e):
    """First boundary hit of the ray t -> x + t*e, t >= 0, from a point inside.

    Returns (t_exit, exit_point). Closed form from the quadratic
    |x + t e|^2 = R^2. The direction e need not be normalized; t is in
    units of |e|.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    a = float(e @ e)
    if a == 0.0:
        raise NoIntersectionError("zero direction")
    b = float(x @ e)
    c = float(x @ x) - domain.radius**2
    if c > TANGENT_TOL * domain.radius**2:
        raise NoIntersectionError("start point lies outside the disk")
    disc = b * b - a * min(c, 0.0)
    t = (-b + np.sqrt(disc)) / a
    return t, x + t * e


def classify(domain: DiskDomain, x, v, atol: float = 1e-9):
    """Classify a boundary phase point as incoming, outgoing, or tangent.

    x must lie on the boundary: |xi(x)| <= atol * R^2. The sign of
    v . n_x decides the class; |v . n| <= 1e-12 |v| is tangent.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(self_xi := float(domain.xi(x))) > atol * domain.radius**2:
        raise NotOnBoundaryError(f"xi(x) = {self_xi:.3e} exceeds tolerance")
    dot = float(v @ domain.normal(x))
    speed = float(np.linalg.norm(v))
    if abs(dot) <= TANGENT_TOL * speed:
        return "tangent"
    return "outgoing" if dot > 0.0 else "incoming"


@dataclass(frozen=True)
class Chord:
    """Oriented chord of the disk, entry point on the boundary.

    Arc length along the chord parameterizes points: point(0) is the entry,
    point(length) the geometric exit.
    """

    angle: float
    offset: float
    radius: float

    @property
    def direction(self):
        return np.array([np.cos(self.angle), np.sin(self.angle)])

    @property
    def perp(self):
        return np.array([-np.sin(self.angle), np.cos(self.angle)])

    @property
    def half(self) -> float:
        return float(np.sqrt(self.radius**2 - self.offset**2))

    @property
    def length(self) -> float:
        return 2.0 * self.half

    @property
    def entry(self):
        return self.offset * self.perp - self.half * self.direction

    @property
    def exit(self):
        return self.offset * self.perp + self.half * self.direction

    def point(self, t):
        """Point at arc length t from the entry."""
        t = np.asarray(t, dtype=float)
        return self.entry + t[..., None] * self.direction

    def t_star(self, speed: float) -> float:
        """Free-flight transit time: chord length over speed."""
        return self.length / speed


def chord_from(domain: DiskDomain, angle: float, offset: float) -> Chord:
    """Build the chord for (angle, offset); |offset| >= R has no interior intersection."""
    if abs(offset) >= domain.radius:
        raise NoIntersectionError(f"offset {offset} >= radius {domain.radius}")
    angle = float(angle) % np.pi
    return Chord(angle=angle, offset=float(offset), radius=domain.radius)

"""Doping profile catalog and analytic references.

A profile is the source term N of the potential problem
-Laplace(phi) = N - rho on the disk with zero boundary data; the
doping-generated field is E_N = grad(phi_N). For profile kinds with a
closed-form potential (constant, radial polynomial) the analytic
reference provides the exact field and, for the constant kind, the exact
chord integral used as a measurement oracle.

Sign convention: the recovery step reads N = RECOVERY_SIGN * div(E).
With -Laplace(phi) = N and E = grad(phi) this is RECOVERY_SIGN = -1;
the constant is the single switch should the opposite convention ever
be wanted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoAnalyticReferenceError
from .geometry import Chord

RECOVERY_SIGN = -1.0

# probe resolution for the W^{1,inf} bound reported as m0
_PROBE_N = 256
_PROBE_DELTA_REL = 1e-6


@dataclass(frozen=True)
class DopingProfile:
    """Doping density N on the disk.

    kind is one of 'constant', 'gaussian', 'radial', 'grid'. params holds
    the kind-specific data. m0 is a W^{1,inf} bound sup(|N| + |grad N|)
    estimated on a fixed probe grid at construction.
    """

    kind: str
    radius: float
    params: dict = field(repr=False)
    m0: float = 0.0

    def __call__(self, points):
        return self.eval(points)

    def eval(self, points):
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        if self.kind == "constant":
            return np.full(x.shape, self.params["n0"])
        if self.kind == "gaussian":
            cx, cy = self.params["center"]
            s2 = self.params["sigma"] ** 2
            return self.params["amplitude"] * np.exp(
                -((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * s2)
            )
        if self.kind == "radial":
            r2 = x * x + y * y
            out = np.zeros(x.shape)
            for k, ck in enumerate(self.params["coeffs"]):
                out += ck * r2**k
            return out
        if self.kind == "grid":
            return self._eval_grid(points)
        raise ValueError(f"unknown profile kind {self.kind!r}")

    def gradient(self, points):
        """grad N. Analytic for the analytic kinds, centered differences for grids."""
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        if self.kind == "constant":
            return np.zeros(points.shape)
        if self.kind == "gaussian":
            cx, cy = self.params["center"]
            s2 = self.params["sigma"] ** 2
            n = self.eval(points)
            return np.stack([-(x - cx) / s2 * n, -(y - cy) / s2 * n], axis=-1)
        if self.kind == "radial":
            r2 = x * x + y * y
            dfdr2 = np.zeros(x.shape)
            for k, ck in enumerate(self.params["coeffs"]):
                if k >= 1:
                    dfdr2 += ck * k * r2 ** (k - 1)
            return np.stack([2.0 * x * dfdr2, 2.0 * y * dfdr2], axis=-1)
        delta = _PROBE_DELTA_REL * self.radius
        ex = np.array([delta, 0.0])
        ey = np.array([0.0, delta])
        gx = (self.eval(points + ex) - self.eval(points - ex)) / (2 * delta)
        gy = (self.eval(points + ey) - self.eval(points - ey)) / (2 * delta)
        return np.stack([gx, gy], axis=-1)

    def _eval_grid(self, points):
        values = self.params["values"]
        n = values.shape[0]
        h = 2.0 * self.radius / n
        # bilinear on cell centers, clamped at the sampled extent
        g = (points + self.radius) / h - 0.5
        g = np.clip(g, 0.0, n - 1.0 - 1e-12)
        i0 = np.floor(g[..., 0]).astype(int)
        j0 = np.floor(g[..., 1]).astype(int)
        i0 = np.minimum(i0, n - 2)
        j0 = np.minimum(j0, n - 2)
        fx = g[..., 0] - i0
        fy = g[..., 1] - j0
        return (
            values[i0, j0] * (1 - fx) * (1 - fy)
            + values[i0 + 1, j0] * fx * (1 - fy)
            + values[i0, j0 + 1] * (1 - fx) * fy
            + values[i0 + 1, j0 + 1] * fx * fy
        )


def _probe_m0(profile: DopingProfile) -> float:
    n = _PROBE_N
    h = 2.0 * profile.radius / n
    c = -profile.radius + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    inside = X**2 + Y**2 <= profile.radius**2
    vals = np.abs(profile.eval(pts))
    grads = np.linalg.norm(profile.gradient(pts), axis=-1)
    return float(np.max((vals + grads)[inside]))


def _build(kind, radius, params) -> DopingProfile:
    prof = DopingProfile(kind=kind, radius=float(radius), params=params)
    object.__setattr__(prof, "m0", _probe_m0(prof))
    return prof


def constant(n0: float, radius: float = 1.0) -> DopingProfile:
    return _build("constant", radius, {"n0": float(n0)})


def gaussian(amplitude: float = 1.0, center=(0.2, 0.0), sigma: float = 0.15,
             radius: float = 1.0) -> DopingProfile:
    """Gaussian bump, the default phantom."""
    return _build("gaussian", radius, {
        "amplitude": float(amplitude),
        "center": (float(center[0]), float(center[1])),
        "sigma": float(sigma),
    })


def radial_polynomial(coeffs, radius: float = 1.0) -> DopingProfile:
    """N(r) = sum_k coeffs[k] * r^(2k)."""
    return _build("radial", radius, {"coeffs": tuple(float(c) for c in coeffs)})


def from_grid(values, radius: float = 1.0) -> DopingProfile:
    values = np.ascontiguousarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("grid profile wants a square value array")
    return _build("grid", radius, {"values": values})


class AnalyticReference:
    """Closed-form potential and field for profile kinds that admit one.

    constant n0:        phi = n0 (R^2 - r^2) / 4,   E = -n0 x / 2
    radial polynomial:  phi = sum_k c_k (R^(2k+2) - r^(2k+2)) / (2k+2)^2,
                        E = -sum_k c_k r^(2k) x / (2k+2)
    Other kinds raise NoAnalyticReferenceError.
    """

    def __init__(self, profile: DopingProfile):
        if profile.kind not in ("constant", "radial"):
            raise NoAnalyticReferenceError(
                f"profile kind {profile.kind!r} has no closed-form potential")
        self.profile = profile

    def _coeffs(self):
        if self.profile.kind == "constant":
            return (self.profile.params["n0"],)
        return self.profile.params["coeffs"]

    def potential(self, points):
        points = np.asarray(points, dtype=float)
        r2 = np.sum(points * points, axis=-1)
        R = self.profile.radius
        out = np.zeros(r2.shape)
        for k, ck in enumerate(self._coeffs()):
            p = k + 1
            out += ck * (R ** (2 * p) - r2**p) / (2.0 * p) ** 2
        return out

    def field(self, points):
        points = np.asarray(points, dtype=float)
        r2 = np.sum(points * points, axis=-1)
        scale = np.zeros(r2.shape)
        for k, ck in enumerate(self._coeffs()):
            scale += ck * r2**k / (2.0 * (k + 1))
        return -scale[..., None] * points

    def laplacian_residual(self, points):
        """max |(-Laplace phi) - N| by 5-point finite differences at probe points."""
        points = np.asarray(points, dtype=float)
        d = 1e-4 * self.profile.radius
        lap = (
            self.potential(points + [d, 0.0]) + self.potential(points - [d, 0.0])
            + self.potential(points + [0.0, d]) + self.potential(points - [0.0, d])
            - 4.0 * self.potential(points)
        ) / (d * d)
        return float(np.max(np.abs(-lap - self.profile.eval(points))))


def reference_field(profile: DopingProfile, points):
    """Exact doping field E_N at the given points (analytic kinds only)."""
    return AnalyticReference(profile).field(points)


def reference_chord_integral(profile: DopingProfile, chord: Chord):
    """Closed-form chord integral of E_N.

    Only the constant kind has the closed form: the integral of -n0 x / 2
    along the chord collapses to -n0 * s * sqrt(R^2 - s^2) * theta_perp;
    the component along the chord direction vanishes exactly (the
    potential is zero at both endpoints).
    """
    if profile.kind != "constant":
        raise NoAnalyticReferenceError(
            f"no closed-form chord integral for kind {profile.kind!r}")
    n0 = profile.params["n0"]
    mag = -n0 * chord.offset * chord.half
    return mag * chord.perp

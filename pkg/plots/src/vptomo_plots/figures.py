"""Figure specs and rendering.

render() parses the inputs (failing fast on schema problems), draws with
the Agg backend, and writes a deterministic PNG: fixed dpi, no software
metadata, and nothing time- or environment-dependent in the figure.
"""

from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import readers

KINDS = ("sinogram", "reconstruction", "convergence", "trajectories")

# input arity per kind; None means one or more
_ARITY = {"sinogram": 1, "reconstruction": 2, "convergence": 1, "trajectories": None}

_DPI = 150


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSV paths, the figure kind, the output path."""

    kind: str
    inputs: tuple
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, "
                             f"expected one of {', '.join(KINDS)}")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        want = _ARITY[self.kind]
        if want is None:
            if not self.inputs:
                raise ValueError(f"{self.kind} needs at least one input file")
        elif len(self.inputs) != want:
            raise ValueError(f"{self.kind} needs exactly {want} input file(s), "
                             f"got {len(self.inputs)}")


def fitted_slope(x, y):
    """Least-squares slope of log(y) against log(x), positive entries only."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def _render_sinogram(spec):
    sino = readers.read_sinogram(spec.inputs[0])
    offsets, angles = sino["offsets"], sino["angles"]
    extent = [offsets[0], offsets[-1], angles[0], angles[-1]]
    panels = [
        ("component 1", sino["values"][:, :, 0]),
        ("component 2", sino["values"][:, :, 1]),
        ("parallel residual", sino["parallel_residual"]),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 4.0), constrained_layout=True)
    for ax, (title, grid) in zip(axes, panels):
        im = ax.imshow(grid, origin="lower", aspect="auto", extent=extent,
                       cmap="RdBu_r")
        ax.set_title(title)
        ax.set_xlabel("offset s")
        fig.colorbar(im, ax=ax, shrink=0.85)
    axes[0].set_ylabel("angle")
    return _save(fig, spec.output)


def _render_reconstruction(spec):
    n_hat, r1, _ = readers.read_grid(spec.inputs[0])
    n_true, r2, _ = readers.read_grid(spec.inputs[1])
    if n_hat.shape != n_true.shape:
        raise readers.ParseError(spec.inputs[1], 0,
                                 f"grid shape {n_true.shape} does not match "
                                 f"{n_hat.shape} from the first input")
    extent = [-r1, r1, -r1, r1]
    lo, hi = float(n_true.min()), float(n_true.max())
    diff = n_hat - n_true
    amp = max(float(np.abs(diff).max()), 1e-30)
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 4.2), constrained_layout=True)
    # arrays are indexed (x, y), imshow draws (row, col): transpose
    for ax, title, grid, kw in (
            (axes[0], "recovered", n_hat, dict(vmin=lo, vmax=hi, cmap="viridis")),
            (axes[1], "true", n_true, dict(vmin=lo, vmax=hi, cmap="viridis")),
            (axes[2], "difference", diff, dict(vmin=-amp, vmax=amp, cmap="RdBu_r"))):
        im = ax.imshow(grid.T, origin="lower", extent=extent, **kw)
        ax.set_title(title)
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, spec.output)


def _render_convergence(spec):
    sweep, _ = readers.read_sweep(spec.inputs[0])
    speeds = sweep["speed"]
    err = sweep["err_vs_oracle"]
    res = sweep["residual_first"]
    slope = fitted_slope(speeds, err)
    fig, ax = plt.subplots(figsize=(6.0, 4.5), constrained_layout=True)
    ax.loglog(speeds, err, "o-", label="measurement error vs oracle")
    keep = res > 0
    if keep.any():
        ax.loglog(speeds[keep], res[keep], "s--", label="first fixed-point residual")
    if np.isfinite(slope):
        ax.annotate(f"fitted slope {slope:.2f}", xy=(0.05, 0.08),
                    xycoords="axes fraction")
    ax.set_xlabel("beam speed")
    ax.set_ylabel("error")
    ax.legend(loc="upper right")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, spec.output)


def _render_trajectories(spec):
    fig, ax = plt.subplots(figsize=(5.5, 5.5), constrained_layout=True)
    phi = np.linspace(0, 2 * np.pi, 361)
    ax.plot(np.cos(phi), np.sin(phi), "k-", lw=1.0)
    for path in spec.inputs:
        samples, _ = readers.read_trajectory(path)
        stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        ax.plot(samples[:, 1], samples[:, 2], lw=1.4, label=stem)
        ax.plot(samples[0, 1], samples[0, 2], "o", ms=5, color="black")
    ax.set_aspect("equal")
    ax.set_xlim(-1.12, 1.12)
    ax.set_ylim(-1.12, 1.12)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, spec.output)


_RENDERERS = {
    "sinogram": _render_sinogram,
    "reconstruction": _render_reconstruction,
    "convergence": _render_convergence,
    "trajectories": _render_trajectories,
}


def render(spec: FigureSpec) -> str:
    """Draw the figure and return the written path."""
    return _RENDERERS[spec.kind](spec)

"""One entry point per figure kind, sharing the --out flag."""

import argparse
import sys

from .figures import FigureSpec, render
from .readers import ParseError


def _run(kind, inputs, out):
    try:
        path = render(FigureSpec(kind, tuple(inputs), out))
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


def _parser(doc, out_default):
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--out", default=out_default, help="output image path")
    return p


def main_sinogram(argv=None):
    p = _parser("Heatmaps of a vector sinogram: both Cartesian components "
                "and the parallel residual.", "sinogram.png")
    p.add_argument("sinogram", help="sinogram CSV")
    a = p.parse_args(argv)
    return _run("sinogram", [a.sinogram], a.out)


def main_recon(argv=None):
    p = _parser("Recovered doping next to the truth, with the difference "
                "map.", "reconstruction.png")
    p.add_argument("recovered", help="recovered-grid CSV")
    p.add_argument("truth", help="true-grid CSV")
    a = p.parse_args(argv)
    return _run("reconstruction", [a.recovered, a.truth], a.out)


def main_convergence(argv=None):
    p = _parser("Log-log convergence of the measurement error and the "
                "fixed-point residual over the speed sweep, with the "
                "fitted slope annotated.", "convergence.png")
    p.add_argument("sweep", help="speed-sweep CSV")
    a = p.parse_args(argv)
    return _run("convergence", [a.sweep], a.out)


def main_trajectory(argv=None):
    p = _parser("Beam trajectories overlaid on the disk.", "trajectories.png")
    p.add_argument("trajectories", nargs="+", help="trajectory CSV file(s)")
    a = p.parse_args(argv)
    return _run("trajectories", a.trajectories, a.out)

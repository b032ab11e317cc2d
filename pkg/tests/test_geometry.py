import numpy as np
import pytest

from vptomo.errors import NoIntersectionError, NotOnBoundaryError
from vptomo.geometry import DiskDomain, Chord, chord_from, classify, line_exit


def test_diameter_chord(domain):
    chord = chord_from(domain, 0.0, 0.0)
    assert np.allclose(chord.entry, [-1.0, 0.0], atol=1e-14)
    assert np.allclose(chord.exit, [1.0, 0.0], atol=1e-14)
    assert abs(chord.length - 2.0) < 1e-14


def test_line_exit_diameter(domain):
    length, exit_pt = line_exit(domain, np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
    assert abs(length - 2.0) < 1e-14
    assert np.allclose(exit_pt, [1.0, 0.0], atol=1e-14)


def test_line_exit_matches_chord(domain):
    rng = np.random.default_rng(3)
    for _ in range(64):
        chord = chord_from(domain, rng.uniform(0, np.pi), rng.uniform(-0.95, 0.95))
        length, exit_pt = line_exit(domain, chord.entry, chord.direction)
        assert abs(length - chord.length) < 1e-10
        assert np.abs(exit_pt - chord.exit).max() < 1e-10
        assert abs(np.linalg.norm(exit_pt) - domain.radius) < 1e-10


def test_classify_boundary_points(domain):
    rng = np.random.default_rng(4)
    for _ in range(64):
        chord = chord_from(domain, rng.uniform(0, np.pi), rng.uniform(-0.95, 0.95))
        sigma = rng.uniform(0.01, 20.0)
        assert classify(domain, chord.entry, sigma * chord.direction) == "incoming"
        assert classify(domain, chord.exit, sigma * chord.direction) == "outgoing"


def test_classify_requires_boundary(domain):
    with pytest.raises(NotOnBoundaryError):
        classify(domain, np.array([0.2, 0.1]), np.array([1.0, 0.0]))


def test_no_intersection(domain):
    with pytest.raises(NoIntersectionError):
        chord_from(domain, 0.3, 1.5)
    with pytest.raises(NoIntersectionError):
        chord_from(domain, 0.3, 1.0)          # tangent counts as missing


def test_chord_parametrization(domain):
    rng = np.random.default_rng(5)
    for _ in range(32):
        chord = chord_from(domain, rng.uniform(0, np.pi), rng.uniform(-0.9, 0.9))
        assert np.allclose(chord.point(0.0), chord.entry, atol=1e-12)
        assert np.allclose(chord.point(chord.length), chord.exit, atol=1e-12)
        # closest approach to the center sits at mid-chord with |x| = |s|
        foot = chord.point(chord.length / 2)
        assert abs(np.linalg.norm(foot) - abs(chord.offset)) < 1e-12
        assert abs(chord.direction @ chord.perp) < 1e-15
        assert abs(chord.t_star(50.0) - chord.length / 50.0) < 1e-15


def test_angle_wraps_to_same_line(domain):
    base = chord_from(domain, 0.7, 0.4)
    wrapped = chord_from(domain, 0.7 + np.pi, 0.4)
    # same geometric line, entry/exit as seen from the normalized angle
    assert abs(wrapped.angle - base.angle) < 1e-12


def test_half_width(domain):
    chord = chord_from(domain, 1.2, 0.6)
    assert abs(chord.half - np.sqrt(1.0 - 0.36)) < 1e-14
    assert abs(chord.length - 2 * chord.half) < 1e-14

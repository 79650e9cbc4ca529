import math

import numpy as np
import pytest

from granular_jko.grid import Grid1D, quadrature_mass
from granular_jko.meshmap import (
    BumpMode, MapConstructionError, adapt_grid, build_map, build_map_one_bump,
    build_map_two_bump, concentration_radii_two_bump, concentration_radius_one_bump, refine,
    uniform_s_nodes,
)


def snap_up(grid, r):
    """Outermost node of a superlevel set whose true edge is r (last node < r)."""
    return grid.nodes[grid.nodes < r][-1]


def test_radius_one_bump_gaussian():
    g = Grid1D.uniform(2001, 2.0)
    f = np.exp(-30 * g.nodes**2)
    r = concentration_radius_one_bump(g, f, 0.5)
    exact = math.sqrt(math.log(2) / 30)
    assert r == pytest.approx(snap_up(g, exact))
    assert abs(r - 0.1520) < 2e-3


def test_radius_one_bump_degenerate_cases():
    g = Grid1D.uniform(20, 1.0)
    first = g.nodes[g.nodes > 0][0]
    f = np.where(g.nodes < 0, 1.0, 0.0)
    assert concentration_radius_one_bump(g, f, 0.5) == first
    with pytest.raises(ValueError, match="empty field"):
        concentration_radius_one_bump(g, np.zeros(20), 0.5)


def test_radii_two_bump_gaussians():
    g = Grid1D.uniform(4001, 4.0)
    f = np.exp(-50 * (g.nodes - 2) ** 2) + np.exp(-50 * (g.nodes + 2) ** 2)
    r1, r2 = concentration_radii_two_bump(g, f, 0.5)
    w = math.sqrt(math.log(2) / 50)
    assert abs(r1 - (2 - w)) < 2 * 8 / 4001 and abs(r2 - (2 + w)) < 2 * 8 / 4001


def test_radii_two_bump_single_node_and_small_delta0():
    g = Grid1D.uniform(20, 1.0)
    f = np.full(20, 0.1)
    f[15] = 1.0
    assert concentration_radii_two_bump(g, f, 0.5) == (g.nodes[15], g.nodes[15])
    pos = g.nodes[g.nodes > 0]
    assert concentration_radii_two_bump(g, np.full(20, 1.0), 1e-12) == (pos[0], pos[-1])


def test_one_bump_linear_degenerate():
    m = build_map_one_bump(1.0, 0.5, 2.0)
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(m(s), 2 * s, atol=1e-12)


def test_one_bump_quintic_coefficients():
    m = build_map_one_bump(0.25, 0.5, 2.0)
    kind, a, b = m.coefficients[1]
    assert kind == "quintic"
    assert a == pytest.approx(1.6) and b == pytest.approx(0.4)


def test_one_bump_sigmoid_branch():
    m = build_map_one_bump(1.8, 0.5, 2.0)
    assert m.coefficients[1][0] == "sigmoid"
    assert abs(float(m(np.array([0.5]))[0]) - 1.8) < 1e-10
    assert abs(float(m(np.array([1.0]))[0]) - 2.0) < 1e-10


def test_one_bump_falls_back_to_chord_when_no_curve_fits():
    # neither an unshifted logistic nor a monotone quintic joins (0.5, 1.5) to (1, 2)
    m = build_map_one_bump(1.5, 0.5, 2.0)
    assert m.coefficients[1][0] == "linear"
    np.testing.assert_allclose(m(np.array([0.5, 1.0])), [1.5, 2.0], atol=1e-12)


def test_two_bump_knots_and_endpoints():
    for r1, r2, delta in [(0.2, 2.5, 0.5), (0.05, 2.9, 0.5), (1.0, 1.2, 0.5), (0.5, 1.0, 0.999)]:
        m = build_map_two_bump(r1, r2, delta, 3.0)
        vals = m(np.array([0.0, 0.5 - delta / 2, 0.5 + delta / 2, 1.0]))
        np.testing.assert_allclose(vals, [0, r1, r2, 3.0], atol=1e-10)
        assert np.all(np.diff(m(np.linspace(0, 1, 2001))) > 0)


def test_two_bump_degenerate_width_is_widened():
    m = build_map_two_bump(1.0, 1.0, 0.5, 3.0, min_width=0.01)
    assert m.knots[1] - m.knots[0] == pytest.approx(0.01)
    assert np.all(np.diff(m(np.linspace(0, 1, 1001))) > 0)


def test_invalid_map_inputs():
    with pytest.raises(ValueError):
        build_map_one_bump(2.0, 0.5, 2.0)
    with pytest.raises(ValueError):
        build_map_two_bump(1.0, 0.5, 0.5, 2.0)
    with pytest.raises(ValueError):
        build_map_one_bump(0.5, 1.0, 2.0)


def test_refine_identity_map():
    g = Grid1D.uniform(21, 2.0)
    f = np.exp(-g.nodes**2)
    new, vals = refine(g, f, build_map_one_bump(1.0, 0.5, 2.0))
    np.testing.assert_allclose(new.nodes, g.nodes, atol=1e-12)
    np.testing.assert_allclose(vals, f, rtol=1e-10)


def test_refine_concentrates_nodes_and_conserves_mass():
    g = Grid1D.uniform(121, 2.0)
    f = np.exp(-20 * g.nodes**2)
    m = build_map(g, f, BumpMode.ONE, 0.5, 0.5)
    new, vals = refine(g, f, m)
    r = m.knots[0]
    assert np.mean(np.abs(new.nodes) <= r + 1e-12) >= 0.5
    assert quadrature_mass(new, vals) == pytest.approx(quadrature_mass(g, f), rel=1e-12)
    assert len(new) == len(g) and vals.min() > 0


def test_uniform_s_nodes_symmetric():
    s = uniform_s_nodes(10)
    np.testing.assert_allclose(s, -s[::-1])


def test_adapt_grid_two_bump_symmetric():
    g = Grid1D.uniform(61, 4.0)
    f = np.exp(-10 * (g.nodes - 1.5) ** 2) + np.exp(-10 * (g.nodes + 1.5) ** 2)
    new = adapt_grid(g, f, BumpMode.TWO, 0.5, 0.5)
    assert new.is_symmetric()
    assert new.min_spacing < g.min_spacing


def test_adapt_grid_keeps_old_grid_on_failure(monkeypatch):
    import granular_jko.meshmap as mm

    def boom(*a, **k):
        raise MapConstructionError("map construction failed")

    monkeypatch.setattr(mm, "build_map", boom)
    g = Grid1D.uniform(11, 1.0)
    assert mm.adapt_grid(g, np.ones(11), BumpMode.ONE, 0.5, 0.5) is g

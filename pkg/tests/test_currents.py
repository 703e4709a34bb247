import math

import numpy as np
import pytest

from degreelab import currents as C
from degreelab import models as M
from degreelab.errors import (BudgetError, IndeterminateError,
                              PreconditionError, UnsupportedError)

LOG3 = math.log(3.0)
LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# gamma


def test_gamma_squaring_values(squaring):
    assert C.gamma_plus(squaring, M.proj_point((1, 0, 0))) == 0.0
    g = C.gamma_plus(squaring, M.proj_point((1, 1, 1)))
    # (1/2) * (1/2) * log(3/9)
    assert abs(g - (-0.25 * LOG3)) < 1e-14


def test_gamma_torus_zero(torus_d2):
    assert C.gamma_plus(torus_d2, M.torus_point(0.3, 0.4)) == 0.0


def test_gamma_indeterminate(skew2):
    with pytest.raises(IndeterminateError):
        C.gamma_plus(skew2, M.proj_point((1, 0, 0)))


# ---------------------------------------------------------------------------
# pullback series


def test_green_squaring_fixed_point(squaring):
    g = C.green_plus(squaring, M.proj_point((1, 1, 1)), tol=0.0, n_max=40)
    assert abs(g.value - (-LOG3 / 2)) < 1e-9
    assert g.n_used == 40
    assert not g.orbit_hit_indeterminacy


def test_green_squaring_other_points(squaring):
    assert C.green_plus(squaring, M.proj_point((1, 0, 0)), tol=0.0,
                        n_max=40).value == 0.0
    g = C.green_plus(squaring, M.proj_point((1, 0, 1)), tol=0.0, n_max=40)
    assert abs(g.value - (-LOG2 / 2)) < 1e-9


def test_green_torus_identically_zero(torus_d2):
    g = C.green_plus(torus_d2, M.torus_point(0.1, 0.9))
    assert g.value == 0.0 and g.tail_bound == 0.0


def iterated_lift_oracle(model, p, n):
    """Growth of the iterated lift, telescoped: the independent check of
    the partial sums.  Tracks a separate log scale so nothing overflows."""
    delta = model.algebraic_degree
    lam1 = float(model.pullback_matrix[0][0])
    monos = model.lift_monomials()
    from degreelab.models import _eval_trivar
    coords = p.coords
    log_scale = 0.0  # log of the factor removed so far
    log_start = 0.5 * math.log(sum(abs(c) ** 2 for c in coords))
    for _ in range(n):
        vals = [_eval_trivar(mn, coords, 1.0 + 0j) for mn in monos]
        m = max(abs(v) for v in vals)
        log_scale = delta * log_scale + math.log(m)
        coords = tuple(v / m for v in vals)
    log_norm = log_scale + 0.5 * math.log(sum(abs(c) ** 2 for c in coords))
    return (log_norm - delta ** n * log_start) / lam1 ** n


def test_green_matches_iterated_lift_oracle(skew2):
    rng = np.random.default_rng(23)
    for _ in range(15):
        p = M.random_point(skew2, rng)
        n = 25
        g = C.green_plus(skew2, p, tol=0.0, n_max=n)
        oracle = iterated_lift_oracle(skew2, p, n)
        assert abs(g.value - oracle) < 1e-6


def test_partial_sum_telescoping(skew2):
    # g_{n+1} - g_n = lam1^{-n} gamma(f^n p) up to float rounding
    rng = np.random.default_rng(29)
    p = M.random_point(skew2, rng)
    lam1 = 2.0
    for n in (3, 7, 12):
        gn = C.green_plus(skew2, p, tol=0.0, n_max=n).value
        gn1 = C.green_plus(skew2, p, tol=0.0, n_max=n + 1).value
        q = p
        for _ in range(n):
            q = M.evaluate(skew2, q)
        expected = lam1 ** (-n) * C.gamma_plus(skew2, q)
        assert abs((gn1 - gn) - expected) < 1e-13


def test_green_tail_bound_property(skew3):
    rng = np.random.default_rng(31)
    lam1 = 3.0
    for _ in range(10):
        p = M.random_point(skew3, rng)
        g20 = C.green_plus(skew3, p, tol=0.0, n_max=20)
        g35 = C.green_plus(skew3, p, tol=0.0, n_max=35)
        # sup |gamma| over the observed orbit, recomputed independently
        q, sup_g = p, 0.0
        for _ in range(35):
            sup_g = max(sup_g, abs(C.gamma_plus(skew3, q)))
            q = M.evaluate(skew3, q)
        bound = sup_g * lam1 ** (-20) / (1 - 1 / lam1)
        assert abs(g35.value - g20.value) <= bound + 1e-15
        assert g20.tail_bound <= bound + 1e-12


def test_green_stops_on_tolerance(squaring):
    g = C.green_plus(squaring, M.proj_point((1, 1, 1)), tol=1e-6, n_max=200)
    assert g.n_used < 40
    assert g.tail_bound < 1e-6


def test_green_orbit_hits_indeterminacy(skew2):
    g = C.green_plus(skew2, M.proj_point((1, 0, 0)), tol=0.0, n_max=10)
    assert g.orbit_hit_indeterminacy
    assert g.n_used == 0


def test_green_requires_stability(sigma):
    with pytest.raises(PreconditionError):
        C.green_plus(sigma, M.proj_point((1, 2, 3)))


def test_green_unsupported_for_secant(secant_z3):
    with pytest.raises(UnsupportedError):
        C.green_plus(secant_z3, M.affine_biproj(0.5, 0.25))


def test_functional_equation_residual(skew2, squaring, torus_d2):
    rng = np.random.default_rng(37)
    pts = [M.random_point(squaring, rng) for _ in range(100)]
    assert C.functional_equation_residual(squaring, pts, tol=1e-12,
                                          n_max=40) < 1e-6
    pts = [M.random_point(skew2, rng) for _ in range(100)]
    assert C.functional_equation_residual(skew2, pts, tol=1e-12,
                                          n_max=30) < 1e-6
    assert C.functional_equation_residual(torus_d2, [], tol=1e-9,
                                          n_max=10) == 0.0


# ---------------------------------------------------------------------------
# pushforward series


def test_pushforward_constant_scaling_exact(skew2, skew3, torus_d2):
    p2 = M.proj_point((0.4 + 0.3j, -0.8, 1))
    for model, depth in ((skew2, 6), (skew3, 6)):
        for observed, expected in C.pushforward_constant_levels(
                model, p2, 1.7, depth):
            assert abs(observed - expected) <= 1e-12 * max(1.0, abs(expected))
    pt = M.torus_point(0.21 + 0.08j, 0.77)
    for observed, expected in C.pushforward_constant_levels(
            torus_d2, pt, 2.5, 3):
        assert abs(observed - expected) <= 1e-12 * max(1.0, abs(expected))


def backward_orbit_oracle(model, p, n):
    """Independent pushforward sums for the unique-preimage skew family:
    walk the explicit inverse (a, b) -> (b - a^2, a) and sum directly."""
    lam1 = 2.0
    x, y = p.coords[0] / p.coords[2], p.coords[1] / p.coords[2]

    def u(a, b):
        return 0.5 * math.log(1 + abs(a) ** 2 + abs(b) ** 2)

    def gamma_minus(a, b):
        wa, wb = b - a * a, a
        return u(wa, wb) / lam1 - u(a, b)

    total = 0.0
    partials = [0.0]
    a, b = x, y
    for j in range(n):
        total += gamma_minus(a, b) / lam1 ** j
        partials.append(total)
        a, b = b - a * a, a
    return partials


def test_green_minus_matches_backward_orbit_oracle(skew2):
    rng = np.random.default_rng(41)
    for _ in range(10):
        p = M.random_point(skew2, rng)
        series = C.green_minus_series(skew2, p, 6)
        oracle = backward_orbit_oracle(skew2, p, 6)
        assert max(abs(a - b) for a, b in zip(series.partials, oracle)) < 1e-12
        assert C.green_minus_partial(skew2, p, 6) == series.partials[-1]


def test_green_minus_monotone_after_offset(skew2, skew3):
    rng = np.random.default_rng(43)
    for model, n_pts in ((skew2, 30), (skew3, 12)):
        for _ in range(n_pts):
            p = M.random_point(model, rng)
            series = C.green_minus_series(model, p, 6)
            assert not series.flagged
            for a, b in zip(series.adjusted, series.adjusted[1:]):
                assert b <= a + 1e-12


def test_green_minus_geometric_tail(skew2):
    # increments are lam1^{-j} gamma(w_j) along the backward orbit, so
    # |g_n - g_m| <= sup|gamma| * 2^{-min(n,m)} / (1 - 1/2)
    p = M.proj_point((0.2 + 0.1j, 0.4 - 0.2j, 1))
    n = 10
    series = C.green_minus_series(skew2, p, n)
    oracle = backward_orbit_oracle(skew2, p, n)
    diffs = [abs(b - a) for a, b in zip(oracle, oracle[1:])]
    sup_gamma = max(abs(d) * 2 ** j for j, d in enumerate(diffs))
    for a in range(n + 1):
        for b in range(a, n + 1):
            bound = sup_gamma * 2.0 ** (-a) / (1 - 0.5)
            assert abs(series.partials[b] - series.partials[a]) <= bound + 1e-15


def test_green_minus_torus_zero(torus_d2):
    series = C.green_minus_series(torus_d2, M.torus_point(0.3, 0.6), 4)
    assert series.partials == [0.0] * 5
    assert series.offset == 0.0


def test_green_minus_budget(torus_2i):
    with pytest.raises(BudgetError):
        C.build_preimage_tree(torus_2i, M.torus_point(0.1, 0.2), 5)


# ---------------------------------------------------------------------------
# grids


def test_grid_squaring_matches_pointwise(squaring):
    slice_spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0],
                  "v": [0, 1, 0], "s_range": [-2, 2], "t_range": [-2, 2]}
    grid = C.export_grid(squaring, slice_spec, (65, 65), which="plus",
                         tol=0.0, n_max=40)
    s = list(grid.s_values)
    i1 = s.index(1.0)
    j1 = list(grid.t_values).index(1.0)
    j0 = list(grid.t_values).index(0.0)
    assert abs(grid.values[i1, j1] - (-LOG3 / 2)) < 1e-6
    assert abs(grid.values[i1, j0] - (-LOG2 / 2)) < 1e-6
    # independent pointwise evaluations agree cell by cell on a sample
    rng = np.random.default_rng(47)
    for _ in range(25):
        i = int(rng.integers(0, 65))
        j = int(rng.integers(0, 65))
        p = M.proj_point((grid.s_values[i], grid.t_values[j], 1))
        g = C.green_plus(squaring, p, tol=0.0, n_max=40)
        assert abs(grid.values[i, j] - g.value) < 1e-12


def test_grid_torus_zero(torus_d2):
    slice_spec = {"kind": "torus", "base": [0, 0], "u": [1, 0],
                  "v": [0, 1], "s_range": [0, 1], "t_range": [0, 1]}
    grid = C.export_grid(torus_d2, slice_spec, (8, 8), which="plus")
    assert np.all(grid.values == 0.0)
    assert not grid.mask.any()


def test_grid_masks_indeterminate_cells(skew2):
    # a slice through the indeterminacy point at infinity
    slice_spec = {"kind": "p2", "base": [1, 0, 0], "u": [0, 1, 0],
                  "v": [0, 0, 1], "s_range": [-1, 1], "t_range": [-1, 1]}
    grid = C.export_grid(skew2, slice_spec, (3, 3), which="plus",
                         tol=0.0, n_max=30)
    assert grid.mask[1, 1]  # the cell at (0, 0) is the indeterminacy point
    assert np.isnan(grid.values[1, 1])
    assert grid.mask.sum() == 1


def test_grid_minus_skew(skew2):
    slice_spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0],
                  "v": [0, 1, 0], "s_range": [-1, 1], "t_range": [-1, 1]}
    grid = C.export_grid(skew2, slice_spec, (5, 5), which="minus", n_max=5)
    p = M.proj_point((grid.s_values[2], grid.t_values[3], 1))
    assert abs(grid.values[2, 3] - C.green_minus_partial(skew2, p, 5)) < 1e-12


def test_grid_csv_format(squaring):
    slice_spec = {"kind": "p2", "base": [1, 0, 0], "u": [0, 1, 0],
                  "v": [0, 0, 1], "s_range": [-1, 1], "t_range": [-1, 1]}
    m = M.build_model("PolynomialSkew", {"q_coeffs": [[0, 0, 1], [1]]})
    grid = C.export_grid(m, slice_spec, (3, 3), which="plus", tol=0.0,
                         n_max=10)
    text = C.grid_to_csv(grid)
    lines = text.splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 9
    assert any(ln.endswith(",NaN") for ln in lines[1:])
    # floats round-trip at 17 significant digits
    x, y, v = lines[1].split(",")
    assert float(x) == grid.s_values[0]


def test_grid_threads_do_not_change_values(squaring, monkeypatch):
    slice_spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0],
                  "v": [0, 1, 0], "s_range": [-2, 2], "t_range": [-2, 2]}
    one = C.export_grid(squaring, slice_spec, (16, 16), tol=0.0, n_max=25)
    monkeypatch.setenv("DEGREELAB_THREADS", "4")
    four = C.export_grid(squaring, slice_spec, (16, 16), tol=0.0, n_max=25)
    assert np.array_equal(one.values, four.values)


def test_grid_budget():
    m = M.build_model("PolynomialSkew", {"q_coeffs": [[0, 0, 1], [1]]})
    slice_spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0],
                  "v": [0, 1, 0], "s_range": [-2, 2], "t_range": [-2, 2]}
    with pytest.raises(BudgetError):
        C.export_grid(m, slice_spec, (5000, 5000))

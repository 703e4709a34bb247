import math

import numpy as np
import pytest

from degreelab import ergodic as E
from degreelab import lattice as lat
from degreelab import models as M
from degreelab.errors import PreconditionError, UnsupportedError

SQRT3 = math.sqrt(3.0)


def torus(matrix):
    return M.build_model("TorusEndo", {"matrix": matrix})


IDENT = [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]


# ---------------------------------------------------------------------------
# exponents


def test_exact_exponents_flagship(torus_d2):
    res = E.lyapunov_exponents(torus_d2, n_steps=100, n_samples=1, seed=0)
    assert abs(res.exact.chi_plus - math.log(1 + SQRT3)) < 1e-12
    assert abs(res.exact.chi_minus - math.log(SQRT3 - 1)) < 1e-12
    assert res.hyperbolic


def test_exact_exponents_identity():
    res = E.lyapunov_exponents(torus(IDENT), n_steps=100, n_samples=1, seed=0)
    assert res.exact.chi_plus == 0.0 and res.exact.chi_minus == 0.0
    assert not res.hyperbolic


def test_exact_exponents_doubling(torus_2i):
    res = E.lyapunov_exponents(torus_2i, n_steps=100, n_samples=1, seed=0)
    assert abs(res.exact.chi_plus - math.log(2)) < 1e-14
    assert abs(res.exact.chi_minus - math.log(2)) < 1e-14
    s = E.exponent_sum_check(res.exact, torus_2i.lambda2)
    assert s.passed and abs(s.rhs - 0.5 * math.log(16)) < 1e-14


def test_mc_matches_exact_at_1e4(torus_d2):
    res = E.lyapunov_exponents(torus_d2, n_steps=10_000, n_samples=2, seed=1)
    assert res.max_deviation <= 1e-3
    assert res.consistent


def test_mc_deterministic_given_seed(torus_d2):
    a = E.lyapunov_exponents(torus_d2, n_steps=500, n_samples=2, seed=9)
    b = E.lyapunov_exponents(torus_d2, n_steps=500, n_samples=2, seed=9)
    assert a.mc.chi_plus == b.mc.chi_plus
    assert a.mc.chi_minus == b.mc.chi_minus


def test_exponents_unsupported_off_torus(skew2):
    with pytest.raises(UnsupportedError):
        E.lyapunov_exponents(skew2)


def test_sum_rule_examples(torus_d2):
    res = E.lyapunov_exponents(torus_d2, n_steps=10_000, n_samples=2, seed=0)
    exact = E.exponent_sum_check(res.exact, 4)
    assert exact.passed and abs(exact.lhs - math.log(2)) < 1e-12
    mc = E.exponent_sum_check(res.mc, 4)
    assert mc.passed and mc.tol == 1e-3
    ident = E.lyapunov_exponents(torus(IDENT), n_steps=100, n_samples=1,
                                 seed=0)
    s = E.exponent_sum_check(ident.exact, 1)
    assert s.passed and s.rhs == 0.0


def test_sum_rule_random_gaussian_matrices():
    rng = np.random.default_rng(12)
    tested = 0
    while tested < 8:
        ints = rng.integers(-3, 4, size=8)
        matrix = [[[int(ints[0]), int(ints[1])], [int(ints[2]), int(ints[3])]],
                  [[int(ints[4]), int(ints[5])], [int(ints[6]), int(ints[7])]]]
        try:
            m = torus(matrix)
        except Exception:
            continue
        res = E.lyapunov_exponents(m, n_steps=10_000, n_samples=1, seed=3)
        # exact sum rule always holds
        assert E.exponent_sum_check(res.exact, m.lambda2).passed
        # Monte Carlo asserted only in the hyperbolic case
        if res.hyperbolic:
            assert res.max_deviation <= 1e-3
        tested += 1


def test_cross_module_exponent_identity(torus_d2):
    # chi+ equals half the log of the leading pullback eigenvalue
    res = E.lyapunov_exponents(torus_d2, n_steps=100, n_samples=1, seed=0)
    r1, _ = lat.spectral_radius(torus_d2.pullback_matrix)
    assert abs(res.exact.chi_plus - 0.5 * math.log(r1)) < 1e-9


# ---------------------------------------------------------------------------
# invariant grid


def test_haar_flagship(torus_d2):
    rep = E.haar_invariance_check(torus_d2, 3)
    assert rep.n_points == 81 and rep.bijection and rep.exact


def test_haar_identity_any_level():
    rep = E.haar_invariance_check(torus(IDENT), 5)
    assert rep.n_points == 625 and rep.bijection


def test_haar_rejects_shared_factor(torus_d2):
    with pytest.raises(PreconditionError) as exc:
        E.haar_invariance_check(torus_d2, 2)
    assert "singular modulo" in str(exc.value)


def test_haar_larger_coprime_level(torus_d2):
    rep = E.haar_invariance_check(torus_d2, 5)
    assert rep.n_points == 5 ** 4 and rep.bijection


def test_haar_with_grid_translation():
    m = M.build_model("TorusEndo", {"matrix": [[[0, 0], [1, 0]],
                                               [[2, 0], [2, 0]]],
                                    "translation": [[1, 0], [0, 0]]})
    rep = E.haar_invariance_check(m, 3)
    assert rep.bijection


def test_haar_rejects_off_grid_translation():
    m = M.build_model("TorusEndo", {"matrix": [[[0, 0], [1, 0]],
                                               [[2, 0], [2, 0]]],
                                    "translation": [[0.1234, 0], [0, 0]]})
    with pytest.raises(PreconditionError):
        E.haar_invariance_check(m, 3)


# ---------------------------------------------------------------------------
# Jacobian constancy


def test_jacobian_torus(torus_d2):
    rep = E.jacobian_constancy(torus_d2, n_samples=32, seed=0)
    assert rep.constant and rep.structurally_constant
    assert rep.equals_lambda2
    assert abs(rep.mean_sq_modulus - 4.0) < 1e-12


def test_jacobian_identity(identity_map):
    rep = E.jacobian_constancy(identity_map, n_samples=16, seed=0)
    assert rep.constant and abs(rep.mean_sq_modulus - 1.0) < 1e-9
    assert not rep.structurally_constant


def test_jacobian_skew_coincidental_constancy(skew2):
    # |det Df| = 1 everywhere for Q = y^2 + x, yet not structural
    rep = E.jacobian_constancy(skew2, n_samples=32, seed=0)
    assert rep.constant
    assert not rep.structurally_constant


def test_jacobian_skew_variation(skew3):
    rep = E.jacobian_constancy(skew3, n_samples=32, seed=0)
    assert not rep.constant
    assert rep.max_deviation > 1.0

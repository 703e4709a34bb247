"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import json
import math
import time

import numpy as np
import pytest

from degreelab import cli
from degreelab import contraction as K
from degreelab import currents as C
from degreelab import ergodic as E
from degreelab import lattice as lat
from degreelab import models as M
from degreelab import stability as S
from degreelab.errors import ModelRejected
from degreelab.exactmath import frac_matrix, mat_vec

SQRT3 = math.sqrt(3.0)


class Budget:
    def __init__(self, seconds, label):
        self.seconds = seconds
        self.label = label

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert self.elapsed < self.seconds, (
                f"{self.label}: runtime {self.elapsed:.2f}s over budget "
                f"{self.seconds}s")
            print(f"[PASS] {self.label} ({self.elapsed:.2f}s)")
        return False


def test_criterion_01_secant_degrees():
    with Budget(1.0, "criterion 1: secant family degrees, d = 2..6"):
        for d in range(2, 7):
            coeffs = [0] * d + [1]
            coeffs[0] = 1  # P = z^d + 1, squarefree for every d
            m = M.build_model("Secant", {"p_coeffs": coeffs})
            assert m.lambda2 == d - 1
            rep = lat.spectral_analysis(m.pullback_matrix, m.lambda2,
                                        m.lattice, tol=1e-9)
            expected = (d - 1 + math.sqrt((d - 1) * (d + 3))) / 2
            assert abs(rep.r1 - expected) < 1e-9


def test_criterion_02_polynomial_skew(skew3):
    with Budget(5.0, "criterion 2: skew family lambda1 = 3, lambda2 = 2, "
                     "Monte Carlo preimage count"):
        rep = lat.spectral_analysis(skew3.pullback_matrix, skew3.lambda2,
                                    skew3.lattice)
        assert rep.r1 == 3.0
        assert skew3.lambda2 == 2
        # raises unless >= 99 percent of 1000 seeded samples agree
        assert M.topological_degree_mc(skew3, n_samples=1000, seed=0) == 2


def test_criterion_03_torus_example(torus_d2):
    with Budget(10.0, "criterion 3: torus example eigenvalues and exponents"):
        assert torus_d2.lambda2 == 4
        rep = lat.spectral_analysis(torus_d2.pullback_matrix, 4,
                                    torus_d2.lattice)
        assert abs(rep.r1 - (4 + 2 * SQRT3)) < 1e-9
        res = E.lyapunov_exponents(torus_d2, n_steps=10_000, n_samples=4,
                                   seed=0)
        assert abs(res.exact.chi_plus - math.log(1 + SQRT3)) < 1e-12
        assert abs(res.exact.chi_minus - math.log(SQRT3 - 1)) < 1e-12
        assert res.max_deviation <= 1e-3
        exact_sum = E.exponent_sum_check(res.exact, 4, tol=1e-6)
        assert exact_sum.passed
        assert abs(exact_sum.lhs - 0.5 * math.log(4)) < 1e-6
        mc_sum = E.exponent_sum_check(res.mc, 4, tol=1e-3)
        assert mc_sum.passed


def test_criterion_04_one_stability(secant_z3):
    with Budget(1.0, "criterion 4: one-stability check and squarefree "
                     "rejection"):
        rep = S.check_one_stability(secant_z3, 50)
        assert rep.verdict == S.Verdict("NoObstructionUpTo", 50)
        with pytest.raises(ModelRejected) as exc:
            M.build_model("Secant", {"p_coeffs": [0, 0, -1, 1]})
        assert "repeated root" in str(exc.value)


def test_criterion_05_degree_sequence_oracle(skew2, sigma):
    with Budget(10.0, "criterion 5: symbolic degree sequences and the "
                      "cancellation drop"):
        ds = S.symbolic_degree_sequence(skew2, 3)
        assert ds.degrees == [2, 4, 8]
        matrix_prediction = S.matrix_degree_sequence(skew2, 3)
        assert ds.degrees == matrix_prediction.degrees
        drop = S.symbolic_degree_sequence(sigma, 2)
        assert drop.degrees == [2, 1]


def test_criterion_06_green_values(squaring, skew2):
    with Budget(30.0, "criterion 6: pullback potential value and functional "
                      "equation residual"):
        g = C.green_plus(squaring, M.proj_point((1, 1, 1)), tol=0.0, n_max=40)
        assert abs(g.value - (-math.log(3) / 2)) < 1e-9
        rng = np.random.default_rng(0)
        pts = [M.random_point(skew2, rng) for _ in range(100)]
        residual = C.functional_equation_residual(skew2, pts, tol=1e-12,
                                                  n_max=30)
        assert residual < 1e-6


def test_criterion_07_pushforward_series(skew2):
    with Budget(60.0, "criterion 7: pushforward constant scaling and "
                      "monotone partial sums"):
        rng = np.random.default_rng(1)
        pts = [M.random_point(skew2, rng) for _ in range(100)]
        for p in pts[:10]:
            levels = C.pushforward_constant_levels(skew2, p, 1.0, 6)
            for observed, expected in levels:
                assert abs(observed - expected) <= 1e-12 * max(1.0, expected)
        monotone = 0
        for p in pts:
            series = C.green_minus_series(skew2, p, 6)
            assert not series.flagged
            assert all(b <= a + 1e-12 for a, b in
                       zip(series.adjusted, series.adjusted[1:]))
            monotone += 1
        assert monotone == 100


def test_criterion_08_property_suites(skew2, torus_d2, squaring):
    with Budget(10.0, "criterion 8: adjointness, spectral bound, push-pull "
                      "defects, expansion form"):
        from tests_support_builtins import builtin_rows
        rows = builtin_rows()
        rng = np.random.default_rng(2)
        per = 1000 // len(rows) + 1
        for L, m, lam2, _ in rows:
            push = lat.adjoint_pushforward(m, L)
            mf = frac_matrix(m)
            for _ in range(per):
                a = lat.make_class(L, tuple(int(v) for v in
                                            rng.integers(-9, 10, L.rank)))
                b = lat.make_class(L, tuple(int(v) for v in
                                            rng.integers(-9, 10, L.rank)))
                from fractions import Fraction
                ma = lat.make_class(L, mat_vec(mf, tuple(Fraction(c)
                                                         for c in a.coords)))
                pb = lat.make_class(L, mat_vec(push, tuple(Fraction(c)
                                                           for c in b.coords)))
                assert lat.pair(L, ma, b) == lat.pair(L, a, pb)
            lat.pullback_expansion_form(m, L, lam2, tol=1e-9)  # PSD or raise
        for L, m, lam2, spectral_ok in rows:
            if spectral_ok:
                rep = lat.spectral_analysis(m, lam2, L)
                assert rep.second_modulus <= math.sqrt(lam2) + 1e-9
        d_tor = lat.pushpull_defect(torus_d2.pullback_matrix,
                                    torus_d2.lattice, 4)
        assert all(x == 0 for row in d_tor for x in row)
        d_sq = lat.pushpull_defect(squaring.pullback_matrix, squaring.lattice,
                                   4)
        assert d_sq == ((0,),)
        d_skew = lat.pushpull_defect(skew2.pullback_matrix, skew2.lattice, 1)
        assert d_skew == ((3,),)


def test_criterion_09_contraction_suite(torus_d2):
    with Budget(5.0, "criterion 9: vanishing self-intersection suite "
                     "(pushforward eigenvalue lambda2/r1 = 4 - 2*sqrt(3); "
                     "the simplification '2 - sqrt(3)' printed in the "
                     "acceptance text mis-reduces 4/(4+2*sqrt(3)))"):
        sp, _ = K.self_intersections(torus_d2)
        assert abs(sp) < 1e-9
        zc = K.zero_class_checks(torus_d2)
        assert zc.applicable
        expected = 4.0 / (4.0 + 2.0 * SQRT3)   # = 4 - 2*sqrt(3)
        assert abs(expected - (4.0 - 2.0 * SQRT3)) < 1e-15
        assert abs(zc.observed_eigenvalue - expected) < 1e-8
        assert zc.passed
        r1, cp = lat.spectral_radius(torus_d2.pullback_matrix)
        integ = K.integrality_check(cp, r1, 4)
        assert not integ.lambda1_integer
        assert integ.obstruction
        haar = E.haar_invariance_check(torus_d2, 3)
        assert haar.n_points == 81 and haar.bijection and haar.exact


@pytest.mark.xfail(strict=True,
                   reason="the acceptance text simplifies 4/(4+2*sqrt(3)) to "
                          "2-sqrt(3); the correct value is 4-2*sqrt(3) = "
                          "2*(2-sqrt(3)), as both the eigen-check contract "
                          "(expected = lambda2/lambda1) and the worked "
                          "example 4/(4+2*sqrt(3)) state")
def test_criterion_09_literal_constant(torus_d2):
    zc = K.zero_class_checks(torus_d2)
    assert abs(zc.observed_eigenvalue - (2.0 - SQRT3)) < 1e-8


def test_criterion_10_determinism(tmp_path):
    with Budget(60.0, "criterion 10: byte-identical reports for identical "
                      "configs"):
        cfg = {"model": {"family": "TorusEndo",
                         "params": {"matrix": [[[0, 0], [1, 0]],
                                               [[2, 0], [2, 0]]]}},
               "n_samples": 10}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            assert cli.main(["report", "--config", str(path),
                             "--out", str(out)]) == 0
            outs.append((out / "report.json").read_bytes())
        assert outs[0] == outs[1]

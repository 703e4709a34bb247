import pytest

from degreelab import stability as S
from degreelab.errors import BudgetError, PreconditionError, UnsupportedError


def test_skew_no_obstruction(skew2, skew3):
    for m in (skew2, skew3):
        rep = S.check_one_stability(m, 50)
        assert rep.verdict.kind == "NoObstructionUpTo"
        assert rep.verdict.n == 50
        # the single image point at infinity is fixed, so the orbit log has
        # one entry per step for one start
        assert len(rep.orbit_log) == 51


def test_secant_no_obstruction(secant_z3):
    rep = S.check_one_stability(secant_z3, 50)
    assert rep.verdict.kind == "NoObstructionUpTo"
    assert all(not e.hit_indeterminacy for e in rep.orbit_log)


def test_torus_vacuous(torus_d2):
    rep = S.check_one_stability(torus_d2, 25)
    assert rep.verdict.kind == "NoObstructionUpTo"
    assert rep.orbit_log == []


def test_sigma_collides_immediately(sigma):
    rep = S.check_one_stability(sigma, 10)
    assert rep.verdict.kind == "CollisionAt"
    assert rep.verdict.n == 0


def test_collision_monotone_in_horizon(sigma):
    for horizon in (0, 3, 10, 25):
        rep = S.check_one_stability(sigma, horizon)
        assert rep.verdict == S.Verdict("CollisionAt", 0)


def test_verdict_text_carries_horizon(skew2):
    rep = S.check_one_stability(skew2, 7)
    assert str(rep.verdict) == "NoObstructionUpTo(7)"
    assert "not a proof" in rep.note


# ---------------------------------------------------------------------------
# degree sequences


def test_degrees_squaring(squaring):
    assert S.symbolic_degree_sequence(squaring, 4).degrees == [2, 4, 8, 16]


def test_degrees_skew2(skew2):
    ds = S.symbolic_degree_sequence(skew2, 3)
    assert ds.degrees == [2, 4, 8]
    assert ds.symbolic


def test_degrees_sigma_drop(sigma):
    assert S.symbolic_degree_sequence(sigma, 2).degrees == [2, 1]


def test_degrees_match_matrix_powers_for_stable_families(skew2, skew3,
                                                         squaring):
    for m, n in ((skew2, 3), (skew3, 3), (squaring, 4)):
        drift = S.degree_drift(m, n)
        assert drift["agree"], drift


def test_degrees_submultiplicative(skew2, skew3, squaring, sigma):
    for m, n in ((skew2, 3), (skew3, 3), (squaring, 4), (sigma, 4)):
        degs = S.symbolic_degree_sequence(m, n).degrees
        for k in range(1, len(degs)):
            assert degs[k] <= degs[0] * degs[k - 1]


def test_degrees_sigma_period_two(sigma):
    assert S.symbolic_degree_sequence(sigma, 4).degrees == [2, 1, 2, 1]


def test_degree_budget_error(squaring):
    with pytest.raises(BudgetError):
        S.symbolic_degree_sequence(squaring, 10)  # degree 1024 > budget


def test_degrees_unsupported_off_plane(secant_z3, torus_d2):
    for m in (secant_z3, torus_d2):
        with pytest.raises(UnsupportedError):
            S.symbolic_degree_sequence(m, 3)


# ---------------------------------------------------------------------------
# growth estimates


def test_lambda1_estimate_geometric():
    est = S.lambda1_estimate(S.DegreeSequence([2, 4, 8], True))
    assert est.estimate == 2.0
    assert est.consistent_with(2.0)


def test_lambda1_estimate_flags_drop():
    est = S.lambda1_estimate(S.DegreeSequence([2, 1], True))
    assert est.estimate == 0.5
    assert not est.consistent_with(2.0)


def test_lambda1_estimate_cubics():
    est = S.lambda1_estimate(S.DegreeSequence([3, 9, 27], True))
    assert est.estimate == 3.0
    assert abs(est.root_estimate - 3.0) < 1e-12


def test_lambda1_estimate_needs_two():
    with pytest.raises(PreconditionError):
        S.lambda1_estimate(S.DegreeSequence([2], True))


def test_stability_membership_tolerance_logged(secant_z3):
    rep = S.check_one_stability(secant_z3, 5, membership_tol=1e-6)
    assert rep.membership_tol == 1e-6

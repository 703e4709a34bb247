"""One-stability orbit checks and the exact degree-sequence oracle.

A map is one-stable when pullback commutes with iteration on cohomology;
the checkable obstruction is a forward orbit of an image of a collapsed
curve landing on the indeterminacy set.  The orbit check certifies absence
of collisions up to a horizon only, never as a theorem; the symbolic degree
sequence composes exact homogeneous lifts and cancels the polynomial gcd,
so any drift between matrix powers and true degrees is detected exactly.
"""

from dataclasses import dataclass

from . import models as M
from . import projsym
from .errors import (BudgetError, IndeterminateError, NumericalFailure,
                     PreconditionError, UnsupportedError)

OPEN_PROBLEM_NOTE = (
    "a NoObstruction verdict is a horizon-bounded certificate, not a proof; "
    "whether every map of this kind admits a stable model is open")


@dataclass(frozen=True)
class Verdict:
    kind: str      # "NoObstructionUpTo" | "CollisionAt"
    n: int

    def __str__(self):
        return f"{self.kind}({self.n})"


@dataclass
class OrbitEntry:
    start_index: int
    step: int
    point: M.SurfacePoint
    hit_indeterminacy: bool


@dataclass
class StabilityReport:
    horizon: int
    orbit_log: list
    verdict: Verdict
    membership_tol: float
    tables_complete: bool
    note: str = OPEN_PROBLEM_NOTE


def check_one_stability(model, horizon, membership_tol=1e-8):
    """Iterate the images of collapsed curves and watch for indeterminacy.

    Membership tests are exact when both the orbit point and the table
    point are exact, and use a sup-norm tolerance on normalized
    representatives otherwise.  Overflowing orbits abort with an error
    naming the step.
    """
    if horizon < 0:
        raise PreconditionError("horizon must be nonnegative", horizon=horizon)
    ind_points = model.indeterminacy_points()
    starts = model.inverse_indeterminacy_points()
    log = []
    collision = None
    for s_idx, start in enumerate(starts):
        p = start
        for n in range(horizon + 1):
            hit = any(M.points_equal(p, q, tol=membership_tol)
                      for q in ind_points)
            nxt = None
            if not hit and n < horizon:
                try:
                    nxt = M.evaluate(model, p)
                except IndeterminateError:
                    # indeterminate for the lift itself; a collision even if
                    # the declared table missed the point
                    hit = True
            log.append(OrbitEntry(s_idx, n, p, hit))
            if hit:
                if collision is None or n < collision:
                    collision = n
                break
            if n == horizon:
                break
            p = nxt
            if not all(_finite(c) for c in p.coords):
                raise NumericalFailure("orbit left the numerical range",
                                       start=s_idx, step=n + 1)
    verdict = (Verdict("CollisionAt", collision) if collision is not None
               else Verdict("NoObstructionUpTo", horizon))
    return StabilityReport(horizon, log, verdict, membership_tol,
                           model.tables_complete)


def _finite(c):
    return abs(c.real) < float("inf") and abs(c.imag) < float("inf")


@dataclass
class DegreeSequence:
    degrees: list
    symbolic: bool

    def __post_init__(self):
        if not self.degrees:
            raise PreconditionError("degree sequence cannot be empty")


def symbolic_degree_sequence(model, n_max):
    """Degrees of the reduced iterates f, f^2, ..., f^{n_max}.

    Composes exact homogeneous lifts and removes the exact gcd of the three
    components after every step.  This is the drift oracle: a strict drop
    below the matrix prediction witnesses failure of one-stability.
    """
    if model.surface != "p2":
        raise UnsupportedError(
            "degree sequences need a plane model with a homogeneous lift",
            family=model.family)
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1", n_max=n_max)
    f = tuple(projsym.monos_to_expr(m) for m in model.lift_monomials())
    f = projsym.reduce_triple(f)
    degrees = [projsym.triple_degree(f)]
    g = f
    for step in range(2, n_max + 1):
        if degrees[-1] * degrees[0] > projsym.DEGREE_BUDGET:
            raise BudgetError("next composition would exceed the degree budget",
                              step=step, budget=projsym.DEGREE_BUDGET)
        g = projsym.compose_triple(f, g, step=step)
        g = projsym.reduce_triple(g)
        degrees.append(projsym.triple_degree(g))
    return DegreeSequence(degrees, symbolic=True)


def matrix_degree_sequence(model, n_max):
    """Degrees predicted by powers of the pullback matrix on the line class."""
    if model.surface != "p2":
        raise UnsupportedError("matrix degree prediction is a plane-map notion",
                               family=model.family)
    d = model.pullback_matrix[0][0]
    return DegreeSequence([d ** n for n in range(1, n_max + 1)], symbolic=False)


@dataclass
class Lambda1Estimate:
    estimate: float         # last ratio of consecutive degrees
    root_estimate: float    # n-th root of the last degree
    degrees: list

    def consistent_with(self, r1, rel_tol=0.10):
        """Degree growth vs a spectral radius, within 10 percent."""
        return abs(self.estimate - r1) <= rel_tol * max(abs(r1), 1.0)


def lambda1_estimate(ds):
    """Growth-rate estimate from a degree sequence (needs length >= 2)."""
    degs = ds.degrees
    if len(degs) < 2:
        raise PreconditionError("need at least two degrees for a ratio",
                                length=len(degs))
    n = len(degs)
    est = degs[-1] / degs[-2]
    root = degs[-1] ** (1.0 / n)
    return Lambda1Estimate(float(est), float(root), list(degs))


def degree_drift(model, n_max):
    """Symbolic degrees next to matrix-power predictions, with equality flag."""
    sym = symbolic_degree_sequence(model, n_max)
    mat = matrix_degree_sequence(model, n_max)
    return {
        "symbolic": sym.degrees,
        "matrix": mat.degrees,
        "agree": sym.degrees == mat.degrees,
    }

"""Exact linear algebra on the degree-(1,1) cohomology of the built-in surfaces.

The lattice holds an integer intersection form of signature (1, rank-1)
together with a surface-specific nef membership rule.  Pullback actions are
integer matrices acting on coordinate columns; the pushforward is the exact
adjoint with respect to the form.  Spectral certificates (simplicity of the
leading eigenvalue, the sqrt(lambda2) bound on the rest) are decided on the
exact characteristic polynomial, never on floating eigenvalues alone.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import (DimensionMismatchError, HypothesisViolation,
                     StructuralFailure, UnsupportedError)
from .exactmath import (frac_matrix, mat_inverse, mat_mul, mat_transpose,
                        mat_identity, mat_scale, mat_sub, mat_vec,
                        poly_derivative)

NEF_RULES = ("P2-nonneg", "bidegree-nonneg", "hermitian-psd", "custom-halfspaces")


@dataclass(frozen=True)
class IntersectionLattice:
    """Rank-r integer symmetric pairing with a nef membership rule.

    ``omega`` is the coordinate vector of the distinguished Kahler class
    used to normalize invariant classes.
    """

    rank: int
    gram: tuple
    basis_labels: tuple
    nef_rule: str
    omega: tuple
    halfspaces: tuple = None
    name: str = "custom"

    def __post_init__(self):
        if len(self.gram) != self.rank or any(len(r) != self.rank for r in self.gram):
            raise DimensionMismatchError("gram matrix must be rank x rank",
                                         rank=self.rank)
        for i in range(self.rank):
            for j in range(self.rank):
                if self.gram[i][j] != self.gram[j][i]:
                    raise StructuralFailure("gram matrix must be symmetric",
                                            entry=(i, j))
        if self.nef_rule not in NEF_RULES:
            raise UnsupportedError(f"unknown nef rule {self.nef_rule!r}")

    def gram_np(self):
        return np.array([[float(x) for x in row] for row in self.gram])


@dataclass(frozen=True)
class CohomClass:
    """A class in lattice coordinates; entries are Fractions or floats."""

    coords: tuple
    lattice: IntersectionLattice

    def __post_init__(self):
        if len(self.coords) != self.lattice.rank:
            raise DimensionMismatchError(
                "coordinate length does not match lattice rank",
                expected=self.lattice.rank, got=len(self.coords))

    def is_exact(self):
        return all(isinstance(c, (int, Fraction)) for c in self.coords)

    def as_floats(self):
        return tuple(float(c) for c in self.coords)


def p2_lattice():
    """Picard lattice of the projective plane: H with H.H = 1."""
    return IntersectionLattice(1, ((1,),), ("H",), "P2-nonneg", (1,), name="P2")


def p1xp1_lattice():
    """Quadric lattice: fiber classes of the two rulings, hyperbolic pairing."""
    return IntersectionLattice(2, ((0, 1), (1, 0)), ("Fx", "Fy"),
                               "bidegree-nonneg", (1, 1), name="P1xP1")


def torus_lattice():
    """Hermitian 2x2 model of the (1,1) classes of a two-dimensional torus.

    Coordinates (a, b, c, d) encode the form [[a, b+ic], [b-ic, d]]; the
    pairing is the polarization of the determinant,
    <H, K> = det(H+K) - det H - det K, so <H, H> = 2 det H.
    """
    gram = ((0, 0, 0, 1), (0, -2, 0, 0), (0, 0, -2, 0), (1, 0, 0, 0))
    return IntersectionLattice(4, gram, ("E11", "Re12", "Im12", "E22"),
                               "hermitian-psd", (1, 0, 0, 1), name="Torus")


def custom_lattice(gram, basis_labels=None, halfspaces=None, omega=None):
    gram = tuple(tuple(int(x) for x in row) for row in gram)
    rank = len(gram)
    labels = tuple(basis_labels) if basis_labels else tuple(f"e{i}" for i in range(rank))
    omega = tuple(omega) if omega is not None else tuple(1 if i == 0 else 0 for i in range(rank))
    return IntersectionLattice(rank, gram, labels, "custom-halfspaces", omega,
                               halfspaces=tuple(tuple(h) for h in halfspaces) if halfspaces else None)


def make_class(lattice, coords):
    coords = tuple(Fraction(c) if isinstance(c, (int, Fraction)) else float(c)
                   for c in coords)
    return CohomClass(coords, lattice)


def pair(lattice, a, b):
    """Intersection number a^T . gram . b; exact when both classes are."""
    if a.lattice is not lattice or b.lattice is not lattice:
        if a.lattice.gram != lattice.gram or b.lattice.gram != lattice.gram:
            raise DimensionMismatchError("classes belong to a different lattice")
    if len(a.coords) != lattice.rank or len(b.coords) != lattice.rank:
        raise DimensionMismatchError("coordinate length mismatch",
                                     rank=lattice.rank)
    if a.is_exact() and b.is_exact():
        gv = mat_vec(frac_matrix(lattice.gram), tuple(Fraction(c) for c in b.coords))
        return sum(Fraction(x) * y for x, y in zip(a.coords, gv))
    ga = np.array(a.as_floats())
    gb = np.array(b.as_floats())
    return float(ga @ lattice.gram_np() @ gb)


def self_intersection(lattice, a):
    return pair(lattice, a, a)


def adjoint_pushforward(matrix, lattice):
    """Exact adjoint of a pullback action: gram^{-1} . M^T . gram.

    Satisfies <M a, b> = <a, M_* b> for all classes a, b.
    """
    m = frac_matrix(matrix)
    g = frac_matrix(lattice.gram)
    gi = mat_inverse(g)
    return mat_mul(mat_mul(gi, mat_transpose(m)), g)


def char_poly(matrix):
    """Little-endian exact coefficients of det(t*I - M)."""
    m = sp.Matrix([[sp.Rational(x) for x in row] for row in matrix])
    p = m.charpoly()
    coeffs = [Fraction(str(c)) for c in p.all_coeffs()]  # descending
    coeffs.reverse()
    return tuple(coeffs)


def _newton_refine_complex(coeffs, z0, steps=60, tol=1e-15):
    """Polish a root of an exact-coefficient polynomial by Newton iteration."""
    dcoeffs = poly_derivative(list(coeffs))

    def ev(cs, z):
        acc = 0j
        for c in reversed(cs):
            acc = acc * z + complex(float(c))
        return acc

    z = complex(z0)
    for _ in range(steps):
        fz = ev(coeffs, z)
        dfz = ev(dcoeffs, z)
        if dfz == 0:
            break
        step = fz / dfz
        z -= step
        if abs(step) <= tol * max(1.0, abs(z)):
            break
    if abs(z.imag) < 1e-12 * max(1.0, abs(z.real)):
        z = complex(z.real, 0.0)
    return z


def poly_root_data(cp):
    """All roots of an exact polynomial as (root, multiplicity) pairs.

    Roots are isolated numerically per irreducible rational factor, where
    they are simple and well conditioned, then Newton-polished against the
    factor's exact coefficients.  Repeated eigenvalues therefore come out
    with their exact value instead of a numerically split cluster.
    """
    t = sp.Symbol("t")
    expr = sum(sp.Rational(c) * t ** k for k, c in enumerate(cp))
    _, factors = sp.factor_list(sp.Poly(expr, t))
    out = []
    for fac, mult in factors:
        coeffs = [Fraction(str(c)) for c in sp.Poly(fac, t).all_coeffs()]
        coeffs.reverse()
        if len(coeffs) <= 1:
            continue
        desc = [float(c) for c in reversed(coeffs)]
        for r in np.roots(desc):
            out.append((_newton_refine_complex(coeffs, complex(r)), int(mult)))
    return out


def spectral_radius(matrix):
    """(r1, char_poly): spectral radius from exact-factor root isolation."""
    cp = char_poly(matrix)
    roots = poly_root_data(cp)
    if not roots:
        return 0.0, cp
    r1 = max(abs(z) for z, _ in roots)
    return float(r1), cp


def leading_root_multiplicity(cp, r1):
    """Exact multiplicity of the eigenvalue realizing the spectral radius."""
    roots = poly_root_data(cp)
    best = None
    best_dist = None
    for z, mult in roots:
        d = abs(z - r1)
        if best_dist is None or d < best_dist:
            best_dist = d
            best = mult
    if best is None or best_dist > 1e-6 * max(1.0, abs(r1)):
        raise StructuralFailure("no characteristic root matches r1",
                                r1=r1, nearest=best_dist)
    return best


def is_simple_root(cp, r1):
    """True iff gcd(p, p') does not vanish at r1 (multiplicity one)."""
    return leading_root_multiplicity(cp, r1) == 1


@dataclass
class SpectralReport:
    r1: float
    char_poly: tuple
    simple_root: bool
    alpha: CohomClass
    second_modulus: float
    sqrt_lambda2_bound_ok: bool
    nef_ok: bool
    lambda2: float
    tol: float


def _leading_eigenvector(matrix, r1):
    """Unit kernel vector of (M - r1*I) via SVD."""
    m = np.array([[float(x) for x in row] for row in matrix], dtype=float)
    n = m.shape[0]
    _, _, vt = np.linalg.svd(m - r1 * np.eye(n))
    v = vt[-1]
    return v


def nef_member(lattice, a, tol=1e-9):
    """Surface-specific nef membership with a float tolerance."""
    c = a.as_floats()
    scale = max(1.0, max(abs(x) for x in c))
    if lattice.nef_rule == "P2-nonneg":
        return c[0] >= -tol * scale
    if lattice.nef_rule == "bidegree-nonneg":
        return all(x >= -tol * scale for x in c)
    if lattice.nef_rule == "hermitian-psd":
        aa, b, cc, d = c
        tr = aa + d
        disc = math.sqrt(max(0.0, (aa - d) ** 2 + 4.0 * (b * b + cc * cc)))
        lo = 0.5 * (tr - disc)
        return lo >= -tol * scale
    if lattice.nef_rule == "custom-halfspaces":
        if not lattice.halfspaces:
            raise UnsupportedError("custom lattice carries no halfspace data",
                                   lattice=lattice.name)
        return all(sum(float(h) * x for h, x in zip(hs, c)) >= -tol * scale
                   for hs in lattice.halfspaces)
    raise UnsupportedError(f"nef rule {lattice.nef_rule!r}")


def spectral_analysis(matrix, lambda2, lattice, tol=1e-9, omega=None):
    """Leading eigendata of a pullback action.

    Requires r1^2 > lambda2.  The leading class is scaled so that
    <alpha, omega> = 1 and certified nef (failure is flagged, not raised);
    ``second_modulus`` is the largest remaining eigenvalue modulus, checked
    against sqrt(lambda2) + tol.
    """
    r1, cp = spectral_radius(matrix)
    if r1 * r1 <= float(lambda2):
        raise HypothesisViolation(
            "spectral hypothesis fails: r1^2 <= lambda2",
            r1=r1, lambda2=float(lambda2))
    simple = is_simple_root(cp, r1)

    mods = []
    for z, mult in poly_root_data(cp):
        mods.extend([abs(z)] * mult)
    mods.sort()
    mods.pop()  # one copy of the leading eigenvalue
    second = mods[-1] if mods else 0.0

    omega_cls = make_class(lattice, omega if omega is not None else lattice.omega)
    v = _leading_eigenvector(matrix, r1)
    alpha = make_class(lattice, tuple(float(x) for x in v))
    scale = pair(lattice, alpha, omega_cls)
    if abs(float(scale)) < 1e-14:
        raise StructuralFailure("leading class pairs to zero with omega",
                                r1=r1)
    alpha = make_class(lattice, tuple(float(x) / float(scale) for x in v))

    return SpectralReport(
        r1=r1,
        char_poly=cp,
        simple_root=simple,
        alpha=alpha,
        second_modulus=second,
        sqrt_lambda2_bound_ok=second <= math.sqrt(float(lambda2)) + tol,
        nef_ok=nef_member(lattice, alpha, tol=max(tol, 1e-9)),
        lambda2=float(lambda2),
        tol=tol,
    )


def invariant_classes(m_pull, lambda2, lattice, omega=None, tol=1e-9):
    """Normalized leading classes of pullback and pushforward.

    Both are scaled so <alpha, omega> = 1; the cross pairing <a+, a-> is
    returned and must be positive.
    """
    omega = omega if omega is not None else lattice.omega
    rep_plus = spectral_analysis(m_pull, lambda2, lattice, tol=tol, omega=omega)
    m_push = adjoint_pushforward(m_pull, lattice)
    rep_minus = spectral_analysis(m_push, lambda2, lattice, tol=tol, omega=omega)
    cross = pair(lattice, rep_plus.alpha, rep_minus.alpha)
    if float(cross) <= tol:
        raise StructuralFailure("cross pairing <a+, a-> is not positive",
                                cross=float(cross))
    return rep_plus.alpha, rep_minus.alpha, float(cross)


def pushpull_defect(m_pull, lattice, lambda2):
    """Exact matrix M_* . M - lambda2 . Id.

    Zero exactly when pushforward after pullback is multiplication by the
    topological degree, i.e. when no exceptional correction term survives
    at class level.
    """
    m = frac_matrix(m_pull)
    push = adjoint_pushforward(m_pull, lattice)
    prod = mat_mul(push, m)
    return mat_sub(prod, mat_scale(mat_identity(lattice.rank), Fraction(lambda2)))


def pullback_expansion_form(m_pull, lattice, lambda2, tol=1e-9, check=True):
    """Exact quadratic form M^T gram M - lambda2 gram of pullback expansion.

    Represents <f* a, f* b> - lambda2 <a, b>; positive semidefinite for the
    built-in families (a StructuralFailure is raised when the check is on
    and an eigenvalue is below -tol).
    """
    m = frac_matrix(m_pull)
    g = frac_matrix(lattice.gram)
    q = mat_sub(mat_mul(mat_mul(mat_transpose(m), g), m),
                mat_scale(g, Fraction(lambda2)))
    if check:
        qf = np.array([[float(x) for x in row] for row in q])
        ev = np.linalg.eigvalsh(qf)
        scale = max(1.0, float(np.abs(qf).max()))
        if ev.min() < -tol * scale:
            raise StructuralFailure("pullback expansion form is not PSD",
                                    min_eigenvalue=float(ev.min()))
    return q


def gram_signature(lattice):
    """(n_plus, n_minus, n_zero) of the intersection form, numerically."""
    ev = np.linalg.eigvalsh(lattice.gram_np())
    plus = int((ev > 1e-12).sum())
    minus = int((ev < -1e-12).sum())
    return plus, minus, lattice.rank - plus - minus

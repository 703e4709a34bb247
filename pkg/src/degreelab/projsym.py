"""Symbolic homogeneous triples on the projective plane.

Monomial dictionaries {(i, j, k): coeff} with exact coefficients (Fraction
or Gaussian rational) are the working representation; sympy supplies exact
composition, gcd cancellation and resultants.
"""

from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import BudgetError, NumericalFailure
from .exactmath import QC

X, Y, Z = sp.symbols("X Y Z")

DEGREE_BUDGET = 200
MONOMIAL_BUDGET = 10 ** 6


def coeff_to_sympy(c):
    if isinstance(c, QC):
        return sp.Rational(c.re) + sp.I * sp.Rational(c.im)
    return sp.Rational(c)


def sympy_to_coeff(expr):
    re, im = expr.as_real_imag()
    re = Fraction(str(sp.nsimplify(re)))
    im = Fraction(str(sp.nsimplify(im)))
    if im == 0:
        return re
    return QC(re, im)


def monos_to_expr(monos):
    return sp.expand(sp.Add(*(coeff_to_sympy(c) * X ** i * Y ** j * Z ** k
                              for (i, j, k), c in monos.items())))


def expr_to_monos(expr):
    poly = sp.Poly(sp.expand(expr), X, Y, Z)
    out = {}
    for exps, coeff in poly.terms():
        out[tuple(int(e) for e in exps)] = sympy_to_coeff(coeff)
    return out


def triple_degree(triple):
    degs = {sp.Poly(f, X, Y, Z).total_degree() for f in triple if f != 0}
    if len(degs) != 1:
        raise NumericalFailure("triple is not homogeneous of a single degree",
                               degrees=sorted(degs))
    return degs.pop()


def reduce_triple(triple):
    """Divide out the exact polynomial gcd and normalize the content."""
    f0, f1, f2 = (sp.expand(f) for f in triple)
    g = sp.gcd(sp.gcd(f0, f1), f2)
    if g != 1:
        f0 = sp.expand(sp.cancel(f0 / g))
        f1 = sp.expand(sp.cancel(f1 / g))
        f2 = sp.expand(sp.cancel(f2 / g))
    content = None
    for f in (f0, f1, f2):
        if f != 0:
            _, c_part = sp.Poly(f, X, Y, Z).primitive()
            c = sp.Poly(f, X, Y, Z).content()
            content = c if content is None else sp.gcd(content, c)
    if content not in (None, 0, 1):
        f0, f1, f2 = (sp.expand(f / content) for f in (f0, f1, f2))
    return (f0, f1, f2)


def compose_triple(outer, inner, step=None):
    """outer o inner with budget guards; both triples homogeneous."""
    subs = {X: inner[0], Y: inner[1], Z: inner[2]}
    out = []
    for f in outer:
        g = sp.expand(f.subs(subs, simultaneous=True))
        out.append(g)
    deg = triple_degree(out)
    if deg > DEGREE_BUDGET:
        raise BudgetError("composed degree exceeds budget",
                          step=step, degree=deg, budget=DEGREE_BUDGET)
    n_monos = sum(len(sp.Poly(f, X, Y, Z).terms()) for f in out if f != 0)
    if n_monos > MONOMIAL_BUDGET:
        raise BudgetError("monomial count exceeds budget",
                          step=step, monomials=n_monos, budget=MONOMIAL_BUDGET)
    return tuple(out)


def _binary_form_roots(form, u, v):
    """Projective zeros [u:v] of a nonzero binary form, numerically."""
    poly = sp.Poly(form, u, v)
    d = poly.total_degree()
    coeffs = {}
    for (i, j), c in zip(poly.monoms(), poly.coeffs()):
        coeffs[i] = complex(c)
    dense = [coeffs.get(i, 0j) for i in range(d + 1)]  # coeff of u^i v^(d-i)
    pts = []
    affine = list(dense)  # treat as poly in t = u/v
    while affine and affine[-1] == 0:
        affine.pop()
    if not affine:
        raise NumericalFailure("zero binary form has no isolated roots")
    if len(affine) - 1 < d:
        pts.append((1.0 + 0j, 0j))  # [1:0] zero of the missing top power
    if len(affine) > 1:
        for r in np.roots(list(reversed(affine))):
            pts.append((complex(r), 1.0 + 0j))
    return pts


def common_zeros_p2(triple, tol=1e-8):
    """Best-effort common zeros of a reduced homogeneous triple.

    Affine chart Z=1 is handled with exact resultants and numeric root
    extraction; the line Z=0 with binary-form gcds.  Candidates are kept
    only if every component vanishes within tol at the sup-normalized
    representative.
    """
    x, y = sp.symbols("x y")
    f_aff = [sp.expand(f.subs({X: x, Y: y, Z: 1})) for f in triple]
    candidates = []

    nonzero = [f for f in f_aff if f != 0]
    if len(nonzero) >= 2:
        base = nonzero[0]
        res = []
        for other in nonzero[1:]:
            r = sp.expand(sp.resultant(base, other, y))
            res.append(sp.Poly(r, x) if r != 0 else None)
        res = [r for r in res if r is not None]
        if res:
            g = res[0]
            for r in res[1:]:
                g = sp.gcd(g, r)
            g = sp.Poly(g, x)
            if g.total_degree() >= 1:
                xs = np.roots([complex(c) for c in g.all_coeffs()])
            else:
                xs = []
            for xv in xs:
                ys = _affine_y_candidates(f_aff, x, y, complex(xv))
                for yv in ys:
                    candidates.append((complex(xv), complex(yv), 1.0 + 0j))

    # the line Z = 0
    u, v = sp.symbols("u v")
    forms = [sp.expand(f.subs({X: u, Y: v, Z: 0})) for f in triple]
    nz_forms = [f for f in forms if f != 0]
    if not nz_forms:
        raise NumericalFailure("triple vanishes identically on the infinity line")
    g = nz_forms[0]
    for f in nz_forms[1:]:
        g = sp.gcd(g, f)
    if g.free_symbols:
        for (uv, vv) in _binary_form_roots(g, u, v):
            candidates.append((uv, vv, 0j))

    out = []
    for cand in candidates:
        m = max(abs(c) for c in cand)
        p = tuple(c / m for c in cand)
        vals = [abs(_eval_triple_component(f, p)) for f in triple]
        if max(vals) < tol:
            if all(_proj_dist3(p, q) > 1e-8 for q in out):
                out.append(p)
    return out


def _affine_y_candidates(f_aff, x, y, xv):
    """y-roots at a fixed x, taken from the lowest-degree usable component."""
    best = None
    for f in f_aff:
        if f == 0:
            continue
        sub = sp.expand(f.subs({x: sp.Float(xv.real, 20) + sp.I * sp.Float(xv.imag, 20)}))
        py = sp.Poly(sub, y)
        if py.total_degree() >= 1:
            coeffs = [complex(c) for c in py.all_coeffs()]
            if abs(coeffs[0]) < 1e-12 * max(abs(c) for c in coeffs):
                continue
            rts = np.roots(coeffs)
            if best is None or len(rts) < len(best):
                best = list(rts)
    return best or []


def _eval_triple_component(f, p):
    lam = sp.lambdify((X, Y, Z), f, "numpy")
    return complex(lam(*p))


def _proj_dist3(p, q):
    cross = (p[0] * q[1] - p[1] * q[0], p[0] * q[2] - p[2] * q[0],
             p[1] * q[2] - p[2] * q[1])
    return max(abs(c) for c in cross)

"""Concrete map families: construction, evaluation, preimages.

Four families are built in:

* ``PolynomialSkew``  -- (x, y) |-> (y, Q(x, y)) on the projective plane,
  with deg Q = d, a nonzero y^d coefficient and no x^d term; the
  topological degree is the top x-power of Q.
* ``Secant``          -- the secant-method recurrence of a squarefree
  polynomial P on the product of two projective lines.
* ``TorusEndo``       -- z |-> A z + v on C^2 modulo the Gaussian lattice,
  A a Gaussian-integer matrix.
* ``CremonaComposite`` -- an ordered composition of plane maps given by
  homogeneous triples (built-ins: sigma, power maps, linear maps), reduced
  by exact gcd cancellation.

Points carry unit sup-norm float coordinates plus an optional exact
Gaussian-rational mirror; evaluation is exact whenever both the model and
the point are.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lattice as lat
from . import projsym
from .errors import (DegreeDropError, IndeterminateError, ModelRejected,
                     NumericalFailure, PreconditionError, UnsupportedError)
from .exactmath import QC, QC_ONE, QC_ZERO, column_hnf
from .polyroots import roots_with_multiplicity

FAMILIES = ("PolynomialSkew", "Secant", "TorusEndo", "CremonaComposite")

EXACT_ORBIT_BIT_BUDGET = 200_000


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class SurfacePoint:
    """A point of one of the built-in surfaces.

    kind "p2":    coords = 3 homogeneous complex numbers, sup norm 1
    kind "p1xp1": coords = (x0, x1, y0, y1), each factor sup norm 1
    kind "torus": coords = 2 complex numbers with re, im in [0, 1)
    """

    kind: str
    coords: tuple
    exact: tuple = None

    def __repr__(self):
        cs = ", ".join(f"{c:.6g}" for c in self.coords)
        return f"SurfacePoint({self.kind}: {cs})"


def _sup_normalize(values):
    m = max(abs(v) for v in values)
    if m == 0:
        raise NumericalFailure("cannot normalize the zero vector")
    return tuple(v / m for v in values)


def _exact_normalize(values):
    pivot = max(values, key=lambda q: q.norm2())
    if pivot.is_zero():
        raise NumericalFailure("cannot normalize the zero vector")
    return tuple(v / pivot for v in values)


def proj_point(values, exact=None):
    if len(values) != 3:
        raise PreconditionError("projective point needs 3 coordinates")
    if exact is None:
        exact = _maybe_exact(values)
    coords = _sup_normalize([complex(v) for v in values])
    if exact is not None:
        exact = _exact_normalize(tuple(exact))
    return SurfacePoint("p2", coords, exact)


def biproj_point(x_pair, y_pair, exact=None):
    if exact is None:
        ex = _maybe_exact(tuple(x_pair) + tuple(y_pair))
        exact = ex
    xs = _sup_normalize([complex(v) for v in x_pair])
    ys = _sup_normalize([complex(v) for v in y_pair])
    if exact is not None:
        exact = _exact_normalize(exact[:2]) + _exact_normalize(exact[2:])
    return SurfacePoint("p1xp1", xs + ys, exact)


def affine_biproj(x, y):
    return biproj_point((x, 1), (y, 1))


def _mod1(u):
    r = u % 1.0
    return 0.0 if r >= 1.0 else r


def torus_point(z1, z2, exact=None):
    if exact is None:
        exact = _maybe_exact((z1, z2))
    if exact is not None:
        exact = tuple(QC(q.re - math.floor(q.re), q.im - math.floor(q.im))
                      for q in exact)
        coords = tuple(complex(q) for q in exact)
    else:
        coords = tuple(complex(_mod1(z.real), _mod1(z.imag))
                       for z in (complex(z1), complex(z2)))
    return SurfacePoint("torus", coords, exact)


def _maybe_exact(values):
    out = []
    for v in values:
        if isinstance(v, QC):
            out.append(v)
        elif isinstance(v, (int, Fraction)):
            out.append(QC(v))
        elif isinstance(v, complex) and v.real.is_integer() and v.imag.is_integer():
            out.append(QC(int(v.real), int(v.imag)))
        elif isinstance(v, float) and v.is_integer():
            out.append(QC(int(v)))
        else:
            return None
    return tuple(out)


def _wrap_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def point_distance(p, q):
    """Scale-invariant distance; zero iff the points coincide."""
    if p.kind != q.kind:
        raise PreconditionError("points live on different surfaces",
                                left=p.kind, right=q.kind)
    if p.kind == "p2":
        a, b = p.coords, q.coords
        cross = (a[0] * b[1] - a[1] * b[0], a[0] * b[2] - a[2] * b[0],
                 a[1] * b[2] - a[2] * b[1])
        return max(abs(c) for c in cross)
    if p.kind == "p1xp1":
        dx = abs(p.coords[0] * q.coords[1] - p.coords[1] * q.coords[0])
        dy = abs(p.coords[2] * q.coords[3] - p.coords[3] * q.coords[2])
        return max(dx, dy)
    if p.kind == "torus":
        ds = []
        for a, b in zip(p.coords, q.coords):
            ds.append(_wrap_dist(a.real, b.real))
            ds.append(_wrap_dist(a.imag, b.imag))
        return max(ds)
    raise UnsupportedError(f"unknown point kind {p.kind}")


def points_equal(p, q, tol=1e-8):
    """Exact equality when both sides are exact, tolerance otherwise."""
    if p.exact is not None and q.exact is not None and p.kind == q.kind:
        if p.kind == "p2":
            a, b = p.exact, q.exact
            return all((a[i] * b[j] - a[j] * b[i]).is_zero()
                       for i in range(3) for j in range(i + 1, 3))
        if p.kind == "p1xp1":
            a, b = p.exact, q.exact
            return ((a[0] * b[1] - a[1] * b[0]).is_zero()
                    and (a[2] * b[3] - a[3] * b[2]).is_zero())
        if p.kind == "torus":
            return all((a - b).is_zero() for a, b in zip(p.exact, q.exact))
    return point_distance(p, q) < tol


# ---------------------------------------------------------------------------
# polynomial plumbing (exact coefficient dictionaries)


def _bivar_from_array(rows):
    """rows[i][j] = coefficient of x^i y^j, little-endian in both."""
    out = {}
    for i, row in enumerate(rows):
        for j, c in enumerate(row):
            cc = _coerce_coeff(c)
            if not _is_zero_coeff(cc):
                out[(i, j)] = cc
    return out


def _coerce_coeff(c):
    q = QC.from_value(c)
    if q is not None:
        return q
    if isinstance(c, (list, tuple)) and len(c) == 2:
        return complex(float(c[0]), float(c[1]))
    return complex(c)


def _is_zero_coeff(c):
    return c.is_zero() if isinstance(c, QC) else c == 0


def _coeff_complex(c):
    return complex(c)


def _all_exact(coeffs):
    return all(isinstance(c, QC) for c in coeffs)


def _ring_coeff(c, one):
    """Coerce a stored coefficient into the evaluation ring."""
    if isinstance(one, QC):
        return c if isinstance(c, QC) else QC(c)
    return complex(c)


def eval_bivar(monos, x, y, one):
    """Evaluate a coefficient dictionary at (x, y); generic in the ring."""
    acc = one - one
    max_i = max((i for i, _ in monos), default=0)
    max_j = max((j for _, j in monos), default=0)
    xp = [one]
    for _ in range(max_i):
        xp.append(xp[-1] * x)
    yp = [one]
    for _ in range(max_j):
        yp.append(yp[-1] * y)
    for (i, j), c in monos.items():
        acc = acc + _ring_coeff(c, one) * xp[i] * yp[j]
    return acc


def bivar_partial(monos, var):
    """d/dx (var=0) or d/dy (var=1) of a coefficient dictionary."""
    out = {}
    for (i, j), c in monos.items():
        e = (i, j)[var]
        if e == 0:
            continue
        key = (i - 1, j) if var == 0 else (i, j - 1)
        mult = QC(e) if isinstance(c, QC) else complex(e)
        out[key] = out.get(key, QC_ZERO if isinstance(c, QC) else 0j) + c * mult
    return out


def _substitute_y(monos, a, degree_x):
    """Little-endian complex coefficients in x of monos(x, a)."""
    coeffs = [0j] * (degree_x + 1)
    ap = [1.0 + 0j]
    max_j = max((j for _, j in monos), default=0)
    for _ in range(max_j):
        ap.append(ap[-1] * a)
    for (i, j), c in monos.items():
        coeffs[i] += _coeff_complex(c) * ap[j]
    return coeffs


# ---------------------------------------------------------------------------
# the model


@dataclass
class SurfaceMapModel:
    """Immutable bundle: dynamical data plus declared geometry tables."""

    family: str
    params: dict
    lambda2: int
    pullback_matrix: tuple
    lattice: lat.IntersectionLattice
    indeterminacy: tuple       # entries (point, image_class or None)
    exceptional: tuple         # entries (label, curve_class, image_point)
    tables_complete: bool = True
    data: dict = field(default_factory=dict, repr=False)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def surface(self):
        return {"PolynomialSkew": "p2", "Secant": "p1xp1",
                "TorusEndo": "torus", "CremonaComposite": "p2"}[self.family]

    def omega(self):
        return lat.make_class(self.lattice, self.lattice.omega)

    @property
    def algebraic_degree(self):
        if self.surface != "p2":
            raise UnsupportedError("algebraic degree is a plane-map notion",
                                   family=self.family)
        return self.data["delta"]

    def lambda1(self):
        """Spectral radius of the pullback action."""
        if "lambda1" not in self.cache:
            r1, _ = lat.spectral_radius(self.pullback_matrix)
            self.cache["lambda1"] = r1
        return self.cache["lambda1"]

    def lift_monomials(self):
        if self.surface != "p2":
            raise UnsupportedError("no homogeneous lift for this surface",
                                   family=self.family)
        return self.data["lift"]

    def lift_arrays(self):
        """Monomial arrays of the homogeneous lift, for the orbit kernels."""
        if "lift_arrays" not in self.cache:
            comps = []
            for monos in self.lift_monomials():
                if monos:
                    exps = np.array(sorted(monos.keys()), dtype=np.int64)
                    cfs = np.array([_coeff_complex(monos[tuple(e)]) for e in exps],
                                   dtype=np.complex128)
                else:
                    exps = np.zeros((0, 3), dtype=np.int64)
                    cfs = np.zeros(0, dtype=np.complex128)
                comps.append((exps, cfs))
            self.cache["lift_arrays"] = comps
        return self.cache["lift_arrays"]

    def exact_capable(self):
        return self.data.get("exact", False)

    def indeterminacy_points(self):
        return tuple(p for p, _ in self.indeterminacy)

    def inverse_indeterminacy_points(self):
        """I^- = images of the collapsed curves."""
        return tuple(img for _, _, img in self.exceptional)


# ---------------------------------------------------------------------------
# builders


def build_model(family, params):
    """Validate family parameters and assemble the model tables."""
    if family == "PolynomialSkew":
        return _build_skew(params)
    if family == "Secant":
        return _build_secant(params)
    if family == "TorusEndo":
        return _build_torus(params)
    if family == "CremonaComposite":
        return _build_composite(params)
    raise ModelRejected(f"unknown family {family!r}", families=FAMILIES)


def _build_skew(params):
    rows = params.get("q_coeffs")
    if not rows:
        raise ModelRejected("PolynomialSkew needs q_coeffs", field="q_coeffs")
    q = _bivar_from_array(rows)
    if not q:
        raise ModelRejected("Q must be a nonzero polynomial", field="q_coeffs")
    d = max(i + j for i, j in q)
    if d < 2:
        raise ModelRejected("Q must have degree at least 2", degree=d)
    if (0, d) not in q or _is_zero_coeff(q[(0, d)]):
        raise ModelRejected("the y^d coefficient of Q must be nonzero",
                            degree=d)
    if (d, 0) in q and not _is_zero_coeff(q[(d, 0)]):
        raise ModelRejected("the x^d coefficient of Q must vanish", degree=d)
    dx = max(i for i, _ in q)
    if dx < 1:
        raise ModelRejected("Q must depend on x (top x-power >= 1)", top_x=dx)
    if dx >= d:
        raise ModelRejected("top x-power must be smaller than deg Q",
                            top_x=dx, degree=d)

    exact = _all_exact(q.values())
    one = QC_ONE if exact else (1.0 + 0j)
    # homogeneous lift [Y Z^(d-1) : Q homogenized : Z^d]
    lift0 = {(0, 1, d - 1): one}
    lift1 = {(i, j, d - i - j): c for (i, j), c in q.items()}
    lift2 = {(0, 0, d): one}

    lattice = lat.p2_lattice()
    h_class = lat.make_class(lattice, (1,))
    p_ind = proj_point((1, 0, 0))
    p_fix = proj_point((0, 1, 0))
    model = SurfaceMapModel(
        family="PolynomialSkew",
        params={"q_coeffs": _canon_rows(rows)},
        lambda2=dx,
        pullback_matrix=((d,),),
        lattice=lattice,
        indeterminacy=((p_ind, h_class),),
        exceptional=(("L_inf", h_class, p_fix),),
        data={"q": q, "d": d, "dx": dx, "delta": d,
              "lift": (lift0, lift1, lift2), "exact": exact},
    )
    return model


def _build_secant(params):
    coeffs = params.get("p_coeffs")
    if not coeffs:
        raise ModelRejected("Secant needs p_coeffs", field="p_coeffs")
    p = [_coerce_coeff(c) for c in coeffs]
    while len(p) > 1 and _is_zero_coeff(p[-1]):
        p.pop()
    d = len(p) - 1
    if d < 2:
        raise ModelRejected("P must have degree at least 2", degree=d)

    exact = _all_exact(p)
    repeated = _squarefree_certificate(p, exact)
    if repeated is not None:
        raise ModelRejected(
            f"P has a repeated root near {repeated:.6g}; the recurrence is "
            "only well behaved for squarefree P", repeated_root_re=repeated.real,
            repeated_root_im=repeated.imag)

    one = QC_ONE if exact else (1.0 + 0j)
    zero = QC_ZERO if exact else 0j
    # divided difference Dt(x,y) = (P(x)-P(y))/(x-y)
    dt = {}
    for k in range(1, d + 1):
        c = p[k]
        if _is_zero_coeff(c):
            continue
        for i in range(k):
            key = (i, k - 1 - i)
            dt[key] = dt.get(key, zero) + c
    # Nt(x,y) = x*Dt(x,y) - P(x)
    nt = {}
    for (i, j), c in dt.items():
        nt[(i + 1, j)] = nt.get((i + 1, j), zero) + c
    for k, c in enumerate(p):
        if not _is_zero_coeff(c):
            nt[(k, 0)] = nt.get((k, 0), zero) - c
    nt = {k: c for k, c in nt.items() if not _is_zero_coeff(c)}

    lattice = lat.p1xp1_lattice()
    dd = d - 1
    model = SurfaceMapModel(
        family="Secant",
        params={"p_coeffs": [_canon_value(c) for c in p]},
        lambda2=dd,
        pullback_matrix=((0, dd), (1, dd)),
        lattice=lattice,
        indeterminacy=(),          # filled below
        exceptional=(),
        data={"p": p, "d": d, "nt": nt, "dt": dt, "exact": exact},
    )

    # collapsed curves {y = z}, P(z) = 0, each sent to the fixed point (z, z)
    h_class = lat.make_class(lattice, (0, 1))
    roots = roots_with_multiplicity([_coeff_complex(c) for c in p])
    exceptional = []
    for k, (z, _) in enumerate(sorted(roots, key=lambda t: (t[0].real, t[0].imag))):
        zq = _root_exact(p, z) if exact else None
        pt = (affine_biproj(z, z) if zq is None
              else biproj_point((zq, QC_ONE), (zq, QC_ONE)))
        exceptional.append((f"y=root{k}", h_class, pt))
    model.exceptional = tuple(exceptional)
    model.indeterminacy = tuple((pt, None) for pt in _secant_indeterminacy(model))
    return model


def _root_exact(p, z):
    """Return the exact Gaussian-rational root when z is one, else None."""
    for cand in (QC(round(z.real)), QC(round(z.real), round(z.imag))):
        if abs(complex(cand) - z) < 1e-9:
            acc = QC_ZERO
            for c in reversed(p):
                acc = acc * cand + c
            if acc.is_zero():
                return cand
    return None


def _squarefree_certificate(p, exact):
    """Return a repeated root (complex) if gcd(P, P') is nonconstant."""
    import sympy as sp
    t = sp.Symbol("t")
    if exact:
        expr = sum((sp.Rational(c.re) + sp.I * sp.Rational(c.im)) * t ** k
                   for k, c in enumerate(p))
    else:
        expr = sum(sp.nsimplify(complex(c), rational=True) * t ** k
                   for k, c in enumerate(p))
    g = sp.gcd(sp.Poly(expr, t), sp.Poly(sp.diff(expr, t), t))
    if g.total_degree() == 0:
        return None
    roots = np.roots([complex(c) for c in g.all_coeffs()])
    return complex(roots[0])


def _secant_bihom_eval(monos, dd, x0, x1, y0, y1, one):
    """Evaluate the bidegree-(dd, dd) lift of an affine dictionary."""
    acc = one - one
    xp0, xp1, yp0, yp1 = [one], [one], [one], [one]
    for _ in range(dd):
        xp0.append(xp0[-1] * x0)
        xp1.append(xp1[-1] * x1)
        yp0.append(yp0[-1] * y0)
        yp1.append(yp1[-1] * y1)
    for (i, j), c in monos.items():
        acc = acc + _ring_coeff(c, one) * xp0[i] * xp1[dd - i] * yp0[j] * yp1[dd - j]
    return acc


def _secant_indeterminacy(model):
    """Common zeros of the cancelled numerator and denominator.

    Affine candidates come from an exact resultant in y followed by numeric
    root extraction; the two infinity lines are handled with exact binary
    forms.  Best effort by construction: every candidate is verified
    against both lifts before being kept.
    """
    import sympy as sp
    nt, dt, d = model.data["nt"], model.data["dt"], model.data["d"]
    dd = d - 1
    x, y = sp.symbols("x y")

    def to_expr(monos):
        terms = []
        for (i, j), c in monos.items():
            cs = (projsym.coeff_to_sympy(c) if isinstance(c, QC)
                  else sp.nsimplify(c, rational=True))
            terms.append(cs * x ** i * y ** j)
        return sp.expand(sp.Add(*terms))

    nt_e, dt_e = to_expr(nt), to_expr(dt)
    pts = []
    res = sp.resultant(nt_e, dt_e, y)
    res = sp.Poly(sp.expand(res), x)
    if res.total_degree() >= 1:
        for xv in np.roots([complex(c) for c in res.all_coeffs()]):
            den = _substitute_y_swapped(dt, complex(xv))
            try:
                cand_roots = roots_with_multiplicity(den)
            except (DegreeDropError, NumericalFailure):
                continue
            for yv, _ in cand_roots:
                xr, yr = _newton_system_2d(nt, dt, complex(xv), complex(yv))
                nv = eval_bivar(nt, xr, yr, 1.0 + 0j)
                dv = eval_bivar(dt, xr, yr, 1.0 + 0j)
                if max(abs(nv), abs(dv)) < 1e-8:
                    pts.append(affine_biproj(xr, yr))
    # infinity lines: x = [1:0] and y = [1:0]
    for at_x_inf in (True, False):
        inf_pts = _secant_inf_common_zeros(nt, dt, dd, at_x_inf)
        pts.extend(inf_pts)
    out = []
    for p in pts:
        if all(point_distance(p, q) > 1e-6 for q in out):
            out.append(p)
    return tuple(out)


def _newton_system_2d(f, g, x, y, steps=12):
    """Polish a joint zero of two coefficient dictionaries by Newton."""
    fx, fy = bivar_partial(f, 0), bivar_partial(f, 1)
    gx, gy = bivar_partial(g, 0), bivar_partial(g, 1)
    one = 1.0 + 0j
    for _ in range(steps):
        fv = eval_bivar(f, x, y, one)
        gv = eval_bivar(g, x, y, one)
        a, b = eval_bivar(fx, x, y, one), eval_bivar(fy, x, y, one)
        c, d = eval_bivar(gx, x, y, one), eval_bivar(gy, x, y, one)
        det = a * d - b * c
        if abs(det) < 1e-14:
            break
        dx = (fv * d - b * gv) / det
        dy = (a * gv - fv * c) / det
        if abs(dx) > 1.0 or abs(dy) > 1.0:
            break
        x, y = x - dx, y - dy
        if max(abs(dx), abs(dy)) < 1e-15 * max(1.0, abs(x), abs(y)):
            break
    # snap tiny components produced by split double roots
    def snap(v):
        re = round(v.real) if abs(v.real - round(v.real)) < 1e-12 else v.real
        im = round(v.imag) if abs(v.imag - round(v.imag)) < 1e-12 else v.imag
        return complex(re, im)
    return snap(x), snap(y)


def _substitute_y_swapped(monos, xv):
    """Little-endian coefficients in y of monos(xv, y)."""
    max_j = max((j for _, j in monos), default=0)
    coeffs = [0j] * (max_j + 1)
    max_i = max((i for i, _ in monos), default=0)
    xp = [1.0 + 0j]
    for _ in range(max_i):
        xp.append(xp[-1] * xv)
    for (i, j), c in monos.items():
        coeffs[j] += _coeff_complex(c) * xp[i]
    return coeffs


def _secant_inf_common_zeros(nt, dt, dd, at_x_inf):
    """Common zeros on one infinity line of the product surface."""
    # on X1 = 0 the lifts restrict to binary forms in (Y0, Y1) coming from
    # the top x-degree part; symmetrically for Y1 = 0.
    def top_part(monos):
        out = {}
        for (i, j), c in monos.items():
            key = j if at_x_inf else i
            deg = i if at_x_inf else j
            if deg == dd:
                out[key] = out.get(key, 0j) + _coeff_complex(c)
        return out

    f1, f2 = top_part(nt), top_part(dt)
    pts = []
    if not f1 and not f2:
        raise NumericalFailure("both lifts vanish on an infinity line")
    if not f1 or not f2:
        return pts
    max_k = max(max(f1, default=0), max(f2, default=0))
    a = [f1.get(k, 0j) for k in range(max_k + 1)]
    b = [f2.get(k, 0j) for k in range(max_k + 1)]
    # affine chart of the line: common finite roots
    common = _common_univariate_roots(a, b)
    for t in common:
        if at_x_inf:
            pts.append(biproj_point((1, 0), (t, 1)))
        else:
            pts.append(biproj_point((t, 1), (1, 0)))
    # the corner point where both variables are infinite
    def degree(c):
        k = len(c) - 1
        while k > 0 and c[k] == 0:
            k -= 1
        return k
    if degree(a) < dd and degree(b) < dd:
        pts.append(biproj_point((1, 0), (1, 0)))
    return pts


def _common_univariate_roots(a, b, tol=1e-7):
    try:
        ra = roots_with_multiplicity(a)
    except (DegreeDropError, NumericalFailure):
        return []
    out = []
    for z, _ in ra:
        val = 0j
        for c in reversed(b):
            val = val * z + c
        if abs(val) < tol:
            out.append(z)
    return out


def _build_torus(params):
    a_rows = params.get("matrix")
    if not a_rows or len(a_rows) != 2 or any(len(r) != 2 for r in a_rows):
        raise ModelRejected("TorusEndo needs a 2x2 matrix", field="matrix")
    A = []
    for row in a_rows:
        arow = []
        for v in row:
            q = QC.from_value(v)
            if q is None or q.re.denominator != 1 or q.im.denominator != 1:
                raise ModelRejected(
                    "matrix entries must be Gaussian integers [re, im]",
                    field="matrix", entry=str(v))
            arow.append(q)
        A.append(tuple(arow))
    A = tuple(A)
    det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
    lam2 = det.norm2()
    if lam2 == 0:
        raise ModelRejected("matrix must be nonsingular for a dominating map",
                            field="matrix")
    v_in = params.get("translation", [[0, 0], [0, 0]])
    v = tuple(QC.from_value(t) if QC.from_value(t) is not None else None
              for t in v_in)
    v_exact = all(t is not None for t in v)
    if not v_exact:
        v_float = tuple(complex(float(t[0]), float(t[1])) for t in v_in)
    else:
        v_float = tuple(complex(t) for t in v)

    lattice = lat.torus_lattice()
    m_pull = _torus_pullback_matrix(A)
    model = SurfaceMapModel(
        family="TorusEndo",
        params={"matrix": [[_canon_value(c) for c in row] for row in A],
                "translation": [_canon_value(t) if t is not None else list(map(float, raw))
                                for t, raw in zip(v, v_in)]},
        lambda2=int(lam2),
        pullback_matrix=m_pull,
        lattice=lattice,
        indeterminacy=(),
        exceptional=(),
        data={"A": A, "det": det, "v": v if v_exact else None,
              "v_float": v_float,
              "A_np": np.array([[complex(c) for c in row] for row in A]),
              "exact": v_exact},
    )
    model.data["Ainv_np"] = np.linalg.inv(model.data["A_np"])
    model.data["cosets"] = _torus_cosets(A, int(lam2))
    return model


def _torus_pullback_matrix(A):
    """Integer matrix of H |-> A^* H A on the (a, b, c, d) coordinates."""
    i = QC(0, 1)
    basis = (
        ((QC_ONE, QC_ZERO), (QC_ZERO, QC_ZERO)),
        ((QC_ZERO, QC_ONE), (QC_ONE, QC_ZERO)),
        ((QC_ZERO, i), (QC_ZERO - i, QC_ZERO)),
        ((QC_ZERO, QC_ZERO), (QC_ZERO, QC_ONE)),
    )
    astar = ((A[0][0].conj(), A[1][0].conj()), (A[0][1].conj(), A[1][1].conj()))

    def mul(P, Qm):
        return tuple(tuple(P[r][0] * Qm[0][c] + P[r][1] * Qm[1][c]
                           for c in range(2)) for r in range(2))

    cols = []
    for H in basis:
        HP = mul(mul(astar, H), A)
        a, d = HP[0][0], HP[1][1]
        b, c = HP[0][1].re, HP[0][1].im
        if a.im != 0 or d.im != 0:
            raise NumericalFailure("pullback of a Hermitian class lost Hermitianity")
        col = (a.re, b, c, d.re)
        if any(x.denominator != 1 for x in col):
            raise NumericalFailure("pullback matrix is not integral")
        cols.append(tuple(int(x) for x in col))
    return tuple(tuple(cols[j][i] for j in range(4)) for i in range(4))


def _torus_cosets(A, lam2):
    """Coset representatives of the sublattice A.Lambda inside Lambda."""
    def blk(q):
        return [[int(q.re), -int(q.im)], [int(q.im), int(q.re)]]

    B = [[0] * 4 for _ in range(4)]
    for bi in range(2):
        for bj in range(2):
            sub = blk(A[bi][bj])
            for r in range(2):
                for c in range(2):
                    B[2 * bi + r][2 * bj + c] = sub[r][c]
    H = column_hnf(B)
    diag = [H[i][i] for i in range(4)]
    count = diag[0] * diag[1] * diag[2] * diag[3]
    if count != lam2:
        raise NumericalFailure("coset count disagrees with |det A|^2",
                               count=count, expected=lam2)
    reps = []
    for a0 in range(diag[0]):
        for a1 in range(diag[1]):
            for a2 in range(diag[2]):
                for a3 in range(diag[3]):
                    reps.append(complex(a0, a1))
                    reps.append(complex(a2, a3))
    return np.array(reps, dtype=complex).reshape(-1, 2)


_SIGMA_MONOS = ({(0, 1, 1): QC_ONE}, {(1, 0, 1): QC_ONE}, {(1, 1, 0): QC_ONE})


def _factor_triple(factor):
    """(monomial triple, lambda2, kind) of one composition factor."""
    kind = factor.get("kind")
    if kind == "sigma":
        return _SIGMA_MONOS, 1
    if kind == "power":
        k = int(factor.get("exponent", 2))
        if k < 1:
            raise ModelRejected("power exponent must be >= 1", exponent=k)
        one = QC_ONE
        return ({(k, 0, 0): one}, {(0, k, 0): one}, {(0, 0, k): one}), k * k
    if kind == "linear":
        rows = factor.get("matrix")
        if not rows or len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise ModelRejected("linear factor needs a 3x3 matrix", field="matrix")
        m = [[_coerce_coeff(c) for c in row] for row in rows]
        if not all(isinstance(c, QC) for row in m for c in row):
            raise ModelRejected("linear factor entries must be exact rationals")
        det = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
               - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
               + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
        if det.is_zero():
            raise ModelRejected("linear factor matrix is singular")
        basis = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        triple = tuple({basis[j]: m[i][j] for j in range(3)
                        if not m[i][j].is_zero()} for i in range(3))
        return triple, 1
    if kind == "custom":
        comps = factor.get("components")
        if not comps or len(comps) != 3:
            raise ModelRejected("custom factor needs 3 components")
        triple = []
        for comp in comps:
            monos = {}
            for entry in comp:
                i, j, k, c = entry
                monos[(int(i), int(j), int(k))] = _coerce_coeff(c)
            triple.append(monos)
        degs = {i + j + k for monos in triple for (i, j, k) in monos}
        if len(degs) != 1:
            raise ModelRejected("custom components must share one degree",
                                degrees=sorted(degs))
        lam2 = factor.get("lambda2")
        if not isinstance(lam2, int) or lam2 < 1:
            raise ModelRejected("custom factor needs a declared integer lambda2")
        return tuple(triple), lam2
    raise ModelRejected(f"unknown composition factor kind {kind!r}")


def _build_composite(params):
    factors = params.get("factors")
    if not factors:
        raise ModelRejected("CremonaComposite needs a factors list",
                            field="factors")
    triples = []
    lam2 = 1
    for f in factors:
        triple, l2 = _factor_triple(f)
        triples.append(triple)
        lam2 *= l2

    exprs = [tuple(projsym.monos_to_expr(m) for m in t) for t in triples]
    comp = exprs[-1]
    for outer in reversed(exprs[:-1]):
        comp = projsym.compose_triple(outer, comp)
        comp = projsym.reduce_triple(comp)
    comp = projsym.reduce_triple(comp)
    delta = projsym.triple_degree(comp)
    lift = tuple({k: (QC(v) if isinstance(v, (int, Fraction)) else v)
                  for k, v in projsym.expr_to_monos(f).items()} for f in comp)

    lattice = lat.p2_lattice()
    h_class = lat.make_class(lattice, (1,))
    single = len(factors) == 1
    complete = True
    ind, exc = (), ()
    if single and factors[0].get("kind") == "sigma":
        pts = [proj_point(e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
        ind = tuple((p, h_class) for p in pts)
        exc = tuple((lbl, h_class, img) for lbl, img in
                    (("x=0", pts[0]), ("y=0", pts[1]), ("z=0", pts[2])))
    elif single and factors[0].get("kind") in ("power", "linear"):
        pass  # holomorphic, empty tables
    else:
        # best effort: locate indeterminacy on the reduced lift; collapsed
        # curves of a true composition are not enumerated at this scale
        complete = False
        try:
            zeros = projsym.common_zeros_p2(comp)
            ind = tuple((proj_point(z), None) for z in zeros)
        except Exception:
            ind = ()

    model = SurfaceMapModel(
        family="CremonaComposite",
        params={"factors": _canon_factors(factors)},
        lambda2=lam2,
        pullback_matrix=((delta,),),
        lattice=lattice,
        indeterminacy=ind,
        exceptional=exc,
        tables_complete=complete,
        data={"lift": lift, "delta": delta, "exact": True,
              "sympy_triple": comp},
    )
    return model


def _canon_rows(rows):
    return [[_canon_value(_coerce_coeff(c)) for c in row] for row in rows]


def _canon_value(c):
    if isinstance(c, QC):
        if c.im == 0 and c.re.denominator == 1:
            return int(c.re)
        return [str(c.re), str(c.im)]
    c = complex(c)
    if c.imag == 0:
        return c.real
    return [c.real, c.imag]


def _canon_factors(factors):
    out = []
    for f in factors:
        g = dict(f)
        if "matrix" in g:
            g["matrix"] = [[_canon_value(_coerce_coeff(c)) for c in row]
                           for row in g["matrix"]]
        if "components" in g:
            g["components"] = [[[int(i), int(j), int(k), _canon_value(_coerce_coeff(c))]
                                for i, j, k, c in comp] for comp in g["components"]]
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# evaluation


def evaluate(model, p):
    """Image of a point; raises IndeterminateError on the indeterminacy set."""
    if p.kind != model.surface:
        raise PreconditionError("point does not live on the model surface",
                                expected=model.surface, got=p.kind)
    if model.surface == "p2":
        return _evaluate_p2(model, p)
    if model.family == "Secant":
        return _evaluate_secant(model, p)
    return _evaluate_torus(model, p)


def _lift_coeff_scale(model):
    if "coeff_scale" not in model.cache:
        s = 1.0
        for monos in model.lift_monomials():
            s = max(s, sum(abs(_coeff_complex(c)) for c in monos.values()))
        model.cache["coeff_scale"] = s
    return model.cache["coeff_scale"]


def _evaluate_p2(model, p, ind_tol=1e-12):
    exact_ok = (model.exact_capable() and p.exact is not None
                and sum(q.bit_size() for q in p.exact) < EXACT_ORBIT_BIT_BUDGET)
    if exact_ok:
        vals = [_eval_trivar(monos, p.exact, QC_ONE)
                for monos in model.lift_monomials()]
        if all(v.is_zero() for v in vals):
            raise IndeterminateError("point is indeterminate for the lift",
                                     point=repr(p))
        return proj_point([complex(v) for v in vals], exact=tuple(vals))
    vals = [_eval_trivar(monos, p.coords, 1.0 + 0j)
            for monos in model.lift_monomials()]
    if max(abs(v) for v in vals) < ind_tol * _lift_coeff_scale(model):
        raise IndeterminateError("point is numerically indeterminate",
                                 point=repr(p))
    return proj_point(vals)


def _eval_trivar(monos, xyz, one):
    x, y, z = xyz
    acc = one - one
    deg = max((sum(k) for k in monos), default=0)
    xp, yp, zp = [one], [one], [one]
    for _ in range(deg):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
        zp.append(zp[-1] * z)
    for (i, j, k), c in monos.items():
        acc = acc + _ring_coeff(c, one) * xp[i] * yp[j] * zp[k]
    return acc


def _evaluate_secant(model, p, ind_tol=1e-12):
    nt, dt, d = model.data["nt"], model.data["dt"], model.data["d"]
    dd = d - 1
    exact_ok = (model.exact_capable() and p.exact is not None
                and sum(q.bit_size() for q in p.exact) < EXACT_ORBIT_BIT_BUDGET)
    if exact_ok:
        x0, x1, y0, y1 = p.exact
        nv = _secant_bihom_eval(nt, dd, x0, x1, y0, y1, QC_ONE)
        dv = _secant_bihom_eval(dt, dd, x0, x1, y0, y1, QC_ONE)
        if nv.is_zero() and dv.is_zero():
            raise IndeterminateError("secant point is indeterminate",
                                     point=repr(p))
        return biproj_point((y0, y1), (nv, dv), exact=(y0, y1, nv, dv))
    x0, x1, y0, y1 = p.coords
    nv = _secant_bihom_eval(nt, dd, x0, x1, y0, y1, 1.0 + 0j)
    dv = _secant_bihom_eval(dt, dd, x0, x1, y0, y1, 1.0 + 0j)
    scale = model.cache.setdefault(
        "coeff_scale",
        max(1.0, sum(abs(_coeff_complex(c)) for c in nt.values()),
            sum(abs(_coeff_complex(c)) for c in dt.values())))
    if max(abs(nv), abs(dv)) < ind_tol * scale:
        raise IndeterminateError("secant point is numerically indeterminate",
                                 point=repr(p))
    return biproj_point((y0, y1), (nv, dv))


def _evaluate_torus(model, p):
    A = model.data["A"]
    if model.exact_capable() and p.exact is not None:
        v = model.data["v"]
        z1 = A[0][0] * p.exact[0] + A[0][1] * p.exact[1] + v[0]
        z2 = A[1][0] * p.exact[0] + A[1][1] * p.exact[1] + v[1]
        return torus_point(z1, z2, exact=(z1, z2))
    An = model.data["A_np"]
    vf = model.data["v_float"]
    w = An @ np.array(p.coords) + np.array(vf)
    return torus_point(w[0], w[1])


# ---------------------------------------------------------------------------
# preimages


def preimages(model, p):
    """All preimages of p with multiplicities; total equals the topological
    degree at generic points."""
    if p.kind != model.surface:
        raise PreconditionError("point does not live on the model surface",
                                expected=model.surface, got=p.kind)
    for bad in model.inverse_indeterminacy_points():
        if points_equal(p, bad, tol=1e-10):
            raise PreconditionError(
                "preimages are not defined on the image of a collapsed curve",
                point=repr(p))
    if model.family == "PolynomialSkew":
        return _preimages_skew(model, p)
    if model.family == "Secant":
        return _preimages_secant(model, p)
    if model.family == "TorusEndo":
        return _preimages_torus(model, p)
    raise UnsupportedError("preimage solving is not implemented for this family",
                           family=model.family)


def _affine_p2(p):
    # affine coordinates can be astronomically large for far-out points;
    # only essentially-infinite representatives are rejected
    x, y, z = p.coords
    if abs(z) < 1e-150:
        raise UnsupportedError("affine chart undefined at infinity",
                               point=repr(p))
    return x / z, y / z


def _lead_scale(monos, i_top, a_abs):
    """Generic magnitude of the top x-coefficient at |y| = a_abs."""
    s = 0.0
    for (i, j), c in monos.items():
        if i == i_top:
            s += abs(_coeff_complex(c)) * a_abs ** j
    return max(s, 1e-300)


def _preimages_skew(model, p):
    a, b = _affine_p2(p)
    q, dx = model.data["q"], model.data["dx"]
    coeffs = _substitute_y(q, a, dx)
    coeffs[0] -= b
    roots = roots_with_multiplicity(coeffs,
                                    lead_scale=_lead_scale(q, dx, abs(a)))
    out = []
    for x, mult in roots:
        out.append((proj_point((x, a, 1)), mult))
    return out


def _preimages_secant(model, p):
    x0, x1, y0, y1 = p.coords
    if abs(x1) < 1e-150 or abs(y1) < 1e-150:
        raise UnsupportedError("preimage solving needs an affine target point",
                               point=repr(p))
    a, b = x0 / x1, y0 / y1
    nt, dt, d = model.data["nt"], model.data["dt"], model.data["d"]
    na = _substitute_y(nt, a, d - 1)
    da = _substitute_y(dt, a, d - 1)
    coeffs = [nc - b * dc for nc, dc in zip(na, da)]
    scale = (_lead_scale(nt, d - 1, abs(a))
             + abs(b) * _lead_scale(dt, d - 1, abs(a)))
    roots = roots_with_multiplicity(coeffs, lead_scale=scale)
    return [(affine_biproj(x, a), mult) for x, mult in roots]


def _preimages_torus(model, p):
    Ainv = model.data["Ainv_np"]
    vf = np.array(model.data["v_float"])
    q = np.array(p.coords)
    out = []
    for rep in model.data["cosets"]:
        z = Ainv @ (q - vf + rep)
        out.append((torus_point(z[0], z[1]), 1))
    return out


# ---------------------------------------------------------------------------
# sampling


def random_point(model, rng):
    """A generic point, drawn from a family-appropriate distribution."""
    if model.surface == "p2":
        x = complex(rng.standard_normal(), rng.standard_normal())
        y = complex(rng.standard_normal(), rng.standard_normal())
        return proj_point((x, y, 1))
    if model.surface == "p1xp1":
        a = complex(rng.standard_normal(), rng.standard_normal())
        b = complex(rng.standard_normal(), rng.standard_normal())
        return affine_biproj(a, b)
    z = rng.random(4)
    return torus_point(complex(z[0], z[1]), complex(z[2], z[3]))


def topological_degree_mc(model, n_samples=1000, seed=0):
    """Modal preimage count over random points.

    Raises StructuralFailure unless the count agrees with the declared
    topological degree on at least 99 percent of the samples.
    """
    from .errors import StructuralFailure
    if n_samples < 1:
        raise PreconditionError("need at least one sample", n_samples=n_samples)
    rng = np.random.default_rng(seed)
    counts = {}
    for _ in range(n_samples):
        p = random_point(model, rng)
        try:
            pre = preimages(model, p)
            n_distinct = len(pre)
        except (DegreeDropError, NumericalFailure, PreconditionError):
            n_distinct = -1
        counts[n_distinct] = counts.get(n_distinct, 0) + 1
    modal = max(counts, key=counts.get)
    agree = counts.get(model.lambda2, 0) / n_samples
    if modal != model.lambda2 or agree < 0.99:
        raise StructuralFailure(
            "preimage counts disagree with the declared topological degree",
            modal=modal, expected=model.lambda2, agreement=agree,
            histogram={str(k): v for k, v in sorted(counts.items())})
    return modal


# ---------------------------------------------------------------------------
# derivatives


def jacobian_det(model, p):
    """Complex Jacobian determinant of the affine map at an affine point."""
    if model.family == "TorusEndo":
        A = model.data["A_np"]
        return complex(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if model.family == "PolynomialSkew":
        x, y = _affine_p2(p)
        qx = bivar_partial(model.data["q"], 0)
        return -eval_bivar(qx, x, y, 1.0 + 0j)
    if model.family == "Secant":
        x0, x1, y0, y1 = p.coords
        x, y = x0 / x1, y0 / y1
        nt, dt = model.data["nt"], model.data["dt"]
        ntx = bivar_partial(nt, 0)
        dtx = bivar_partial(dt, 0)
        nv = eval_bivar(nt, x, y, 1.0 + 0j)
        dv = eval_bivar(dt, x, y, 1.0 + 0j)
        nxv = eval_bivar(ntx, x, y, 1.0 + 0j)
        dxv = eval_bivar(dtx, x, y, 1.0 + 0j)
        if dv == 0:
            raise NumericalFailure("Jacobian undefined where the lift denominator vanishes")
        return -(nxv * dv - nv * dxv) / (dv * dv)
    if model.family == "CremonaComposite":
        return _jacobian_composite(model, p)
    raise UnsupportedError("no Jacobian for this family", family=model.family)


def _jacobian_composite(model, p):
    if "jac" not in model.cache:
        import sympy as sp
        x, y = sp.symbols("x y")
        F = model.data["sympy_triple"]
        subs = {projsym.X: x, projsym.Y: y, projsym.Z: 1}
        u = sp.cancel(F[0].subs(subs) / F[2].subs(subs))
        v = sp.cancel(F[1].subs(subs) / F[2].subs(subs))
        det = sp.simplify(sp.diff(u, x) * sp.diff(v, y)
                          - sp.diff(u, y) * sp.diff(v, x))
        model.cache["jac"] = sp.lambdify((x, y), det, "numpy")
    xv, yv = _affine_p2(p)
    return complex(model.cache["jac"](xv, yv))

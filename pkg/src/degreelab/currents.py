"""Potential series of the invariant currents.

The pullback series sums lam1^{-j} * gamma(f^j p) along forward orbits,
where gamma is the chart defect of the normalized pullback of the reference
form; the pushforward series sums lam1^{-j} (f^j_* gamma_minus)(p) over the
preimage tree.  All plane-map evaluations run through the orbit kernels
(compiled when available).

Chart conventions, fixed once so every number is reproducible:

* plane maps: reference potential of Fubini-Study type; for a lift F of
  degree delta and a representative p,
  gamma(p) = (log|F(p)|_2 - delta * log|p|_2) / lam1,
  which requires lam1 = delta (true for the built-in one-stable families).
* torus maps: the flat representative pulls back exactly, gamma = 0.
* the pushforward chart potential is u(x, y) = (1/2) log(1 + |x|^2 + |y|^2)
  on the affine chart, u = 0 on the torus.
"""

import concurrent.futures
import math
import os
from dataclasses import dataclass

import numpy as np

from . import models as M
from . import stability as stab
from ._kernels import green_grid, green_orbit
from .errors import (BudgetError, DegreeDropError, IndeterminateError,
                     NumericalFailure, PreconditionError, UnsupportedError)

TREE_LEAF_BUDGET = 10 ** 5
GRID_CELL_BUDGET = 4096 * 4096
STABILITY_REPORT_HORIZON = 20


@dataclass
class GreenEvaluation:
    value: float
    n_used: int
    tail_bound: float
    orbit_hit_indeterminacy: bool


@dataclass
class GreenGrid:
    slice_spec: dict
    resolution: tuple
    values: np.ndarray          # (nx, ny) float, NaN at masked cells
    mask: np.ndarray            # (nx, ny) bool, True where masked
    which: str
    s_values: np.ndarray
    t_values: np.ndarray


def _require_green_capable(model):
    if model.family == "TorusEndo":
        return "torus"
    if model.surface == "p2":
        delta = model.algebraic_degree
        mat = model.pullback_matrix
        if mat[0][0] != delta:
            raise PreconditionError(
                "pullback degree disagrees with the lift degree",
                matrix=mat[0][0], delta=delta)
        return "p2"
    raise UnsupportedError(
        "potential series are implemented for plane and torus families",
        family=model.family)


def _check_report_level_stability(model):
    """Cheap orbit check; collisions disqualify the pullback series."""
    if "stable_report" not in model.cache:
        rep = stab.check_one_stability(model, STABILITY_REPORT_HORIZON)
        model.cache["stable_report"] = rep
    rep = model.cache["stable_report"]
    if rep.verdict.kind == "CollisionAt":
        raise PreconditionError(
            "model is not one-stable at the report level",
            collision_step=rep.verdict.n)


def gamma_plus(model, p):
    """Chart defect of the normalized pullback at one point.

    Diverges to -infinity on the indeterminacy set, where an
    IndeterminateError is raised instead.
    """
    kind = _require_green_capable(model)
    if kind == "torus":
        return 0.0
    if p.kind != "p2":
        raise PreconditionError("point does not live on the plane")
    delta = model.algebraic_degree
    lam1 = float(model.pullback_matrix[0][0])
    x, y, z = p.coords
    from .models import _eval_trivar, _lift_coeff_scale
    f0 = _eval_trivar(model.lift_monomials()[0], p.coords, 1.0 + 0j)
    f1 = _eval_trivar(model.lift_monomials()[1], p.coords, 1.0 + 0j)
    f2 = _eval_trivar(model.lift_monomials()[2], p.coords, 1.0 + 0j)
    sup = max(abs(f0), abs(f1), abs(f2))
    if sup < 1e-12 * _lift_coeff_scale(model):
        raise IndeterminateError("gamma is -infinity on the indeterminacy set",
                                 point=repr(p))
    eucl_f = math.sqrt(abs(f0) ** 2 + abs(f1) ** 2 + abs(f2) ** 2)
    eucl_p = math.sqrt(abs(x) ** 2 + abs(y) ** 2 + abs(z) ** 2)
    return (math.log(eucl_f) - delta * math.log(eucl_p)) / lam1


def green_plus(model, p, tol=1e-9, n_max=200):
    """Partial sums of the pullback potential series at one point."""
    kind = _require_green_capable(model)
    if kind == "torus":
        return GreenEvaluation(0.0, 0, 0.0, False)
    _check_report_level_stability(model)
    lam1 = float(model.pullback_matrix[0][0])
    if lam1 <= 1.0:
        raise PreconditionError("the series needs lam1 > 1", lam1=lam1)
    delta = model.algebraic_degree
    (e0, c0), (e1, c1), (e2, c2) = model.lift_arrays()
    from .models import _lift_coeff_scale
    x, y, z = p.coords
    value, n_used, tail, hit = green_orbit(
        e0, c0, e1, c1, e2, c2, delta, lam1, x, y, z,
        tol, n_max, 1e-12, _lift_coeff_scale(model))
    return GreenEvaluation(float(value), int(n_used), float(tail), bool(hit))


def functional_equation_residual(model, samples, tol=1e-9, n_max=200):
    """max |g(f p) - lam1 (g(p) - gamma(p))| over usable sample points."""
    kind = _require_green_capable(model)
    if kind == "torus":
        return 0.0
    lam1 = float(model.pullback_matrix[0][0])
    worst = None
    for p in samples:
        try:
            gp = green_plus(model, p, tol=tol, n_max=n_max)
            if gp.orbit_hit_indeterminacy:
                continue
            fp = M.evaluate(model, p)
            gfp = green_plus(model, fp, tol=tol, n_max=n_max)
            if gfp.orbit_hit_indeterminacy:
                continue
            gam = gamma_plus(model, p)
        except IndeterminateError:
            continue
        r = abs(gfp.value - lam1 * (gp.value - gam))
        worst = r if worst is None else max(worst, r)
    if worst is None:
        raise NumericalFailure("every sample hit the indeterminacy set")
    return worst


# ---------------------------------------------------------------------------
# pushforward series


def chart_potential(model, p):
    """The fixed chart potential u entering the pushforward defect.

    Evaluated on the normalized representative as
    u = (1/2) log |p|_2^2 - log |z|, which equals
    (1/2) log(1 + |x/z|^2 + |y/z|^2) without overflowing when the affine
    coordinates are astronomically large.
    """
    if model.family == "TorusEndo":
        return 0.0
    if model.surface == "p2":
        x, y, z = p.coords
        if abs(z) < 1e-150:
            raise PreconditionError("chart potential diverges at infinity",
                                    point=repr(p))
        return (0.5 * math.log(abs(x) ** 2 + abs(y) ** 2 + abs(z) ** 2)
                - math.log(abs(z)))
    raise UnsupportedError("no chart potential for this family",
                           family=model.family)


def _require_minus_capable(model):
    if model.family not in ("PolynomialSkew", "TorusEndo"):
        raise UnsupportedError(
            "pushforward series supports the skew and torus families",
            family=model.family)


@dataclass
class PreimageTree:
    levels: list        # levels[j] = list of (point, multiplicity)
    child_u: list       # child_u[j][i] = sum of mult * u over children
    truncated_at: int   # level where expansion stopped early, or -1


def build_preimage_tree(model, p, depth):
    """Backward orbit tree with multiplicities and child potential sums."""
    _require_minus_capable(model)
    if model.lambda2 ** depth > TREE_LEAF_BUDGET:
        raise BudgetError("preimage tree leaf budget exceeded",
                          lambda2=model.lambda2, depth=depth,
                          budget=TREE_LEAF_BUDGET)
    levels = [[(p, 1)]]
    child_u = []
    truncated = -1
    for j in range(depth):
        nxt = []
        sums = []
        ok = True
        for (w, mu) in levels[j]:
            try:
                kids = M.preimages(model, w)
            except (PreconditionError, DegreeDropError, NumericalFailure,
                    UnsupportedError):
                ok = False
                break
            s = 0.0
            for (v, mv) in kids:
                s += mv * chart_potential(model, v)
                nxt.append((v, mu * mv))
            sums.append(s)
        if not ok:
            truncated = j
            break
        child_u.append(sums)
        levels.append(nxt)
    return PreimageTree(levels, child_u, truncated)


@dataclass
class GreenMinusSeries:
    partials: list            # raw partial sums g_0 .. g_n
    adjusted: list            # partial sums of the offset-reduced defect
    offset: float
    flagged: bool             # tree truncated before the requested depth
    depth: int


def minus_offset(model, n_probe=400, seed=7, probe_depth=3):
    """Estimated upper bound of the pushforward chart defect.

    Probes seeded random points and a few levels of their backward orbits
    (trees reach far larger coordinates than the base points); the offset
    max(0, sup gamma_minus) makes the adjusted series monotone whenever the
    probe bound really dominates the values met along preimage trees.
    """
    _require_minus_capable(model)
    if model.family == "TorusEndo":
        return 0.0
    key = ("minus_offset", n_probe, seed, probe_depth)
    if key in model.cache:
        return model.cache[key]
    lam1 = model.lambda1()
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_probe):
        level = [M.random_point(model, rng)]
        for _ in range(probe_depth):
            nxt = []
            for q in level:
                try:
                    best = max(best, _gamma_minus(model, q, lam1))
                    nxt.extend(v for v, _ in M.preimages(model, q))
                except (PreconditionError, DegreeDropError, NumericalFailure,
                        UnsupportedError):
                    continue
            level = nxt
    model.cache[key] = best
    return best


def _gamma_minus(model, q, lam1):
    if model.family == "TorusEndo":
        return 0.0
    kids = M.preimages(model, q)
    s = sum(mv * chart_potential(model, v) for v, mv in kids)
    return s / lam1 - chart_potential(model, q)


def green_minus_series(model, p, n):
    """Raw and offset-adjusted partial sums of the pushforward series."""
    _require_minus_capable(model)
    lam1 = model.lambda1()
    if model.family == "TorusEndo":
        partials = [0.0] * (n + 1)
        return GreenMinusSeries(partials, list(partials), 0.0, False, n)
    tree = build_preimage_tree(model, p, n)
    usable = len(tree.child_u)
    flagged = tree.truncated_at >= 0
    offset = minus_offset(model)
    partials = [0.0]
    adjusted = [0.0]
    acc = 0.0
    ratio_acc = 0.0
    for j in range(usable):
        level_sum = 0.0
        for (w, mu), su in zip(tree.levels[j], tree.child_u[j]):
            gam = su / lam1 - chart_potential(model, w)
            level_sum += mu * gam
        acc += level_sum / lam1 ** j
        ratio_acc += (model.lambda2 / lam1) ** j
        partials.append(acc)
        adjusted.append(acc - offset * ratio_acc)
    return GreenMinusSeries(partials, adjusted, offset, flagged, usable)


def green_minus_partial(model, p, n):
    """The n-th partial sum of the pushforward potential series."""
    series = green_minus_series(model, p, n)
    if series.flagged:
        raise NumericalFailure(
            "preimage tree hit a point where solving is undefined",
            depth_reached=series.depth, requested=n)
    return series.partials[-1]


def pushforward_constant_levels(model, p, c, n):
    """Per-level (observed, expected) of lam1^{-j} f^j_* applied to the
    constant c; exact scaling by (lambda2/lam1)^j up to rounding."""
    _require_minus_capable(model)
    lam1 = model.lambda1()
    if model.family == "TorusEndo":
        tree_levels = [[(p, 1)]]
        for j in range(n):
            nxt = []
            for (w, mu) in tree_levels[j]:
                for (v, mv) in M.preimages(model, w):
                    nxt.append((v, mu * mv))
            tree_levels.append(nxt)
        levels = tree_levels
    else:
        tree = build_preimage_tree(model, p, n)
        if tree.truncated_at >= 0:
            raise NumericalFailure("preimage tree truncated",
                                   at=tree.truncated_at)
        levels = tree.levels
    out = []
    for j in range(len(levels)):
        mass = sum(mu for _, mu in levels[j])
        observed = c * mass / lam1 ** j
        expected = c * (model.lambda2 / lam1) ** j
        out.append((observed, expected))
    return out


# ---------------------------------------------------------------------------
# grids


def slice_points(slice_spec, resolution):
    """Sample an affine two-parameter slice.

    The slice is base + s*u + t*v with declared ranges; the kind tells how
    the resulting vectors are interpreted on the surface.
    """
    kind = slice_spec["kind"]
    nx, ny = resolution
    base = np.array([complex(*_pair(c)) for c in slice_spec["base"]])
    u = np.array([complex(*_pair(c)) for c in slice_spec["u"]])
    v = np.array([complex(*_pair(c)) for c in slice_spec["v"]])
    s0, s1 = slice_spec["s_range"]
    t0, t1 = slice_spec["t_range"]
    svals = np.linspace(s0, s1, nx)
    tvals = np.linspace(t0, t1, ny)
    dims = {"p2": 3, "torus": 2, "p1xp1": 4}[kind]
    if not (len(base) == len(u) == len(v) == dims):
        raise PreconditionError("slice vectors have the wrong length",
                                kind=kind, expected=dims)
    pts = np.empty((nx * ny, dims), dtype=complex)
    k = 0
    for i in range(nx):
        for j in range(ny):
            pts[k] = base + svals[i] * u + tvals[j] * v
            k += 1
    return svals, tvals, pts


def _pair(c):
    if isinstance(c, (list, tuple)):
        return float(c[0]), float(c[1])
    return float(c), 0.0


def _thread_count():
    raw = os.environ.get("DEGREELAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def export_grid(model, slice_spec, resolution, which="plus",
                tol=1e-9, n_max=60):
    """Evaluate a potential over a declared slice.

    Cells whose orbit hits the indeterminacy set carry NaN and a mask bit.
    Deterministic for a fixed configuration; rows may be evaluated in
    parallel (DEGREELAB_THREADS) without changing any value.
    """
    nx, ny = resolution
    if nx * ny > GRID_CELL_BUDGET:
        raise BudgetError("grid resolution budget exceeded",
                          cells=nx * ny, budget=GRID_CELL_BUDGET)
    if which not in ("plus", "minus"):
        raise PreconditionError("which must be 'plus' or 'minus'", got=which)
    kind = slice_spec["kind"]
    if kind != model.surface:
        raise PreconditionError("slice does not live on the model surface",
                                slice=kind, model=model.surface)
    svals, tvals, pts = slice_points(slice_spec, resolution)

    if model.family == "TorusEndo":
        values = np.zeros((nx, ny))
        mask = np.zeros((nx, ny), dtype=bool)
        return GreenGrid(dict(slice_spec), (nx, ny), values, mask, which,
                         svals, tvals)

    if which == "plus":
        _require_green_capable(model)
        _check_report_level_stability(model)
        delta = model.algebraic_degree
        lam1 = float(model.pullback_matrix[0][0])
        (e0, c0), (e1, c1), (e2, c2) = model.lift_arrays()
        from .models import _lift_coeff_scale
        scale = _lift_coeff_scale(model)

        def run_chunk(chunk):
            return green_grid(e0, c0, e1, c1, e2, c2, delta, lam1, chunk,
                              tol, n_max, 1e-12, scale)

        workers = _thread_count()
        if workers > 1 and pts.shape[0] > workers:
            chunks = np.array_split(pts, workers)
            with concurrent.futures.ThreadPoolExecutor(workers) as ex:
                parts = list(ex.map(run_chunk, chunks))
            values = np.concatenate([p[0] for p in parts])
            hits = np.concatenate([p[3] for p in parts])
        else:
            values, _, _, hits = run_chunk(pts)
        values = values.astype(float).reshape(nx, ny)
        mask = hits.astype(bool).reshape(nx, ny)
        values[mask] = np.nan
        return GreenGrid(dict(slice_spec), (nx, ny), values, mask, which,
                         svals, tvals)

    # pushforward grid
    _require_minus_capable(model)
    depth = n_max
    while model.lambda2 ** depth > TREE_LEAF_BUDGET:
        depth -= 1
    values = np.empty((nx, ny))
    mask = np.zeros((nx, ny), dtype=bool)
    k = 0
    for i in range(nx):
        for j in range(ny):
            p = M.proj_point(pts[k])
            k += 1
            try:
                series = green_minus_series(model, p, depth)
                if series.flagged:
                    raise NumericalFailure("truncated")
                values[i, j] = series.partials[-1]
            except (NumericalFailure, PreconditionError, BudgetError,
                    DegreeDropError):
                values[i, j] = np.nan
                mask[i, j] = True
    return GreenGrid(dict(slice_spec), (nx, ny), values, mask, which,
                     svals, tvals)


def grid_to_csv(grid):
    """Row-major x,y,value CSV body with 17-significant-digit floats."""
    lines = ["x,y,value"]
    nx, ny = grid.resolution
    for i in range(nx):
        for j in range(ny):
            v = grid.values[i, j]
            vtxt = "NaN" if np.isnan(v) else format(float(v), ".17g")
            lines.append(f"{format(float(grid.s_values[i]), '.17g')},"
                         f"{format(float(grid.t_values[j]), '.17g')},{vtxt}")
    return "\n".join(lines) + "\n"

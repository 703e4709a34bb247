"""Pure Python orbit kernels.

Reference implementation of the hot loops; the compiled Cython kernel
mirrors the exact operation order so the two backends agree to rounding.
"""

import math

import numpy as np

BACKEND_NAME = "python"


def _eval_component(exps, coefs, xp, yp, zp):
    acc = 0j
    for k in range(len(coefs)):
        acc += coefs[k] * xp[exps[k, 0]] * yp[exps[k, 1]] * zp[exps[k, 2]]
    return acc


def _powers(v, n):
    out = [1.0 + 0j] * (n + 1)
    for k in range(1, n + 1):
        out[k] = out[k - 1] * v
    return out


def green_orbit(e0, c0, e1, c1, e2, c2, delta, lam1, x, y, z,
                tol, n_max, ind_tol, coeff_scale):
    """Partial sums of the pullback potential series along one orbit.

    Returns (value, n_used, tail_bound, hit_indeterminacy).  The point is
    renormalized to unit sup norm every step, so arbitrarily long orbits
    stay in range.
    """
    x, y, z = complex(x), complex(y), complex(z)
    m = max(abs(x), abs(y), abs(z))
    x, y, z = x / m, y / m, z / m
    total = 0.0
    w = 1.0
    sup_g = 0.0
    tail = math.inf
    n_used = 0
    hit = False
    thresh = ind_tol * coeff_scale
    for n in range(n_max):
        xp = _powers(x, delta)
        yp = _powers(y, delta)
        zp = _powers(z, delta)
        f0 = _eval_component(e0, c0, xp, yp, zp)
        f1 = _eval_component(e1, c1, xp, yp, zp)
        f2 = _eval_component(e2, c2, xp, yp, zp)
        m = max(abs(f0), abs(f1), abs(f2))
        if m < thresh:
            return total, n_used, 0.0, True
        eucl_f = math.sqrt(abs(f0) ** 2 + abs(f1) ** 2 + abs(f2) ** 2)
        eucl_p = math.sqrt(abs(x) ** 2 + abs(y) ** 2 + abs(z) ** 2)
        gamma = (math.log(eucl_f) - delta * math.log(eucl_p)) / lam1
        total += w * gamma
        ag = abs(gamma)
        if ag > sup_g:
            sup_g = ag
        w /= lam1
        x, y, z = f0 / m, f1 / m, f2 / m
        n_used = n + 1
        tail = sup_g * w / (1.0 - 1.0 / lam1)
        if tail < tol:
            break
    return total, n_used, tail, hit


def green_grid(e0, c0, e1, c1, e2, c2, delta, lam1, pts,
               tol, n_max, ind_tol, coeff_scale):
    """Vector of green_orbit results over an (N, 3) array of lift points."""
    n = pts.shape[0]
    values = np.empty(n, dtype=np.float64)
    n_used = np.empty(n, dtype=np.int64)
    tails = np.empty(n, dtype=np.float64)
    hits = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        v, nu, t, h = green_orbit(e0, c0, e1, c1, e2, c2, delta, lam1,
                                  pts[i, 0], pts[i, 1], pts[i, 2],
                                  tol, n_max, ind_tol, coeff_scale)
        values[i] = v
        n_used[i] = nu
        tails[i] = t
        hits[i] = 1 if h else 0
    return values, n_used, tails, hits

"""Polynomial root finding for preimage solving.

Roots come from the balanced companion matrix (numpy), get one residual
polish step, and are clustered into multiplicities with a configurable
radius.
"""

import numpy as np

from .errors import DegreeDropError, NumericalFailure

CLUSTER_RADIUS = 1e-7


def roots_with_multiplicity(coeffs, cluster_radius=CLUSTER_RADIUS,
                            drop_tol=1e-12, lead_scale=None):
    """Roots of a little-endian complex-coefficient polynomial.

    Returns a list of (root, multiplicity).  A vanished leading coefficient
    raises DegreeDropError naming the dropped degree.  ``lead_scale`` is the
    generic magnitude of the leading coefficient (computable by the caller
    from the unevaluated coefficient polynomial); without it the maximum
    coefficient modulus is used, which can misfire when legitimate roots
    are astronomically large.
    """
    c = [complex(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    if not c:
        raise NumericalFailure("zero polynomial has no isolated roots")
    if not all(_finite(x) for x in c):
        raise NumericalFailure("coefficients overflowed the float range")
    scale = lead_scale if lead_scale is not None else max(abs(x) for x in c)
    nominal_degree = len(coeffs) - 1
    degree = len(c) - 1
    if degree < nominal_degree:
        raise DegreeDropError(
            "leading coefficient vanished after substitution",
            nominal_degree=nominal_degree, actual_degree=degree)
    if abs(c[-1]) < drop_tol * scale:
        raise DegreeDropError(
            "leading coefficient is numerically degenerate",
            nominal_degree=nominal_degree, leading=abs(c[-1]),
            lead_scale=scale)
    if degree == 0:
        return []

    rts = np.roots(list(reversed(c)))
    if not np.all(np.isfinite(rts)):
        raise NumericalFailure("companion eigenvalues did not converge")

    dc = [k * c[k] for k in range(1, len(c))]
    polished = []
    for r in rts:
        p = _horner(c, r)
        dp = _horner(dc, r)
        if dp != 0:
            step = p / dp
            if abs(step) < 1e-2 * max(1.0, abs(r)):
                r = r - step
        polished.append(r)

    clusters = []  # [center, count]
    for r in sorted(polished, key=lambda z: (z.real, z.imag)):
        for cl in clusters:
            if abs(r - cl[0]) <= cluster_radius * max(1.0, abs(cl[0])):
                cl[0] = (cl[0] * cl[1] + r) / (cl[1] + 1)
                cl[1] += 1
                break
        else:
            clusters.append([r, 1])
    return [(complex(center), count) for center, count in clusters]


def _horner(coeffs, x):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _finite(z):
    return (abs(z.real) != float("inf") and abs(z.imag) != float("inf")
            and z == z)

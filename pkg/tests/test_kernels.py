import math

import numpy as np
import pytest

from degreelab._kernels import available_backends, backend_module
from degreelab.models import _lift_coeff_scale


def kernel_args(model):
    (e0, c0), (e1, c1), (e2, c2) = model.lift_arrays()
    return (e0, c0, e1, c1, e2, c2, model.algebraic_degree,
            float(model.pullback_matrix[0][0]))


def test_python_backend_reference_value(squaring):
    mod = backend_module("python")
    args = kernel_args(squaring)
    v, n, tail, hit = mod.green_orbit(*args, 1, 1, 1, 0.0, 40, 1e-12, 3.0)
    assert abs(v - (-math.log(3) / 2)) < 1e-9
    assert n == 40 and not hit


@pytest.mark.skipif("compiled" not in available_backends(),
                    reason="compiled kernel not built")
def test_backends_agree_pointwise(squaring, skew3):
    py = backend_module("python")
    cy = backend_module("compiled")
    rng = np.random.default_rng(3)
    for model in (squaring, skew3):
        args = kernel_args(model)
        scale = _lift_coeff_scale(model)
        for _ in range(50):
            x, y = (complex(rng.standard_normal(), rng.standard_normal())
                    for _ in range(2))
            a = py.green_orbit(*args, x, y, 1.0, 1e-10, 60, 1e-12, scale)
            b = cy.green_orbit(*args, x, y, 1.0, 1e-10, 60, 1e-12, scale)
            assert abs(a[0] - b[0]) < 1e-12
            assert a[1] == b[1]
            assert a[3] == b[3]


@pytest.mark.skipif("compiled" not in available_backends(),
                    reason="compiled kernel not built")
def test_backends_agree_on_grid(squaring):
    from degreelab.currents import slice_points
    py = backend_module("python")
    cy = backend_module("compiled")
    spec = {"kind": "p2", "base": [0, 0, 1], "u": [1, 0, 0], "v": [0, 1, 0],
            "s_range": [-2, 2], "t_range": [-2, 2]}
    _, _, pts = slice_points(spec, (12, 12))
    args = kernel_args(squaring)
    va, _, _, ha = py.green_grid(*args, pts, 1e-10, 40, 1e-12, 3.0)
    vb, _, _, hb = cy.green_grid(*args, pts, 1e-10, 40, 1e-12, 3.0)
    assert np.allclose(va, vb, atol=1e-12, equal_nan=True)
    assert np.array_equal(ha, hb)


@pytest.mark.skipif("compiled" not in available_backends(),
                    reason="compiled kernel not built")
def test_compiled_degree_cap():
    cy = backend_module("compiled")
    e = np.zeros((1, 3), dtype=np.int64)
    c = np.ones(1, dtype=complex)
    with pytest.raises(ValueError):
        cy.green_orbit(e, c, e, c, e, c, 100, 2.0, 1, 1, 1, 0.0, 5, 1e-12, 1.0)


def test_indeterminacy_detection_both_backends(skew2):
    args = kernel_args(skew2)
    scale = _lift_coeff_scale(skew2)
    for name in available_backends():
        mod = backend_module(name)
        v, n, tail, hit = mod.green_orbit(*args, 1.0, 0.0, 0.0, 0.0, 10,
                                          1e-12, scale)
        assert hit and n == 0 and v == 0.0 and tail == 0.0

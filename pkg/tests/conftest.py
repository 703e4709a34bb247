import pytest

from degreelab import models as M


@pytest.fixture(scope="session")
def skew2():
    # Q = y^2 + x: degree 2, top x-power 1
    return M.build_model("PolynomialSkew", {"q_coeffs": [[0, 0, 1], [1]]})


@pytest.fixture(scope="session")
def skew3():
    # Q = y^3 + x^2: degree 3, top x-power 2
    return M.build_model("PolynomialSkew", {"q_coeffs": [[0, 0, 0, 1], [0], [1]]})


@pytest.fixture(scope="session")
def secant_z2():
    return M.build_model("Secant", {"p_coeffs": [-1, 0, 1]})


@pytest.fixture(scope="session")
def secant_z3():
    # P = z^3 - z
    return M.build_model("Secant", {"p_coeffs": [0, -1, 0, 1]})


@pytest.fixture(scope="session")
def torus_d2():
    # A = [[0, 1], [2, 2]]
    return M.build_model("TorusEndo", {"matrix": [[[0, 0], [1, 0]],
                                                  [[2, 0], [2, 0]]]})


@pytest.fixture(scope="session")
def torus_2i():
    return M.build_model("TorusEndo", {"matrix": [[[2, 0], [0, 0]],
                                                  [[0, 0], [2, 0]]]})


@pytest.fixture(scope="session")
def squaring():
    return M.build_model("CremonaComposite",
                         {"factors": [{"kind": "power", "exponent": 2}]})


@pytest.fixture(scope="session")
def sigma():
    return M.build_model("CremonaComposite", {"factors": [{"kind": "sigma"}]})


@pytest.fixture(scope="session")
def identity_map():
    return M.build_model(
        "CremonaComposite",
        {"factors": [{"kind": "linear",
                      "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}]})

"""Exact arithmetic helpers: Gaussian rationals and small rational matrices.

Matrices are nested tuples of :class:`fractions.Fraction`; everything here
is exact.  Ranks stay tiny (at most 4), so no attempt is made to be fast.
"""

from fractions import Fraction

from .errors import SingularPairingError


class QC:
    """A Gaussian rational: re + im*i with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def from_value(cls, v):
        """Coerce an exact value (int, Fraction, QC, [re, im] of exact) or
        return None when the value is not exactly representable."""
        if isinstance(v, bool):
            return None
        if isinstance(v, QC):
            return v
        if isinstance(v, (int, Fraction)):
            return cls(v)
        if isinstance(v, (list, tuple)) and len(v) == 2:
            re, im = v
            if (isinstance(re, (int, Fraction)) and not isinstance(re, bool)
                    and isinstance(im, (int, Fraction)) and not isinstance(im, bool)):
                return cls(re, im)
        return None

    def __add__(self, o):
        return QC(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return QC(self.re - o.re, self.im - o.im)

    def __neg__(self):
        return QC(-self.re, -self.im)

    def __mul__(self, o):
        return QC(self.re * o.re - self.im * o.im,
                  self.re * o.im + self.im * o.re)

    def __truediv__(self, o):
        n = o.norm2()
        if n == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return QC((self.re * o.re + self.im * o.im) / n,
                  (self.im * o.re - self.re * o.im) / n)

    def conj(self):
        return QC(self.re, -self.im)

    def norm2(self):
        return self.re * self.re + self.im * self.im

    def is_zero(self):
        return self.re == 0 and self.im == 0

    def __eq__(self, o):
        return isinstance(o, QC) and self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(self.re, self.im)

    def __repr__(self):
        return f"QC({self.re}, {self.im})"

    def bit_size(self):
        """Rough size of the representation, used for exact-orbit budgets."""
        return (self.re.numerator.bit_length() + self.re.denominator.bit_length()
                + self.im.numerator.bit_length() + self.im.denominator.bit_length())


QC_ZERO = QC(0)
QC_ONE = QC(1)


def frac_matrix(rows):
    """Nested-sequence input -> tuple of tuples of Fraction."""
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def mat_shape(m):
    return len(m), len(m[0]) if m else 0


def mat_mul(a, b):
    n, k = mat_shape(a)
    k2, p = mat_shape(b)
    if k != k2:
        raise SingularPairingError("matrix shape mismatch", left=(n, k), right=(k2, p))
    return tuple(tuple(sum(a[i][t] * b[t][j] for t in range(k)) for j in range(p))
                 for i in range(n))


def mat_vec(m, v):
    return tuple(sum(m[i][j] * v[j] for j in range(len(v))) for i in range(len(m)))


def mat_transpose(m):
    n, k = mat_shape(m)
    return tuple(tuple(m[i][j] for i in range(n)) for j in range(k))


def mat_identity(n):
    return tuple(tuple(Fraction(1 if i == j else 0) for j in range(n)) for i in range(n))


def mat_sub(a, b):
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(m, c):
    c = Fraction(c)
    return tuple(tuple(c * x for x in row) for row in m)


def mat_inverse(m):
    """Exact inverse by Gauss-Jordan elimination."""
    n, k = mat_shape(m)
    if n != k:
        raise SingularPairingError("inverse of non-square matrix", shape=(n, k))
    aug = [list(row) + [Fraction(1 if i == j else 0) for j in range(n)]
           for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularPairingError("singular matrix has no inverse", column=col)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


def column_hnf(mat):
    """Triangularize an integer matrix by unimodular column operations.

    Returns a lower-triangular matrix H with positive diagonal such that
    the columns of H span the same sublattice of Z^n as the columns of the
    input.  Requires the input to be square and nonsingular.
    """
    n = len(mat)
    h = [list(map(int, row)) for row in mat]

    def swap_cols(j, k):
        for i in range(n):
            h[i][j], h[i][k] = h[i][k], h[i][j]

    def addmul_col(j, k, q):
        # col_j += q * col_k
        for i in range(n):
            h[i][j] += q * h[i][k]

    for i in range(n):
        # Euclidean elimination on row i over columns i..n-1.
        while True:
            nonzero = [j for j in range(i, n) if h[i][j] != 0]
            if not nonzero:
                raise SingularPairingError("singular integer matrix", row=i)
            jmin = min(nonzero, key=lambda j: abs(h[i][j]))
            if jmin != i:
                swap_cols(i, jmin)
            done = True
            for j in range(i + 1, n):
                if h[i][j] != 0:
                    q = h[i][j] // h[i][i]
                    addmul_col(j, i, -q)
                    if h[i][j] != 0:
                        done = False
            if done:
                break
        if h[i][i] < 0:
            for r in range(n):
                h[r][i] = -h[r][i]
    return [row[:] for row in h]


def rational_row_space(vectors):
    """Reduced row echelon basis of the span of rational vectors (exact)."""
    rows = [list(map(Fraction, v)) for v in vectors]
    if not rows:
        return ()
    n = len(rows[0])
    basis = []
    for vec in rows:
        v = list(vec)
        for b in basis:
            piv = next(j for j, x in enumerate(b) if x != 0)
            if v[piv] != 0:
                f = v[piv] / b[piv]
                v = [x - f * y for x, y in zip(v, b)]
        if any(x != 0 for x in v):
            piv = next(j for j, x in enumerate(v) if x != 0)
            inv = Fraction(1) / v[piv]
            basis.append([x * inv for x in v])
    # back-substitute for a canonical reduced basis
    basis.sort(key=lambda b: next(j for j, x in enumerate(b) if x != 0))
    for i in range(len(basis)):
        for k in range(len(basis)):
            if k == i:
                continue
            piv = next(j for j, x in enumerate(basis[i]) if x != 0)
            if basis[k][piv] != 0:
                f = basis[k][piv]
                basis[k] = [x - f * y for x, y in zip(basis[k], basis[i])]
    return tuple(tuple(b) for b in basis)


def poly_eval_at_float(coeffs, x):
    """Evaluate a little-endian exact-coefficient polynomial at a float."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + float(c)
    return acc


def poly_derivative(coeffs):
    """Little-endian derivative coefficients."""
    return [c * k for k, c in enumerate(coeffs)][1:] or [type(coeffs[0])(0)]

"""Generators for the reference graded polynomial families.

These are the independent oracles the compilations are verified against.
Variable naming schemes (stable, used by projections and golden files):

  P        x1 .. xn
  Q        xi_j            (i-th summand, j-th position, 1-based)
  C        x1 .. xn
  IMM      xi_j_k          (row i, column j, factor k; boundary factors are
                            the 1 x n row (k=1) and the n x 1 column (k=d))
  nceGeneric / nceL
           xa_b_i          (entry (a,b) of the i-th factor; nceL omits a=b)
  E        xi_r_c          (off-diagonal entry (r,c) of the i-th factor)

Elementary-symmetric-type families with d > n are zero (empty index set);
nceL, nceGeneric and C return 1 at degree 0 (empty-product convention).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

from .poly import Coeff, Polynomial

FAMILY_TAGS = ("IMM", "nceGeneric", "nceL", "Ccomb", "Cmatrix", "C", "E", "P", "Q")


class InvalidParameters(ValueError):
    pass


Matrix = List[List[Polynomial]]


def _zeros(k: int) -> Matrix:
    return [[Polynomial.zero() for _ in range(k)] for _ in range(k)]


def _identity(k: int) -> Matrix:
    m = _zeros(k)
    for i in range(k):
        m[i][i] = Polynomial.const(1)
    return m


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    k = len(a)
    out = _zeros(k)
    for i in range(k):
        for j in range(k):
            acc = Polynomial.zero()
            for t in range(k):
                if a[i][t].is_zero() or b[t][j].is_zero():
                    continue
                acc = acc + a[i][t] * b[t][j]
            out[i][j] = acc
    return out


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    k = len(a)
    return [[a[i][j] + b[i][j] for j in range(k)] for i in range(k)]


def nce_matrices(factors: Sequence[Matrix], d: int) -> Matrix:
    """Noncommutative elementary symmetric polynomial of matrix arguments.

    Sum over increasing index sequences I_1 < ... < I_d of X_{I_1} ... X_{I_d},
    computed by one left-to-right dynamic-programming sweep.
    """
    if d < 0:
        raise InvalidParameters("degree must be nonnegative")
    if not factors:
        k = 1
    else:
        k = len(factors[0])
    dp: List[Matrix] = [_identity(k)] + [_zeros(k) for _ in range(d)]
    for X in factors:
        for j in range(min(d, len(factors)), 0, -1):
            dp[j] = mat_add(dp[j], mat_mul(dp[j - 1], X))
    return dp[d]


def _var(*idx: int) -> Polynomial:
    return Polynomial.variable("x" + "_".join(str(i) for i in idx))


def gen_P(n: int, d: int) -> Polynomial:
    _check(n, d)
    out = Polynomial.zero()
    for i in range(1, n + 1):
        out = out + _var(i) ** d
    return out


def gen_Q(n: int, d: int) -> Polynomial:
    _check(n, d)
    out = Polynomial.zero()
    for i in range(1, n + 1):
        term = Polynomial.const(1)
        for j in range(1, d + 1):
            term = term * _var(i, j)
        out = out + term
    return out


def gen_IMM(n: int, d: int) -> Polynomial:
    _check(n, d)
    if d < 2:
        raise InvalidParameters("IMM needs degree >= 2 (row times column)")
    # row vector (k=1), square factors (k=2..d-1), column vector (k=d)
    row = [_var(1, j, 1) for j in range(1, n + 1)]
    for k in range(2, d):
        new = [Polynomial.zero() for _ in range(n)]
        for j in range(n):
            acc = Polynomial.zero()
            for i in range(n):
                acc = acc + row[i] * _var(i + 1, j + 1, k)
            new[j] = acc
        row = new
    out = Polynomial.zero()
    for i in range(n):
        out = out + row[i] * _var(i + 1, 1, d)
    return out


def gen_C_comb(n: int, d: int) -> Polynomial:
    """Parity-alternating elementary symmetric polynomial, by enumeration.

    Sum of x_{i_1} ... x_{i_d} over increasing sequences with i_j == j (mod 2).
    """
    _check(n, d)
    if d == 0:
        return Polynomial.const(1)
    out = Polynomial.zero()

    def extend(prefix: List[int], j: int):
        nonlocal out
        if j > d:
            term = Polynomial.const(1)
            for i in prefix:
                term = term * _var(i)
            out = out + term
            return
        start = prefix[-1] + 1 if prefix else 1
        for i in range(start, n + 1):
            if i % 2 == j % 2:
                extend(prefix + [i], j + 1)

    extend([], 1)
    return out


def _parity_factor(i: int) -> Matrix:
    x = _var(i)
    if i % 2 == 1:  # odd index: upper-triangular shape
        return [[Polynomial.zero(), x], [Polynomial.zero(), Polynomial.zero()]]
    return [[Polynomial.zero(), Polynomial.zero()], [x, Polynomial.zero()]]


def gen_C_matrix(n: int, d: int) -> Polynomial:
    """The same family through its 2x2 matrix-word definition: the word of
    parity-shaped factors fed to the noncommutative elementary symmetric
    polynomial; the value is the sum of the two top entries."""
    _check(n, d)
    if d == 0:
        return Polynomial.const(1)
    A = nce_matrices([_parity_factor(i) for i in range(1, n + 1)], d)
    return A[0][0] + A[0][1]


def gen_nce_generic(n: int, d: int) -> Polynomial:
    """Sum of all 9 entries of the elementary symmetric polynomial in n
    generic 3x3 matrices (9 fresh variables each)."""
    _check(n, d)
    if d == 0:
        return Polynomial.const(1)
    factors = [
        [[_var(a, b, i) for b in range(1, 4)] for a in range(1, 4)]
        for i in range(1, n + 1)
    ]
    A = nce_matrices(factors, d)
    out = Polynomial.zero()
    for r in range(3):
        for c in range(3):
            out = out + A[r][c]
    return out


LWeights = Sequence[Sequence[Union[Coeff, int, Fraction]]]


def L_sum() -> LWeights:
    return [[1] * 3 for _ in range(3)]


def L_trace() -> LWeights:
    return [[1 if r == c else 0 for c in range(3)] for r in range(3)]


def L_entry(i: int, j: int) -> LWeights:
    return [[1 if (r, c) == (i - 1, j - 1) else 0 for c in range(3)] for r in range(3)]


def zero_diag_factor(i: int) -> Matrix:
    return [
        [
            Polynomial.zero() if a == b else _var(a, b, i)
            for b in range(1, 4)
        ]
        for a in range(1, 4)
    ]


def apply_L(A: Matrix, weights: LWeights) -> Polynomial:
    out = Polynomial.zero()
    for r in range(len(A)):
        for c in range(len(A)):
            w = weights[r][c]
            if not isinstance(w, Coeff):
                w = Coeff.from_rational(w)
            if not w.is_zero():
                out = out + A[r][c].scale(w)
    return out


def gen_nce_L(n: int, d: int, weights: LWeights | None = None) -> Polynomial:
    """L applied to the elementary symmetric polynomial in n zero-diagonal
    3x3 matrices of 6 fresh variables each; degree 0 is fixed to 1."""
    _check(n, d)
    if d == 0:
        return Polynomial.const(1)
    A = nce_matrices([zero_diag_factor(i) for i in range(1, n + 1)], d)
    return apply_L(A, weights if weights is not None else L_sum())


def gen_E(n: int, d: int) -> Polynomial:
    """Homogeneous degree-d part of the sum of the entries of the product of
    n all-ones-diagonal 3x3 factors, minus the identity."""
    _check(n, d)
    prod = _identity(3)
    for i in range(1, n + 1):
        factor = [
            [
                Polynomial.const(1) if r == c else _var(i, r + 1, c + 1)
                for c in range(3)
            ]
            for r in range(3)
        ]
        prod = mat_mul(prod, factor)
    total = Polynomial.zero()
    for r in range(3):
        for c in range(3):
            total = total + prod[r][c]
    total = total - Polynomial.const(3)  # subtract the identity's entry sum
    return total.homog_component(d)


@dataclass
class FamilySpec:
    tag: str
    n: int
    d: int
    weights: Optional[LWeights] = None

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise InvalidParameters(f"unknown family tag {self.tag!r}")


def _check(n: int, d: int):
    if n < 1 or d < 0:
        raise InvalidParameters(f"need n >= 1 and d >= 0, got n={n}, d={d}")


def gen_family(spec: FamilySpec) -> Polynomial:
    tag, n, d = spec.tag, spec.n, spec.d
    if tag == "P":
        return gen_P(n, d)
    if tag == "Q":
        return gen_Q(n, d)
    if tag == "IMM":
        return gen_IMM(n, d)
    if tag in ("C", "Ccomb"):
        return gen_C_comb(n, d)
    if tag == "Cmatrix":
        return gen_C_matrix(n, d)
    if tag == "nceGeneric":
        return gen_nce_generic(n, d)
    if tag == "nceL":
        return gen_nce_L(n, d, spec.weights)
    if tag == "E":
        return gen_E(n, d)
    raise InvalidParameters(tag)  # pragma: no cover


def varphi_combine(
    gen: Callable[[int, int], Polynomial],
    a: Callable[[int, int], Union[int, Fraction, Coeff]],
    m: Callable[[int], int],
    d: Callable[[int], int],
    n: int,
) -> Polynomial:
    """The associated ungraded family: sum over i <= d(n) of a(n,i) * gen(m(n), i)."""
    out = Polynomial.zero()
    for i in range(0, d(n) + 1):
        coeff = a(n, i)
        if not isinstance(coeff, Coeff):
            coeff = Coeff.from_rational(coeff)
        if coeff.is_zero():
            continue
        out = out + gen(m(n), i).scale(coeff)
    return out

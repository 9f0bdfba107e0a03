"""Compilers from formulas to matrix words and projections.

Three constructions are provided:

* ``compile_offdiag3`` — exact 3x3 words: the product of ``id + A_i`` factors
  equals ``id + f * E(i,j)`` with homogeneous linear entries;
* ``compile_trace3`` — 3x3 border words read off through a diagonal
  functional: the eps-limit of ``scalar * (product - id)`` recovers
  ``f * (E(1,1) - E(2,2))``.  Because every factor is unipotent the product
  has determinant 1, so the eps^2 coefficient is trace-free and the plain
  trace functional provably recovers 0; the word therefore targets the
  (1,1) entry;
* ``compile_continuant_odd`` / ``compile_continuant_even`` — 2x2 words of
  strictly alternating upper/lower factors whose parity-alternating
  elementary-symmetric value border-computes the target polynomial, returned
  directly as a ``Projection`` onto the ``C`` family.

Scalars never pass through cube roots: rational gate tags are threaded
through the formal ``alpha`` parameter and eliminated by the final
``alpha -> 1`` (odd case) or ``alpha -> +-eps`` (even case) substitution.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .circuit import Circuit, FNode, circuit_to_tree, tree_to_circuit, GradedArity3Repr
from .families import gen_C_comb, gen_nce_L, LWeights
from .poly import (
    COEFF_ONE,
    COEFF_ZERO,
    Coeff,
    LinearForm,
    Polynomial,
    format_coeff,
    format_poly,
    parse_coeff,
    parse_poly,
    _var_key,
)

DEFAULT_MAX_K = 4096


class NotIHL(ValueError):
    pass


class NotFormula(ValueError):
    pass


class NotOddDegree(ValueError):
    pass


class NotEvenDegree(ValueError):
    pass


class PrecisionExhausted(RuntimeError):
    pass


class DiagonalNonzero(ValueError):
    pass


def _max_k() -> int:
    return int(os.environ.get("HOMLIN_MAX_K", DEFAULT_MAX_K))


# exact-expansion re-verification of the eps-precision congruence is run only
# for words up to this many factors; longer words rely on the proven
# exponent-accounting bound for k (see the negcube case)
DEFAULT_EXACT_CHECK_MAX = 120


def _exact_check_max() -> int:
    return int(os.environ.get("HOMLIN_EXACT_CHECK_MAX", DEFAULT_EXACT_CHECK_MAX))


# ---------------------------------------------------------------------------
# word and projection types
# ---------------------------------------------------------------------------

Matrix = List[List[Polynomial]]

# target is ("entry", i, j) | ("trace",) | ("functional", weights row-major)
Target = Tuple


def entry_target(i: int, j: int) -> Target:
    return ("entry", i, j)


def trace_target() -> Target:
    return ("trace",)


@dataclass
class MatrixWord:
    """A product of ``id + A_i`` factors with a designated read-out.

    Entries of each ``A_i`` are affine in the x-variables over the Laurent
    coefficient ring (homogeneous linear everywhere except the documented
    degree-one corner case of the diagonal-functional compiler, which injects
    a constant eps power)."""

    dim: int
    factors: List[Matrix]
    global_scalar: Coeff = field(default_factory=lambda: COEFF_ONE)
    target: Target = ("trace",)

    def r(self) -> int:
        return len(self.factors)


@dataclass
class Projection:
    """A homogeneous linear (border) projection of a reference family."""

    family_tag: str  # "C" | "nceL"
    n: int
    d: int
    forms: List[LinearForm]
    scalar: Coeff = field(default_factory=lambda: COEFF_ONE)
    border: bool = True
    weights: Optional[LWeights] = None  # nceL functional

    def family_poly(self) -> Polynomial:
        if self.family_tag == "C":
            return gen_C_comb(self.n, self.d)
        if self.family_tag == "nceL":
            return gen_nce_L(self.n, self.d, self.weights)
        raise ValueError(f"unknown family tag {self.family_tag!r}")

    def slot_names(self) -> List[str]:
        if self.family_tag == "C":
            return [f"x{i}" for i in range(1, self.n + 1)]
        return [
            f"x{a}_{b}_{i}"
            for i in range(1, self.n + 1)
            for a in range(1, 4)
            for b in range(1, 4)
            if a != b
        ]

    def value(self) -> Polynomial:
        """The projected family value, scaled.

        Evaluated directly on the substituted forms (matrix product for the
        parity-alternating family, elementary-symmetric matrix recurrence for
        the zero-diagonal family) rather than by substituting into the
        monomial expansion, whose size explodes with the slot count; the two
        routes agree and are cross-checked on small instances in the tests.
        """
        if self.family_tag == "C":
            return _c_family_value(self.forms, self.d).scale(self.scalar)
        if self.family_tag == "nceL":
            from .families import apply_L, nce_matrices, L_sum

            factors = []
            it = iter(self.forms)
            for _ in range(self.n):
                entries = {
                    (a, b): next(it)
                    for a in range(1, 4)
                    for b in range(1, 4)
                    if a != b
                }
                factors.append(
                    [
                        [
                            entries[(a, b)].to_poly()
                            if a != b
                            else Polynomial.zero()
                            for b in range(1, 4)
                        ]
                        for a in range(1, 4)
                    ]
                )
            val = apply_L(
                nce_matrices(factors, self.d),
                self.weights if self.weights is not None else L_sum(),
            )
            return val.scale(self.scalar)
        sigma = dict(zip(self.slot_names(), self.forms))
        return self.family_poly().substitute(sigma).scale(self.scalar)

    def value_by_substitution(self) -> Polynomial:
        """Reference route: substitute forms into the family's monomial
        expansion; exponential in the slot count, for cross-checks only."""
        sigma = dict(zip(self.slot_names(), self.forms))
        return self.family_poly().substitute(sigma).scale(self.scalar)


def _c_family_value(forms: Sequence[LinearForm], d: int) -> Polynomial:
    """Parity-alternating elementary-symmetric value on the given forms,
    via the degree-graded 2x2 matrix recurrence."""
    from .families import nce_matrices

    if d == 0:
        return Polynomial.const(1)
    zero = Polynomial.zero()
    factors = []
    for idx, lf in enumerate(forms, start=1):
        p = lf.to_poly()
        if idx % 2 == 1:
            factors.append([[zero, p], [zero, zero]])
        else:
            factors.append([[zero, zero], [p, zero]])
    a = nce_matrices(factors, d)
    return a[0][0] + a[0][1]


def _identity(dim: int) -> Matrix:
    return [
        [Polynomial.const(1) if i == j else Polynomial.zero() for j in range(dim)]
        for i in range(dim)
    ]


def _zeros(dim: int) -> Matrix:
    return [[Polynomial.zero() for _ in range(dim)] for _ in range(dim)]


def _mat_mul(a: Matrix, b: Matrix) -> Matrix:
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


def expand_word(w: MatrixWord) -> Matrix:
    """Exact product of the ``id + A_i`` factors."""
    acc = _identity(w.dim)
    for a in w.factors:
        factor = [
            [
                a[i][j] + (Polynomial.const(1) if i == j else Polynomial.zero())
                for j in range(w.dim)
            ]
            for i in range(w.dim)
        ]
        acc = _mat_mul(acc, factor)
    return acc


def apply_target(m: Matrix, target: Target, dim: int) -> Polynomial:
    if target[0] == "entry":
        return m[target[1] - 1][target[2] - 1]
    if target[0] == "trace":
        out = Polynomial.zero()
        for i in range(dim):
            out = out + m[i][i]
        return out
    if target[0] == "functional":
        weights = target[1]
        out = Polynomial.zero()
        for i in range(dim):
            for j in range(dim):
                wgt = weights[i * dim + j]
                if not isinstance(wgt, Coeff):
                    wgt = Coeff.from_rational(wgt)
                if not wgt.is_zero():
                    out = out + m[i][j].scale(wgt)
        return out
    raise ValueError(f"unknown target {target!r}")


def border_value(obj: Union[MatrixWord, Projection]) -> Polynomial:
    """Scalar times functional of (product - id), before any eps-limit."""
    if isinstance(obj, Projection):
        return obj.value()
    m = expand_word(obj)
    for i in range(obj.dim):
        m[i][i] = m[i][i] - Polynomial.const(1)
    return apply_target(m, obj.target, obj.dim).scale(obj.global_scalar)


def transpose_reverse(w: MatrixWord) -> MatrixWord:
    """Reverse the word and transpose each factor; expansion transposes."""
    factors = [
        [[a[j][i] for j in range(w.dim)] for i in range(w.dim)]
        for a in reversed(w.factors)
    ]
    return MatrixWord(w.dim, factors, w.global_scalar, w.target)


# ---------------------------------------------------------------------------
# coefficient-ring helpers
# ---------------------------------------------------------------------------


def _coeff_subst_eps_power(c: Coeff, m: int) -> Coeff:
    return Coeff({(e * m, a): v for (e, a), v in c.terms.items()})


def _coeff_subst_alpha(c: Coeff, rep: Coeff) -> Coeff:
    out = COEFF_ZERO
    for (e, a), v in c.terms.items():
        term = Coeff({(e, 0): v})
        out = out + term * (rep ** a if a else COEFF_ONE)
    return out


def _lf_map(lf: LinearForm, fn) -> LinearForm:
    return LinearForm({v: fn(c) for v, c in lf.coeffs.items()})


def _lf_subst_eps_power(lf: LinearForm, m: int) -> LinearForm:
    return _lf_map(lf, lambda c: _coeff_subst_eps_power(c, m))


def _lf_subst_alpha(lf: LinearForm, rep: Coeff) -> LinearForm:
    return _lf_map(lf, lambda c: _coeff_subst_alpha(c, rep))


def _max_abs_eps_exp(forms: Sequence[LinearForm]) -> int:
    m = 0
    for lf in forms:
        for c in lf.coeffs.values():
            for (e, _a) in c.terms:
                m = max(m, abs(e))
    return m


# ---------------------------------------------------------------------------
# 3x3 off-diagonal construction (exact)
# ---------------------------------------------------------------------------

FactorList = List[Matrix]


def _require_ihl_formula(c: Circuit, who: str):
    if c.shape != "formula":
        raise NotFormula(f"{who} expects a formula")
    ok, gid, reason = c.validate("IHL")
    if not ok:
        raise NotIHL(f"{who} expects an IHL formula (gate {gid}: {reason})")


def _e_factor(i: int, j: int, p: Polynomial) -> Matrix:
    m = _zeros(3)
    m[i - 1][j - 1] = p
    return m


def _third_index(i: int, j: int) -> int:
    return ({1, 2, 3} - {i, j}).pop()


def _offdiag_lists(
    node: FNode, pos: Tuple[int, int], scal: Coeff
) -> Tuple[FactorList, FactorList]:
    """Dual word lists (plus, minus) whose products are exactly
    ``id + scal*g*E(pos)`` and ``id - scal*g*E(pos)``."""
    i, j = pos
    if node.kind == "leaf":
        p = (node.lin or LinearForm.zero()).scale(scal).to_poly()
        return [_e_factor(i, j, p)], [_e_factor(i, j, -p)]
    if node.kind == "add":
        p1, m1 = _offdiag_lists(node.children[0], pos, scal)
        p2, m2 = _offdiag_lists(node.children[1], pos, scal)
        return p1 + p2, m1 + m2
    if node.kind == "mul":
        k = _third_index(i, j)
        pf, mf = _offdiag_lists(node.children[0], (i, k), scal)
        pg, mg = _offdiag_lists(node.children[1], (k, j), COEFF_ONE)
        return pf + pg + mf + mg, mf + pg + pf + mg
    raise NotFormula(f"off-diagonal compilation expects arity-2 gates, got {node.kind}")


def compile_offdiag3(
    c: Circuit, target: Tuple[int, int], thread_scalar: Union[Coeff, int, Fraction] = 1
) -> MatrixWord:
    """Exact word: product of factors - id = thread_scalar * eval(c) * E(target)."""
    i, j = target
    if i == j or not (1 <= i <= 3 and 1 <= j <= 3):
        raise ValueError("target must be an off-diagonal position of a 3x3 matrix")
    _require_ihl_formula(c, "compile_offdiag3")
    if c.basis != "arity2":
        raise NotFormula("compile_offdiag3 expects the arity-2 basis")
    if not isinstance(thread_scalar, Coeff):
        thread_scalar = Coeff.from_rational(thread_scalar)
    plus, _minus = _offdiag_lists(circuit_to_tree(c), (i, j), thread_scalar)
    return MatrixWord(3, plus, COEFF_ONE, entry_target(i, j))


# ---------------------------------------------------------------------------
# 3x3 diagonal-functional border construction
# ---------------------------------------------------------------------------


def _summands(node: FNode) -> List[FNode]:
    if node.kind == "add":
        return _summands(node.children[0]) + _summands(node.children[1])
    return [node]


def compile_trace3(c: Circuit) -> MatrixWord:
    """Border word with global scalar eps^-2 and target entry (1,1).

    The eps-limit of scalar*(product - id) is eval(c) * (E(1,1) - E(2,2)):
    every factor is unipotent, forcing determinant 1, hence a trace-free
    eps^2 coefficient; the (1,1) entry therefore carries the value while the
    trace would cancel to 0."""
    _require_ihl_formula(c, "compile_trace3")
    if c.basis != "arity2":
        raise NotFormula("compile_trace3 expects the arity-2 basis")
    eps = Coeff.eps(1)
    factors: FactorList = []
    for s in _summands(circuit_to_tree(c)):
        if s.kind == "mul":
            g, h = s.children
            pg, mg = _offdiag_lists(g, (1, 2), eps)
            ph, mh = _offdiag_lists(h, (2, 1), eps)
            factors += pg + ph + mg + mh
        elif s.kind == "leaf":
            # degree-1 corner: no product pair exists under IHL, so use the
            # pair (eps^-1 * l, eps): gadget entries are l and the constant
            # eps^2, and every entry of the gadget stays O(eps^2)
            lf = (s.lin or LinearForm.zero()).to_poly()
            e2 = Polynomial.eps(2)
            factors += [
                _e_factor(1, 2, lf),
                _e_factor(2, 1, e2),
                _e_factor(1, 2, -lf),
                _e_factor(2, 1, -e2),
            ]
        else:
            raise NotFormula(
                f"compile_trace3 expects a sum of products, got a {s.kind} gate"
            )
    return MatrixWord(3, factors, Coeff.eps(-2), entry_target(1, 1))


# ---------------------------------------------------------------------------
# 2x2 alternating-word border construction
# ---------------------------------------------------------------------------
#
# A 2x2 word is kept as a list of linear forms; the form at (1-based) slot i
# sits in the upper-triangular position for odd i and the lower-triangular
# position for even i.  Every recursive invariant word has odd length, starts
# upper-triangular, and satisfies: the eps-limit of (product - id) exists and
# equals alpha * value * E_upper exactly.


def word2_to_matrix_word(forms: Sequence[LinearForm],
                         scalar: Coeff = COEFF_ONE) -> MatrixWord:
    factors = []
    for idx, lf in enumerate(forms, start=1):
        m = _zeros(2)
        if idx % 2 == 1:
            m[0][1] = lf.to_poly()
        else:
            m[1][0] = lf.to_poly()
        factors.append(m)
    return MatrixWord(2, factors, scalar, entry_target(1, 2))


def _expand2(forms: Sequence[LinearForm]) -> Matrix:
    return expand_word(word2_to_matrix_word(forms))


def _word2_invariant_holds(forms: Sequence[LinearForm], expected: Polynomial) -> bool:
    """Check: limit of (product - id) exists and equals expected * E_upper."""
    m = _expand2(forms)
    targets = [
        (m[0][0] - Polynomial.const(1), Polynomial.zero()),
        (m[0][1], expected),
        (m[1][0], Polynomial.zero()),
        (m[1][1] - Polynomial.const(1), Polynomial.zero()),
    ]
    for got, want in targets:
        diff = got - want
        if diff.is_zero():
            continue
        if diff.min_eps_exp() < 1:
            return False
    return True


_ALPHA = Coeff.alpha(1)


def _cont_odd_word(node: FNode, s: Fraction) -> List[LinearForm]:
    """Word for alpha * s * eval_raw(node); the node's own scale tag is
    folded into s."""
    s = s * node.scale
    if node.kind == "leaf":
        lf = (node.lin or LinearForm.zero()).scale(_ALPHA * s)
        return [lf]
    if node.kind == "add":
        w1 = _cont_odd_word(node.children[0], s)
        w2 = _cont_odd_word(node.children[1], s)
        return w1 + [LinearForm.zero()] + w2  # pad to keep strict alternation
    if node.kind == "negcube":
        base = _cont_odd_word(node.children[0], Fraction(1))
        g = node.children[0].eval()
        expected = (g * g * g).scale(_ALPHA * (-s))
        # every error term of the base product is eps^e * alpha^a with e >= 1
        # (exact-limit invariant) and a at most the number of alpha-carrying
        # forms; eps -> eps^k, alpha -> eps^-1 sends it to eps^(ke-a), so any
        # k >= a_max + 2 provably yields the required congruence mod eps^2
        a_max = sum(
            1
            for lf in base
            for c in lf.coeffs.values()
            if any(a >= 1 for (_e, a) in c.terms)
        )
        k = max(2 * (1 + _max_abs_eps_exp(base)), a_max + 2)
        cap = _max_k()
        check = 3 * len(base) <= _exact_check_max()
        while True:
            block1 = [
                _lf_subst_alpha(_lf_subst_eps_power(lf, k), Coeff.eps(-1))
                for lf in base
            ]
            block3 = [
                _lf_subst_alpha(_lf_subst_eps_power(lf, k), -Coeff.eps(-1))
                for lf in base
            ]
            middle_alpha = Coeff({(2, 1): s})  # eps^2 * s * alpha
            block2 = [
                _lf_subst_alpha(_lf_subst_eps_power(lf, 3), middle_alpha)
                for lf in reversed(base)
            ]
            word = block1 + block2 + block3
            if not check or _word2_invariant_holds(word, expected):
                return word
            if k >= cap:
                raise PrecisionExhausted(
                    f"adaptive eps-precision exceeded the cap {cap} "
                    "(set HOMLIN_MAX_K to raise it)"
                )
            k = min(2 * k, cap)
    raise NotFormula(
        f"continuant compilation expects add/negative-cube gates, got {node.kind}"
    )


def compile_continuant_odd(c: Circuit, d: Optional[int] = None) -> Projection:
    """Border projection of the parity-alternating family computing the odd
    homogeneous degree-d polynomial of an add/negative-cube IHL formula."""
    _require_ihl_formula(c, "compile_continuant_odd")
    if c.basis != "addNegCube":
        raise NotFormula("compile_continuant_odd expects the add/neg-cube basis")
    f = c.eval()
    degs = f.homog_degrees()
    if d is None:
        d = degs[-1] if degs else 1
    if d % 2 == 0:
        raise NotOddDegree(f"degree {d} is even")
    if not f.is_zero() and degs != [d]:
        raise NotOddDegree(f"formula is not homogeneous of degree {d}")
    word = _cont_odd_word(circuit_to_tree(c), Fraction(1))
    forms = [_lf_subst_alpha(lf, COEFF_ONE) for lf in word]
    return Projection("C", len(forms), d, forms, COEFF_ONE, border=True)


def _odd_word_for_arity3_circuit(part: Circuit, s: Fraction) -> List[LinearForm]:
    """Invariant word for alpha * s * eval(part) from an arity-3 IHL circuit."""
    from .transforms import to_add_negcube

    tree = circuit_to_tree(part)
    anc, _report = to_add_negcube(tree_to_circuit(tree, "arity3"))
    return _cont_odd_word(circuit_to_tree(anc), s)


def compile_continuant_even(g: GradedArity3Repr, d: int) -> Projection:
    """Border projection for the even homogeneous degree-d component, built
    from the per-variable derivative circuits via the telescoping diagonal
    gadget and the homogeneous-function identity."""
    if d % 2 == 1 or d < 2:
        raise NotEvenDegree(f"degree {d} is not a positive even number")
    per_var = g.even_parts.get(d, {})
    eps = Coeff.eps(1)
    forms: List[LinearForm] = []
    for v in sorted(per_var, key=_var_key):
        part = per_var[v]
        if part.eval().is_zero():
            continue
        base = _odd_word_for_arity3_circuit(part, Fraction(1, d))
        # b-blocks: eps -> eps^3, alpha -> +-eps, transposed and reversed
        b_plus = [
            _lf_subst_alpha(_lf_subst_eps_power(lf, 3), eps)
            for lf in reversed(base)
        ]
        b_minus = [
            _lf_subst_alpha(_lf_subst_eps_power(lf, 3), -eps)
            for lf in reversed(base)
        ]
        a_minus = LinearForm.variable(v, -eps)
        a_plus = LinearForm.variable(v, eps)
        forms += [a_minus] + b_minus + [a_plus] + b_plus
    if not forms:
        forms = [LinearForm.zero()]
    forms = [_lf_subst_eps_power(lf, d // 2) for lf in forms]
    return Projection("C", len(forms), d, forms, Coeff.eps(-d), border=True)


# ---------------------------------------------------------------------------
# word -> family projection
# ---------------------------------------------------------------------------


def word_to_projection(
    w: MatrixWord,
    d: int,
    n: Optional[int] = None,
    weights: Optional[LWeights] = None,
) -> Projection:
    """Map a 3x3 word onto the zero-diagonal elementary-symmetric family at
    degree d: each factor's six off-diagonal entries fill one factor's
    variable slots (after the eps -> eps^d substitution), unused factors get
    zero forms, and the word's scalar is kept separate (no d-th root is ever
    taken)."""
    if w.dim != 3:
        raise ValueError("family projection needs a 3x3 word")
    if d < 1:
        raise ValueError("degree must be positive")
    r = w.r()
    if n is None:
        n = r
    if n < r:
        raise ValueError(f"need at least {r} factor slots, got {n}")
    if weights is None:
        if w.target[0] == "entry":
            from .families import L_entry

            weights = L_entry(w.target[1], w.target[2])
        elif w.target[0] == "trace":
            from .families import L_trace

            weights = L_trace()
        else:
            weights = [
                [w.target[1][i * 3 + j] for j in range(3)] for i in range(3)
            ]
    forms_by_factor: List[Dict[Tuple[int, int], LinearForm]] = []
    for a in w.factors:
        entries: Dict[Tuple[int, int], LinearForm] = {}
        for i in range(3):
            for j in range(3):
                p = a[i][j]
                if p.is_zero():
                    continue
                if i == j:
                    raise DiagonalNonzero(
                        f"factor entry ({i + 1},{j + 1}) = {format_poly(p)}"
                    )
                if not p.constant_part().is_zero() or p.degree() > 1:
                    raise ValueError(
                        "entry is not homogeneous linear: " + format_poly(p)
                    )
                entries[(i + 1, j + 1)] = LinearForm.from_poly(p)
        forms_by_factor.append(entries)
    forms: List[LinearForm] = []
    for i in range(1, n + 1):
        entries = forms_by_factor[i - 1] if i <= r else {}
        for a in range(1, 4):
            for b in range(1, 4):
                if a == b:
                    continue
                lf = entries.get((a, b), LinearForm.zero())
                forms.append(_lf_subst_eps_power(lf, d))
    scalar = _coeff_subst_eps_power(w.global_scalar, d)
    return Projection("nceL", n, d, forms, scalar, border=True, weights=weights)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def format_word(w: MatrixWord) -> str:
    lines = [f"dim {w.dim}"]
    for a in w.factors:
        parts = []
        for i in range(w.dim):
            for j in range(w.dim):
                if not a[i][j].is_zero():
                    parts.append(f"({i + 1},{j + 1})={format_poly(a[i][j])}")
        lines.append("factor: " + "; ".join(parts))
    lines.append(f"scalar: {format_coeff(w.global_scalar)}")
    if w.target[0] == "entry":
        lines.append(f"target: entry({w.target[1]},{w.target[2]})")
    elif w.target[0] == "trace":
        lines.append("target: trace")
    else:
        ws = ",".join(format_coeff(Coeff.from_rational(x) if not isinstance(x, Coeff) else x).replace(" ", "") for x in w.target[1])
        lines.append(f"target: L({ws})")
    return "\n".join(lines) + "\n"


def parse_word(text: str) -> MatrixWord:
    dim = None
    factors: List[Matrix] = []
    scalar = COEFF_ONE
    target: Target = ("trace",)
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("dim"):
            dim = int(line.split()[1])
        elif line.startswith("factor:"):
            if dim is None:
                raise ValueError("'dim' must precede factors")
            m = _zeros(dim)
            body = line[len("factor:"):].strip()
            if body:
                for part in body.split(";"):
                    part = part.strip()
                    lhs, rhs = part.split("=", 1)
                    i, j = lhs.strip().lstrip("(").rstrip(")").split(",")
                    m[int(i) - 1][int(j) - 1] = parse_poly(rhs.strip())
            factors.append(m)
        elif line.startswith("scalar:"):
            scalar = parse_coeff(line[len("scalar:"):].strip())
        elif line.startswith("target:"):
            body = line[len("target:"):].strip()
            if body == "trace":
                target = ("trace",)
            elif body.startswith("entry"):
                i, j = body[len("entry("):-1].split(",")
                target = ("entry", int(i), int(j))
            elif body.startswith("L("):
                ws = [parse_coeff(t) for t in body[2:-1].split(",")]
                target = ("functional", ws)
            else:
                raise ValueError(f"unknown target {body!r}")
        else:
            raise ValueError(f"unknown word directive {line!r}")
    if dim is None:
        raise ValueError("missing 'dim'")
    return MatrixWord(dim, factors, scalar, target)


def format_projection(p: Projection) -> str:
    lines = [
        f"projection {p.family_tag} n {p.n} d {p.d} border {int(p.border)}",
        f"scalar: {format_coeff(p.scalar)}",
    ]
    if p.weights is not None:
        ws = ",".join(
            format_coeff(x if isinstance(x, Coeff) else Coeff.from_rational(x)).replace(" ", "")
            for row in p.weights
            for x in row
        )
        lines.append(f"weights: {ws}")
    for name, lf in zip(p.slot_names(), p.forms):
        lines.append(f"form {name}: {format_poly(lf.to_poly())}")
    return "\n".join(lines) + "\n"


def parse_projection(text: str) -> Projection:
    tag = n = d = border = None
    scalar = COEFF_ONE
    weights = None
    forms: Dict[str, LinearForm] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("projection"):
            words = line.split()
            tag = words[1]
            n = int(words[words.index("n") + 1])
            d = int(words[words.index("d") + 1])
            border = bool(int(words[words.index("border") + 1]))
        elif line.startswith("scalar:"):
            scalar = parse_coeff(line[len("scalar:"):].strip())
        elif line.startswith("weights:"):
            flat = [parse_coeff(t) for t in line[len("weights:"):].strip().split(",")]
            weights = [flat[i * 3:(i + 1) * 3] for i in range(3)]
        elif line.startswith("form "):
            head, body = line.split(":", 1)
            name = head[len("form "):].strip()
            forms[name] = LinearForm.from_poly(parse_poly(body.strip()))
        else:
            raise ValueError(f"unknown projection directive {line!r}")
    if tag is None:
        raise ValueError("missing projection header")
    p = Projection(tag, n, d, [], scalar, border, weights)
    p.forms = [forms.get(name, LinearForm.zero()) for name in p.slot_names()]
    return p

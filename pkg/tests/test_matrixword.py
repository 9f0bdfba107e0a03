"""Tests for the matrix-word compilers: exact off-diagonal words, the
diagonal-functional border words, the 2x2 alternating-word border
constructions, family projections, and serialization."""

import random
from fractions import Fraction

import pytest

from homlin.circuit import FNode, circuit_to_tree, tree_to_circuit
from homlin.families import L_entry, gen_nce_L
from homlin.matrixword import (
    DiagonalNonzero,
    MatrixWord,
    NotEvenDegree,
    NotFormula,
    NotIHL,
    NotOddDegree,
    Projection,
    _offdiag_lists,
    border_value,
    compile_continuant_even,
    compile_continuant_odd,
    compile_offdiag3,
    compile_trace3,
    entry_target,
    expand_word,
    format_projection,
    format_word,
    parse_projection,
    parse_word,
    transpose_reverse,
    word2_to_matrix_word,
    word_to_projection,
)
from homlin.poly import (
    COEFF_ONE,
    Coeff,
    LinearForm,
    Polynomial,
    format_poly,
    parse_poly,
)
from homlin.transforms import to_add_negcube, vf_to_v3p
from homlin.verify import (
    random_graded_arity3_formula,
    random_ihl_formula,
    verify_border,
)


def as_formula(tree, basis="arity2"):
    return tree_to_circuit(tree, basis)


def X(name):
    return FNode.var(name)


def P(text):
    return parse_poly(text)


def matrices_equal(m, expect):
    return all(
        m[i][j] == P(expect[i][j]) for i in range(len(m)) for j in range(len(m))
    )


# ---------------------------------------------------------------------------
# expand_word
# ---------------------------------------------------------------------------


def test_expand_empty_word_is_identity():
    m = expand_word(MatrixWord(3, []))
    assert matrices_equal(m, [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])


def test_expand_two_factor_2x2():
    w = word2_to_matrix_word([LinearForm.variable("x1"), LinearForm.variable("x2")])
    m = expand_word(w)
    assert matrices_equal(m, [["1 + x1*x2", "x1"], ["x2", "1"]])


def test_expand_four_factor_commutator_symbolic():
    # (id+fE12)(id+gE23)(id-fE12)(id-gE23) = id + f*g*E13, f and g fresh
    f, g = Polynomial.variable("f"), Polynomial.variable("g")
    zero = Polynomial.zero()

    def e(i, j, p):
        m = [[zero] * 3 for _ in range(3)]
        m = [row[:] for row in m]
        m[i - 1][j - 1] = p
        return m

    w = MatrixWord(3, [e(1, 2, f), e(2, 3, g), e(1, 2, -f), e(2, 3, -g)])
    m = expand_word(w)
    assert m[0][2] == f * g
    for i in range(3):
        for j in range(3):
            if (i, j) == (0, 2):
                continue
            assert m[i][j] == (Polynomial.const(1) if i == j else zero)


# ---------------------------------------------------------------------------
# compile_offdiag3
# ---------------------------------------------------------------------------


def offdiag_residue(c, target=(1, 3), thread=1):
    w = compile_offdiag3(c, target, thread)
    m = expand_word(w)
    for i in range(3):
        m[i][i] = m[i][i] - Polynomial.const(1)
    return w, m


def test_offdiag_leaf():
    c = as_formula(FNode.leaf(LinearForm.variable("x1", 2)))
    w, m = offdiag_residue(c)
    assert w.r() == 1
    assert m[0][2] == P("2*x1")
    assert all(m[i][j].is_zero() for i in range(3) for j in range(3) if (i, j) != (0, 2))


def test_offdiag_product_four_factors():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w, m = offdiag_residue(c)
    assert w.r() == 4
    assert m[0][2] == P("x1*x2")


def test_offdiag_depth_two_r_bound():
    t = FNode.mul(FNode.mul(X("x1"), X("x2")), FNode.add(X("x3"), X("x4")))
    c = as_formula(t)
    w, m = offdiag_residue(c)
    assert w.r() <= 16
    assert m[0][2] == c.eval()


def test_offdiag_thread_scalar():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    _w, m = offdiag_residue(c, thread=Coeff.eps(1))
    assert m[0][2] == P("eps * x1*x2")


def test_offdiag_other_targets():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    for tgt in [(1, 2), (2, 1), (2, 3), (3, 1), (3, 2)]:
        w, m = offdiag_residue(c, target=tgt)
        assert m[tgt[0] - 1][tgt[1] - 1] == P("x1*x2")


def test_offdiag_rejects_bad_input():
    with pytest.raises(ValueError):
        compile_offdiag3(as_formula(X("x1")), (2, 2))
    affine = as_formula(FNode.leaf(LinearForm.variable("x1"), Coeff.from_rational(1)))
    with pytest.raises(NotIHL):
        compile_offdiag3(affine, (1, 3))
    from homlin.verify import random_arity2_circuit

    shared = random_arity2_circuit(random.Random(0), 8, 3)
    with pytest.raises(NotFormula):
        compile_offdiag3(shared, (1, 3))


def test_offdiag_random_exactness_and_bound():
    rng = random.Random(2024)
    for _ in range(30):
        t = random_ihl_formula(rng, rng.randint(1, 15), 4)
        c = as_formula(t)
        w, m = offdiag_residue(c)
        assert m[0][2] == c.eval()
        for i in range(3):
            for j in range(3):
                if (i, j) != (0, 2):
                    assert m[i][j].is_zero()
        assert w.r() <= 4 ** c.depth()


def test_offdiag_duality_minus_word():
    rng = random.Random(7)
    for _ in range(10):
        t = random_ihl_formula(rng, rng.randint(1, 9), 3)
        c = as_formula(t)
        _plus, minus = _offdiag_lists(circuit_to_tree(c), (1, 3), COEFF_ONE)
        m = expand_word(MatrixWord(3, minus))
        assert m[0][2] == -c.eval()
        for i in range(3):
            for j in range(3):
                if (i, j) != (0, 2):
                    want = Polynomial.const(1) if i == j else Polynomial.zero()
                    assert m[i][j] == want


def test_transpose_reverse_symmetry():
    rng = random.Random(5)
    for _ in range(8):
        t = random_ihl_formula(rng, rng.randint(1, 9), 3)
        w = compile_offdiag3(as_formula(t), (1, 3))
        m = expand_word(w)
        mt = expand_word(transpose_reverse(w))
        for i in range(3):
            for j in range(3):
                assert mt[i][j] == m[j][i]


# ---------------------------------------------------------------------------
# compile_trace3
# ---------------------------------------------------------------------------


def test_trace3_single_product_gadget():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_trace3(c)
    assert w.r() == 4
    assert w.global_scalar == Coeff.eps(-2)
    assert w.target == ("entry", 1, 1)
    entries = [
        a[i][j]
        for a in w.factors
        for i in range(3)
        for j in range(3)
        if not a[i][j].is_zero()
    ]
    eps = Coeff.eps(1)
    want = [
        P("x1").scale(eps), P("x2").scale(eps),
        P("-x1").scale(eps), P("-x2").scale(eps),
    ]
    assert sorted(entries, key=format_poly) == sorted(want, key=format_poly)
    assert border_value(w).eps_limit() == P("x1*x2")


def test_trace3_full_limit_is_difference_of_diagonal_entries():
    # determinant-1 factors force a trace-free limit: the value f appears at
    # (1,1) and -f at (2,2), so the (1,1) entry is the sound read-out
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_trace3(c)
    m = expand_word(w)
    for i in range(3):
        m[i][i] = m[i][i] - Polynomial.const(1)
    f = P("x1*x2")
    scal = Coeff.eps(-2)
    assert m[0][0].scale(scal).eps_limit() == f
    assert m[1][1].scale(scal).eps_limit() == -f
    assert m[0][1].scale(scal).eps_limit().is_zero()
    assert m[1][0].scale(scal).eps_limit().is_zero()


def test_trace3_sum_of_products():
    t = FNode.add(FNode.mul(X("x1"), X("x2")), FNode.mul(X("x3"), X("x4")))
    w = compile_trace3(as_formula(t))
    assert border_value(w).eps_limit() == P("x1*x2 + x3*x4")


def test_trace3_bare_leaf():
    c = as_formula(FNode.leaf(LinearForm({"x1": 2, "x2": -1})))
    w = compile_trace3(c)
    assert w.r() == 4
    assert border_value(w).eps_limit() == P("2*x1 - x2")


def test_trace3_mixed_leaf_and_product():
    t = FNode.add(X("x1"), FNode.mul(X("x2"), X("x3")))
    w = compile_trace3(as_formula(t))
    assert border_value(w).eps_limit() == P("x1 + x2*x3")


def test_trace3_random_border():
    rng = random.Random(99)
    for _ in range(20):
        t = random_ihl_formula(rng, rng.randint(1, 12), 4)
        c = as_formula(t)
        w = compile_trace3(c)
        rep = verify_border(w, c.eval())
        assert rep.verdict, rep.witness


# ---------------------------------------------------------------------------
# compile_continuant_odd
# ---------------------------------------------------------------------------


def test_continuant_odd_leaf():
    c = as_formula(FNode.leaf(LinearForm.variable("x1", 2)), "addNegCube")
    p = compile_continuant_odd(c)
    assert (p.family_tag, p.n, p.d, p.border) == ("C", 1, 1, True)
    assert p.forms == [LinearForm.variable("x1", 2)]
    assert p.value() == P("2*x1")  # C_{1,1}(2x1), exact without a limit


def test_continuant_odd_add_with_padding():
    c = as_formula(FNode.add(X("x1"), X("x2")), "addNegCube")
    p = compile_continuant_odd(c)
    assert p.n == 3 and p.forms[1].is_zero()  # zero form at the seam
    assert p.value().eps_limit() == P("x1 + x2")


def test_continuant_odd_negcube():
    c = as_formula(FNode.negcube(X("x1")), "addNegCube")
    p = compile_continuant_odd(c)
    assert p.d == 3
    assert p.value().eps_limit() == P("-x1^3")
    assert verify_border(p, P("-x1^3")).verdict


def test_continuant_odd_threads_scale_tags():
    inner = FNode.add(X("x1"), X("x2"))
    c = as_formula(FNode.negcube(inner, Fraction(-1, 24)), "addNegCube")
    p = compile_continuant_odd(c)
    want = (P("x1 + x2") ** 3).scale(Fraction(1, 24))
    assert p.value().eps_limit() == want


def test_continuant_odd_alpha_fully_substituted():
    c = as_formula(FNode.negcube(X("x1")), "addNegCube")
    p = compile_continuant_odd(c)
    for lf in p.forms:
        for coeff in lf.coeffs.values():
            assert all(a == 0 for (_e, a) in coeff.terms)


def test_continuant_odd_rejects_even_degree_request():
    c = as_formula(FNode.leaf(LinearForm.variable("x1")), "addNegCube")
    with pytest.raises(NotOddDegree):
        compile_continuant_odd(c, 2)


def test_continuant_odd_rejects_wrong_basis():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    with pytest.raises(NotFormula):
        compile_continuant_odd(c)


def test_continuant_odd_random_pipeline():
    rng = random.Random(31)
    for _ in range(12):
        d = rng.choice([1, 3])
        t = random_graded_arity3_formula(rng, d, rng.randint(2, 10), 3)
        c = tree_to_circuit(t, "arity3")
        anc, _rep = to_add_negcube(c)
        p = compile_continuant_odd(anc, d)
        rep = verify_border(p, c.eval())
        assert rep.verdict, rep.witness


def test_continuant_alternation_zero_padding_invariance():
    c = as_formula(FNode.negcube(X("x1")), "addNegCube")
    p = compile_continuant_odd(c)
    padded = Projection(
        "C", p.n + 2, p.d, list(p.forms) + [LinearForm.zero()] * 2,
        p.scalar, p.border,
    )
    assert padded.value() == p.value()


# ---------------------------------------------------------------------------
# compile_continuant_even
# ---------------------------------------------------------------------------


def even_projection(tree, d):
    g, _rep = vf_to_v3p(as_formula(tree))
    return compile_continuant_even(g, d)


def test_continuant_even_product():
    p = even_projection(FNode.mul(X("x1"), X("x2")), 2)
    assert p.d == 2 and p.border
    assert verify_border(p, P("x1*x2")).verdict


def test_continuant_even_square():
    p = even_projection(FNode.mul(X("x1"), X("x1")), 2)
    assert verify_border(p, P("x1^2")).verdict


def test_continuant_even_sum():
    t = FNode.add(FNode.mul(X("x1"), X("x2")), FNode.mul(X("x3"), X("x4")))
    p = even_projection(t, 2)
    assert verify_border(p, P("x1*x2 + x3*x4")).verdict


def test_continuant_even_degree_four():
    t = FNode.mul(FNode.mul(X("x1"), X("x2")), FNode.mul(X("x3"), X("x4")))
    p = even_projection(t, 4)
    assert p.scalar == Coeff.eps(-4)
    assert verify_border(p, P("x1*x2*x3*x4")).verdict


def test_continuant_even_rejects_odd_degree():
    g, _ = vf_to_v3p(as_formula(FNode.mul(X("x1"), X("x2"))))
    with pytest.raises(NotEvenDegree):
        compile_continuant_even(g, 3)


def test_even_gadget_telescopes_mod_eps3():
    # (the 4-factor diagonal gadget for (a,b)) == diag(1+eps^2 ab, 1-eps^2 ab)
    # mod eps^3, and two gadgets multiply to the gadget of the sum mod eps^3
    eps = Coeff.eps(1)

    def gadget(av, bv):
        return [
            LinearForm.variable(av, -eps),
            LinearForm.variable(bv, -eps),
            LinearForm.variable(av, eps),
            LinearForm.variable(bv, eps),
        ]

    def m_of(p):
        one = Polynomial.const(1)
        e2 = Polynomial.eps(2)
        return [[one + e2 * p, Polynomial.zero()], [Polynomial.zero(), one - e2 * p]]

    m1 = expand_word(word2_to_matrix_word(gadget("a1", "b1")))
    want1 = m_of(P("a1*b1"))
    for i in range(2):
        for j in range(2):
            assert m1[i][j].mod_eps(3) == want1[i][j].mod_eps(3)

    both = expand_word(word2_to_matrix_word(gadget("a1", "b1") + gadget("a2", "b2")))
    want = m_of(P("a1*b1 + a2*b2"))
    for i in range(2):
        for j in range(2):
            assert both[i][j].mod_eps(3) == want[i][j].mod_eps(3)


# ---------------------------------------------------------------------------
# word_to_projection
# ---------------------------------------------------------------------------


def test_word_to_projection_offdiag_product():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_offdiag3(c, (1, 3))
    p = word_to_projection(w, d=2)
    assert p.family_tag == "nceL" and p.n == w.r()
    assert len(p.forms) == 6 * p.n
    assert p.weights == L_entry(1, 3)
    assert p.value().eps_limit() == P("x1*x2")
    # cross-check against the monomial-expansion route
    assert p.value() == p.value_by_substitution()


def test_word_to_projection_zero_slot_padding():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_offdiag3(c, (1, 3))
    p = word_to_projection(w, d=2)
    padded = word_to_projection(w, d=2, n=w.r() + 2)
    assert padded.n == w.r() + 2
    assert padded.value() == p.value()


def test_word_to_projection_keeps_trace3_scalar():
    c = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_trace3(c)
    p = word_to_projection(w, d=2)
    assert p.scalar == Coeff.eps(-4)  # eps^-2 after eps -> eps^2
    assert verify_border(p, P("x1*x2")).verdict


def test_word_to_projection_rejects_nonzero_diagonal():
    m = [[Polynomial.zero()] * 3 for _ in range(3)]
    m = [row[:] for row in m]
    m[1][1] = Polynomial.variable("x1")
    w = MatrixWord(3, [m], COEFF_ONE, entry_target(1, 1))
    with pytest.raises(DiagonalNonzero):
        word_to_projection(w, d=1)


def test_nce_projection_matches_family_oracle():
    # zero forms in every slot except one factor reproduces a family value
    n, d = 2, 1
    forms = []
    for i in range(1, n + 1):
        for a in range(1, 4):
            for b in range(1, 4):
                if a != b:
                    forms.append(LinearForm.variable(f"x{a}_{b}_{i}"))
    p = Projection("nceL", n, d, forms, weights=L_entry(1, 2))
    assert p.value() == gen_nce_L(n, d, L_entry(1, 2))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_word_serialization_round_trip():
    c = as_formula(FNode.add(X("x1"), FNode.mul(X("x2"), X("x3"))))
    for w in [compile_offdiag3(c, (1, 3)), compile_trace3(c)]:
        w2 = parse_word(format_word(w))
        assert w2.dim == w.dim
        assert w2.global_scalar == w.global_scalar
        assert w2.target == w.target
        assert len(w2.factors) == len(w.factors)
        assert expand_word(w2) == expand_word(w)
        assert format_word(w2) == format_word(w)


def test_projection_serialization_round_trip():
    c = as_formula(FNode.negcube(X("x1")), "addNegCube")
    p = compile_continuant_odd(c)
    p2 = parse_projection(format_projection(p))
    assert (p2.family_tag, p2.n, p2.d, p2.border) == (p.family_tag, p.n, p.d, p.border)
    assert p2.forms == p.forms and p2.scalar == p.scalar
    assert p2.value() == p.value()

    c2 = as_formula(FNode.mul(X("x1"), X("x2")))
    w = compile_trace3(c2)
    q = word_to_projection(w, d=2)
    q2 = parse_projection(format_projection(q))
    assert q2.weights is not None
    assert q2.value() == q.value()


def test_border_value_on_projection_equals_value():
    c = as_formula(FNode.negcube(X("x1")), "addNegCube")
    p = compile_continuant_odd(c)
    assert border_value(p) == p.value()

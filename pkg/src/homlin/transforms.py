"""Source-to-source passes on formulas and circuits.

All passes are pure: they take a ``Circuit`` and return a fresh ``Circuit``
(or a richer result object) together with a ``PassReport`` that records the
size/depth bound the pass promises and whether the output met it.

Formula passes operate on the ``FNode`` tree view internally; circuit passes
sweep the topologically ordered gate list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .circuit import (
    BasisViolation,
    Circuit,
    FNode,
    Gate,
    GradedArity3Repr,
    balanced_add,
    circuit_to_tree,
    tree_to_circuit,
)
from .poly import COEFF_ONE, COEFF_ZERO, Coeff, LinearForm, Polynomial, _var_key

Rat = Union[int, Fraction]


class NeedsRootExtraction(ValueError):
    """Folding a scalar through a negative-cube gate would need a cube root."""


@dataclass
class PassReport:
    pass_name: str
    input_metrics: Dict[str, int]
    output_metrics: Dict[str, int]
    bound_formula: str
    bound_satisfied: bool
    details: Dict[str, object] = field(default_factory=dict)


def _metrics(c: Circuit) -> Dict[str, int]:
    return {"size": c.size(), "depth": c.depth(), "mulDepth": c.mul_depth()}


def _require(cond: bool, msg: str):
    if not cond:
        raise BasisViolation(msg)


# ---------------------------------------------------------------------------
# tree helpers
# ---------------------------------------------------------------------------


def copy_tree(n: FNode) -> FNode:
    return FNode(
        n.kind,
        tuple(copy_tree(ch) for ch in n.children),
        lin=n.lin,
        const=n.const,
        scale=n.scale,
    )


def _is_zero_leaf(n: FNode) -> bool:
    return (
        n.kind == "leaf"
        and (n.lin is None or n.lin.is_zero())
        and (n.const is None or n.const.is_zero())
    )


def _is_one_leaf(n: FNode) -> bool:
    return (
        n.kind == "leaf"
        and (n.lin is None or n.lin.is_zero())
        and n.const is not None
        and n.const.is_one()
        and n.scale == 1
    )


def _apply_scale(n: Optional[FNode], s: Fraction) -> Optional[FNode]:
    if n is None or s == 1:
        return n
    n.scale = n.scale * s
    return n


def simplify(node: FNode) -> Optional[FNode]:
    """The fixed simplifier: ternary product with a zero factor vanishes, an
    addition with a zero child collapses to the other child, a ternary
    product with two constant-1 factors is its third factor, and vanished
    gates are removed transitively.  ``None`` encodes the zero formula."""
    if node.kind == "leaf":
        return None if _is_zero_leaf(node) else copy_tree(node)
    if node.kind in ("alpha", "zvar"):
        return copy_tree(node)
    kids = [simplify(ch) for ch in node.children]
    if node.kind == "add":
        a, b = kids
        if a is None:
            return _apply_scale(b, node.scale)
        if b is None:
            return _apply_scale(a, node.scale)
        return FNode("add", (a, b), scale=node.scale)
    if node.kind in ("mul", "mul3"):
        if any(k is None for k in kids):
            return None
        if node.kind == "mul3":
            ones = [i for i, k in enumerate(kids) if _is_one_leaf(k)]
            if len(ones) >= 2:
                rest = [k for i, k in enumerate(kids) if i not in ones[:2]]
                return _apply_scale(rest[0], node.scale)
        return FNode(node.kind, tuple(kids), scale=node.scale)
    if node.kind == "negcube":
        return None if kids[0] is None else FNode("negcube", tuple(kids), scale=node.scale)
    raise ValueError(node.kind)  # pragma: no cover


def _subst_nodes(node: FNode, repl: Dict[int, Optional[FNode]]) -> Optional[FNode]:
    """Rebuild ``node`` with the identified subtrees replaced (``None`` = 0),
    running the simplifier on the way up."""
    if id(node) in repl:
        r = repl[id(node)]
        return None if r is None else copy_tree(r)
    if not node.children:
        return simplify(node)
    rebuilt = FNode(
        node.kind,
        tuple(
            _subst_nodes(ch, repl) or FNode.constant(0) for ch in node.children
        ),
        lin=node.lin,
        const=node.const,
        scale=node.scale,
    )
    return simplify(rebuilt)


def _zero_circuit(variables: Sequence[str] = (), shape: str = "formula",
                  basis: str = "arity2") -> Circuit:
    g = Gate("g1", "input", lin=LinearForm.zero(), const=COEFF_ZERO)
    return Circuit([g], "g1", shape, basis, variables)


def _tree_or_zero(t: Optional[FNode], c: Circuit, basis: str) -> Circuit:
    if t is None:
        return _zero_circuit(c.variables, "formula", basis)
    return tree_to_circuit(t, basis, "formula", c.variables)


# ---------------------------------------------------------------------------
# rescaleFormula
# ---------------------------------------------------------------------------


def _rescale_tree(node: FNode, alpha: Coeff) -> FNode:
    if node.kind == "leaf":
        lin = node.lin.scale(alpha) if node.lin else LinearForm.zero()
        const = (node.const * alpha) if node.const is not None else COEFF_ZERO
        return FNode("leaf", lin=lin, const=const)
    if node.kind == "add":
        return FNode.add(
            _rescale_tree(node.children[0], alpha),
            _rescale_tree(node.children[1], alpha),
        )
    if node.kind in ("mul", "mul3"):
        kids = (_rescale_tree(node.children[0], alpha),) + tuple(
            copy_tree(ch) for ch in node.children[1:]
        )
        return FNode(node.kind, kids)
    if node.kind == "negcube":
        raise NeedsRootExtraction(
            "rescaling through a negative cube needs a cube root; "
            "thread the scalar instead"
        )
    raise NeedsRootExtraction(f"cannot fold a scalar into a {node.kind} leaf")


def rescale_formula(c: Circuit, alpha: Union[Coeff, Rat]) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "rescaleFormula expects a formula")
    if not isinstance(alpha, Coeff):
        alpha = Coeff.from_rational(alpha)
    out_tree = _rescale_tree(circuit_to_tree(c), alpha)
    out = tree_to_circuit(out_tree, c.basis, "formula", c.variables)
    im, om = _metrics(c), _metrics(out)
    report = PassReport(
        "rescale", im, om, "size = s, depth = delta (structure unchanged)",
        om["size"] == im["size"] and om["depth"] == im["depth"],
    )
    return out, report


# ---------------------------------------------------------------------------
# classical (arity-2) depth reduction for formulas
# ---------------------------------------------------------------------------


def _sizes(node: FNode, out: Dict[int, int]) -> int:
    s = 1 + sum(_sizes(ch, out) for ch in node.children)
    out[id(node)] = s
    return s


def _separator_steps(root: FNode, sizes: Dict[int, int]) -> Tuple[list, FNode]:
    """Walk from the root into the largest child (ties toward the first)
    until the subformula size drops to at most 2s/3.  Returns the list of
    (node, child index) steps and the separator node."""
    s = sizes[id(root)]
    steps = []
    cur = root
    while 3 * sizes[id(cur)] > 2 * s:
        idx = max(
            range(len(cur.children)),
            key=lambda i: (sizes[id(cur.children[i])], -i),
        )
        steps.append((cur, idx))
        cur = cur.children[idx]
    return steps, cur


def _brent2(node: FNode, audit: List[Dict[str, int]]) -> FNode:
    s = node.size()
    if s <= 3:
        return copy_tree(node)
    sizes: Dict[int, int] = {}
    _sizes(node, sizes)
    steps, v = _separator_steps(node, sizes)
    b_tree = _subst_nodes(node, {id(v): None})

    def prune(i: int) -> Optional[FNode]:
        if i == len(steps):
            return None  # reached v: the coefficient contributes a factor 1
        n, ci = steps[i]
        if n.kind == "add":
            return prune(i + 1)
        other = copy_tree(n.children[1 - ci])
        rest = prune(i + 1)
        return other if rest is None else FNode.mul(rest, other)

    a_tree = prune(0)
    pieces = [t for t in (a_tree, v, b_tree) if t is not None]
    audit.append(
        {
            "s": s,
            "pieces": [p.size() for p in pieces],
            "withinTwoThirds": all(3 * p.size() <= 2 * s + 3 for p in pieces),
        }
    )
    main = _brent2(v, audit) if a_tree is None else FNode.mul(
        _brent2(a_tree, audit), _brent2(v, audit)
    )
    if b_tree is None:
        return main
    return FNode.add(main, _brent2(b_tree, audit))


def brent_formula(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "brentFormula expects a formula")
    _require(c.basis == "arity2", "brentFormula expects the arity-2 basis")
    audit: List[Dict[str, int]] = []
    out_tree = _brent2(circuit_to_tree(c), audit)
    out = tree_to_circuit(out_tree, "arity2", "formula", c.variables)
    im, om = _metrics(c), _metrics(out)
    s = max(im["size"], 2)
    bound = 2 * math.log(s, 1.5) + 4
    report = PassReport(
        "brent", im, om, "depth <= 2*log_{3/2}(s) + 4",
        om["depth"] <= bound,
        details={
            "measuredDepthOverLog": om["depth"] / math.log(s, 1.5),
            "recursionSteps": audit,
        },
    )
    return out, report


# ---------------------------------------------------------------------------
# input homogenization (formulas)
# ---------------------------------------------------------------------------


def _ihl_pair(node: FNode) -> Tuple[Coeff, Optional[FNode]]:
    """Split a formula into (constant value, IHL formula for g - g(0))."""
    if node.kind == "leaf":
        const = node.const if node.const is not None else COEFF_ZERO
        hat = None
        if node.lin is not None and not node.lin.is_zero():
            hat = FNode.leaf(node.lin)
        return const, hat
    if node.kind == "add":
        ca, ha = _ihl_pair(node.children[0])
        cb, hb = _ihl_pair(node.children[1])
        if ha is None:
            return ca + cb, hb
        if hb is None:
            return ca + cb, ha
        return ca + cb, FNode.add(ha, hb)
    if node.kind == "mul":
        ca, ha = _ihl_pair(node.children[0])
        cb, hb = _ihl_pair(node.children[1])
        terms: List[FNode] = []
        if ha is not None and hb is not None:
            terms.append(FNode.mul(copy_tree(ha), copy_tree(hb)))
        if hb is not None and not ca.is_zero():
            terms.append(_rescale_tree(copy_tree(hb), ca))
        if ha is not None and not cb.is_zero():
            terms.append(_rescale_tree(copy_tree(ha), cb))
        hat = balanced_add(terms) if terms else None
        return ca * cb, hat
    raise BasisViolation(f"input homogenization expects arity-2 gates, got {node.kind}")


def input_homogenize_tree(node: FNode, audit: Optional[List] = None) -> Optional[FNode]:
    t = _brent2(node, audit if audit is not None else [])
    return _ihl_pair(t)[1]


def input_homogenize_formula(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "inputHomogenizeFormula expects a formula")
    _require(c.basis == "arity2", "inputHomogenizeFormula expects arity-2 gates")
    audit: List[Dict[str, int]] = []
    tree = circuit_to_tree(c)
    reduced = _brent2(tree, audit)
    depth_brent = reduced.depth()
    hat = _ihl_pair(reduced)[1]
    out = _tree_or_zero(hat, c, "arity2")
    im, om = _metrics(c), _metrics(out)
    report = PassReport(
        "ihl-formula", im, om,
        "depth <= 3*depth(Brent output) + 2",
        om["depth"] <= 3 * depth_brent + 2,
        details={"brentDepth": depth_brent},
    )
    return out, report


# ---------------------------------------------------------------------------
# input homogenization (circuits)
# ---------------------------------------------------------------------------


class _CBuilder:
    def __init__(self):
        self.gates: List[Gate] = []
        self._n = 0

    def _fresh(self) -> str:
        self._n += 1
        return f"g{self._n}"

    def emit(self, kind: str, children: Tuple[str, ...] = (),
             edge_scalars=None, lin=None, const=None, scale=None) -> str:
        gid = self._fresh()
        self.gates.append(
            Gate(gid, kind, children=children, edge_scalars=edge_scalars,
                 lin=lin, const=const, scale=scale)
        )
        return gid

    def input(self, lin: LinearForm) -> str:
        return self.emit("input", lin=lin, const=COEFF_ZERO)

    def scaled(self, gid: str, c: Coeff) -> str:
        if c.is_one():
            return gid
        return self.emit("add", (gid, gid), edge_scalars=(c, COEFF_ZERO))

    def linear_combo(self, parts: List[Tuple[str, Coeff]]) -> Optional[str]:
        parts = [(g, s) for g, s in parts if not s.is_zero()]
        if not parts:
            return None
        while len(parts) > 1:
            nxt = []
            for i in range(0, len(parts) - 1, 2):
                (g1, s1), (g2, s2) = parts[i], parts[i + 1]
                scalars = None if (s1.is_one() and s2.is_one()) else (s1, s2)
                nxt.append((self.emit("add", (g1, g2), edge_scalars=scalars), COEFF_ONE))
            if len(parts) % 2:
                nxt.append(parts[-1])
            parts = nxt
        return self.scaled(parts[0][0], parts[0][1])

    def balanced_sum(self, gids: List[str]) -> Optional[str]:
        return self.linear_combo([(g, COEFF_ONE) for g in gids])


def _restrict_reachable(gates: List[Gate], output_id: str) -> List[Gate]:
    by_id = {g.id: g for g in gates}
    needed: Set[str] = set()
    stack = [output_id]
    while stack:
        gid = stack.pop()
        if gid in needed:
            continue
        needed.add(gid)
        stack.extend(by_id[gid].children)
    return [g for g in gates if g.id in needed]


def _topo_restrict(gates: List[Gate], output_id: str) -> List[Gate]:
    """Reachability restriction that also re-sorts children-first (needed
    after alias rewiring may have broken the emission order)."""
    by_id = {g.id: g for g in gates}
    order: List[Gate] = []
    placed: Set[str] = set()
    stack: List[Tuple[str, bool]] = [(output_id, False)]
    while stack:
        gid, expanded = stack.pop()
        if gid in placed:
            continue
        if expanded:
            placed.add(gid)
            order.append(by_id[gid])
            continue
        stack.append((gid, True))
        for ch in by_id[gid].children:
            if ch not in placed:
                stack.append((ch, False))
    return order


def input_homogenize_circuit(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.basis == "arity2", "inputHomogenizeCircuit expects arity-2 gates")
    b = _CBuilder()
    const: Dict[str, Coeff] = {}
    hat: Dict[str, Optional[str]] = {}
    for g in c.gates:
        if g.kind == "input":
            const[g.id] = g.const if g.const is not None else COEFF_ZERO
            hat[g.id] = (
                b.input(g.lin) if g.lin is not None and not g.lin.is_zero() else None
            )
        elif g.kind == "add":
            s1, s2 = g.edge_scalars or (COEFF_ONE, COEFF_ONE)
            a, bb = g.children
            const[g.id] = const[a] * s1 + const[bb] * s2
            parts = []
            if hat[a] is not None:
                parts.append((hat[a], s1))
            if hat[bb] is not None:
                parts.append((hat[bb], s2))
            hat[g.id] = b.linear_combo(parts)
        elif g.kind == "mul":
            s1, s2 = g.edge_scalars or (COEFF_ONE, COEFF_ONE)
            a, bb = g.children
            t = s1 * s2
            const[g.id] = t * const[a] * const[bb]
            parts = []
            if hat[a] is not None and hat[bb] is not None:
                parts.append((b.emit("mul", (hat[a], hat[bb])), t))
            if hat[bb] is not None:
                parts.append((hat[bb], t * const[a]))
            if hat[a] is not None:
                parts.append((hat[a], t * const[bb]))
            hat[g.id] = b.linear_combo(parts)
        else:
            raise BasisViolation(
                f"inputHomogenizeCircuit expects add/mul/input gates, got {g.kind}"
            )
    out_gid = hat[c.output_id]
    if out_gid is None:
        out = _zero_circuit(c.variables, "circuit", "arity2")
    else:
        gates = _restrict_reachable(b.gates, out_gid)
        out = Circuit(gates, out_gid, "circuit", "arity2", c.variables)
    im, om = _metrics(c), _metrics(out)
    report = PassReport(
        "ihl-circuit", im, om, "size <= 6*s and depth <= 3*s",
        om["size"] <= 6 * im["size"] and om["depth"] <= 3 * im["size"],
    )
    return out, report


# ---------------------------------------------------------------------------
# arity-3 products to additions and negative cubes
# ---------------------------------------------------------------------------

# x*y*z = (1/24) * ((x+y+z)^3 - (x+y-z)^3 - (x-y+z)^3 + (x-y-z)^3), realized
# with gates computing -t^3, so the four cube terms carry tags -+-+ / 24.
_CUBE_SIGNS = [
    ((1, 1, 1), Fraction(-1, 24)),
    ((1, 1, -1), Fraction(1, 24)),
    ((1, -1, 1), Fraction(1, 24)),
    ((1, -1, -1), Fraction(-1, 24)),
]


def _to_anc(node: FNode) -> FNode:
    if node.kind == "leaf":
        return copy_tree(node)
    if node.kind == "add":
        return FNode.add(_to_anc(node.children[0]), _to_anc(node.children[1]))
    if node.kind == "mul3":
        conv = [_to_anc(ch) for ch in node.children]
        cubes = []
        for signs, tag in _CUBE_SIGNS:
            parts = []
            for s, t in zip(signs, conv):
                t2 = copy_tree(t)
                if s == -1:
                    t2.scale = t2.scale * -1
                parts.append(t2)
            cubes.append(FNode.negcube(balanced_add(parts), scale=tag))
        return balanced_add(cubes)
    raise BasisViolation(f"toAddNegCube expects arity-3 gates, got {node.kind}")


def to_add_negcube(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "toAddNegCube expects a formula")
    _require(c.basis == "arity3", "toAddNegCube expects the arity-3 basis")
    out_tree = _to_anc(circuit_to_tree(c))
    out = tree_to_circuit(out_tree, "addNegCube", "formula", c.variables)
    im, om = _metrics(c), _metrics(out)
    bound = 16 * (4 ** im["mulDepth"]) * im["size"]
    report = PassReport(
        "add-negcube", im, om, "size <= 16 * 4^mulDepth * s",
        om["size"] <= bound,
    )
    return out, report


# ---------------------------------------------------------------------------
# parity homogenization
# ---------------------------------------------------------------------------


@dataclass
class ParityPair:
    odd: Optional[Circuit]
    even: Optional[Circuit]


def _parity_tree(node: FNode) -> Tuple[Optional[FNode], Optional[FNode]]:
    if node.kind == "leaf":
        return copy_tree(node), None
    if node.kind == "add":
        o1, e1 = _parity_tree(node.children[0])
        o2, e2 = _parity_tree(node.children[1])
        return _add_opt(o1, o2), _add_opt(e1, e2)
    if node.kind == "mul":
        o1, e1 = _parity_tree(node.children[0])
        o2, e2 = _parity_tree(node.children[1])
        odd = _add_opt(_mul_opt(e1, o2), _mul_opt(o1, e2))
        even = _add_opt(_mul_opt(e1, e2), _mul_opt(o1, o2))
        return odd, even
    raise BasisViolation(f"parityHomogenize expects arity-2 gates, got {node.kind}")


def _add_opt(a: Optional[FNode], b: Optional[FNode]) -> Optional[FNode]:
    if a is None:
        return b
    if b is None:
        return a
    return FNode.add(a, b)


def _mul_opt(a: Optional[FNode], b: Optional[FNode]) -> Optional[FNode]:
    if a is None or b is None:
        return None
    return FNode.mul(copy_tree(a), copy_tree(b))


def parity_homogenize(c: Circuit) -> Tuple[ParityPair, PassReport]:
    _require(c.shape == "formula", "parityHomogenize expects a formula")
    _require(c.basis == "arity2", "parityHomogenize expects arity-2 gates")
    ok, gid, reason = c.validate("IHL")
    _require(ok, f"parityHomogenize expects an IHL formula (gate {gid}: {reason})")
    odd_t, even_t = _parity_tree(circuit_to_tree(c))
    odd = None if odd_t is None else tree_to_circuit(odd_t, "arity2", "formula", c.variables)
    even = None if even_t is None else tree_to_circuit(even_t, "arity2", "formula", c.variables)
    im = _metrics(c)
    total = (odd.size() if odd else 0) + (even.size() if even else 0)
    depth = max(odd.depth() if odd else 0, even.depth() if even else 0)
    om = {"size": total, "depth": depth, "mulDepth": 0}
    bound = 7 * (2 ** im["mulDepth"]) * im["size"]
    sat = total <= bound
    for part in (odd, even):
        if part is not None:
            sat = sat and part.validate("parityHomogeneous")[0]
    report = PassReport(
        "parity", im, om,
        "combined size <= 7 * 2^mulDepth * s; every gate parity-pure", sat,
    )
    return ParityPair(odd, even), report


# ---------------------------------------------------------------------------
# formula derivatives
# ---------------------------------------------------------------------------


def _ddx(node: FNode, v: str) -> Optional[FNode]:
    if node.kind == "leaf":
        coeff = node.lin.coeffs.get(v) if node.lin is not None else None
        if coeff is None or coeff.is_zero():
            return None
        return FNode.constant(coeff)
    if node.kind == "add":
        return _add_opt(_ddx(node.children[0], v), _ddx(node.children[1], v))
    if node.kind == "mul":
        a, bn = node.children
        t1 = _mul_opt(_ddx(a, v), bn)
        t2 = _mul_opt(a, _ddx(bn, v))
        return _add_opt(t1, t2)
    raise BasisViolation(f"derivativeFormula expects arity-2 gates, got {node.kind}")


def derivative_formula(c: Circuit, v: str) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "derivativeFormula expects a formula")
    _require(c.basis == "arity2", "derivativeFormula expects arity-2 gates")
    out_tree = _ddx(circuit_to_tree(c), v)
    out = _tree_or_zero(out_tree, c, "arity2")
    im, om = _metrics(c), _metrics(out)
    report = PassReport(
        "derivative", im, om, "depth <= 2*delta",
        om["depth"] <= 2 * im["depth"],
    )
    return out, report


# ---------------------------------------------------------------------------
# Brent-style depth reduction over the arity-3 basis
# ---------------------------------------------------------------------------


def _lowest_mul3(steps: list) -> Optional[int]:
    for i in range(len(steps) - 1, -1, -1):
        if steps[i][0].kind == "mul3":
            return i
    return None


def _brent3(node: FNode, audit: List[Dict[str, object]]) -> FNode:
    s = node.size()
    if s <= 3:
        return copy_tree(node)
    sizes: Dict[int, int] = {}
    _sizes(node, sizes)
    steps, v = _separator_steps(node, sizes)
    b_tree = _subst_nodes(node, {id(v): None})
    pidx = _lowest_mul3(steps)

    if pidx is None:
        # only additions above the separator
        pieces = [p for p in (v, b_tree) if p is not None]
        audit.append(
            {
                "s": s,
                "case": 1,
                "pieces": [p.size() for p in pieces],
                "withinTwoThirds": all(3 * p.size() <= 2 * s + 3 for p in pieces),
            }
        )
        bv = _brent3(v, audit)
        return bv if b_tree is None else FNode.add(_brent3(b_tree, audit), bv)

    p_node, pci = steps[pidx]
    others = [ch for i, ch in enumerate(p_node.children) if i != pci]
    x_node, y_node = others[0], others[1]

    def prune(i: int) -> FNode:
        if i == pidx:
            return copy_tree(y_node)
        n, ci = steps[i]
        if n.kind == "add":
            return prune(i + 1)
        rest = prune(i + 1)
        kept = [copy_tree(ch) for j, ch in enumerate(n.children) if j != ci]
        return FNode.mul3(rest, kept[0], kept[1])

    d_tree = prune(0)
    pieces = [p for p in (d_tree, v, x_node, b_tree) if p is not None]
    audit.append(
        {
            "s": s,
            "case": 2,
            "pieces": [p.size() for p in pieces],
            "withinTwoThirds": all(3 * p.size() <= 2 * s + 3 for p in pieces),
        }
    )
    main = FNode.mul3(_brent3(d_tree, audit), _brent3(v, audit), _brent3(x_node, audit))
    if b_tree is None:
        return main
    return FNode.add(main, _brent3(b_tree, audit))


def brent_arity3(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.shape == "formula", "brentArity3 expects a formula")
    _require(c.basis == "arity3", "brentArity3 expects the arity-3 basis")
    ok, gid, reason = c.validate("IHL")
    _require(ok, f"brentArity3 expects an IHL formula (gate {gid}: {reason})")
    audit: List[Dict[str, object]] = []
    out_tree = _brent3(circuit_to_tree(c), audit)
    out = tree_to_circuit(out_tree, "arity3", "formula", c.variables)
    im, om = _metrics(c), _metrics(out)
    s = max(im["size"], 2)
    bound = 2 * math.log(s, 1.5) + 4
    report = PassReport(
        "brent3", im, om, "depth <= 2*log_{3/2}(s) + 4",
        om["depth"] <= bound,
        details={
            "recursionSteps": audit,
            "allStepsWithinTwoThirds": all(st["withinTwoThirds"] for st in audit),
        },
    )
    return out, report


def brent3_linearization(tree: FNode):
    """Expose the case-2 linearization for inspection: find the separator, and
    if its lowest strict ancestor product exists, return (v, x, F11, F00)
    where F11/F00 are realized through the simplifier rules.  Returns None in
    the additions-only case."""
    sizes: Dict[int, int] = {}
    _sizes(tree, sizes)
    steps, v = _separator_steps(tree, sizes)
    pidx = _lowest_mul3(steps)
    if pidx is None:
        return None
    p_node, pci = steps[pidx]
    x_node = [ch for i, ch in enumerate(p_node.children) if i != pci][0]
    one = FNode.constant(1)
    f11 = _subst_nodes(tree, {id(v): one, id(x_node): one})
    f00 = _subst_nodes(tree, {id(v): None})
    return v, x_node, f11, f00


# ---------------------------------------------------------------------------
# formulas to graded arity-3 circuits
# ---------------------------------------------------------------------------


def _balanced_mul(nodes: List[FNode]) -> FNode:
    while len(nodes) > 1:
        nxt = []
        for i in range(0, len(nodes) - 1, 2):
            nxt.append(FNode.mul(nodes[i], nodes[i + 1]))
        if len(nodes) % 2:
            nxt.append(nodes[-1])
        nodes = nxt
    return nodes[0]


def formula_from_poly(p: Polynomial) -> Optional[FNode]:
    """A balanced formula summing one product per monomial (the coefficient is
    folded into the first leaf)."""
    terms = []
    for (mono, e, a), coeff in sorted(p.terms.items()):
        c = Coeff({(e, a): coeff})
        leaves: List[FNode] = []
        for var, k in mono:
            for _ in range(k):
                leaves.append(FNode.var(var))
        if not leaves:
            terms.append(FNode.constant(c))
            continue
        leaves[0] = FNode.leaf(LinearForm.variable(mono[0][0], c))
        terms.append(_balanced_mul(leaves))
    return balanced_add(terms) if terms else None


class _SpliceBuilder(_CBuilder):
    """Builds arity-3 circuits where even-parity fragments carry ``zvar``
    placeholder gates that later get aliased to another fragment's output."""

    def __init__(self):
        super().__init__()
        self.alias: Dict[str, str] = {}

    def resolve(self) -> Dict[str, str]:
        res = {}
        for gid in self.alias:
            cur = gid
            while cur in self.alias:
                cur = self.alias[cur]
            res[gid] = cur
        return res


def _splice(node: FNode, b: _SpliceBuilder) -> Tuple[str, int, Set[str]]:
    """Returns (gate id, parity (1 odd / 0 even), set of open z gates)."""
    if node.kind == "leaf":
        return b.input(node.lin), 1, set()
    if node.kind == "add":
        g1, p1, z1 = _splice(node.children[0], b)
        g2, p2, z2 = _splice(node.children[1], b)
        if p1 != p2:  # pragma: no cover - guarded by parity homogenization
            raise BasisViolation("addition mixes parities")
        return b.emit("add", (g1, g2)), p1, z1 | z2
    if node.kind == "mul":
        g1, p1, z1 = _splice(node.children[0], b)
        g2, p2, z2 = _splice(node.children[1], b)
        if p1 == 1 and p2 == 1:
            z0 = b.emit("zvar")
            return b.emit("mul3", (z0, g1, g2)), 0, {z0}
        if p1 == 1:  # odd times even: feed the odd output into the z leaves
            for z in z2:
                b.alias[z] = g1
            return g2, 1, set()
        if p2 == 1:
            for z in z1:
                b.alias[z] = g2
            return g1, 1, set()
        # even times even: computes z * f * g, keeping the first fragment's z
        for z in z2:
            b.alias[z] = g1
        return g2, 0, z1
    raise BasisViolation(f"vfToV3p expects arity-2 gates, got {node.kind}")


def _odd_tree_to_arity3(tree: FNode, variables: Sequence[str]) -> Circuit:
    """Parity-homogenize an IHL formula for a homogeneous odd polynomial and
    convert it to an IHL circuit over the arity-3 basis by z-splicing."""
    odd_t, _even_t = _parity_tree(tree)
    if odd_t is None:
        return _zero_circuit(variables, "circuit", "arity3")
    b = _SpliceBuilder()
    out_gid, parity, open_z = _splice(odd_t, b)
    if parity != 1 or open_z:  # pragma: no cover
        raise BasisViolation("odd conversion left open z leaves")
    res = b.resolve()
    gates = []
    for g in b.gates:
        if g.id in res:
            continue  # aliased zvar placeholder
        kids = tuple(res.get(ch, ch) for ch in g.children)
        gates.append(Gate(g.id, g.kind, children=kids, lin=g.lin, const=g.const))
    gates = _topo_restrict(gates, out_gid)
    return Circuit(gates, out_gid, "circuit", "arity3", variables)


def vf_to_v3p(c: Circuit) -> Tuple[GradedArity3Repr, PassReport]:
    _require(c.shape == "formula", "vfToV3p expects a formula")
    _require(c.basis == "arity2", "vfToV3p expects arity-2 gates")
    f = c.eval()
    const = f.constant_part()
    odd_parts: Dict[int, Circuit] = {}
    even_parts: Dict[int, Dict[str, Circuit]] = {}
    for d in f.homog_degrees():
        if d < 1:
            continue
        fd = f.homog_component(d)
        base = formula_from_poly(fd)
        if d % 2 == 1:
            ihl = input_homogenize_tree(base)
            odd_parts[d] = _odd_tree_to_arity3(ihl, c.variables)
        else:
            per_var: Dict[str, Circuit] = {}
            for v in sorted(fd.variables(), key=_var_key):
                dtree = _ddx(copy_tree(base), v)
                if dtree is None:
                    continue
                ihl = input_homogenize_tree(dtree)
                if ihl is None:
                    continue
                per_var[v] = _odd_tree_to_arity3(ihl, c.variables)
            even_parts[d] = per_var
    repr_ = GradedArity3Repr(const, odd_parts, even_parts)
    ok, reason = repr_.validate()
    im = _metrics(c)
    total = sum(p.size() for p in odd_parts.values()) + sum(
        q.size() for per in even_parts.values() for q in per.values()
    )
    om = {"size": total, "depth": 0, "mulDepth": 0}
    report = PassReport(
        "vf-to-v3p", im, om,
        "every stored circuit is IHL over the arity-3 basis and homogeneous",
        ok, details={"reason": reason},
    )
    return repr_, report


# ---------------------------------------------------------------------------
# depth reduction for graded arity-3 circuits
# ---------------------------------------------------------------------------


def _descendants(c: Circuit) -> Dict[str, Set[str]]:
    desc: Dict[str, Set[str]] = {}
    for g in c.gates:
        s = {g.id}
        for ch in g.children:
            s |= desc[ch]
        desc[g.id] = s
    return desc


def frontier(c: Circuit, deg: Dict[str, int], m: int) -> List[str]:
    """Ternary product gates of degree > m whose children all have degree <= m."""
    return [
        g.id
        for g in c.gates
        if g.kind == "mul3"
        and deg[g.id] > m
        and all(deg[ch] <= m for ch in g.children)
    ]


def _bracket_child_order(g: Gate, deg: Dict[str, int]) -> Tuple[str, str, str]:
    """(u1, u2, u3) with u1 the leftmost child of maximal degree and u3 the
    leftmost remaining child of minimal degree."""
    kids = list(g.children)
    i1 = max(range(3), key=lambda i: (deg[kids[i]], -i))
    rest = [kids[i] for i in range(3) if i != i1]
    if deg[rest[0]] <= deg[rest[1]]:
        u2, u3 = rest[1], rest[0]
    else:
        u2, u3 = rest[0], rest[1]
    return kids[i1], u2, u3


def bracket_poly(c: Circuit, uid: str, vid: str,
                 _memo: Optional[Dict[str, Polynomial]] = None) -> Polynomial:
    """The bracket polynomial [u:v] (linear in the placeholder variable z)."""
    vals = c.eval_gates()
    deg = c.syntactic_degrees()
    memo: Dict[str, Polynomial] = {} if _memo is None else _memo

    def rec(u: str) -> Polynomial:
        if u in memo:
            return memo[u]
        if u == vid:
            p = Polynomial.variable("z")
        else:
            g = c.by_id[u]
            if g.kind in ("input", "zvar", "alpha"):
                p = Polynomial.zero()
            elif g.kind == "add":
                s1, s2 = g.edge_scalars or (COEFF_ONE, COEFF_ONE)
                p = rec(g.children[0]).scale(s1) + rec(g.children[1]).scale(s2)
            elif g.kind == "mul3":
                u1, u2, u3 = _bracket_child_order(g, deg)
                p = rec(u1) * vals[u2] * vals[u3]
            else:
                raise BasisViolation(f"bracket over arity-3 basis only, got {g.kind}")
        memo[u] = p
        return p

    return rec(uid)


def vsbr_arity3(c: Circuit) -> Tuple[Circuit, PassReport]:
    _require(c.basis == "arity3", "vsbrArity3 expects the arity-3 basis")
    ok, gid, reason = c.validate("IHL")
    _require(ok, f"vsbrArity3 expects an IHL circuit (gate {gid}: {reason})")
    deg = c.syntactic_degrees()  # raises DegreeMismatch if not graded
    d_out = deg[c.output_id]
    if d_out % 2 == 0:
        raise ValueError(
            "vsbrArity3 handles odd degrees; treat the partial derivatives of "
            "an even-degree component independently"
        )
    desc = _descendants(c)
    b = _CBuilder()

    # accumulated linear forms of the degree-1 region
    linform: Dict[str, LinearForm] = {}
    for g in c.gates:
        if deg[g.id] != 1:
            continue
        if g.kind == "input":
            linform[g.id] = g.lin if g.lin is not None else LinearForm.zero()
        elif g.kind == "add":
            s1, s2 = g.edge_scalars or (COEFF_ONE, COEFF_ONE)
            linform[g.id] = linform[g.children[0]].scale(s1) + linform[
                g.children[1]
            ].scale(s2)

    front_cache: Dict[int, List[str]] = {}

    def front(m: int) -> List[str]:
        if m not in front_cache:
            front_cache[m] = frontier(c, deg, m)
        return front_cache[m]

    bracket_const_memo: Dict[Tuple[str, str], Coeff] = {}

    def bracket_const(u: str, v: str) -> Coeff:
        """[u:v] when deg u = deg v: a scalar multiple of z (additive paths)."""
        key = (u, v)
        if key in bracket_const_memo:
            return bracket_const_memo[key]
        if u == v:
            res = COEFF_ONE
        elif v not in desc[u]:
            res = COEFF_ZERO
        else:
            g = c.by_id[u]
            if g.kind == "add":
                s1, s2 = g.edge_scalars or (COEFF_ONE, COEFF_ONE)
                res = bracket_const(g.children[0], v) * s1 + bracket_const(
                    g.children[1], v
                ) * s2
            else:
                # products strictly increase the degree, so no equal-degree
                # path through them carries the bracket
                res = COEFF_ZERO
        bracket_const_memo[key] = res
        return res

    memo_u: Dict[str, Optional[str]] = {}
    memo_h: Dict[Tuple[str, str, str], Optional[str]] = {}

    def U(u: str) -> Optional[str]:
        """Gate computing value(u); None when it cancels to zero."""
        if u in memo_u:
            return memo_u[u]
        if deg[u] == 1:
            gid = None if linform[u].is_zero() else b.input(linform[u])
        else:
            m = -((-2 * deg[u]) // 3)
            terms = []
            for w in front(m):
                if w not in desc[u]:
                    continue
                g = c.by_id[w]
                kids = list(g.children)
                i3 = min(range(3), key=lambda i: (deg[kids[i]], i))
                w3 = kids[i3]
                w1, w2 = [kids[i] for i in range(3) if i != i3]
                u3, u2, u1 = U(w3), U(w2), U(w1)
                if u3 is None or u2 is None or u1 is None:
                    continue
                t1 = H(u, w, u3)
                if t1 is None:
                    continue
                terms.append(b.emit("mul3", (t1, u2, u1)))
            gid = b.balanced_sum(terms)
        memo_u[u] = gid
        return gid

    def H(u: str, v: str, repl: str) -> Optional[str]:
        if v not in desc[u]:
            return None
        if u == v:
            return repl
        key = (u, v, repl)
        if key in memo_h:
            return memo_h[key]
        gap = deg[u] - deg[v]
        if gap == 0:
            cst = bracket_const(u, v)
            res = None if cst.is_zero() else b.scaled(repl, cst)
            memo_h[key] = res
            return res
        m = deg[u] - (-((-2 * gap) // 3))
        terms = []
        for w in front(m):
            if w not in desc[u]:
                continue
            g = c.by_id[w]
            w1, w2, w3 = _bracket_child_order(g, deg)
            t2 = H(w1, v, repl)
            if t2 is None:
                continue
            u3 = U(w3)
            if u3 is None:
                continue
            t1 = H(u, w, u3)
            if t1 is None:
                continue
            if deg[w2] == 1:
                t3: Optional[str] = U(w2)
            else:
                m2 = -((-2 * deg[w2]) // 3)
                inner = []
                for y in front(m2):
                    if y not in desc[w2]:
                        continue
                    gy = c.by_id[y]
                    ykids = list(gy.children)
                    j3 = min(range(3), key=lambda i: (deg[ykids[i]], i))
                    y3 = ykids[j3]
                    y1, y2 = [ykids[i] for i in range(3) if i != j3]
                    s3, s2v, s1v = U(y3), U(y2), U(y1)
                    if s3 is None or s2v is None or s1v is None:
                        continue
                    s1 = H(w2, y, s3)
                    if s1 is None:
                        continue
                    inner.append(b.emit("mul3", (s1, s2v, s1v)))
                t3 = b.balanced_sum(inner)
            if t3 is None:
                continue
            terms.append(b.emit("mul3", (t1, t2, t3)))
        res = b.balanced_sum(terms)
        memo_h[key] = res
        return res

    out_gid = U(c.output_id)
    if out_gid is None:
        out = _zero_circuit(c.variables, "circuit", "arity3")
    else:
        gates = _restrict_reachable(b.gates, out_gid)
        out = Circuit(gates, out_gid, "circuit", "arity3", c.variables)
    im, om = _metrics(c), _metrics(out)
    s = max(im["size"], 2)
    logs = math.log2(s)
    logd = math.log2(max(d_out, 2))
    fitted = om["depth"] / (logs * logd)
    report = PassReport(
        "vsbr3", im, om, "depth <= c*log2(s)*log2(d) with fitted c reported",
        True,
        details={"fittedC": fitted, "degree": d_out},
    )
    return out, report


# ---------------------------------------------------------------------------
# pass registry for the command line
# ---------------------------------------------------------------------------

PASS_NAMES = (
    "rescale",
    "ihl-formula",
    "ihl-circuit",
    "brent",
    "add-negcube",
    "parity",
    "vf-to-v3p",
    "derivative",
    "brent3",
    "vsbr3",
)


def run_pass(name: str, c: Circuit, **kwargs):
    """Dispatch a named pass.  Returns (result, PassReport); the result is a
    Circuit except for parity (ParityPair) and vf-to-v3p (GradedArity3Repr)."""
    if name == "rescale":
        return rescale_formula(c, kwargs.get("alpha", 1))
    if name == "ihl-formula":
        return input_homogenize_formula(c)
    if name == "ihl-circuit":
        return input_homogenize_circuit(c)
    if name == "brent":
        return brent_formula(c)
    if name == "add-negcube":
        return to_add_negcube(c)
    if name == "parity":
        return parity_homogenize(c)
    if name == "vf-to-v3p":
        return vf_to_v3p(c)
    if name == "derivative":
        if "var" not in kwargs:
            raise ValueError("derivative pass needs a variable name")
        return derivative_formula(c, kwargs["var"])
    if name == "brent3":
        return brent_arity3(c)
    if name == "vsbr3":
        return vsbr_arity3(c)
    raise ValueError(f"unknown pass {name!r}")

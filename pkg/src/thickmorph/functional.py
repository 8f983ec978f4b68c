"""Non-linear functionals as evaluators: differentials, homomorphism checks,
polarisation, the associate map and the truncation-tower round trip.

A ``Functional`` wraps a pure evaluator over *pre-graded* arguments: a
polynomial A in the target coordinates whose terms already carry their
grading weight.  The public surface grades for you:

    evaluate(L, g)          applies the evaluator to lam*g,
    differential(L, g, h)   applies it to lam*g + eps*h and extracts the
                            eps-coefficient.

With that convention the differential of a thick pull-back is literally h
composed with the formal map y(x, g) -- no stray grading factors -- and
multiplicativity of the differential (the non-linear-homomorphism property)
is an exact identity of truncated polynomials.

Functionals are stateless and safe to share; every operation here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .ring import Poly, RangeError, UsageError
from .thick import (
    ChartPair,
    GenFunction,
    GradedFunction,
    apply_generating,
    multiplicity,
    sorted_multi_indices,
)


@dataclass(frozen=True)
class Functional:
    """A formal functional L(x, g), represented by its evaluator.

    ``apply_graded`` maps a pre-graded argument (caps already set to
    (cap, None)) to its value polynomial.  ``cap`` bounds the trustworthy
    grading order of everything computed from this functional.
    """

    chart: ChartPair
    cap: int
    apply_graded: Callable[[Poly], Poly] = field(repr=False)
    provenance: str = "composed"

    def graded_argument(self, g: Poly) -> Poly:
        self.chart.check_target_function(g)
        return self.chart.lam(self.cap, None) * g.truncated(self.cap, None)


@dataclass(frozen=True)
class SupportMap:
    """The order-zero part K_0^a(x) of the map realizing the differential."""

    chart: ChartPair
    components: tuple[Poly, ...]

    def component(self, a: int) -> Poly:
        return self.components[a - 1]

    def bindings(self) -> dict[str, Poly]:
        return {self.chart.y(a): self.components[a - 1] for a in range(1, self.chart.dim_n + 1)}


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: Poly | None = None


class OrderAgreementError(UsageError):
    """Two functionals fail to agree below the requested order."""

    def __init__(self, order: int):
        super().__init__(f"functionals disagree already at order {order}")
        self.order = order


def thick_functional(S: GenFunction, cap: int) -> Functional:
    """The pull-back functional of a generating function, graded to lambda^cap."""
    return Functional(
        chart=S.chart,
        cap=cap,
        apply_graded=lambda A: apply_generating(S, A, cap),
        provenance="thick",
    )


def corrupted_thick_functional(
    S: GenFunction, cap: int, corruption: Sequence[tuple[int, Poly]]
) -> Functional:
    """A thick evaluator with additive order-k perturbations coef*(A|_{y=S_1})^k.

    The perturbation evaluates the argument at the support point, so it is a
    legitimate formal functional of order k but not a non-linear homomorphism.
    """
    chart = S.chart
    base = {chart.y(a): S.s1(a).truncated(cap, None) for a in range(1, chart.dim_n + 1)}
    pert = [(k, coef.truncated(cap, None)) for k, coef in corruption]

    def apply(A: Poly) -> Poly:
        value = apply_generating(S, A, cap)
        at_support = A.substitute(base)
        for k, coef in pert:
            value = value + coef * at_support**k
        return value

    return Functional(chart=chart, cap=cap, apply_graded=apply, provenance="composed")


def evaluate(L: Functional, g: Poly) -> GradedFunction:
    """The graded value of L at g; grade_component picks out the order-k parts."""
    return GradedFunction(L.apply_graded(L.graded_argument(g)))


def differential(L: Functional, g: Poly, h: Poly) -> GradedFunction:
    """dL at g in direction h: the eps-coefficient of L(lam*g + eps*h)."""
    L.chart.check_target_function(g)
    L.chart.check_target_function(h, "h")
    argument = L.graded_argument(g) + L.chart.eps(L.cap, None) * h.truncated(L.cap, None)
    return GradedFunction(L.apply_graded(argument).epsilon_part())


def homomorphism_check(L: Functional, g: Poly, h1: Poly, h2: Poly, cap: int) -> CheckResult:
    """Multiplicativity of the differential, exact modulo lambda^cap.

    True for every thick pull-back (Theorem-1 behaviour); the witness is the
    difference polynomial otherwise.  This certifies multiplicativity on the
    supplied polynomial directions, not over all smooth functions.
    """
    if cap > L.cap:
        raise UsageError(f"check order {cap} exceeds the functional's cap {L.cap}")
    h1 = h1.truncated(L.cap, None)
    h2 = h2.truncated(L.cap, None)
    d_prod = differential(L, g, h1 * h2).value.truncated(cap, None)
    d_split = (differential(L, g, h1).value * differential(L, g, h2).value).truncated(cap, None)
    witness = d_prod - d_split
    return CheckResult(witness.is_zero(), None if witness.is_zero() else witness)


def support_map(L: Functional) -> SupportMap:
    """K_0^a(x), extracted as the order-1 value on the coordinate functions."""
    chart = L.chart
    components = []
    for a in range(1, chart.dim_n + 1):
        value = evaluate(L, Poly.var(chart.table, chart.y(a))).value
        components.append(value.grade_component(1).truncated(None, None))
    return SupportMap(chart, tuple(components))


def polarise(L: Functional, k: int, gs: Sequence[Poly]) -> Poly:
    """Symmetric multilinear form recovering the order-k component of L.

    Inclusion-exclusion over all subsets of gs (the empty subset contributes
    the affine component, which dies under the order-k projection for k>=1):
    (1/k!) sum (-1)^{k-n} [L(g_{i_1}+...+g_{i_n})]_k.
    """
    if not 1 <= k <= L.cap:
        raise RangeError(f"polarisation order {k} outside 1..{L.cap}")
    if len(gs) != k:
        raise UsageError(f"polarise needs exactly {k} functions, got {len(gs)}")
    zero = Poly.zero(L.chart.table, L.cap, None)
    gs = [g.truncated(L.cap, None) for g in gs]
    acc = zero
    for mask in range(1 << k):
        chosen = zero
        n = 0
        for i in range(k):
            if mask >> i & 1:
                chosen = chosen + gs[i]
                n += 1
        sign = -1 if (k - n) % 2 else 1
        acc = acc + evaluate(L, chosen).value.grade_component(k).scale(sign)
    return acc.scale(Fraction(1, math.factorial(k))).truncated(None, None)


def associate(L: Functional) -> GenFunction:
    """The generating function S_L: evaluate L on the generic linear function
    qb_a y^a and read the tensors off the qb-monomials of each grading order."""
    chart = L.chart
    table = chart.table
    linear = Poly.zero(table, L.cap, None)
    for a in range(1, chart.dim_n + 1):
        linear = linear + Poly.var(table, chart.qb(a), L.cap, None) * Poly.var(
            table, chart.y(a), L.cap, None
        )
    value = evaluate(L, linear).value
    qb_indices = [table.index(chart.qb(a)) for a in range(1, chart.dim_n + 1)]
    tensors: dict[int, dict[tuple[int, ...], dict]] = {}
    for k in range(L.cap + 1):
        component = value.grade_component(k)
        for exp, coef in component.terms.items():
            alpha = [exp[i] for i in qb_indices]
            if sum(alpha) != k:
                continue
            idx = tuple(a for a in range(1, chart.dim_n + 1) for _ in range(alpha[a - 1]))
            stripped = list(exp)
            for i in qb_indices:
                stripped[i] = 0
            bucket = tensors.setdefault(k, {}).setdefault(idx, {})
            key = tuple(stripped)
            bucket[key] = bucket.get(key, 0) + coef / multiplicity(idx)
    entries = {
        k: {idx: Poly(table, terms) for idx, terms in per_k.items()}
        for k, per_k in tensors.items()
    }
    return GenFunction(chart, L.cap, entries)


@dataclass(frozen=True)
class RoundtripEntry:
    order: int
    ok: bool
    witness: Poly | None = None


@dataclass(frozen=True)
class RoundtripReport:
    entries: tuple[RoundtripEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def first_failure(self) -> int | None:
        for e in self.entries:
            if not e.ok:
                return e.order
        return None


def roundtrip_verify(L: Functional, cap: int, gs: Sequence[Poly]) -> RoundtripReport:
    """Theorem-2 tower check: for each k <= cap, the thick functional of the
    q-degree-k truncation of associate(L) must reproduce L modulo lambda^{k+1}."""
    if cap > L.cap:
        raise UsageError(f"round-trip order {cap} exceeds the functional's cap {L.cap}")
    for g in gs:
        L.chart.check_target_function(g)
    S_L = associate(L)
    values = [evaluate(L, g).value for g in gs]
    entries = []
    for k in range(cap + 1):
        tower = thick_functional(S_L.truncated(k), k)
        witness = None
        for g, value in zip(gs, values):
            diff = value.truncated(k, None) - evaluate(tower, g).value
            if not diff.is_zero():
                witness = diff
                break
        entries.append(RoundtripEntry(k, witness is None, witness))
    return RoundtripReport(tuple(entries))


def order_difference(
    L1: Functional, L2: Functional, k: int, check_gs: Sequence[Poly] = ()
) -> dict[tuple[int, ...], Poly]:
    """The symmetric tensor T^{a_1..a_k} separating two functionals that agree
    below order k: the polarisation difference on coordinate functions.

    When ``check_gs`` is supplied the agreement precondition is verified on it
    first; a violation raises OrderAgreementError carrying the first
    disagreeing order.
    """
    if L1.chart.table != L2.chart.table:
        raise UsageError("functionals live over different charts")
    if k < 1:
        raise RangeError("order difference needs k >= 1")
    common = min(L1.cap, L2.cap)
    if k > common:
        raise RangeError(f"order {k} exceeds the shared cap {common}")
    for g in check_gs:
        diff = evaluate(L1, g).value.truncated(common, None) - evaluate(
            L2, g
        ).value.truncated(common, None)
        for j in range(k):
            if not diff.grade_component(j).is_zero():
                raise OrderAgreementError(j)
    chart = L1.chart
    tensor = {}
    for idx in sorted_multi_indices(chart.dim_n, k):
        gs = [Poly.var(chart.table, chart.y(a)) for a in idx]
        t = polarise(L1, k, gs) - polarise(L2, k, gs)
        if not t.is_zero():
            tensor[idx] = t
    return tensor


def lemma2_check(
    L1: Functional,
    L2: Functional,
    k: int,
    g: Poly,
    tensor: dict[tuple[int, ...], Poly] | None = None,
) -> CheckResult:
    """The contracted-jet identity: the order-k difference evaluated at g must
    equal T^{a_1..a_k} g*_{a_1}...g*_{a_k} with jets taken at the support map."""
    if tensor is None:
        tensor = order_difference(L1, L2, k)
    chart = L1.chart
    support = support_map(L1)
    jets = [
        g.truncated(None, None).partial(chart.y(a)).substitute(support.bindings())
        for a in range(1, chart.dim_n + 1)
    ]
    contracted = Poly.zero(chart.table)
    for idx, t in tensor.items():
        term = t.truncated(None, None).scale(multiplicity(idx))
        for a in idx:
            term = term * jets[a - 1]
        contracted = contracted + term
    common = min(L1.cap, L2.cap)
    lhs = (
        evaluate(L1, g).value.truncated(common, None)
        - evaluate(L2, g).value.truncated(common, None)
    ).grade_component(k).truncated(None, None)
    witness = lhs - contracted
    return CheckResult(witness.is_zero(), None if witness.is_zero() else witness)

"""Cotangent-bundle calculus: canonical Poisson bracket, derived multilinear
brackets of a Hamiltonian, Hamiltonian vector action on functions,
S-relatedness and the bracket-morphism property of thick pull-backs.

Both sides of a morphism share one VarTable: Hamiltonians on the source live
in (x, p), Hamiltonians on the target in (y, q).  Everything is exact; the
only truncations are the declared momentum-degree cap of a Hamiltonian and
the q-degree cap of an S-relatedness comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import parse
from .ring import PARAM, P_MOMENTUM, Q_COVECTOR, X_COORD, Y_COORD, Poly, UsageError
from .thick import ChartPair, GenFunction, apply_generating

SIDE_M = "M"
SIDE_N = "N"


@dataclass(frozen=True)
class Hamiltonian:
    """A formal Hamiltonian: polynomial on a cotangent chart, capped in
    momentum degree.  ``side`` selects the (x, p) or (y, q) half of the chart."""

    chart: ChartPair
    side: str
    value: Poly
    p_cap: int

    def __post_init__(self):
        if self.side not in (SIDE_M, SIDE_N):
            raise UsageError(f"Hamiltonian side must be 'M' or 'N', got {self.side!r}")
        coord_cls = X_COORD if self.side == SIDE_M else Y_COORD
        mom_cls = P_MOMENTUM if self.side == SIDE_M else Q_COVECTOR
        if not self.value.uses_only({coord_cls, mom_cls, PARAM}):
            raise UsageError("Hamiltonian uses symbols outside its cotangent chart")
        capped = _truncate_degree(self.value.truncated(None, None), self.momenta, self.p_cap)
        object.__setattr__(self, "value", capped)

    @property
    def coords(self) -> list[str]:
        return self.chart.x_syms if self.side == SIDE_M else self.chart.y_syms

    @property
    def momenta(self) -> list[str]:
        return self.chart.p_syms if self.side == SIDE_M else self.chart.q_syms


def _truncate_degree(p: Poly, symbols: Sequence[str], cap: int) -> Poly:
    idx = [p.table.index(s) for s in symbols]
    terms = {e: c for e, c in p.terms.items() if sum(e[i] for i in idx) <= cap}
    return Poly(p.table, terms, p.k_lambda, p.k_q)


def poisson(F: Poly, G: Poly, coords: Sequence[str] | None = None,
            momenta: Sequence[str] | None = None) -> Poly:
    """Canonical bracket sum_a (dF/dp_a dG/dx^a - dG/dp_a dF/dx^a).

    Defaults to the source-side (x, p) pairs of F's table.
    """
    if F.table != G.table:
        raise UsageError("bracket operands live over different VarTables")
    if coords is None:
        coords = F.table.symbols_of(X_COORD)
        momenta = F.table.symbols_of(P_MOMENTUM)
    if len(coords) != len(momenta):
        raise UsageError("coordinate and momentum lists differ in length")
    acc = Poly.zero(F.table, F.k_lambda, F.k_q)
    for x, p in zip(coords, momenta):
        acc = acc + F.partial(p) * G.partial(x) - G.partial(p) * F.partial(x)
    return acc


def derived_bracket(H: Hamiltonian, fs: Sequence[Poly]) -> Poly:
    """Iterated bracket ((..(H, f_1), f_2).., f_k) restricted to zero momenta.

    For k = 0 this is H with all momenta set to zero.
    """
    coord_cls = X_COORD if H.side == SIDE_M else Y_COORD
    acc = H.value
    for f in fs:
        if f.table != H.value.table:
            raise UsageError("bracket argument lives over a different VarTable")
        if not f.uses_only({coord_cls, PARAM}):
            raise UsageError("bracket arguments must be functions of the base coordinates")
        acc = poisson(acc, f.truncated(None, None), H.coords, H.momenta)
    zero = {m: Poly.zero(acc.table) for m in H.momenta}
    return acc.substitute(zero)


def ham_vector(H: Hamiltonian, f: Poly) -> Poly:
    """The vector-field action: H with each momentum replaced by df/dcoord."""
    if f.table != H.value.table:
        raise UsageError("function lives over a different VarTable")
    bindings = {
        m: f.partial(x).truncated(None, None) for x, m in zip(H.coords, H.momenta)
    }
    return H.value.substitute(bindings)


def s_related_check(H_M: Hamiltonian, H_N: Hamiltonian, S: GenFunction, q_cap: int) -> "CheckResultH":
    """H_M(x, dS/dx) = H_N(dS/dq, q) as polynomials in (x, q) modulo total
    q-degree q_cap; the witness is the difference otherwise."""
    if H_M.side != SIDE_M or H_N.side != SIDE_N:
        raise UsageError("expected a source-side and a target-side Hamiltonian")
    chart = S.chart
    if H_M.chart.table != chart.table or H_N.chart.table != chart.table:
        raise UsageError("Hamiltonians and generating function live over different charts")
    # Derivatives need one more q-order than the comparison keeps: d/dq lowers degree.
    s_poly = S.as_poly(None, q_cap + 1)
    ds_dx = {
        chart.p(i): s_poly.partial(chart.x(i)).truncated(None, q_cap)
        for i in range(1, chart.dim_m + 1)
    }
    ds_dq = {
        chart.y(a): s_poly.partial(chart.q(a)).truncated(None, q_cap)
        for a in range(1, chart.dim_n + 1)
    }
    lhs = H_M.value.truncated(None, q_cap).substitute(ds_dx)
    rhs = H_N.value.truncated(None, q_cap).substitute(ds_dq)
    witness = lhs - rhs
    return CheckResultH(witness.is_zero(), None if witness.is_zero() else witness)


@dataclass(frozen=True)
class CheckResultH:
    ok: bool
    witness: Poly | None = None


@dataclass(frozen=True)
class BracketMorphismResult:
    """Outcome of a bracket-morphism verification.

    ``related`` reports the S-relatedness precondition; when it fails the
    morphism identity is not attempted and ``checked`` is False.
    """

    related: CheckResultH
    checked: bool
    ok: bool
    witness: Poly | None = None


def bracket_morphism_check(
    S: GenFunction,
    H_M: Hamiltonian,
    H_N: Hamiltonian,
    g: Poly,
    cap: int,
    q_cap: int | None = None,
) -> BracketMorphismResult:
    """Verify that the thick pull-back intertwines the Hamiltonian actions.

    The target vector field is applied to the graded argument (momenta become
    lam * dg/dy) and compared against the source Hamiltonian evaluated on the
    x-gradient of the graded pull-back, exactly modulo lambda^cap.
    """
    chart = S.chart
    chart.check_target_function(g)
    related = s_related_check(H_M, H_N, S, q_cap if q_cap is not None else cap)
    if not related.ok:
        return BracketMorphismResult(related, checked=False, ok=False)
    lam = chart.lam(cap, None)
    g_capped = g.truncated(cap, None)
    flow_n = H_N.value.truncated(cap, None).substitute(
        {chart.q(a): lam * g_capped.partial(chart.y(a)) for a in range(1, chart.dim_n + 1)}
    )
    argument = lam * g_capped + chart.eps(cap, None) * flow_n
    lhs = apply_generating(S, argument, cap).epsilon_part()
    pulled = apply_generating(S, lam * g_capped, cap)
    rhs = H_M.value.truncated(cap, None).substitute(
        {chart.p(i): pulled.partial(chart.x(i)) for i in range(1, chart.dim_m + 1)}
    )
    witness = lhs - rhs
    ok = witness.is_zero()
    return BracketMorphismResult(related, checked=True, ok=ok, witness=None if ok else witness)


def read_hamiltonian(path: str, chart: ChartPair, side: str) -> Hamiltonian:
    """Load a Hamiltonian fixture: header ``dims m K_p`` and one expression
    over x1..xm, p1..pm.  For a target-side Hamiltonian the loader renames
    x_i -> y_i and p_i -> q_i into the shared chart."""
    lines = parse.expression_lines(path)
    if len(lines) != 2:
        raise UsageError(f"{path}: expected a header line and one expression line")
    lineno, header = lines[0]
    fields = header.split()
    if len(fields) != 3 or fields[0] != "dims":
        raise UsageError(f"{path}:{lineno}: expected header 'dims m K_p'")
    try:
        dim, p_cap = int(fields[1]), int(fields[2])
    except ValueError:
        raise UsageError(f"{path}:{lineno}: non-integer field in header") from None
    expected = chart.dim_m if side == SIDE_M else chart.dim_n
    if dim != expected:
        raise UsageError(f"{path}: declared dim {dim} does not match the chart side {side}")
    expr_lineno, expr = lines[1]
    if side == SIDE_N:
        renamed = []
        for tok in parse.tokenize(expr):
            text = tok.text
            if tok.kind == parse.SYM and text[0] in "xp" and text[1:].isdigit():
                text = ("y" if text[0] == "x" else "q") + text[1:]
            renamed.append(text)
        expr = " ".join(renamed)
    try:
        value = chart.poly(expr)
    except parse.ParseError as exc:
        raise UsageError(f"{path}:{expr_lineno}: {exc}") from None
    return Hamiltonian(chart, side, value, p_cap)

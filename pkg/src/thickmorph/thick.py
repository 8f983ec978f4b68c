"""Generating functions and the thick-morphism pull-back.

The central objects:

  * ``ChartPair``    -- one chart x^1..x^m on the source, y^1..y^n on the
                        target, with covectors q_a, momenta p_i, reconstruction
                        parameters qb_a and the grading/infinitesimal symbols,
                        all living in a single VarTable.
  * ``GenFunction``  -- S(x,q) stored as symmetric coefficient tensors S_k,
                        one polynomial-in-x entry per sorted multi-index.
  * ``solve_y_map``  -- the fixed-point solver for the formal map y(x,g),
                        iterating y <- dS/dq at q = d(lam*g)/dy, order-stable
                        under the lambda cap.
  * ``pullback``     -- lam*g(y(x)) + S_0 + sum_{k>=2}(1-k)<S_k, q^k>, using
                        the Euler identity for S - y*q so no cancellation
                        bookkeeping is needed.
  * closed forms     -- the order-<=2 map and order-<=3 pull-back, summed
                        directly from the tensors; an independent route used
                        to cross-check the solver.

The solver and ``apply_generating`` accept *pre-graded* arguments: any
polynomial in the target coordinates whose terms already carry their lambda
(and optionally epsilon) weights.  The public entry points wrap a plain g as
lam*g; differentials feed lam*g + eps*h.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from . import parse
from .ring import (
    EPSILON,
    LAMBDA,
    PARAM,
    P_MOMENTUM,
    Q_COVECTOR,
    X_COORD,
    Y_COORD,
    Poly,
    UsageError,
    VarTable,
)

_RESERVED = re.compile(r"^(x\d+|y\d+|q\d+|p\d+|qb\d+|lam|eps)$")


class ChartPair:
    """Coordinate charts for source and target plus all bookkeeping symbols."""

    __slots__ = ("dim_m", "dim_n", "params", "table")

    def __init__(self, dim_m: int, dim_n: int, params: tuple[str, ...] = ()):
        if dim_m < 1 or dim_n < 1:
            raise UsageError("chart dimensions must be positive")
        params = tuple(sorted(set(params)))
        for p in params:
            if _RESERVED.match(p):
                raise UsageError(f"parameter name {p!r} collides with a reserved symbol")
        symbols: list[str] = []
        classes: list[str] = []
        for i in range(1, dim_m + 1):
            symbols.append(f"x{i}")
            classes.append(X_COORD)
        for a in range(1, dim_n + 1):
            symbols.append(f"y{a}")
            classes.append(Y_COORD)
        for a in range(1, dim_n + 1):
            symbols.append(f"q{a}")
            classes.append(Q_COVECTOR)
        for i in range(1, dim_m + 1):
            symbols.append(f"p{i}")
            classes.append(P_MOMENTUM)
        for a in range(1, dim_n + 1):
            symbols.append(f"qb{a}")
            classes.append(PARAM)
        for p in params:
            symbols.append(p)
            classes.append(PARAM)
        symbols += ["lam", "eps"]
        classes += [LAMBDA, EPSILON]
        object.__setattr__(self, "dim_m", dim_m)
        object.__setattr__(self, "dim_n", dim_n)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "table", VarTable(symbols, classes))

    def __setattr__(self, name, value):
        raise AttributeError("ChartPair is immutable")

    def __eq__(self, other):
        return isinstance(other, ChartPair) and self.table == other.table

    def __repr__(self):
        return f"ChartPair(dim_m={self.dim_m}, dim_n={self.dim_n}, params={self.params!r})"

    # symbol name helpers (1-based indices, matching the chart labels)
    def x(self, i: int) -> str:
        return f"x{i}"

    def y(self, a: int) -> str:
        return f"y{a}"

    def q(self, a: int) -> str:
        return f"q{a}"

    def p(self, i: int) -> str:
        return f"p{i}"

    def qb(self, a: int) -> str:
        return f"qb{a}"

    @property
    def x_syms(self) -> list[str]:
        return [f"x{i}" for i in range(1, self.dim_m + 1)]

    @property
    def y_syms(self) -> list[str]:
        return [f"y{a}" for a in range(1, self.dim_n + 1)]

    @property
    def q_syms(self) -> list[str]:
        return [f"q{a}" for a in range(1, self.dim_n + 1)]

    @property
    def p_syms(self) -> list[str]:
        return [f"p{i}" for i in range(1, self.dim_m + 1)]

    @property
    def qb_syms(self) -> list[str]:
        return [f"qb{a}" for a in range(1, self.dim_n + 1)]

    def poly(self, src: str, k_lambda=None, k_q=None) -> Poly:
        """Parse an expression over this chart's table."""
        return parse.parse_poly(src, self.table, k_lambda, k_q)

    def lam(self, k_lambda=None, k_q=None) -> Poly:
        return Poly.var(self.table, "lam", k_lambda, k_q)

    def eps(self, k_lambda=None, k_q=None) -> Poly:
        return Poly.var(self.table, "eps", k_lambda, k_q)

    def check_target_function(self, g: Poly, what: str = "g") -> None:
        """Functions fed to pull-backs live on N: y-symbols and parameters only."""
        if g.table != self.table:
            raise UsageError(f"{what} does not live over this chart's VarTable")
        if not g.uses_only({Y_COORD, PARAM}):
            raise UsageError(f"{what} must contain only target coordinates and parameters")


def multiplicity(idx: tuple[int, ...]) -> int:
    """Number of distinct orderings of a sorted multi-index."""
    counts = Counter(idx)
    mult = math.factorial(len(idx))
    for c in counts.values():
        mult //= math.factorial(c)
    return mult


def sorted_multi_indices(dim_n: int, k: int) -> list[tuple[int, ...]]:
    """All non-decreasing index tuples of length k over 1..dim_n."""
    if k == 0:
        return [()]
    out = []

    def rec(prefix, start):
        if len(prefix) == k:
            out.append(tuple(prefix))
            return
        for a in range(start, dim_n + 1):
            rec(prefix + [a], a)

    rec([], 1)
    return out


class GenFunction:
    """Generating function S(x,q) as symmetric tensors with Poly-in-x entries.

    Only sorted multi-indices are stored; ``entry`` answers for any index
    order.  ``as_poly`` recovers S as a polynomial in (x, q) by contracting
    each entry with its q-monomial times the number of distinct orderings.
    """

    __slots__ = ("chart", "k_q", "tensors")

    def __init__(self, chart: ChartPair, k_q: int, tensors):
        if k_q < 0:
            raise UsageError("q-degree bound must be non-negative")
        clean: dict[int, dict[tuple[int, ...], Poly]] = {}
        for k, entries in tensors.items():
            if not 0 <= k <= k_q:
                raise UsageError(f"tensor order {k} outside 0..{k_q}")
            for idx, value in entries.items():
                idx = tuple(idx)
                if len(idx) != k:
                    raise UsageError(f"index {idx} has wrong length for order {k}")
                if tuple(sorted(idx)) != idx:
                    raise UsageError(f"multi-index {idx} is not sorted")
                if not all(1 <= a <= chart.dim_n for a in idx):
                    raise UsageError(f"multi-index {idx} outside 1..{chart.dim_n}")
                if not isinstance(value, Poly):
                    raise UsageError("tensor entries must be Poly values")
                value = value.truncated(None, None)
                if not value.uses_only({X_COORD, PARAM}):
                    raise UsageError("tensor entries may contain only x-symbols and parameters")
                if value.table != chart.table:
                    raise UsageError("tensor entry over a foreign VarTable")
                if idx in clean.get(k, {}):
                    raise UsageError(f"duplicate tensor entry for order {k}, index {idx}")
                if not value.is_zero():
                    clean.setdefault(k, {})[idx] = value
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "k_q", k_q)
        object.__setattr__(self, "tensors", clean)

    def __setattr__(self, name, value):
        raise AttributeError("GenFunction is immutable")

    def __eq__(self, other):
        """Tensor-by-tensor equality (zero entries are never stored)."""
        return (
            isinstance(other, GenFunction)
            and self.chart.table == other.chart.table
            and self.tensors == other.tensors
        )

    def __repr__(self):
        n_entries = sum(len(v) for v in self.tensors.values())
        return f"GenFunction(k_q={self.k_q}, entries={n_entries})"

    def entry(self, k: int, idx: tuple[int, ...]) -> Poly:
        """Symmetric lookup: any index order; missing entries are zero."""
        value = self.tensors.get(k, {}).get(tuple(sorted(idx)))
        if value is None:
            return Poly.zero(self.chart.table)
        return value

    def s1(self, a: int) -> Poly:
        return self.entry(1, (a,))

    def s0(self) -> Poly:
        return self.entry(0, ())

    def as_poly(self, k_lambda=None, k_q=None) -> Poly:
        """S as a polynomial in (x, q), inverse of tensor extraction."""
        table = self.chart.table
        acc = Poly.zero(table, k_lambda, k_q)
        for k, entries in sorted(self.tensors.items()):
            for idx, value in sorted(entries.items()):
                term = value.truncated(k_lambda, k_q).scale(multiplicity(idx))
                for a in idx:
                    term = term * Poly.var(table, self.chart.q(a), k_lambda, k_q)
                acc = acc + term
        return acc

    def truncated(self, k: int) -> "GenFunction":
        """Tower member: S with all tensors of order > k removed."""
        kept = {j: dict(entries) for j, entries in self.tensors.items() if j <= k}
        return GenFunction(self.chart, k, kept)

    def is_linear(self) -> bool:
        return all(k <= 1 for k in self.tensors)


@dataclass(frozen=True)
class GradedFunction:
    """A pull-back value: polynomial in source coordinates and the grading."""

    value: Poly

    def __post_init__(self):
        if not self.value.uses_only({X_COORD, PARAM, LAMBDA, EPSILON}):
            raise UsageError("graded function may not contain target coordinates or covectors")

    def component(self, k: int) -> Poly:
        return self.value.grade_component(k)

    def orders(self) -> list[int]:
        lam = self.value.table.lam_index
        return sorted({exp[lam] for exp in self.value.terms})


@dataclass(frozen=True)
class FormalMap:
    """Components of the formal map y^a(x, g), one Poly in (x, lam) per a."""

    chart: ChartPair
    components: tuple[Poly, ...]
    cap: int

    def component(self, a: int) -> Poly:
        return self.components[a - 1]

    def apply_to(self, h: Poly) -> Poly:
        """Compose: substitute the map into a function of the target coordinates."""
        bindings = {self.chart.y(a): self.components[a - 1] for a in range(1, self.chart.dim_n + 1)}
        return h.truncated(self.cap, None).substitute(bindings)


# -- the fixed-point engine -------------------------------------------------


def solve_formal_map(S: GenFunction, argument: Poly, cap: int, passes: int | None = None) -> list[Poly]:
    """Fixed point of y = dS/dq at q = d(argument)/dy, for a pre-graded argument.

    Every substituted q-value carries grading weight >= 1 (lambda or eps), so
    each pass determines one further weight; cap+2 passes reach the fixed
    point for any argument the engine accepts, with one pass to spare.
    """
    chart = S.chart
    A = argument.truncated(cap, None)
    jets = [A.partial(chart.y(a)) for a in range(1, chart.dim_n + 1)]
    s_poly = S.as_poly(cap, None)
    ds_dq = [s_poly.partial(chart.q(a)) for a in range(1, chart.dim_n + 1)]
    y = [S.s1(a).truncated(cap, None) for a in range(1, chart.dim_n + 1)]
    for _ in range(cap + 2 if passes is None else passes):
        y_bind = {chart.y(a): y[a - 1] for a in range(1, chart.dim_n + 1)}
        q_vals = [jet.substitute(y_bind) for jet in jets]
        q_bind = {chart.q(a): q_vals[a - 1] for a in range(1, chart.dim_n + 1)}
        y = [d.substitute(q_bind) for d in ds_dq]
    return y


def apply_generating(S: GenFunction, argument: Poly, cap: int) -> Poly:
    """Pull the pre-graded argument back through the thick morphism of S.

    Returns argument(y(x)) + S_0 + sum_{k>=2} (1-k) <S_k, q^k> with
    q_a = d(argument)/dy^a along the formal map, truncated at the cap.
    S - y*q collapses to the (1-k) sum by the Euler identity in q.
    """
    chart = S.chart
    A = argument.truncated(cap, None)
    y = solve_formal_map(S, A, cap)
    y_bind = {chart.y(a): y[a - 1] for a in range(1, chart.dim_n + 1)}
    q_vals = [A.partial(chart.y(a)).substitute(y_bind) for a in range(1, chart.dim_n + 1)]
    acc = A.substitute(y_bind) + S.s0().truncated(cap, None)
    for k, entries in sorted(S.tensors.items()):
        if k < 2:
            continue
        for idx, value in sorted(entries.items()):
            term = value.truncated(cap, None).scale((1 - k) * multiplicity(idx))
            for a in idx:
                term = term * q_vals[a - 1]
            acc = acc + term
    return acc


# -- public operations --------------------------------------------------------


def solve_y_map(S: GenFunction, g: Poly, cap: int) -> FormalMap:
    """The formal map y(x, g) through order lambda^cap."""
    S.chart.check_target_function(g)
    argument = S.chart.lam(cap, None) * g.truncated(cap, None)
    return FormalMap(S.chart, tuple(solve_formal_map(S, argument, cap)), cap)


def pullback(S: GenFunction, g: Poly, cap: int) -> GradedFunction:
    """Non-linear pull-back of g through order lambda^cap."""
    S.chart.check_target_function(g)
    argument = S.chart.lam(cap, None) * g.truncated(cap, None)
    return GradedFunction(apply_generating(S, argument, cap))


def _jets(S: GenFunction, g: Poly, cap: int):
    """Value, gradient and Hessian of g at the support point y = S_1(x)."""
    chart = S.chart
    base = {chart.y(a): S.s1(a).truncated(cap, None) for a in range(1, chart.dim_n + 1)}
    g = g.truncated(cap, None)
    g0 = g.substitute(base)
    g1 = [g.partial(chart.y(a)).substitute(base) for a in range(1, chart.dim_n + 1)]
    g2 = [
        [g.partial(chart.y(a)).partial(chart.y(b)).substitute(base) for b in range(1, chart.dim_n + 1)]
        for a in range(1, chart.dim_n + 1)
    ]
    return g0, g1, g2


def closed_form_y2(S: GenFunction, g: Poly) -> FormalMap:
    """Orders 0..2 of the formal map, summed directly from the tensors:
    S_1^a + 2 S_2^{ab} g*_b, then 3 S_3^{abc} g*_b g*_c + 4 S_2^{ab} S_2^{cd} g*_{bc} g*_d.
    """
    cap = 2
    chart = S.chart
    S.chart.check_target_function(g)
    _, g1, g2 = _jets(S, g, cap)
    lam = chart.lam(cap, None)
    rng = range(1, chart.dim_n + 1)
    components = []
    for a in rng:
        comp = S.s1(a).truncated(cap, None)
        first = Poly.zero(chart.table, cap, None)
        for b in rng:
            first = first + S.entry(2, (a, b)).truncated(cap, None) * g1[b - 1] * 2
        comp = comp + lam * first
        second = Poly.zero(chart.table, cap, None)
        for b in rng:
            for c in rng:
                second = second + S.entry(3, (a, b, c)).truncated(cap, None) * g1[b - 1] * g1[c - 1] * 3
                for d in rng:
                    second = second + (
                        S.entry(2, (a, b)).truncated(cap, None)
                        * S.entry(2, (c, d)).truncated(cap, None)
                        * g2[b - 1][c - 1]
                        * g1[d - 1]
                        * 4
                    )
        comp = comp + lam * lam * second
        components.append(comp)
    return FormalMap(chart, tuple(components), cap)


def closed_form_pullback3(S: GenFunction, g: Poly) -> GradedFunction:
    """Orders 0..3 of the pull-back, summed directly from the tensors:
    S_0 + g* + S_2^{ab} g*_a g*_b + (S_3^{abc} g*_a g*_b g*_c
    + 2 S_2^{ac} S_2^{bd} g*_{ab} g*_c g*_d).
    """
    cap = 3
    chart = S.chart
    S.chart.check_target_function(g)
    g0, g1, g2 = _jets(S, g, cap)
    lam = chart.lam(cap, None)
    rng = range(1, chart.dim_n + 1)
    acc = S.s0().truncated(cap, None) + lam * g0
    order2 = Poly.zero(chart.table, cap, None)
    for a in rng:
        for b in rng:
            order2 = order2 + S.entry(2, (a, b)).truncated(cap, None) * g1[a - 1] * g1[b - 1]
    acc = acc + lam * lam * order2
    order3 = Poly.zero(chart.table, cap, None)
    for a in rng:
        for b in rng:
            for c in rng:
                order3 = order3 + (
                    S.entry(3, (a, b, c)).truncated(cap, None) * g1[a - 1] * g1[b - 1] * g1[c - 1]
                )
                for d in rng:
                    order3 = order3 + (
                        S.entry(2, (a, c)).truncated(cap, None)
                        * S.entry(2, (b, d)).truncated(cap, None)
                        * g2[a - 1][b - 1]
                        * g1[c - 1]
                        * g1[d - 1]
                        * 2
                    )
    acc = acc + lam * lam * lam * order3
    return GradedFunction(acc)


# -- fixture format ------------------------------------------------------------


@dataclass(frozen=True)
class GenFixture:
    """A generating-function file: the tensors plus optional corruption lines."""

    gen: GenFunction
    corruption: tuple[tuple[int, Poly], ...]


def _classify_symbols(symbols: set[str], dim_m: int, dim_n: int, where: str) -> set[str]:
    """Split scanned symbols into chart coordinates and free parameters."""
    params = set()
    for sym in symbols:
        m = _RESERVED.match(sym)
        if not m:
            params.add(sym)
            continue
        if sym.startswith("x") and sym[1:].isdigit():
            if not 1 <= int(sym[1:]) <= dim_m:
                raise UsageError(f"{where}: coordinate {sym} outside declared dims")
        elif sym in ("lam", "eps"):
            raise UsageError(f"{where}: {sym} may not appear in fixture expressions")
        else:
            raise UsageError(f"{where}: symbol {sym} is not allowed in a coefficient")
    return params


def read_genfunction(
    path: str, chart: ChartPair | None = None, extra_params: tuple[str, ...] = ()
) -> GenFixture:
    """Load a generating-function fixture.

    Format: header line ``dims m n K_q``, then lines ``k a1..ak <expr>``
    giving the tensor entry for the sorted multi-index, plus optional
    ``corrupt k <expr>`` lines declaring an order-k evaluator perturbation.
    ``extra_params`` folds parameter symbols from companion inputs into the
    chart so that everything parses over one VarTable.
    """
    lines = parse.expression_lines(path)
    if not lines:
        raise UsageError(f"{path}: empty generating-function file")
    lineno, header = lines[0]
    fields = header.split()
    if len(fields) != 4 or fields[0] != "dims":
        raise UsageError(f"{path}:{lineno}: expected header 'dims m n K_q'")
    try:
        dim_m, dim_n, k_q = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError:
        raise UsageError(f"{path}:{lineno}: non-integer field in header") from None

    entries: list[tuple[int, int, tuple[int, ...], str]] = []
    corruptions: list[tuple[int, int, str]] = []
    for lineno, text in lines[1:]:
        fields = text.split()
        if fields[0] == "corrupt":
            if len(fields) < 3:
                raise UsageError(f"{path}:{lineno}: expected 'corrupt k <expr>'")
            try:
                k = int(fields[1])
            except ValueError:
                raise UsageError(f"{path}:{lineno}: non-integer corruption order") from None
            corruptions.append((lineno, k, text.split(None, 2)[2]))
            continue
        try:
            k = int(fields[0])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: expected tensor order") from None
        if len(fields) < k + 2:
            raise UsageError(f"{path}:{lineno}: expected {k} indices and an expression")
        try:
            idx = tuple(int(f) for f in fields[1 : k + 1])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: non-integer tensor index") from None
        expr = text.split(None, k + 1)[k + 1]
        entries.append((lineno, k, idx, expr))

    if chart is None:
        symbols: set[str] = set()
        for _, _, _, expr in entries:
            symbols |= parse.scan_symbols(expr)
        for _, _, expr in corruptions:
            symbols |= parse.scan_symbols(expr)
        params = _classify_symbols(symbols, dim_m, dim_n, path)
        chart = ChartPair(dim_m, dim_n, tuple(params) + tuple(extra_params))
    elif chart.dim_m != dim_m or chart.dim_n != dim_n:
        raise UsageError(f"{path}: declared dims ({dim_m},{dim_n}) do not match the chart")

    def parse_entry(lineno: int, expr: str) -> Poly:
        try:
            return chart.poly(expr)
        except parse.ParseError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None

    tensors: dict[int, dict[tuple[int, ...], Poly]] = {}
    for lineno, k, idx, expr in entries:
        if idx in tensors.get(k, {}):
            raise UsageError(f"{path}:{lineno}: duplicate entry for order {k}, index {idx}")
        tensors.setdefault(k, {})[idx] = parse_entry(lineno, expr)
    gen = GenFunction(chart, k_q, tensors)
    pert = tuple((k, parse_entry(lineno, expr)) for lineno, k, expr in corruptions)
    return GenFixture(gen, pert)

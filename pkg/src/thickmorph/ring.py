"""Exact multivariate polynomial arithmetic with grading-aware truncation.

A polynomial is a dictionary mapping dense exponent tuples (one non-negative
integer per symbol of a VarTable) to Fraction coefficients:

    x1^2*q1 + 3/2  over  (x1, q1, lam, eps)  ->  {(2, 1, 0, 0): 1, (0, 0, 0, 0): 3/2}

Zero coefficients are never stored; the zero polynomial is the empty dict.
Exact rational coefficients make every algebraic identity checkable as
literal equality, so there is no tolerance tuning anywhere downstream.

Symbols are tagged with a class that determines how truncation treats them:

  * ``lam``      -- the grading parameter; terms above the ``k_lambda`` cap
                    are dropped eagerly at every arithmetic step,
  * ``eps``      -- a square-zero infinitesimal (any exponent >= 2 vanishes),
  * q-covectors  -- terms whose *total* q-degree exceeds ``k_q`` are dropped.

Dropping eagerly is sound: both caps generate ideals, so every computation
happens in the corresponding quotient ring.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Scalar = Fraction
ScalarLike = Union[int, Fraction]

# Symbol classes.
X_COORD = "x-coordinate"
Y_COORD = "y-coordinate"
Q_COVECTOR = "q-covector"
P_MOMENTUM = "p-momentum"
LAMBDA = "lambda"
EPSILON = "epsilon"
PARAM = "free-parameter"

_CLASSES = {X_COORD, Y_COORD, Q_COVECTOR, P_MOMENTUM, LAMBDA, EPSILON, PARAM}


class EngineError(Exception):
    """Base class for errors raised by the engine."""


class UsageError(EngineError):
    """An operation was called with incompatible or malformed arguments."""


class RangeError(EngineError):
    """A requested grading order lies outside the truncation cap."""


class VarTable:
    """Ordered list of symbols, each tagged with a class.

    The order is canonical: it fixes both the layout of exponent tuples and
    the term ordering used by the serializer.
    """

    __slots__ = ("symbols", "classes", "_index", "lam_index", "eps_index", "q_indices")

    def __init__(self, symbols: Sequence[str], classes: Sequence[str]):
        symbols = tuple(symbols)
        classes = tuple(classes)
        if len(symbols) != len(classes):
            raise UsageError("symbols and classes must have equal length")
        if len(set(symbols)) != len(symbols):
            raise UsageError("duplicate symbol in VarTable")
        for cls in classes:
            if cls not in _CLASSES:
                raise UsageError(f"unknown symbol class: {cls!r}")
        lam = [i for i, c in enumerate(classes) if c == LAMBDA]
        eps = [i for i, c in enumerate(classes) if c == EPSILON]
        if len(lam) != 1:
            raise UsageError("VarTable must contain exactly one lambda symbol")
        if len(eps) > 1:
            raise UsageError("VarTable admits at most one epsilon symbol")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})
        object.__setattr__(self, "lam_index", lam[0])
        object.__setattr__(self, "eps_index", eps[0] if eps else None)
        object.__setattr__(
            self, "q_indices", tuple(i for i, c in enumerate(classes) if c == Q_COVECTOR)
        )

    def __setattr__(self, name, value):
        raise AttributeError("VarTable is immutable")

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VarTable)
            and self.symbols == other.symbols
            and self.classes == other.classes
        )

    def __hash__(self) -> int:
        return hash((self.symbols, self.classes))

    def __repr__(self) -> str:
        return f"VarTable({list(self.symbols)!r})"

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UsageError(f"unknown symbol: {symbol!r}") from None

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def class_of(self, symbol: str) -> str:
        return self.classes[self.index(symbol)]

    def indices_of(self, cls: str) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.classes) if c == cls)

    def symbols_of(self, cls: str) -> tuple[str, ...]:
        return tuple(s for s, c in zip(self.symbols, self.classes) if c == cls)


Exponent = tuple  # tuple[int, ...], one entry per VarTable symbol


def _normalize(table: VarTable, terms: dict, k_lambda, k_q) -> dict:
    """Drop zero coefficients and apply the truncation ideals."""
    lam = table.lam_index
    eps = table.eps_index
    q_idx = table.q_indices
    out = {}
    for exp, coef in terms.items():
        if not coef:
            continue
        if eps is not None and exp[eps] >= 2:
            continue
        if k_lambda is not None and exp[lam] > k_lambda:
            continue
        if k_q is not None and q_idx and sum(exp[i] for i in q_idx) > k_q:
            continue
        out[exp] = coef
    return out


class Poly:
    """Immutable exact polynomial over a VarTable, with truncation caps.

    ``k_lambda`` is the maximal kept power of the grading symbol and ``k_q``
    the maximal kept total q-degree; ``None`` means uncapped.  Two polynomials
    over the same table compare equal iff their term maps agree -- caps do not
    take part in equality.
    """

    __slots__ = ("table", "terms", "k_lambda", "k_q")

    def __init__(self, table: VarTable, terms: Mapping, k_lambda=None, k_q=None):
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "terms", _normalize(table, dict(terms), k_lambda, k_q))
        object.__setattr__(self, "k_lambda", k_lambda)
        object.__setattr__(self, "k_q", k_q)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- constructors -----------------------------------------------------

    @classmethod
    def _raw(cls, table: VarTable, terms: dict, k_lambda, k_q) -> "Poly":
        """Internal fast path: terms are already normalized and cap-respecting."""
        self = object.__new__(cls)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "k_lambda", k_lambda)
        object.__setattr__(self, "k_q", k_q)
        return self

    @classmethod
    def zero(cls, table: VarTable, k_lambda=None, k_q=None) -> "Poly":
        return cls._raw(table, {}, k_lambda, k_q)

    @classmethod
    def const(cls, table: VarTable, value: ScalarLike, k_lambda=None, k_q=None) -> "Poly":
        exp = (0,) * len(table)
        return cls(table, {exp: Fraction(value)}, k_lambda, k_q)

    @classmethod
    def var(cls, table: VarTable, symbol: str, k_lambda=None, k_q=None) -> "Poly":
        exp = [0] * len(table)
        exp[table.index(symbol)] = 1
        return cls(table, {tuple(exp): Fraction(1)}, k_lambda, k_q)

    def _make(self, terms: dict) -> "Poly":
        return Poly._raw(self.table, terms, self.k_lambda, self.k_q)

    # -- basic queries ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Poly.const(self.table, other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.table == other.table and self.terms == other.terms

    def __repr__(self) -> str:
        from . import parse  # local import: parse depends on ring

        return f"Poly({parse.render_canonical(self)!r})"

    def same_caps(self, other: "Poly") -> bool:
        return self.k_lambda == other.k_lambda and self.k_q == other.k_q

    def _compat(self, other: "Poly") -> None:
        if self.table != other.table:
            raise UsageError("operands live over different VarTables")
        if not self.same_caps(other):
            raise UsageError(
                f"operands carry different caps: "
                f"({self.k_lambda},{self.k_q}) vs ({other.k_lambda},{other.k_q})"
            )

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(self.table, other, self.k_lambda, self.k_q)
        self._compat(other)
        terms = dict(self.terms)
        for exp, coef in other.terms.items():
            acc = terms.get(exp, 0) + coef
            if acc:
                terms[exp] = acc
            else:
                terms.pop(exp, None)
        return self._make(terms)

    __radd__ = __add__

    def __neg__(self):
        return self._make({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(self.table, other, self.k_lambda, self.k_q)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._compat(other)
        lam = self.table.lam_index
        eps = self.table.eps_index
        q_idx = self.table.q_indices
        kl, kq = self.k_lambda, self.k_q
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exp = tuple(map(int.__add__, e1, e2))
                if eps is not None and exp[eps] >= 2:
                    continue
                if kl is not None and exp[lam] > kl:
                    continue
                if kq is not None and q_idx and sum(exp[i] for i in q_idx) > kq:
                    continue
                acc = terms.get(exp, 0) + c1 * c2
                if acc:
                    terms[exp] = acc
                else:
                    del terms[exp]
        return self._make(terms)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def scale(self, value: ScalarLike) -> "Poly":
        value = Fraction(value)
        if not value:
            return self._make({})
        return self._make({e: c * value for e, c in self.terms.items()})

    def __pow__(self, n: int) -> "Poly":
        if not isinstance(n, int) or n < 0:
            raise UsageError("polynomial powers must be non-negative integers")
        result = Poly.const(self.table, 1, self.k_lambda, self.k_q)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # -- calculus and substitution ------------------------------------------

    def partial(self, symbol: str) -> "Poly":
        """Formal partial derivative with respect to ``symbol``."""
        i = self.table.index(symbol)
        terms = {}
        for exp, coef in self.terms.items():
            e = exp[i]
            if not e:
                continue
            new = exp[:i] + (e - 1,) + exp[i + 1 :]
            acc = terms.get(new, 0) + coef * e
            if acc:
                terms[new] = acc
            else:
                del terms[new]
        return self._make(terms)

    def substitute(self, bindings) -> "Poly":
        """Simultaneously replace symbols by polynomials.

        ``bindings`` maps symbol names to Poly values over the same table and
        caps.  Substitution happens in one pass: bindings never see each
        other's replacements.
        """
        if isinstance(bindings, Mapping):
            bindings = list(bindings.items())
        bound: dict[int, Poly] = {}
        for sym, val in bindings:
            i = self.table.index(sym)
            if not isinstance(val, Poly):
                val = Poly.const(self.table, val, self.k_lambda, self.k_q)
            self._compat(val)
            if i in bound:
                raise UsageError(f"symbol bound twice: {sym!r}")
            bound[i] = val
        if not bound:
            return self
        lam = self.table.lam_index
        eps = self.table.eps_index
        q_idx = self.table.q_indices
        kl, kq = self.k_lambda, self.k_q
        powers: dict[tuple[int, int], Poly] = {}

        def power(i: int, e: int) -> Poly:
            key = (i, e)
            if key not in powers:
                powers[key] = bound[i] ** e
            return powers[key]

        out: dict = {}
        for exp, coef in self.terms.items():
            piece = None
            stripped = None
            for i in bound:
                e = exp[i]
                if e:
                    if stripped is None:
                        stripped = list(exp)
                    stripped[i] = 0
                    p = power(i, e)
                    piece = p if piece is None else piece * p
            if piece is None:
                acc = out.get(exp, 0) + coef
                if acc:
                    out[exp] = acc
                else:
                    del out[exp]
                continue
            base = tuple(stripped)
            for pe, pc in piece.terms.items():
                new = tuple(map(int.__add__, base, pe))
                if eps is not None and new[eps] >= 2:
                    continue
                if kl is not None and new[lam] > kl:
                    continue
                if kq is not None and q_idx and sum(new[i] for i in q_idx) > kq:
                    continue
                acc = out.get(new, 0) + coef * pc
                if acc:
                    out[new] = acc
                else:
                    del out[new]
        return self._make(out)

    # -- grading ------------------------------------------------------------

    def grade_component(self, k: int) -> "Poly":
        """Coefficient of the k-th grading order (the lambda power removed)."""
        if k < 0:
            raise RangeError(f"grading order must be non-negative, got {k}")
        if self.k_lambda is not None and k > self.k_lambda:
            raise RangeError(f"grading order {k} exceeds cap {self.k_lambda}")
        lam = self.table.lam_index
        terms = {}
        for exp, coef in self.terms.items():
            if exp[lam] == k:
                terms[exp[:lam] + (0,) + exp[lam + 1 :]] = coef
        return self._make(terms)

    def lambda_degree(self) -> int:
        """Largest stored lambda power (0 for the zero polynomial)."""
        lam = self.table.lam_index
        return max((exp[lam] for exp in self.terms), default=0)

    def epsilon_part(self) -> "Poly":
        """Coefficient of the square-zero symbol (the symbol removed)."""
        eps = self.table.eps_index
        if eps is None:
            raise UsageError("VarTable carries no epsilon symbol")
        terms = {}
        for exp, coef in self.terms.items():
            if exp[eps] == 1:
                terms[exp[:eps] + (0,) + exp[eps + 1 :]] = coef
        return self._make(terms)

    def epsilon_free(self) -> "Poly":
        """The complement of epsilon_part: all terms without the infinitesimal."""
        eps = self.table.eps_index
        if eps is None:
            return self
        return self._make({e: c for e, c in self.terms.items() if e[eps] == 0})

    def q_degree(self) -> int:
        q_idx = self.table.indices_of(Q_COVECTOR)
        return max((sum(exp[i] for i in q_idx) for exp in self.terms), default=0)

    def truncated(self, k_lambda, k_q) -> "Poly":
        """Copy with new caps applied (``None`` lifts a cap)."""
        return Poly(self.table, self.terms, k_lambda, k_q)

    def uses_only(self, classes: Iterable[str]) -> bool:
        """True if every symbol occurring with nonzero exponent has one of the classes."""
        allowed = set(classes)
        for exp in self.terms:
            for e, cls in zip(exp, self.table.classes):
                if e and cls not in allowed:
                    return False
        return True

    def coefficient(self, assignment: Mapping[str, int]) -> "Poly":
        """Terms whose exponents match ``assignment`` exactly, those symbols removed."""
        idx = {self.table.index(s): e for s, e in assignment.items()}
        terms = {}
        for exp, coef in self.terms.items():
            if all(exp[i] == e for i, e in idx.items()):
                new = tuple(0 if i in idx else v for i, v in enumerate(exp))
                terms[new] = terms.get(new, 0) + coef
        return self._make({e: c for e, c in terms.items() if c})


def arith(a: Poly, b: Poly, op: str) -> Poly:
    """Dispatch named ring operations; mismatched tables raise UsageError."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise UsageError(f"unknown operation: {op!r}")

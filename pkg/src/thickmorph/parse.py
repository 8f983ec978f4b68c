"""Text format for polynomials: recursive-descent parser and canonical serializer.

Grammar (also the on-disk format for all fixtures, one expression per line,
``#`` starts a comment):

    expr     := term (('+'|'-') term)*
    term     := factor ('*' factor)*
    factor   := atom ('^' uint)?
    atom     := rational | symbol | '(' expr ')'
    rational := int ('/' uint)?
    symbol   := [A-Za-z][A-Za-z0-9_]*

Implicit multiplication is rejected and exponents must be non-negative
integers.  ``render_canonical`` is the inverse: deterministic, byte-for-byte
stable and injective over a fixed VarTable, so rendered strings can serve as
exact fixtures.
"""

from __future__ import annotations

from fractions import Fraction

from .ring import EngineError, Poly, VarTable


class ParseError(EngineError):
    """Malformed expression text; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownSymbolError(ParseError):
    """A symbol not present in the VarTable; ``symbol`` names it."""

    def __init__(self, symbol: str, offset: int):
        ParseError.__init__(self, f"unknown symbol {symbol!r}", offset)
        self.symbol = symbol


# Token kinds.
NUM = "num"
SYM = "sym"
OP = "op"
END = "end"

_OPERAND_POSITION = {None, "(", "+", "-", "*", "^"}


class Token:
    __slots__ = ("kind", "text", "offset", "value", "is_int")

    def __init__(self, kind, text, offset, value=None, is_int=False):
        self.kind = kind
        self.text = text
        self.offset = offset
        self.value = value
        self.is_int = is_int

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.offset})"


def tokenize(src: str) -> list[Token]:
    """Split source text into tokens, tracking byte offsets.

    A '-' immediately followed by a digit is folded into the number literal
    when it sits at operand position (start of input or after an operator),
    which is how the grammar's signed ``int`` is realized.
    """
    tokens: list[Token] = []
    i, n = 0, len(src)
    prev = None  # text of last significant token, for operand-position test
    while i < n:
        ch = src[i]
        if ch in " \t\r\n":
            i += 1
            continue
        start = i
        if ch == "-" and i + 1 < n and src[i + 1].isdigit() and prev in _OPERAND_POSITION:
            i += 1
            ch = src[i]
        if ch.isdigit():
            while i < n and src[i].isdigit():
                i += 1
            num_text = src[start:i]
            if i < n and src[i] == "/":
                den_start = i + 1
                j = den_start
                while j < n and src[j].isdigit():
                    j += 1
                if j == den_start:
                    raise ParseError("expected denominator digits after '/'", den_start)
                den = int(src[den_start:j])
                if den == 0:
                    raise ParseError("zero denominator", den_start)
                i = j
                tokens.append(Token(NUM, src[start:i], start, Fraction(int(num_text), den)))
            else:
                tokens.append(Token(NUM, num_text, start, Fraction(int(num_text)), is_int=True))
            prev = "num"
            continue
        if ch.isalpha():
            i += 1
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            tokens.append(Token(SYM, src[start:i], start))
            prev = "sym"
            continue
        if ch in "+-*^()":
            tokens.append(Token(OP, ch, start))
            prev = ch
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", start)
    tokens.append(Token(END, "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token], table: VarTable, k_lambda, k_q):
        self.tokens = tokens
        self.pos = 0
        self.table = table
        self.k_lambda = k_lambda
        self.k_q = k_q

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expr(self) -> Poly:
        acc = self.term()
        while self.peek().kind == OP and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> Poly:
        acc = self.factor()
        while self.peek().kind == OP and self.peek().text == "*":
            self.advance()
            acc = acc * self.factor()
        return acc

    def factor(self) -> Poly:
        base = self.atom()
        if self.peek().kind == OP and self.peek().text == "^":
            self.advance()
            tok = self.peek()
            if tok.kind != NUM or not tok.is_int:
                raise ParseError("expected integer exponent after '^'", tok.offset)
            if tok.value < 0:
                raise ParseError("negative exponents are not allowed", tok.offset)
            self.advance()
            base = base ** int(tok.value)
        return base

    def atom(self) -> Poly:
        tok = self.peek()
        if tok.kind == NUM:
            self.advance()
            return Poly.const(self.table, tok.value, self.k_lambda, self.k_q)
        if tok.kind == SYM:
            self.advance()
            if tok.text not in self.table:
                raise UnknownSymbolError(tok.text, tok.offset)
            return Poly.var(self.table, tok.text, self.k_lambda, self.k_q)
        if tok.kind == OP and tok.text == "(":
            self.advance()
            inner = self.expr()
            closing = self.peek()
            if closing.kind != OP or closing.text != ")":
                raise ParseError("expected ')'", closing.offset)
            self.advance()
            return inner
        raise ParseError("expected a number, symbol or '('", tok.offset)


def parse_poly(src: str, table: VarTable, k_lambda=None, k_q=None) -> Poly:
    """Parse an expression into an exact Poly over ``table``."""
    parser = _Parser(tokenize(src), table, k_lambda, k_q)
    poly = parser.expr()
    tail = parser.peek()
    if tail.kind != END:
        raise ParseError(f"unexpected {tail.text!r}", tail.offset)
    return poly


def _coeff_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _mono_str(table: VarTable, exp) -> str:
    parts = []
    for sym, e in zip(table.symbols, exp):
        if e == 1:
            parts.append(sym)
        elif e > 1:
            parts.append(f"{sym}^{e}")
    return "*".join(parts)


def render_canonical(a: Poly) -> str:
    """Deterministic canonical form: terms in descending lexicographic
    exponent order of the VarTable, coefficients as ``p`` or ``p/q``."""
    if a.is_zero():
        return "0"
    pieces = []
    for i, (exp, coef) in enumerate(sorted(a.terms.items(), reverse=True)):
        mono = _mono_str(a.table, exp)
        if i == 0:
            mag, prefix = coef, ""
        else:
            mag = abs(coef)
            prefix = " - " if coef < 0 else " + "
        if not mono:
            body = _coeff_str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{_coeff_str(mag)}*{mono}"
        pieces.append(prefix + body)
    return "".join(pieces)


def expression_lines(path: str) -> list[tuple[int, str]]:
    """Read a fixture file: one expression per line, '#' comments stripped.

    Returns (1-based line number, stripped text) for non-empty lines.
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                out.append((lineno, text))
    return out


def scan_symbols(src: str) -> set[str]:
    """All symbol names occurring in an expression (for parameter discovery)."""
    return {tok.text for tok in tokenize(src) if tok.kind == SYM}

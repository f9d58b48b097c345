"""Pattern language: alphabets, regular-expression ASTs and the text parser.

Concrete syntax::

    expr   := term ('+' term)*        union
    term   := factor (';' factor)*    concatenation
    factor := base '*'*               star closure
    base   := IDENT | '(' expr ')' | <empty>

The empty string denotes the empty word.  Binary operators nest to the right,
so ``a;c;c`` is ``Concat(a, Concat(c, c))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union as _TypingUnion


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownSymbolError(PatternError):
    def __init__(self, symbol: str):
        super().__init__(f"symbol {symbol!r} is not in the alphabet")
        self.symbol = symbol


IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Alphabet:
    """Ordered, duplicate-free set of event-type names."""

    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __init__(self, symbols: Iterable[str]):
        symbols = tuple(symbols)
        if not symbols:
            raise ValueError("alphabet must not be empty")
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"alphabet has duplicate symbols: {symbols}")
        for s in symbols:
            if not isinstance(s, str) or not IDENT_RE.fullmatch(s):
                raise ValueError(f"invalid symbol name {s!r}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbolError(symbol) from None


@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class Epsilon:
    pass


@dataclass(frozen=True)
class Union:
    left: "PatternAst"
    right: "PatternAst"


@dataclass(frozen=True)
class Concat:
    left: "PatternAst"
    right: "PatternAst"


@dataclass(frozen=True)
class Star:
    child: "PatternAst"


PatternAst = _TypingUnion[Symbol, Epsilon, Union, Concat, Star]

_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(\S))?")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m.group(1) is not None:
            tokens.append(("IDENT", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            ch = m.group(2)
            if ch not in "+;*()":
                raise PatternSyntaxError(f"unexpected character {ch!r}", m.start(2))
            tokens.append((ch, ch, m.start(2)))
        else:
            break  # trailing whitespace
        pos = m.end()
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: Alphabet | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.alphabet = alphabet

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expr(self) -> PatternAst:
        terms = [self.term()]
        while self.peek() == "+":
            self.take()
            terms.append(self.term())
        return _fold_right(Union, terms)

    def term(self) -> PatternAst:
        factors = [self.factor()]
        while self.peek() == ";":
            self.take()
            factors.append(self.factor())
        return _fold_right(Concat, factors)

    def factor(self) -> PatternAst:
        node = self.base()
        while self.peek() == "*":
            self.take()
            node = Star(node)
        return node

    def base(self) -> PatternAst:
        kind, value, pos = self.tokens[self.i]
        if kind == "IDENT":
            self.take()
            if self.alphabet is not None and value not in self.alphabet:
                raise UnknownSymbolError(value)
            return Symbol(value)
        if kind == "(":
            self.take()
            node = self.expr()
            kind, _, pos = self.take()
            if kind != ")":
                raise PatternSyntaxError("expected ')'", pos)
            return node
        return Epsilon()


def _fold_right(cls, items: list) -> PatternAst:
    node = items[-1]
    for item in reversed(items[:-1]):
        node = cls(item, node)
    return node


def parse_pattern(text: str, alphabet: Alphabet | None = None) -> PatternAst:
    """Parse ``text`` into an AST, validating symbols against ``alphabet`` if given."""
    parser = _Parser(text, alphabet)
    ast = parser.expr()
    kind, value, pos = parser.tokens[parser.i]
    if kind != "EOF":
        raise PatternSyntaxError(f"unexpected {value!r}", pos)
    return ast


def ast_symbols(ast: PatternAst) -> set[str]:
    if isinstance(ast, Symbol):
        return {ast.name}
    if isinstance(ast, Epsilon):
        return set()
    if isinstance(ast, Star):
        return ast_symbols(ast.child)
    return ast_symbols(ast.left) | ast_symbols(ast.right)


def validate_ast(ast: PatternAst, alphabet: Alphabet) -> None:
    for name in sorted(ast_symbols(ast)):
        if name not in alphabet:
            raise UnknownSymbolError(name)


def ast_depth(ast: PatternAst) -> int:
    if isinstance(ast, (Symbol, Epsilon)):
        return 0
    if isinstance(ast, Star):
        return 1 + ast_depth(ast.child)
    return 1 + max(ast_depth(ast.left), ast_depth(ast.right))


def nullable(ast: PatternAst) -> bool:
    """True when the empty word belongs to the pattern's language."""
    if isinstance(ast, (Epsilon, Star)):
        return True
    if isinstance(ast, Symbol):
        return False
    if isinstance(ast, Union):
        return nullable(ast.left) or nullable(ast.right)
    return nullable(ast.left) and nullable(ast.right)


_PREC = {Union: 0, Concat: 1, Star: 2, Symbol: 3, Epsilon: 3}


def format_pattern(ast: PatternAst) -> str:
    """Render ``ast`` in the pattern syntax; re-parsing gives back the same tree."""
    if isinstance(ast, Epsilon):
        return ""
    return _fmt(ast)


def _fmt(ast: PatternAst) -> str:
    if isinstance(ast, Symbol):
        return ast.name
    if isinstance(ast, Epsilon):
        return "()"
    if isinstance(ast, Star):
        return _wrap(ast.child, _PREC[Star]) + "*"
    op = "+" if isinstance(ast, Union) else ";"
    prec = _PREC[type(ast)]
    # left operand of the same operator needs parens to keep right nesting
    return _wrap(ast.left, prec + 1) + op + _wrap(ast.right, prec)


def _wrap(ast: PatternAst, min_prec: int) -> str:
    text = _fmt(ast)
    if _PREC[type(ast)] < min_prec:
        return f"({text})"
    return text

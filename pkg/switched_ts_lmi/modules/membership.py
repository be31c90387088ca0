"""
Membership-function mini-grammar: tokenizer, parser and evaluator.

Grammar (closed; no arbitrary code):

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^2')?
    atom   := NUMBER | 'x[' INT ']' | ('sin' | 'cos') '(' expr ')'
            | 'one_minus(' INT ')' | '(' expr ')'

`x[k]` is the k-th (1-based) state entry of the owning subsystem and
`one_minus(r)` is 1 minus the r-th (1-based) sibling membership of the same mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .constants import MEMBERSHIP_TOKEN_RE
from .errors import InvalidMembershipError, MembershipGrammarError

Token = Tuple[str, str, int]   # (kind, text, position)
Node = tuple


def tokenize(expression: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    text = expression.rstrip()
    while pos < len(text):
        m = MEMBERSHIP_TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise MembershipGrammarError("unexpected character", expression, bad)
        start = m.start(m.lastgroup) if m.lastgroup else pos
        if m.group("number") is not None:
            tokens.append(("number", m.group("number"), start))
        elif m.group("state") is not None:
            tokens.append(("state", m.group("state_idx"), m.start("state")))
        elif m.group("onem") is not None:
            tokens.append(("onem", m.group("onem_idx"), m.start("onem")))
        elif m.group("func") is not None:
            tokens.append(("func", m.group("func"), m.start("func")))
        elif m.group("square") is not None:
            tokens.append(("square", "^2", m.start("square")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, expression: str):
        self.expression = expression
        self.tokens = tokenize(expression)
        self.i = 0

    def _peek(self) -> Optional[Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _fail(self, message: str):
        tok = self._peek()
        pos = tok[2] if tok else len(self.expression)
        raise MembershipGrammarError(message, self.expression, pos)

    def _expect_op(self, op: str):
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] != op:
            self._fail(f"expected '{op}'")
        self.i += 1

    def parse(self) -> Node:
        if not self.tokens:
            raise MembershipGrammarError("empty expression", self.expression, 0)
        node = self._expr()
        if self._peek() is not None:
            self._fail("unexpected trailing token")
        return node

    def _expr(self) -> Node:
        node = self._term()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self.i += 1
                rhs = self._term()
                node = ("add" if tok[1] == "+" else "sub", node, rhs)
            else:
                return node

    def _term(self) -> Node:
        node = self._unary()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] == "*":
                self.i += 1
                node = ("mul", node, self._unary())
            else:
                return node

    def _unary(self) -> Node:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.i += 1
            return ("neg", self._unary())
        return self._power()

    def _power(self) -> Node:
        node = self._atom()
        tok = self._peek()
        if tok and tok[0] == "square":
            self.i += 1
            node = ("sq", node)
        return node

    def _atom(self) -> Node:
        tok = self._peek()
        if tok is None:
            self._fail("unexpected end of expression")
        kind, text, _ = tok
        if kind == "number":
            self.i += 1
            return ("num", float(text))
        if kind == "state":
            self.i += 1
            k = int(text)
            if k < 1:
                self._back_fail("state index must be >= 1")
            return ("x", k - 1)
        if kind == "onem":
            self.i += 1
            r = int(text)
            if r < 1:
                self._back_fail("membership reference must be >= 1")
            return ("onem", r - 1)
        if kind == "func":
            self.i += 1
            self._expect_op("(")
            arg = self._expr()
            self._expect_op(")")
            return (text, arg)
        if kind == "op" and text == "(":
            self.i += 1
            node = self._expr()
            self._expect_op(")")
            return node
        self._fail(f"unexpected token '{text}'")

    def _back_fail(self, message: str):
        self.i -= 1
        self._fail(message)


def _walk(node: Node):
    yield node
    for child in node[1:]:
        if isinstance(child, tuple):
            yield from _walk(child)


@dataclass(frozen=True)
class MembershipFn:
    """One membership function h_s(x) of a mode."""
    expression: str
    tree: Node = field(compare=False, repr=False, default=())

    @classmethod
    def parse(cls, expression: str) -> "MembershipFn":
        return cls(expression=expression.strip(), tree=_Parser(expression).parse())

    @property
    def references(self) -> Set[int]:
        return {n[1] for n in _walk(self.tree) if n[0] == "onem"}

    @property
    def max_state_index(self) -> int:
        idx = [n[1] for n in _walk(self.tree) if n[0] == "x"]
        return max(idx) if idx else -1

    def evaluate(self, x: Sequence[float], sibling) -> float:
        return _eval(self.tree, x, sibling)


def _eval(node: Node, x, sibling) -> float:
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "x":
        return float(x[node[1]])
    if kind == "onem":
        return 1.0 - sibling(node[1])
    if kind == "neg":
        return -_eval(node[1], x, sibling)
    if kind == "sq":
        v = _eval(node[1], x, sibling)
        return v * v
    if kind == "sin":
        return math.sin(_eval(node[1], x, sibling))
    if kind == "cos":
        return math.cos(_eval(node[1], x, sibling))
    a = _eval(node[1], x, sibling)
    b = _eval(node[2], x, sibling)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    return a * b


def reference_cycle(fns: Sequence[MembershipFn]) -> Optional[List[int]]:
    """Return a one_minus reference cycle (0-based indices) or None."""
    state: Dict[int, int] = {}

    def visit(k: int, path: List[int]) -> Optional[List[int]]:
        if state.get(k) == 1:
            return path[path.index(k):] + [k]
        if state.get(k) == 2:
            return None
        state[k] = 1
        for r in sorted(fns[k].references):
            if 0 <= r < len(fns):
                cyc = visit(r, path + [k])
                if cyc:
                    return cyc
        state[k] = 2
        return None

    for k in range(len(fns)):
        cyc = visit(k, [])
        if cyc:
            return cyc
    return None


def evaluate_family(fns: Sequence[MembershipFn], x: Sequence[float]) -> np.ndarray:
    """Raw (unchecked) values of a mode's membership family at state x."""
    memo: Dict[int, float] = {}
    active: Set[int] = set()

    def sibling(k: int) -> float:
        if k not in memo:
            if k in active:
                raise InvalidMembershipError(f"one_minus reference cycle through membership {k + 1}")
            active.add(k)
            memo[k] = fns[k].evaluate(x, sibling)
            active.discard(k)
        return memo[k]

    return np.array([sibling(k) for k in range(len(fns))], dtype=float)

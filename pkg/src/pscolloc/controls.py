"""Tiny arithmetic expression language for open-loop control signals.

Grammar (recursive descent):

    exprlist := expr (',' expr)*
    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := ('-' | '+') factor | atom
    atom     := NUMBER | 't' | ('sin' | 'cos') '(' expr ')' | '(' expr ')'

One expression per control component, comma separated.  Parse errors carry
the character position.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)

_FUNCTIONS = {"sin": np.sin, "cos": np.cos}


class ControlExprError(ValueError):
    """Parse failure; ``position`` is the character offset in the source."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None or m.end() == i:
            stripped = src[i:].lstrip()
            if not stripped:
                break
            pos = len(src) - len(stripped)
            raise ControlExprError(f"unexpected character {stripped[0]!r}", pos)
        if m.group("num") is not None:
            tokens.append(_Token("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
        else:
            tokens.append(_Token("op", m.group("op"), m.start("op")))
        i = m.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op: str):
        tok = self.advance()
        if tok.kind != "op" or tok.text != op:
            raise ControlExprError(f"expected {op!r}", tok.pos)

    def parse_exprlist(self):
        exprs = [self.parse_expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            exprs.append(self.parse_expr())
        tok = self.peek()
        if tok.kind != "end":
            raise ControlExprError(f"unexpected {tok.text!r}", tok.pos)
        return exprs

    def parse_expr(self):
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.parse_term()
            node = (op, node, rhs)
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.parse_factor()
            node = (op, node, rhs)
        return node

    def parse_factor(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.advance()
            operand = self.parse_factor()
            return operand if tok.text == "+" else ("neg", operand)
        return self.parse_atom()

    def parse_atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return ("const", float(tok.text))
        if tok.kind == "name":
            if tok.text == "t":
                return ("t",)
            if tok.text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return (tok.text, arg)
            raise ControlExprError(f"unknown name {tok.text!r}", tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ControlExprError(
            f"expected a number, 't', or a function, got {tok.text!r}"
            if tok.kind != "end"
            else "unexpected end of expression",
            tok.pos,
        )


def _eval_node(node, t: float) -> float:
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "t":
        return t
    if kind == "neg":
        return -_eval_node(node[1], t)
    if kind in _FUNCTIONS:
        return float(_FUNCTIONS[kind](_eval_node(node[1], t)))
    a = _eval_node(node[1], t)
    b = _eval_node(node[2], t)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    raise AssertionError(f"unreachable node kind {kind}")


def parse_control(source: str, n_u: int) -> Callable[[float], np.ndarray]:
    """Compile a comma-separated expression list into t -> control vector."""
    nodes = _Parser(source).parse_exprlist()
    if len(nodes) != n_u:
        raise ControlExprError(
            f"got {len(nodes)} expression(s) for {n_u} control component(s)", 0
        )

    def control_fn(t: float) -> np.ndarray:
        return np.array([_eval_node(node, float(t)) for node in nodes])

    return control_fn

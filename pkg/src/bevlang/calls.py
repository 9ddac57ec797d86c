"""Call expressions: the grammar operators are invoked through.

    call := ident '(' arg (',' arg)* ')'
    arg  := 'objs' | call | number | quoted-string

Whitespace between tokens is ignored. `objs` is the placeholder for the
scene's object list. Parse errors carry the byte offset of the failure.
pretty_print produces the canonical rendering, and parsing it back yields
an equal expression tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import CallParseError, EvalTypeError
from .objects import MapObject
from .spatial_ops import REGISTRY, Param, Returns, apply_op

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"-?(?:\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)")
_MAX_DEPTH = 64

_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}
_ESCAPE_OUT = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


@dataclass(frozen=True)
class ObjsRef:
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class NumberLit:
    value: Union[int, float]
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class StringLit:
    value: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallExpr:
    name: str
    args: tuple["Expr", ...]
    offset: int = field(default=0, compare=False)


Expr = Union[ObjsRef, NumberLit, StringLit, CallExpr]


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    def fail(self, message: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        raise CallParseError(message, offset=len(self.source[:pos].encode("utf-8")))

    def skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.source[self.pos] if self.pos < len(self.source) else ""

    def parse_call(self, depth: int) -> CallExpr:
        if depth > _MAX_DEPTH:
            self.fail("call nesting too deep")
        start = self.pos
        m = _IDENT_RE.match(self.source, self.pos)
        if m is None:
            self.fail("expected an operator name")
        name = m.group()
        self.pos = m.end()
        self.skip_ws()
        if self.peek() != "(":
            self.fail(f"expected '(' after operator name {name!r}")
        self.pos += 1
        args = [self.parse_arg(depth)]
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == ",":
                self.pos += 1
                args.append(self.parse_arg(depth))
            elif ch == ")":
                self.pos += 1
                return CallExpr(name, tuple(args), offset=start)
            elif ch == "":
                self.fail("unterminated call, expected ',' or ')'")
            else:
                self.fail(f"expected ',' or ')', found {ch!r}")

    def parse_arg(self, depth: int) -> Expr:
        self.skip_ws()
        start = self.pos
        ch = self.peek()
        if ch == "":
            self.fail("expected an argument, found end of input")
        if ch == '"':
            return self.parse_string()
        m = _NUMBER_RE.match(self.source, self.pos)
        if m is not None:
            self.pos = m.end()
            text = m.group()
            value = float(text) if any(c in text for c in ".eE") else int(text)
            return NumberLit(value, offset=start)
        m = _IDENT_RE.match(self.source, self.pos)
        if m is None:
            self.fail(f"expected an argument, found {ch!r}")
        probe = self.pos
        self.pos = m.end()
        self.skip_ws()
        if self.peek() == "(":
            self.pos = probe
            return self.parse_call(depth + 1)
        if m.group() == "objs":
            self.pos = m.end()
            return ObjsRef(offset=start)
        self.fail(f"expected 'objs' or a call, found bare word {m.group()!r}", start)

    def parse_string(self) -> StringLit:
        start = self.pos
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.source):
                self.fail("unterminated string literal", start)
            ch = self.source[self.pos]
            if ch == '"':
                self.pos += 1
                return StringLit("".join(out), offset=start)
            if ch == "\\":
                if self.pos + 1 >= len(self.source):
                    self.fail("unterminated escape sequence")
                esc = self.source[self.pos + 1]
                if esc not in _ESCAPES:
                    self.fail(f"unknown escape sequence \\{esc}")
                out.append(_ESCAPES[esc])
                self.pos += 2
            else:
                out.append(ch)
                self.pos += 1


def parse_call(source: str, *, validate: bool = True) -> CallExpr:
    """Parse one call expression; optionally check it against the registry."""
    if not isinstance(source, str):
        raise CallParseError("call must be a string", offset=0)
    parser = _Parser(source)
    parser.skip_ws()
    expr = parser.parse_call(depth=1)
    parser.skip_ws()
    if parser.pos != len(source):
        parser.fail("unexpected input after call expression")
    if validate:
        validate_call(expr)
    return expr


def validate_call(expr: Expr) -> Returns:
    """Check operator names, arity, and argument kinds; returns the result kind."""
    if not isinstance(expr, CallExpr):
        raise CallParseError("expression must be a call", offset=getattr(expr, "offset", 0))
    spec = REGISTRY.get(expr.name)
    if spec is None:
        raise CallParseError(f"unknown operator {expr.name!r}", offset=expr.offset)
    if len(expr.args) != len(spec.params):
        raise CallParseError(
            f"{expr.name} takes {len(spec.params)} arguments ({spec.signature}), "
            f"got {len(expr.args)}",
            offset=expr.offset,
        )
    for arg, (pname, kind) in zip(expr.args, spec.params):
        if kind is Param.OBJS:
            if isinstance(arg, ObjsRef):
                continue
            if isinstance(arg, CallExpr):
                if validate_call(arg) is not Returns.OBJECTS:
                    raise CallParseError(
                        f"argument {pname!r} of {expr.name} needs an object list, "
                        f"but {arg.name} returns a distance",
                        offset=arg.offset,
                    )
                continue
            raise CallParseError(
                f"argument {pname!r} of {expr.name} must be 'objs' or a call",
                offset=arg.offset,
            )
        if kind is Param.METERS and isinstance(arg, CallExpr):
            # a distance-returning call may feed a meters parameter
            if validate_call(arg) is not Returns.DISTANCE:
                raise CallParseError(
                    f"argument {pname!r} of {expr.name} needs meters, "
                    f"but {arg.name} returns an object list",
                    offset=arg.offset,
                )
            continue
        if not isinstance(arg, NumberLit):
            raise CallParseError(
                f"argument {pname!r} of {expr.name} must be a number",
                offset=arg.offset,
            )
        if kind in (Param.ID, Param.COUNT) and not isinstance(arg.value, int):
            raise CallParseError(
                f"argument {pname!r} of {expr.name} must be an integer",
                offset=arg.offset,
            )
    return spec.returns


def pretty_print(expr: Expr) -> str:
    """Canonical rendering; parse_call(pretty_print(e)) == e."""
    if isinstance(expr, ObjsRef):
        return "objs"
    if isinstance(expr, NumberLit):
        if isinstance(expr.value, float) and not math.isfinite(expr.value):
            raise ValueError("cannot print a non-finite number literal")
        return repr(expr.value)
    if isinstance(expr, StringLit):
        return '"' + "".join(_ESCAPE_OUT.get(c, c) for c in expr.value) + '"'
    if isinstance(expr, CallExpr):
        return f"{expr.name}({', '.join(pretty_print(a) for a in expr.args)})"
    raise TypeError(f"not a call expression node: {expr!r}")


def eval_call(expr: Expr, objects: Sequence[MapObject]):
    """Evaluate an expression against a scene's object list.

    Returns a list of MapObject or a float, depending on the operator.
    """
    if isinstance(expr, ObjsRef):
        return list(objects)
    if isinstance(expr, (NumberLit, StringLit)):
        return expr.value
    if not isinstance(expr, CallExpr):
        raise EvalTypeError(f"not a call expression node: {expr!r}")
    spec = REGISTRY.get(expr.name)
    if spec is None:
        raise EvalTypeError(f"unknown operator {expr.name!r}")
    if len(expr.args) != len(spec.params):
        raise EvalTypeError(
            f"{expr.name} takes {len(spec.params)} arguments ({spec.signature}), "
            f"got {len(expr.args)}"
        )
    values = []
    for arg, (pname, kind) in zip(expr.args, spec.params):
        value = eval_call(arg, objects)
        if kind is Param.OBJS and not isinstance(value, list):
            raise EvalTypeError(
                f"argument {pname!r} of {expr.name} needs an object list, got {type(value).__name__}"
            )
        if kind is not Param.OBJS and isinstance(value, (list, str)):
            raise EvalTypeError(
                f"argument {pname!r} of {expr.name} needs a number, got {type(value).__name__}"
            )
        values.append(value)
    return apply_op(expr.name, values)

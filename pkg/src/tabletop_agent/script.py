"""The action-script language used by the code-as-policy executor.

A script is a loop-free list of statements, each an assignment or a bare
expression.  Expressions are literals, variables, field access, indexing and
calls to the eight robot actions with keyword arguments::

    g = compute_grasp(object_name="lemon")   # comments run to end of line
    pick(object_name="lemon")
    place(pose=get_pose(reference="trash", relation="in"))

Parsing never raises anything but :class:`ParseError`; running a script stops
at the first failed action or evaluation error.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .actions import ActionDispatcher, DispatchError
from .world import ACTION_PARAMS, render_call

# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Num:
    value: int | float


@dataclass(frozen=True)
class ListLit:
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class RecordLit:
    fields: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Member:
    target: Expr
    name: str


@dataclass(frozen=True)
class Index:
    target: Expr
    key: str | int


@dataclass(frozen=True)
class Call:
    action: str
    args: tuple[tuple[str, Expr], ...]


Expr = Union[Str, Num, ListLit, RecordLit, Var, Member, Index, Call]


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr


@dataclass(frozen=True)
class ExprStmt:
    value: Expr


Statement = Union[Assign, ExprStmt]


@dataclass(frozen=True)
class Script:
    statements: tuple[Statement, ...] = ()


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, token: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.token = token


# -- lexer -------------------------------------------------------------------

_REJECTED = {
    **dict.fromkeys(("while", "for", "break", "continue"), "loops are not supported"),
    **dict.fromkeys(("if", "elif", "else"), "conditionals are not supported"),
    **dict.fromkeys(("def", "lambda", "class", "return", "yield"), "function definitions are not supported"),
    **dict.fromkeys(("import", "from"), "imports are not supported"),
    **dict.fromkeys(("True", "False", "None", "true", "false", "null"), "boolean and null literals are not supported"),
    **dict.fromkeys(
        ("and", "or", "not", "is", "in", "try", "except", "finally", "with", "pass",
         "global", "nonlocal", "del", "assert", "raise", "async", "await", "print"),
        "keyword is not supported",
    ),
}
# a dot followed by a name is field access, so "1.x" lexes as 1 . x
_NUMBER = re.compile(r"-?(?:\d+\.\d+|\d+\.(?![A-Za-z_])|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PUNCT = set("=.[](){},:")
_OPEN, _CLOSE = "([{", ")]}"


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, STRING, NUMBER, OP, NEWLINE, EOF
    text: str
    line: int
    column: int
    value: Any = None


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    depth: list[str] = []
    pos, line, col = 0, 1, 1
    n = len(source)

    def fail(message: str, text: str) -> ParseError:
        return ParseError(message, line, col, text)

    while pos < n:
        ch = source[pos]
        if ch == "\n":
            if not depth:
                tokens.append(Token("NEWLINE", "\n", line, col))
            pos, line, col = pos + 1, line + 1, 1
            continue
        if ch in " \t\r\f":
            pos, col = pos + 1, col + 1
            continue
        if ch == "#":
            while pos < n and source[pos] != "\n":
                pos, col = pos + 1, col + 1
            continue
        if ch == '"':
            end = pos + 1
            while end < n and source[end] != '"':
                if source[end] == "\n":
                    break
                end += 2 if source[end] == "\\" else 1
            if end >= n or source[end] != '"':
                raise fail("unterminated string", source[pos:end].split("\n")[0])
            raw = source[pos : end + 1]
            try:
                value = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise fail(f"invalid string literal ({exc.msg})", raw) from None
            tokens.append(Token("STRING", raw, line, col, value))
            col += end + 1 - pos
            pos = end + 1
            continue
        if ch == "'":
            raise fail("strings must use double quotes", ch)
        m = _NUMBER.match(source, pos)
        if m and (ch != "-" or m.end() > pos + 1):
            text = m.group()
            value: int | float = float(text) if any(c in text for c in ".eE") else int(text)
            if isinstance(value, float) and not math.isfinite(value):
                raise fail("number out of range", text)
            tokens.append(Token("NUMBER", text, line, col, value))
            col += len(text)
            pos = m.end()
            continue
        m = _NAME.match(source, pos)
        if m:
            text = m.group()
            tokens.append(Token("NAME", text, line, col))
            col += len(text)
            pos = m.end()
            continue
        if ch in _PUNCT:
            if ch in _OPEN:
                depth.append(ch)
            elif ch in _CLOSE:
                if not depth or _OPEN.index(depth[-1]) != _CLOSE.index(ch):
                    raise fail(f"unmatched '{ch}'", ch)
                depth.pop()
            tokens.append(Token("OP", ch, line, col))
            pos, col = pos + 1, col + 1
            continue
        if ch in "+-*/%<>!&|^~@":
            raise fail("operators and arithmetic are not supported", ch)
        if ch == ";":
            raise fail("one statement per line; ';' is not supported", ch)
        raise fail(f"unexpected character {ch!r}", ch)

    if depth:
        raise fail(f"unclosed '{depth[-1]}'", depth[-1])
    tokens.append(Token("EOF", "", line, col))
    return tokens


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str) -> None:
        self.tokens = tokenize(source)
        self.pos = 0
        self.defined: set[str] = set()

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column, tok.text or "<end of input>")

    def expect(self, text: str) -> Token:
        if self.tok.kind == "OP" and self.tok.text == text:
            return self.advance()
        raise self.error(f"expected '{text}'")

    def check_name(self, tok: Token) -> None:
        if tok.text in _REJECTED:
            raise self.error(f"'{tok.text}': {_REJECTED[tok.text]}", tok)

    def script(self) -> Script:
        statements = []
        while self.tok.kind != "EOF":
            if self.tok.kind == "NEWLINE":
                self.advance()
                continue
            statements.append(self.statement())
            if self.tok.kind == "NEWLINE":
                self.advance()
            elif self.tok.kind != "EOF":
                raise self.error("expected end of line")
        return Script(tuple(statements))

    def statement(self) -> Statement:
        tok = self.tok
        if tok.kind == "NAME" and self.peek().kind == "OP" and self.peek().text == "=":
            self.check_name(tok)
            if tok.text in ACTION_PARAMS:
                raise self.error(f"cannot assign to action name '{tok.text}'", tok)
            self.advance()
            self.advance()
            value = self.expr()
            self.defined.add(tok.text)
            return Assign(tok.text, value)
        return ExprStmt(self.expr())

    def expr(self) -> Expr:
        node = self.primary()
        while self.tok.kind == "OP" and self.tok.text in ".[":
            if self.advance().text == ".":
                name = self.tok
                if name.kind != "NAME":
                    raise self.error("expected field name after '.'")
                self.advance()
                if self.tok.kind == "OP" and self.tok.text == "(":
                    raise self.error("method calls are not supported")
                node = Member(node, name.text)
            else:
                key = self.tok
                if key.kind == "STRING" or (key.kind == "NUMBER" and isinstance(key.value, int)):
                    self.advance()
                else:
                    raise self.error("index must be a string or an integer")
                self.expect("]")
                node = Index(node, key.value)
        return node

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "STRING":
            self.advance()
            return Str(tok.value)
        if tok.kind == "NUMBER":
            self.advance()
            return Num(tok.value)
        if tok.kind == "OP" and tok.text == "[":
            self.advance()
            items = []
            if not (self.tok.kind == "OP" and self.tok.text == "]"):
                items.append(self.expr())
                while self.tok.kind == "OP" and self.tok.text == ",":
                    self.advance()
                    items.append(self.expr())
            self.expect("]")
            return ListLit(tuple(items))
        if tok.kind == "OP" and tok.text == "{":
            self.advance()
            fields: list[tuple[str, Expr]] = []
            if not (self.tok.kind == "OP" and self.tok.text == "}"):
                while True:
                    key = self.tok
                    if key.kind != "STRING":
                        raise self.error("record keys must be double-quoted strings")
                    if any(k == key.value for k, _ in fields):
                        raise self.error(f"duplicate record key {key.text}", key)
                    self.advance()
                    self.expect(":")
                    fields.append((key.value, self.expr()))
                    if self.tok.kind == "OP" and self.tok.text == ",":
                        self.advance()
                        continue
                    break
            self.expect("}")
            return RecordLit(tuple(fields))
        if tok.kind == "NAME":
            self.check_name(tok)
            is_call = self.peek().kind == "OP" and self.peek().text == "("
            if is_call:
                if tok.text not in ACTION_PARAMS:
                    raise self.error(f"unknown function '{tok.text}'", tok)
                return self.call()
            if tok.text in ACTION_PARAMS:
                raise self.error(f"action '{tok.text}' must be called", tok)
            if tok.text not in self.defined:
                raise self.error(f"undefined variable '{tok.text}'", tok)
            self.advance()
            return Var(tok.text)
        if tok.kind == "EOF":
            raise self.error("unexpected end of input")
        if tok.kind == "NEWLINE":
            raise self.error("unexpected end of line")
        raise self.error(f"unexpected '{tok.text}'")

    def call(self) -> Call:
        name = self.advance().text
        self.expect("(")
        params = ACTION_PARAMS[name]
        args: list[tuple[str, Expr]] = []
        if not (self.tok.kind == "OP" and self.tok.text == ")"):
            while True:
                key = self.tok
                if key.kind != "NAME" or not (self.peek().kind == "OP" and self.peek().text == "="):
                    raise self.error("arguments must be named, e.g. object_name=\"lemon\"")
                if key.text not in params:
                    raise self.error(f"{name}() has no parameter '{key.text}'", key)
                if any(k == key.text for k, _ in args):
                    raise self.error(f"duplicate argument '{key.text}'", key)
                self.advance()
                self.advance()
                args.append((key.text, self.expr()))
                if self.tok.kind == "OP" and self.tok.text == ",":
                    self.advance()
                    continue
                break
        self.expect(")")
        return Call(name, tuple(args))


def parse_script(source: str) -> Script:
    """Parse action-script source; raises :class:`ParseError` on any violation."""
    if not isinstance(source, str):
        raise ParseError("source must be text", 1, 1, repr(source))
    return _Parser(source).script()


# -- printer -----------------------------------------------------------------


def _format_num(value: int | float) -> str:
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError("non-finite numbers have no source form")
    return repr(value)


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Str):
        return json.dumps(expr.value, ensure_ascii=False)
    if isinstance(expr, Num):
        return _format_num(expr.value)
    if isinstance(expr, ListLit):
        return "[" + ", ".join(format_expr(e) for e in expr.items) + "]"
    if isinstance(expr, RecordLit):
        inner = ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {format_expr(v)}" for k, v in expr.fields)
        return "{" + inner + "}"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Member):
        return f"{format_expr(expr.target)}.{expr.name}"
    if isinstance(expr, Index):
        key = json.dumps(expr.key, ensure_ascii=False) if isinstance(expr.key, str) else str(expr.key)
        return f"{format_expr(expr.target)}[{key}]"
    if isinstance(expr, Call):
        return f"{expr.action}(" + ", ".join(f"{k}={format_expr(v)}" for k, v in expr.args) + ")"
    raise TypeError(f"not an expression: {expr!r}")


def format_script(script: Script) -> str:
    lines = []
    for stmt in script.statements:
        if isinstance(stmt, Assign):
            lines.append(f"{stmt.name} = {format_expr(stmt.value)}")
        else:
            lines.append(format_expr(stmt.value))
    return "".join(line + "\n" for line in lines)


# -- trace lines ---------------------------------------------------------------


def _literal_value(expr: Expr) -> Any:
    if isinstance(expr, (Str, Num)):
        return expr.value
    if isinstance(expr, ListLit):
        return [_literal_value(e) for e in expr.items]
    if isinstance(expr, RecordLit):
        return {k: _literal_value(v) for k, v in expr.fields}
    raise ValueError("trace arguments must be literals")


def parse_trace_line(line: str) -> tuple[str, dict[str, Any], bool]:
    """Split ``name(k=v, ...) -> ok|fail`` into (action, args, ok).

    A line without the ``-> ok|fail`` suffix is treated as successful.
    """
    text = line.strip()
    ok = True
    m = re.search(r"\s*->\s*(ok|fail)\s*$", text)
    if m:
        ok = m.group(1) == "ok"
        text = text[: m.start()]
    script = parse_script(text)
    if len(script.statements) != 1 or not isinstance(script.statements[0], ExprStmt) \
            or not isinstance(script.statements[0].value, Call):
        raise ParseError("trace line must be exactly one action call", 1, 1, text)
    call = script.statements[0].value
    try:
        args = {k: _literal_value(v) for k, v in call.args}
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1, text) from None
    return call.action, args, ok


# -- interpreter ----------------------------------------------------------------


@dataclass
class LogEntry:
    statement: int
    action: str | None
    args: dict[str, Any] | None
    message: str
    ok: bool
    # False when the call never reached the simulator (schema/transport error).
    dispatched: bool = True

    def describe(self) -> str:
        if self.action is None:
            return self.message
        return f"{render_call(self.action, self.args or {})}: {self.message}"


@dataclass
class ExecutionLog:
    entries: list[LogEntry] = field(default_factory=list)
    halted_at: int | None = None
    halt_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.halted_at is None


class _Halt(Exception):
    pass


class _Interpreter:
    def __init__(self, actions: ActionDispatcher, log: ExecutionLog) -> None:
        self.actions = actions
        self.log = log
        self.env: dict[str, Any] = {}
        self.index = 0

    def halt(self, reason: str, action: str | None = None, args: dict | None = None,
             dispatched: bool = False) -> _Halt:
        self.log.entries.append(LogEntry(self.index, action, args, reason, False, dispatched))
        self.log.halted_at = self.index
        self.log.halt_reason = reason
        return _Halt(reason)

    def eval(self, expr: Expr) -> Any:
        if isinstance(expr, (Str, Num)):
            return expr.value
        if isinstance(expr, ListLit):
            return [self.eval(e) for e in expr.items]
        if isinstance(expr, RecordLit):
            return {k: self.eval(v) for k, v in expr.fields}
        if isinstance(expr, Var):
            return self.env[expr.name]
        if isinstance(expr, Member):
            target = self.eval(expr.target)
            if target is None:
                raise self.halt(f"cannot read field '{expr.name}': value has no data")
            if not isinstance(target, dict) or expr.name not in target:
                raise self.halt(f"value has no field '{expr.name}'")
            return target[expr.name]
        if isinstance(expr, Index):
            target = self.eval(expr.target)
            key = expr.key
            if isinstance(target, list) and isinstance(key, int):
                if not -len(target) <= key < len(target):
                    raise self.halt(f"index {key} out of range for list of length {len(target)}")
                return target[key]
            if isinstance(target, dict) and isinstance(key, str):
                if key not in target:
                    raise self.halt(f"value has no key {json.dumps(key)}")
                return target[key]
            raise self.halt(f"cannot index {type(target).__name__ if target is not None else 'empty value'} with {key!r}")
        if isinstance(expr, Call):
            args = {k: self.eval(v) for k, v in expr.args}
            try:
                response = self.actions.dispatch(expr.action, args)
            except DispatchError as exc:
                raise self.halt(f"{expr.action} rejected: {exc}", expr.action, args) from None
            ok = bool(response.get("ok"))
            message = str(response.get("message", ""))
            if not ok:
                raise self.halt(message, expr.action, args, dispatched=True)
            self.log.entries.append(LogEntry(self.index, expr.action, args, message, True))
            return response.get("data")
        raise TypeError(f"not an expression: {expr!r}")

    def run(self, script: Script) -> None:
        for self.index, stmt in enumerate(script.statements):
            value = self.eval(stmt.value)
            if isinstance(stmt, Assign):
                self.env[stmt.name] = value


def run_script(script: Script, actions: ActionDispatcher) -> ExecutionLog:
    """Execute statements in order, halting at the first failure."""
    log = ExecutionLog()
    try:
        _Interpreter(actions, log).run(script)
    except _Halt:
        pass
    return log

"""Parser for step-per-line program text into task graphs.

Each line has the shape `OUT=FUNC(key=value, ...)`. A value is a bare
identifier (a reference to an earlier line's output), a single-quoted
string, or a number. `{NAME}` templates inside quoted strings also count
as references. `IMAGE` is reserved for the raw input and never creates an
edge of its own; input wiring is handled by virtual-node augmentation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import ProgramSyntaxError, UndefinedReferenceError, UnknownFunctionError
from .graph import ModelZoo, TaskGraph, augment_virtual_node, validate_and_topo_sort

FUNCTION_NAMES = (
    "LOC",
    "VQA",
    "EVAL",
    "COUNT",
    "CROP",
    "CROPLEFT",
    "CROPRIGHT",
    "CROPABOVE",
    "CROPBELOW",
)

RESERVED_INPUT = "IMAGE"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_BRACE_REF = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class ArgValue:
    """A parsed argument value; kind is one of 'ref', 'str', 'num'.

    text holds the identifier, the string body without quotes, or the
    number's source lexeme respectively.
    """

    kind: str
    text: str


@dataclass(frozen=True)
class ProgramLine:
    output_name: str
    function_name: str
    args: tuple[tuple[str, ArgValue], ...]

    def references(self) -> Iterator[str]:
        """Names this line depends on, in argument order."""
        for _, value in self.args:
            if value.kind == "ref":
                yield value.text
            elif value.kind == "str":
                for m in _BRACE_REF.finditer(value.text):
                    yield m.group(1)


class _Scanner:
    def __init__(self, text: str, line_no: int):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def fail(self, message: str, at: int | None = None):
        col = (self.pos if at is None else at) + 1
        raise ProgramSyntaxError(message, self.line_no, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            self.fail(f"expected {ch!r}")
        self.pos += 1

    def ident(self, what: str) -> str:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            self.fail(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def value(self) -> ArgValue:
        self.skip_ws()
        if self.pos >= len(self.text):
            self.fail("expected a value")
        ch = self.text[self.pos]
        if ch == "'":
            start = self.pos
            end = self.text.find("'", self.pos + 1)
            if end < 0:
                self.fail("unterminated string", at=start)
            body = self.text[self.pos + 1 : end]
            self.pos = end + 1
            return ArgValue("str", body)
        m = _NUMBER.match(self.text, self.pos)
        if m and (ch.isdigit() or ch in "-."):
            self.pos = m.end()
            return ArgValue("num", m.group(0))
        m = _IDENT.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return ArgValue("ref", m.group(0))
        self.fail("expected identifier, quoted string, or number")
        raise AssertionError("unreachable")


def tokenize_line(line: str, line_no: int = 1) -> ProgramLine:
    """Parse one `OUT=FUNC(key=value, ...)` line.

    Whitespace is ignored outside quotes; an empty argument list is legal.
    """
    sc = _Scanner(line, line_no)
    out = sc.ident("an output name")
    sc.expect("=")
    func = sc.ident("a function name")
    sc.expect("(")
    args: list[tuple[str, ArgValue]] = []
    if sc.peek() != ")":
        while True:
            key = sc.ident("an argument name")
            sc.expect("=")
            args.append((key, sc.value()))
            if sc.peek() == ",":
                sc.expect(",")
                continue
            break
    sc.expect(")")
    if not sc.at_end():
        sc.fail("unexpected text after ')'")
    return ProgramLine(output_name=out, function_name=func, args=tuple(args))


def parse_lines(text: str) -> list[tuple[int, ProgramLine]]:
    """All nonblank lines with their 1-based source line numbers."""
    out = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw[:-1] if raw.endswith("\r") else raw
        if line.strip():
            out.append((line_no, tokenize_line(line, line_no)))
    return out


def parse_program(text: str, zoo: ModelZoo, sample_id: str = "") -> TaskGraph:
    """Parse program text into a validated, virtual-node-augmented graph.

    One node per nonblank line, in source order. References must point at
    earlier lines; `IMAGE` is always in scope and adds no edge.
    """
    lines = parse_lines(text)
    if not lines:
        raise ProgramSyntaxError("empty program", 1, 1)
    defined: dict[str, int] = {}
    node_types: list[int] = []
    edges: set[tuple[int, int]] = set()
    for node, (line_no, line) in enumerate(lines, start=1):
        if not zoo.has_type(line.function_name):
            raise UnknownFunctionError(f"line {line_no}: unknown function {line.function_name!r}")
        if line.output_name == RESERVED_INPUT:
            raise ProgramSyntaxError(f"{RESERVED_INPUT} is reserved", line_no, 1)
        if line.output_name in defined:
            raise ProgramSyntaxError(f"{line.output_name!r} defined twice", line_no, 1)
        for name in line.references():
            if name == RESERVED_INPUT:
                continue
            if name not in defined:
                raise UndefinedReferenceError(f"line {line_no}: {name!r} used before it is defined")
            edges.add((defined[name], node))
        defined[line.output_name] = node
        node_types.append(zoo.type_by_name(line.function_name).id)
    graph = augment_virtual_node(TaskGraph(sample_id=sample_id, node_types=tuple(node_types), edges=tuple(sorted(edges))))
    validate_and_topo_sort(graph)
    return graph


def graph_to_program(graph: TaskGraph, zoo: ModelZoo) -> str:
    """Canonical program text whose parse reproduces the graph exactly.

    Node k becomes line k with output name Nk; in-edges become bare
    references, roots reference IMAGE.
    """
    incoming: dict[int, list[int]] = {}
    for (u, v) in graph.edges:
        if u != 0:
            incoming.setdefault(v, []).append(u)
    lines = []
    for k in range(1, graph.n_nodes):
        func = zoo.type_by_id(graph.type_of(k)).name
        refs = sorted(incoming.get(k, []))
        args = [f"in{m}=N{u}" for m, u in enumerate(refs)] if refs else ["in0=IMAGE"]
        lines.append(f"N{k}={func}({','.join(args)})")
    return "\n".join(lines)


def pretty_print(lines: Sequence[ProgramLine]) -> str:
    """Canonical text for parsed lines; re-parsing gives the same graph."""
    rendered = []
    for line in lines:
        parts = []
        for key, value in line.args:
            if value.kind == "str":
                parts.append(f"{key}='{value.text}'")
            else:
                parts.append(f"{key}={value.text}")
        rendered.append(f"{line.output_name}={line.function_name}({', '.join(parts)})")
    return "\n".join(rendered)

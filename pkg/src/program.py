"""Operation programs over financial reports: parser, evaluator and comparison.

Grammar:

    program  := step ("," step)*
    step     := op "(" arg "," arg ")"
    op       := add | subtract | multiply | divide | exp | greater
              | table_sum | table_average | table_max | table_min
    arg      := number | constant | "#" digits | row | "none"
    number   := ["-"] digits ["," ddd]* ["." digits] ["%"]
    constant := const_100 | const_1000 | const_m1 | const_1000000 | const_<n> | const_m<n>
    row      := quoted string | bare text up to "," or ")"   (table ops only)

A percent literal is divided by 100; "#k" is the value of step k.
"""

import math
import re
from dataclasses import dataclass
from enum import StrEnum

from .config import PROGRAM_REL_TOL
from .errors import DataError
from .utils import normalize_text

ARITHMETIC_OPS = ("add", "subtract", "multiply", "divide", "exp", "greater")
TABLE_OPS = ("table_sum", "table_average", "table_max", "table_min")
OPERATIONS = ARITHMETIC_OPS + TABLE_OPS

CONSTANTS = {
    "const_100": 100.0,
    "const_1000": 1000.0,
    "const_m1": -1.0,
    "const_1000000": 1000000.0,
}

_WS_RE = re.compile(r"\s*")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_REF_RE = re.compile(r"#(\d+)")
_CONST_RE = re.compile(r"const_(m?)(\d+)$")
# Thousands separators need exactly three digits per group: "1,000" but not "1,2"
_NUMBER_RE = re.compile(r"-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?%?|-?\.\d+%?")
_PLAIN_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?%?|-?\.\d+%?")


class ProgramError(DataError):
    """Base class for program parse and evaluation errors."""


class ProgramSyntaxError(ProgramError):
    pass


class UnknownOperation(ProgramError):
    pass


class ForwardReference(ProgramError):
    pass


class ArityMismatch(ProgramError):
    pass


class DivisionByZero(ProgramError):
    pass


class RowNotFound(ProgramError):
    pass


class NonNumericRow(ProgramError):
    pass


class NonFiniteResult(ProgramError):
    pass


class TypeMismatch(ProgramError):
    pass


class ArgKind(StrEnum):
    NUMBER = "number"
    CONST = "const"
    REF = "ref"
    ROW = "row"
    NONE = "none"


@dataclass(frozen=True)
class Arg:
    kind: ArgKind
    value: float | int | str | None
    text: str


@dataclass(frozen=True)
class Step:
    op: str
    arg1: Arg
    arg2: Arg


@dataclass(frozen=True)
class Program:
    steps: tuple[Step, ...]

    def __str__(self) -> str:
        return print_program(self)


Value = float | bool


def parse_number(text: str) -> float:
    """Numeric literal value: "1,000" -> 1000.0, "14.1%" -> 0.141."""
    percent = text.endswith("%")
    value = float(text.rstrip("%").replace(",", ""))
    return value / 100 if percent else value


def constant_value(name: str) -> float | None:
    if name in CONSTANTS:
        return CONSTANTS[name]
    match = _CONST_RE.match(name)
    if not match:
        return None
    value = float(match.group(2))
    return -value if match.group(1) else value


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, cls=ProgramSyntaxError, pos: int | None = None):
        at = self.pos if pos is None else pos
        return cls(f"{message} at position {at} in {self.text!r}")

    def skip(self):
        self.pos = _WS_RE.match(self.text, self.pos).end()

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str):
        if self.peek() != char:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise self.error(f"expected {char!r}, found {found}")
        self.pos += 1

    def program(self) -> Program:
        if not self.peek():
            raise self.error("empty program")
        steps = [self.step(0)]
        while self.peek() == ",":
            self.pos += 1
            steps.append(self.step(len(steps)))
        if self.peek():
            raise self.error(f"unexpected {self.peek()!r}")
        return Program(tuple(steps))

    def step(self, index: int) -> Step:
        self.skip()
        start = self.pos
        match = _NAME_RE.match(self.text, self.pos)
        if not match:
            raise self.error("expected an operation name")
        op = match.group(0)
        if op not in OPERATIONS:
            raise self.error(f"unknown operation {op!r}", UnknownOperation, start)
        self.pos = match.end()
        self.expect("(")
        open_pos = self.pos
        args = self.arguments(op, index, _NUMBER_RE)
        if len(args) < 2 and any(a.kind == ArgKind.NUMBER and "," in a.text for a in args):
            # "add(100,200)": the comma separates arguments, not thousands
            self.pos = open_pos
            args = self.arguments(op, index, _PLAIN_NUMBER_RE)
        self.expect(")")

        if len(args) != 2:
            raise self.error(f"{op} takes 2 arguments, got {len(args)}", ArityMismatch, start)
        if op in TABLE_OPS and args[1].kind != ArgKind.NONE:
            raise self.error(f"{op} takes a row name and none", ArityMismatch, start)
        if op in ARITHMETIC_OPS and ArgKind.NONE in (args[0].kind, args[1].kind):
            raise self.error(f"{op} needs two numeric arguments", ArityMismatch, start)
        return Step(op, args[0], args[1])

    def arguments(self, op: str, index: int, number_re: re.Pattern) -> list[Arg]:
        args = [self.row() if op in TABLE_OPS else self.value(index, number_re)]
        while self.peek() == ",":
            self.pos += 1
            args.append(self.value(index, number_re))
        return args

    def value(self, index: int, number_re: re.Pattern = _NUMBER_RE) -> Arg:
        self.skip()
        start = self.pos
        if match := _REF_RE.match(self.text, self.pos):
            k = int(match.group(1))
            if k >= index:
                raise self.error(f"#{k} used in step {index}", ForwardReference, start)
            self.pos = match.end()
            return Arg(ArgKind.REF, k, match.group(0))
        if match := number_re.match(self.text, self.pos):
            self.pos = match.end()
            return Arg(ArgKind.NUMBER, parse_number(match.group(0)), match.group(0))
        if match := _NAME_RE.match(self.text, self.pos):
            name = match.group(0)
            self.pos = match.end()
            if name == "none":
                return Arg(ArgKind.NONE, None, name)
            value = constant_value(name)
            if value is not None:
                return Arg(ArgKind.CONST, value, name)
            raise self.error(f"unknown constant {name!r}", pos=start)
        raise self.error("expected a number, #k or a constant")

    def row(self) -> Arg:
        self.skip()
        start = self.pos
        quote = self.peek()
        if quote in ("'", '"'):
            end = self.text.find(quote, start + 1)
            if end == -1:
                raise self.error("unterminated row name", pos=start)
            self.pos = end + 1
            name = self.text[start + 1 : end]
        else:
            depth = 0
            while self.pos < len(self.text):
                char = self.text[self.pos]
                if char in ",)" and depth == 0:
                    break
                depth += {"(": 1, ")": -1}.get(char, 0)
                self.pos += 1
            name = self.text[start : self.pos].strip()
        if not name.strip():
            raise self.error("expected a row name", pos=start)
        return Arg(ArgKind.ROW, name, self.text[start : self.pos].strip())


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def print_program(program: Program) -> str:
    """Canonical text: steps joined by ", ", arguments by ", "."""
    return ", ".join(f"{s.op}({s.arg1.text}, {s.arg2.text})" for s in program.steps)


def parse_cell(cell: str) -> float | None:
    """Numeric value of a table cell, or None.

    "$ 1,250" -> 1250.0, "12.5%" -> 0.125, "( 40 )" -> -40.0, "300 ( a )" -> 300.0
    """
    text = cell.strip()
    if match := re.fullmatch(r"\(\s*([\d.,]+)\s*\)", text):
        text = "-" + match.group(1)
    elif " (" in text:
        text = text.split(" (", 1)[0]
    text = text.replace("$", "").replace(",", "").replace(" ", "")
    percent = text.endswith("%")
    try:
        value = float(text.rstrip("%"))
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value / 100 if percent else value


def find_row(table, name: str) -> tuple[str, ...]:
    """Row whose label matches `name` after case folding and punctuation stripping."""
    wanted = normalize_text(name)
    for row in table[1:]:
        if row and normalize_text(row[0]) == wanted:
            return row
    raise RowNotFound(f"no table row named {name!r}")


def _number(arg: Arg, values: list[Value], op: str) -> float:
    if arg.kind == ArgKind.REF:
        value = values[arg.value]
        if isinstance(value, bool):
            raise TypeMismatch(f"{op} got the yes/no result of step {arg.value}")
        return value
    return arg.value


def _table_step(step: Step, report) -> float:
    if report is None:
        raise RowNotFound(f"{step.op} needs a report table")
    row = find_row(report.table, step.arg1.value)
    cells = [v for v in (parse_cell(c) for c in row[1:]) if v is not None]
    if not cells:
        raise NonNumericRow(f"row {step.arg1.value!r} has no numeric cell")
    if step.op == "table_sum":
        return math.fsum(cells)
    if step.op == "table_average":
        return math.fsum(cells) / len(cells)
    if step.op == "table_max":
        return max(cells)
    return min(cells)


def _arithmetic_step(step: Step, values: list[Value]) -> Value:
    a = _number(step.arg1, values, step.op)
    b = _number(step.arg2, values, step.op)
    match step.op:
        case "add":
            return a + b
        case "subtract":
            return a - b
        case "multiply":
            return a * b
        case "divide":
            if b == 0:
                raise DivisionByZero(f"divide({step.arg1.text}, {step.arg2.text}) divides by zero")
            return a / b
        case "exp":
            try:
                return math.pow(a, b)
            except (OverflowError, ValueError) as e:
                raise NonFiniteResult(f"exp({a}, {b}): {e}") from e
        case _:
            return a > b


def eval_program(program: Program, report=None) -> Value:
    """Evaluate steps in order; the last step's value is the result."""
    values: list[Value] = []
    for index, step in enumerate(program.steps):
        if step.op in TABLE_OPS:
            value = _table_step(step, report)
        else:
            value = _arithmetic_step(step, values)
        if not isinstance(value, bool) and not math.isfinite(value):
            raise NonFiniteResult(f"step {index} ({step.op}) is not finite")
        values.append(value)
    return values[-1]


def format_value(value: Value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return repr(float(value))


def values_match(a: Value, b: Value, rel_tol: float = PROGRAM_REL_TOL) -> bool:
    """Booleans compare exactly; numbers within rel_tol relative to either side."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    diff = abs(a - b)
    return max(diff / max(1.0, abs(b)), diff / max(1.0, abs(a))) <= rel_tol


def _as_program(program: Program | str) -> Program:
    return program if isinstance(program, Program) else parse_program(program)


def compare_programs(
    candidate: Program | str,
    gold: Program | str,
    report=None,
    rel_tol: float = PROGRAM_REL_TOL,
) -> tuple[bool, str | None]:
    """Whether two programs evaluate to the same value, with the reason when not."""
    try:
        got = eval_program(_as_program(candidate), report)
    except ProgramError as e:
        return False, f"candidate: {e}"
    try:
        want = eval_program(_as_program(gold), report)
    except ProgramError as e:
        return False, f"gold: {e}"
    if values_match(got, want, rel_tol):
        return True, None
    return False, f"value {format_value(got)} != {format_value(want)}"


def programs_equivalent(candidate, gold, report=None, rel_tol: float = PROGRAM_REL_TOL) -> bool:
    return compare_programs(candidate, gold, report, rel_tol)[0]

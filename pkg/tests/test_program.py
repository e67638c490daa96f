import math
import operator
import random

import pytest

from src.finqa import FinReport
from src.program import (
    ArgKind,
    ArityMismatch,
    DivisionByZero,
    ForwardReference,
    NonFiniteResult,
    NonNumericRow,
    ProgramSyntaxError,
    RowNotFound,
    TypeMismatch,
    UnknownOperation,
    compare_programs,
    eval_program,
    format_value,
    parse_cell,
    parse_program,
    print_program,
    programs_equivalent,
    values_match,
)

REPORT = FinReport(
    "ACME/2019/page_10.pdf-1",
    ("net sales grew on higher volumes .",),
    (),
    (
        ("", "2019", "2018", "2017"),
        ("net sales", "$ 120", "$ 100", "$ 90"),
        ("cost of sales", "70", "60", "55"),
        ("notes", "see below", "n/a", ""),
    ),
)


def value(text, report=None):
    return eval_program(parse_program(text), report)


# Parsing


def test_parse_two_steps():
    program = parse_program("subtract(100, 60), divide(#0, 60)")
    assert [s.op for s in program.steps] == ["subtract", "divide"]
    assert program.steps[1].arg1.kind == ArgKind.REF
    assert program.steps[1].arg1.value == 0
    assert value("subtract(100, 60), divide(#0, 60)") == pytest.approx(40 / 60)


def test_print_is_canonical():
    program = parse_program("subtract( 100 ,60 ),divide( #0,60)")
    assert print_program(program) == "subtract(100, 60), divide(#0, 60)"
    assert str(program) == "subtract(100, 60), divide(#0, 60)"


@pytest.mark.parametrize(
    "text, expected",
    [
        ("add(1,000, 250)", 1250.0),
        ("multiply(600, 25%)", 150.0),
        ("add(const_100, const_m1)", 99.0),
        ("multiply(const_1000000, 2)", 2000000.0),
        ("add(const_1, const_2)", 3.0),
        ("subtract(-3, .5)", -3.5),
        ("exp(2, 10)", 1024.0),
    ],
)
def test_literals(text, expected):
    assert value(text) == pytest.approx(expected)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("add(100,200)", 300.0),
        ("subtract(1,250), divide(#0, 2)", -124.5),
        ("add(100,200), multiply(#0,100)", 30000.0),
    ],
)
def test_commas_without_spaces_separate_arguments(text, expected):
    assert value(text) == pytest.approx(expected)


def test_percent_literal_law():
    # Equal to writing the fraction directly
    assert value("multiply(200, 14.1%)") == pytest.approx(value("multiply(200, 0.141)"))


@pytest.mark.parametrize(
    "text, error",
    [
        ("", ProgramSyntaxError),
        ("add(1, 2", ProgramSyntaxError),
        ("add(1 2)", ProgramSyntaxError),
        ("add(1, 2) extra", ProgramSyntaxError),
        ("add(1, const_x)", ProgramSyntaxError),
        ("sqrt(4, 2)", UnknownOperation),
        ("add(1)", ArityMismatch),
        ("add(1, 2, 3)", ArityMismatch),
        ("add(1, none)", ArityMismatch),
        ("table_sum(net sales, 2)", ArityMismatch),
        ("add(#0, 1)", ForwardReference),
        ("add(1, 2), add(#1, 1)", ForwardReference),
        ("divide(#3, 2), add(1, 2)", ForwardReference),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_program(text)


def test_syntax_error_reports_position():
    with pytest.raises(ProgramSyntaxError, match="position 8"):
        parse_program("add(1, 2")


def test_unquoted_and_quoted_rows():
    unquoted = parse_program("table_max(net sales, none)")
    quoted = parse_program('table_max("net sales", none)')
    assert unquoted.steps[0].arg1.value == quoted.steps[0].arg1.value == "net sales"
    assert value("table_max(net sales, none)", REPORT) == 120.0


# Evaluation


@pytest.mark.parametrize(
    "text, expected",
    [
        ("table_sum(net sales, none)", 310.0),
        ("table_average(cost of sales, none)", 185 / 3),
        ("table_max(cost of sales, none)", 70.0),
        ("table_min(Net Sales, none)", 90.0),
        ("table_sum(net sales, none), divide(#0, 3)", 310 / 3),
    ],
)
def test_table_operations(text, expected):
    assert value(text, REPORT) == pytest.approx(expected)


def test_table_errors():
    with pytest.raises(RowNotFound):
        value("table_sum(revenue, none)", REPORT)
    with pytest.raises(NonNumericRow):
        value("table_sum(notes, none)", REPORT)
    with pytest.raises(RowNotFound):
        value("table_sum(net sales, none)")


def test_greater_returns_boolean():
    assert value("greater(1250, 1100)") is True
    assert value("greater(1100, 1250)") is False
    assert format_value(True) == "yes"


def test_evaluation_errors():
    with pytest.raises(DivisionByZero):
        value("subtract(5, 5), divide(1, #0)")
    with pytest.raises(NonFiniteResult):
        value("exp(10, 400)")
    with pytest.raises(TypeMismatch):
        value("greater(2, 1), add(#0, 1)")


@pytest.mark.parametrize(
    "cell, expected",
    [
        ("$ 1,250", 1250.0),
        ("12.5%", 0.125),
        ("( 40 )", -40.0),
        ("300 ( a )", 300.0),
        ("n/a", None),
        ("", None),
    ],
)
def test_parse_cell(cell, expected):
    assert parse_cell(cell) == (pytest.approx(expected) if expected is not None else None)


# Comparison


def test_programs_equivalent_is_reflexive():
    for text in ["subtract(120, 100), divide(#0, 100)", "greater(3, 1)", "table_sum(net sales, none)"]:
        assert programs_equivalent(text, text, REPORT)


def test_equivalent_by_value_not_text():
    assert programs_equivalent("divide(20, 100)", "subtract(120, 100), divide(#0, 100)")
    assert programs_equivalent("multiply(0.2, 1)", "divide(20, 100)")
    assert not programs_equivalent("divide(21, 100)", "divide(20, 100)")


def test_candidate_errors_are_not_equivalent():
    equal, reason = compare_programs("divide(1, 0)", "add(1, 2)")
    assert not equal
    assert reason.startswith("candidate:")
    assert not programs_equivalent("not a program", "add(1, 2)")
    assert not programs_equivalent("greater(2, 1)", "subtract(2, 1)")


def test_values_match_tolerance():
    assert values_match(1.00001, 1.0)
    assert not values_match(1.01, 1.0)
    assert values_match(True, True)
    assert not values_match(True, 1.0)


# Randomized programs against a recursive oracle

ORACLE_OPS = {
    "add": operator.add,
    "subtract": operator.sub,
    "multiply": operator.mul,
    "divide": operator.truediv,
    "exp": operator.pow,
}
ORACLE_CONSTANTS = {"const_100": 100.0, "const_1000": 1000.0, "const_m1": -1.0}


def random_literal(rng):
    kind = rng.randrange(6)
    if kind == 0:
        return str(rng.randint(1, 999))
    if kind == 1:
        return f"{rng.randint(0, 99)}.{rng.randint(1, 99):02d}"
    if kind == 2:
        return f"{rng.randint(1, 99)},{rng.randint(0, 999):03d}"
    if kind == 3:
        return f"{rng.randint(1, 99)}%"
    if kind == 4:
        return f"-{rng.randint(1, 50)}"
    return rng.choice(sorted(ORACLE_CONSTANTS))


def random_program(rng):
    """(program text, structured steps) with steps as (op, token, token)."""
    steps = []
    for index in range(rng.randint(1, 6)):
        op = rng.choice(["add", "subtract", "multiply", "divide", "add", "exp"])
        if op == "exp":
            # Literal base and small exponent keep the result finite
            args = (str(rng.randint(1, 3)), str(rng.randint(0, 4)))
        else:
            args = tuple(
                f"#{rng.randrange(index)}" if index and rng.random() < 0.5 else random_literal(rng)
                for _ in range(2)
            )
        steps.append((op, *args))
    if rng.random() < 0.1:
        steps.append(("greater", random_literal(rng), random_literal(rng)))
    text = ", ".join(f"{op}({a}, {b})" for op, a, b in steps)
    return text, steps


def oracle_token(token, steps):
    if token.startswith("#"):
        return oracle_step(steps, int(token[1:]))
    if token in ORACLE_CONSTANTS:
        return ORACLE_CONSTANTS[token]
    if token.endswith("%"):
        return float(token[:-1]) / 100
    return float(token.replace(",", ""))


def oracle_step(steps, k):
    op, a, b = steps[k]
    left, right = oracle_token(a, steps), oracle_token(b, steps)
    if op == "greater":
        return left > right
    return ORACLE_OPS[op](left, right)


def test_random_programs_match_oracle():
    rng = random.Random(20240229)
    checked = 0
    for _ in range(1000):
        text, steps = random_program(rng)
        program = parse_program(text)
        assert print_program(program) == text
        assert parse_program(print_program(program)) == program

        try:
            expected = [oracle_step(steps, k) for k in range(len(steps))][-1]
        except ZeroDivisionError:
            with pytest.raises(DivisionByZero):
                eval_program(program)
            continue
        got = eval_program(program)
        if isinstance(expected, bool):
            assert got is expected
        else:
            assert math.isclose(got, expected, rel_tol=1e-12, abs_tol=1e-12), text
        checked += 1
    assert checked > 900

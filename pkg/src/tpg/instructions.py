"""Instructions and instruction sets.

An :class:`Instruction` pairs a typed operand signature with a pure
evaluation function returning a 64-bit float.  Arithmetic follows IEEE-754
throughout: division by zero yields an infinity or NaN, ``ln`` of a
negative number yields NaN, overflowing ``exp`` yields +inf.  Nothing
traps, so any syntactically valid program can always be executed.

Two built-in sets are provided: the five-operator arithmetic set
(``simple``) and the eight-operator set adding cos/ln/exp (``complex``).
Order within a set is fixed because programs reference instructions by
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .data import FLOAT64, scalar
from .errors import SignatureMismatchError

_INF = math.inf
_NAN = math.nan


def add(a, b) -> float:
    return a + b


def sub(a, b) -> float:
    return a - b


def mul(a, b) -> float:
    return a * b


def ieee_div(a, b) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0:
            return _NAN
        return _INF if (a > 0) == (math.copysign(1.0, b) > 0) else -_INF


def ieee_ln(a) -> float:
    if a > 0:
        return math.log(a)
    if a == 0:
        return -_INF
    return _NAN


def ieee_exp(a) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


def ieee_cos(a) -> float:
    try:
        return math.cos(a)
    except ValueError:  # cos(+-inf)
        return _NAN


def conditional(a, b) -> float:
    """-a when a < b, else a; the comparison is strict, so a == b keeps +a."""
    return -a if a < b else a


def _shape_of(value) -> tuple:
    if not isinstance(value, (list, tuple)):
        return ()
    if value and isinstance(value[0], (list, tuple)):
        return (len(value), len(value[0]))
    return (len(value),)


@dataclass(frozen=True)
class Instruction:
    """One operation programs may use.

    ``expr`` is an optional inline template for the program compiler
    (operand slots ``{0}``, ``{1}``, ...); it must be observationally
    identical to calling ``fn``.  Instructions without a template are
    invoked through ``fn`` with the result coerced to float.
    """

    name: str
    operand_types: tuple
    fn: Callable
    expr: Optional[str] = None

    def __post_init__(self):
        if not self.operand_types:
            raise SignatureMismatchError(f"instruction {self.name!r} takes no operands")

    @property
    def arity(self) -> int:
        return len(self.operand_types)

    def execute(self, operands) -> float:
        if len(operands) != len(self.operand_types):
            raise SignatureMismatchError(
                f"{self.name} expects {len(self.operand_types)} operands, "
                f"got {len(operands)}"
            )
        for value, otype in zip(operands, self.operand_types):
            if _shape_of(value) != otype.shape:
                raise SignatureMismatchError(
                    f"{self.name} operand shape mismatch: wanted {otype}, "
                    f"got {value!r}"
                )
        return float(self.fn(*operands))


def make_instruction(operand_types, fn, name: str, expr: str = None) -> Instruction:
    """Wrap a pure function as an instruction (scalar, 1D, or 2D operands)."""
    return Instruction(name, tuple(operand_types), fn, expr)


class InstructionSet:
    """An ordered, immutable collection of instructions; ids are indices."""

    def __init__(self, name: str, instructions):
        self.name = name
        self.instructions = tuple(instructions)
        if not self.instructions:
            raise SignatureMismatchError("instruction set must not be empty")

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, index: int) -> Instruction:
        return self.instructions[index]

    def __iter__(self):
        return iter(self.instructions)


_F2 = (scalar(FLOAT64), scalar(FLOAT64))
_F1 = (scalar(FLOAT64),)

_ADD = Instruction("add", _F2, add, "({0} + {1})")
_SUB = Instruction("sub", _F2, sub, "({0} - {1})")
_MUL = Instruction("mul", _F2, mul, "({0} * {1})")
_DIV = Instruction("div", _F2, ieee_div, "_div({0}, {1})")
_COND = Instruction("cond", _F2, conditional, "_cond({0}, {1})")
_COS = Instruction("cos", _F1, ieee_cos, "_cos({0})")
_LN = Instruction("ln", _F1, ieee_ln, "_ln({0})")
_EXP = Instruction("exp", _F1, ieee_exp, "_exp({0})")

# helper bindings the compiler injects for the templates above
COMPILER_HELPERS = {
    "_div": ieee_div,
    "_cond": conditional,
    "_cos": ieee_cos,
    "_ln": ieee_ln,
    "_exp": ieee_exp,
}


def simple_instruction_set() -> InstructionSet:
    """Five low-complexity float64 operators: + - * / and the conditional."""
    return InstructionSet("simple", (_ADD, _SUB, _MUL, _DIV, _COND))


def complex_instruction_set() -> InstructionSet:
    """The eight-operator set: + - * / cos ln exp and the conditional."""
    return InstructionSet(
        "complex", (_ADD, _SUB, _MUL, _DIV, _COS, _LN, _EXP, _COND)
    )


_SET_FACTORIES = {
    "simple": simple_instruction_set,
    "complex": complex_instruction_set,
}


def register_instruction_set(name: str, factory) -> None:
    """Make a custom set loadable by name (config files, serialized graphs)."""
    _SET_FACTORIES[name] = factory


def make_instruction_set(name: str) -> InstructionSet:
    try:
        factory = _SET_FACTORIES[name]
    except KeyError:
        raise SignatureMismatchError(
            f"unknown instruction set {name!r}; registered: {sorted(_SET_FACTORIES)}"
        ) from None
    return factory()


def instruction_set_names():
    return sorted(_SET_FACTORIES)

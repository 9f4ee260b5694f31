"""Typed data sources feeding program operands.

Every operand a program reads goes through a :class:`DataSource`: the
register file (source id 0 by convention) and the learning-environment
state.  Sources convert on the fly: an integer-backed source can serve its
values widened to ``int64`` or ``float64``, as scalars or as contained 1D/2D
windows.  Narrowing reads (float to int) are never served, so every read is
exact.

Window semantics: a vector of length n reads n consecutive elements of the
flattened row-major layout; a h-by-w matrix reads a fully contained window
of a 2D-native source, anchored top-left.  The location of a matrix read is
the row-major index over valid anchors, i.e. anchor (r, c) of a h x w window
over a H x W source is location r * (W - w + 1) + c.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .errors import OperandUnavailableError, RegisterRangeError

FLOAT64 = "float64"
INT64 = "int64"
INT8 = "int8"

KINDS = (FLOAT64, INT64, INT8)

# kinds a native element kind may be served as (widening only)
_SERVES = {
    INT8: frozenset((INT8, INT64, FLOAT64)),
    INT64: frozenset((INT64, FLOAT64)),
    FLOAT64: frozenset((FLOAT64,)),
}


@dataclass(frozen=True)
class OperandType:
    """Element kind plus shape: ``()`` scalar, ``(n,)`` vector, ``(h, w)`` matrix."""

    kind: str
    shape: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(self.shape) > 2 or any(d < 1 for d in self.shape):
            raise ValueError(f"bad operand shape {self.shape!r}")

    @property
    def is_scalar(self) -> bool:
        return not self.shape

    def element_count(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    def __str__(self):
        if not self.shape:
            return self.kind
        return self.kind + "".join(f"[{d}]" for d in self.shape)


def scalar(kind: str = FLOAT64) -> OperandType:
    return OperandType(kind)


def vector(n: int, kind: str = FLOAT64) -> OperandType:
    return OperandType(kind, (n,))


def matrix(h: int, w: int, kind: str = FLOAT64) -> OperandType:
    return OperandType(kind, (h, w))


@dataclass(frozen=True)
class SourceSpec:
    """Native layout of a data source: element kind, shape, writability."""

    kind: str
    shape: tuple
    writable: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if not 1 <= len(self.shape) <= 2 or any(d < 1 for d in self.shape):
            raise ValueError(f"bad source shape {self.shape!r}")

    def element_count(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


@lru_cache(maxsize=None)
def addressable_count(spec: SourceSpec, otype: OperandType) -> int:
    """Number of valid locations at which ``spec`` can serve ``otype``.

    Zero means the source never serves that type.
    """
    if otype.kind not in _SERVES[spec.kind]:
        return 0
    total = spec.element_count()
    if not otype.shape:
        return total
    if len(otype.shape) == 1:
        return max(0, total - otype.shape[0] + 1)
    if len(spec.shape) != 2:
        return 0
    big_h, big_w = spec.shape
    h, w = otype.shape
    if h > big_h or w > big_w:
        return 0
    return (big_h - h + 1) * (big_w - w + 1)


class Address(NamedTuple):
    """A (source id, location) pair naming one operand read."""

    source: int
    location: int


class DataSource:
    """A flat row-major value buffer plus its native layout.

    The buffer is a plain list so scalar reads stay cheap; environment
    implementations mutate it in place, which keeps views live without
    copies.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: SourceSpec, values=None):
        self.spec = spec
        n = spec.element_count()
        if values is None:
            zero = 0.0 if spec.kind == FLOAT64 else 0
            self.values = [zero] * n
        else:
            self.values = list(values)
            if len(self.values) != n:
                raise ValueError(
                    f"source expects {n} elements, got {len(self.values)}"
                )

    def addressable_count(self, otype: OperandType) -> int:
        return addressable_count(self.spec, otype)

    def can_provide(self, otype: OperandType, location: int) -> bool:
        return 0 <= location < self.addressable_count(otype)

    def get(self, otype: OperandType, location: int):
        """Fetch a converted value; scalar, list, or list of row lists."""
        if not self.can_provide(otype, location):
            raise OperandUnavailableError(
                f"operand unavailable: {otype} at location {location} "
                f"(source serves {self.addressable_count(otype)} locations)"
            )
        to_float = otype.kind == FLOAT64 and self.spec.kind != FLOAT64
        vals = self.values
        if not otype.shape:
            v = vals[location]
            return float(v) if to_float else v
        if len(otype.shape) == 1:
            out = vals[location : location + otype.shape[0]]
            return [float(v) for v in out] if to_float else out
        h, w = otype.shape
        big_w = self.spec.shape[1]
        anchors_w = big_w - w + 1
        base = (location // anchors_w) * big_w + location % anchors_w
        rows = [vals[base + i * big_w : base + i * big_w + w] for i in range(h)]
        if to_float:
            return [[float(v) for v in row] for row in rows]
        return rows

    def set(self, location: int, value) -> None:
        if not self.spec.writable:
            raise OperandUnavailableError("source is read-only")
        if not 0 <= location < len(self.values):
            raise RegisterRangeError(
                f"location {location} out of range for {len(self.values)} elements"
            )
        self.values[location] = value


class RegisterFile(DataSource):
    """The per-execution float64 scratch registers; register 0 holds the result."""

    RESULT = 0

    def __init__(self, count: int = 8):
        if count < 1:
            raise ValueError("register file needs at least one register")
        super().__init__(SourceSpec(FLOAT64, (count,), writable=True))
        self._zeros = [0.0] * count

    @property
    def count(self) -> int:
        return len(self.values)

    def reset(self) -> None:
        self.values[:] = self._zeros

    def set_register(self, index: int, value: float) -> None:
        if not 0 <= index < len(self.values):
            raise RegisterRangeError(
                f"register {index} out of range (file holds {len(self.values)})"
            )
        self.values[index] = float(value)


class DataSourceSet:
    """The ordered sources one program execution reads from.

    Source 0 is always the register file; environment sources follow in
    declaration order.  The layout tuple identifies compatibility between
    programs and source sets.
    """

    def __init__(self, register_file: RegisterFile, env_sources=()):
        self.sources = [register_file, *env_sources]
        self.register_file = register_file
        self.layout = tuple(s.spec for s in self.sources)
        self.buffers = tuple(s.values for s in self.sources)

    @classmethod
    def from_layout(cls, layout) -> "DataSourceSet":
        """Build a zero-filled set matching ``layout`` (element 0 = registers)."""
        reg_spec = layout[0]
        regs = RegisterFile(reg_spec.element_count())
        env = [DataSource(spec) for spec in layout[1:]]
        return cls(regs, env)

    def __getitem__(self, source_id: int) -> DataSource:
        return self.sources[source_id]

    def __len__(self) -> int:
        return len(self.sources)

    def load_state(self, snapshot) -> None:
        """Overwrite environment-source buffers from a state snapshot."""
        for src, values in zip(self.sources[1:], snapshot):
            src.values[:] = values

    def snapshot(self) -> tuple:
        return tuple(tuple(s.values) for s in self.sources[1:])

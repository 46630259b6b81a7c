"""State-space subsystems and the block-diagonal plant ``G(s)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyNetwork, IndexOutOfRange


def _frozen(x, shape=None) -> np.ndarray:
    a = np.array(x, dtype=float, copy=True)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


def _shaped(x, shape, name) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.size == 0 and 0 in shape:
        return np.zeros(shape)
    if a.ndim < 2 and a.size == shape[0] * shape[1]:
        a = a.reshape(shape)
    if a.shape != shape:
        raise DimensionMismatch(f"{name} has shape {a.shape}, expected {shape}")
    return a


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal stacking that tolerates zero-sized blocks."""
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    i = j = 0
    for b in blocks:
        out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """One LTI subsystem ``C (sI - A)^{-1} B + D``.

    ``n = 0`` is allowed and denotes the static gain ``D``.  Arrays are
    copied and made read-only on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    label: str = ""

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.ndim != 2:
            raise DimensionMismatch(f"D must be 2-D, got shape {D.shape}")
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        n = 0 if A.size == 0 else np.atleast_2d(A).shape[0]
        A = _shaped(A, (n, n), "A")
        B = _shaped(self.B, (n, m), "B")
        C = _shaped(self.C, (p, n), "C")
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, _frozen(arr))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def transform(self, T, Tinv) -> "StateSpaceModel":
        """Change of state coordinates ``x_new = T x``."""
        return StateSpaceModel(T @ self.A @ Tinv, T @ self.B, self.C @ Tinv, self.D, self.label)


@dataclass(frozen=True, eq=False)
class BlockDiagonalPlant:
    """``G(s) = diag(G_1(s), ..., G_q(s))`` with aggregate realization."""

    subsystems: tuple[StateSpaceModel, ...]
    A: np.ndarray = field(init=False)
    B: np.ndarray = field(init=False)
    C: np.ndarray = field(init=False)
    D: np.ndarray = field(init=False)

    def __post_init__(self):
        subs = tuple(self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        for name in "ABCD":
            object.__setattr__(self, name, _frozen(block_diag([getattr(s, name) for s in subs])))

    @property
    def q(self) -> int:
        return len(self.subsystems)

    @property
    def state_dims(self) -> tuple[int, ...]:
        return tuple(s.n for s in self.subsystems)

    @property
    def input_dims(self) -> tuple[int, ...]:
        return tuple(s.m for s in self.subsystems)

    @property
    def output_dims(self) -> tuple[int, ...]:
        return tuple(s.p for s in self.subsystems)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def state_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.state_dims)]).astype(int)

    def input_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.input_dims)]).astype(int)

    def output_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.output_dims)]).astype(int)

    def same_partition(self, other: "BlockDiagonalPlant") -> bool:
        return (self.input_dims == other.input_dims
                and self.output_dims == other.output_dims)


def aggregate(subsystems: Sequence[StateSpaceModel]) -> BlockDiagonalPlant:
    """Stack subsystems into the block-diagonal plant."""
    subs = tuple(subsystems)
    if not subs:
        raise EmptyNetwork("at least one subsystem is required")
    for s in subs:
        if not isinstance(s, StateSpaceModel):
            raise TypeError(f"expected StateSpaceModel, got {type(s).__name__}")
    return BlockDiagonalPlant(subs)


def extract_subsystem(plant: BlockDiagonalPlant, i: int) -> StateSpaceModel:
    """Return subsystem ``i`` using 1-based indexing (``1 <= i <= q``)."""
    if not 1 <= i <= plant.q:
        raise IndexOutOfRange(f"subsystem index {i} outside 1..{plant.q}")
    return plant.subsystems[i - 1]


@dataclass(frozen=True)
class OrderVector:
    """Target orders ``r_i``, one per subsystem."""

    r: tuple[int, ...]

    def __post_init__(self):
        r = tuple(int(v) for v in self.r)
        if any(v < 0 for v in r):
            raise ValueError(f"orders must be nonnegative: {r}")
        object.__setattr__(self, "r", r)

    @property
    def total(self) -> int:
        return sum(self.r)

    def __iter__(self):
        return iter(self.r)

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i):
        return self.r[i]

    def validate(self, plant: BlockDiagonalPlant) -> "OrderVector":
        if len(self.r) != plant.q:
            raise DimensionMismatch(f"{len(self.r)} orders given for {plant.q} subsystems")
        for i, (ri, ni) in enumerate(zip(self.r, plant.state_dims), start=1):
            if ri > ni:
                raise ValueError(f"order r_{i}={ri} exceeds n_{i}={ni}")
        return self


def as_orders(r, plant: BlockDiagonalPlant | None = None) -> OrderVector:
    ov = r if isinstance(r, OrderVector) else OrderVector(tuple(r))
    if plant is not None:
        ov.validate(plant)
    return ov

"""Mass partitions: decreasing finite-support mass sequences, their metrics and the refinement order.

A partition is stored without trailing zeros; the conceptual object is the
infinite sequence padded with zeros, and every metric pads on the fly.
Witness indices are 0-based.
"""

import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, field_validator, model_validator

from shared.models.base import FrozenModel
from .config import MASS_TOL, WITNESS_MAX_SUPPORT
from .errors import InstanceTooLargeError, InvalidMassError, InvalidWitnessError


class SpaceTag(str, Enum):
    """Which subspace of finite-mass sequences a partition belongs to."""
    S1 = "S1"
    S_LE1 = "S_le1"
    S_FIN = "S_fin"


class MassPartition(FrozenModel):
    """Decreasing nonnegative mass sequence with finite support."""

    masses: Tuple[float, ...] = Field(default_factory=tuple)

    @field_validator("masses")
    @classmethod
    def _check_entries(cls, masses: Tuple[float, ...]) -> Tuple[float, ...]:
        for i, m in enumerate(masses):
            if not math.isfinite(m) or m < 0:
                raise ValueError(f"mass {m!r} at index {i} is negative or not finite")
        return masses

    @model_validator(mode="after")
    def _check_order(self) -> "MassPartition":
        ms = self.masses
        if any(ms[i] < ms[i + 1] for i in range(len(ms) - 1)):
            raise ValueError("masses must be stored in decreasing order")
        if ms and ms[-1] == 0.0:
            raise ValueError("trailing zero masses must not be stored")
        return self

    @classmethod
    def trusted(cls, sorted_masses: np.ndarray) -> "MassPartition":
        """Build from an already decreasing, zero-free array without re-validating."""
        return cls.model_construct(masses=tuple(float(m) for m in sorted_masses))

    @property
    def support(self) -> int:
        return len(self.masses)

    def array(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=float)

    def padded(self, k: int) -> np.ndarray:
        """First ``k`` coordinates of the zero-padded sequence."""
        out = np.zeros(k, dtype=float)
        m = min(k, len(self.masses))
        out[:m] = self.masses[:m]
        return out

    def to_json(self) -> List[float]:
        return list(self.masses)

    def __len__(self) -> int:
        return len(self.masses)

    def __getitem__(self, i: int) -> float:
        return self.masses[i]


class RefinementWitness(FrozenModel):
    """The grouping map: piece j of the finer partition goes into piece assignment[j] of the coarser one."""

    assignment: Tuple[int, ...] = Field(default_factory=tuple)


class Moments(FrozenModel):
    total_mass: float
    q_value: float
    space_tag: SpaceTag


def normalize(values: Sequence[float]) -> MassPartition:
    """Canonicalize nonnegative values into a mass partition (sorted, zero-free)."""
    arr = np.asarray(list(values), dtype=float)
    bad = np.flatnonzero(~np.isfinite(arr) | (arr < 0))
    if bad.size:
        i = int(bad[0])
        raise InvalidMassError(i, float(arr[i]))
    arr = -np.sort(-arr)
    return MassPartition.trusted(arr[arr > 0])


def mass_partition_from_json(data: Sequence[float]) -> MassPartition:
    return MassPartition(masses=tuple(float(v) for v in data))


def _padded_pair(a: MassPartition, b: MassPartition) -> Tuple[np.ndarray, np.ndarray]:
    k = max(len(a), len(b))
    return a.padded(k), b.padded(k)


def product_metric(a: MassPartition, b: MassPartition) -> float:
    """Sum of 2^-i min(|a_i - b_i|, 1) over i >= 1; terms beyond both supports vanish."""
    x, y = _padded_pair(a, b)
    if x.size == 0:
        return 0.0
    weights = np.ldexp(1.0, -np.arange(1, x.size + 1))
    return float(np.sum(weights * np.minimum(np.abs(x - y), 1.0)))


def lp_distance(a: MassPartition, b: MassPartition, p: Union[int, float, str] = 1) -> float:
    """l^p distance of the zero-padded sequences; ``p`` is a real >= 1 or 'inf'."""
    order = math.inf if p in ("inf", "∞") else float(p)
    if order < 1:
        raise ValueError(f"p must be >= 1, got {p!r}")
    x, y = _padded_pair(a, b)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x - y, ord=order))


def moments(a: MassPartition, tol: float = MASS_TOL) -> Moments:
    arr = a.array()
    total = float(arr.sum())
    q = float(np.dot(arr, arr))
    if abs(total - 1.0) <= tol:
        tag = SpaceTag.S1
    elif total <= 1.0 + tol:
        tag = SpaceTag.S_LE1
    else:
        tag = SpaceTag.S_FIN
    return Moments(total_mass=total, q_value=q, space_tag=tag)


def fiber_sums(y: MassPartition, w: RefinementWitness) -> np.ndarray:
    """Mass of y collected in each target index of the witness."""
    if len(w.assignment) < len(y):
        raise InvalidWitnessError(
            f"witness covers {len(w.assignment)} pieces but the finer partition has {len(y)}"
        )
    targets = np.asarray(w.assignment[:len(y)], dtype=np.int64)
    if targets.size and targets.min() < 0:
        raise InvalidWitnessError("witness targets must be nonnegative indices")
    if targets.size == 0:
        return np.zeros(0)
    return np.bincount(targets, weights=y.array())


def verify_refinement(y: MassPartition, x: MassPartition, w: RefinementWitness,
                      tol: float = MASS_TOL) -> bool:
    """True iff every fiber sum of y under w fits into the corresponding piece of x.

    Targets past the support of x see a piece of mass 0, so they may only
    collect an empty fiber.
    """
    sums = fiber_sums(y, w)
    caps = x.padded(sums.size)
    return bool(np.all(sums <= caps + tol))


def find_refinement_witness(y: MassPartition, x: MassPartition,
                            max_support: int = WITNESS_MAX_SUPPORT,
                            tol: float = MASS_TOL) -> Optional[RefinementWitness]:
    """Exhaustive search for a grouping of y's pieces into x's pieces.

    Pieces of y are placed largest first; a bin is skipped when an earlier bin
    with the same remaining capacity was already tried at that depth.
    """
    if len(y) > max_support:
        raise InstanceTooLargeError(len(y), max_support)
    if len(y) == 0:
        return RefinementWitness()
    if len(x) == 0 or y.array().sum() > x.array().sum() + tol * len(y):
        return None

    items = y.masses
    remaining = [m + tol for m in x.masses]
    assignment = [-1] * len(items)

    def place(j: int) -> bool:
        if j == len(items):
            return True
        tried = set()
        for i, cap in enumerate(remaining):
            if cap < items[j] or cap in tried:
                continue
            tried.add(cap)
            remaining[i] -= items[j]
            assignment[j] = i
            if place(j + 1):
                return True
            remaining[i] += items[j]
        return False

    if place(0):
        return RefinementWitness(assignment=tuple(assignment))
    return None


def dust_sequence(n: int) -> MassPartition:
    """n equal pieces of mass 1/n."""
    if n < 1:
        raise ValueError(f"dust_sequence needs n >= 1, got {n}")
    return MassPartition.trusted(np.full(n, 1.0 / n))

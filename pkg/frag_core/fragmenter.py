"""Fragmentation of a tree by edge deletion at random clock times.

The whole trajectory is rebuilt in one reverse pass: edges are re-inserted in
decreasing clock order with a union-find, and every union becomes a split when
time runs forward. The result is a binary merge tree whose leaves 0..n-1 are
the vertices and whose internal node n + j is the component split by forward
event j. Node n is the whole tree.
"""

import heapq
import math
import time
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import model_validator

from shared.models.base import ArrayModel, FrozenModel
from .cadlag import StepPath
from .config import MASS_TOL
from .errors import ClockCouplingError, InvalidTreeError
from .masspart import MassPartition, RefinementWitness
from .services.logger import get_logger, log_performance
from .trees import Tree
from .unionfind import UnionFind

logger = get_logger(__name__)


class ClockKind(str, Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"


class ClockLaw(FrozenModel):
    """Exponential(rate) or uniform(0, t_max) deletion clocks."""

    kind: ClockKind
    rate: Optional[float] = None
    t_max: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "ClockLaw":
        if self.kind == ClockKind.EXPONENTIAL:
            if self.rate is None or not self.rate > 0 or not math.isfinite(self.rate):
                raise ValueError(f"exponential clocks need a positive rate, got {self.rate!r}")
        elif self.t_max is None or not self.t_max > 0 or not math.isfinite(self.t_max):
            raise ValueError(f"uniform clocks need a positive t_max, got {self.t_max!r}")
        return self

    @classmethod
    def exponential(cls, rate: float) -> "ClockLaw":
        return cls(kind=ClockKind.EXPONENTIAL, rate=rate)

    @classmethod
    def uniform(cls, t_max: float) -> "ClockLaw":
        return cls(kind=ClockKind.UNIFORM, t_max=t_max)


class EdgeClocks(ArrayModel):
    """One deletion time per edge, in edge order, with the law it was drawn from."""

    times: np.ndarray
    law: ClockLaw

    @model_validator(mode="after")
    def _check(self) -> "EdgeClocks":
        t = self.times
        if t.ndim != 1:
            raise ValueError("clock times must be a flat array")
        if t.size and (np.any(~np.isfinite(t)) or t.min() <= 0):
            raise ValueError("clock times must be finite and positive")
        if self.law.kind == ClockKind.UNIFORM and t.size and t.max() > self.law.t_max:
            raise ValueError("uniform clock exceeds t_max")
        return self

    @classmethod
    def of(cls, times, law: ClockLaw) -> "EdgeClocks":
        arr = np.array(times, dtype=float)
        arr.setflags(write=False)
        return cls(times=arr, law=law)

    def __len__(self) -> int:
        return int(self.times.size)


def draw_clocks(tree: Tree, law: ClockLaw, rng: np.random.Generator) -> EdgeClocks:
    """Independent clocks, one per edge of the tree."""
    m = tree.n - 1
    if law.kind == ClockKind.EXPONENTIAL:
        times = rng.exponential(1.0 / law.rate, size=m)
    else:
        # t_max * (1 - U) with U uniform on [0, 1) lies in (0, t_max]
        times = law.t_max * (1.0 - rng.random(m))
    return EdgeClocks.of(times, law)


def couple_clocks(clocks: EdgeClocks) -> EdgeClocks:
    """Map uniform(0, t_n) clocks to Exp(1/t_n) clocks by T = -t_n log(1 - T_hat / t_n).

    The map is strictly increasing, so both clock sets delete edges in the same order.
    """
    if clocks.law.kind != ClockKind.UNIFORM:
        raise ClockCouplingError("clock coupling needs uniform clocks")
    t_n = clocks.law.t_max
    if clocks.times.size and clocks.times.max() >= t_n:
        raise ClockCouplingError(f"a uniform clock equals t_n={t_n}; the coupled time is infinite")
    return EdgeClocks.of(-t_n * np.log1p(-clocks.times / t_n), ClockLaw.exponential(1.0 / t_n))


class TimeChange(str, Enum):
    A = "a"
    B = "b"


def time_change(t: float, t_n: float, direction: Union[TimeChange, str]) -> float:
    """a(t) = t_n (1 - e^{-t/t_n}); b(t) = -t_n log(1 - t/t_n), infinite for t >= t_n."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not t_n > 0:
        raise ValueError(f"t_n must be positive, got {t_n}")
    if TimeChange(direction) == TimeChange.A:
        return float(-t_n * math.expm1(-t / t_n))
    if t >= t_n:
        return math.inf
    return float(-t_n * math.log1p(-t / t_n))


class StoppingKind(str, Enum):
    CONSTANT = "constant"
    FIRST_SPLIT = "first_split"
    FIRST_MAX_BELOW = "first_max_below"


class StoppingTimeSpec(FrozenModel):
    kind: StoppingKind
    value: float = 0.0

    @classmethod
    def constant(cls, t: float) -> "StoppingTimeSpec":
        return cls(kind=StoppingKind.CONSTANT, value=t)

    @classmethod
    def first_split(cls) -> "StoppingTimeSpec":
        return cls(kind=StoppingKind.FIRST_SPLIT)

    @classmethod
    def first_max_below(cls, threshold: float) -> "StoppingTimeSpec":
        return cls(kind=StoppingKind.FIRST_MAX_BELOW, value=threshold)

    def label(self) -> str:
        if self.kind == StoppingKind.FIRST_SPLIT:
            return "first_split"
        return f"{self.kind.value}({self.value:g})"


class FragmentationTrajectory:
    """Complete history of a tree fragmentation, queryable at any time.

    Event j happens at ``times[j]`` and splits node ``n + j`` into the two
    nodes in ``children[j]`` (heavier first) with masses ``child_masses[j]``.
    """

    def __init__(self, n: int, times: np.ndarray, children: np.ndarray, child_masses: np.ndarray,
                 weighted: bool = False, q_after: Optional[np.ndarray] = None,
                 parents: Optional[np.ndarray] = None, validate: bool = True):
        m = times.size
        self.n = n
        self.weighted = weighted
        self.times = times
        self.children = children.reshape(-1, 2).astype(np.int64)
        self.child_masses = child_masses.reshape(-1, 2).astype(float)
        self.parents = (np.arange(n, n + m, dtype=np.int64) if parents is None
                        else np.asarray(parents, dtype=np.int64))
        root = int(self.parents[0]) if m else 0

        nodes = max(2 * n - 1, int(self.children.max()) + 1 if m else 1, root + 1)
        self.root = root
        self.node_mass = np.zeros(nodes)
        self.node_mass[root] = 1.0
        self.node_birth = np.full(nodes, math.inf)
        self.node_birth[root] = 0.0
        self.node_split = np.full(nodes, math.inf)
        self.node_parent = np.full(nodes, -1, dtype=np.int64)
        if m:
            self.node_mass[self.children.ravel()] = self.child_masses.ravel()
            self.node_split[self.parents] = times
            self.node_birth[self.children.ravel()] = np.repeat(times, 2)
            self.node_parent[self.children.ravel()] = np.repeat(self.parents, 2)

        if q_after is None:
            before = self.node_mass[self.parents] ** 2
            after = (self.child_masses ** 2).sum(axis=1)
            q_after = 1.0 - np.cumsum(before - after)
        self.q_after = q_after
        self._checkpoints: Optional[List[np.ndarray]] = None

        if validate:
            self._validate()

    def _validate(self) -> None:
        if np.any(np.diff(self.times) < 0):
            raise ValueError("event times must be nondecreasing")
        if np.any(self.times <= 0):
            raise ValueError("event times must be positive")
        gap = np.abs(self.child_masses.sum(axis=1) - self.node_mass[self.parents])
        if gap.size and gap.max() > MASS_TOL:
            j = int(np.argmax(gap))
            raise ValueError(f"event {j}: child masses do not sum to the parent mass")
        if np.any(self.node_birth[self.parents] > self.times):
            raise ValueError("an event splits a component before it exists")

    def __repr__(self) -> str:
        return f"FragmentationTrajectory(n={self.n}, events={self.num_events}, weighted={self.weighted})"

    @property
    def num_events(self) -> int:
        return int(self.times.size)

    @property
    def horizon(self) -> float:
        return float(self.times[-1]) if self.num_events else 0.0

    def alive(self, t: float) -> np.ndarray:
        """Node ids of the components present at time t."""
        if t < 0:
            raise ValueError(f"t must be nonnegative, got {t}")
        return np.flatnonzero((self.node_birth <= t) & (self.node_split > t))

    def masses_at(self, t: float) -> np.ndarray:
        return self.node_mass[self.alive(t)]

    def event_index(self, t: float) -> int:
        """Number of events that happened at or before t."""
        return int(np.searchsorted(self.times, t, side="right"))

    @property
    def checkpoint_step(self) -> int:
        """Events between two consecutive checkpoints, ceil(sqrt(#events))."""
        m = self.num_events
        return math.isqrt(m - 1) + 1 if m else 1

    def _build_checkpoints(self) -> List[np.ndarray]:
        # checkpoint c holds the 2 * step heaviest nodes alive after c * step events;
        # at most step - 1 of them split before the next checkpoint, so memory stays O(n)
        step = self.checkpoint_step
        heap: List[Tuple[float, int]] = [(-self.node_mass[self.root], self.root)]
        dead = set()
        marks = []
        for j in range(self.num_events + 1):
            if j % step == 0:
                marks.append(np.array([node for _, node in _peek(heap, dead, 2 * step)], dtype=np.int64))
            if j < self.num_events:
                dead.add(int(self.parents[j]))
                for c, mass in zip(self.children[j].tolist(), self.child_masses[j].tolist()):
                    heapq.heappush(heap, (-mass, c))
        return marks

    def top_masses(self, j: int, k: int) -> np.ndarray:
        """The k largest masses once the first j events have happened, decreasing.

        Starts from the checkpoint at or before j and replays at most
        ``checkpoint_step - 1`` events, so k may not exceed ``checkpoint_step``.
        """
        if not 0 <= j <= self.num_events:
            raise ValueError(f"event index {j} outside 0..{self.num_events}")
        step = self.checkpoint_step
        if not 1 <= k <= step:
            raise ValueError(f"k must lie in 1..{step}, got {k}")
        if self._checkpoints is None:
            self._checkpoints = self._build_checkpoints()
        base = j - j % step
        removed = set(self.parents[base:j].tolist())
        added = [c for c in self.children[base:j].ravel().tolist() if c not in removed]
        kept = [c for c in self._checkpoints[base // step].tolist() if c not in removed][:k]
        candidates = np.concatenate([self.node_mass[np.asarray(kept, dtype=np.int64)],
                                     self.node_mass[np.asarray(added, dtype=np.int64)]])
        return -np.sort(-candidates)[:k]

    def to_json(self) -> dict:
        events = [
            {"t": float(t), "parent": int(p), "children": [float(a), float(b)],
             "child_ids": [int(c), int(d)]}
            for t, p, (a, b), (c, d) in zip(self.times.tolist(), self.parents.tolist(),
                                            self.child_masses.tolist(), self.children.tolist())
        ]
        return {"n": self.n, "weighted": self.weighted, "events": events}

    @classmethod
    def from_json(cls, data: dict, validate: bool = True) -> "FragmentationTrajectory":
        events = data["events"]
        n = int(data["n"])
        times = np.array([e["t"] for e in events], dtype=float)
        parents = np.array([e["parent"] for e in events], dtype=np.int64)
        masses = np.array([e["children"] for e in events], dtype=float).reshape(-1, 2)
        if events and "child_ids" in events[0]:
            children = np.array([e["child_ids"] for e in events], dtype=np.int64)
        else:
            # without ids the children get fresh labels past the merge-tree range
            children = (2 * n - 1 + np.arange(2 * len(events))).reshape(-1, 2)
        return cls(n, times, children, masses, weighted=bool(data.get("weighted", False)),
                   parents=parents, validate=validate)

    def top_k_rows(self, k: int) -> List[List[float]]:
        """Rows (t, m1..mk) after every event time, with zero padding."""
        heap: List[Tuple[float, int]] = [(-self.node_mass[self.root], self.root)]
        dead = set()
        rows = [[0.0] + _top_k(heap, dead, k)]
        for j in range(self.num_events):
            dead.add(int(self.parents[j]))
            for c, mass in zip(self.children[j].tolist(), self.child_masses[j].tolist()):
                heapq.heappush(heap, (-mass, c))
            if j + 1 == self.num_events or self.times[j + 1] != self.times[j]:
                rows.append([float(self.times[j])] + _top_k(heap, dead, k))
        return rows


def _peek(heap: list, dead: set, k: int) -> List[Tuple[float, int]]:
    """The k heaviest live entries, left on the heap; dead entries are dropped."""
    taken = []
    while heap and len(taken) < k:
        item = heapq.heappop(heap)
        if item[1] in dead:
            dead.discard(item[1])
            continue
        taken.append(item)
    for item in taken:
        heapq.heappush(heap, item)
    return taken


def _top_k(heap: list, dead: set, k: int) -> List[float]:
    out = [-mass for mass, _ in _peek(heap, dead, k)]
    return out + [0.0] * (k - len(out))


def fragment(tree: Tree, clocks: EdgeClocks, weighted: Optional[bool] = None) -> FragmentationTrajectory:
    """Exact trajectory of the fragmentation of ``tree`` under ``clocks``.

    Ties in clock times split in edge-index order. Masses are component sizes
    over n, or component weights when the tree carries vertex weights.
    """
    n = tree.n
    m = n - 1
    if len(clocks) != m:
        raise InvalidTreeError(f"{len(clocks)} clocks for {m} edges")
    if weighted is None:
        weighted = tree.weights is not None
    start = time.time()

    order = np.argsort(clocks.times, kind="stable")
    times = clocks.times[order]
    weights = tree.vertex_weights().tolist() if weighted else None
    uf = UnionFind(n, weights)

    children = np.empty((m, 2), dtype=np.int64)
    raw = np.empty((m, 2), dtype=float if weighted else np.int64)
    edges = tree.edges[order].tolist()
    for j in range(m - 1, -1, -1):
        u, v = edges[j]
        ru, rv = uf.find(u), uf.find(v)
        cu, cv = uf.label[ru], uf.label[rv]
        mu, mv = uf.mass[ru], uf.mass[rv]
        root = uf.union(ru, rv)
        uf.label[root] = n + j
        if mu >= mv:
            children[j] = (cu, cv)
            raw[j] = (mu, mv)
        else:
            children[j] = (cv, cu)
            raw[j] = (mv, mu)

    if weighted:
        masses = raw.astype(float)
        q_after = 1.0 - np.cumsum(2.0 * masses[:, 0] * masses[:, 1])
    else:
        masses = raw / n
        # exact integer bookkeeping of n^2 Q
        q_after = (n * n - np.cumsum(2 * raw[:, 0] * raw[:, 1])) / (n * n)

    traj = FragmentationTrajectory(n, times, children, masses, weighted=weighted,
                                   q_after=q_after, validate=False)
    log_performance("fragment", time.time() - start, {"n": n, "weighted": weighted})
    return traj


def state_at(traj: FragmentationTrajectory, t: float) -> MassPartition:
    """Decreasing component masses at time t (right-continuous)."""
    masses = traj.masses_at(t)
    return MassPartition.trusted(-np.sort(-masses[masses > 0]))


def q_at(traj: FragmentationTrajectory, t: float) -> float:
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    idx = traj.event_index(t)
    return 1.0 if idx == 0 else float(traj.q_after[idx - 1])


def q_process(traj: FragmentationTrajectory) -> StepPath:
    """Q(t) as a step path; simultaneous events collapse into one step."""
    if traj.num_events == 0:
        return StepPath([0.0], [1.0], 0.0)
    last_of_time = np.flatnonzero(np.append(np.diff(traj.times) != 0, True))
    breakpoints = np.concatenate([[0.0], traj.times[last_of_time]])
    values = np.concatenate([[1.0], traj.q_after[last_of_time]])
    return StepPath(breakpoints, values, traj.horizon, validate=False)


def s_k_at(traj: FragmentationTrajectory, t: float, k: int) -> float:
    """Sum of the k largest masses at time t."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if k <= traj.checkpoint_step:
        return float(traj.top_masses(traj.event_index(t), k).sum())
    masses = traj.masses_at(t)
    if k >= masses.size:
        return float(masses.sum())
    return float(-np.partition(-masses, k - 1)[:k].sum())


def _max_after(traj: FragmentationTrajectory, j: int) -> float:
    """Largest mass once the first j events have happened."""
    return float(traj.top_masses(j, 1)[0])


def stopping_time(traj: FragmentationTrajectory, spec: StoppingTimeSpec) -> float:
    """Evaluate a stopping time on the trajectory; ``math.inf`` means never."""
    if spec.kind == StoppingKind.CONSTANT:
        return spec.value
    if spec.kind == StoppingKind.FIRST_SPLIT:
        return float(traj.times[0]) if traj.num_events else math.inf

    threshold = spec.value
    if _max_after(traj, 0) <= threshold:
        return 0.0
    m = traj.num_events
    if m == 0 or _max_after(traj, m) > threshold:
        return math.inf
    # the largest mass is nonincreasing in the event index
    lo, hi = 0, m
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _max_after(traj, mid) <= threshold:
            hi = mid
        else:
            lo = mid
    return float(traj.times[hi - 1])


def containment_witness(traj: FragmentationTrajectory, t1: float,
                        t2: float) -> Tuple[MassPartition, MassPartition, RefinementWitness]:
    """(state at t2, state at t1, witness) where each piece at t2 maps to the piece
    at t1 containing it."""
    if t2 < t1:
        raise ValueError("t1 must not exceed t2")
    coarse = traj.alive(t1)
    fine = traj.alive(t2)
    ancestor = list(range(traj.node_mass.size))
    lo, hi = traj.event_index(t1), traj.event_index(t2)
    for p, (a, b) in zip(traj.parents[lo:hi].tolist(), traj.children[lo:hi].tolist()):
        ancestor[a] = ancestor[b] = ancestor[p]
    ancestor = np.asarray(ancestor, dtype=np.int64)

    coarse = coarse[np.argsort(-traj.node_mass[coarse], kind="stable")]
    fine = fine[np.argsort(-traj.node_mass[fine], kind="stable")]
    position = np.full(traj.node_mass.size, -1, dtype=np.int64)
    position[coarse] = np.arange(coarse.size)

    keep_fine = fine[traj.node_mass[fine] > 0]
    keep_coarse = coarse[traj.node_mass[coarse] > 0]
    y = MassPartition.trusted(traj.node_mass[keep_fine])
    x = MassPartition.trusted(traj.node_mass[keep_coarse])
    witness = RefinementWitness(assignment=tuple(int(i) for i in position[ancestor[keep_fine]]))
    return y, x, witness


def coalescent_state(traj: FragmentationTrajectory, s: float, sigma: float) -> MassPartition:
    """Additive-coalescent view of a weighted fragmentation with uniform(0, 1/sigma)
    clocks: the state at time e^{-s} / sigma."""
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    return state_at(traj, math.exp(-s) / sigma)

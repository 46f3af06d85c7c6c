"""Right-continuous step paths, piecewise-linear paths and distances between them.

Exact Skorohod J1 distances are not computed. ``j1_upper_bound`` returns a
certified upper bound, obtained from explicit piecewise-linear time changes,
together with a lower-bound certificate.
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from shared.models.base import FrozenModel
from .config import MASS_TOL
from .errors import PathDomainError
from .masspart import MassPartition, mass_partition_from_json, product_metric
from .services.logger import get_logger

logger = get_logger(__name__)

Payload = Union[float, MassPartition]

# Alignment tables above this many cells fall back to the identity time change
MAX_ALIGNMENT_CELLS = 4_000_000


class StepPath:
    """Right-continuous step function on [0, horizon].

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``; the last value
    holds up to and including the horizon.
    """

    __slots__ = ("breakpoints", "values", "horizon")

    def __init__(self, breakpoints: Sequence[float], values: Sequence[Payload],
                 horizon: Optional[float] = None, validate: bool = True):
        bps = np.asarray(breakpoints, dtype=float)
        if len(values) > 0 and isinstance(values[0], MassPartition):
            vals = tuple(values)
        else:
            vals = np.asarray(values, dtype=float)
        hz = float(bps[-1]) if horizon is None and bps.size else float(horizon or 0.0)

        if validate:
            if bps.size == 0:
                raise ValueError("a step path needs at least one breakpoint")
            if bps[0] != 0.0:
                raise ValueError("breakpoints must start at 0")
            if np.any(np.diff(bps) <= 0):
                raise ValueError("breakpoints must be strictly increasing")
            if len(vals) != bps.size:
                raise ValueError("one value per breakpoint is required")
            if hz < bps[-1]:
                raise ValueError("horizon precedes the last breakpoint")

        bps.setflags(write=False)
        if isinstance(vals, np.ndarray):
            vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "horizon", hz)

    def __setattr__(self, name, value):
        raise AttributeError("StepPath is immutable")

    @property
    def is_real(self) -> bool:
        return isinstance(self.values, np.ndarray)

    def __len__(self) -> int:
        return int(self.breakpoints.size)

    def __repr__(self) -> str:
        return f"StepPath(breaks={len(self)}, horizon={self.horizon})"

    def jumps(self) -> Tuple[np.ndarray, np.ndarray]:
        """Jump times and signed jump sizes (real payloads only)."""
        if not self.is_real:
            raise TypeError("jumps are defined for real-valued paths only")
        diffs = np.diff(self.values)
        idx = np.flatnonzero(diffs != 0) + 1
        return self.breakpoints[idx], diffs[idx - 1]

    def to_json(self) -> dict:
        if self.is_real:
            values = [float(v) for v in self.values]
        else:
            values = [v.to_json() for v in self.values]
        return {"breakpoints": [float(b) for b in self.breakpoints], "values": values,
                "horizon": self.horizon}

    def to_csv_rows(self) -> List[list]:
        rows = []
        for t, v in zip(self.breakpoints, self.values):
            rows.append([float(t)] + ([float(v)] if self.is_real else list(v.masses)))
        return rows


def step_path_from_json(data: dict) -> StepPath:
    values = data["values"]
    if values and isinstance(values[0], list):
        values = [mass_partition_from_json(v) for v in values]
    return StepPath(data["breakpoints"], values, data.get("horizon"))


class PiecewiseLinearPath:
    """Continuous path given by knots (time, value) with linear interpolation."""

    __slots__ = ("times", "values")

    def __init__(self, knots: Sequence[Tuple[float, float]]):
        arr = np.asarray(knots, dtype=float).reshape(-1, 2)
        if arr.shape[0] < 2:
            raise ValueError("a piecewise-linear path needs at least two knots")
        if arr[0, 0] != 0.0:
            raise ValueError("knot times must start at 0")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ValueError("knot times must be strictly increasing")
        times, values = arr[:, 0].copy(), arr[:, 1].copy()
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseLinearPath is immutable")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def knots(self) -> List[Tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]

    def __repr__(self) -> str:
        return f"PiecewiseLinearPath(knots={self.knots()})"


Path = Union[StepPath, PiecewiseLinearPath]


def _check_domain(path: Path, t) -> None:
    tt = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(tt)) or np.any(tt < 0) or np.any(tt > path.horizon):
        raise PathDomainError(f"t={t!r} is outside [0, {path.horizon}]")


def evaluate(path: Path, t: float) -> Payload:
    """Right-continuous evaluation for step paths, linear interpolation otherwise."""
    _check_domain(path, t)
    if isinstance(path, PiecewiseLinearPath):
        return float(np.interp(t, path.times, path.values))
    k = int(np.searchsorted(path.breakpoints, t, side="right")) - 1
    v = path.values[k]
    return float(v) if path.is_real else v


def evaluate_many(path: Path, ts: np.ndarray) -> np.ndarray:
    """Vectorized evaluation of a real-valued path."""
    _check_domain(path, ts)
    if isinstance(path, PiecewiseLinearPath):
        return np.interp(ts, path.times, path.values)
    if not path.is_real:
        raise TypeError("evaluate_many needs real payloads")
    k = np.searchsorted(path.breakpoints, ts, side="right") - 1
    return path.values[k]


def _points(path: Path) -> np.ndarray:
    return path.breakpoints if isinstance(path, StepPath) else path.times


def _check_horizons(f: Path, g: Path) -> float:
    if abs(f.horizon - g.horizon) > MASS_TOL:
        raise PathDomainError(f"horizons differ: {f.horizon} vs {g.horizon}")
    return f.horizon


def uniform_distance(f: Path, g: Path, grid: Optional[int] = None) -> float:
    """Sup-norm distance over the common horizon, evaluated exactly.

    Both paths are constant or linear between consecutive points of the merged
    breakpoint/knot set, so the supremum is attained at (one-sided limits at)
    those points. ``grid``, when given, must cover the breakpoints of both paths.
    """
    _check_horizons(f, g)
    if grid is not None and grid < max(len(_points(f)), len(_points(g))):
        raise ValueError("grid is coarser than the breakpoints of the paths")

    merged = np.union1d(_points(f), _points(g))

    if isinstance(f, StepPath) and isinstance(g, StepPath):
        if f.is_real != g.is_real:
            raise TypeError("cannot compare real and mass-partition payloads")
        if f.is_real:
            return float(np.max(np.abs(evaluate_many(f, merged) - evaluate_many(g, merged))))
        kf = np.searchsorted(f.breakpoints, merged, side="right") - 1
        kg = np.searchsorted(g.breakpoints, merged, side="right") - 1
        return max(product_metric(f.values[a], g.values[b]) for a, b in zip(kf, kg))

    if isinstance(f, PiecewiseLinearPath) and isinstance(g, PiecewiseLinearPath):
        return float(np.max(np.abs(evaluate_many(f, merged) - evaluate_many(g, merged))))

    # One step path against one linear path: on [t_k, t_{k+1}) the step value is
    # constant and the linear path is affine, so both interval ends matter.
    step, lin = (f, g) if isinstance(f, StepPath) else (g, f)
    if not step.is_real:
        raise TypeError("cannot compare mass-partition payloads with a real path")
    c = evaluate_many(step, merged)
    at_left = np.abs(c - evaluate_many(lin, merged))
    at_right = np.abs(c[:-1] - evaluate_many(lin, merged[1:]))
    return float(max(at_left.max(), at_right.max() if at_right.size else 0.0))


class J1Bound(FrozenModel):
    """Certified bracket for the Skorohod J1 distance."""

    upper: float
    lower: float
    uniform: float
    aligned: float


def _align_jumps(sf: np.ndarray, hf: np.ndarray, sg: np.ndarray, hg: np.ndarray,
                 horizon: float) -> List[Tuple[int, int]]:
    """Order-preserving matching of jumps minimizing the bottleneck cost.

    Matching i with j costs max(|sf_i - sg_j|, |hf_i - hg_j|); leaving a jump
    unmatched costs its height. Jumps at the horizon match only each other.
    """
    a, b = sf.size, sg.size
    dp = np.full((a + 1, b + 1), np.inf)
    move = np.zeros((a + 1, b + 1), dtype=np.int8)
    dp[0, 0] = 0.0
    for i in range(a + 1):
        for j in range(b + 1):
            if i == 0 and j == 0:
                continue
            best, how = np.inf, 0
            if i > 0 and j > 0 and (sf[i - 1] == horizon) == (sg[j - 1] == horizon):
                c = max(dp[i - 1, j - 1], abs(sf[i - 1] - sg[j - 1]), abs(hf[i - 1] - hg[j - 1]))
                if c < best:
                    best, how = c, 1
            if i > 0:
                c = max(dp[i - 1, j], abs(hf[i - 1]))
                if c < best:
                    best, how = c, 2
            if j > 0:
                c = max(dp[i, j - 1], abs(hg[j - 1]))
                if c < best:
                    best, how = c, 3
            dp[i, j], move[i, j] = best, how

    pairs = []
    i, j = a, b
    while i > 0 or j > 0:
        how = move[i, j]
        if how == 1:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif how == 2:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def _aligned_distance(f: StepPath, g: StepPath, horizon: float) -> float:
    """max(sup|lambda - id|, sup|f - g o lambda|) for the time change induced by the jump alignment."""
    sf, hf = f.jumps()
    sg, hg = g.jumps()
    if sf.size * sg.size > MAX_ALIGNMENT_CELLS:
        logger.debug(f"Jump alignment skipped ({sf.size}x{sg.size} cells)")
        return np.inf

    pairs = _align_jumps(sf, hf, sg, hg, horizon)
    src = [0.0] + [float(sf[i]) for i, _ in pairs if sf[i] < horizon] + [horizon]
    dst = [0.0] + [float(sg[j]) for _, j in pairs if sg[j] < horizon] + [horizon]
    src, dst = np.asarray(src), np.asarray(dst)
    if horizon == 0.0 or np.any(np.diff(src) <= 0) or np.any(np.diff(dst) <= 0):
        return np.inf

    # g o lambda jumps where lambda hits a breakpoint of g: at lambda^-1(breakpoint)
    pulled = np.interp(g.breakpoints, dst, src)
    if np.any(np.diff(pulled) <= 0):
        return np.inf
    g_lambda = StepPath(pulled, g.values, horizon, validate=False)
    displacement = float(np.max(np.abs(src - dst)))
    return max(displacement, uniform_distance(f, g_lambda))


def jump_lower_bound(f: StepPath, g: StepPath) -> float:
    """Lower certificate: endpoints are fixed by every time change, and the
    largest jump is invariant under time changes and 2-Lipschitz in sup norm."""
    T = _check_horizons(f, g)
    ends = max(abs(evaluate(f, 0.0) - evaluate(g, 0.0)), abs(evaluate(f, T) - evaluate(g, T)))
    jf = float(np.max(np.abs(f.jumps()[1]), initial=0.0))
    jg = float(np.max(np.abs(g.jumps()[1]), initial=0.0))
    return max(ends, 0.5 * abs(jf - jg))


def j1_upper_bound(f: StepPath, g: StepPath, horizon: Optional[float] = None) -> J1Bound:
    """Certified upper bound on the J1 distance between two real step paths.

    The result is the least of the identity time change (the uniform distance)
    and the jump-alignment time changes built in both directions, which makes
    it symmetric and never larger than the uniform distance.
    """
    T = _check_horizons(f, g)
    if horizon is not None and abs(horizon - T) > MASS_TOL:
        raise PathDomainError(f"horizon {horizon} does not match the paths ({T})")
    if not (f.is_real and g.is_real):
        raise TypeError("j1_upper_bound needs real payloads")

    uniform = uniform_distance(f, g)
    aligned = min(_aligned_distance(f, g, T), _aligned_distance(g, f, T))
    upper = min(uniform, aligned)
    lower = min(jump_lower_bound(f, g), upper)
    return J1Bound(upper=upper, lower=lower, uniform=uniform,
                   aligned=float(aligned) if np.isfinite(aligned) else float("inf"))


def counterexample_pair(n: int) -> Tuple[PiecewiseLinearPath, Tuple[PiecewiseLinearPath, PiecewiseLinearPath]]:
    """g_n, the distribution function of the uniform law on [1/2 - 1/n, 1/2], and f_n = (g_n, 1 - g_n)."""
    if n < 2:
        raise ValueError(f"counterexample_pair needs n >= 2, got {n}")
    start = 0.5 - 1.0 / n
    knots = [(0.0, 0.0), (start, 0.0), (0.5, 1.0), (1.0, 1.0)]
    if start == 0.0:
        knots = knots[1:]
    g = PiecewiseLinearPath(knots)
    complement = PiecewiseLinearPath([(t, 1.0 - v) for t, v in knots])
    return g, (g, complement)


class MonotoneHypothesis(FrozenModel):
    monotone: bool
    sup_l1_norm: float
    total_variation: float
    bound: float
    holds: bool


def satisfies_monotone_hypothesis(f: Sequence[PiecewiseLinearPath], M: float = 2.0) -> MonotoneHypothesis:
    """Every coordinate is monotone and both the pointwise l1 norm and the summed
    total variation stay within ``M``."""
    monotone = True
    tv = 0.0
    points = np.unique(np.concatenate([c.times for c in f]))
    norm = np.zeros_like(points)
    for coord in f:
        d = np.diff(coord.values)
        monotone &= bool(np.all(d >= 0) or np.all(d <= 0))
        tv += float(np.abs(d).sum())
        norm += np.abs(evaluate_many(coord, points))
    sup_norm = float(norm.max())
    holds = monotone and sup_norm <= M + MASS_TOL and tv <= M + MASS_TOL
    return MonotoneHypothesis(monotone=monotone, sup_l1_norm=sup_norm, total_variation=tv,
                              bound=M, holds=holds)


def separation_table(n_max: int = 64) -> List[Tuple[int, int, float]]:
    """Uniform distances between g_n and g_m for 2 <= n < m <= n_max."""
    paths = {n: counterexample_pair(n)[0] for n in range(2, n_max + 1)}
    return [(n, m, uniform_distance(paths[n], paths[m]))
            for n in range(2, n_max + 1) for m in range(n + 1, n_max + 1)]

"""Aggregate infection curve, unimodality detection, and wave search.

For rank-1 local feedback the network-wide infection burden is the
scalar curve ybar(t) = sum_j f_j(y_j(t)) y_j(t).  When each node's
susceptibility gain u*g_i(u) increases and its transmission load
u*f_j(u) increases concavely, every trajectory's curve either falls
from the start or rises to a single peak and then falls.

detect_unimodality classifies sampled curves with a hysteresis rule so
integrator ripple is not mistaken for a second wave, verify_unimodality
stress-tests the single-peak dichotomy over random initial conditions,
and search_multimodal_ic hunts for initial conditions whose curve shows
repeated waves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .core import EpidemicState, ModelParams
from .errors import UsageError
from .integrate import IntegratorOptions, Trajectory, integrate
from .interaction import InteractionSpec, check_unimodality_hypotheses

__all__ = [
    "Shape",
    "Extremum",
    "AggregateCurve",
    "UnimodalityReport",
    "SearchReport",
    "aggregate_values",
    "aggregate_curve",
    "force_of_infection",
    "detect_unimodality",
    "verify_unimodality",
    "search_multimodal_ic",
    "curve_to_csv",
]

DEFAULT_NOISE_TOL = 1e-6


class Shape(enum.Enum):
    MONOTONE_DECREASING = "MonotoneDecreasing"
    UNIMODAL = "Unimodal"
    MULTIMODAL = "Multimodal"
    MONOTONE_INCREASING_TRUNCATED = "MonotoneIncreasingTruncated"


@dataclass(frozen=True)
class Extremum:
    kind: str  # "max" or "min"
    index: int
    time: float
    value: float

    def as_dict(self) -> dict:
        return {"kind": self.kind, "index": self.index,
                "time": self.time, "value": self.value}


@dataclass(frozen=True, eq=False)
class AggregateCurve:
    times: np.ndarray
    values: np.ndarray
    shape: Shape
    peak_time: float | None
    extrema: tuple[Extremum, ...]

    @property
    def n_maxima(self) -> int:
        return sum(1 for e in self.extrema if e.kind == "max")

    def as_dict(self) -> dict:
        return {
            "shape": self.shape.value,
            "peak_time": self.peak_time,
            "extrema": [e.as_dict() for e in self.extrema],
        }


# ---------------------------------------------------------------------------
# curve evaluation
# ---------------------------------------------------------------------------

def _require_rank1_local(spec: InteractionSpec, what: str) -> None:
    if not spec.is_rank1_local:
        raise UsageError(
            f"{what} needs per-node transmission functions "
            f"(rank-1 local feedback), got a {spec.kind} spec")


def aggregate_values(spec: InteractionSpec, y) -> np.ndarray:
    """ybar = sum_j f_j(y_j) y_j for a batch of infection vectors."""
    _require_rank1_local(spec, "the aggregate infection curve")
    y = np.asarray(y, dtype=float)
    total = np.zeros(y.shape[:-1])
    for j, fj in enumerate(spec.f_funcs):
        total = total + fj(y[..., j]) * y[..., j]
    return total


def force_of_infection(spec: InteractionSpec, x, y) -> np.ndarray:
    """Per-pair infection pressure h_ij = x_i g_i(x_i) f_j(y_j) y_j.

    Row sums recover the incidence term of the flow, so dy/dt equals
    the row sums minus gamma*y.
    """
    _require_rank1_local(spec, "the force of infection")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rows = np.stack([x[..., i] * gi(x[..., i])
                     for i, gi in enumerate(spec.g_funcs)], axis=-1)
    cols = np.stack([fj(y[..., j]) * y[..., j]
                     for j, fj in enumerate(spec.f_funcs)], axis=-1)
    return rows[..., :, None] * cols[..., None, :]


# ---------------------------------------------------------------------------
# shape detection
# ---------------------------------------------------------------------------

def _refine_peak(times: np.ndarray, values: np.ndarray, idx: int) -> float:
    """Vertex of the parabola through the three samples around idx."""
    if idx <= 0 or idx >= len(times) - 1:
        return float(times[idx])
    t0, t1, t2 = times[idx - 1], times[idx], times[idx + 1]
    v0, v1, v2 = values[idx - 1], values[idx], values[idx + 1]
    s1 = (v1 - v0) / (t1 - t0)
    s2 = (v2 - v1) / (t2 - t1)
    c = (s2 - s1) / (t2 - t0)
    if not np.isfinite(c) or c >= 0.0:
        return float(t1)
    t_star = 0.5 * (t0 + t1) - s1 / (2.0 * c)
    return float(min(max(t_star, t0), t2))


def detect_unimodality(times, values, noise_tol: float = DEFAULT_NOISE_TOL
                       ) -> tuple[Shape, float | None, tuple[Extremum, ...]]:
    """Classify a sampled curve as falling, single-peaked, multi-wave,
    or still rising when the record ends.

    Direction changes must move by more than noise_tol times the curve
    maximum before they count (hysteresis); each surviving change is
    reported as an interior extremum.  A single surviving maximum means
    a single peak, whose time is refined by a local quadratic fit.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape:
        raise UsageError(
            f"times and values must be matching vectors, got {times.shape} "
            f"and {values.shape}")
    if len(times) < 3:
        raise UsageError(f"need at least 3 samples, got {len(times)}")
    if not (np.diff(times) > 0).all():
        raise UsageError("times must be strictly increasing")
    if not np.isfinite(values).all():
        raise UsageError("values must be finite")
    if noise_tol < 0:
        raise UsageError(f"noise_tol must be >= 0, got {noise_tol}")

    theta = noise_tol * max(float(values.max()), 0.0)
    direction = 0  # 0 unknown, +1 rising, -1 falling
    hi = 0  # index of the running maximum since the last turn
    lo = 0  # index of the running minimum since the last turn
    extrema: list[Extremum] = []
    for k in range(1, len(values)):
        v = values[k]
        if v > values[hi]:
            hi = k
        if v < values[lo]:
            lo = k
        if direction != 1 and v - values[lo] > theta:
            if direction == -1:
                extrema.append(
                    Extremum("min", lo, float(times[lo]), float(values[lo])))
            direction = 1
            hi = k
        elif direction != -1 and values[hi] - v > theta:
            if direction == 1:
                extrema.append(
                    Extremum("max", hi, float(times[hi]), float(values[hi])))
            direction = -1
            lo = k

    kinds = [e.kind for e in extrema]
    if not kinds:
        if direction == 1:
            return Shape.MONOTONE_INCREASING_TRUNCATED, None, ()
        return Shape.MONOTONE_DECREASING, float(times[0]), ()
    if kinds == ["max"]:
        peak = _refine_peak(times, values, extrema[0].index)
        return Shape.UNIMODAL, peak, tuple(extrema)
    return Shape.MULTIMODAL, None, tuple(extrema)


def aggregate_curve(traj: Trajectory, spec: InteractionSpec,
                    noise_tol: float = DEFAULT_NOISE_TOL) -> AggregateCurve:
    """Evaluate ybar along a trajectory and classify its shape.

    peak_time is the refined interior peak for a single-peaked curve
    and the initial time for a falling one; short records (fewer than
    three samples, e.g. an initially disease-free run) are classified
    by their endpoints alone.
    """
    values = aggregate_values(spec, traj.y)
    times = traj.times
    if len(times) < 3:
        theta = noise_tol * max(float(values.max()), 0.0)
        if len(times) == 2 and values[1] - values[0] > theta:
            return AggregateCurve(times, values,
                                  Shape.MONOTONE_INCREASING_TRUNCATED, None, ())
        return AggregateCurve(times, values, Shape.MONOTONE_DECREASING,
                              float(times[0]), ())
    shape, peak_time, extrema = detect_unimodality(times, values, noise_tol)
    return AggregateCurve(times, values, shape, peak_time, extrema)


# ---------------------------------------------------------------------------
# randomized verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnimodalityReport:
    all_unimodal: bool
    counterexamples: tuple[EpidemicState, ...]
    trials: int
    shape_counts: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "all_unimodal": self.all_unimodal,
            "trials": self.trials,
            "shape_counts": dict(self.shape_counts),
            "counterexamples": [
                {"x": s.x.tolist(), "y": s.y.tolist()}
                for s in self.counterexamples],
        }


def _classified_curve(params: ModelParams, state: EpidemicState,
                      noise_tol: float, options: IntegratorOptions
                      ) -> AggregateCurve:
    """Integrate, classify, and re-check any multi-wave verdict once at
    tenfold tighter tolerance before accepting it."""
    traj = integrate(params, state, options)
    curve = aggregate_curve(traj, params.interaction, noise_tol)
    if curve.shape is Shape.MULTIMODAL:
        tight = replace(options, rel_tol=options.rel_tol / 10.0,
                        abs_tol=options.abs_tol / 10.0)
        traj = integrate(params, state, tight)
        curve = aggregate_curve(traj, params.interaction, noise_tol)
    return curve


def _random_state(rng: np.random.Generator, n: int) -> EpidemicState:
    while True:
        x = rng.uniform(0.0, 1.0, size=n)
        y = rng.uniform(0.0, 1.0, size=n) * (1.0 - x)
        if x.any() and y.any():
            return EpidemicState(x, y)


def verify_unimodality(spec: InteractionSpec, gamma: float, trials: int,
                       seed: int, noise_tol: float = DEFAULT_NOISE_TOL,
                       options: IntegratorOptions | None = None
                       ) -> UnimodalityReport:
    """Integrate random feasible initial conditions and check that every
    aggregate curve is falling or single-peaked.

    Requires the monotone-gain and concave-transmission hypotheses to
    hold for the spec; initial conditions have nonzero susceptible and
    infected mass, and draws are deterministic for a given seed.
    """
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    hyp = check_unimodality_hypotheses(spec)
    if not hyp.holds:
        f = hyp.failures[0]
        raise UsageError(
            f"unimodality hypotheses fail for this spec: {f.hypothesis} "
            f"at node {f.node}, u={f.u:.6g}, value={f.value:.6g}")
    params = ModelParams(gamma=gamma, interaction=spec)
    options = options or IntegratorOptions()
    counts: dict[str, int] = {s.value: 0 for s in Shape}
    bad: list[EpidemicState] = []
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        state = _random_state(rng, spec.n)
        curve = _classified_curve(params, state, noise_tol, options)
        counts[curve.shape.value] += 1
        if curve.shape not in (Shape.MONOTONE_DECREASING, Shape.UNIMODAL):
            bad.append(state)
    return UnimodalityReport(
        all_unimodal=not bad,
        counterexamples=tuple(bad),
        trials=trials,
        shape_counts={k: v for k, v in counts.items() if v},
    )


# ---------------------------------------------------------------------------
# multimodality search
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SearchReport:
    budget: int
    best_state: EpidemicState
    curve: AggregateCurve
    n_maxima: int

    def as_dict(self) -> dict:
        return {
            "budget": self.budget,
            "n_maxima": self.n_maxima,
            "best_ic": {"x": self.best_state.x.tolist(),
                        "y": self.best_state.y.tolist()},
            **self.curve.as_dict(),
        }


def _sample_mixture(rng: np.random.Generator, budget: int, n: int
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Candidate initial conditions: uniform draws, active/dormant node
    splits with tiny seeded infections, and power-skewed infection sizes."""
    xs = np.empty((budget, n))
    ys = np.empty((budget, n))
    thirds = np.array_split(np.arange(budget), 3)

    idx = thirds[0]
    xs[idx] = rng.uniform(0.0, 1.0, size=(len(idx), n))
    ys[idx] = rng.uniform(0.0, 1.0, size=(len(idx), n)) * (1.0 - xs[idx])

    idx = thirds[1]
    active = rng.uniform(size=(len(idx), n)) < rng.uniform(
        1.0 / n, 0.6, size=(len(idx), 1))
    x_act = rng.uniform(0.1, 0.7, size=(len(idx), n))
    x_dor = rng.uniform(0.8, 1.0, size=(len(idx), n))
    xs[idx] = np.where(active, x_act, x_dor)
    y_act = rng.uniform(0.3, 1.0, size=(len(idx), n))
    y_dor = 10.0 ** rng.uniform(-5.0, -1.0, size=(len(idx), n))
    ys[idx] = np.where(active, y_act, y_dor) * (1.0 - xs[idx])

    idx = thirds[2]
    xs[idx] = rng.uniform(0.0, 1.0, size=(len(idx), n))
    power = rng.uniform(1.0, 6.0, size=(len(idx), 1))
    ys[idx] = (1.0 - xs[idx]) * rng.uniform(size=(len(idx), n)) ** power

    return xs, ys


def _screen_curves(spec: InteractionSpec, gamma: float, xs: np.ndarray,
                   ys: np.ndarray, t_horizon: float, n_steps: int,
                   thin: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step batched integration recording ybar every `thin` steps.

    A fast screening pass only; winning candidates are re-integrated
    with the adaptive integrator before anything is reported.
    """
    x = np.clip(xs, 0.0, 1.0).copy()
    y = np.clip(ys, 0.0, None).copy()
    np.minimum(y, 1.0 - x, out=y)
    h = t_horizon / n_steps
    f_funcs = spec.f_funcs

    def ybar(yv: np.ndarray) -> np.ndarray:
        total = np.zeros(yv.shape[0])
        for j, fj in enumerate(f_funcs):
            total += fj(yv[:, j]) * yv[:, j]
        return total

    def rhs(xv: np.ndarray, yv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xv = np.clip(xv, 0.0, 1.0)
        yv = np.clip(yv, 0.0, 1.0)
        a = spec.evaluate(xv, yv, check=False)
        v = xv * np.einsum("bij,bj->bi", a, yv)
        return -v, v - gamma * yv

    times = [0.0]
    samples = [ybar(y)]
    for step in range(1, n_steps + 1):
        k1x, k1y = rhs(x, y)
        k2x, k2y = rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x, k3y = rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x, k4y = rhs(x + h * k3x, y + h * k3y)
        x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        np.clip(x, 0.0, 1.0, out=x)
        np.clip(y, 0.0, None, out=y)
        np.minimum(y, 1.0 - x, out=y)
        if step % thin == 0:
            times.append(step * h)
            samples.append(ybar(y))
            if y.max() < 1e-9:
                break
    return np.array(times), np.stack(samples, axis=1)


def _batched_reversal_counts(values: np.ndarray, noise_tol: float
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Counts of hysteresis-surviving maxima and minima per curve row,
    mirroring detect_unimodality."""
    B, T = values.shape
    theta = noise_tol * np.clip(values.max(axis=1), 0.0, None)
    direction = np.zeros(B, dtype=np.int8)
    hi = values[:, 0].copy()
    lo = values[:, 0].copy()
    n_max = np.zeros(B, dtype=np.int32)
    n_min = np.zeros(B, dtype=np.int32)
    one = np.int8(1)
    minus = np.int8(-1)
    for k in range(1, T):
        v = values[:, k]
        np.maximum(hi, v, out=hi)
        np.minimum(lo, v, out=lo)
        rise = (direction != one) & (v - lo > theta)
        fall = (direction != minus) & (hi - v > theta) & ~rise
        n_min += rise & (direction == minus)
        n_max += fall & (direction == one)
        hi = np.where(rise, v, hi)
        lo = np.where(fall, v, lo)
        direction = np.where(rise, one, np.where(fall, minus, direction))
    return n_max, n_min


def search_multimodal_ic(spec: InteractionSpec, gamma: float, budget: int,
                         seed: int, noise_tol: float = DEFAULT_NOISE_TOL,
                         top_k: int = 8) -> SearchReport:
    """Randomized hunt for an initial condition whose aggregate curve
    has the most noise-surviving local maxima.

    Draws `budget` candidates from a mixture of uniform and skewed
    samplers, screens them with a batched fixed-step pass, then confirms
    the leaders with the adaptive integrator (re-checking any multi-wave
    verdict at tighter tolerance).  Deterministic for a given seed;
    returns the best candidate found even when no curve has more than
    one maximum.
    """
    _require_rank1_local(spec, "multimodality search")
    if budget < 1:
        raise UsageError(f"budget must be >= 1, got {budget}")
    if top_k < 1:
        raise UsageError(f"top_k must be >= 1, got {top_k}")
    params = ModelParams(gamma=gamma, interaction=spec)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    xs, ys = _sample_mixture(rng, budget, spec.n)

    _, curves = _screen_curves(spec, gamma, xs, ys,
                               t_horizon=80.0 / gamma,
                               n_steps=2400, thin=3)
    n_max, _ = _batched_reversal_counts(curves, noise_tol)
    peaks = curves.max(axis=1)
    order = np.lexsort((-peaks, -n_max))

    options = IntegratorOptions()
    best: tuple[int, float, EpidemicState, AggregateCurve] | None = None
    for idx in order[:top_k]:
        state = EpidemicState(xs[idx], np.minimum(ys[idx], 1.0 - xs[idx]))
        curve = _classified_curve(params, state, noise_tol, options)
        key = (curve.n_maxima, float(curve.values.max()))
        if best is None or key > (best[0], best[1]):
            best = (key[0], key[1], state, curve)
    assert best is not None
    return SearchReport(budget=budget, best_state=best[2],
                        curve=best[3], n_maxima=best[0])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def curve_to_csv(curve: AggregateCurve) -> str:
    lines = ["t,ybar"]
    for t, v in zip(curve.times, curve.values):
        lines.append(f"{t:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"

"""Adaptive integration of the epidemic flow with feasibility guards.

An explicit embedded Runge-Kutta 5(4) pair drives the state forward
with per-component error control.  After every accepted step, tiny
negative components (inside (-clamp_eps, 0)) are clamped to zero and
the state is re-checked against the feasible set; leaving it beyond
clamp_eps is an integration failure.  The run terminates when every
infected fraction drops below y_converged_threshold (converged to a
disease-free equilibrium) or when t_max is reached.

Output sampling uses the pair's fourth-order dense interpolant so that
consecutive samples are never more than max_step apart in time even
when the accepted steps grow large.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from .core import EpidemicState, ModelParams, vector_field
from .errors import (
    ConfigurationError,
    EvaluationError,
    IntegrationFailureError,
    StiffnessError,
    UsageError,
)
from .interaction import InteractionSpec

__all__ = [
    "IntegratorOptions",
    "TerminalStatus",
    "Trajectory",
    "integrate",
    "limit_equilibrium",
    "trajectory_to_csv",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# dense-output weights for the quartic continuous extension
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1.0
    clamp_eps: float = 1e-12
    y_converged_threshold: float = 1e-10
    t_max: float | None = None  # default 1e4 / gamma, resolved at run time

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "clamp_eps",
                     "y_converged_threshold"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.rel_tol > 1e-3 or self.abs_tol > 1e-3:
            raise ConfigurationError(
                "tolerances above 1e-3 give unreliable trajectories: "
                f"rel_tol={self.rel_tol}, abs_tol={self.abs_tol}")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")

    def resolved_t_max(self, gamma: float) -> float:
        return self.t_max if self.t_max is not None else 1e4 / gamma


class TerminalStatus(enum.Enum):
    CONVERGED = "converged"
    REACHED_T_MAX = "reached_t_max"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution; x and y are (T, n) arrays aligned with times."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    terminal: TerminalStatus
    n_accepted: int
    n_rejected: int
    n_evaluations: int

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def state(self, k: int) -> EpidemicState:
        return EpidemicState(self.x[k], self.y[k])

    @property
    def states(self) -> tuple[EpidemicState, ...]:
        return tuple(self.state(k) for k in range(len(self)))

    @property
    def final_state(self) -> EpidemicState:
        return self.state(len(self) - 1)


def _clamp(u: np.ndarray, n: int, clamp_eps: float, t: float) -> np.ndarray:
    """Zero tiny negatives and verify feasibility within clamp_eps."""
    u = np.where((u < 0.0) & (u > -clamp_eps), 0.0, u)
    x, y = u[:n], u[n:]
    if u.min() < 0.0 or u.max() > 1.0 + clamp_eps or (x + y).max() > 1.0 + clamp_eps:
        raise IntegrationFailureError(
            f"state left the feasible set beyond clamp_eps at t={t:.6g}: "
            f"x={x.tolist()}, y={y.tolist()}")
    return u


def _initial_step(f, t0, u0, f0, scale, t_span) -> float:
    """Standard starting-step heuristic from the norms of u0, f0 and one
    Euler probe."""
    d0 = np.sqrt(np.mean((u0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d1 < 1e-5 or d0 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * t_span)
    try:
        f1 = f(t0 + h0, u0 + h0 * f0)
    except EvaluationError:
        return min(h0, t_span)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_span)


def integrate(params: ModelParams, initial: EpidemicState,
              options: IntegratorOptions | None = None) -> Trajectory:
    """Run the flow from an initial state until convergence or t_max."""
    if options is None:
        options = IntegratorOptions()
    if initial.n != params.n:
        raise ConfigurationError(
            f"initial state has n={initial.n} but the model has n={params.n}")
    n = params.n
    gamma = params.gamma
    t_max = options.resolved_t_max(gamma)
    thresh = options.y_converged_threshold

    n_eval = 0

    def f(t: float, u: np.ndarray) -> np.ndarray:
        nonlocal n_eval
        n_eval += 1
        dx, dy = vector_field(params, u[:n], u[n:], check=False)
        return np.concatenate([dx, dy])

    u = np.concatenate([initial.x, initial.y])
    times = [0.0]
    samples = [u.copy()]

    if initial.y.size == 0 or initial.y.max() < thresh:
        return Trajectory(
            times=np.array(times), x=np.array([initial.x]), y=np.array([initial.y]),
            terminal=TerminalStatus.CONVERGED,
            n_accepted=0, n_rejected=0, n_evaluations=0)

    t = 0.0
    k = np.empty((7, 2 * n))
    k[0] = f(t, u)
    scale0 = options.abs_tol + options.rel_tol * np.abs(u)
    h = _initial_step(f, t, u, k[0], scale0, t_max)
    n_accepted = 0
    n_rejected = 0
    terminal = None

    while True:
        h = min(h, t_max - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StiffnessError(
                f"step size underflowed at t={t:.6g} (h={h:.3g})",
                t=t, state=(u[:n].copy(), u[n:].copy()))

        try:
            for s in range(1, 7):
                k[s] = f(t + _C[s] * h, u + h * (_A[s] @ k[:s]))
        except EvaluationError:
            # a trial stage wandered outside the interaction's domain;
            # treat like an oversized step
            n_rejected += 1
            h *= 0.2
            continue
        u_new = u + h * (_B @ k)
        err = h * (_E @ k)
        scale = options.abs_tol + options.rel_tol * np.maximum(np.abs(u), np.abs(u_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        if not np.isfinite(err_norm) or err_norm > 1.0:
            n_rejected += 1
            h *= 0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            continue

        # accepted by the error controller; feasibility and positivity
        # gate acceptance too.  A tolerance-sized excursion below zero
        # (possible when some y_i sits near the convergence threshold),
        # or an infected component driven from positive mass to zero,
        # is cured by a shorter, more accurate step, not a failure: the
        # exact flow keeps both properties, and the local error shrinks
        # as h^5 while the true value does not.
        pos = u[n:] > 0.0

        def _gate(candidate: np.ndarray, t_at: float) -> np.ndarray:
            out = _clamp(candidate, n, options.clamp_eps, t_at)
            if np.any(pos & (out[n:] <= 0.0)):
                raise IntegrationFailureError(
                    f"an infected component crossed zero from positive "
                    f"mass at t={t_at:.6g}")
            return out

        try:
            clamped = _gate(u_new, t + h)
            interior: list[tuple[float, np.ndarray]] = []
            if h > options.max_step:
                # subdivide through the quartic dense interpolant
                ydiff = u_new - u
                bspl = h * k[0] - ydiff
                r4 = ydiff - h * k[6] - bspl
                r5 = h * (_D @ k)
                m = int(np.ceil(h / options.max_step))
                for idx in range(1, m):
                    theta = idx / m
                    ui = u + theta * (ydiff + (1.0 - theta)
                                      * (bspl + theta * (r4 + (1.0 - theta) * r5)))
                    interior.append((t + theta * h, _gate(ui, t + theta * h)))
        except IntegrationFailureError:
            if h < 1e-13 * max(1.0, abs(t)):
                raise  # unattainable at every step size; report it
            n_rejected += 1
            h *= 0.5
            continue
        for ti, ui in interior:
            times.append(ti)
            samples.append(ui)

        t += h
        if np.array_equal(clamped, u_new):
            u = u_new
            k[0] = k[6]  # first-same-as-last
        else:
            u = clamped
            k[0] = f(t, u)
        times.append(t)
        samples.append(u.copy())
        n_accepted += 1

        if u[n:].max() < thresh:
            terminal = TerminalStatus.CONVERGED
            break
        if t >= t_max:
            terminal = TerminalStatus.REACHED_T_MAX
            break

        h *= min(10.0, max(0.2, 0.9 * err_norm ** -0.2 if err_norm > 0 else 10.0))

    arr = np.array(samples)
    return Trajectory(
        times=np.array(times),
        x=arr[:, :n],
        y=arr[:, n:],
        terminal=terminal,
        n_accepted=n_accepted,
        n_rejected=n_rejected,
        n_evaluations=n_eval,
    )


def limit_equilibrium(trajectory: Trajectory,
                      initial: EpidemicState | None = None) -> EpidemicState:
    """The disease-free equilibrium a converged run settled into.

    Guarantees 0 <= x* <= x(0) componentwise and y* = 0 exactly.  The
    initial state defaults to the trajectory's first sample.
    """
    if trajectory.terminal is not TerminalStatus.CONVERGED:
        raise UsageError(
            "limit equilibrium is defined only for converged runs; this one "
            f"ended with {trajectory.terminal.value!r}")
    x0 = trajectory.x[0] if initial is None else initial.x
    x_star = np.clip(trajectory.x[-1], 0.0, x0)
    return EpidemicState(x_star, np.zeros_like(x_star))


def _fmt(value: float) -> str:
    return format(value, ".17g")


def trajectory_to_csv(trajectory: Trajectory,
                      interaction: InteractionSpec | None = None) -> str:
    """CSV rendering: t, x_1..x_n, y_1..y_n, and a trailing ybar column
    when a rank-one local interaction is supplied."""
    n = trajectory.n
    with_ybar = interaction is not None and interaction.is_rank1_local
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)]
    ybar = None
    if with_ybar:
        header.append("ybar")
        fv = np.stack(
            [fj(trajectory.y[:, j]) for j, fj in enumerate(interaction.f_funcs)],
            axis=-1)
        ybar = np.sum(fv * trajectory.y, axis=1)
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row_idx in range(len(trajectory)):
        cells = [_fmt(trajectory.times[row_idx])]
        cells += [_fmt(v) for v in trajectory.x[row_idx]]
        cells += [_fmt(v) for v in trajectory.y[row_idx]]
        if with_ybar:
            cells.append(_fmt(ybar[row_idx]))
        out.write(",".join(cells) + "\n")
    return out.getvalue()

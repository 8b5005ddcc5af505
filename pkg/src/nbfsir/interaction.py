"""State-dependent interaction matrices and their structural checks.

An interaction spec describes how the n-by-n contact matrix A(x, y)
responds to the epidemic state.  Five families are supported:

* ``Constant``          -- a fixed nonnegative matrix.
* ``Rank1Local``        -- A_ij = g_i(x_i) * f_j(y_j), node-local feedback.
* ``ScalarScaled``      -- A_ij = num_i(x_i) / denom(y), one scalar
                           denominator expression over the full y vector.
* ``OuterProduct``      -- A = c * (1 - x) y^T; rank-one local with
                           g_i(u) = c*(1-u) and f_j(v) = v.
* ``ExpressionMatrix``  -- every entry its own expression in x and y.

Node functions (the g's and f's) come in three forms: affine
``p + q*u``, reciprocal-affine ``p / (1 + alpha*u)``, and a parsed
expression over the scalar ``u``.

All evaluation is batched: state arrays of shape (..., n) produce
matrices of shape (..., n, n).
"""

from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as _expr
from .errors import (
    ConfigurationError,
    EvaluationError,
    ModelValidityError,
    UsageError,
)

__all__ = [
    "FunctionSpec",
    "Affine",
    "ReciprocalAffine",
    "ExpressionFunction",
    "function_from_config",
    "InteractionSpec",
    "Constant",
    "Rank1Local",
    "ScalarScaled",
    "OuterProduct",
    "ExpressionMatrix",
    "interaction_from_config",
    "evaluate_matrix",
    "check_monotonicity_conditions",
    "MonotonicityReport",
    "MonotonicityViolation",
    "check_unimodality_hypotheses",
    "HypothesesReport",
    "HypothesisFailure",
]

# entries this far below zero are treated as genuinely negative; smaller
# excursions are roundoff from states that sit on the feasible boundary
_NONNEG_TOL = 1e-9


# ---------------------------------------------------------------------------
# node functions
# ---------------------------------------------------------------------------

class FunctionSpec(abc.ABC):
    """A scalar function of one state component, vectorized over arrays."""

    @abc.abstractmethod
    def __call__(self, u):
        ...

    @abc.abstractmethod
    def to_config(self):
        ...


@dataclass(frozen=True)
class Affine(FunctionSpec):
    """p + q*u."""

    p: float
    q: float

    def __call__(self, u):
        return self.p + self.q * np.asarray(u, dtype=float)

    def to_config(self):
        return {"form": "affine", "p": self.p, "q": self.q}


@dataclass(frozen=True)
class ReciprocalAffine(FunctionSpec):
    """p / (1 + alpha*u); requires alpha > -1 so the denominator stays
    positive on [0, 1]."""

    p: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > -1.0:
            raise ConfigurationError(
                f"reciprocal-affine form needs alpha > -1, got {self.alpha}"
            )

    def __call__(self, u):
        return self.p / (1.0 + self.alpha * np.asarray(u, dtype=float))

    def to_config(self):
        return {"form": "reciprocal_affine", "p": self.p, "alpha": self.alpha}


class ExpressionFunction(FunctionSpec):
    """A parsed scalar expression over the variable u."""

    def __init__(self, source: str):
        self.node = _expr.parse_scalar(source)
        self.source = _expr.pretty(self.node)

    def __call__(self, u):
        return _expr.evaluate_scalar(self.node, u)

    def to_config(self):
        return self.source

    def __eq__(self, other):
        return isinstance(other, ExpressionFunction) and self.node == other.node

    def __hash__(self):
        return hash(self.node)

    def __repr__(self):
        return f"ExpressionFunction({self.source!r})"


def function_from_config(obj) -> FunctionSpec:
    """Build a node function from its config form (string or tagged dict)."""
    if isinstance(obj, str):
        return ExpressionFunction(obj)
    if isinstance(obj, dict):
        known = {"affine": ({"p", "q"}, lambda d: Affine(float(d["p"]), float(d["q"]))),
                 "reciprocal_affine": ({"p", "alpha"},
                                       lambda d: ReciprocalAffine(float(d["p"]), float(d["alpha"])))}
        form = obj.get("form")
        if form not in known:
            raise ConfigurationError(f"unknown function form {form!r}")
        fields, build = known[form]
        extra = set(obj) - fields - {"form"}
        if extra:
            raise ConfigurationError(
                f"unknown fields in function spec: {sorted(extra)}")
        missing = fields - set(obj)
        if missing:
            raise ConfigurationError(
                f"missing fields in function spec: {sorted(missing)}")
        return build(obj)
    raise ConfigurationError(
        f"function spec must be a string or a tagged object, got {type(obj).__name__}")


# ---------------------------------------------------------------------------
# interaction specs
# ---------------------------------------------------------------------------

def _check_nonnegative(a: np.ndarray, context: str):
    amin = a.min()
    if amin < -_NONNEG_TOL:
        idx = np.unravel_index(int(np.argmin(a)), a.shape)
        i, j = idx[-2], idx[-1]
        raise ModelValidityError(
            f"negative interaction entry A[{i + 1},{j + 1}] = {float(amin)} in {context}"
        )


class InteractionSpec(abc.ABC):
    """Common protocol for the interaction matrix families."""

    n: int
    kind: str

    @abc.abstractmethod
    def _evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...

    def evaluate(self, x, y, *, check: bool = True) -> np.ndarray:
        """A(x, y) for state arrays of shape (..., n) -> (..., n, n)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.shape[-1] != self.n:
            raise ConfigurationError(
                f"state shape mismatch: x {x.shape}, y {y.shape}, n={self.n}")
        a = self._evaluate(x, y)
        if check:
            _check_nonnegative(a, f"{self.kind} spec")
        return a

    @property
    def is_rank1_local(self) -> bool:
        return False

    @property
    def g_funcs(self) -> tuple[FunctionSpec, ...]:
        raise UsageError(f"{self.kind} spec has no per-node g functions")

    @property
    def f_funcs(self) -> tuple[FunctionSpec, ...]:
        raise UsageError(f"{self.kind} spec has no per-node f functions")

    @abc.abstractmethod
    def to_config(self) -> dict:
        ...

    def validate(self, samples: int = 8192) -> None:
        """Check nonnegativity over quasi-random feasible states plus the
        corners of the feasible set; raises ModelValidityError with a
        witness state on failure."""
        from scipy.stats import qmc

        m = max(2, int(np.ceil(np.log2(samples))))
        sob = qmc.Sobol(d=2 * self.n, scramble=False)
        pts = sob.random_base2(m)
        xs = pts[:, : self.n]
        ys = pts[:, self.n:] * (1.0 - xs)
        corners = np.array(
            list(itertools.product((0.0, 1.0), repeat=2 * self.n)), dtype=float
        )
        cx = corners[:, : self.n]
        cy = np.minimum(corners[:, self.n:], 1.0 - cx)
        xs = np.vstack([xs, cx])
        ys = np.vstack([ys, cy])
        a = self.evaluate(xs, ys, check=False)
        flat = a.reshape(len(xs), -1)
        mins = flat.min(axis=1)
        worst = int(np.argmin(mins))
        if mins[worst] < -_NONNEG_TOL:
            i, j = divmod(int(np.argmin(flat[worst])), self.n)
            raise ModelValidityError(
                f"interaction entry A[{i + 1},{j + 1}] = {mins[worst]:.6g} is "
                f"negative at x={xs[worst].tolist()}, y={ys[worst].tolist()}"
            )


@dataclass(frozen=True)
class Constant(InteractionSpec):
    """A fixed matrix; the classic network SIR with no feedback."""

    matrix: np.ndarray
    kind: str = field(default="constant", init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"constant matrix must be square, got {m.shape}")
        if m.min() < 0:
            raise ModelValidityError(
                f"constant interaction matrix has a negative entry ({m.min()})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def _evaluate(self, x, y):
        return np.broadcast_to(self.matrix, x.shape[:-1] + (self.n, self.n)).copy()

    def to_config(self):
        return {"kind": "constant", "matrix": self.matrix.tolist()}

    def __eq__(self, other):
        return isinstance(other, Constant) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class Rank1Local(InteractionSpec):
    """A_ij = g_i(x_i) * f_j(y_j): susceptibility times infectivity,
    each responding only to its own node."""

    g: tuple[FunctionSpec, ...]
    f: tuple[FunctionSpec, ...]
    kind: str = field(default="rank1_local", init=False)

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "f", tuple(self.f))
        if len(self.g) != len(self.f) or not self.g:
            raise ConfigurationError(
                f"rank-1 spec needs matching g/f lists, got {len(self.g)}/{len(self.f)}")

    @property
    def n(self) -> int:
        return len(self.g)

    @property
    def is_rank1_local(self) -> bool:
        return True

    @property
    def g_funcs(self):
        return self.g

    @property
    def f_funcs(self):
        return self.f

    def _evaluate(self, x, y):
        gv = np.stack([gi(x[..., i]) for i, gi in enumerate(self.g)], axis=-1)
        fv = np.stack([fj(y[..., j]) for j, fj in enumerate(self.f)], axis=-1)
        return gv[..., :, None] * fv[..., None, :]

    def to_config(self):
        return {
            "kind": "rank1_local",
            "g": [gi.to_config() for gi in self.g],
            "f": [fj.to_config() for fj in self.f],
        }


@dataclass(frozen=True)
class ScalarScaled(InteractionSpec):
    """A_ij = num_i(x_i) / denom(y): per-row numerators divided by one
    scalar expression of the full infected vector."""

    numerators: tuple[FunctionSpec, ...]
    denominator: "_expr.Node"
    kind: str = field(default="scalar_scaled", init=False)

    def __post_init__(self):
        object.__setattr__(self, "numerators", tuple(self.numerators))
        node = self.denominator
        if isinstance(node, str):
            node = _expr.parse_expression(node, len(self.numerators))
            object.__setattr__(self, "denominator", node)
        bad = [v for v in _expr.variables(node) if v[0] != "y"]
        if bad:
            raise ConfigurationError(
                f"scalar denominator may reference only y variables, got {sorted(bad)}")
        out_of_range = [v for v in _expr.variables(node) if v[1] > len(self.numerators)]
        if out_of_range:
            raise ConfigurationError(
                f"denominator references {sorted(out_of_range)} beyond n={len(self.numerators)}")

    @property
    def n(self) -> int:
        return len(self.numerators)

    def _evaluate(self, x, y):
        num = np.stack([ni(x[..., i]) for i, ni in enumerate(self.numerators)], axis=-1)
        den = _expr.evaluate(self.denominator, x, y)
        if np.any(den == 0.0):
            raise EvaluationError("scalar denominator evaluated to zero")
        out = num[..., :, None] / np.asarray(den)[..., None, None]
        return np.broadcast_to(out, x.shape[:-1] + (self.n, self.n)).copy()

    def to_config(self):
        return {
            "kind": "scalar_scaled",
            "numerator": [ni.to_config() for ni in self.numerators],
            "denominator": _expr.pretty(self.denominator),
        }


@dataclass(frozen=True)
class OuterProduct(InteractionSpec):
    """A = scale * (1 - x) y^T: contact effort falls with depletion of
    the susceptible pool and rises with local prevalence."""

    scale: float
    size: int
    kind: str = field(default="outer_product", init=False)

    def __post_init__(self):
        if self.scale < 0:
            raise ModelValidityError(f"outer-product scale must be >= 0, got {self.scale}")
        if self.size < 1:
            raise ConfigurationError(f"outer-product size must be >= 1, got {self.size}")

    @property
    def n(self) -> int:
        return self.size

    @property
    def is_rank1_local(self) -> bool:
        # A_ij = [scale*(1 - x_i)] * y_j factors into node-local terms
        return True

    @property
    def g_funcs(self):
        return tuple(Affine(self.scale, -self.scale) for _ in range(self.size))

    @property
    def f_funcs(self):
        return tuple(Affine(0.0, 1.0) for _ in range(self.size))

    def _evaluate(self, x, y):
        return self.scale * (1.0 - x)[..., :, None] * y[..., None, :]

    def to_config(self):
        return {"kind": "outer_product", "scale": self.scale, "n": self.size}


class ExpressionMatrix(InteractionSpec):
    """Every entry its own expression over x1..xn, y1..yn."""

    kind = "expression_matrix"

    def __init__(self, entries: Sequence[Sequence]):
        rows = list(entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ConfigurationError("expression matrix must be square and nonempty")
        self._n = n
        parsed = []
        for row in rows:
            parsed.append(tuple(
                e if not isinstance(e, str) else _expr.parse_expression(e, n)
                for e in row
            ))
        self.entries = tuple(parsed)

    @property
    def n(self) -> int:
        return self._n

    def _evaluate(self, x, y):
        out = np.empty(x.shape[:-1] + (self._n, self._n), dtype=float)
        for i, row in enumerate(self.entries):
            for j, node in enumerate(row):
                try:
                    out[..., i, j] = _expr.evaluate(node, x, y)
                except EvaluationError as exc:
                    raise EvaluationError(
                        f"entry A[{i + 1},{j + 1}]: {exc}") from exc
        return out

    def to_config(self):
        return {
            "kind": "expression_matrix",
            "entries": [[_expr.pretty(e) for e in row] for row in self.entries],
        }

    def __eq__(self, other):
        return isinstance(other, ExpressionMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"ExpressionMatrix(n={self._n})"


_KIND_FIELDS = {
    "constant": {"matrix"},
    "rank1_local": {"g", "f", "n"},
    "scalar_scaled": {"numerator", "denominator", "n"},
    "outer_product": {"scale", "n"},
    "expression_matrix": {"entries"},
}


def _broadcast_functions(obj, n: int, what: str) -> list[FunctionSpec]:
    if isinstance(obj, list):
        if len(obj) != n:
            raise ConfigurationError(
                f"{what} list has length {len(obj)}, expected n={n}")
        return [function_from_config(o) for o in obj]
    return [function_from_config(obj)] * n


def interaction_from_config(obj: dict, n: int | None = None) -> InteractionSpec:
    """Build an interaction spec from its tagged config object."""
    if not isinstance(obj, dict):
        raise ConfigurationError("interaction must be a tagged object")
    kind = obj.get("kind")
    if kind not in _KIND_FIELDS:
        raise ConfigurationError(
            f"unknown interaction kind {kind!r}; expected one of {sorted(_KIND_FIELDS)}")
    extra = set(obj) - _KIND_FIELDS[kind] - {"kind"}
    if extra:
        raise ConfigurationError(f"unknown fields in interaction spec: {sorted(extra)}")

    def need_n() -> int:
        local = obj.get("n", n)
        if local is None:
            raise ConfigurationError(f"{kind} interaction needs 'n'")
        return int(local)

    if kind == "constant":
        if "matrix" not in obj:
            raise ConfigurationError("constant interaction needs 'matrix'")
        spec = Constant(np.asarray(obj["matrix"], dtype=float))
    elif kind == "rank1_local":
        if "g" not in obj or "f" not in obj:
            raise ConfigurationError("rank1_local interaction needs 'g' and 'f'")
        size = need_n() if not isinstance(obj["g"], list) else len(obj["g"])
        spec = Rank1Local(
            tuple(_broadcast_functions(obj["g"], size, "g")),
            tuple(_broadcast_functions(obj["f"], size, "f")),
        )
    elif kind == "scalar_scaled":
        if "numerator" not in obj or "denominator" not in obj:
            raise ConfigurationError(
                "scalar_scaled interaction needs 'numerator' and 'denominator'")
        size = need_n() if not isinstance(obj["numerator"], list) else len(obj["numerator"])
        spec = ScalarScaled(
            tuple(_broadcast_functions(obj["numerator"], size, "numerator")),
            _expr.parse_expression(obj["denominator"], size),
        )
    elif kind == "outer_product":
        if "scale" not in obj:
            raise ConfigurationError("outer_product interaction needs 'scale'")
        spec = OuterProduct(float(obj["scale"]), need_n())
    else:
        if "entries" not in obj:
            raise ConfigurationError("expression_matrix interaction needs 'entries'")
        spec = ExpressionMatrix(obj["entries"])

    if n is not None and spec.n != n:
        raise ConfigurationError(
            f"interaction size {spec.n} does not match model n={n}")
    return spec


def evaluate_matrix(spec: InteractionSpec, state, *, check: bool = True) -> np.ndarray:
    """A(x, y) at one state; errors identify the offending entry."""
    return spec.evaluate(state.x, state.y, check=check)


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityViolation:
    condition: str  # "self_term" or "cross_derivative"
    i: int          # row (0-based)
    j: int          # column (0-based)
    k: int          # differentiation axis (0-based)
    x: tuple
    value: float


@dataclass(frozen=True)
class MonotonicityReport:
    holds: bool
    violations: tuple[MonotonicityViolation, ...]
    n_points: int
    tol: float


def _monotonicity_grid(n: int, resolution: int) -> np.ndarray:
    # keep the total point count near resolution**2 as n grows
    if n <= 2:
        per_axis = resolution
    else:
        per_axis = max(2, int(round(resolution ** (2.0 / n))))
    axes = [np.linspace(0.0, 1.0, per_axis)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def check_monotonicity_conditions(
    spec: InteractionSpec,
    grid_resolution: int = 101,
    fd_step: float = 1e-6,
    tol: float = 1e-7,
    max_violations: int = 100,
) -> MonotonicityReport:
    """Test the two sufficient conditions for threshold monotonicity at
    the disease-free slice y = 0:

    * self term:       A_ij + x_i * dA_ij/dx_i >= -tol
    * cross derivative: dA_ij/dx_k >= -tol for every k != i

    Derivatives are central differences with the stencil clipped to
    [0, 1] (one-sided at the edges).
    """
    if grid_resolution < 2:
        raise UsageError(f"grid_resolution must be >= 2, got {grid_resolution}")
    if not 0 < fd_step <= 1e-3:
        raise UsageError(f"fd_step must be in (0, 1e-3], got {fd_step}")
    n = spec.n
    X = _monotonicity_grid(n, grid_resolution)
    Y = np.zeros_like(X)
    A = spec.evaluate(X, Y, check=False)
    violations: list[MonotonicityViolation] = []

    for k in range(n):
        xp = X.copy()
        xm = X.copy()
        xp[:, k] = np.minimum(X[:, k] + fd_step, 1.0)
        xm[:, k] = np.maximum(X[:, k] - fd_step, 0.0)
        width = (xp[:, k] - xm[:, k])[:, None, None]
        dA = (spec.evaluate(xp, Y, check=False) - spec.evaluate(xm, Y, check=False)) / width
        self_vals = A[:, k, :] + X[:, k, None] * dA[:, k, :]
        bad = np.argwhere(self_vals < -tol)
        for s, j in bad[: max_violations - len(violations)]:
            violations.append(MonotonicityViolation(
                "self_term", k, int(j), k, tuple(X[s].tolist()), float(self_vals[s, j])))
        cross = dA.copy()
        cross[:, k, :] = 0.0  # row i == k is the self term, not a cross term
        badc = np.argwhere(cross < -tol)
        for s, i, j in badc[: max_violations - len(violations)]:
            violations.append(MonotonicityViolation(
                "cross_derivative", int(i), int(j), k, tuple(X[s].tolist()), float(cross[s, i, j])))
        if len(violations) >= max_violations:
            break

    return MonotonicityReport(
        holds=not violations,
        violations=tuple(violations),
        n_points=len(X),
        tol=tol,
    )


@dataclass(frozen=True)
class HypothesisFailure:
    hypothesis: str  # g_positive, f_positive, u_g_increasing, u_f_increasing, u_f_concave
    node: int        # 0-based node index
    u: float         # witness point
    value: float


@dataclass(frozen=True)
class HypothesesReport:
    holds: bool
    failures: tuple[HypothesisFailure, ...]
    samples: int
    tol: float


def check_unimodality_hypotheses(
    spec: InteractionSpec,
    samples: int = 1001,
    tol: float = 1e-9,
) -> HypothesesReport:
    """Sampled test of the hypotheses that guarantee a single-peaked
    aggregate infection curve for rank-one local feedback:

    * g_i > 0 and f_j > 0 on [0, 1]
    * u * g_i(u) strictly increasing
    * u * f_j(u) increasing and concave

    Monotonicity and concavity are checked through first and second
    differences with slack tol.
    """
    if not spec.is_rank1_local:
        raise UsageError(
            f"hypothesis check applies to rank-1 local feedback, got {spec.kind}")
    if samples < 3:
        raise UsageError(f"samples must be >= 3, got {samples}")
    u = np.linspace(0.0, 1.0, samples)
    mid = 0.5 * (u[:-1] + u[1:])
    failures: list[HypothesisFailure] = []

    def record(name: str, node: int, mask: np.ndarray, grid: np.ndarray, vals: np.ndarray):
        if mask.any():
            w = int(np.argmax(mask))
            failures.append(HypothesisFailure(name, node, float(grid[w]), float(vals[w])))

    for i, gi in enumerate(spec.g_funcs):
        gv = np.asarray(gi(u), dtype=float) + np.zeros_like(u)
        record("g_positive", i, gv <= tol, u, gv)
        d = np.diff(u * gv)
        record("u_g_increasing", i, d < -tol, mid, d)

    for j, fj in enumerate(spec.f_funcs):
        fv = np.asarray(fj(u), dtype=float) + np.zeros_like(u)
        record("f_positive", j, fv <= tol, u, fv)
        uf = u * fv
        d = np.diff(uf)
        record("u_f_increasing", j, d < -tol, mid, d)
        d2 = uf[2:] - 2.0 * uf[1:-1] + uf[:-2]
        record("u_f_concave", j, d2 > tol, u[1:-1], d2)

    return HypothesesReport(
        holds=not failures,
        failures=tuple(failures),
        samples=samples,
        tol=tol,
    )

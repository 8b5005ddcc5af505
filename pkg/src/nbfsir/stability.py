"""Spectral stability of disease-free equilibria and region mapping.

Every state with y = 0 is an equilibrium (x*, 0).  Its stability is
decided by the dominant eigenvalue of diag(x*) A(x*, 0) against the
recovery rate: strictly below gamma means stable, strictly above means
unstable, and a narrow band around gamma is reported as marginal.

The dominant eigenvalue is found by power iteration on the shifted
matrix M + cI with c = 1 + max row sum; the shift makes the leading
eigenvalue strictly dominant in modulus even for periodic sparsity
patterns.  For two-node models, scan_region maps the classification
over a grid on [0,1]^2, traces the threshold level set by marching
squares with bisection refinement, and extracts the set of boundary
points maximizing the surviving susceptible mass.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .core import ModelParams
from .errors import NumericalError, UsageError

__all__ = [
    "Classification",
    "DominantEigen",
    "StabilityReport",
    "RegionScan",
    "dominant_eigen",
    "classify_equilibrium",
    "jacobian_at_equilibrium",
    "scan_region",
    "region_to_json",
    "region_to_svg",
]

_POWER_TOL = 1e-12
_POWER_MAX_ITER = 50_000
# The Rayleigh-quotient sequence can be transiently stationary while the
# iterate is still far from the eigenvector (the quotient of two successive
# iterates coincides whenever they straddle the quotient's extremum in angle
# space, which exact rational inputs do hit).  A stop on quotient agreement
# alone would then return a value that is not an eigenvalue at all, so the
# plain stop additionally requires the eigen-residual ||Mv - lam v|| to be
# small relative to lam.  Genuine convergence has residuals orders of
# magnitude below this gate; a transient plateau sits orders above it.
_RESIDUAL_GATE = 1e-4


class Classification(enum.Enum):
    STABLE = "S"
    UNSTABLE = "U"
    MARGINAL = "M"


# ---------------------------------------------------------------------------
# dominant eigenvalue machinery
# ---------------------------------------------------------------------------

def _power_iteration_batch(mats: np.ndarray, tol: float = _POWER_TOL,
                           max_iter: int = _POWER_MAX_ITER
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Power iteration on a stack of nonnegative matrices.

    Returns (lambda, vector, converged).  The iteration runs on the
    shifted stack M + cI and reports the unshifted dominant eigenvalue.
    A batch element converges when successive Rayleigh quotients agree
    within tol and the eigen-residual corroborates (see _RESIDUAL_GATE),
    or — for sequences converging geometrically but slowly — when two
    consecutive Aitken extrapolations of the Rayleigh sequence agree
    within tol.
    """
    mats = np.asarray(mats, dtype=float)
    squeeze = mats.ndim == 2
    if squeeze:
        mats = mats[None]
    B, n, _ = mats.shape
    c = 1.0 + mats.sum(axis=2).max(axis=1)
    shifted = mats + c[:, None, None] * np.eye(n)

    v = np.full((B, n), 1.0 / np.sqrt(n))
    lam = np.full(B, np.inf)
    d_prev = np.full(B, np.nan)
    accel_prev = np.full(B, np.nan)
    agree = np.zeros(B, dtype=np.int8)
    result = np.full(B, np.nan)
    converged = np.zeros(B, dtype=bool)
    active = np.arange(B)

    for _ in range(max_iter):
        sub = shifted[active]
        va = v[active]
        w = np.einsum("bij,bj->bi", sub, va)
        lam_new = np.einsum("bi,bi->b", va, w)
        resid = w - lam_new[:, None] * va
        res = np.sqrt(np.einsum("bi,bi->b", resid, resid))
        norms = np.sqrt(np.einsum("bi,bi->b", w, w))
        v[active] = w / np.maximum(norms, 1e-300)[:, None]

        d = lam_new - lam[active]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = d / d_prev[active]
            accel = lam_new + d * ratio / (1.0 - ratio)
        usable = (
            np.isfinite(ratio)
            & (ratio > 0.0)
            & (ratio < 0.99999)
            & (np.abs(d) > 0.0)
            & np.isfinite(accel)
        )
        accel = np.where(usable, accel, np.nan)
        plain = ((np.abs(d) < tol)
                 & (res <= _RESIDUAL_GATE * np.maximum(1.0, np.abs(lam_new))))
        with np.errstate(invalid="ignore"):
            agree_now = usable & (np.abs(accel - accel_prev[active]) < tol)
        agree_run = np.where(agree_now, agree[active] + 1, 0)
        agree[active] = agree_run
        accel_ok = agree_run >= 2

        finish = plain | accel_ok
        if finish.any():
            est = np.where(plain, lam_new, accel)
            idx = active[finish]
            result[idx] = est[finish]
            converged[idx] = True

        lam[active] = lam_new
        d_prev[active] = d
        accel_prev[active] = accel
        active = active[~finish]
        if active.size == 0:
            break

    result[~converged] = lam[~converged]  # best estimate for failures
    lam_out = np.maximum(result - c, 0.0)
    if squeeze:
        return lam_out[0], v[0], converged[0]
    return lam_out, v, converged


def _power_iteration_single(mat: np.ndarray, tol: float = _POWER_TOL,
                            max_iter: int = _POWER_MAX_ITER
                            ) -> tuple[float, np.ndarray, bool]:
    """Scalar-state twin of _power_iteration_batch for one matrix.

    Identical recurrence and stopping rule, but with plain floats for
    the per-iteration bookkeeping, which makes single-matrix queries
    roughly an order of magnitude cheaper than a one-element batch.
    """
    n = mat.shape[0]
    c = 1.0 + float(mat.sum(axis=1).max())
    shifted = mat + c * np.eye(n)

    v = np.full(n, 1.0 / np.sqrt(n))
    lam = np.inf
    d_prev = np.nan
    accel_prev = np.nan
    agree = 0

    for _ in range(max_iter):
        w = shifted @ v
        lam_new = float(v @ w)
        resid = w - lam_new * v
        res = float(np.sqrt(resid @ resid))
        norm = float(np.sqrt(w @ w))
        v = w / max(norm, 1e-300)

        d = lam_new - lam
        usable = False
        accel = np.nan
        if d_prev == d_prev and d_prev != 0.0 and d != 0.0:
            ratio = d / d_prev
            if 0.0 < ratio < 0.99999:
                candidate = lam_new + d * ratio / (1.0 - ratio)
                if np.isfinite(candidate):
                    usable = True
                    accel = candidate
        plain = abs(d) < tol and res <= _RESIDUAL_GATE * max(1.0, abs(lam_new))
        agree = agree + 1 if (usable and abs(accel - accel_prev) < tol) else 0
        if plain or agree >= 2:
            est = lam_new if plain else accel
            return max(est - c, 0.0), v, True
        lam = lam_new
        d_prev = d
        accel_prev = accel

    return max(lam - c, 0.0), v, False


def _is_irreducible(mat: np.ndarray) -> bool:
    """Strong connectivity of the sparsity pattern via boolean closure."""
    n = mat.shape[0]
    if n == 1:
        return bool(mat[0, 0] > 0.0)
    reach = (mat > 0.0) | np.eye(n, dtype=bool)
    for _ in range(int(np.ceil(np.log2(n))) + 1):
        reach = reach @ reach
    return bool(reach.all())


@dataclass(frozen=True, eq=False)
class DominantEigen:
    value: float
    left_vector: np.ndarray | None  # normalized to sum 1; None when reducible
    irreducible: bool


def dominant_eigen(mat: np.ndarray, tol: float = _POWER_TOL,
                   max_iter: int = _POWER_MAX_ITER) -> DominantEigen:
    """Dominant eigenvalue (spectral radius) of a nonnegative matrix and,
    when the matrix is irreducible, the positive left eigenvector.

    Raises NumericalError with the best estimate attached if the power
    iteration does not converge within max_iter.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise UsageError(f"dominant_eigen needs a square matrix, got {mat.shape}")
    if mat.min() < 0:
        raise UsageError(
            f"dominant_eigen applies to nonnegative matrices; min entry {mat.min()}")
    lam, _, ok = _power_iteration_single(mat, tol, max_iter)
    if not ok:
        raise NumericalError(
            f"power iteration did not converge in {max_iter} iterations",
            best_estimate=float(lam))
    irreducible = _is_irreducible(mat)
    left = None
    if irreducible:
        _, vt, okt = _power_iteration_single(mat.T, tol, max_iter)
        if not okt:
            raise NumericalError(
                "power iteration on the transpose did not converge",
                best_estimate=float(lam))
        vt = np.abs(vt)
        left = vt / vt.sum()
    return DominantEigen(value=float(lam), left_vector=left, irreducible=irreducible)


# ---------------------------------------------------------------------------
# equilibrium classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StabilityReport:
    x_star: np.ndarray
    lambda_max: float
    gamma: float
    classification: Classification
    perron_vector: np.ndarray | None
    irreducible: bool


def _classify_value(lam: float, gamma: float, band: float) -> Classification:
    if lam > gamma + band:
        return Classification.UNSTABLE
    if lam < gamma - band:
        return Classification.STABLE
    return Classification.MARGINAL


def classify_equilibrium(params: ModelParams, x_star,
                         marginal_band: float = 1e-9) -> StabilityReport:
    """Stability of the disease-free equilibrium (x*, 0)."""
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (params.n,):
        raise UsageError(
            f"x_star must have shape ({params.n},), got {x_star.shape}")
    if x_star.min() < 0 or x_star.max() > 1:
        raise UsageError(f"x_star must lie in [0,1]^n, got {x_star.tolist()}")
    if marginal_band < 0:
        raise UsageError(f"marginal_band must be >= 0, got {marginal_band}")
    a = params.interaction.evaluate(x_star, np.zeros_like(x_star))
    m = x_star[:, None] * a
    eig = dominant_eigen(m)
    return StabilityReport(
        x_star=x_star,
        lambda_max=eig.value,
        gamma=params.gamma,
        classification=_classify_value(eig.value, params.gamma, marginal_band),
        perron_vector=eig.left_vector,
        irreducible=eig.irreducible,
    )


def jacobian_at_equilibrium(params: ModelParams, x_star) -> np.ndarray:
    """Linearization of the flow at (x*, 0), ordered (x, y).

    The x block rows vanish except for the coupling to y, giving

        [[ 0, -M ],
         [ 0,  M - gamma*I ]]     with M = diag(x*) A(x*, 0).

    Its spectrum is {0 (n-fold)} plus the spectrum of M - gamma*I.
    """
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (params.n,):
        raise UsageError(
            f"x_star must have shape ({params.n},), got {x_star.shape}")
    n = params.n
    a = params.interaction.evaluate(x_star, np.zeros_like(x_star))
    m = x_star[:, None] * a
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, n:] = -m
    jac[n:, n:] = m - params.gamma * np.eye(n)
    return jac


# ---------------------------------------------------------------------------
# region scan (two-node models)
# ---------------------------------------------------------------------------

_LAMBDA_CHUNK = 250_000


def _lambda_at(params: ModelParams, pts: np.ndarray) -> np.ndarray:
    """Dominant eigenvalue of diag(x) A(x, 0) for a stack of x points."""
    out = np.empty(len(pts))
    for lo in range(0, len(pts), _LAMBDA_CHUNK):
        chunk = pts[lo:lo + _LAMBDA_CHUNK]
        a = params.interaction.evaluate(chunk, np.zeros_like(chunk))
        mats = chunk[:, :, None] * a
        lam, _, ok = _power_iteration_batch(mats)
        if not ok.all():
            bad = int(np.argmin(ok))
            raise NumericalError(
                f"power iteration stalled at grid point x={chunk[bad].tolist()}",
                best_estimate=float(lam[bad]))
        out[lo:lo + _LAMBDA_CHUNK] = lam
    return out


@dataclass(frozen=True, eq=False)
class RegionScan:
    resolution: int
    gamma: float
    axis: np.ndarray                 # shared grid coordinates per axis
    classes: np.ndarray              # (R, R) of Classification, rows index x1
    lambda_grid: np.ndarray          # (R, R) dominant eigenvalues
    boundary: tuple[np.ndarray, ...]  # polylines, each (K, 2)
    x_star_set: np.ndarray           # (K, 2) optimal boundary points

    @property
    def boundary_points(self) -> np.ndarray:
        if not self.boundary:
            return np.zeros((0, 2))
        return np.vstack(self.boundary)


def _bisect_edges(params: ModelParams, lo: np.ndarray, hi: np.ndarray,
                  s_lo: np.ndarray, gamma: float, boundary_tol: float) -> np.ndarray:
    """Bisection roots of lambda(x) - gamma along straight edges.

    lo/hi are (E, 2) endpoint stacks with opposite signs; s_lo holds the
    sign at lo.  Vectorized across the whole edge set.
    """
    lo = lo.copy()
    hi = hi.copy()
    sign_lo = np.sign(s_lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        s_mid = _lambda_at(params, mid) - gamma
        if (np.abs(s_mid) <= boundary_tol).all():
            return mid
        same = np.sign(s_mid) == sign_lo
        lo[same] = mid[same]
        hi[~same] = mid[~same]
        if np.max(np.abs(hi - lo)) < 1e-15:
            break
    return 0.5 * (lo + hi)


def _trace_boundary(params: ModelParams, axis: np.ndarray, s: np.ndarray,
                    gamma: float, boundary_tol: float
                    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Marching squares over the sign grid s = lambda - gamma.

    Returns (polylines, isolated_points).  Crossing locations on cell
    edges are refined by bisection against the true eigenvalue; grid
    nodes that sit on the level set within boundary_tol become crossing
    points directly.
    """
    r = len(axis)
    node_zero = np.abs(s) <= boundary_tol

    # collect strict sign-change edges: key (i, j, orientation)
    edge_keys: list[tuple] = []
    edge_lo = []
    edge_hi = []
    edge_slo = []
    points: dict[tuple, np.ndarray] = {}

    def consider(i1, j1, i2, j2, key):
        a, b = s[i1, j1], s[i2, j2]
        if node_zero[i1, j1] and node_zero[i2, j2]:
            return  # degenerate edge fully on the level set; nodes handle it
        if node_zero[i1, j1]:
            points[key] = np.array([axis[i1], axis[j1]])
        elif node_zero[i2, j2]:
            points[key] = np.array([axis[i2], axis[j2]])
        elif (a < 0) != (b < 0):
            edge_keys.append(key)
            edge_lo.append((axis[i1], axis[j1]))
            edge_hi.append((axis[i2], axis[j2]))
            edge_slo.append(a)

    for i in range(r):
        for j in range(r):
            if i + 1 < r:
                consider(i, j, i + 1, j, ("h", i, j))
            if j + 1 < r:
                consider(i, j, i, j + 1, ("v", i, j))

    if edge_keys:
        roots = _bisect_edges(
            params, np.array(edge_lo), np.array(edge_hi),
            np.array(edge_slo), gamma, boundary_tol)
        for key, pt in zip(edge_keys, roots):
            points[key] = pt

    # assemble per-cell segments between crossing points
    segments: list[tuple[tuple, tuple]] = []
    ambiguous: list[tuple[int, int, list]] = []
    for i in range(r - 1):
        for j in range(r - 1):
            sides = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
            present = [k for k in sides if k in points]
            uniq = []
            seen = set()
            for k in present:
                key_pt = tuple(np.round(points[k], 12))
                if key_pt not in seen:
                    seen.add(key_pt)
                    uniq.append(k)
            if len(uniq) == 2:
                segments.append((uniq[0], uniq[1]))
            elif len(uniq) == 4:
                ambiguous.append((i, j, uniq))

    if ambiguous:
        centers = np.array([
            (0.5 * (axis[i] + axis[i + 1]), 0.5 * (axis[j] + axis[j + 1]))
            for i, j, _ in ambiguous])
        s_centers = _lambda_at(params, centers) - gamma
        for (i, j, uniq), sc in zip(ambiguous, s_centers):
            bottom, right, top, left = uniq
            if (sc < 0) == (s[i, j] < 0):
                segments.append((bottom, right))
                segments.append((top, left))
            else:
                segments.append((bottom, left))
                segments.append((top, right))

    # chain segments into polylines
    adjacency: dict[tuple, list[tuple]] = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    used = set()
    polylines: list[np.ndarray] = []

    def walk(start):
        chain = [start]
        cur = start
        while True:
            nxt = None
            for cand in adjacency[cur]:
                if (min(cur, cand), max(cur, cand)) not in used:
                    nxt = cand
                    break
            if nxt is None:
                break
            used.add((min(cur, nxt), max(cur, nxt)))
            chain.append(nxt)
            cur = nxt
        return chain

    ends = [k for k, nb in adjacency.items() if len(nb) == 1]
    for start in ends:
        if all((min(start, nb), max(start, nb)) in used for nb in adjacency[start]):
            continue
        chain = walk(start)
        if len(chain) > 1:
            polylines.append(np.array([points[k] for k in chain]))
    for start in adjacency:  # remaining cycles
        if all((min(start, nb), max(start, nb)) in used for nb in adjacency[start]):
            continue
        chain = walk(start)
        if len(chain) > 1:
            polylines.append(np.array([points[k] for k in chain]))

    chained = {k for a, b in segments for k in (a, b)}
    isolated = [points[k] for k in points if k not in chained]
    return polylines, isolated


def _fd_gradient(params: ModelParams, pts: np.ndarray,
                 step: float = 1e-7) -> np.ndarray:
    grads = np.empty_like(pts)
    for axis_idx in range(2):
        up = pts.copy()
        dn = pts.copy()
        up[:, axis_idx] = np.minimum(pts[:, axis_idx] + step, 1.0)
        dn[:, axis_idx] = np.maximum(pts[:, axis_idx] - step, 0.0)
        width = up[:, axis_idx] - dn[:, axis_idx]
        width[width == 0.0] = 1.0
        grads[:, axis_idx] = (_lambda_at(params, up) - _lambda_at(params, dn)) / width
    return grads


def _project_to_level(params: ModelParams, pts: np.ndarray, gamma: float,
                      directions: np.ndarray, reach: float,
                      boundary_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Pull points back onto the level set along given directions.

    Returns (projected_points, success_mask); points without a sign
    bracket within reach are returned unchanged and flagged.
    """
    s0 = _lambda_at(params, pts) - gamma
    lo = pts.copy()
    hi = pts.copy()
    found = np.abs(s0) <= boundary_tol
    span = np.full(len(pts), reach)
    for _ in range(6):
        need = ~found
        if not need.any():
            break
        cand = np.clip(pts[need] + span[need, None] * directions[need], 0.0, 1.0)
        s_c = _lambda_at(params, cand) - gamma
        bracket = (s_c < 0) != (s0[need] < 0)
        idx = np.flatnonzero(need)
        hi[idx[bracket]] = cand[bracket]
        found[idx[bracket]] = True
        span[idx[~bracket]] *= -2.0  # flip and widen the probe
    ok = found | (np.abs(s0) <= boundary_tol)
    both = found & (np.abs(s0) > boundary_tol)
    if both.any():
        roots = _bisect_edges(
            params, lo[both], hi[both], s0[both], gamma, boundary_tol)
        out = pts.copy()
        out[both] = roots
        return out, ok
    return pts.copy(), ok


def _refine_max_mean(params: ModelParams, candidates: np.ndarray,
                     gamma: float, cell: float, boundary_tol: float,
                     weights: np.ndarray) -> np.ndarray:
    """Slide tied candidates along the level set toward a larger weighted
    mean of x.

    Projected tangent ascent with a shrinking step; candidates pinned by
    the domain walls or by an objective-neutral tangent stay in place.
    """
    pts = candidates.copy()
    step = np.full(len(pts), 0.5 * cell)
    for _ in range(36):
        if step.max() < 1e-9:
            break
        grads = _fd_gradient(params, pts)
        norms = np.linalg.norm(grads, axis=1)
        norms[norms == 0.0] = 1.0
        unit = grads / norms[:, None]
        tangent = np.stack([-unit[:, 1], unit[:, 0]], axis=1)
        drift = tangent @ weights
        direction = tangent * np.sign(drift)[:, None]
        moving = np.abs(drift) > 1e-12
        cand = np.clip(pts + step[:, None] * direction, 0.0, 1.0)
        cand[~moving] = pts[~moving]
        proj, ok = _project_to_level(params, cand, gamma, unit, 4.0 * step.max(),
                                     boundary_tol)
        better = ok & moving & (proj @ weights > pts @ weights + 1e-13)
        pts[better] = proj[better]
        step = np.where(better, step * 1.5, step * 0.5)
    return pts


def scan_region(params: ModelParams, resolution: int = 201,
                boundary_tol: float = 1e-9, tie_tol: float = 1e-6,
                marginal_band: float = 1e-9,
                weights: object = None) -> RegionScan:
    """Map equilibrium stability over the unit square of (x1, x2).

    Only defined for two-node models (boundary tracing is 2-D).  The
    optimal set collects boundary points whose mean susceptible mass
    ties the maximum within tie_tol, after a local refinement that
    slides candidates along the true level set.  The mean is uniform by
    default; pass `weights` (length 2, nonnegative, not all zero) to
    rank boundary points by a weighted mean instead, e.g. for unequal
    subpopulation sizes.
    """
    if params.n != 2:
        raise UsageError(
            f"scan_region requires a two-node model, got n={params.n}")
    if resolution < 11:
        raise UsageError(f"resolution must be >= 11, got {resolution}")
    if weights is None:
        w = np.full(2, 0.5)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (2,) or not np.isfinite(w).all() or w.min() < 0 or w.sum() <= 0:
            raise UsageError(
                "weights must be two finite nonnegative numbers, not all zero")
        w = w / w.sum()
    axis = np.linspace(0.0, 1.0, resolution)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([g1.reshape(-1), g2.reshape(-1)], axis=-1)
    lam = _lambda_at(params, pts).reshape(resolution, resolution)
    gamma = params.gamma

    classes = np.full((resolution, resolution), Classification.MARGINAL,
                      dtype=object)
    classes[lam > gamma + marginal_band] = Classification.UNSTABLE
    classes[lam < gamma - marginal_band] = Classification.STABLE

    s = lam - gamma
    polylines, isolated = _trace_boundary(params, axis, s, gamma, boundary_tol)

    all_points = [pt for line in polylines for pt in line] + list(isolated)
    if not all_points:
        if (classes == Classification.STABLE).all():
            x_star = np.array([[1.0, 1.0]])
        else:
            x_star = np.zeros((0, 2))
        return RegionScan(resolution, gamma, axis, classes, lam,
                          tuple(polylines), x_star)

    stacked = np.array(all_points)
    means = stacked @ w
    best = means.max()
    tied = stacked[means >= best - tie_tol]
    cell = axis[1] - axis[0]
    refined = _refine_max_mean(params, tied, gamma, cell, boundary_tol, w)

    # re-evaluate ties after refinement, then deduplicate collapsed points
    r_means = refined @ w
    r_best = r_means.max()
    keep = refined[r_means >= r_best - tie_tol]
    keep = keep[np.lexsort((keep[:, 1], keep[:, 0]))]
    dedup: list[np.ndarray] = []
    for pt in keep:
        if all(np.linalg.norm(pt - q) > 1e-4 for q in dedup):
            dedup.append(pt)
    x_star = np.array(dedup) if dedup else np.zeros((0, 2))

    return RegionScan(resolution, gamma, axis, classes, lam,
                      tuple(polylines), x_star)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def region_to_json(scan: RegionScan) -> str:
    """JSON rendering with a row-major class grid (rows index x1)."""
    payload = {
        "resolution": scan.resolution,
        "gamma": scan.gamma,
        "classes": [c.value for c in scan.classes.reshape(-1)],
        "boundary": [[float(p[0]), float(p[1])]
                     for line in scan.boundary for p in line],
        "x_star_set": [[float(p[0]), float(p[1])] for p in scan.x_star_set],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


_SVG_COLORS = {
    Classification.STABLE: "#7db8e8",
    Classification.UNSTABLE: "#e87d7d",
    Classification.MARGINAL: "#e8d27d",
}


def region_to_svg(scan: RegionScan) -> str:
    """A 1000x1000 heatmap of the class grid with the traced boundary
    overlaid; x1 runs right, x2 runs up."""
    size = 1000.0
    r = scan.resolution
    cell = size / r
    rows: list[str] = []
    for i in range(r):
        j = 0
        while j < r:
            j0 = j
            cls = scan.classes[i, j]
            while j < r and scan.classes[i, j] is cls:
                j += 1
            rows.append(
                f'<rect x="{i * cell:.2f}" y="{size - j * cell:.2f}" '
                f'width="{cell:.2f}" height="{(j - j0) * cell:.2f}" '
                f'fill="{_SVG_COLORS[cls]}"/>')
    paths = []
    for line in scan.boundary:
        coords = " ".join(
            f"{p[0] * size:.2f},{(1.0 - p[1]) * size:.2f}" for p in line)
        paths.append(
            f'<polyline points="{coords}" fill="none" stroke="#222" stroke-width="3"/>')
    stars = [
        f'<circle cx="{p[0] * size:.2f}" cy="{(1.0 - p[1]) * size:.2f}" r="7" '
        f'fill="#111"/>' for p in scan.x_star_set]
    body = "\n".join(rows + paths + stars)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size:.0f} {size:.0f}">\n'
        f"{body}\n</svg>\n")

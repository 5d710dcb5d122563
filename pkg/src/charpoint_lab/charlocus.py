"""Characteristic points: location, Hessian classification, kernel frame,
normal form, critical curve and the vanishing order along it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CurveLeavesWindow,
    NewtonDivergence,
    NormalFormResidual,
    NotCharacteristic,
    NotDegenerate,
    OrderAmbiguous,
    WindowBoundaryWarning,
    ZeroHessian,
)
from .geometry import FrameModel, horizontal_data

K_MAX = 12
EPS = np.finfo(float).eps

NONDEGENERATE = "nondegenerate"
MILDLY_DEGENERATE = "mildly_degenerate"
NOT_MILDLY_DEGENERATE = "not_mildly_degenerate"
UNRESOLVED = "unresolved"
NON_ISOLATED = "non_isolated"


@dataclass(frozen=True)
class Tolerances:
    tol_char: float = 1e-10
    tol_degenerate: float = 1e-8     # relative to the squared Hessian scale
    ill_conditioned: float = 1e-6    # relative, flags near-degenerate points
    merge: float = 1e-6              # fraction of the window size
    isolation: float = 0.1           # fraction of the window size
    tol_nf: float = 1e-9
    tol_curve: float = 1e-12
    k_max: int = K_MAX
    slope_deviation: float = 0.15


DEFAULT_TOL = Tolerances()


# ------------------------------------------------------------------ records

@dataclass
class CharPointRecord:
    x: float
    y: float
    z: float
    hessian: np.ndarray
    det: float
    classification: str = UNRESOLVED
    N: tuple[float, float] | None = None
    T: tuple[float, float] | None = None
    theta: float | None = None
    alpha: float | None = None
    W0: float | None = None
    order_k: int | None = None
    xi_leading: float | None = None
    isolated: bool = True
    ill_conditioned: bool = False
    det_identity_residual: float | None = None
    NTu: float | None = None
    TNu: float | None = None
    max_slope: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def location(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def degenerate(self) -> bool:
        return self.classification != NONDEGENERATE


@dataclass
class CurveSample:
    x_param: float
    x: float
    y: float
    xi: float
    noise: float

    @property
    def side(self) -> int:
        return 1 if self.x_param > 0 else -1


@dataclass
class CriticalCurveRecord:
    samples: list[CurveSample]
    dropped: list[tuple[float, str]] = field(default_factory=list)
    non_isolated: bool = False
    xi_order: int | None = None
    xi_leading: float | None = None


@dataclass
class OrderEstimate:
    k: int | None
    c0: float | None
    finite: bool
    mode: str
    max_slope: float | None = None
    ambiguous: bool = False
    detail: str = ""


@dataclass
class FoundPoint:
    x: float
    y: float
    residual: float
    isolated: bool = True
    cluster: int = 0
    near_boundary: bool = False


@dataclass
class CharPointSearch:
    points: list[FoundPoint]
    failed_seeds: list[tuple[float, float]]
    window: tuple[float, float, float, float]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def clusters(self) -> list[list[FoundPoint]]:
        groups: dict[int, list[FoundPoint]] = {}
        for p in self.points:
            groups.setdefault(p.cluster, []).append(p)
        return [groups[k] for k in sorted(groups)]

    def representatives(self) -> list[FoundPoint]:
        """One point per cluster: the root closest to the cluster centroid."""
        reps = []
        for group in self.clusters():
            cx = sum(p.x for p in group) / len(group)
            cy = sum(p.y for p in group) / len(group)
            reps.append(min(group, key=lambda p: (math.hypot(p.x - cx, p.y - cy), p.x, p.y)))
        return reps


# ------------------------------------------------------------------ location

def _residual(hd) -> np.ndarray:
    return np.abs(hd.X1u) + np.abs(hd.X2u)


def _newton(frame, surf, x, y, window, tol, max_iter=200):
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    x0, x1, y0, y1 = window
    span = max(x1 - x0, y1 - y0)
    active = np.ones(x.shape, bool)
    for _ in range(max_iter):
        hd = horizontal_data(frame, surf, (x, y))
        res = _residual(hd)
        active &= res > 0.0
        if not active.any():
            break
        F = np.stack([hd.X1u, hd.X2u], axis=-1)[active]
        J = np.moveaxis(hd.jacobian, (0, 1), (-2, -1))[active]
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-12), F)
        # keep iterating past tol: at a degenerate root Newton converges only linearly
        tiny = np.hypot(step[:, 0], step[:, 1]) <= 1e-15 * span
        idx = np.flatnonzero(active)
        active[idx[tiny & (res[active] <= tol)]] = False
        if not active.any():
            break
        step = step[active[idx]]
        xa, ya, ra = x[active], y[active], res[active]
        lam = np.ones(len(xa))
        nx, ny = xa + step[:, 0], ya + step[:, 1]
        for _ in range(12):
            trial = _residual(horizontal_data(frame, surf, (nx, ny)))
            worse = ~(trial < ra) & (trial > tol)
            if not worse.any():
                break
            lam = np.where(worse, lam / 2, lam)
            nx = np.where(worse, xa + lam * step[:, 0], nx)
            ny = np.where(worse, ya + lam * step[:, 1], ny)
        x[active], y[active] = nx, ny
        outside = (x < x0 - 0.01 * span) | (x > x1 + 0.01 * span) | (y < y0 - 0.01 * span) | (y > y1 + 0.01 * span)
        active &= ~outside
    hd = horizontal_data(frame, surf, (x, y))
    res = _residual(hd)
    ok = res <= tol
    return x, y, res, ok


def _snap(frame, surf, p: FoundPoint, size: float, tol: Tolerances) -> FoundPoint:
    """Prefer a nearby rounded point whose residual is no larger.

    Newton stops ~sqrt(eps) away from degenerate roots; an exact root with
    short coordinates is then recovered by rounding.
    """
    scale = 10.0 ** math.floor(math.log10(size))
    for digits in range(4, 13):
        q = scale * 10.0 ** -digits
        x, y = round(p.x / q) * q, round(p.y / q) * q
        if math.hypot(x - p.x, y - p.y) > tol.merge * size:
            continue
        r = float(_residual(horizontal_data(frame, surf, (x, y))))
        if r <= p.residual:
            return FoundPoint(x, y, r)
    return p


def find_characteristic_points(frame: FrameModel, surf, window=None, grid_n: int = 64,
                               tol: Tolerances = DEFAULT_TOL) -> CharPointSearch:
    """Solve X1u = X2u = 0 by Newton from sign-change cells of a grid."""
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    window = tuple(surf.window if window is None else window)
    x0, x1, y0, y1 = window
    xs = np.linspace(x0, x1, grid_n + 1)
    ys = np.linspace(y0, y1, grid_n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    hd = horizontal_data(frame, surf, (X, Y))
    seeds = [(X[hit], Y[hit]) for hit in [_residual(hd) <= tol.tol_char]]
    sx, sy = list(seeds[0][0]), list(seeds[0][1])
    cells = np.ones((grid_n, grid_n), bool)
    for F in (hd.X1u, hd.X2u):
        corners = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
        cells &= (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)
    ci, cj = np.nonzero(cells)
    sx += list(0.5 * (xs[ci] + xs[ci + 1]))
    sy += list(0.5 * (ys[cj] + ys[cj + 1]))
    if not sx:
        return CharPointSearch([], [], window)
    rx, ry, res, ok = _newton(frame, surf, np.array(sx), np.array(sy), window, tol.tol_char)
    failed = [(float(a), float(b)) for a, b, good in zip(sx, sy, ok) if not good]
    inside = ok & (rx >= x0) & (rx <= x1) & (ry >= y0) & (ry <= y1)
    roots = sorted(zip(rx[inside], ry[inside], res[inside]))
    size = max(x1 - x0, y1 - y0)
    merged: list[FoundPoint] = []
    def same_root(x, y, p):
        d = math.hypot(x - p.x, y - p.y)
        if d <= tol.merge * size:
            return True
        # Newton stalls at distance ~sqrt(tol) from a degenerate root
        if d <= 1e-3 * size:
            mid = horizontal_data(frame, surf, (0.5 * (x + p.x), 0.5 * (y + p.y)))
            return float(_residual(mid)) <= tol.tol_char
        return False

    for x, y, r in roots:
        if any(same_root(x, y, p) for p in merged):
            continue
        merged.append(_snap(frame, surf, FoundPoint(float(x), float(y), float(r)), size, tol))
    iso = tol.isolation * size
    # single-linkage clusters at the isolation radius
    parent = list(range(len(merged)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, p in enumerate(merged):
        for j in range(i):
            q = merged[j]
            if math.hypot(p.x - q.x, p.y - q.y) <= iso:
                parent[find(i)] = find(j)
                p.isolated = False
                q.isolated = False
    labels = {}
    cell = max((x1 - x0), (y1 - y0)) / grid_n
    for i, p in enumerate(merged):
        p.cluster = labels.setdefault(find(i), len(labels))
        p.near_boundary = min(p.x - x0, x1 - p.x, p.y - y0, y1 - p.y) < cell
    near = [p for p in merged if p.near_boundary]
    if near:
        warnings.warn(f"{len(near)} characteristic point(s) within one grid cell of the window boundary, "
                      f"first at ({near[0].x:.6g}, {near[0].y:.6g})", WindowBoundaryWarning, stacklevel=2)
    return CharPointSearch(merged, failed, window)


# ------------------------------------------------------------------ Hessian

def _surface_value(surf, x, y) -> float:
    return float(surf.jet(x, y, 0, value=True).value)


def hessian_at(frame: FrameModel, surf, p, tol: Tolerances = DEFAULT_TOL) -> CharPointRecord:
    """Horizontal Hessian [X_i X_j u] and its determinant at a characteristic point."""
    x, y = float(p[0]), float(p[1])
    hd = horizontal_data(frame, surf, (x, y))
    if float(hd.W) > tol.tol_char:
        raise NotCharacteristic(f"|grad_H u| = {float(hd.W):.3g} at ({x}, {y})")
    H = np.array(hd.second, dtype=float).reshape(2, 2)
    det = float(H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0])
    rec = CharPointRecord(x, y, _surface_value(surf, x, y), H, det)
    scale = float(np.abs(H).max())
    rec.classification = NONDEGENERATE if abs(det) > tol.tol_degenerate * scale ** 2 else UNRESOLVED
    if rec.classification == NONDEGENERATE and abs(det) < tol.ill_conditioned * scale ** 2:
        rec.ill_conditioned = True
        rec.notes.append("near-degenerate Hessian; classified non-degenerate")
    if frame.is_standard_heisenberg:
        g = surf.jet(x, y, 2)
        g20, g11, g02 = 2 * g[2, 0], g[1, 1], 2 * g[0, 2]
        rec.det_identity_residual = float(abs(det - (g20 * g02 - g11 ** 2 + 0.25)))
        w0 = math.hypot(g11 + 0.5, g20)
        rec.W0 = float(w0)
    return rec


def is_degenerate(rec: CharPointRecord, tol: Tolerances = DEFAULT_TOL) -> bool:
    scale = float(np.abs(rec.hessian).max())
    return abs(rec.det) <= tol.tol_degenerate * scale ** 2


def kernel_frame(rec: CharPointRecord, tol: Tolerances = DEFAULT_TOL):
    """Unit N with N^T Hess = 0 (left kernel), T = N rotated by +pi/2, and theta."""
    H = np.asarray(rec.hessian, dtype=float)
    scale = float(np.abs(H).max())
    if scale < 1e-14:
        raise ZeroHessian("horizontal Hessian vanishes identically (not bracket generating)")
    if not is_degenerate(rec, tol):
        raise NotDegenerate(f"det = {rec.det:.3g} is not zero within tolerance")
    # rank one: N is orthogonal to the dominant column
    j = int(np.argmax(np.hypot(H[0], H[1])))
    a, b = H[1, j], -H[0, j]
    norm = math.hypot(a, b)
    a, b = a / norm, b / norm
    if a < -1e-15 or (abs(a) <= 1e-15 and b < 0):
        a, b = -a, -b
    if abs(a) <= 1e-15:
        a = 0.0
    N = (float(a), float(b))
    T = (float(-b), float(a))
    theta = math.atan2(b, a)
    return N, T, theta


# ------------------------------------------------------------------ normal form

class TransformedSurface:
    """Graph of the surface after a Heisenberg isometry fixing the z-axis orientation.

    New coordinates (s, t) relate to the original plane by
    (x, y) = (x0, y0) + M (s, t); the left translation by -(x0, y0, z0)
    contributes the affine term (y0 X - x0 Y)/2 - z0 with (X, Y) = M (s, t).
    """

    def __init__(self, base, shift=(0.0, 0.0), z0: float = 0.0, matrix=np.eye(2), half_size: float | None = None):
        self.base = base
        self.shift = (float(shift[0]), float(shift[1]))
        self.z0 = float(z0)
        self.matrix = np.asarray(matrix, dtype=float)
        if half_size is None:
            wx0, wx1, wy0, wy1 = base.window
            sx, sy = self.shift
            half_size = min(sx - wx0, wx1 - sx, sy - wy0, wy1 - sy)
        self.window = (-half_size, half_size, -half_size, half_size)
        self.provenance = f"isometry image of [{getattr(base, 'provenance', '')}]"

    @property
    def analytic(self) -> bool:
        return self.base.analytic

    def jet(self, x, y, order: int, value: bool = False):
        from .jet import Jet

        s, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        m = self.matrix
        X = m[0, 0] * s + m[0, 1] * t
        Y = m[1, 0] * s + m[1, 1] * t
        x0, y0 = self.shift
        g = self.base.jet(x0 + X, y0 + Y, order, value=value)
        if not np.array_equal(m, np.eye(2)):
            g = g.linear_map(m)
        extra = np.zeros_like(g.coeffs)
        extra[(0, 0)] = 0.5 * (y0 * X - x0 * Y) - self.z0
        if order >= 1:
            extra[(1, 0)] = 0.5 * (y0 * m[0, 0] - x0 * m[1, 0])
            extra[(0, 1)] = 0.5 * (y0 * m[0, 1] - x0 * m[1, 1])
        return Jet(g.coeffs + extra, order, 2)

    def __call__(self, x, y) -> float:
        return float(self.jet(x, y, 0, value=True).value)

    def roundoff_scale(self, x, y) -> np.ndarray:
        """Size of the terms that cancel in first derivatives of the transformed graph."""
        s, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        m = self.matrix
        X = m[0, 0] * s + m[0, 1] * t
        Y = m[1, 0] * s + m[1, 1] * t
        x0, y0 = self.shift
        g = self.base.jet(x0 + X, y0 + Y, 1)
        inner = self.base.roundoff_scale(x0 + X, y0 + Y) if hasattr(self.base, "roundoff_scale") else 0.0
        return np.abs(g[1, 0]) + np.abs(g[0, 1]) + 0.5 * (abs(x0) + abs(y0)) + inner


def rotate_surface(surf, angle: float) -> TransformedSurface:
    """The image of ``surf`` under the rotation by ``angle`` about the z-axis."""
    c, s = math.cos(angle), math.sin(angle)
    # a point (s', t') of the image comes from R(-angle)(s', t') on the original
    return TransformedSurface(surf, matrix=[[c, s], [-s, c]])


def rotate_to_normal_form(surf, rec: CharPointRecord, tol: Tolerances = DEFAULT_TOL):
    """Translate the point to the origin and rotate N onto X.

    Returns the transformed surface and alpha, where the new graph reads
    st/2 + alpha t^2/2 + (terms of order >= 3).
    """
    if rec.N is None:
        rec.N, rec.T, rec.theta = kernel_frame(rec, tol)
    a, b = rec.N
    matrix = np.array([[a, -b], [b, a]])
    trivial = rec.x == 0.0 and rec.y == 0.0 and rec.z == 0.0 and a == 1.0 and b == 0.0
    nf = surf if trivial else TransformedSurface(surf, (rec.x, rec.y), rec.z, matrix)
    j = nf.jet(0.0, 0.0, 2)
    c20, c11, c02 = float(j[2, 0]), float(j[1, 1]), float(j[0, 2])
    c10, c01 = float(j[1, 0]), float(j[0, 1])
    scale = max(1.0, abs(c20), abs(c11), abs(c02))
    residual = max(abs(c20), abs(c11 - 0.5), abs(c10), abs(c01))
    if residual > tol.tol_nf * scale:
        raise NormalFormResidual(
            f"normal form residual {residual:.3g} (x^2: {c20:.3g}, xy: {c11:.3g}, first order: {c10:.3g}, {c01:.3g})")
    alpha = 2.0 * c02
    rec.alpha = alpha
    return nf, alpha


# ------------------------------------------------------------------ critical curve

def _curve_point(surf_nf, xs, tol_curve: float, max_iter: int = 60):
    """Solve g_x(x, y) + y/2 = 0 for y at each x (Newton from y = 0).

    Returns y, Nu, xi = Tu on the curve and the size of the terms summed into xi.
    With g = c xy + r the bilinear part is handled exactly, so xi keeps its
    full relative precision when it is far below x.
    """
    xs = np.asarray(xs, dtype=float)
    split = getattr(surf_nf, "bilinear_split", None)
    c, r = split if split is not None else (0.0, surf_nf)
    y = np.zeros_like(xs)
    for _ in range(max_iter):
        g = r.jet(xs, y, 2)
        F = g[1, 0] + (c + 0.5) * y
        dF = g[1, 1] + (c + 0.5)
        step = np.where(dF != 0.0, F / np.where(dF == 0.0, 1.0, dF), 0.0)
        y = y - step
        if np.all(np.abs(step) <= 4 * EPS * np.maximum(np.abs(y), 1e-300)):
            break
    g = r.jet(xs, y, 1)
    Nu = -(g[1, 0] + (c + 0.5) * y)
    xi = -(g[0, 1] + (c - 0.5) * xs)
    return y, Nu, xi, np.abs(g[0, 1]) + abs(c - 0.5) * np.abs(xs)


def trace_critical_curve(frame: FrameModel, surf_nf, rec: CharPointRecord | None = None, x_max: float | None = None,
                         n_samples: int = 40, ratio: float = 0.5, tol: Tolerances = DEFAULT_TOL) -> CriticalCurveRecord:
    """Sample the critical curve {Nu = 0} of the origin on a geometric ladder in x.

    Works in normal-form coordinates, where N = X and the curve is y + h_x = 0;
    the recorded xi is Tu = Yu along the curve.
    """
    if not frame.is_standard_heisenberg:
        raise NotImplementedError("critical curves are traced in the standard Heisenberg frame only")
    wx0, wx1, wy0, wy1 = surf_nf.window
    if x_max is None:
        x_max = 0.5 * min(wx1, -wx0)
    ladder = x_max * ratio ** np.arange(n_samples)
    xs = np.concatenate([ladder, -ladder])
    y, Nu, xi, mag = _curve_point(surf_nf, xs, tol.tol_curve)
    scale = surf_nf.roundoff_scale(xs, y) if hasattr(surf_nf, "roundoff_scale") else 0.0
    noise = 8 * EPS * (mag + scale)
    samples, dropped = [], []
    for xv, yv, nu, xiv, nz in zip(xs, y, Nu, xi, noise):
        if not (wy0 <= yv <= wy1):
            dropped.append((float(xv), "curve leaves window"))
        elif not abs(nu) <= max(tol.tol_curve, 64 * EPS * abs(xv)):
            dropped.append((float(xv), "Newton did not converge"))
        else:
            samples.append(CurveSample(float(xv), float(xv), float(yv), float(xiv), float(nz)))
    if not samples:
        raise CurveLeavesWindow("no valid critical-curve samples")
    non_isolated = all(abs(s.xi) <= 100 * s.noise for s in samples)
    return CriticalCurveRecord(samples, dropped, non_isolated)


# ------------------------------------------------------------------ order of xi

def _series_along_curve(coeffs: np.ndarray, y_series: list[float], m: int) -> np.ndarray:
    """Taylor coefficients of P(x, y(x)) for a bivariate polynomial P."""
    d = coeffs.shape[0] - 1
    ypow = [np.zeros(m + 1) for _ in range(d + 1)]
    ypow[0][0] = 1.0
    ys = np.asarray(y_series)
    for j in range(1, d + 1):
        ypow[j] = np.convolve(ypow[j - 1], ys)[: m + 1]
    out = np.zeros(m + 1)
    for i in range(d + 1):
        for j in range(d + 1 - i):
            c = coeffs[i, j]
            if c != 0.0 and i <= m:
                out[i:] += c * ypow[j][: m + 1 - i]
    return out


def xi_series(surf_nf, order: int) -> np.ndarray:
    """Taylor coefficients (up to ``order``) of xi along the critical curve."""
    g = surf_nf.jet(0.0, 0.0, order + 1)
    F = g.deriv(0).coeffs.copy()
    F[0, 1] += 0.5
    Xi = -g.deriv(1).coeffs
    Xi[1, 0] += 0.5
    m = order
    dF = F[0, 1]
    y = np.zeros(m + 1)
    for _ in range(m + 1):
        y = y - _series_along_curve(F, y, m) / dF
    return _series_along_curve(Xi, y, m)


def _slopes(points: list[tuple[float, float]], width: int = 4) -> list[float]:
    lx = np.log([p[0] for p in points])
    lv = np.log([p[1] for p in points])
    if len(points) < 2:
        return []
    w = min(width, len(points))
    out = []
    for start in range(0, len(points) - w + 1):
        out.append(float(np.polyfit(lx[start:start + w], lv[start:start + w], 1)[0]))
    return out


def _numeric_order(curve: CriticalCurveRecord, k_max: int, deviation: float) -> OrderEstimate:
    per_side = {}
    max_slope = -math.inf
    for side in (1, -1):
        pts = sorted(((abs(s.x_param), abs(s.xi)) for s in curve.samples if s.side == side), reverse=True)
        valid = []
        underflow_at = None
        for ax, axi in pts:
            noise = next(s.noise for s in curve.samples if abs(s.x_param) == ax and s.side == side)
            if axi == 0.0 or axi <= 100 * noise:
                underflow_at = ax
                break
            valid.append((ax, axi))
        slopes = _slopes(valid)
        if slopes:
            max_slope = max(max_slope, max(slopes))
        if (slopes and max(slopes) > k_max) or (underflow_at is not None and underflow_at > 1e-15 and len(valid) < 2):
            per_side[side] = ("infinite", None)
            continue
        if len(valid) < 8 or len(slopes) < 2:
            per_side[side] = ("ambiguous", None)
            continue
        last, prev = slopes[-1], slopes[-2]
        k = round(last)
        if abs(last - k) < deviation and round(prev) == k and abs(prev - k) < deviation:
            # xi/x^k = c0 + O(x): one Richardson step on the two smallest samples
            (xa, va), (xb, vb) = valid[-2], valid[-1]
            ca, cb = va / xa ** k, vb / xb ** k
            c0 = cb + (cb - ca) * xb / (xa - xb)
            sign = math.copysign(1.0, next(s.xi for s in curve.samples if s.side == side and abs(s.x_param) == valid[-1][0]))
            per_side[side] = ("finite", (k, sign * c0))
        else:
            per_side[side] = ("ambiguous", None)
    slope = None if max_slope == -math.inf else max_slope
    states = {v[0] for v in per_side.values()}
    if "infinite" in states:
        return OrderEstimate(None, None, False, "numeric", slope, detail="slope exceeds k_max or xi vanishes numerically")
    if states == {"finite"} and per_side[1][1][0] == per_side[-1][1][0]:
        k, c0 = per_side[1][1]
        return OrderEstimate(int(k), c0, True, "numeric", slope)
    return OrderEstimate(None, None, True, "numeric", slope, ambiguous=True, detail="order estimate unstable")


def xi_order(curve: CriticalCurveRecord | None, surf_nf=None, mode: str = "exact",
             tol: Tolerances = DEFAULT_TOL) -> OrderEstimate:
    """Order of vanishing of xi at the characteristic point.

    ``exact`` composes jets along the curve's Taylor series; ``numeric`` fits
    log|xi| against log|x| on the sampled ladder.  An exact result with every
    coefficient up to k_max vanishing returns ``k=None, finite=True`` with
    ``ambiguous=True``; callers decide between a non-isolated set and an
    unresolved point.
    """
    if mode == "numeric":
        est = _numeric_order(curve, tol.k_max, tol.slope_deviation)
    elif mode == "exact":
        coeffs = xi_series(surf_nf, tol.k_max + 1)
        scale = max(1.0, float(np.abs(surf_nf.jet(0.0, 0.0, tol.k_max + 2).coeffs).max()))
        nz = [n for n in range(tol.k_max + 1) if abs(coeffs[n]) > 1e-10 * scale]
        if nz:
            est = OrderEstimate(nz[0], float(coeffs[nz[0]]), True, "exact")
        else:
            est = OrderEstimate(None, None, True, "exact", ambiguous=True, detail=f"xi vanishes through order {tol.k_max}")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if curve is not None:
        curve.xi_order = est.k
        curve.xi_leading = est.c0
    return est


def require_order(est: OrderEstimate) -> int:
    if est.ambiguous:
        raise OrderAmbiguous(est.detail)
    return est.k


# ------------------------------------------------------------------ pipeline

def classify(frame: FrameModel, surf, p, tol: Tolerances = DEFAULT_TOL, mode: str = "auto",
             curve_samples: int = 40) -> CharPointRecord:
    """Full classification of a characteristic point."""
    rec = hessian_at(frame, surf, p, tol)
    if rec.classification == NONDEGENERATE:
        return rec
    rec.N, rec.T, rec.theta = kernel_frame(rec, tol)
    H = rec.hessian
    n, t = np.array(rec.N), np.array(rec.T)
    rec.NTu = float(n @ H @ t)
    rec.TNu = float(t @ H @ n)
    if not frame.is_standard_heisenberg:
        rec.classification = UNRESOLVED
        rec.notes.append("degenerate branch is implemented for the standard Heisenberg frame only")
        return rec
    surf_nf, _ = rotate_to_normal_form(surf, rec, tol)
    curve = trace_critical_curve(frame, surf_nf, rec, n_samples=curve_samples, tol=tol)
    if mode == "auto":
        mode = "exact" if surf.analytic else "numeric"
    est = xi_order(curve, surf_nf, mode, tol)
    rec.max_slope = est.max_slope
    if mode == "numeric" and curve.non_isolated:
        rec.classification = NON_ISOLATED
    elif est.k is not None:
        if est.k < 2:
            rec.notes.append(f"xi order {est.k} < 2 contradicts degeneracy")
            rec.classification = UNRESOLVED
        else:
            rec.classification = MILDLY_DEGENERATE
            rec.order_k = est.k
            rec.xi_leading = est.c0
    elif not est.finite:
        rec.classification = NOT_MILDLY_DEGENERATE
    elif mode == "exact" and curve.non_isolated:
        rec.classification = NON_ISOLATED
        rec.isolated = False
        rec.notes.append("xi vanishes identically: characteristic set contains the critical curve")
    else:
        rec.classification = UNRESOLVED
        rec.notes.append(est.detail)
    if rec.classification == NON_ISOLATED:
        rec.isolated = False
    return rec


def characteristic_jacobian_fd(frame: FrameModel, surf, p, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of (x, y) -> (X1u, X2u) on the graph."""
    x, y = float(p[0]), float(p[1])
    xs = np.array([x + h, x - h, x, x])
    ys = np.array([y, y, y + h, y - h])
    hd = horizontal_data(frame, surf, (xs, ys))
    F = np.stack([hd.X1u, hd.X2u])
    return np.stack([(F[:, 0] - F[:, 1]) / (2 * h), (F[:, 2] - F[:, 3]) / (2 * h)], axis=1)

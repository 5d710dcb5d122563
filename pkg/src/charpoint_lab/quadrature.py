"""Integrability of 1/W and |H| near characteristic points.

Three coordinate strategies are available:

* ``cartesian``: plane coordinates around the point, either as disk annuli
  (adaptive tensor Gauss-Kronrod cells in polar parametrization) or as
  x-shells with nested 1D integration;
* ``rectified``: (x, t) with t = y + h_x = g_x + y/2 in normal-form
  coordinates, nested 1D integration in t inside x;
* ``weighted_polar``: c0 x^k = rho cos(theta), sqrt(1 + alpha^2) t =
  rho sin(theta), one half-plane x > 0 or x < 0 at a time.

All engines are vectorized: every pass evaluates the integrand on all open
cells at once.  Cell contributions are summed with ``math.fsum`` in a fixed
order, so a run is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charlocus import (
    CharPointRecord,
    DEFAULT_TOL,
    hessian_at,
    is_degenerate,
    kernel_frame,
    rotate_to_normal_form,
    xi_order,
    trace_critical_curve,
)
from .errors import JacobianDegenerate, NonFiniteIntegrand, NotDegenerate, NotMild
from .geometry import FrameModel, horizontal_data, mean_curvature_times_w

# Gauss-Kronrod 7/15 (nodes on [-1, 1]); Gauss nodes are the odd-indexed Kronrod nodes
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS = np.zeros(15)
for _i, _w in zip((1, 3, 5, 7), _WG):
    GAUSS[_i] = GAUSS[14 - _i] = _w

QUANTITIES = ("inv_w", "abs_mean", "signed_mean")
MEASURES = ("riemannian", "sub_riemannian")
STRATEGIES = ("cartesian", "rectified", "weighted_polar")


@dataclass(frozen=True)
class IntegrandSpec:
    """Quantity times area density in graph coordinates.

    sigma_R has density sqrt(1 + W^2); sigma_H is normalized to density W.
    """

    quantity: str = "inv_w"
    measure: str = "riemannian"

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")

    def evaluate(self, frame: FrameModel, surf, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.quantity == "inv_w" and self.measure == "sub_riemannian":
            # (1/W) * W cancels identically
            return np.ones(x.shape)
        hd = horizontal_data(frame, surf, (x, y))
        W = hd.W
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.quantity == "inv_w":
                val = np.sqrt(1.0 + W * W) / W
            else:
                hw = mean_curvature_times_w(hd)
                if self.quantity == "abs_mean":
                    hw = np.abs(hw)
                val = hw if self.measure == "sub_riemannian" else hw * np.sqrt(1.0 + W * W) / W
        if not np.all(np.isfinite(val)):
            bad = np.flatnonzero(~np.isfinite(val.ravel()))[0]
            raise NonFiniteIntegrand(
                f"integrand not finite at ({x.ravel()[bad]!r}, {y.ravel()[bad]!r}): characteristic point in the region")
        return val


@dataclass
class QuadResult:
    value: float
    error: float
    max_subdivision: bool = False
    cells: int = 0


# ------------------------------------------------------------------ 1D engine

def integrate_batch(f, a, b, rtol: float = 1e-10, atol: float = 0.0, max_depth: int = 60,
                    max_passes: int = 300, max_intervals: int = 4000):
    """Globally adaptive Gauss-Kronrod 7/15 on many independent intervals at once.

    ``f(points, owner)`` gets points of shape (n, 15) and owner indices (n,);
    it returns values of the same shape, or a pair (values, errors) when the
    integrand itself carries an error estimate per point.  Each owner keeps
    bisecting its worst intervals until its summed error estimate is below
    max(atol, rtol * |total|).  Returns per-owner values, error estimates and
    a flag for owners that hit the depth or pass limit.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    m = len(a)
    lo, hi = a.copy(), b.copy()
    owner = np.arange(m)
    depth = np.zeros(m, int)
    val = np.zeros(m)
    err = np.zeros(m)
    floor = np.zeros(m)
    fresh = np.ones(m, bool)
    flagged = np.zeros(m, bool)
    finished = np.zeros(m, bool)
    for _ in range(max_passes):
        if fresh.any():
            half = 0.5 * (hi[fresh] - lo[fresh])
            mid = 0.5 * (hi[fresh] + lo[fresh])
            out = f(mid[:, None] + half[:, None] * NODES[None, :], owner[fresh])
            extra = None
            if isinstance(out, tuple):
                out, extra = out
            vk = half * (out @ KRONROD)
            e = np.abs(vk - half * (out @ GAUSS))
            if extra is not None:
                e = e + np.abs(half) * (extra @ KRONROD)
            val[fresh], err[fresh] = vk, e
            # K-G differences below this are rounding noise: splitting cannot help
            floor[fresh] = 50 * np.finfo(float).eps * np.abs(half) * (np.abs(out) @ KRONROD)
            fresh[:] = False
        total = np.zeros(m)
        etot = np.zeros(m)
        emax = np.zeros(m)
        np.add.at(total, owner, val)
        np.add.at(etot, owner, err)
        np.maximum.at(emax, owner, err)
        target = np.maximum(atol, rtol * np.abs(total))
        finished |= etot <= target
        count = np.bincount(owner, minlength=m)
        split = ~finished[owner] & (err >= 0.25 * emax[owner]) & (err > floor)
        stuck = split & ((depth >= max_depth) | (count[owner] >= max_intervals))
        if stuck.any():
            flagged[owner[stuck]] = True
            finished[owner[stuck]] = True
            split &= ~finished[owner]
        if not split.any():
            break
        mid = 0.5 * (lo[split] + hi[split])
        lo = np.concatenate([lo[~split], lo[split], mid])
        hi = np.concatenate([hi[~split], mid, hi[split]])
        owner = np.concatenate([owner[~split], owner[split], owner[split]])
        depth = np.concatenate([depth[~split], depth[split] + 1, depth[split] + 1])
        nk = int((~split).sum())
        floor = np.concatenate([floor[~split], np.zeros(2 * (len(val) - nk))])
        val = np.concatenate([val[~split], np.zeros(2 * (len(val) - nk))])
        err = np.concatenate([err[~split], np.zeros(2 * (len(err) - nk))])
        fresh = np.concatenate([np.zeros(nk, bool), np.ones(len(val) - nk, bool)])
    else:
        flagged |= ~finished
    order = np.lexsort((lo, owner))
    own, vals, errs = owner[order], val[order], err[order]
    bounds = np.searchsorted(own, np.arange(m + 1))
    value = np.array([math.fsum(vals[bounds[i]:bounds[i + 1]]) for i in range(m)])
    error = np.array([math.fsum(errs[bounds[i]:bounds[i + 1]]) for i in range(m)])
    return value, error, flagged


# ------------------------------------------------------------------ 2D engine (polar cells)

def _tensor_cells(frame, surf, spec, center, r0, r1, p0, p1, chunk: int = 2048):
    """Kronrod-Kronrod value, the two embedded Gauss errors and a roundoff floor per cell."""
    cx, cy = center
    out = [[], [], [], []]
    for i in range(0, len(r0), chunk):
        sl = slice(i, i + chunk)
        hr, mr = 0.5 * (r1[sl] - r0[sl]), 0.5 * (r1[sl] + r0[sl])
        hp, mp = 0.5 * (p1[sl] - p0[sl]), 0.5 * (p1[sl] + p0[sl])
        rr = mr[:, None, None] + hr[:, None, None] * NODES[None, :, None]
        pp = mp[:, None, None] + hp[:, None, None] * NODES[None, None, :]
        rr, pp = np.broadcast_arrays(rr, pp)
        vals = spec.evaluate(frame, surf, cx + rr * np.cos(pp), cy + rr * np.sin(pp)) * rr
        vals = vals * (hr * hp)[:, None, None]
        kk = np.einsum("nij,i,j->n", vals, KRONROD, KRONROD)
        gk = np.einsum("nij,i,j->n", vals, GAUSS, KRONROD)
        kg = np.einsum("nij,i,j->n", vals, KRONROD, GAUSS)
        out[0].append(kk)
        out[1].append(np.abs(kk - gk))
        out[2].append(np.abs(kk - kg))
        out[3].append(50 * np.finfo(float).eps * np.einsum("nij,i,j->n", np.abs(vals), KRONROD, KRONROD))
    return [np.concatenate(o) for o in out]


def integrate_annulus(frame: FrameModel, surf, spec: IntegrandSpec, center, eps_in: float, eps_out: float,
                      tol: float = 1e-7, max_depth: int = 24, max_cells: int = 60_000,
                      max_split: int = 2048, atol: float = 0.0) -> QuadResult:
    """Integral over eps_in <= |p - center| <= eps_out by adaptive tensor cells.

    Cells live in (r, phi) with Jacobian r, so no node ever sits on the
    center.  Globally adaptive: the worst cells are bisected along their
    worse axis until the summed error estimate is below tol * |total|.
    """
    if not 0.0 <= eps_in < eps_out:
        raise ValueError("need 0 <= eps_in < eps_out")
    center = (float(center[0]), float(center[1]))
    nr = max(1, math.ceil(math.log2(eps_out / eps_in))) if eps_in > 0 else 1
    redges = np.geomspace(eps_in, eps_out, nr + 1) if eps_in > 0 else np.array([0.0, eps_out])
    grid = [(redges[i], redges[i + 1], q * math.pi / 2, (q + 1) * math.pi / 2) for i in range(nr) for q in range(4)]
    r0, r1, p0, p1 = (np.array(v) for v in zip(*grid))
    dr = np.zeros(len(r0), int)
    dp = np.zeros(len(r0), int)
    val, er, ep, floor = _tensor_cells(frame, surf, spec, center, r0, r1, p0, p1)
    flagged = False
    evaluated = len(r0)
    while True:
        err = er + ep
        total = math.fsum(val)
        if math.fsum(err) <= max(atol, tol * abs(total)):
            break
        along_r = er >= ep
        can = (err > floor) & np.where(along_r, dr < max_depth, dp < max_depth)
        if not can.any():
            flagged = flagged or bool(np.any((err > floor) & ~can))
            break
        emax = err[can].max()
        pick = np.flatnonzero(can & (err >= 0.25 * emax))
        if len(pick) > max_split:
            pick = pick[np.argsort(-err[pick], kind="stable")[:max_split]]
        if evaluated + 2 * len(pick) > max_cells:
            flagged = True
            break
        if np.any(~can & (err > floor) & (err >= 0.25 * emax)):
            flagged = True
        keep = np.ones(len(r0), bool)
        keep[pick] = False
        sr = along_r[pick]
        a0, a1, b0, b1 = r0[pick], r1[pick], p0[pick], p1[pick]
        rm, pm = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
        n0 = np.concatenate([a0, np.where(sr, rm, a0)])
        n1 = np.concatenate([np.where(sr, rm, a1), a1])
        m0 = np.concatenate([b0, np.where(sr, b0, pm)])
        m1 = np.concatenate([np.where(sr, b1, pm), b1])
        ndr = np.concatenate([dr[pick] + sr, dr[pick] + sr])
        ndp = np.concatenate([dp[pick] + ~sr, dp[pick] + ~sr])
        nv, ner, nep, nfl = _tensor_cells(frame, surf, spec, center, n0, n1, m0, m1)
        evaluated += len(n0)
        r0, r1 = np.concatenate([r0[keep], n0]), np.concatenate([r1[keep], n1])
        p0, p1 = np.concatenate([p0[keep], m0]), np.concatenate([p1[keep], m1])
        dr, dp = np.concatenate([dr[keep], ndr]), np.concatenate([dp[keep], ndp])
        val, er = np.concatenate([val[keep], nv]), np.concatenate([er[keep], ner])
        ep, floor = np.concatenate([ep[keep], nep]), np.concatenate([floor[keep], nfl])
    order = np.lexsort((p0, r0))
    return QuadResult(math.fsum(val[order]), math.fsum((er + ep)[order]), flagged, evaluated)


# ------------------------------------------------------------------ fibers

@dataclass
class _FiberMap:
    """Fiber coordinate v over a fixed x: v = y (cartesian) or v = t (rectified)."""

    frame: FrameModel
    surf: object
    kind: str = "y"

    def to_y(self, x, v):
        if self.kind == "y":
            return v, np.ones_like(v)
        return rectified_inverse(self.surf, x, v)

    def from_y(self, x, y):
        if self.kind == "y":
            return y
        g = self.surf.jet(x, y, 1)
        return g[1, 0] + 0.5 * y


def rectified_inverse(surf, x, t, max_iter: int = 60):
    """Solve g_x(x, y) + y/2 = t for y; returns y and dy/dt."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    y = t.copy()
    for _ in range(max_iter):
        g = surf.jet(x, y, 2)
        dt = g[1, 1] + 0.5
        if np.any(np.abs(dt) < 1e-6):
            raise JacobianDegenerate("|dt/dy| < 1e-6: strip too wide for the rectified coordinate")
        step = (g[1, 0] + 0.5 * y - t) / dt
        y = y - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(np.abs(y), 1e-300)):
            break
    g = surf.jet(x, y, 2)
    dt = g[1, 1] + 0.5
    if np.any(np.abs(dt) < 1e-6):
        raise JacobianDegenerate("|dt/dy| < 1e-6: strip too wide for the rectified coordinate")
    return y, 1.0 / np.abs(dt)


def _fiber_argmin(fmap: _FiberMap, x, lo, hi, n_grid: int = 33, iters: int = 40):
    """Approximate argmin of W over v in [lo, hi] for each fiber, and W there."""
    s = np.linspace(0.0, 1.0, n_grid)
    V = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    X = np.broadcast_to(x[:, None], V.shape)
    Y, _ = fmap.to_y(X, V)
    W = horizontal_data(fmap.frame, fmap.surf, (X, Y)).W
    v = V[np.arange(len(x)), np.argmin(W, axis=1)]
    tiny = 1e-15 * np.maximum(hi - lo, 1e-300)
    active = np.arange(len(x))
    for _ in range(iters):
        xa, va, la, ha = x[active], v[active], lo[active], hi[active]
        y, dydv = fmap.to_y(xa, va)
        hd = horizontal_data(fmap.frame, fmap.surf, (xa, y))
        J = hd.jacobian[:, 1] * dydv
        F = np.stack([hd.X1u, hd.X2u])
        denom = (J * J).sum(axis=0)
        step = np.where(denom > 0, -(F * J).sum(axis=0) / np.where(denom > 0, denom, 1.0), 0.0)
        trial = np.clip(va + step, la, ha)
        yt, _ = fmap.to_y(xa, trial)
        wt = horizontal_data(fmap.frame, fmap.surf, (xa, yt)).W
        better = wt <= hd.W
        v[active] = np.where(better, trial, va)
        moving = better & (np.abs(trial - va) > np.maximum(1e-15 * np.abs(trial), tiny[active]))
        active = active[moving]
        if not len(active):
            break
    y, _ = fmap.to_y(x, v)
    return v, horizontal_data(fmap.frame, fmap.surf, (x, y)).W


def fiber_integrals(frame: FrameModel, surf, spec: IntegrandSpec, x, lo, hi, kind: str = "y",
                    rtol: float = 1e-10):
    """Integrals of the integrand over v in [lo_i, hi_i] at fixed x_i.

    The fiber is split at the minimum of W and each half is integrated in the
    variable u with v = v* -/+ L e^u, which resolves near-zero W down to
    e^-40 below its minimum.
    """
    x = np.asarray(x, dtype=float).ravel()
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    m = len(x)
    if m == 0:
        return np.zeros(0), np.zeros(0), False
    fmap = _FiberMap(frame, surf, kind)
    vstar, wmin = _fiber_argmin(fmap, x, lo, hi)
    # pieces: 0 = left of v*, 1 = right of v*
    px = np.concatenate([x, x])
    pc = np.concatenate([vstar, vstar])
    plen = np.concatenate([vstar - lo, hi - vstar])
    psign = np.concatenate([-np.ones(m), np.ones(m)])
    tiny = np.maximum(wmin, 1e-300)
    with np.errstate(divide="ignore"):
        umin = np.log(np.concatenate([tiny, tiny]) / np.where(plen > 0, plen, 1.0)) - 40.0
    umin = np.clip(np.minimum(umin, -40.0), -740.0, None)
    live = plen > 0

    def f(points, owner):
        u = points
        xx = px[owner][:, None]
        L = plen[owner][:, None]
        v = pc[owner][:, None] + psign[owner][:, None] * L * np.exp(u)
        xx = np.broadcast_to(xx, v.shape)
        y, dydv = fmap.to_y(xx, v)
        return spec.evaluate(frame, surf, xx, y) * dydv * L * np.exp(u)

    idx = np.flatnonzero(live)
    vals = np.zeros(2 * m)
    errs = np.zeros(2 * m)
    flagged = False
    if len(idx):
        def g(points, owner):
            return f(points, idx[owner])

        v, e, fl = integrate_batch(g, umin[idx], np.zeros(len(idx)), rtol=rtol)
        vals[idx], errs[idx] = v, e
        flagged = bool(fl.any())
    return vals[:m] + vals[m:], errs[:m] + errs[m:], flagged


def nested_integral(frame: FrameModel, surf, spec: IntegrandSpec, x_intervals, fiber_bounds, kind: str = "y",
                    tol: float = 1e-8, inner_rtol: float = 1e-10, atol: float = 0.0) -> QuadResult:
    """Outer adaptive integral in x of fiber integrals.

    ``fiber_bounds(x)`` returns a list of (lo, hi) array pairs, one per fiber
    piece (disks cut out of a strip give two pieces).
    """
    a = np.array([iv[0] for iv in x_intervals], dtype=float)
    b = np.array([iv[1] for iv in x_intervals], dtype=float)
    flag = [False]

    def outer(points, owner):
        xs = points.ravel()
        total = np.zeros_like(xs)
        err = np.zeros_like(xs)
        for lo, hi in fiber_bounds(xs):
            v, e, fl = fiber_integrals(frame, surf, spec, xs, lo, hi, kind, inner_rtol)
            total += v
            err += e
            flag[0] |= fl
        return total.reshape(points.shape), err.reshape(points.shape)

    # the budget is per x-interval; split atol evenly
    vals, errs, fl = integrate_batch(outer, a, b, rtol=tol, atol=atol / max(len(a), 1))
    return QuadResult(math.fsum(vals), math.fsum(errs), bool(fl.any()) or flag[0], 0)


# ------------------------------------------------------------------ regions

def _disk_pieces(radius_in: float, radius_out: float):
    def bounds(xs):
        ro = np.sqrt(np.maximum(radius_out ** 2 - xs * xs, 0.0))
        ri = np.sqrt(np.maximum(radius_in ** 2 - xs * xs, 0.0))
        return [(-ro, -ri), (ri, ro)]
    return bounds


def _disk_x_intervals(radius_in: float, radius_out: float):
    cuts = sorted({-radius_out, -radius_in, 0.0, radius_in, radius_out})
    return [(u, v) for u, v in zip(cuts[:-1], cuts[1:]) if v > u]


def _shell_x_intervals(eps_in: float, eps_out: float):
    return [(-eps_out, -eps_in), (eps_in, eps_out)]


def _strip_pieces(height: float):
    def bounds(xs):
        return [(np.full_like(xs, -height), np.full_like(xs, height))]
    return bounds


_FIBER_SAMPLES = np.linspace(0.0, 1.0, 17)


def _rectify_bounds(surf, bounds):
    """Map fiber bounds in y to bounds in t = g_x + y/2 (monotone in y)."""
    def tb(xs):
        out = []
        for lo, hi in bounds(xs):
            # t must increase with y on every fiber, as it does at the centre
            ys = lo[:, None] + (hi - lo)[:, None] * _FIBER_SAMPLES[None, :]
            dt = surf.jet(np.broadcast_to(xs[:, None], ys.shape), ys, 2)[1, 1] + 0.5
            if np.any(dt < 1e-6):
                raise JacobianDegenerate("|dt/dy| < 1e-6: strip too wide for the rectified coordinate")
            tl = surf.jet(xs, lo, 1)[1, 0] + 0.5 * lo
            th = surf.jet(xs, hi, 1)[1, 0] + 0.5 * hi
            out.append((np.minimum(tl, th), np.maximum(tl, th)))
        return out
    return tb


def _centered(surf, center):
    """The surface translated so that ``center`` sits at the origin (graph preserved)."""
    from .charlocus import TransformedSurface

    if float(center[0]) == 0.0 and float(center[1]) == 0.0:
        return surf
    z0 = float(surf.jet(center[0], center[1], 0, value=True).value)
    return TransformedSurface(surf, center, z0)


def region_integral(frame: FrameModel, surf, spec: IntegrandSpec, center, r_in: float, r_out: float,
                    geometry: str = "disk", kind: str = "y", tol: float = 1e-8, height: float | None = None,
                    atol: float = 0.0) -> QuadResult:
    """Nested integral over an annulus (disk geometry) or an x-shell of a strip.

    ``surf`` must already be centered (the point at the origin) when
    ``kind == "t"``; for ``kind == "y"`` the centering is done here.
    """
    if kind == "y" and frame.is_standard_heisenberg:
        surf = _centered(surf, center)
    elif kind == "y" and (center[0] != 0.0 or center[1] != 0.0):
        raise ValueError("nested integration with a non-Heisenberg frame needs the point at the origin")
    if geometry == "disk":
        xs = _disk_x_intervals(r_in, r_out)
        bounds = _disk_pieces(r_in, r_out)
    elif geometry == "xstrip":
        if height is None:
            raise ValueError("xstrip needs a height")
        xs = _shell_x_intervals(r_in, r_out) if r_in > 0 else [(-r_out, 0.0), (0.0, r_out)]
        bounds = _strip_pieces(height)
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    if kind == "t":
        bounds = _rectify_bounds(surf, bounds)
    return nested_integral(frame, surf, spec, xs, bounds, kind, tol, atol=atol)


# ------------------------------------------------------------------ rectified and weighted polar

def integrate_rectified(frame: FrameModel, surf_nf, curve, spec: IntegrandSpec, radius: float,
                        r_in: float = 0.0, geometry: str = "disk", height: float | None = None,
                        tol: float = 1e-8, atol: float = 0.0) -> QuadResult:
    """Integral in (x, t), t = y + h_x, over a disk/annulus or x-shell of the normal form.

    The integrand picks up 1/|dt/dy| = 1/|1 + h_xy|.
    """
    if not frame.is_standard_heisenberg:
        raise NotImplementedError("rectified coordinates need the standard Heisenberg frame")
    return region_integral(frame, surf_nf, spec, (0.0, 0.0), r_in, radius, geometry, "t", tol, height, atol)


def polar_denominator_min(alpha: float) -> float:
    """Lower bound 1 - |alpha|/sqrt(1 + alpha^2) of 1 + alpha sin(2 theta)/sqrt(1 + alpha^2)."""
    return 1.0 - abs(alpha) / math.sqrt(1.0 + alpha * alpha)


def polar_jacobian(rho, theta, k: int, c0: float, alpha: float):
    """d(x, t)/d(rho, theta) for |c0| |x|^k = rho cos(theta), sqrt(1+alpha^2) t = rho sin(theta)."""
    return _polar_jacobian_cos(rho, np.cos(theta), k, c0, alpha)


def _polar_jacobian_cos(rho, cth, k, c0, alpha):
    a = math.sqrt(1.0 + alpha * alpha)
    return rho ** (1.0 / k) * cth ** (1.0 / k - 1.0) / (k * a * abs(c0) ** (1.0 / k))


def _polar_point(rho, cth, sth, sign, k, c0, alpha):
    a = math.sqrt(1.0 + alpha * alpha)
    x = sign * (rho * cth / abs(c0)) ** (1.0 / k)
    t = rho * sth / a
    return x, t


def _rho_max(surf_nf, cth, sth, sign, k, c0, alpha, radius, iters: int = 80):
    """First rho along each ray where the plane point leaves the disk of ``radius``."""
    def outside(rho):
        x, t = _polar_point(rho, cth, sth, sign, k, c0, alpha)
        bad = np.abs(x) >= radius
        xs = np.where(bad, 0.0, x)
        try:
            y, _ = rectified_inverse(surf_nf, xs, np.where(bad, 0.0, t))
        except JacobianDegenerate:
            y = np.full_like(xs, np.inf)
        return bad | (xs * xs + y * y >= radius * radius)

    hi = np.full(cth.shape, radius * min(1.0, abs(c0) * radius ** (k - 1)))
    for _ in range(200):
        out = outside(hi)
        if out.all():
            break
        hi = np.where(out, hi, 2.0 * hi)
    lo = np.zeros_like(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        out = outside(mid)
        lo, hi = np.where(out, lo, mid), np.where(out, mid, hi)
    return 0.5 * (lo + hi)


@dataclass
class PolarResult(QuadResult):
    denominator_min: float = 1.0
    halves: tuple[float, float] = (0.0, 0.0)


def integrate_weighted_polar(frame: FrameModel, surf_nf, curve, spec: IntegrandSpec, k: int | None, c0: float | None,
                             alpha: float, radius: float, tol: float = 1e-8) -> PolarResult:
    """Integral over the disk |p| <= radius of the normal form in weighted polar coordinates.

    Substitutions rho = s^k rho_max(theta) and
    theta = sign(v)(pi/2)(1 - (1 - |v|)^k) absorb the rho^(1/k - 1) and
    |cos theta|^(1/k - 1) singularities; each half-plane is done separately.
    """
    if k is None or c0 is None or k < 1:
        raise NotMild("weighted polar coordinates need a finite order k and leading coefficient")
    if not frame.is_standard_heisenberg:
        raise NotImplementedError("weighted polar coordinates need the standard Heisenberg frame")
    dmin = polar_denominator_min(alpha)
    if not dmin > 0:
        raise ValueError("polar denominator bound is not positive")
    halves = []
    errors = []
    flagged = False
    for sign in (1.0, -1.0):
        cache: dict[bytes, np.ndarray] = {}

        def outer(points, owner, sign=sign):
            v = points.ravel()
            # cos(theta) from its complement: no cancellation near theta = +-pi/2
            gap = (math.pi / 2) * (1.0 - np.abs(v)) ** k
            cth, sth = np.sin(gap), np.sign(v) * np.cos(gap)
            dtheta = (math.pi / 2) * k * (1.0 - np.abs(v)) ** (k - 1)
            rmax = _rho_max(surf_nf, cth, sth, sign, k, c0, alpha, radius)
            lo = np.zeros_like(v)
            hi = np.ones_like(v)

            def inner(spts, sowner):
                c, sn = cth[sowner][:, None], sth[sowner][:, None]
                s = spts
                rho = s ** k * rmax[sowner][:, None]
                drho = k * s ** (k - 1) * rmax[sowner][:, None]
                x, t = _polar_point(rho, c, sn, sign, k, c0, alpha)
                y, dydt = rectified_inverse(surf_nf, x, t)
                jac = _polar_jacobian_cos(rho, c, k, c0, alpha) * drho
                return spec.evaluate(frame, surf_nf, x, y) * dydt * jac

            vals, errs, fl = integrate_batch(inner, lo, hi, rtol=1e-10)
            cache["flag"] = cache.get("flag", False) | bool(fl.any())
            return (vals * dtheta).reshape(points.shape), (errs * dtheta).reshape(points.shape)

        val, err, fl = integrate_batch(outer, np.array([-1.0]), np.array([1.0]), rtol=tol)
        halves.append(float(val[0]))
        errors.append(float(err[0]))
        flagged |= bool(fl.any()) or bool(cache.get("flag", False))
    return PolarResult(math.fsum(halves), math.fsum(errors), flagged, 0, dmin, (halves[0], halves[1]))


# ------------------------------------------------------------------ scans and verdicts

@dataclass
class AnnulusValue:
    eps: float
    value: float
    error: float


@dataclass
class IntegrabilityReport:
    center: tuple[float, float]
    outer_radius: float
    annuli: list[AnnulusValue]
    increments: list[float]
    increment_errors: list[float]
    verdict: str
    limit: float | None
    tail_bound: float | None
    growth_exponent: float | None
    strategy: str
    quantity: str
    measure: str
    geometry: str = "disk"
    ratio: float = 0.5
    max_subdivision: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.annuli[-1].value

    @property
    def total_error(self) -> float:
        return self.annuli[-1].error


def growth_exponent(eps_inner, increments) -> float | None:
    """Slope c of log2|increment| against log2(1/eps); increments ~ eps^(-c)."""
    inc = np.abs(np.asarray(increments, dtype=float))
    eps = np.asarray(eps_inner, dtype=float)
    ok = inc > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log2(1.0 / eps[ok]), np.log2(inc[ok]), 1)[0])


def verdict(eps_inner, increments, total: float, tol_verdict: float = 1e-4, errors=None):
    """Classify an increment sequence: (verdict, limit, tail_bound, growth exponent).

    With ``errors``, increments inside their own error bar count as zero.
    """
    inc = np.asarray(increments, dtype=float)
    err = np.zeros_like(inc) if errors is None else np.asarray(errors, dtype=float)
    inc = np.where(np.abs(inc) <= err, 0.0, inc)
    c = growth_exponent(eps_inner, inc)
    mag = np.abs(inc)
    if len(mag) >= 2 and np.all(mag[-2:] == 0.0):
        tail = float(err[-2:].sum())
        return "converged", total, tail, c
    run = 0
    for j in range(len(mag) - 1, 0, -1):
        if mag[j] > mag[j - 1] > 0:
            run += 1
        else:
            break
    recent = growth_exponent(eps_inner[-5:], inc[-5:]) if len(inc) >= 3 else None
    if run >= 4 or (recent is not None and recent > 0 and run >= 2):
        return "diverged", None, None, c
    if len(mag) >= 3 and np.all(mag[-4:] > 0):
        ratios = mag[-3:] / mag[-4:-1] if len(mag) >= 4 else mag[-2:] / mag[-3:-1]
        q = float(np.exp(np.mean(np.log(ratios))))
        if q < 0.9:
            tail = float(inc[-1]) * q / (1.0 - q)
            if abs(tail) <= tol_verdict * max(abs(total), 1e-300):
                return "converged", total + tail, abs(tail), c
    return "inconclusive", None, None, c


def _normal_form_for(frame, surf, center, record):
    if record is None:
        record = hessian_at(frame, surf, center)
    if not is_degenerate(record):
        raise NotDegenerate("rectified and weighted polar strategies need a degenerate characteristic point")
    if record.N is None:
        record.N, record.T, record.theta = kernel_frame(record)
    surf_nf, alpha = rotate_to_normal_form(surf, record)
    return record, surf_nf, alpha


def integrability_scan(frame: FrameModel, surf, spec: IntegrandSpec, center, eps_min: float, eps_max: float,
                       outer_radius: float | None = None, strategy: str = "cartesian", geometry: str = "disk",
                       ratio: float = 0.5, tol: float = 1e-7, tol_verdict: float = 1e-4,
                       height: float | None = None, record: CharPointRecord | None = None) -> IntegrabilityReport:
    """I(eps_n) = integral over eps_n <= r <= outer_radius on the ladder eps_n = eps_max ratio^n.

    For ``xstrip`` the distance is |x| and the strip is |y| <= height.
    """
    if strategy == "polar":
        strategy = "weighted_polar"
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not 0 < eps_min < eps_max:
        raise ValueError("need 0 < eps_min < eps_max")
    if eps_min < 1e-8 * eps_max:
        raise ValueError("eps_min must be at least 1e-8 * eps_max")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    outer = eps_max if outer_radius is None else float(outer_radius)
    if outer < eps_max:
        raise ValueError("outer radius below eps_max")
    n = int(math.floor(math.log(eps_min / eps_max) / math.log(ratio) + 1e-9))
    eps = eps_max * ratio ** np.arange(n + 1)
    cx, cy = float(center[0]), float(center[1])
    notes: list[str] = []
    if geometry == "xstrip" and height is None:
        height = eps_max

    # shells far below the base region only need accuracy relative to the running total
    floor = {"atol": 0.0}
    if strategy == "cartesian":
        if geometry == "disk":
            def piece(r0, r1):
                return integrate_annulus(frame, surf, spec, (cx, cy), r0, r1, tol, atol=floor["atol"])
        else:
            def piece(r0, r1):
                return region_integral(frame, surf, spec, (cx, cy), r0, r1, geometry, "y", tol, height,
                                       atol=floor["atol"])
    elif strategy == "rectified":
        rec, surf_nf, alpha = _normal_form_for(frame, surf, (cx, cy), record)

        def piece(r0, r1):
            return integrate_rectified(frame, surf_nf, None, spec, r1, r0, geometry, height, tol, floor["atol"])
    else:
        if geometry != "disk":
            raise ValueError("weighted polar scans use disk geometry")
        rec, surf_nf, alpha = _normal_form_for(frame, surf, (cx, cy), record)
        if rec.order_k is None:
            curve = trace_critical_curve(frame, surf_nf, rec)
            est = xi_order(curve, surf_nf, "exact" if surf.analytic else "numeric")
            rec.order_k, rec.xi_leading = est.k, est.c0
        disks = [integrate_weighted_polar(frame, surf_nf, None, spec, rec.order_k, rec.xi_leading, alpha, r, tol)
                 for r in [outer] + list(eps)]
        notes.append(f"denominator lower bound {disks[0].denominator_min:.17g}")
        cache = {float(r): d for r, d in zip([outer] + list(eps), disks)}

        def piece(r0, r1):
            a, b = cache[float(r1)], cache[float(r0)]
            return QuadResult(a.value - b.value, a.error + b.error, a.max_subdivision or b.max_subdivision)

    results = []
    base = piece(eps[0], outer) if outer > eps[0] else QuadResult(0.0, 0.0)
    results.append(base)
    floor["atol"] = 1e-3 * tol * abs(base.value)
    for e_out, e_in in zip(eps[:-1], eps[1:]):
        results.append(piece(e_in, e_out))
    annuli = []
    run_v, run_e = [], []
    for e, r in zip(eps, results):
        run_v.append(r.value)
        run_e.append(r.error)
        annuli.append(AnnulusValue(float(e), math.fsum(run_v), math.fsum(run_e)))
    increments = [r.value for r in results[1:]]
    inc_err = [r.error for r in results[1:]]
    flagged = any(r.max_subdivision for r in results)
    if flagged:
        notes.append("maximum subdivision reached; error estimates are inflated")
    if geometry == "xstrip":
        notes.append(f"x-shells eps_(n+1) <= |x| <= eps_n inside |y| <= {height!r}")
    v, limit, tail, c = verdict(eps[1:], increments, annuli[-1].value, tol_verdict, inc_err)
    return IntegrabilityReport((cx, cy), outer, annuli, increments, inc_err, v, limit, tail, c,
                               strategy, spec.quantity, spec.measure, geometry, ratio, flagged, notes)

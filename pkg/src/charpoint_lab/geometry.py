"""Horizontal calculus on surfaces: frame, gradient, W, sub-Laplacian, mean curvature.

Every function accepts either a single point or arrays of points; array inputs
are evaluated in one vectorized pass.  For a graph z = g(x, y) the defining
function is u = z - g, so d_z u = 1 and the horizontal mean curvature is
H = -div(grad_H u / W) with the divergence taken against Lebesgue measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CharacteristicPointError, FrameError, SubmersionError
from .expr import SPACE_VARIABLES, ExprNode, parse_expression
from .jet import Jet, evaluate_jet, expression_jet

W_MIN = 1e-300


@dataclass(frozen=True)
class FrameModel:
    """Horizontal orthonormal frame.

    ``heisenberg``: X = d_x - (y/2) d_z, Y = d_y + (x/2) d_z.
    ``contact``: the 3D contact normal form with coefficient functions beta
    and gamma of (x, y, z).  ``rotation`` replaces (X1, X2) by R(theta)(X1, X2),
    which must leave every scalar invariant.
    """

    kind: str = "heisenberg"
    beta: ExprNode | None = None
    gamma: ExprNode | None = None
    rotation: float = 0.0

    def __post_init__(self):
        if self.kind not in ("heisenberg", "contact"):
            raise FrameError(f"unknown frame kind {self.kind!r}")
        if self.kind == "contact" and (self.beta is None or self.gamma is None):
            raise FrameError("contact frame needs beta and gamma")

    @classmethod
    def contact(cls, beta: str, gamma: str, rotation: float = 0.0, check: bool = True) -> FrameModel:
        frame = cls("contact", parse_expression(beta, SPACE_VARIABLES), parse_expression(gamma, SPACE_VARIABLES), rotation)
        if check:
            frame.check_normal_form()
        return frame

    def rotated(self, theta: float) -> FrameModel:
        return FrameModel(self.kind, self.beta, self.gamma, self.rotation + theta)

    @property
    def is_standard_heisenberg(self) -> bool:
        return self.kind == "heisenberg" and self.rotation == 0.0

    def check_normal_form(self, zs=np.linspace(-1.0, 1.0, 9), tol: float = 1e-10) -> None:
        """beta(0,0,z) = gamma(0,0,z) = d_x gamma(0,0,z) = d_y gamma(0,0,z) = 0."""
        if self.kind != "contact":
            return
        zs = np.asarray(zs, dtype=float)
        zero = np.zeros_like(zs)
        b = expression_jet(self.beta, (zero, zero, zs), 0)
        c = expression_jet(self.gamma, (zero, zero, zs), 1)
        worst = max(np.max(np.abs(b.value)), np.max(np.abs(c.value)),
                    np.max(np.abs(c[1, 0, 0])), np.max(np.abs(c[0, 1, 0])))
        if worst > tol:
            raise FrameError(f"beta/gamma violate the contact normal form conditions (residual {worst:.3g})")

    def rotation_matrix(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return np.array([[c, s], [-s, c]])

    def coefficient_jets(self, x, y, z, order: int = 1) -> list[list[Jet]]:
        """a[i][k]: coefficient of d_k in the (unrotated) field X_i, as (x, y, z) jets."""
        X = Jet.variable(0, x, order, 3)
        Y = Jet.variable(1, y, order, 3)
        one = Jet.constant(1.0, order, 3)
        zero = Jet.constant(0.0, order, 3)
        a1 = [one, zero, -0.5 * Y]
        a2 = [zero, one, 0.5 * X]
        if self.kind == "contact":
            env = {"x": X, "y": Y, "z": Jet.variable(2, z, order, 3)}
            b = evaluate_jet(self.beta, env)
            c = evaluate_jet(self.gamma, env)
            bxy = b * X * Y
            a1 = [one + b * Y * Y, -bxy, -0.5 * Y + c * Y]
            a2 = [-bxy, one + b * X * X, 0.5 * X + c * X]
        return [a1, a2]


@dataclass
class HorizontalData:
    """Horizontal first and second derivatives of u at surface points.

    ``second[i, j]`` is X_i X_j u; ``jacobian[i, :]`` is the gradient of
    (x, y) -> X_i u(x, y, g(x, y)) for graphs (zeros for implicit data).
    """

    point: tuple
    X1u: np.ndarray
    X2u: np.ndarray
    W: np.ndarray
    second: np.ndarray
    sub_laplacian: np.ndarray
    jacobian: np.ndarray
    dzu: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        return np.stack([self.X1u, self.X2u])

    def commutator(self) -> np.ndarray:
        return self.second[0, 1] - self.second[1, 0]


def _calculus(frame: FrameModel, u3: Jet, x, y, z):
    """Frame derivatives of u from its order-2 (x, y, z) jet."""
    a = frame.coefficient_jets(x, y, z, 1)
    du = [u3.deriv(k) for k in range(3)]
    Xu_jets = [sum((a[i][k] * du[k] for k in range(3)), Jet.constant(0.0, 1, 3)) for i in range(2)]
    Xu = np.stack([np.broadcast_to(j.value, u3.batch_shape) for j in Xu_jets])
    units = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    dXu = np.stack([np.stack([np.broadcast_to(j[e], u3.batch_shape) for e in units]) for j in Xu_jets])
    acoef = np.stack([np.stack([np.broadcast_to(a[i][k].value, u3.batch_shape) for k in range(3)]) for i in range(2)])
    div = np.stack([sum(np.broadcast_to(a[i][k][units[k]], u3.batch_shape) for k in range(3)) for i in range(2)])
    # X_i X_j u = sum_k a_ik d_k (X_j u)
    second = np.einsum("ik...,jk...->ij...", acoef, dXu)
    R = frame.rotation_matrix()
    if frame.rotation != 0.0:
        Xu = np.einsum("ij,j...->i...", R, Xu)
        dXu = np.einsum("ij,jk...->ik...", R, dXu)
        second = np.einsum("ik,kl...,jl->ij...", R, second, R)
        div = np.einsum("ij,j...->i...", R, div)
    lap = second[0, 0] + second[1, 1] + div[0] * Xu[0] + div[1] * Xu[1]
    return Xu, dXu, second, lap


def _graph_u3(gjet: Jet) -> Jet:
    batch = gjet.batch_shape
    c = np.zeros((3, 3, 3) + batch)
    for i in range(3):
        for j in range(3 - i):
            c[i, j, 0] = -gjet[i, j]
    c[0, 0, 0] = 0.0
    c[0, 0, 1] = 1.0
    return Jet(c, 2, 3)


def horizontal_data(frame: FrameModel, surf, p) -> HorizontalData:
    """X_i u, W, X_i X_j u and the sub-Laplacian on the graph at p = (x, y)."""
    x, y = np.broadcast_arrays(np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float))
    need_z = frame.kind == "contact"
    split = None if need_z else getattr(surf, "bilinear_split", None)
    if split is None:
        g = surf.jet(x, y, 2, value=need_z)
    else:
        c, rest = split
        g = rest.jet(x, y, 2)
        # X1u = -(r_x + (c + 1/2) y), X2u = -(r_y + (c - 1/2) x): the x/2 cancels exactly when c = 1/2
        exact = np.stack([-(g[1, 0] + (c + 0.5) * y), -(g[0, 1] + (c - 0.5) * x)])
        coeffs = g.coeffs.copy()
        coeffs[1, 1] = coeffs[1, 1] + c
        coeffs[1, 0] = coeffs[1, 0] + c * y
        coeffs[0, 1] = coeffs[0, 1] + c * x
        coeffs[0, 0] = coeffs[0, 0] + c * x * y
        g = Jet(coeffs, 2, 2)
    z = g.value if need_z else np.zeros_like(x)
    u3 = _graph_u3(g)
    Xu, dXu, second, lap = _calculus(frame, u3, x, y, z)
    if split is not None:
        Xu = np.einsum("ij,j...->i...", frame.rotation_matrix(), exact) if frame.rotation != 0.0 else exact
        lap = second[0, 0] + second[1, 1]
    gx, gy = g[1, 0], g[0, 1]
    jac = np.stack([
        np.stack([dXu[i, 0] + gx * dXu[i, 2], dXu[i, 1] + gy * dXu[i, 2]]) for i in range(2)
    ])
    W = np.hypot(Xu[0], Xu[1])
    return HorizontalData((x, y, z), Xu[0], Xu[1], W, second, lap, jac, np.ones_like(W))


def implicit_data(frame: FrameModel, u: ExprNode, p) -> HorizontalData:
    x, y, z = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in p])
    u3 = expression_jet(u, (x, y, z), 2)
    grad = np.stack([u3[1, 0, 0], u3[0, 1, 0], u3[0, 0, 1]])
    if np.any(np.all(grad == 0.0, axis=0)):
        raise SubmersionError(f"du vanishes at {p!r}")
    Xu, dXu, second, lap = _calculus(frame, u3, x, y, z)
    W = np.hypot(Xu[0], Xu[1])
    return HorizontalData((x, y, z), Xu[0], Xu[1], W, second, lap, np.zeros((2, 2) + W.shape), grad[2])


def mean_curvature_times_w(hd: HorizontalData) -> np.ndarray:
    """H * W = -Delta u + n^T (X_i X_j u) n with n the unit horizontal normal.

    Stays finite as W -> 0, which the sub-Riemannian integrand relies on.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        n1 = hd.X1u / hd.W
        n2 = hd.X2u / hd.W
    s = hd.second
    quad = n1 * n1 * s[0, 0] + n1 * n2 * (s[0, 1] + s[1, 0]) + n2 * n2 * s[1, 1]
    return -hd.sub_laplacian + quad


def _curvature(hd: HorizontalData, w_min: float):
    if np.any(hd.W < w_min):
        raise CharacteristicPointError(f"W below {w_min:g}: characteristic point")
    H = mean_curvature_times_w(hd) / hd.W
    return H if np.ndim(H) else float(H)


def mean_curvature(frame: FrameModel, surf, p, w_min: float = W_MIN):
    """-(1/W) Delta u + (1/W^3) sum X_i u X_j u X_i X_j u for u = z - g."""
    return _curvature(horizontal_data(frame, surf, p), w_min)


def mean_curvature_implicit(frame: FrameModel, u: ExprNode | str, p, w_min: float = W_MIN):
    if isinstance(u, str):
        u = parse_expression(u, SPACE_VARIABLES)
    return _curvature(implicit_data(frame, u, p), w_min)


def riemannian_density(hd: HorizontalData) -> np.ndarray:
    """Area density of sigma_R in graph coordinates with {X1, X2, d_z} orthonormal."""
    return np.sqrt(1.0 + hd.W * hd.W)


def c0_bound(frame: FrameModel, surf, region, n: int = 32) -> float:
    """sup over an (n+1)^2 grid of |Delta u| + sum |X_i X_j u|.

    Doubling ``n`` samples a superset of points, so the estimate never
    decreases under refinement.
    """
    x0, x1, y0, y1 = region
    xs, ys = np.meshgrid(np.linspace(x0, x1, n + 1), np.linspace(y0, y1, n + 1), indexing="ij")
    hd = horizontal_data(frame, surf, (xs, ys))
    total = np.abs(hd.sub_laplacian) + np.abs(hd.second).sum(axis=(0, 1))
    return float(total.max())

"""The outer piece: the vector-valued Green-type map

    G(x) = sum_j alpha_j R_j (x - x_j)/|x - x_j|^n  +  A_0 x,

its graph x -> x + i eps G(x) as an immersion patch, and the numerical
verification of the expansion of G near a marked point x_j0,

    G(x_j0 + rho Theta) . R_j0 Theta  integrates to
        alpha_j0 rho^{1-n} + (1/omega_n)(sum_{j != j0} gamma_j0j alpha_j
                                          - lambda_j0) rho  (exactly),

whose linear coefficient vanishes iff alpha solves Gamma alpha = Lambda
(balancing).  Each Green term is harmonic, so the Laplacian of the graph
height vanishes identically and the graph's mean curvature is carried by
the cubic nonlinearity alone.

The probe separates the singular term exactly: G minus its j0 summand is
evaluated term by term (no cancellation), so the linear coefficient is
resolvable far below the float noise of the full field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Configuration
from .geometry import ImmersionPatch
from .quadrature import QuadratureRule, omega_n, sphere_rule

__all__ = [
    "GreenData",
    "balance_residual",
    "expansion_probe",
    "graph_mean_curvature",
    "graph_patch",
    "green_eval",
    "green_gradient",
    "green_hessian",
    "regular_part",
]

SINGULAR_CLEARANCE = 1e-12


@dataclass(frozen=True)
class GreenData:
    """Configuration plus the neck scales weighting the singular terms."""

    config: Configuration
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        if alpha.shape != (self.config.k,):
            raise ValueError("alpha must have one entry per marked point")
        if not np.all(np.isfinite(alpha)):
            raise ValueError("alpha must be finite")


def _green_terms(data: GreenData, x: np.ndarray, skip: int = None) -> np.ndarray:
    """Sum of Green terms (optionally omitting one) plus A_0 x; x is (..., n)."""
    cfg = data.config
    n = cfg.n
    out = x @ cfg.A0.T
    for j in range(cfg.k):
        if j == skip:
            continue
        u = x - cfg.points[j]
        r = np.linalg.norm(u, axis=-1, keepdims=True)
        if np.any(r < SINGULAR_CLEARANCE):
            raise ValueError(f"evaluation point touches the singular point x_{j}")
        out = out + data.alpha[j] * (u / r**n) @ cfg.rotations[j].T
    return out


def green_eval(data: GreenData, x) -> np.ndarray:
    """G(x); x may be a single n-vector or an (..., n) batch."""
    x = np.asarray(x, dtype=float)
    return _green_terms(data, x)


def green_gradient(data: GreenData, x) -> np.ndarray:
    """Jacobian dG_i/dx_l, shape (..., n, n)."""
    x = np.asarray(x, dtype=float)
    cfg = data.config
    n = cfg.n
    out = np.broadcast_to(cfg.A0, x.shape[:-1] + (n, n)).copy()
    eye = np.eye(n)
    for j in range(cfg.k):
        u = x - cfg.points[j]
        r2 = np.sum(u * u, axis=-1)[..., None, None]
        r = np.sqrt(r2)
        D = eye / r**n - n * u[..., :, None] * u[..., None, :] / r ** (n + 2)
        out = out + data.alpha[j] * np.einsum("il,...lm->...im", cfg.rotations[j], D)
    return out


def green_hessian(data: GreenData, x) -> np.ndarray:
    """Second derivatives d^2 G_i / dx_l dx_m, shape (..., n, n, n)."""
    x = np.asarray(x, dtype=float)
    cfg = data.config
    n = cfg.n
    out = np.zeros(x.shape[:-1] + (n, n, n))
    eye = np.eye(n)
    for j in range(cfg.k):
        u = x - cfg.points[j]
        r = np.linalg.norm(u, axis=-1)[..., None, None, None]
        # D2[(u_i / r^n)]_{lm} = -n (delta_il u_m + delta_im u_l + delta_lm u_i)/r^{n+2}
        #                        + n(n+2) u_i u_l u_m / r^{n+4}
        d_il_um = eye[:, :, None] * u[..., None, None, :]
        d_im_ul = eye[:, None, :] * u[..., None, :, None]
        d_lm_ui = eye[None, :, :] * u[..., :, None, None]
        D2 = -n * (d_il_um + d_im_ul + d_lm_ui) / r ** (n + 2) \
            + n * (n + 2) * u[..., :, None, None] * u[..., None, :, None] \
            * u[..., None, None, :] / r ** (n + 4)
        out = out + data.alpha[j] * np.einsum("ip,...plm->...ilm", cfg.rotations[j], D2)
    return out


def regular_part(data: GreenData, j0: int) -> np.ndarray:
    """G minus its own singular term, evaluated at x_j0: the neck translation
    constant c_j0 = sum_{j != j0} alpha_j R_j (x_j0-x_j)/|x_j0-x_j|^n + A_0 x_j0."""
    return _green_terms(data, data.config.points[j0], skip=j0)


# ----------------------------------------------------------------------
# Expansion probe and balancing
# ----------------------------------------------------------------------

def _fit(design: np.ndarray, values: np.ndarray, cond_limit: float = 1e8):
    """Least squares with column equilibration and a conditioning gate."""
    scales = np.linalg.norm(design, axis=0)
    if np.any(scales == 0):
        raise ValueError("degenerate fit basis")
    A = design / scales
    cond = np.linalg.cond(A)
    if cond > cond_limit:
        raise ValueError(
            f"radii not separated enough for a stable fit (cond {cond:.3e})"
        )
    sol, *_ = np.linalg.lstsq(A, values, rcond=None)
    return sol / scales


def expansion_probe(data: GreenData, j0: int, radii, rule: QuadratureRule = None):
    """Measure the expansion of G at the end j0 over decreasing radii.

    Fits the collinear projection p(rho) = (1/omega_n) int G(x_j0+rho Theta)
    . R_j0 Theta dtheta against {rho^{1-n}, 1, rho, rho^2} for the singular
    coefficient, refits the exactly-desingularized projection against
    {1, rho, rho^2} for the linear coefficient, and recovers the constant
    vector from the sphere average of the regular field (mean-value
    property).  Returns a dict with keys singular_coeff, linear_coeff,
    constant_vec, plus the raw fitted coefficient arrays.
    """
    cfg = data.config
    n = cfg.n
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 4:
        raise ValueError("need at least four probe radii")
    others = [j for j in range(cfg.k) if j != j0]
    if others:
        dmin = min(np.linalg.norm(cfg.points[j0] - cfg.points[j]) for j in others)
        if np.max(radii) > 0.5 * dmin:
            raise ValueError("probe radii must stay below half the separation")
    if rule is None:
        rule = sphere_rule(n)
    om = omega_n(n)
    nodes, w = rule.nodes, rule.weights
    rtheta = nodes @ cfg.rotations[j0].T

    proj_full = np.empty(radii.size)
    proj_reg = np.empty(radii.size)
    mean_reg = np.empty((radii.size, n))
    for i, rho in enumerate(radii):
        pts = cfg.points[j0] + rho * nodes
        full = _green_terms(data, pts)
        reg = _green_terms(data, pts, skip=j0)
        proj_full[i] = float(w @ np.sum(full * rtheta, axis=1)) / om
        proj_reg[i] = float(w @ np.sum(reg * rtheta, axis=1)) / om
        mean_reg[i] = (w[:, None] * reg).sum(axis=0) / om

    design_full = np.stack([radii ** (1 - n), np.ones_like(radii), radii, radii**2], axis=1)
    coeff_full = _fit(design_full, proj_full)
    design_reg = np.stack([np.ones_like(radii), radii, radii**2], axis=1)
    coeff_reg = _fit(design_reg, proj_reg)
    design_mean = np.stack([np.ones_like(radii), radii**2], axis=1)
    const_vec = np.stack([_fit(design_mean, mean_reg[:, c])[0] for c in range(n)])

    return {
        "singular_coeff": float(coeff_full[0]),
        "linear_coeff": float(coeff_reg[1]),
        "constant_vec": const_vec,
        "full_fit": coeff_full,
        "regular_fit": coeff_reg,
    }


def balance_residual(data: GreenData, base_radius: float = None,
                     rule: QuadratureRule = None) -> np.ndarray:
    """|linear coefficient| of the expansion at every end; all entries vanish
    (to fit accuracy) iff alpha solves Gamma alpha = Lambda."""
    cfg = data.config
    if base_radius is None:
        if cfg.k > 1:
            dmin = min(
                np.linalg.norm(cfg.points[a] - cfg.points[b])
                for a in range(cfg.k) for b in range(a + 1, cfg.k)
            )
            base_radius = min(1e-3, 0.25 * dmin)
        else:
            base_radius = 1e-3
    radii = base_radius * 0.5 ** np.arange(4)
    out = np.empty(cfg.k)
    for j0 in range(cfg.k):
        out[j0] = abs(expansion_probe(data, j0, radii, rule=rule)["linear_coeff"])
    return out


# ----------------------------------------------------------------------
# The graph as an immersion, with analytic curvature
# ----------------------------------------------------------------------

def default_outer_box(config: Configuration) -> float:
    """Half-width 2/rho_0 of the outer sampling box, with rho_0 the largest
    radius keeping the balls B(x_j, rho_0) disjoint and inside B(0, 1/rho_0)."""
    pts = config.points
    k = pts.shape[0]
    rho0 = np.inf
    for a in range(k):
        for b in range(a + 1, k):
            rho0 = min(rho0, 0.5 * float(np.linalg.norm(pts[a] - pts[b])))
    M = float(np.max(np.linalg.norm(pts, axis=1)))
    rho0 = min(rho0, 0.5 * (math.sqrt(M * M + 4.0) - M))
    return 2.0 / rho0


def graph_patch(data: GreenData, half_width: float = None, spacing: float = None,
                exclusion: float = None) -> ImmersionPatch:
    """Sample x + i eps G(x) on a uniform box grid minus the end balls."""
    cfg = data.config
    n = cfg.n
    if half_width is None:
        half_width = default_outer_box(cfg)
    if spacing is None:
        spacing = cfg.rho_star / 4.0
    if exclusion is None:
        exclusion = cfg.rho_star
    axes = [np.arange(-half_width, half_width + spacing / 2, spacing)] * n
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = np.ones(mesh.shape[:-1], dtype=bool)
    for j in range(cfg.k):
        mask &= np.linalg.norm(mesh - cfg.points[j], axis=-1) > exclusion
    samples = np.empty(mesh.shape[:-1] + (2 * n,))
    samples[..., :n] = mesh
    flat = mesh[mask]
    heights = np.zeros(mesh.shape[:-1] + (n,))
    heights[mask] = cfg.epsilon * green_eval(data, flat)
    samples[..., n:] = heights
    return ImmersionPatch(spacings=(spacing,) * n, samples=samples, mask=mask)


def graph_mean_curvature(data: GreenData, x) -> np.ndarray:
    """Mean-curvature vector of the graph x + i eps G(x) from the exact
    derivatives of G, shape (..., 2n).

    With J = [I; eps DG] and g = I + eps^2 DG^T DG,
        H = W - J g^{-1} J^T W,   W = (0, eps g^{lm} d_l d_m G).
    """
    x = np.asarray(x, dtype=float)
    cfg = data.config
    n = cfg.n
    eps = cfg.epsilon
    DG = green_gradient(data, x)          # (..., n, n) rows dG_i
    D2G = green_hessian(data, x)          # (..., n, n, n)
    eye = np.eye(n)
    g = eye + eps**2 * np.einsum("...il,...im->...lm", DG, DG)
    ginv = np.linalg.inv(g)
    Wy = eps * np.einsum("...lm,...ilm->...i", ginv, D2G)
    # J^T W with W = (0, Wy): rows of J are (e_l, eps dG/dx_l)
    JtW = eps * np.einsum("...il,...i->...l", DG, Wy)
    coeff = np.einsum("...lm,...m->...l", ginv, JtW)
    Hx = -coeff
    Hy = Wy - eps * np.einsum("...il,...l->...i", DG, coeff)
    return np.concatenate([Hx, Hy], axis=-1)

"""Spherical-harmonic boundary calculus on S^2 and the leading-order
matching solve for n = 3.

R^3-valued boundary data Phi on the unit sphere are expanded in real
orthonormal spherical harmonics per Cartesian component.  Harmonic
extensions multiply degree-k coefficients by r^k inside and r^{2-n-k} =
r^{-(k+1)} outside; the Dirichlet-to-Neumann maps are therefore diagonal,

    P_int = k,    P_ext = -(k+1),    P_ext - P_int = -(2k+1),

strictly negative for every degree, which witnesses the invertibility of
the matching operator.

The leading-order matching couples, per end j0, the value gap and the
rho_* - scaled conormal gap of the outer piece against the neck piece.
Orthogonal-to-Theta parts solve

    Phi_j - tilde Phi_j = g1,    P_ext Phi_j - P_int tilde Phi_j = g2

via (P_ext - P_int) Phi_j = g2 - P_int g1.  Theta-collinear parts carry the
scale unknowns: with u_j = eps (beta_j - alpha_j) rho_*^{1-n} and
w_j = (eps/omega_n) sum_{j'!=j} gamma_jj' (alpha_j' - alpha*_j') rho_*,
the two projections give u_j + w_j = c1 and (1-n) u_j + w_j = c2 (the
conormal weights are the radial derivatives of rho^{1-n} and rho), a 2x2
system of determinant n, after which Gamma delta_alpha = (omega_n w)/(eps
rho_*) is a single dense solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

from .config import Configuration
from .quadrature import omega_n

__all__ = [
    "MatchCorrection",
    "SHExpansion",
    "SphereGrid",
    "dtn_solve",
    "harmonic_extension",
    "match_boundaries",
    "p_ext",
    "p_int",
    "sh_analyze",
    "sh_synthesize",
    "split_theta",
]

DEFAULT_DEGREE = 8


def _real_sph_basis(L: int, theta, phi) -> np.ndarray:
    """Real orthonormal spherical harmonics up to degree L at given angles.

    Output shape (..., (L+1)^2), index k^2 + (m + k) for order m in [-k, k].
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ct = np.cos(theta)
    out = np.empty(theta.shape + ((L + 1) ** 2,))
    for k in range(L + 1):
        for m in range(0, k + 1):
            norm = math.sqrt(
                (2 * k + 1) / (4 * math.pi)
                * math.factorial(k - m) / math.factorial(k + m)
            )
            P = lpmv(m, k, ct)
            if m == 0:
                out[..., k * k + k] = norm * P
            else:
                out[..., k * k + k + m] = math.sqrt(2.0) * norm * P * np.cos(m * phi)
                out[..., k * k + k - m] = math.sqrt(2.0) * norm * P * np.sin(m * phi)
    return out


def _degrees(L: int) -> np.ndarray:
    """Degree k of each coefficient slot."""
    return np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)


@dataclass
class SHExpansion:
    """Degree-truncated real-SH coefficients of an R^3-valued sphere map."""

    max_degree: int
    coeffs: np.ndarray  # (3, (L+1)^2)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        want = (3, (self.max_degree + 1) ** 2)
        if self.coeffs.shape != want:
            raise ValueError(f"coefficients must have shape {want}")

    @staticmethod
    def zero(L: int) -> "SHExpansion":
        return SHExpansion(L, np.zeros((3, (L + 1) ** 2)))

    def copy(self) -> "SHExpansion":
        return SHExpansion(self.max_degree, self.coeffs.copy())

    def scale_degrees(self, factors: np.ndarray) -> "SHExpansion":
        return SHExpansion(self.max_degree, self.coeffs * factors[None, :])

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def __add__(self, other):
        return SHExpansion(self.max_degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SHExpansion(self.max_degree, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return SHExpansion(self.max_degree, self.coeffs * float(c))

    __rmul__ = __mul__


class SphereGrid:
    """Gauss-Legendre x uniform product grid on S^2 resolving degree L.

    Nodes satisfy the Nyquist requirement (>= 2L+2 per angle) so that
    analyze . synthesize is the identity on band-limited data.
    """

    def __init__(self, L: int = DEFAULT_DEGREE):
        self.L = int(L)
        n_theta = 2 * self.L + 2
        n_phi = 2 * self.L + 2
        u, wu = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(u)
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        self.theta, self.phi = np.meshgrid(theta, phi, indexing="ij")
        self.weights = np.broadcast_to(
            (wu * 2.0 * math.pi / n_phi)[:, None], self.theta.shape
        ).copy()
        self.nodes = np.stack(
            [
                np.sin(self.theta) * np.cos(self.phi),
                np.sin(self.theta) * np.sin(self.phi),
                np.cos(self.theta),
            ],
            axis=-1,
        )
        self.basis = _real_sph_basis(self.L, self.theta, self.phi)

    def sample(self, fn) -> np.ndarray:
        """Evaluate an (N,3)->(N,3) map on the grid nodes."""
        flat = self.nodes.reshape(-1, 3)
        vals = np.asarray(fn(flat), dtype=float)
        return vals.reshape(self.nodes.shape)


def sh_analyze(values, grid: SphereGrid = None, L: int = DEFAULT_DEGREE) -> SHExpansion:
    """Project gridded R^3 samples (or a callable on unit vectors) onto the
    real-SH basis by quadrature; exact for band-limited inputs."""
    if grid is None:
        grid = SphereGrid(L)
    if callable(values):
        values = grid.sample(values)
    values = np.asarray(values, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError("samples must live on the analysis grid (under-resolved input?)")
    wv = grid.weights[..., None] * values
    coeffs = np.einsum("tpc,tpb->cb", wv, grid.basis)
    return SHExpansion(grid.L, coeffs)


def sh_synthesize(expansion: SHExpansion, theta, phi) -> np.ndarray:
    """Evaluate the expansion at angles (colatitude theta, azimuth phi)."""
    basis = _real_sph_basis(expansion.max_degree, theta, phi)
    return np.einsum("...b,cb->...c", basis, expansion.coeffs)


def p_int(expansion: SHExpansion) -> SHExpansion:
    """Radial derivative at r = 1 of the interior harmonic extension."""
    k = _degrees(expansion.max_degree)
    return expansion.scale_degrees(k.astype(float))


def p_ext(expansion: SHExpansion) -> SHExpansion:
    """Radial derivative at r = 1 of the decaying exterior harmonic extension."""
    k = _degrees(expansion.max_degree)
    return expansion.scale_degrees(-(k + 1.0))


def dtn_solve(rhs: SHExpansion) -> SHExpansion:
    """Solve (P_ext - P_int) Phi = rhs; divide degree-k slots by -(2k+1)."""
    k = _degrees(rhs.max_degree)
    return rhs.scale_degrees(1.0 / (-(2.0 * k + 1.0)))


def harmonic_extension(expansion: SHExpansion, side: str, r, theta, phi) -> np.ndarray:
    """Evaluate the harmonic extension at radius r and the given angles.

    side "interior" uses r^k (r <= 1); "exterior" uses r^{-(k+1)} (r >= 1),
    the unique extension decaying at infinity.
    """
    r = np.asarray(r, dtype=float)
    k = _degrees(expansion.max_degree)
    if side == "interior":
        if np.any(r > 1.0 + 1e-12):
            raise ValueError("interior extension needs r <= 1")
        radial = r[..., None] ** k
    elif side == "exterior":
        if np.any(r < 1.0 - 1e-12):
            raise ValueError("exterior extension needs r >= 1")
        radial = r[..., None] ** (-(k + 1.0))
    else:
        raise ValueError("side must be 'interior' or 'exterior'")
    basis = _real_sph_basis(expansion.max_degree, theta, phi)
    return np.einsum("...b,cb->...c", radial * basis, expansion.coeffs)


_THETA_EXPANSIONS = {}


def _theta_expansion(L: int) -> SHExpansion:
    # the identity map Theta is exactly degree 1; cache its coefficients
    if L not in _THETA_EXPANSIONS:
        grid = SphereGrid(L)
        _THETA_EXPANSIONS[L] = sh_analyze(grid.nodes, grid)
    return _THETA_EXPANSIONS[L]


def split_theta(expansion: SHExpansion):
    """Split Phi into its Theta-collinear coefficient and orthogonal rest.

    Returns (c, orthogonal) with c = (1/omega_3) int Phi . Theta dtheta and
    orthogonal = Phi - c Theta, whose Theta-projection vanishes.
    """
    L = expansion.max_degree
    theta_exp = _theta_expansion(L)
    # L^2 pairing of orthonormal coefficients equals the sphere integral;
    # int |Theta|^2 = omega_3 is evaluated through the same coefficients so
    # the split is an exact projector in floating point
    denom = float(np.sum(theta_exp.coeffs * theta_exp.coeffs))
    c = float(np.sum(expansion.coeffs * theta_exp.coeffs)) / denom
    return c, expansion - c * theta_exp


@dataclass
class MatchCorrection:
    """Solution of the leading-order matching: per-end boundary corrections
    (outer side Phi, neck side tilde Phi, both Theta-orthogonal) plus the
    scale updates delta_alpha = alpha - alpha* and delta_beta = beta - beta*."""

    phi: list
    phi_tilde: list
    delta_alpha: np.ndarray
    delta_beta: np.ndarray
    residual_norm: float


def match_boundaries(config: Configuration, alpha_star: np.ndarray,
                     discrepancies, gamma: np.ndarray = None) -> MatchCorrection:
    """Solve the linear skeleton of the matching equations.

    discrepancies: per end j, a pair (value_gap, conormal_gap) of
    SHExpansions; the conormal entry is already scaled by rho_*.  The
    orthogonal parts are eliminated per end through the diagonal DtN
    difference; the collinear parts yield the per-end 2x2 systems and one
    global Gamma solve (Gamma must be invertible, i.e. H2 holds; it is
    recomputed from the configuration unless supplied).  The returned
    delta_alpha/delta_beta are corrections relative to alpha_star.
    """
    from .config import gamma_matrix

    alpha_star = np.asarray(alpha_star, dtype=float)
    k = config.k
    if alpha_star.shape != (k,):
        raise ValueError("alpha_star must have one entry per end")
    if len(discrepancies) != k:
        raise ValueError("one discrepancy pair per end required")
    if gamma is None:
        gamma = gamma_matrix(config)
    eps = config.epsilon
    rho = config.rho_star
    n = config.n
    om = omega_n(n)

    phi = []
    phi_tilde = []
    u = np.empty(k)
    w = np.empty(k)
    c1o = []
    c2o = []
    for j, (value_gap, conormal_gap) in enumerate(discrepancies):
        c1, g1o = split_theta(value_gap)
        c2, g2o = split_theta(conormal_gap)
        # collinear 2x2: u + w = c1, (1-n) u + w = c2
        u[j] = (c1 - c2) / n
        w[j] = c1 - u[j]
        # orthogonal elimination
        rhs = g2o - p_int(g1o)
        pj = dtn_solve(rhs)
        phi.append(pj)
        phi_tilde.append(pj - g1o)
        c1o.append(g1o)
        c2o.append(g2o)

    delta_alpha = np.linalg.solve(gamma, om * w / (eps * rho))
    delta_beta = delta_alpha + u * rho ** (n - 1) / eps

    # post-solve residual of all four equation blocks
    resid = 0.0
    w_back = (eps / om) * (gamma @ delta_alpha) * rho
    u_back = eps * (delta_beta - delta_alpha) * rho ** (1 - n)
    for j in range(k):
        r1 = (phi[j] - phi_tilde[j] - c1o[j]).norm()
        r2 = (p_ext(phi[j]) - p_int(phi_tilde[j]) - c2o[j]).norm()
        r3 = abs(u_back[j] + w_back[j] - (u[j] + w[j]))
        r4 = abs((1 - n) * u_back[j] + w_back[j] - ((1 - n) * u[j] + w[j]))
        resid = max(resid, r1, r2, r3, r4)

    return MatchCorrection(
        phi=phi, phi_tilde=phi_tilde, delta_alpha=delta_alpha,
        delta_beta=delta_beta, residual_norm=float(resid),
    )

"""Dimension-generic ambient geometry and a finite-difference engine for
sampled immersions into R^{2n} ~ C^n.

Ambient points are pairs (x, y) of real n-vectors identified with x + iy.
Immersions are sampled on rectangular parameter grids; the first fundamental
form and the mean-curvature vector are obtained from second-order central
differences.  The mean-curvature vector is the normal projection of the
metric-contracted second derivatives,

    H = g^{ij} (d_i d_j X)^perp,

which coincides with g^{ij}(d_i d_j X - Gamma^k_ij d_k X) and is exactly
orthogonal to the FD tangent space by construction.

The sphere chart is the hyperspherical one with mutually orthogonal
coordinate directions: theta_1 .. theta_{n-2} in [0, pi] are polar angles,
theta_{n-1} in [0, 2pi) is the azimuth, and

    Theta = (sin t1 ... sin t_{n-2} cos t_{n-1},
             sin t1 ... sin t_{n-2} sin t_{n-1}, ..., sin t1 cos t2, cos t1).

Chart poles (any polar angle at 0 or pi) are masked, never evaluated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AmbientPoint",
    "ImmersionPatch",
    "check_orthogonal",
    "first_fundamental_form",
    "mean_curvature_field",
    "mean_curvature_vector",
    "sphere_chart",
    "sphere_chart_eval",
]


@dataclass(frozen=True)
class AmbientPoint:
    """A point x + iy of C^n stored as the real pair (x, y)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("real and imaginary parts must be equal-length vectors")
        if x.size < 2:
            raise ValueError("ambient dimension n must be >= 2")

    @property
    def n(self) -> int:
        return self.x.size

    def as_vector(self) -> np.ndarray:
        """Flatten to (x_1..x_n, y_1..y_n)."""
        return np.concatenate([self.x, self.y])

    @staticmethod
    def from_vector(v: np.ndarray) -> "AmbientPoint":
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size % 2:
            raise ValueError("flat ambient vector must have even length")
        n = v.size // 2
        return AmbientPoint(v[:n], v[n:])


def check_orthogonal(M: np.ndarray) -> float:
    """Orthogonality defect max-norm |M^T M - I|; 0 for M in O(n)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    return float(np.max(np.abs(M.T @ M - np.eye(M.shape[0]))))


# ----------------------------------------------------------------------
# Hyperspherical chart
# ----------------------------------------------------------------------

def sphere_chart(angles: np.ndarray, with_jacobian: bool = False):
    """Evaluate Theta(angles) on S^{n-1}, broadcasting over leading axes.

    Parameters
    ----------
    angles : (..., n-1) array
        Chart angles; the last one is the azimuth.
    with_jacobian : bool
        Also return the (..., n, n-1) array of coordinate derivatives
        d Theta / d theta_k.

    The chart satisfies |Theta| = 1 and dTheta/dtheta_j . dTheta/dtheta_k = 0
    for j != k, with |dTheta/dtheta_j| = prod_{i<j} sin theta_i.
    """
    angles = np.asarray(angles, dtype=float)
    m = angles.shape[-1]
    if m < 1:
        raise ValueError("need at least one angle (dimension >= 2)")

    def rec(a):
        # a: (..., m') -> Theta (..., m'+1), J (..., m'+1, m')
        s, c = np.sin(a[..., 0]), np.cos(a[..., 0])
        if a.shape[-1] == 1:
            theta = np.stack([c, s], axis=-1)
            if not with_jacobian:
                return theta, None
            jac = np.stack([-s, c], axis=-1)[..., None]
            return theta, jac
        sub, subj = rec(a[..., 1:])
        theta = np.concatenate([s[..., None] * sub, c[..., None]], axis=-1)
        if not with_jacobian:
            return theta, None
        d_first = np.concatenate([c[..., None] * sub, -s[..., None]], axis=-1)
        d_rest = s[..., None, None] * subj
        zeros = np.zeros(d_rest.shape[:-2] + (1, d_rest.shape[-1]))
        jac = np.concatenate(
            [d_first[..., None], np.concatenate([d_rest, zeros], axis=-2)], axis=-1
        )
        return theta, jac

    theta, jac = rec(angles)
    return (theta, jac) if with_jacobian else theta


def sphere_chart_eval(angles, n: int):
    """Chart point and its n-1 coordinate derivative vectors at one node.

    Returns (Theta, derivatives) with Theta a unit n-vector and derivatives
    a list of n-1 mutually orthogonal vectors.
    """
    if n < 2:
        raise ValueError("sphere chart requires dimension n >= 2")
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.shape != (n - 1,):
        raise ValueError(f"expected {n - 1} angles for S^{n - 1}, got {angles.shape}")
    theta, jac = sphere_chart(angles, with_jacobian=True)
    return theta, [jac[:, k] for k in range(n - 1)]


# ----------------------------------------------------------------------
# Immersion patches and the FD engine
# ----------------------------------------------------------------------

@dataclass
class ImmersionPatch:
    """Immersion samples on a rectangular parameter grid.

    samples has shape dims + (2n,); mask flags usable nodes (poles and
    excluded regions are False).  periodic marks axes with wraparound
    topology (the azimuth); central differences never cross a non-periodic
    boundary, so edge nodes of such axes are simply not evaluable.
    """

    spacings: tuple
    samples: np.ndarray
    mask: np.ndarray = None
    periodic: tuple = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        m = self.samples.ndim - 1
        self.spacings = tuple(float(h) for h in self.spacings)
        if len(self.spacings) != m:
            raise ValueError("one spacing per parameter axis required")
        if any(h <= 0 for h in self.spacings):
            raise ValueError("spacings must be positive")
        if self.samples.shape[-1] % 2:
            raise ValueError("ambient dimension must be even (R^{2n})")
        if self.mask is None:
            self.mask = np.ones(self.samples.shape[:-1], dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.samples.shape[:-1]:
                raise ValueError("mask shape must match the parameter grid")
        if self.periodic is None:
            self.periodic = (False,) * m
        else:
            self.periodic = tuple(bool(p) for p in self.periodic)
            if len(self.periodic) != m:
                raise ValueError("one periodic flag per parameter axis required")

    @property
    def param_dims(self) -> tuple:
        return self.samples.shape[:-1]

    @property
    def m(self) -> int:
        return self.samples.ndim - 1

    @property
    def ambient_dim(self) -> int:
        return self.samples.shape[-1]


def _stencil_valid(mask: np.ndarray, periodic, radius: int = 1) -> np.ndarray:
    """Nodes whose full radius-r hypercube neighborhood is in-grid and masked valid."""
    valid = mask.copy()
    m = mask.ndim
    for off in itertools.product(range(-radius, radius + 1), repeat=m):
        if all(o == 0 for o in off):
            continue
        shifted = mask
        for ax, o in enumerate(off):
            if o:
                shifted = np.roll(shifted, -o, axis=ax)
        valid &= shifted
    for ax in range(m):
        if not periodic[ax]:
            sl = [slice(None)] * m
            sl[ax] = slice(0, radius)
            valid[tuple(sl)] = False
            sl[ax] = slice(-radius, None)
            valid[tuple(sl)] = False
    return valid


def _shift(a: np.ndarray, axis: int, k: int) -> np.ndarray:
    """a evaluated at node index + k along axis (wraparound; validity is
    handled separately by _stencil_valid)."""
    return np.roll(a, -k, axis=axis)


def _fd_first(samples, spacings):
    """Central first differences along every axis: list of arrays dims+(2n,)."""
    return [
        (_shift(samples, a, 1) - _shift(samples, a, -1)) / (2 * spacings[a])
        for a in range(samples.ndim - 1)
    ]


def _fd_second(samples, spacings, a, b):
    if a == b:
        h = spacings[a]
        return (_shift(samples, a, 1) - 2 * samples + _shift(samples, a, -1)) / h**2
    ha, hb = spacings[a], spacings[b]
    pp = _shift(_shift(samples, a, 1), b, 1)
    pm = _shift(_shift(samples, a, 1), b, -1)
    mp = _shift(_shift(samples, a, -1), b, 1)
    mm = _shift(_shift(samples, a, -1), b, -1)
    return (pp - pm - mp + mm) / (4 * ha * hb)


def _mean_curvature_block(samples, spacings):
    """Mean-curvature vectors for every node of a block (boundary wraps are
    garbage; validity is the caller's job).  Returns (H, ok) with ok False
    at nodes whose FD metric is exactly singular or non-finite."""
    m = samples.ndim - 1
    J = np.stack(_fd_first(samples, spacings), axis=-1)  # dims + (2n, m)
    g = np.einsum("...ca,...cb->...ab", J, J)
    det = np.linalg.det(g)
    ok = np.isfinite(det) & (det > 0)
    g = np.where(ok[..., None, None], g, np.eye(m))
    ginv = np.linalg.inv(g)
    W = np.zeros_like(samples)
    for a in range(m):
        for b in range(m):
            coeff = ginv[..., a, b]
            if a == b:
                W += coeff[..., None] * _fd_second(samples, spacings, a, a)
            else:
                W += coeff[..., None] * _fd_second(samples, spacings, a, b)
    # subtract the tangential part: W - J g^{-1} J^T W
    JtW = np.einsum("...ca,...c->...a", J, W)
    coeffs = np.einsum("...ab,...b->...a", ginv, JtW)
    return W - np.einsum("...ca,...a->...c", J, coeffs), ok


def mean_curvature_field(patch: ImmersionPatch, chunk: int = 16):
    """Mean-curvature vector at every evaluable node.

    Returns (H, valid): H has the shape of samples (zero where invalid) and
    valid flags nodes with a complete, in-mask second-order stencil.  Blocks
    along axis 0 keep the working set small on 4-d grids.
    """
    valid = _stencil_valid(patch.mask, patch.periodic)
    H = np.zeros_like(patch.samples)
    n0 = patch.samples.shape[0]
    if patch.m == 1 or patch.periodic[0] or n0 <= chunk + 2:
        H[...], ok = _mean_curvature_block(patch.samples, patch.spacings)
        valid &= ok
    else:
        for lo in range(1, n0 - 1, chunk):
            hi = min(lo + chunk, n0 - 1)
            block = patch.samples[lo - 1 : hi + 1]
            Hb, ok = _mean_curvature_block(block, patch.spacings)
            H[lo:hi] = Hb[1:-1]
            valid[lo:hi] &= ok[1:-1]
    H[~valid] = 0.0
    return H, valid


def _node_block(patch, node, radius=1):
    """Extract the radius-r neighborhood of a node as a small block."""
    idx = []
    for ax, i in enumerate(node):
        size = patch.samples.shape[ax]
        take = np.arange(i - radius, i + radius + 1)
        if patch.periodic[ax]:
            take %= size
        elif take[0] < 0 or take[-1] >= size:
            raise ValueError(f"node {node} lacks a full stencil along axis {ax}")
        idx.append(take)
    block = patch.samples
    submask = patch.mask
    for ax, take in enumerate(idx):
        block = np.take(block, take, axis=ax)
        submask = np.take(submask, take, axis=ax)
    return block, submask


def first_fundamental_form(patch: ImmersionPatch, node) -> np.ndarray:
    """FD first fundamental form g_ij = d_iX . d_jX at one grid node."""
    block, submask = _node_block(patch, tuple(node))
    if not submask.all():
        raise ValueError(f"stencil of node {tuple(node)} hits a masked node")
    J = np.stack(
        [d[(1,) * patch.m] for d in _fd_first(block, patch.spacings)], axis=-1
    )
    g = J.T @ J
    # fail loudly on rank-deficient charts rather than returning garbage
    if np.linalg.matrix_rank(g, tol=1e-10 * max(1.0, float(np.max(np.abs(g))))) < patch.m:
        raise ValueError(f"degenerate FD Jacobian at node {tuple(node)}")
    return g


def mean_curvature_vector(patch: ImmersionPatch, node) -> np.ndarray:
    """FD mean-curvature vector at one grid node (exactly normal to the
    FD tangent vectors)."""
    block, submask = _node_block(patch, tuple(node))
    if not submask.all():
        raise ValueError(f"stencil of node {tuple(node)} hits a masked node")
    H, ok = _mean_curvature_block(block, patch.spacings)
    center = (1,) * patch.m
    if not ok[center]:
        raise ValueError(f"degenerate FD Jacobian at node {tuple(node)}")
    return H[center]

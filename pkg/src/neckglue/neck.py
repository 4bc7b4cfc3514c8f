"""Model neck geometry: the hyperbola-type minimal n-submanifold of C^n,

    X(s, theta) = e^{is} (sin ns)^{-1/n} Theta(theta),   s in (0, pi/n),

its O(n)-twisted variant x + iy -> x + i R y, coordinate changes, the
lower-end asymptotic graph, the five closed-form Jacobi-field families and
the linearized mean-curvature operator in the (s, theta) chart.

Coordinates.  The cylindrical variable t is defined by dt = ds / sin(ns),
t(pi/2n) = 0, equivalently e^{-nt} = sin(ns)/(1 - cos(ns)); then

    sin(ns) = sech(nt),   cos(ns) = -tanh(nt).

The lower-end radius of the neck scaled by (n beta eps)^{1/n} is

    r(s) = (n beta eps)^{1/n} cos(s) (sin ns)^{-1/n},

decreasing from +infinity to its waist minimum on the lower branch.

Linearized operator.  A normal field V = i e^{i(1-n)s} f Theta + i e^{is} T
(f scalar, T tangent to S^{n-1}) is mapped to the pair

    F  = (sin ns)^{2-2/n} d_s((sin ns)^{2/n} d_s f) + Lap_S f - (n-1) f
         + (n^2-1) sin^2(ns) f - 2 cos(ns) div_S T,
    T' = (sin ns)^{2-2/n} d_s((sin ns)^{2/n} d_s T) + Lap^tau_S T - T
         + 3 sin^2(ns) T + 2 cos(ns) grad_S f,

i.e. (sin ns)^{-2/n} L_H V expressed in the same (f, T) splitting.  Sphere
operators are realized by central differences of ambient components plus
tangent projection in the hyperspherical chart; the result is second-order
accurate and annihilates every closed-form Jacobi field at rate h^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import AmbientPoint, ImmersionPatch, check_orthogonal, sphere_chart

__all__ = [
    "NeckParams",
    "NormalField",
    "SphereGridOps",
    "asymptote_residual",
    "jacobi_field",
    "linearized_apply",
    "neck_patch",
    "neck_point",
    "radius_of_s",
    "s_of_radius",
    "s_to_t",
    "t_to_s",
    "waist_radius",
]


@dataclass(frozen=True)
class NeckParams:
    """Scaled, twisted, translated neck: (n beta eps)^{1/n} (cos s Theta,
    sin s R Theta) + translation."""

    n: int
    beta: float
    epsilon: float
    rotation: np.ndarray = None
    translation: AmbientPoint = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("neck dimension n must be >= 2")
        if not (self.beta > 0 and self.epsilon > 0):
            raise ValueError("beta and epsilon must be positive")
        R = np.eye(self.n) if self.rotation is None else np.asarray(self.rotation, float)
        if check_orthogonal(R) > 1e-10:
            raise ValueError("neck rotation is not orthogonal")
        object.__setattr__(self, "rotation", R)
        if self.translation is None:
            zero = np.zeros(self.n)
            object.__setattr__(self, "translation", AmbientPoint(zero, zero))
        elif self.translation.n != self.n:
            raise ValueError("translation dimension mismatch")

    @property
    def scale(self) -> float:
        return (self.n * self.beta * self.epsilon) ** (1.0 / self.n)


# ----------------------------------------------------------------------
# Coordinate changes
# ----------------------------------------------------------------------

def s_to_t(s, n: int):
    """t(s) with e^{-nt} = sin(ns)/(1-cos(ns)), i.e. t = log(tan(ns/2))/n."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s >= math.pi / n):
        raise ValueError("s must lie in (0, pi/n)")
    return np.log(np.tan(n * s / 2.0)) / n


def t_to_s(t, n: int):
    """Inverse of s_to_t: s = (2/n) arctan(e^{nt})."""
    t = np.asarray(t, dtype=float)
    return 2.0 / n * np.arctan(np.exp(n * t))


def radius_profile(s, n: int):
    """Unscaled lower-end radius cos(s) (sin ns)^{-1/n}."""
    s = np.asarray(s, dtype=float)
    return np.cos(s) * np.sin(n * s) ** (-1.0 / n)


def radius_of_s(params: NeckParams, s):
    """Scaled lower-end radius r(s) = (n beta eps)^{1/n} cos s (sin ns)^{-1/n}."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s >= math.pi / params.n):
        raise ValueError("s must lie in (0, pi/n)")
    return params.scale * radius_profile(s, params.n)


def _argmin_radius(n: int) -> float:
    """Golden-section search for the waist location of cos(s)(sin ns)^{-1/n}."""
    lo, hi = 1e-12, math.pi / n - 1e-12
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = radius_profile(c, n), radius_profile(d, n)
    while b - a > 1e-14:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = radius_profile(c, n)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = radius_profile(d, n)
    return 0.5 * (a + b)


def waist_radius(params: NeckParams) -> float:
    """Minimum of r(s): the smallest reachable boundary radius."""
    return float(radius_of_s(params, _argmin_radius(params.n)))


def s_of_radius(params: NeckParams, r_target: float) -> float:
    """Invert r(s) on the lower branch (0, s_min] by bisection.

    Raises when r_target is below the waist minimum: the neck is too large
    for the requested boundary radius.
    """
    n = params.n
    s_min = _argmin_radius(n)
    r_min = float(radius_of_s(params, s_min))
    if r_target < r_min * (1.0 - 1e-12):
        raise ValueError(
            f"neck too large for requested radius: r={r_target:.6g} < waist {r_min:.6g}"
        )
    if r_target <= r_min:
        return float(s_min)
    lo = s_min
    while float(radius_of_s(params, lo)) < r_target:
        lo *= 0.5
    hi = s_min
    # r is strictly decreasing on (0, s_min]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(radius_of_s(params, mid)) > r_target:
            lo = mid
        else:
            hi = mid
        if abs(float(radius_of_s(params, mid)) - r_target) < 1e-13 * r_target:
            break
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# Parametrization
# ----------------------------------------------------------------------

def neck_point(params: NeckParams, s: float, angles) -> AmbientPoint:
    """One sample of the (scaled, twisted, translated) neck."""
    n = params.n
    if not 0.0 < s < math.pi / n:
        raise ValueError("s must lie strictly inside (0, pi/n)")
    theta = sphere_chart(np.asarray(angles, dtype=float))
    rad = params.scale * np.sin(n * s) ** (-1.0 / n)
    x = rad * math.cos(s) * theta + params.translation.x
    y = rad * math.sin(s) * (params.rotation @ theta) + params.translation.y
    return AmbientPoint(x, y)


def _neck_samples(params: NeckParams, s_grid, theta_grid):
    """Vectorized samples over an (s x angles) grid; theta_grid is (..., n)."""
    n = params.n
    s = np.asarray(s_grid, dtype=float).reshape((-1,) + (1,) * theta_grid.ndim)
    rad = params.scale * np.sin(n * s) ** (-1.0 / n)
    x = rad * np.cos(s) * theta_grid[None]
    y = rad * np.sin(s) * (theta_grid @ params.rotation.T)[None]
    x = x + params.translation.x
    y = y + params.translation.y
    return np.concatenate([x, y], axis=-1)


def polar_angle_grid(count: int, margin: float):
    """Uniform open grid of a polar angle on [margin, pi - margin]."""
    return np.linspace(margin, math.pi - margin, count)


def azimuth_grid(count: int):
    """Uniform periodic grid on [0, 2 pi)."""
    return 2.0 * math.pi * np.arange(count) / count


def default_angle_grids(n: int, counts, margin: float = 0.35):
    """Polar grids away from the chart poles plus a full periodic azimuth."""
    counts = list(counts)
    if len(counts) != n - 1:
        raise ValueError("one node count per angle required")
    grids = [polar_angle_grid(c, margin) for c in counts[:-1]]
    grids.append(azimuth_grid(counts[-1]))
    return tuple(grids)


def neck_patch(params: NeckParams, s_grid=None, angle_grids=None,
               t_grid=None) -> ImmersionPatch:
    """ImmersionPatch of the neck over (s or t) x angle_grids.

    Exactly one of s_grid / t_grid must be given; the grid must be uniform
    in its own coordinate.  The t-chart is preferable for truncated necks
    reaching into the ends, where s-derivatives of the immersion blow up
    while t-derivatives stay uniformly moderate.  The azimuth is periodic.
    """
    if (s_grid is None) == (t_grid is None):
        raise ValueError("provide exactly one of s_grid or t_grid")
    if t_grid is not None:
        t_grid = np.asarray(t_grid, dtype=float)
        step = float(t_grid[1] - t_grid[0])
        s_values = t_to_s(t_grid, params.n)
    else:
        s_values = np.asarray(s_grid, dtype=float)
        step = float(s_values[1] - s_values[0])
    angles_mesh = np.stack(np.meshgrid(*angle_grids, indexing="ij"), axis=-1)
    theta = sphere_chart(angles_mesh)
    samples = _neck_samples(params, s_values, theta)
    spacings = [step] + [float(g[1] - g[0]) for g in angle_grids]
    periodic = (False,) + (False,) * (len(angle_grids) - 1) + (True,)
    return ImmersionPatch(spacings=tuple(spacings), samples=samples, periodic=periodic)


def asymptote_residual(params: NeckParams, rho_values, angle_grids):
    """Sup distance between the exact lower end and its leading graph.

    The graph is rho Theta + i eps beta rho^{1-n} R Theta (+ translation);
    the exact point sits at s = s_of_radius(rho).  Returns (sup, per_rho)
    with per_rho the sup over angles at each radius.
    """
    rho_values = np.atleast_1d(np.asarray(rho_values, dtype=float))
    if np.any(rho_values < 2.0 * params.scale):
        raise ValueError("rho too small: enters the waist region (need rho >= 2 (n beta eps)^{1/n})")
    angles_mesh = np.stack(np.meshgrid(*angle_grids, indexing="ij"), axis=-1)
    theta = sphere_chart(angles_mesh)
    rtheta = theta @ params.rotation.T
    per_rho = np.empty(rho_values.size)
    n, eps, beta = params.n, params.epsilon, params.beta
    for i, rho in enumerate(rho_values):
        s = s_of_radius(params, float(rho))
        rad = params.scale * math.sin(n * s) ** (-1.0 / n)
        exact_x = rad * math.cos(s) * theta
        exact_y = rad * math.sin(s) * rtheta
        graph_x = rho * theta
        graph_y = eps * beta * rho ** (1 - n) * rtheta
        gap = np.sqrt(
            np.sum((exact_x - graph_x) ** 2, axis=-1)
            + np.sum((exact_y - graph_y) ** 2, axis=-1)
        )
        per_rho[i] = float(np.max(gap))
    return float(np.max(per_rho)), per_rho


# ----------------------------------------------------------------------
# Sphere operators on an angle grid (FD in ambient components + projection)
# ----------------------------------------------------------------------

class SphereGridOps:
    """Frame, gradients, divergence and Laplacians on an S^{n-1} angle grid.

    Fields are shaped (..., *grid) for scalars and (..., *grid, n) for
    ambient-component tangent fields; derivative axes are the trailing grid
    axes.  The last angle is periodic; polar angles must stay away from the
    chart poles.  Every operator is built from central differences of the
    ambient components followed by tangent projection, matching the
    frame-based definitions grad f = sum (e_j f) e_j, div T = sum (D_j T).e_j,
    Lap f = sum e_j(e_j f) - (nabla_{e_j} e_j) f and the connection Laplacian
    on tangent fields.
    """

    def __init__(self, angle_grids):
        self.angle_grids = tuple(np.asarray(g, dtype=float) for g in angle_grids)
        self.m = len(self.angle_grids)
        self.n = self.m + 1
        self.spacings = tuple(float(g[1] - g[0]) for g in self.angle_grids)
        for g, h in zip(self.angle_grids, self.spacings):
            if not np.allclose(np.diff(g), h, rtol=0, atol=1e-12):
                raise ValueError("angle grids must be uniform")
        self.periodic = (False,) * (self.m - 1) + (True,)
        mesh = np.stack(np.meshgrid(*self.angle_grids, indexing="ij"), axis=-1)
        theta, jac = sphere_chart(mesh, with_jacobian=True)
        self.theta = theta                                  # grid + (n,)
        norms = np.linalg.norm(jac, axis=-2)                # grid + (m,)
        self.norms = norms
        self.frame = jac / norms[..., None, :]              # grid + (n, m)
        # connection coefficients u_j = nabla^tau_{e_j} e_j by FD of the frame
        self.conn = [
            self.project(self.dframe(j)) for j in range(self.m)
        ]

    # -- low-level differences ------------------------------------------------

    def _axis(self, field, j, vector):
        # angle axis j of a (..., *grid) or (..., *grid, n) array
        return field.ndim - self.m - (1 if vector else 0) + j

    def _cdiff(self, field, j, vector):
        ax = self._axis(field, j, vector)
        h = self.spacings[j]
        return (np.roll(field, -1, axis=ax) - np.roll(field, 1, axis=ax)) / (2 * h)

    def d(self, field, j, vector=False):
        """Unit-speed derivative along the j-th frame direction."""
        norm = self.norms[..., j]
        if vector:
            norm = norm[..., None]
        return self._cdiff(field, j, vector) / norm

    def dframe(self, j):
        # frame fields are known in closed form on the grid; differentiate
        # them the same way as sampled data
        ej = self.frame[..., :, j]
        return self._cdiff(ej, j, vector=True) / self.norms[..., j][..., None]

    def project(self, v):
        """Tangential projection v - (v.Theta) Theta."""
        return v - np.sum(v * self.theta, axis=-1, keepdims=True) * self.theta

    # -- first order -----------------------------------------------------------

    def grad(self, f):
        out = 0.0
        for j in range(self.m):
            out = out + self.d(f, j)[..., None] * self.frame[..., :, j]
        return out

    def div(self, T):
        out = 0.0
        for j in range(self.m):
            out = out + np.sum(self.d(T, j, vector=True) * self.frame[..., :, j], axis=-1)
        return out

    def directional(self, T, u):
        """Projected derivative of T along the tangent vector field u."""
        out = 0.0
        for k in range(self.m):
            coeff = np.sum(u * self.frame[..., :, k], axis=-1)
            out = out + coeff[..., None] * self.d(T, k, vector=True)
        return self.project(out)

    # -- second order ----------------------------------------------------------

    def laplacian(self, f):
        out = 0.0
        g = self.grad(f)
        for j in range(self.m):
            out = out + self.d(self.d(f, j), j)
            out = out - np.sum(self.conn[j] * g, axis=-1)
        return out

    def connection_laplacian(self, T):
        out = 0.0
        for j in range(self.m):
            W = self.project(self.d(T, j, vector=True))
            out = out + self.project(self.d(W, j, vector=True))
            out = out - self.directional(T, self.conn[j])
        return out

    def interior_valid(self, layers: int) -> np.ndarray:
        """Grid mask of nodes at least `layers` nodes away from non-periodic edges."""
        valid = np.ones(self.theta.shape[:-1], dtype=bool)
        for j in range(self.m):
            if not self.periodic[j]:
                sl = [slice(None)] * self.m
                sl[j] = slice(0, layers)
                valid[tuple(sl)] = False
                sl[j] = slice(valid.shape[j] - layers, None)
                valid[tuple(sl)] = False
        return valid


# ----------------------------------------------------------------------
# Normal fields and Jacobi fields
# ----------------------------------------------------------------------

@dataclass
class NormalField:
    """Normal field V = i e^{i(1-n)s} f Theta + i e^{is} T on an s x angles grid."""

    n: int
    s: np.ndarray            # (Ns,)
    angle_grids: tuple
    f: np.ndarray            # (Ns, *grid)
    T: np.ndarray            # (Ns, *grid, n)
    valid: np.ndarray = None  # (Ns, *grid)

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(self.f.shape, dtype=bool)


def jacobi_field(kind: str, n: int, s_grid, angle_grids, *,
                 a=None, alpha: float = 0.0, delta: float = None,
                 A=None) -> NormalField:
    """Sample one of the closed-form Jacobi-field families as an (f, T) pair.

    kind:
      "translation"  needs a (n-vector) and phase alpha:
                     f = sin((n-1)s + alpha) (a.Theta),
                     T = sin(alpha - s) (a - (a.Theta) Theta)
      "dilation"     needs delta:  f = delta (sin ns)^{1-1/n}, T = 0
      "su"           needs symmetric A:
                     f = (sin ns)^{-1/n} cos(ns) (A Theta . Theta),
                     T = (sin ns)^{-1/n} (A Theta - (A Theta . Theta) Theta)
      "o2n_rot"      needs antisymmetric A: T = (sin ns)^{-1/n} sin(2s) A Theta
      "o2n_boost"    needs antisymmetric A: T = (sin ns)^{-1/n} cos(2s) A Theta
    """
    s = np.asarray(s_grid, dtype=float)
    mesh = np.stack(np.meshgrid(*angle_grids, indexing="ij"), axis=-1)
    theta = sphere_chart(mesh)            # grid + (n,)
    grid_shape = theta.shape[:-1]
    Ns = s.size
    s_col = s.reshape((Ns,) + (1,) * len(grid_shape))
    sin_ns = np.sin(n * s_col)

    f = np.zeros((Ns,) + grid_shape)
    T = np.zeros((Ns,) + grid_shape + (n,))

    if kind == "translation":
        a = np.asarray(a, dtype=float)
        if a.shape != (n,):
            raise ValueError("translation requires an n-vector a")
        adot = theta @ a
        tang = a - adot[..., None] * theta
        f = np.sin((n - 1) * s_col + alpha) * adot[None]
        T = np.sin(alpha - s_col)[..., None] * tang[None]
    elif kind == "dilation":
        if delta is None:
            raise ValueError("dilation requires delta")
        f = delta * sin_ns ** (1.0 - 1.0 / n) * np.ones((1,) + grid_shape)
    elif kind == "su":
        A = np.asarray(A, dtype=float)
        if np.max(np.abs(A - A.T)) > 1e-10:
            raise ValueError("su family requires a symmetric matrix")
        atheta = theta @ A.T
        quad = np.sum(atheta * theta, axis=-1)
        f = sin_ns ** (-1.0 / n) * np.cos(n * s_col) * quad[None]
        T = sin_ns[..., None] ** (-1.0 / n) * (atheta - quad[..., None] * theta)[None]
    elif kind in ("o2n_rot", "o2n_boost"):
        A = np.asarray(A, dtype=float)
        if np.max(np.abs(A + A.T)) > 1e-10:
            raise ValueError(f"{kind} family requires an antisymmetric matrix")
        atheta = theta @ A.T
        rad = np.sin(2 * s_col) if kind == "o2n_rot" else np.cos(2 * s_col)
        T = sin_ns[..., None] ** (-1.0 / n) * rad[..., None] * atheta[None]
    else:
        raise ValueError(f"unknown Jacobi family {kind!r}")

    return NormalField(n=n, s=s, angle_grids=tuple(angle_grids), f=f, T=T)


def linearized_apply(field: NormalField, n: int = None) -> NormalField:
    """Apply the (s, theta)-chart linearized mean-curvature operator.

    Returns the (f, T) components of (sin ns)^{-2/n} L_H V sampled on the
    grid; valid nodes lose two layers along s and each polar angle.  Closed-
    form Jacobi fields are annihilated to O(h^2).
    """
    if n is None:
        n = field.n
    ops = SphereGridOps(field.angle_grids)
    s = field.s
    if s.size < 5:
        raise ValueError("s grid too coarse for nested second differences")
    hs = float(s[1] - s[0])
    if not np.allclose(np.diff(s), hs, rtol=0, atol=1e-12):
        raise ValueError("s grid must be uniform")
    grid_rank = len(field.angle_grids)
    s_col = s.reshape((s.size,) + (1,) * grid_rank)
    sin_ns = np.sin(n * s_col)
    cos_ns = np.cos(n * s_col)

    def ds(arr):
        return (np.roll(arr, -1, axis=0) - np.roll(arr, 1, axis=0)) / (2 * hs)

    def sturm(arr, weight):
        # (sin ns)^{2-2/n} d_s( (sin ns)^{2/n} d_s arr )
        inner = weight * ds(arr)
        return sin_ns ** (2.0 - 2.0 / n) * ds(inner) if arr.ndim == 1 + grid_rank \
            else sin_ns[..., None] ** (2.0 - 2.0 / n) * ds(inner)

    w_f = sin_ns ** (2.0 / n)
    w_T = sin_ns[..., None] ** (2.0 / n)

    F = (
        sturm(field.f, w_f)
        + ops.laplacian(field.f)
        - (n - 1) * field.f
        + (n * n - 1) * sin_ns**2 * field.f
        - 2.0 * cos_ns * ops.div(field.T)
    )
    TT = (
        sturm(field.T, w_T)
        + ops.connection_laplacian(field.T)
        - field.T
        + 3.0 * sin_ns[..., None] ** 2 * field.T
        + 2.0 * cos_ns[..., None] * ops.grad(field.f)
    )

    valid = np.zeros(field.f.shape, dtype=bool)
    interior = ops.interior_valid(2)
    valid[2:-2] = interior[None]
    valid &= field.valid
    return NormalField(n=n, s=s, angle_grids=field.angle_grids, f=F, T=TT, valid=valid)

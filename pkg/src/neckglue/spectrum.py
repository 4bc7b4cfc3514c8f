"""Mode-reduced spectral theory of the conjugated linearized operator on the
neck cylinder R x S^{n-1}.

Separating a normal field over sphere eigendata reduces the conjugated
operator to scalar ODE systems in the cylindrical variable t.  With
K = k(n-2+k) the exact-mode system for k >= 1 reads

    a'' = (K + n^2/4) a + 2 K tanh(nt) b - (3n^2/4) sech^2(nt) a
    b'' = (K + (n-4)^2/4) b + 2 tanh(nt) a - ((16-n^2)/4) sech^2(nt) b,

for k = 0 only the scalar equation  a'' = (n^2/4) a - (3n^2/4) sech^2(nt) a
remains, solved exactly by f_0(t) = (cosh nt)^{-1/2}, and the coexact modes
(k >= 1) obey  a'' = ((n-2)/2 + k)^2 a - ((16-n^2)/4) sech^2(nt) a.

Freezing tanh -> +-1, sech -> 0 at the cylinder ends yields constant
coefficients whose characteristic exponents are the indicial roots

    gamma_k = +-((n-2)/2 + k)   (coexact),
    mu_k    = +-(n/2 + k),  nu_k = +-((n-4)/2 + k)   (exact, k >= 1),
    mu_0    = +-n/2.

The t -> -infinity frozen system restricted to the first exact eigenspace
is constant-coefficient and solves in closed form with decay rates
(n+2)/2 along the direction (n-1, -1) and (n-2)/2 along (1, 1); the
boundary-value coefficients are n A = a0 - b0, n B = a0 + (n-1) b0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .neck import t_to_s

__all__ = [
    "IndicialTable",
    "ModeSolution",
    "decay_rate",
    "explicit_n3_residual",
    "explicit_n3_solution",
    "exterior_mode_solve",
    "frozen_characteristic_roots",
    "indicial_roots",
    "integrate_mode_system",
    "mode_system_matrix",
    "verify_f0",
]

RK_TOLERANCE = 1e-10
RK_MAX_STEP = 1e-2
BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class IndicialTable:
    """Exact indicial roots for sphere-eigenvalue index k (Fractions)."""

    n: int
    k: int
    coexact: tuple      # (gamma_k^+, gamma_k^-); None for k = 0
    exact_mu: tuple     # (mu_k^+, mu_k^-)
    exact_nu: tuple     # (nu_k^+, nu_k^-); None for k = 0


def indicial_roots(n: int, k: int, family: str = "all") -> IndicialTable:
    """Closed-form indicial roots; the coexact family starts at k = 1."""
    if n < 2 or k < 0:
        raise ValueError("need n >= 2 and k >= 0")
    if family == "coexact" and k == 0:
        raise ValueError("coexact spectrum starts at k = 1; no k = 0 coexact roots")
    mu = Fraction(n, 2) + k
    if k == 0:
        return IndicialTable(n=n, k=0, coexact=None, exact_mu=(mu, -mu), exact_nu=None)
    gamma = Fraction(n - 2, 2) + k
    nu = Fraction(n - 4, 2) + k
    return IndicialTable(
        n=n, k=k, coexact=(gamma, -gamma), exact_mu=(mu, -mu), exact_nu=(nu, -nu)
    )


# ----------------------------------------------------------------------
# Per-mode systems
# ----------------------------------------------------------------------

def mode_system_matrix(n: int, k: int, t: float, kind: str = "interior",
                       family: str = "exact") -> np.ndarray:
    """Coefficient matrix M(t) of the second-order system z'' = M(t) z.

    kind "interior" uses the tanh/sech coefficients of the conjugated
    operator; "asymptotic" freezes them at t -> -infinity (tanh -> -1,
    sech -> 0), the constant-coefficient comparison operator.
    """
    if kind not in ("interior", "asymptotic"):
        raise ValueError("kind must be 'interior' or 'asymptotic'")
    if family not in ("exact", "coexact"):
        raise ValueError("family must be 'exact' or 'coexact'")
    if kind == "interior":
        th = math.tanh(n * t)
        sech2 = 1.0 / math.cosh(n * t) ** 2
    else:
        th, sech2 = -1.0, 0.0

    if family == "coexact":
        if k < 1:
            raise ValueError("coexact modes require k >= 1")
        return np.array([[((n - 2) / 2.0 + k) ** 2 - (16 - n * n) / 4.0 * sech2]])

    if k == 0:
        return np.array([[n * n / 4.0 - 3.0 * n * n / 4.0 * sech2]])
    K = k * (n - 2 + k)
    return np.array(
        [
            [K + n * n / 4.0 - 3.0 * n * n / 4.0 * sech2, 2.0 * K * th],
            [2.0 * th, K + (n - 4) ** 2 / 4.0 - (16 - n * n) / 4.0 * sech2],
        ]
    )


def frozen_characteristic_roots(n: int, k: int, side: int = -1,
                                family: str = "exact") -> np.ndarray:
    """Sorted characteristic exponents of the system frozen at t -> side*inf.

    Built from the same coefficient routine the integrator uses, evaluated
    at |t| = 20 where tanh is exactly +-1 and sech^2 underflows; the
    eigenvalues of the first-order companion matrix are the indicial roots.
    """
    if side not in (-1, 1):
        raise ValueError("side must be -1 or +1")
    M = mode_system_matrix(n, k, side * 20.0, kind="interior", family=family)
    d = M.shape[0]
    comp = np.zeros((2 * d, 2 * d))
    comp[:d, d:] = np.eye(d)
    comp[d:, :d] = M
    roots = np.linalg.eigvals(comp)
    return np.sort_complex(roots).real if np.allclose(roots.imag, 0, atol=1e-10) \
        else np.sort_complex(roots)


@dataclass
class ModeSolution:
    """Sampled (a, b) mode amplitudes along the cylinder."""

    n: int
    k: int
    kind: str
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray = None  # absent for scalar modes


def integrate_mode_system(n: int, k: int, kind: str, initial, t_span,
                          num: int = 801, family: str = "exact") -> ModeSolution:
    """Adaptive RK (DOP853, tol 1e-10) solution of the per-mode system.

    initial is (a0, da0) for scalar modes and (a0, b0, da0, db0) for the
    coupled ones.  Raises on blow-up past 1e12 with the location.
    """
    initial = np.asarray(initial, dtype=float)
    scalar = (family == "coexact") or (k == 0)
    d = 1 if scalar else 2
    if initial.shape != (2 * d,):
        raise ValueError(f"initial data must have length {2 * d}")

    def rhs(t, z):
        M = mode_system_matrix(n, k, t, kind=kind, family=family)
        return np.concatenate([z[d:], M @ z[:d]])

    def blown(t, z):
        return np.sum(np.abs(z[:d])) - BLOWUP_LIMIT

    blown.terminal = True
    t_eval = np.linspace(t_span[0], t_span[1], num)
    sol = solve_ivp(
        rhs, t_span, initial, method="DOP853", t_eval=t_eval,
        rtol=RK_TOLERANCE, atol=RK_TOLERANCE, max_step=RK_MAX_STEP, events=blown,
    )
    if sol.status == 1:
        raise ValueError(f"mode solution blew up past {BLOWUP_LIMIT:g} at t = {sol.t_events[0][0]:.4f}")
    if not sol.success:
        raise RuntimeError(f"mode integration failed: {sol.message}")
    a = sol.y[0]
    b = None if scalar else sol.y[1]
    return ModeSolution(n=n, k=k, kind=kind, t=sol.t, a=a, b=b)


# ----------------------------------------------------------------------
# Explicit objects
# ----------------------------------------------------------------------

def f0_profile(n: int, t):
    """The exact k = 0 kernel element f_0(t) = (cosh nt)^{-1/2}."""
    t = np.asarray(t, dtype=float)
    return np.cosh(n * t) ** (-0.5)


def f0_second_derivative(n: int, t):
    """Closed-form f_0'' = (n^2/4) (cosh nt)^{-1/2} - (3n^2/4) (cosh nt)^{-5/2}."""
    t = np.asarray(t, dtype=float)
    c = np.cosh(n * t)
    return n * n / 4.0 * c ** (-0.5) - 3.0 * n * n / 4.0 * c ** (-2.5)


def verify_f0(n: int, t_grid) -> float:
    """Sup residual of f_0 in the k = 0 equation with analytic derivatives."""
    t = np.asarray(t_grid, dtype=float)
    f = f0_profile(n, t)
    resid = f0_second_derivative(n, t) - n * n / 4.0 * f \
        + 3.0 * n * n / 4.0 * f / np.cosh(n * t) ** 2
    return float(np.max(np.abs(resid)))


def explicit_n3_solution(t):
    """The exact (a_1, b_1) solution of the n = 3, k = 1 system:

        a_1 = (sin 3s)^{-1/6} (sin 3s cos s - sin s cos 3s),
        b_1 = -(sin 3s)^{-1/6} sin s,          s = s(t).

    Evaluated through sin(3s) = sech(3t), cos(3s) = -tanh(3t); the direct
    route through s loses all relative precision in sin(3s) once 3s is
    within float epsilon of pi.
    """
    t = np.asarray(t, dtype=float)
    s = t_to_s(t, 3)
    w = np.cosh(3 * t) ** (1.0 / 6.0)
    a = w * (np.cos(s) / np.cosh(3 * t) + np.tanh(3 * t) * np.sin(s))
    b = -w * np.sin(s)
    return a, b


def explicit_n3_residual(t_grid, h: float = 1e-3) -> float:
    """Sup residual of (a_1, b_1) in the n = 3, k = 1 system under 5-point
    FD second derivatives at step h.

    Evaluated in extended precision: at h = 1e-3 the stencil amplifies
    float64 rounding past the 1e-8 scale, while the truncation error itself
    is O(h^4) ~ 1e-10.
    """
    ld = np.longdouble
    t = np.asarray(t_grid, dtype=ld)
    hh = ld(h)

    def pair(tt):
        s = ld(2) / ld(3) * np.arctan(np.exp(3 * tt))
        w = np.cosh(3 * tt) ** (ld(1) / ld(6))
        return (w * (np.cos(s) / np.cosh(3 * tt) + np.tanh(3 * tt) * np.sin(s)),
                -w * np.sin(s))

    vals = [pair(t + k * hh) for k in (-2, -1, 0, 1, 2)]
    stencil = np.array([-1, 16, -30, 16, -1], dtype=ld) / (12 * hh * hh)
    app = sum(c * v[0] for c, v in zip(stencil, vals))
    bpp = sum(c * v[1] for c, v in zip(stencil, vals))
    a, b = vals[2]
    th = np.tanh(3 * t)
    sech2 = 1 / np.cosh(3 * t) ** 2
    Ma = (2 + ld(9) / 4) * a + 4 * th * b - ld(27) / 4 * a * sech2
    Mb = (2 + ld(1) / 4) * b + 2 * th * a - ld(7) / 4 * b * sech2
    return float(max(np.max(np.abs(app - Ma)), np.max(np.abs(bpp - Mb))))


def exterior_mode_solve(n: int, a0: float, b0: float):
    """Decaying closed-form solution of the frozen system on the first exact
    eigenspace, as (A, B, rates, directions) with

        a(tau) = (n-1) A e^{-(n+2)/2 tau} + B e^{-(n-2)/2 tau},
        b(tau) =   -   A e^{-(n+2)/2 tau} + B e^{-(n-2)/2 tau},

    n A = a0 - b0 and n B = a0 + (n-1) b0, so a(0) = a0 and b(0) = b0.
    """
    if n < 3:
        raise ValueError("the exterior decaying family requires n >= 3")
    A = (a0 - b0) / n
    B = (a0 + (n - 1) * b0) / n
    rates = (-(n + 2) / 2.0, -(n - 2) / 2.0)
    directions = (np.array([n - 1.0, -1.0]), np.array([1.0, 1.0]))

    def evaluate(tau):
        tau = np.asarray(tau, dtype=float)
        fast = np.exp(rates[0] * tau)
        slow = np.exp(rates[1] * tau)
        return (n - 1) * A * fast + B * slow, -A * fast + B * slow

    return A, B, rates, directions, evaluate


# ----------------------------------------------------------------------
# Decay-rate fitting
# ----------------------------------------------------------------------

def decay_rate(solution: ModeSolution, end: int, window_frac: float = 1.0 / 3.0,
               min_points: int = 50):
    """Least-squares slope of log(|a|+|b|) against t over the outer window.

    end = -1 fits toward the left end of the grid, +1 toward the right.
    Returns (slope, r_squared).  Raises when the magnitude vanishes on the
    whole window.
    """
    if end not in (-1, 1):
        raise ValueError("end must be -1 or +1")
    mag = np.abs(solution.a)
    if solution.b is not None:
        mag = mag + np.abs(solution.b)
    npts = max(min_points, int(round(window_frac * solution.t.size)))
    npts = min(npts, solution.t.size)
    sl = slice(0, npts) if end == -1 else slice(-npts, None)
    t = solution.t[sl]
    m = mag[sl]
    if np.all(m <= 0) or np.any(~np.isfinite(np.log(m[m > 0]))):
        raise ValueError("magnitude vanishes or is non-finite on the fit window")
    keep = m > 0
    if keep.sum() < 2:
        raise ValueError("not enough positive samples in the fit window")
    t, logm = t[keep], np.log(m[keep])
    coeffs = np.polyfit(t, logm, 1)
    slope = float(coeffs[0])
    pred = np.polyval(coeffs, t)
    ss_res = float(np.sum((logm - pred) ** 2))
    ss_tot = float(np.sum((logm - logm.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2

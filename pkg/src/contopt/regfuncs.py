"""Nonsmooth projections and their C^1 regularizations.

Two families of scalar/vector functions drive every contact formulation in
this package:

* the positive-part function and its smoothed variant (normal contact), and
* the projection onto a ball of radius ``alpha`` and its smoothed variant
  (tangential / friction terms).

Each nonsmooth function comes with a generalized (Newton) derivative used by
the semismooth solvers, a directional derivative used by the sensitivity
machinery, and a C^1 regularization (parameter ``c``) with exact partial
derivatives used by the classical-Newton solver.

All functions are pure, total on their stated domains, and vectorized:
scalar arguments may be numpy arrays, vector arguments are arrays of shape
``(..., 2)``.  Piecewise branches use half-open intervals with the upper
branch owning each breakpoint; every function is continuous across its
breakpoints so the choice is immaterial.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "positive_part",
    "positive_part_dir",
    "heaviside",
    "ball_project",
    "ball_project_dir",
    "ball_project_gen_deriv",
    "smooth_positive_part",
    "smooth_positive_part_antideriv",
    "smooth_heaviside",
    "bridge_poly",
    "bridge_poly_antideriv",
    "smooth_ball_project",
    "smooth_ball_energy",
    "smooth_ball_project_dradius",
    "smooth_ball_project_jacobian",
]

_EPS = 1e-300  # guards 0/0 in radial directions; branch masks make it inert


# ---------------------------------------------------------------------------
# positive part family
# ---------------------------------------------------------------------------

def positive_part(x):
    """max(0, x), the projection of R onto R+."""
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def positive_part_dir(u, v):
    """Directional derivative of the positive part at u in direction v.

    Three branches: 0 for u < 0, max(0, v) at u = 0, v for u > 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.where(u > 0, v, np.where(u == 0, np.maximum(v, 0.0), 0.0))


def heaviside(x):
    """Generalized derivative of the positive part: 0 for x <= 0, else 1."""
    return (np.asarray(x, dtype=float) > 0).astype(float)


# ---------------------------------------------------------------------------
# ball projection family
# ---------------------------------------------------------------------------

def _norm(z):
    return np.linalg.norm(z, axis=-1)


def ball_project(alpha, z):
    """Projection of z onto the closed ball of radius alpha (alpha >= 0)."""
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    scale = np.where(nz <= alpha, 1.0, alpha / np.maximum(nz, _EPS))
    return z * scale[..., None]


def ball_project_dir(alpha, z, beta, h):
    """Directional derivative of (alpha, z) -> ball_project(alpha, z).

    Direction (beta, h).  Inside the ball it is h; on the sphere it involves
    the positive part of the outward component; outside it is the tangential
    part scaled by alpha/|z| plus the radial change beta.
    """
    z = np.asarray(z, dtype=float)
    h = np.asarray(h, dtype=float)
    beta = np.asarray(beta, dtype=float)
    nz = _norm(z)
    zhat = z / np.maximum(nz, _EPS)[..., None]
    radial_h = np.sum(zhat * h, axis=-1)

    on = h - positive_part(radial_h - beta)[..., None] * zhat
    out = (alpha / np.maximum(nz, _EPS))[..., None] * (
        h - radial_h[..., None] * zhat
    ) + beta[..., None] * zhat

    inside = (nz < alpha)[..., None]
    sphere = (nz == alpha)[..., None]
    return np.where(inside, h, np.where(sphere, on, out))


def ball_project_gen_deriv(alpha, z):
    """Generalized derivative of ball_project(alpha, .) as a (..., 2, 2) array.

    Identity where |z| <= alpha, else (alpha/|z|) (I - zhat zhat^T); positive
    semidefinite everywhere.
    """
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    eye = np.broadcast_to(np.eye(2), z.shape + (2,))
    zhat = z / np.maximum(nz, _EPS)[..., None]
    proj = eye - zhat[..., :, None] * zhat[..., None, :]
    out = (alpha / np.maximum(nz, _EPS))[..., None, None] * proj
    stick = (nz <= alpha)[..., None, None]
    return np.where(stick, eye, out)


# ---------------------------------------------------------------------------
# smoothed positive part (parameter c > 0)
# ---------------------------------------------------------------------------

def smooth_positive_part(c, x):
    """C^1 approximation of the positive part.

    Quadratic cx^2/2 on [0, 1/c), then x - 1/(2c); zero for x < 0.  The sup
    distance to the positive part is 1/(2c), attained on x >= 1/c.
    """
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    x = np.asarray(x, dtype=float)
    mid = 0.5 * c * x * x
    hi = x - 0.5 / c
    return np.where(x >= 1.0 / c, hi, np.where(x >= 0.0, mid, 0.0))


def smooth_positive_part_antideriv(c, x):
    """Antiderivative of smooth_positive_part vanishing at 0 (convex, >= 0)."""
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    x = np.asarray(x, dtype=float)
    mid = c * x ** 3 / 6.0
    hi = 0.5 * x * x - 0.5 * x / c + 1.0 / (6.0 * c * c)
    return np.where(x >= 1.0 / c, hi, np.where(x >= 0.0, mid, 0.0))


def smooth_heaviside(c, x):
    """Derivative of smooth_positive_part: a ramp from 0 to 1 on [0, 1/c]."""
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    x = np.asarray(x, dtype=float)
    return np.where(x >= 1.0 / c, 1.0, np.where(x >= 0.0, c * x, 0.0))


# ---------------------------------------------------------------------------
# smoothed ball projection (parameters c, alpha with c * alpha > 1)
# ---------------------------------------------------------------------------

def bridge_poly(c, t):
    """Quadratic bridge -(c/4)t^2 + t/2 - 1/(4c) joining the two outer branches.

    Satisfies value -1/c and slope 1 at t = -1/c, value and slope 0 at
    t = +1/c, and stays in [-1/c, 0] on that interval.
    """
    t = np.asarray(t, dtype=float)
    return -(c / 4.0) * t * t + 0.5 * t - 1.0 / (4.0 * c)


def _bridge_poly_slope(c, t):
    t = np.asarray(t, dtype=float)
    return -(c / 2.0) * t + 0.5


def bridge_poly_antideriv(c, t):
    """Antiderivative of the bridge polynomial.

    The integration constant is fixed so the smoothed friction energy is
    continuous at both branch points: value 1/(2c^2) at t = -1/c, hence
    -1/(12c^2) at 0 and -1/(6c^2) at t = +1/c.
    """
    t = np.asarray(t, dtype=float)
    return (-(c / 12.0) * t ** 3 + 0.25 * t * t - 0.25 * t / c
            - 1.0 / (12.0 * c * c))


def _check_c_alpha(c, alpha):
    if np.any(np.asarray(alpha) * c <= 1.0):
        raise ValueError(
            "smoothed ball projection needs c * alpha > 1 "
            f"(got c={c}, alpha={alpha})"
        )


def smooth_ball_project(c, alpha, z):
    """C^1 approximation of the projection onto the ball of radius alpha.

    Identity for |z| <= alpha - 1/c, radial clamp alpha zhat for
    |z| >= alpha + 1/c, and the bridge polynomial in between.  Requires
    c * alpha > 1.  Sup distance to the exact projection is at most 2/c.
    """
    _check_c_alpha(c, alpha)
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    zhat = z / np.maximum(nz, _EPS)[..., None]
    mid = (alpha + bridge_poly(c, nz - alpha))[..., None] * zhat
    out = alpha * zhat
    lo = (nz <= alpha - 1.0 / c)[..., None]
    hi = (nz >= alpha + 1.0 / c)[..., None]
    return np.where(lo, z, np.where(hi, out, mid))


def smooth_ball_energy(c, eps, alpha, z):
    """Antiderivative of smooth_ball_project(c, alpha, .)/eps vanishing at 0.

    With alpha the friction bound in displacement units (eps * F * s in
    context), this is the smoothed sliding-energy density: quadratic up to
    |z| = alpha - 1/c, affine-in-|z| beyond alpha + 1/c, bridged in between
    so that the function is C^2 and convex.
    """
    _check_c_alpha(c, alpha)
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    lo = 0.5 * nz * nz
    mid = alpha * nz + bridge_poly_antideriv(c, nz - alpha) - 0.5 * alpha ** 2
    hi = alpha * nz - 0.5 * alpha ** 2 - 1.0 / (6.0 * c * c)
    val = np.where(nz <= alpha - 1.0 / c, lo,
                   np.where(nz >= alpha + 1.0 / c, hi, mid))
    return val / eps


def smooth_ball_project_dradius(c, alpha, z):
    """Partial derivative of smooth_ball_project with respect to alpha.

    Zero inside, zhat outside, [1 - P'(|z| - alpha)] zhat on the bridge;
    continuous, with norm at most 1.
    """
    _check_c_alpha(c, alpha)
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    zhat = z / np.maximum(nz, _EPS)[..., None]
    mid = (1.0 - _bridge_poly_slope(c, nz - alpha))[..., None] * zhat
    lo = (nz <= alpha - 1.0 / c)[..., None]
    hi = (nz >= alpha + 1.0 / c)[..., None]
    return np.where(lo, np.zeros_like(z), np.where(hi, zhat, mid))


def smooth_ball_project_jacobian(c, alpha, z):
    """Jacobian of smooth_ball_project(c, alpha, .) as a (..., 2, 2) array.

    Continuous across the branch boundaries, positive semidefinite, with
    operator norm at most 3.
    """
    _check_c_alpha(c, alpha)
    z = np.asarray(z, dtype=float)
    nz = _norm(z)
    eye = np.broadcast_to(np.eye(2), z.shape + (2,)).copy()
    zhat = z / np.maximum(nz, _EPS)[..., None]
    rad = zhat[..., :, None] * zhat[..., None, :]
    tang = eye - rad

    nz_safe = np.maximum(nz, _EPS)
    mid = (_bridge_poly_slope(c, nz - alpha)[..., None, None] * rad
           + ((alpha + bridge_poly(c, nz - alpha)) / nz_safe)[..., None, None]
           * tang)
    out = (alpha / nz_safe)[..., None, None] * tang

    lo = (nz <= alpha - 1.0 / c)[..., None, None]
    hi = (nz >= alpha + 1.0 / c)[..., None, None]
    return np.where(lo, eye, np.where(hi, out, mid))

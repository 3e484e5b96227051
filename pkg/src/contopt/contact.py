"""Contact with a rigid obstacle: penalty and multiplier-form solvers.

Both the penalized problem and the augmented-Lagrangian subproblem share one
boundary law

    a(u, v) + (pos(lam0 + g1 (u_nu - gap)), v_nu)_GC
            + (ball_project(F s, mu0 + g2 u_t), v_t)_GC  =  L(v),

the penalty case being lam0 = mu0 = 0 with g1 = g2 = 1/eps (the two residual
forms then agree identically by positive homogeneity of the projections).
The nonsmooth system is solved by a damped semismooth Newton method whose
tangent uses the generalized derivatives of the projections; the residual is
the gradient of a strictly convex energy and every tangent is positive
definite, so half-step damping on the energy globalizes the iteration.

Default warm start.  Plain Newton from the elasticity solution stalls on
stiff data: with g1 huge the normal active set chatters, and when the
friction bound is comparable to the slip scale the stick window
|u_t| <= Fs/g2 is orders of magnitude below the Newton step size, so the
stick/slip pattern never locks.  The default initial guess therefore (a)
continues the normal stiffness g1 up from a moderate value, and (b) solves
the tangential term through its exact mixed (Fenchel-dual) form, ramping a
proximal stiffness toward g2 while updating the auxiliary traction; both
phases solve the same formulation and converge to its exact solution.  The
reported NewtonReport covers the final semismooth solve at the stated
parameters.  Passing an explicit ``u0`` bypasses the warm start.

The C^1-regularized variant replaces the projections by their smoothed
versions (parameter c) and runs a classical Newton with the exact Jacobian.
Solver state is confined to one call; independent solves may run
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem, regfuncs as rf
from .meshing import CONTACT

__all__ = [
    "RigidBody",
    "ContactProblem",
    "BoundaryLaw",
    "NewtonReport",
    "residual",
    "tangent",
    "solve_elasticity",
    "solve_semismooth",
    "solve_regularized",
    "diagnostics",
    "energy",
]


class RigidBody:
    """Rigid obstacle described by its gap and inward normal fields.

    The gap is the oriented distance to the body (positive outside), the
    normal points into the body, and grad(gap) = -normal.  Shape
    perturbations see gap' = -theta . normal and normal' = (grad normal)
    theta.
    """

    def __init__(self, kind, **params):
        self.kind = kind
        self.params = params

    @classmethod
    def disk(cls, center, radius):
        if radius <= 0:
            raise ValueError("disk radius must be positive")
        return cls("disk", center=np.asarray(center, float),
                   radius=float(radius))

    @classmethod
    def half_plane(cls, point, inward_normal):
        n = np.asarray(inward_normal, float)
        n = n / np.hypot(*n)
        return cls("half_plane", point=np.asarray(point, float), normal=n)

    def gap(self, x):
        x = np.atleast_2d(x)
        if self.kind == "disk":
            c = self.params["center"]
            return np.hypot(x[:, 0] - c[0], x[:, 1] - c[1]) \
                - self.params["radius"]
        p, n = self.params["point"], self.params["normal"]
        return (p[None, :] - x) @ n

    def normal(self, x):
        x = np.atleast_2d(x)
        if self.kind == "disk":
            c = self.params["center"]
            d = c[None, :] - x
            return d / np.linalg.norm(d, axis=1, keepdims=True)
        n = self.params["normal"]
        return np.broadcast_to(n, x.shape).copy()

    def grad_normal(self, x):
        x = np.atleast_2d(x)
        if self.kind == "half_plane":
            return np.zeros((len(x), 2, 2))
        c = self.params["center"]
        r = x - c[None, :]
        dist = np.linalg.norm(r, axis=1)
        rhat = r / dist[:, None]
        eye = np.broadcast_to(np.eye(2), (len(x), 2, 2))
        proj = eye - rhat[:, :, None] * rhat[:, None, :]
        return -proj / dist[:, None, None]


@dataclass
class NewtonReport:
    residuals: list
    converged: bool
    iterations: int


@dataclass
class BoundaryLaw:
    """Parameters of the contact boundary terms.

    ``lam0``/``mu0`` are per-edge quadrature-point arrays (or None for
    zeros); penalty corresponds to zero multipliers with g1 = g2 = 1/eps.
    ``t_shift`` and ``t_m`` implement the proximal form of the tangential
    term used by the warm start (see module docstring); both default to the
    plain law.
    """

    g1: float
    g2: float
    lam0: list | None = None
    mu0: list | None = None

    def lam_at(self, ie, nq):
        return self.lam0[ie] if self.lam0 is not None else np.zeros(nq)

    def mu_at(self, ie, nq):
        return self.mu0[ie] if self.mu0 is not None else np.zeros((nq, 2))


class ContactProblem:
    """Discretized contact problem: space, material, loads, obstacle, model.

    ``model`` is 'sliding' or 'tresca'; eps is the penalty parameter; the
    friction bound is friction * tresca_s (a spatially constant threshold; a
    callable tresca_s(x) is accepted for variable thresholds).  With no
    rigid body the problem reduces to plain elasticity.
    """

    def __init__(self, space, material, load, rigid=None, model="sliding",
                 eps=1e-5, friction=0.0, tresca_s=0.0, lin_tol=1e-12):
        if eps <= 0:
            raise ValueError("penalty parameter must be positive")
        if model not in ("sliding", "tresca"):
            raise ValueError("model must be 'sliding' or 'tresca'")
        self.space = space
        self.material = material
        self.load = load
        self.rigid = rigid
        self.model = model
        self.eps = float(eps)
        self.friction = float(friction)
        self.tresca_s = tresca_s
        self.lin_tol = lin_tol

        A = fem.assemble_elasticity(space, material)
        ell = fem.assemble_load(space, load)
        self._anchor = self._anchor_dofs()
        dofs = np.concatenate([space.dirichlet_dofs, self._anchor])
        self.A, self.ell = fem.apply_dirichlet(A, ell, dofs)
        m = np.ones(space.ndof)
        m[dofs] = 0.0
        self._mask = sp.diags(m)
        self.contact_edges = space.tagged_edges(CONTACT) \
            if rigid is not None else []
        self._edge_ids = {id(e): i for i, e in enumerate(self.contact_edges)}

    def _anchor_dofs(self):
        # with no Dirichlet zone (fixed-contact-zone mode) the horizontal
        # rigid mode is not controlled by normal contact; pin one tangential
        # dof so the operator stays definite (loads carry no net horizontal
        # force in that mode)
        if len(self.space.dirichlet_dofs) > 0:
            return np.array([], dtype=int)
        cedges = self.space.tagged_edges(CONTACT)
        if not cedges:
            return np.array([], dtype=int)
        node = min(int(n) for e in cedges for n in e.nodes[:2])
        return np.array([2 * node], dtype=int)

    def friction_bound(self, x):
        s = self.tresca_s(x) if callable(self.tresca_s) else self.tresca_s
        return self.friction * s

    def has_friction(self):
        if self.model != "tresca":
            return False
        return callable(self.tresca_s) or self.friction * self.tresca_s > 0

    def penalty_law(self):
        return BoundaryLaw(g1=1.0 / self.eps, g2=1.0 / self.eps)

    def edge_fields(self, e, u):
        """Per-quadrature-point kinematics on a contact edge."""
        x, w, t = self.space.edge_points(e)
        uq = self.space.edge_values(e, u)
        g = self.rigid.gap(x)
        nu = self.rigid.normal(x)
        un = np.sum(uq * nu, axis=1)
        ut = uq - un[:, None] * nu
        return x, w, t, g, nu, un, ut

    def load_scale(self):
        n = np.linalg.norm(self.ell)
        return n if n > 0 else 1.0


def _accumulate_boundary_vector(problem, e, t, w, traction, out):
    nb = fem.edge_basis(problem.space.degree, t)
    fe = np.einsum("q,qa,qi->ai", w, nb, traction)
    dofs = (e.nodes[:, None] * 2 + np.arange(2)).ravel()
    out[dofs] += fe.ravel()


# ---------------------------------------------------------------------------
# residual / tangent / energy for a boundary law
# ---------------------------------------------------------------------------

def law_residual(problem, law, u):
    r = problem.A @ u - problem.ell
    bound_r = np.zeros(problem.space.ndof)
    for ie, e in enumerate(problem.contact_edges):
        x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        arg_n = law.lam_at(ie, len(w)) + law.g1 * (un - g)
        traction = rf.positive_part(arg_n)[:, None] * nu
        if problem.has_friction():
            fs = problem.friction_bound(x)
            arg_t = law.mu_at(ie, len(w)) + law.g2 * ut
            traction = traction + rf.ball_project(fs, arg_t)
        _accumulate_boundary_vector(problem, e, t, w, traction, bound_r)
    return r + problem._mask @ bound_r


def law_tangent(problem, law, u):
    def coeff(x, e):
        ie = problem._edge_ids[id(e)]
        _, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        arg_n = law.lam_at(ie, len(w)) + law.g1 * (un - g)
        c = law.g1 * rf.heaviside(arg_n)[:, None, None] \
            * nu[:, :, None] * nu[:, None, :]
        if problem.has_friction():
            fs = problem.friction_bound(x)
            arg_t = law.mu_at(ie, len(w)) + law.g2 * ut
            gs = rf.ball_project_gen_deriv(fs, arg_t)
            eye = np.broadcast_to(np.eye(2), (len(x), 2, 2))
            proj = eye - nu[:, :, None] * nu[:, None, :]
            c = c + law.g2 * np.einsum("qij,qjk,qkl->qil", proj, gs, proj)
        return c

    B = fem.assemble_boundary_operator(problem.space, problem.contact_edges,
                                       coeff)
    return problem.A + problem._mask @ B @ problem._mask


def law_energy(problem, law, u):
    """Convex merit whose gradient is law_residual (augmented energy)."""
    val = 0.5 * u @ (problem.A @ u) - problem.ell @ u
    for ie, e in enumerate(problem.contact_edges):
        x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        arg_n = law.lam_at(ie, len(w)) + law.g1 * (un - g)
        val += np.sum(w * rf.positive_part(arg_n) ** 2) / (2 * law.g1)
        if problem.has_friction():
            fs = np.broadcast_to(problem.friction_bound(x), (len(w),))
            arg_t = law.mu_at(ie, len(w)) + law.g2 * ut
            nt = np.linalg.norm(arg_t, axis=1)
            dens = np.where(nt > fs, fs * nt - 0.5 * fs ** 2, 0.5 * nt ** 2)
            val += np.sum(w * dens) / law.g2
    return float(val)


# ---------------------------------------------------------------------------
# Newton iteration for a fixed law
# ---------------------------------------------------------------------------

def _newton(problem, law, u0, tol, max_it):
    u = u0.copy()
    scale = problem.load_scale()
    res = [float(np.linalg.norm(law_residual(problem, law, u)))]
    if res[0] <= tol * scale:
        return u, NewtonReport(res, True, 0)
    e_cur = law_energy(problem, law, u)
    for it in range(1, max_it + 1):
        G = law_tangent(problem, law, u)
        d, _ = fem.solve_spd(G, -law_residual(problem, law, u),
                             problem.lin_tol)
        best_u, best_e = None, e_cur
        step = 1.0
        for _ in range(6):  # damping by half-steps on stagnation
            cand = u + step * d
            e_trial = law_energy(problem, law, cand)
            if e_trial < best_e:
                best_u, best_e = cand, e_trial
                break
            step *= 0.5
        if best_u is None:
            best_u = u + step * d
            best_e = law_energy(problem, law, best_u)
        u, e_cur = best_u, best_e
        res.append(float(np.linalg.norm(law_residual(problem, law, u))))
        if res[-1] <= tol * scale:
            return u, NewtonReport(res, True, it)
    return u, NewtonReport(res, False, max_it)


def _default_start(problem):
    """Elasticity-only start; bilateral-contact start when the problem is
    anchored by the contact zone alone (singular elasticity operator)."""
    if len(problem.space.dirichlet_dofs) > 0 or not problem.contact_edges:
        u, _ = fem.solve_spd(problem.A, problem.ell, problem.lin_tol)
        return u

    def coeff(x, e):
        nu = problem.rigid.normal(x)
        c = nu[:, :, None] * nu[:, None, :]
        if problem.has_friction():
            eye = np.broadcast_to(np.eye(2), (len(x), 2, 2))
            c = c + (eye - c)  # stick everywhere
        return c / problem.eps

    B = fem.assemble_boundary_operator(problem.space, problem.contact_edges,
                                       coeff)
    G = problem.A + problem._mask @ B @ problem._mask
    u, _ = fem.solve_spd(G, problem.ell, problem.lin_tol)
    return u


def _law_with_tangential_prox(problem, law, mu_aux, gamma_t):
    """Law whose tangential term is the proximal surrogate at stiffness
    gamma_t of the exact term q(Fs, mu0 + g2 u_t).

    The surrogate argument is m (1 - gamma_t/g2) + gamma_t (u_t + mu0/g2);
    at gamma_t = g2 with m = mu0-independent it reduces to the exact law.
    """
    shift = 1.0 - gamma_t / law.g2
    mu_eff = []
    for ie, e in enumerate(problem.contact_edges):
        nq = len(problem.space.edge_points(e)[0])
        mu_eff.append(mu_aux[ie] * shift
                      + (gamma_t / law.g2) * law.mu_at(ie, nq))
    return BoundaryLaw(g1=law.g1, g2=gamma_t, lam0=law.lam0, mu0=mu_eff)


def solve_law(problem, law, u0=None, tol=1e-10, max_it=30,
              warm_tol=1e-7):
    """Solve the boundary-law problem; warm start unless u0 is given.

    The returned report covers the final semismooth Newton solve at the
    exact law.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if u0 is not None:
        return _newton(problem, law, u0, tol, max_it)

    u = _default_start(problem)
    if not problem.contact_edges:
        return _newton(problem, law, u, tol, max_it)

    diam = problem.space.cm.parent.diameter
    g_base = problem.material.E / (0.01 * diam)
    scale = problem.load_scale()

    # phase 1: normal stiffness continuation, tangential held proximal
    n_stages = max(0, int(np.ceil(np.log10(max(law.g1, g_base) / g_base))))
    g1_path = [min(law.g1, g_base * 10.0 ** k) for k in range(n_stages + 1)]
    if g1_path[-1] != law.g1:
        g1_path.append(law.g1)
    mu_aux = None
    gamma_t0 = None
    if problem.has_friction():
        mu_aux = []
        for e in problem.contact_edges:
            nq = len(problem.space.edge_points(e)[0])
            mu_aux.append(np.zeros((nq, 2)))
        gamma_t0 = min(law.g2, g_base)
    for g1 in g1_path:
        stage = BoundaryLaw(g1=g1, g2=law.g2, lam0=law.lam0, mu0=law.mu0)
        if problem.has_friction():
            stage = _law_with_tangential_prox(problem, stage, mu_aux,
                                              gamma_t0)
        u, _ = _newton(problem, stage, u, max(tol, 1e-8), max_it)

    # phase 2: ramp the tangential proximal stiffness to the exact law,
    # updating the auxiliary traction (multiplier) after each solve
    if problem.has_friction():
        gamma_t = gamma_t0
        for _ in range(40):
            prox = _law_with_tangential_prox(problem, law, mu_aux, gamma_t)
            u, _ = _newton(problem, prox, u, max(tol, 1e-9), max_it)
            for ie, e in enumerate(problem.contact_edges):
                x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
                fs = problem.friction_bound(x)
                nq = len(w)
                arg = (mu_aux[ie] * (1.0 - gamma_t / law.g2)
                       + (gamma_t / law.g2) * law.mu_at(ie, nq)
                       + gamma_t * ut)
                mu_aux[ie] = rf.ball_project(fs, arg)
            true_res = np.linalg.norm(law_residual(problem, law, u))
            if gamma_t >= law.g2 and true_res <= warm_tol * scale:
                break
            gamma_t = min(law.g2, gamma_t * 8.0)

    return _newton(problem, law, u, tol, max_it)


# ---------------------------------------------------------------------------
# penalty API
# ---------------------------------------------------------------------------

def residual(problem, u, smooth_c=None):
    """Penalty residual F(u) = A u + contact tractions - load."""
    if smooth_c is None:
        return law_residual(problem, problem.penalty_law(), u)
    r = problem.A @ u - problem.ell
    bound_r = np.zeros(problem.space.ndof)
    for e in problem.contact_edges:
        x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        pn = rf.smooth_positive_part(smooth_c, un - g) / problem.eps
        traction = pn[:, None] * nu
        if problem.has_friction():
            alpha = problem.eps * problem.friction_bound(x)
            pt = rf.smooth_ball_project(smooth_c, alpha, ut) / problem.eps
            traction = traction + pt
        _accumulate_boundary_vector(problem, e, t, w, traction, bound_r)
    return r + problem._mask @ bound_r


def tangent(problem, u, smooth_c=None):
    """Generalized derivative of the penalty residual (exact when smoothed)."""
    if smooth_c is None:
        return law_tangent(problem, problem.penalty_law(), u)

    def coeff(x, e):
        _, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        hn = rf.smooth_heaviside(smooth_c, un - g)
        c = hn[:, None, None] * nu[:, :, None] * nu[:, None, :] / problem.eps
        if problem.has_friction():
            alpha = problem.eps * problem.friction_bound(x)
            gs = rf.smooth_ball_project_jacobian(smooth_c, alpha, ut)
            eye = np.broadcast_to(np.eye(2), (len(x), 2, 2))
            proj = eye - nu[:, :, None] * nu[:, None, :]
            c = c + np.einsum("qij,qjk,qkl->qil", proj, gs, proj) \
                / problem.eps
        return c

    B = fem.assemble_boundary_operator(problem.space, problem.contact_edges,
                                       coeff)
    return problem.A + problem._mask @ B @ problem._mask


def energy(problem, u, smooth_c=None):
    """Discrete total energy of the penalized problem."""
    if smooth_c is None:
        return law_energy(problem, problem.penalty_law(), u)
    val = 0.5 * u @ (problem.A @ u) - problem.ell @ u
    for e in problem.contact_edges:
        x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        val += np.sum(w * rf.smooth_positive_part_antideriv(
            smooth_c, un - g)) / problem.eps
        if problem.has_friction():
            alpha = problem.eps * problem.friction_bound(x)
            val += np.sum(w * rf.smooth_ball_energy(
                smooth_c, problem.eps, alpha, ut))
    return float(val)


def solve_elasticity(problem):
    u, _ = fem.solve_spd(problem.A, problem.ell, problem.lin_tol)
    return u


def solve_semismooth(problem, u0=None, tol=1e-10, max_it=30):
    """Semismooth Newton on the penalized problem.

    Stops at ||F(u)|| <= tol ||load||; the default start is the warm-start
    pipeline described in the module docstring, an explicit ``u0`` is used
    as is.
    """
    return solve_law(problem, problem.penalty_law(), u0, tol, max_it)


def solve_regularized(problem, c, u0=None, tol=1e-10, max_it=30):
    """Classical Newton on the C^1-regularized problem (parameter c).

    Requires c > 1/(eps * F * s) for the Tresca model.  The default start
    reuses the semismooth warm pipeline (the smooth and nonsmooth solutions
    are within O(1/c) of each other).
    """
    if problem.has_friction():
        s = problem.tresca_s if not callable(problem.tresca_s) else None
        if s is not None and c * problem.eps * problem.friction * s <= 1.0:
            raise ValueError("regularization needs c > 1/(eps * F * s)")
    if u0 is None:
        u0, _ = solve_semismooth(problem, tol=max(tol, 1e-8), max_it=max_it)
    u = u0.copy()
    scale = problem.load_scale()
    res = [float(np.linalg.norm(residual(problem, u, c)))]
    if res[0] <= tol * scale:
        return u, NewtonReport(res, True, 0)
    e_cur = energy(problem, u, c)
    for it in range(1, max_it + 1):
        G = tangent(problem, u, c)
        d, _ = fem.solve_spd(G, -residual(problem, u, c), problem.lin_tol)
        step = 1.0
        for _ in range(6):
            e_trial = energy(problem, u + step * d, c)
            if e_trial < e_cur:
                break
            step *= 0.5
        u = u + step * d
        e_cur = energy(problem, u, c)
        res.append(float(np.linalg.norm(residual(problem, u, c))))
        if res[-1] <= tol * scale:
            return u, NewtonReport(res, True, it)
    return u, NewtonReport(res, False, max_it)


def diagnostics(problem, u, eta=None):
    """Contact-set measures, biactive measures, penetration and pressure."""
    if eta is None:
        eta = 1e-6 * problem.space.cm.parent.diameter
    out = {
        "contact_len": 0.0, "stick_len": 0.0, "slip_len": 0.0,
        "gamma_c_len": 0.0,
        "biactive_normal_len": 0.0, "biactive_tangent_len": 0.0,
        "max_penetration": 0.0, "pressure": [],
    }
    for e in problem.contact_edges:
        x, w, t, g, nu, un, ut = problem.edge_fields(e, u)
        pen = rf.positive_part(un - g)
        out["gamma_c_len"] += w.sum()
        out["contact_len"] += w[un >= g].sum()
        out["max_penetration"] = max(out["max_penetration"], float(pen.max()))
        out["biactive_normal_len"] += w[np.abs(un - g) <= eta].sum()
        out["pressure"].append(pen / problem.eps)
        if problem.model == "tresca":
            alpha = problem.eps * problem.friction_bound(x)
            nt = np.linalg.norm(ut, axis=1)
            out["stick_len"] += w[nt <= alpha].sum()
            out["slip_len"] += w[nt >= alpha].sum()
            out["biactive_tangent_len"] += w[np.abs(nt - alpha) <= eta].sum()
    return out

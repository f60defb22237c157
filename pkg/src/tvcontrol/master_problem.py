"""Relaxed optimal control problems with finitely many cutting planes.

The k-th relaxation minimizes

    (alpha/2) ||u - u_d||^2 + (1/2) ||y - y_d||^2
    s.t.  -Laplace y = u + f,
          int u div(phi_i) dx <= 1 + (eps/2) a[phi_i, phi_i],  i = 1..k,

over P0 controls and P1 states. The control is eliminated analytically from
the gradient equation p + alpha (u - u_d) + sum_i mu_i div(phi_i) = 0, so
each active-set iteration solves one symmetric bordered system in
(y, p, mu_active). Right-hand sides carry the current eps, so shrinking eps
tightens every stored plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh_fem import (
    Forms,
    Mesh,
    P0Field,
    P1ScalarField,
    P1VectorField,
    _p0_values,
    divergence_p1_to_p0,
)
from .sparse_linalg import BorderedSystem, SparseSymMatrix, solve_bordered, solve_spd


@dataclass
class CuttingPlane:
    """One dual field with cached divergence and energy.

    The induced constraint reads int u div_phi dx <= 1 + (eps/2) energy,
    with eps supplied at solve time.
    """

    phi: P1VectorField
    div_phi: P0Field
    energy: float
    id: int


def make_cutting_plane(phi: P1VectorField, forms: Forms, plane_id: int) -> CuttingPlane:
    x = forms.interior_vector(phi)
    return CuttingPlane(
        phi=phi,
        div_phi=divergence_p1_to_p0(forms.mesh, phi),
        energy=forms.elasticity.energy(x),
        id=plane_id,
    )


def plane_slack(plane: CuttingPlane, u, eps: float, mesh: Mesh) -> float:
    """1 + (eps/2) energy - int u div_phi dx; nonnegative iff u is feasible."""
    lhs = float(np.sum(mesh.cell_areas * _p0_values(u) * plane.div_phi.values))
    return 1.0 + 0.5 * eps * plane.energy - lhs


@dataclass
class MasterSolution:
    u: P0Field
    y: P1ScalarField
    p: P1ScalarField
    mu: np.ndarray                # one multiplier per plane, >= 0
    active_planes: np.ndarray     # indices into the plane list
    objective: float
    inner_iterations: int
    converged: bool


class MasterOperator:
    """Caches the plane-independent blocks (and their factorization) per instance."""

    def __init__(self, instance, forms: Forms, alpha: float | None = None):
        self.forms = forms
        self.instance = instance
        self.alpha = instance.alpha if alpha is None else alpha
        if self.alpha <= 0.0:
            raise ValueError(f"Tikhonov parameter must be positive, got {self.alpha}")

        interior = forms.interior_nodes
        self._m_in = forms.mass_interior
        self._m_ii = self._m_in[:, interior].tocsr()
        self._b_in = forms.load_interior
        coupled = self._b_in @ sp.diags(1.0 / forms.areas) @ self._b_in.T
        coupled = ((coupled + coupled.T) * 0.5).tocsr()
        base = sp.bmat(
            [[-self._m_ii, forms.stiffness], [forms.stiffness, coupled / self.alpha]],
            format="csr",
        )
        self.base = SparseSymMatrix(base, check=False)

        self._u_d = _p0_values(instance.u_d)
        self._f = _p0_values(instance.f)
        self._y_d = instance.y_d.values
        self.rhs0 = np.concatenate(
            [-(self._m_in @ self._y_d), self._b_in @ (self._u_d + self._f)]
        )

    def solve(
        self,
        planes: list[CuttingPlane],
        eps: float,
        warm_start: MasterSolution | None = None,
        max_iterations: int = 100,
        tol: float = 1e-8,
    ) -> MasterSolution:
        forms = self.forms
        n_i = forms.n_interior
        k = len(planes)
        alpha = self.alpha
        areas = forms.areas

        div = np.stack([p.div_phi.values for p in planes]) if k else np.zeros((0, forms.mesh.n_cells))
        energies = np.array([p.energy for p in planes])
        rhs_targets = 1.0 + 0.5 * eps * energies                     # per-plane bound
        border_full = np.zeros((2 * n_i, k))
        if k:
            border_full[n_i:] = -(self._b_in @ div.T) / alpha
        g_full = rhs_targets - div @ (areas * self._u_d)

        active = np.zeros(k, dtype=bool)
        if warm_start is not None:
            prev = warm_start.active_planes
            active[prev[prev < k]] = True

        converged = False
        iterations = 0
        u = y_full = p_full = None
        mu = np.zeros(k)
        for _ in range(max_iterations):
            iterations += 1
            idx = np.flatnonzero(active)
            system = BorderedSystem(
                base=self.base,
                border=border_full[:, idx],
                border_block=-(div[idx] * areas) @ div[idx].T / alpha if idx.size else None,
                ids=np.array([planes[i].id for i in idx]),
            )
            xy, mu_act = solve_bordered(system, np.concatenate([self.rhs0, g_full[idx]]))
            y_full = forms.full_scalar_field(xy[:n_i])
            p_full = forms.full_scalar_field(xy[n_i:])
            mu = np.zeros(k)
            mu[idx] = mu_act

            p_bar = forms.cell_average @ p_full.values
            u = self._u_d - (p_bar + (mu @ div if k else 0.0)) / alpha
            slack = rhs_targets - div @ (areas * u) if k else np.zeros(0)
            active_next = (mu - slack) > 0.0

            residual = 0.0
            if k:
                residual = max(
                    float(max(0.0, -slack.min())),
                    float(max(0.0, -mu.min())),
                    float(np.abs(mu * slack).max()),
                )
            if np.array_equal(active_next, active) and residual <= tol:
                converged = True
                break
            active = active_next

        objective = self.objective_value(u, y_full)
        return MasterSolution(
            u=P0Field(u),
            y=y_full,
            p=p_full,
            mu=mu,
            active_planes=np.flatnonzero(active),
            objective=objective,
            inner_iterations=iterations,
            converged=converged,
        )

    def objective_value(self, u, y: P1ScalarField) -> float:
        diff = y.values - self._y_d
        tracking = 0.5 * float(diff @ (self.forms.mass_p1 @ diff))
        du = _p0_values(u) - self._u_d
        return tracking + 0.5 * self.alpha * float(np.sum(self.forms.areas * du * du))


def solve_master(
    planes: list[CuttingPlane],
    instance,
    eps: float,
    alpha: float | None = None,
    warm_start: MasterSolution | None = None,
    forms: Forms | None = None,
    max_iterations: int = 100,
) -> MasterSolution:
    """One-shot solve of the relaxed problem; see MasterOperator for the loop-friendly form."""
    from .mesh_fem import build_forms

    if forms is None:
        forms = build_forms(instance.mesh)
    op = MasterOperator(instance, forms, alpha=alpha)
    return op.solve(planes, eps, warm_start=warm_start, max_iterations=max_iterations)


def reduced_objective(u, instance, forms: Forms) -> float:
    """J(u) via a state solve: tracking term plus control penalty."""
    y = solve_state(u, instance, forms)
    du = _p0_values(u) - _p0_values(instance.u_d)
    diff = y.values - instance.y_d.values
    tracking = 0.5 * float(diff @ (forms.mass_p1 @ diff))
    return tracking + 0.5 * instance.alpha * float(np.sum(forms.areas * du * du))


def solve_state(u, instance, forms: Forms) -> P1ScalarField:
    rhs = forms.load_interior @ (_p0_values(u) + _p0_values(instance.f))
    return forms.full_scalar_field(solve_spd(forms.stiffness, rhs))


def reduced_gradient(u, instance, forms: Forms) -> P0Field:
    """Gradient density alpha (u - u_d) + p of the reduced objective (two Poisson solves)."""
    y = solve_state(u, instance, forms)
    adjoint_rhs = forms.mass_interior @ (y.values - instance.y_d.values)
    p = forms.full_scalar_field(solve_spd(forms.stiffness, adjoint_rhs))
    p_bar = forms.cell_average @ p.values
    return P0Field(instance.alpha * (_p0_values(u) - _p0_values(instance.u_d)) + p_bar)

"""The two built-in problem instances on the unit square.

The first instance carries an analytically known optimal control: the
normalized indicator of the disc of radius 1/4 about the center, whose
total variation equals exactly 1. State, adjoint, dual certificate and the
matching data f, y_d, u_d are constructed so that the full optimality
system holds in closed form. The second instance uses generic smooth data
scaled so that the desired control has total variation 2 while the
constraint only admits 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .mesh_fem import Mesh, P0Field, P1ScalarField, interpolate_p1, project_p0

BALL_RADIUS = 0.25
BALL_CENTER = (0.5, 0.5)
BALL_PERIMETER = 2.0 * np.pi * BALL_RADIUS


@dataclass
class ProblemInstance:
    """Data of one tracking-type control problem; all fields share one mesh."""

    mesh: Mesh
    alpha: float
    f: P0Field
    u_d: P0Field
    y_d: P1ScalarField
    reference_u: P0Field | None
    label: str

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"Tikhonov parameter must be positive, got {self.alpha}")


def psi(r):
    """Radial C^1 bump profile on (0, 1/2): two cubics glued at 3/16, 1/4, 5/16.

    psi(3/16) = psi(5/16) = 0, psi(1/4) = 1, |psi| <= 1, and psi' vanishes
    at all three knots.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lower = (r >= 3.0 / 16.0) & (r <= 0.25)
    upper = (r > 0.25) & (r <= 5.0 / 16.0)
    out = np.zeros_like(r)
    rl = r[lower]
    out[lower] = ((-8192.0 * rl + 5376.0) * rl - 1152.0) * rl + 81.0
    ru = r[upper]
    out[upper] = ((8192.0 * ru - 6912.0) * ru + 1920.0) * ru - 175.0
    return float(out[0]) if scalar else out


def psi_prime(r):
    """Derivative of :func:`psi`, branchwise."""
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lower = (r >= 3.0 / 16.0) & (r <= 0.25)
    upper = (r > 0.25) & (r <= 5.0 / 16.0)
    out = np.zeros_like(r)
    rl = r[lower]
    out[lower] = (-24576.0 * rl + 10752.0) * rl - 1152.0
    ru = r[upper]
    out[upper] = (24576.0 * ru - 13824.0) * ru + 1920.0
    return float(out[0]) if scalar else out


def exact_u_bar(x1, x2):
    """Optimal control: indicator of the centered disc, scaled by 1/perimeter."""
    inside = (x1 - BALL_CENTER[0]) ** 2 + (x2 - BALL_CENTER[1]) ** 2 < BALL_RADIUS**2
    return inside / BALL_PERIMETER


def exact_state(x1, x2):
    """Optimal state (equals the adjoint): 0.1 sin(2 pi x1) sin(2 pi x2)."""
    return 0.1 * np.sin(2.0 * np.pi * x1) * np.sin(2.0 * np.pi * x2)


def exact_phi_bar(x1, x2, s: float = 0.01):
    """Dual certificate: inward radial field -s psi(rho) e_rho on the annulus."""
    dx = np.asarray(x1, dtype=float) - BALL_CENTER[0]
    dy = np.asarray(x2, dtype=float) - BALL_CENTER[1]
    rho = np.hypot(dx, dy)
    safe = np.where(rho > 0.0, rho, 1.0)
    scale = -s * psi(rho) / safe
    return np.stack([scale * dx, scale * dy], axis=-1)


def exact_div_phi_bar(x1, x2, s: float = 0.01):
    """Divergence of the certificate: -s (psi'(rho) + psi(rho)/rho), radially."""
    dx = np.asarray(x1, dtype=float) - BALL_CENTER[0]
    dy = np.asarray(x2, dtype=float) - BALL_CENTER[1]
    rho = np.hypot(dx, dy)
    safe = np.where(rho > 0.0, rho, 1.0)
    return -s * (psi_prime(rho) + psi(rho) / safe)


def build_exact_instance(
    mesh: Mesh, s: float = 0.01, alpha: float = 1.0, subdivision_depth: int = 4
) -> ProblemInstance:
    """Instance whose exact optimal control is the normalized disc indicator.

    The desired control is assembled from the already-projected pieces
    (cell-averaged adjoint, projected indicator and certificate divergence),
    so the discrete gradient equation holds to rounding.
    """
    eight_pi_sq = 0.8 * np.pi**2

    u_bar = project_p0(exact_u_bar, mesh, subdivision_depth)
    p_bar = interpolate_p1(exact_state, mesh, dirichlet=True)
    f = project_p0(
        lambda x1, x2: eight_pi_sq * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
        - exact_u_bar(x1, x2),
        mesh,
        subdivision_depth,
    )
    y_d = interpolate_p1(
        lambda x1, x2: (0.1 - eight_pi_sq) * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2),
        mesh,
    )
    div_phi = project_p0(
        lambda x1, x2: exact_div_phi_bar(x1, x2, s=s), mesh, subdivision_depth
    )
    p_bar_cells = p_bar.values[mesh.triangles].mean(axis=1)
    u_d = P0Field(u_bar.values + (p_bar_cells - div_phi.values) / alpha)

    return ProblemInstance(
        mesh=mesh,
        alpha=alpha,
        f=f,
        u_d=u_d,
        y_d=y_d,
        reference_u=u_bar,
        label="exact",
    )


#: Total variation of 2 pi^2 sin(pi x1) cos(pi x2), i.e. the integral of the
#: Euclidean gradient norm over the unit square; evaluated by adaptive
#: quadrature at build time and pinned by the test suite.
@lru_cache(maxsize=1)
def reference_profile_tv() -> float:
    gradient_norm = lambda y, x: 2.0 * np.pi**3 * np.sqrt(
        np.cos(np.pi * x) ** 2 * np.cos(np.pi * y) ** 2
        + np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2
    )
    value, _ = integrate.dblquad(gradient_norm, 0.0, 1.0, 0.0, 1.0, epsabs=1e-11, epsrel=1e-11)
    return value


def build_generic_instance(
    mesh: Mesh, alpha: float = 1.0, subdivision_depth: int = 4
) -> ProblemInstance:
    """Instance with smooth data and no known optimal control.

    u_d = c * 2 pi^2 sin(pi x1) cos(pi x2) with c chosen so that
    TV(u_d) = 2; y_d = c sin(pi x1) cos(pi x2) solves -Laplace y_d = u_d and
    is plain data (it does not vanish on the whole boundary), f = 0.
    """
    c = 2.0 / reference_profile_tv()
    u_d = project_p0(
        lambda x1, x2: 2.0 * c * np.pi**2 * np.sin(np.pi * x1) * np.cos(np.pi * x2),
        mesh,
        subdivision_depth,
    )
    y_d = interpolate_p1(
        lambda x1, x2: c * np.sin(np.pi * x1) * np.cos(np.pi * x2), mesh
    )
    return ProblemInstance(
        mesh=mesh,
        alpha=alpha,
        f=P0Field(np.zeros(mesh.n_cells)),
        u_d=u_d,
        y_d=y_d,
        reference_u=None,
        label="generic",
    )

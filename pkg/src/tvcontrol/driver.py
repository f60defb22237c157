"""Outer loop: cutting-plane generation with path-following in eps.

Each iteration solves the current relaxation, evaluates the regularized TV
of its minimizer (which yields the next cutting plane), and shrinks eps
geometrically until the target value is reached; only then is the
termination test tv_eps(u_k) <= 1 + tol armed. Every stored plane is
re-tightened automatically because its right-hand side carries the current
eps. Subproblems are warm-started from the previous iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .master_problem import CuttingPlane, MasterOperator, MasterSolution, make_cutting_plane
from .mesh_fem import Forms, P0Field, build_forms, l2_error_p0, l2_norm_p0
from .tv_oracle import OracleResult, eval_tv_eps, eval_tv_eps_path, tv_lower_bound

TOLERANCE_MET = "tolerance_met"
MAX_OUTER = "max_outer"
INNER_FAILURE = "inner_failure"

#: eps values within 5% of eps_min snap onto it, so that rounded targets
#: (e.g. 7.8e-8 for the geometric value 1e-5 * 0.5^7) still end the path.
_EPS_SNAP = 0.05

#: planes whose divergence is this close in L2 to a stored one are dropped
_DUPLICATE_TOL = 1e-12


@dataclass
class SolverConfig:
    eps_start: float = 1e-5
    eps_factor: float = 0.5
    eps_min: float = 7.8e-8
    tol: float = 1e-2
    alpha: float = 1.0
    n: int = 50
    max_outer: int = 50
    subdivision_depth: int = 4
    max_master_iterations: int = 100
    max_oracle_iterations: int = 200
    warm_start: bool = True

    def __post_init__(self):
        if not 0.0 < self.eps_factor < 1.0:
            raise ValueError(f"eps_factor must lie in (0, 1), got {self.eps_factor}")
        if self.eps_min <= 0.0 or self.eps_min > self.eps_start:
            raise ValueError("need 0 < eps_min <= eps_start")
        if self.tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n < 1 or self.max_outer < 1:
            raise ValueError("n and max_outer must be at least 1")


@dataclass
class IterationRecord:
    k: int
    eps: float
    objective: float
    it_master: int
    it_oracle: int
    tv_eps: float
    tv_lower_bound: float
    rel_error: float | None = None
    eoc: float | None = None


@dataclass
class RunReport:
    records: list[IterationRecord]
    terminated: str
    final_control: P0Field | None
    planes: list[CuttingPlane]
    config: SolverConfig | None = None


def rel_error(mesh, u, reference) -> float:
    """||u - reference|| / ||reference|| in L2 over P0 fields."""
    denom = l2_norm_p0(mesh, reference)
    if denom == 0.0:
        raise ValueError("relative error needs a nonzero reference control")
    return l2_error_p0(mesh, u, reference) / denom


def compute_eoc(records: list[IterationRecord]) -> list[IterationRecord]:
    """Fill experimental orders of convergence in place.

    eoc_k = (log err_{k-1} - log err_k) / (log eps_{k-1} - log eps_k);
    undefined entries (missing errors, equal eps) stay empty.
    """
    for prev, rec in zip(records, records[1:]):
        defined = (
            prev.rel_error is not None
            and rec.rel_error is not None
            and prev.rel_error > 0.0
            and rec.rel_error > 0.0
            and prev.eps != rec.eps
        )
        if defined:
            rec.eoc = (math.log(prev.rel_error) - math.log(rec.rel_error)) / (
                math.log(prev.eps) - math.log(rec.eps)
            )
    return records


def _next_eps(eps: float, config: SolverConfig) -> float:
    reduced = eps * config.eps_factor
    if reduced <= config.eps_min * (1.0 + _EPS_SNAP):
        return config.eps_min
    return reduced


def _at_eps_min(eps: float, config: SolverConfig) -> bool:
    return eps <= config.eps_min * (1.0 + 1e-12)


def _is_duplicate(plane: CuttingPlane, planes: list[CuttingPlane], mesh) -> bool:
    return any(
        l2_error_p0(mesh, plane.div_phi, existing.div_phi) < _DUPLICATE_TOL
        for existing in planes
    )


def run_outer_approximation(
    instance, config: SolverConfig, forms: Forms | None = None
) -> RunReport:
    """Run the cutting-plane loop and collect one record per outer iteration.

    Termination claims are verified: before returning ``tolerance_met`` the
    final control is re-checked with a cold-started oracle evaluation; if
    that disagrees, the loop continues with the fresh cutting plane instead
    of returning an infeasible control.
    """
    mesh = instance.mesh
    if forms is None:
        forms = build_forms(mesh)
    master_op = MasterOperator(instance, forms)

    planes: list[CuttingPlane] = []
    records: list[IterationRecord] = []
    eps = config.eps_start
    master_warm: MasterSolution | None = None
    oracle_warm: OracleResult | None = None
    final_control: P0Field | None = None
    terminated = MAX_OUTER

    for k in range(config.max_outer):
        master = master_op.solve(
            planes,
            eps,
            warm_start=master_warm,
            max_iterations=config.max_master_iterations,
        )
        if not master.converged:
            terminated = INNER_FAILURE
            break
        final_control = master.u

        if oracle_warm is not None:
            oracle = eval_tv_eps(
                master.u,
                eps,
                forms,
                warm_start=oracle_warm,
                max_inner_iterations=config.max_oracle_iterations,
            )
        else:
            # no warm data: continue in eps internally (plain cold starts cycle)
            oracle = eval_tv_eps_path(
                master.u,
                eps,
                forms,
                eps_init=max(eps, config.eps_start),
                factor=config.eps_factor,
                max_inner_iterations=config.max_oracle_iterations,
            )
        if not oracle.converged:
            terminated = INNER_FAILURE
            break

        err = (
            rel_error(mesh, master.u, instance.reference_u)
            if instance.reference_u is not None
            else None
        )
        records.append(
            IterationRecord(
                k=k,
                eps=eps,
                objective=master.objective,
                it_master=master.inner_iterations,
                it_oracle=oracle.inner_iterations,
                tv_eps=oracle.value,
                tv_lower_bound=tv_lower_bound(oracle, eps),
                rel_error=err,
            )
        )

        if _at_eps_min(eps, config) and oracle.value <= 1.0 + config.tol:
            verification = eval_tv_eps_path(
                master.u,
                eps,
                forms,
                eps_init=max(eps, config.eps_start),
                factor=config.eps_factor,
                max_inner_iterations=config.max_oracle_iterations,
            )
            if not verification.converged:
                terminated = INNER_FAILURE
                break
            if verification.value <= 1.0 + config.tol:
                terminated = TOLERANCE_MET
                break
            oracle = verification  # fresh check disagreed: cut with its plane instead

        plane = make_cutting_plane(oracle.phi, forms, plane_id=len(planes))
        if not _is_duplicate(plane, planes, mesh):
            planes.append(plane)
        if not _at_eps_min(eps, config):
            eps = _next_eps(eps, config)
        if config.warm_start:
            master_warm, oracle_warm = master, oracle

    compute_eoc(records)
    return RunReport(
        records=records,
        terminated=terminated,
        final_control=final_control,
        planes=planes,
        config=config,
    )

"""Generic small dense SDP solver.

Canonical form:

    maximize    C . X
    subject to  A_i . X = b_i   (i = 1..p)
                X >= 0  (PSD)

with dual

    minimize    b.y    subject to  S = sum_i y_i A_i - C >= 0.

The heavy lifting is delegated to a conic interior-point backend (CLARABEL,
with SCS as fallback) through cvxpy; this module owns the canonical-form
contract: symmetry validation, dual-multiplier extraction with the sign
convention above, residual reporting, and the complementary-slackness
product X . S.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .matcore import sym


@dataclass(frozen=True)
class CanonicalSDP:
    order: int
    C: np.ndarray
    constraints: list  # list of (A_i, b_i)

    def __post_init__(self):
        C = sym(self.C)
        if C.shape != (self.order, self.order):
            raise ValueError("objective matrix order mismatch")
        if not self.constraints:
            raise ValueError("at least one constraint is required")
        cons = []
        for A, b in self.constraints:
            A = sym(A)
            if A.shape != (self.order, self.order):
                raise ValueError("constraint matrix order mismatch")
            cons.append((A, float(b)))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "constraints", cons)


@dataclass
class Residuals:
    primal_eq: float
    psd_X: float
    psd_S: float
    gap: float


@dataclass
class SDPSolution:
    X: np.ndarray
    y: np.ndarray
    primal_value: float
    dual_value: float
    status: str  # Optimal | MaxIter | Infeasible | Unbounded
    iterations: int
    residuals: Residuals = field(default=None)


class SolverFailed(RuntimeError):
    pass


def _slack(p: CanonicalSDP, y: np.ndarray) -> np.ndarray:
    S = -p.C.copy()
    for (A, _), yi in zip(p.constraints, y):
        S += yi * A
    return sym(S)


def _residuals(p: CanonicalSDP, X, y, pv, dv) -> Residuals:
    eq = max(abs(float(np.tensordot(A, X)) - b) for A, b in p.constraints)
    wx = np.linalg.eigvalsh(sym(X))
    S = _slack(p, y)
    ws = np.linalg.eigvalsh(S)
    return Residuals(
        primal_eq=eq,
        psd_X=max(0.0, -float(wx[0])),
        psd_S=max(0.0, -float(ws[0])),
        gap=abs(pv - dv),
    )


def solve(p: CanonicalSDP, gap_tol: float = 1e-8, feas_tol: float = 1e-8,
          max_iter: int = 50_000) -> SDPSolution:
    """Solve the canonical SDP. Deterministic for fixed inputs and options.

    Status Optimal guarantees primal feasibility within feas_tol, PSD
    violations of X and of the dual slack within feas_tol, and relative
    duality gap within gap_tol.
    """
    n = p.order
    Xv = cp.Variable((n, n), symmetric=True)
    cons = [Xv >> 0]
    for A, b in p.constraints:
        cons.append(cp.trace(A @ Xv) == b)
    prob = cp.Problem(cp.Maximize(cp.trace(p.C @ Xv)), cons)

    scale = 1.0 + float(np.linalg.norm(p.C)) + max(
        float(np.linalg.norm(A)) for A, _ in p.constraints
    )
    status = None
    tight = min(gap_tol, feas_tol)
    for solver, opts in (
        (cp.CLARABEL, dict(max_iter=max_iter, tol_gap_abs=tight * 1e-1,
                           tol_gap_rel=tight * 1e-1, tol_feas=tight * 1e-1)),
        (cp.SCS, dict(max_iters=max_iter, eps=tight * 1e-1)),
    ):
        try:
            prob.solve(solver=solver, **opts)
        except cp.error.SolverError:
            continue
        status = prob.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE, cp.INFEASIBLE,
                      cp.UNBOUNDED):
            break

    if status is None:
        raise SolverFailed("no conic backend produced a result")
    if status == cp.INFEASIBLE:
        return SDPSolution(X=np.zeros((n, n)), y=np.zeros(len(p.constraints)),
                           primal_value=-np.inf, dual_value=-np.inf,
                           status="Infeasible", iterations=0)
    if status == cp.UNBOUNDED:
        return SDPSolution(X=np.zeros((n, n)), y=np.zeros(len(p.constraints)),
                           primal_value=np.inf, dual_value=np.inf,
                           status="Unbounded", iterations=0)

    X = sym(Xv.value)
    y = np.array([float(np.asarray(c.dual_value).reshape(())) for c in cons[1:]])
    # Sign convention: S = sum y_i A_i - C must be PSD at the optimum. cvxpy's
    # convention already matches; flip defensively if it does not.
    ws = np.linalg.eigvalsh(_slack(p, y))
    if ws[0] < -1e-5 * scale:
        y = -y
    pv = float(np.tensordot(p.C, X))
    dv = float(sum(b * yi for (_, b), yi in zip(p.constraints, y)))
    res = _residuals(p, X, y, pv, dv)

    iters = 0
    try:
        iters = int(prob.solver_stats.num_iters or 0)
    except (AttributeError, TypeError):
        pass

    ok = (res.primal_eq <= feas_tol * scale and res.psd_X <= feas_tol * scale
          and res.psd_S <= feas_tol * scale
          and res.gap <= max(gap_tol * (1.0 + abs(pv)), 1e-6 * scale))
    out_status = "Optimal" if (status == cp.OPTIMAL or ok) else "MaxIter"
    return SDPSolution(X=X, y=y, primal_value=pv, dual_value=dv,
                       status=out_status, iterations=iters, residuals=res)


def cs_product(sol: SDPSolution, p: CanonicalSDP) -> float:
    """Complementary-slackness product X . S; near zero at optimality."""
    return float(np.tensordot(sol.X, _slack(p, sol.y)))

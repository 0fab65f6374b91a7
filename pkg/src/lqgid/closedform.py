"""Analytic solutions for symmetric and public designs.

Three families admit explicit answers and serve as oracles for the SDP path:

* transitive networks with a common-value state and utilitarian welfare
  objective (full disclosure above a spectral cutoff, an explicit partial
  solution below it);
* complete networks with exchangeable objectives, both the common-value
  case (fully explicit) and the private-value case (a five-equation
  covariance system solved numerically from an SDP seed);
* public signals for any environment with a nonsingular state covariance,
  where the optimum is the positive eigenspace of a congruence-transformed
  objective matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import designsdp, sdpcore, symmetry
from .envmodel import (Environment, NetworkSpec, complete_adjacency,
                       equicorrelated_Z, make_environment, network_environment)
from .envmodel import _cbar
from .matcore import eig_sym, is_psd, pinv, sqrt_psd, sym


class NotTransitive(ValueError):
    pass


class NotCommonValue(ValueError):
    pass


class NewtonFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class TransitiveWelfareSolution:
    full_disclosure_optimal: bool
    cutoff: float  # threshold in beta
    s_i: float
    lam: float
    x: float
    y: float


@dataclass(frozen=True)
class CompleteNetworkSolution:
    regime: str  # NoDisclosure | FullDisclosure | Partial
    x: float
    y: float
    rho_x: float
    rho_y: float
    lam: float
    s: float

    def value(self, n: int, v: float, c: float) -> float:
        """Designer value n*(v*x + (n-1)*c*rho_x*x) of the exchangeable blocks."""
        return n * (v * self.x + (n - 1) * c * self.rho_x * self.x)


@dataclass(frozen=True)
class PublicDesignSolution:
    k_star: int
    value: float
    S: np.ndarray
    signal_map: np.ndarray
    globally_optimal: object  # bool or None when not yet checked


def transitive_welfare(G, beta: float, rho_common: float = 1.0) -> TransitiveWelfareSolution:
    """Utilitarian welfare on a transitive network with a common state.

    Below the cutoff -1/(d - 2 mu_min) the optimum is partial: each action
    covaries with the state by y = lam / (2 lam (1 - beta d) - 2) where
    lam = 1/(1 - beta mu_min), with per-agent variance x = lam y / 2. At or
    above it, full disclosure is optimal with lam = 2/(1 - beta d).
    """
    if rho_common != 1.0:
        raise NotCommonValue("requires a perfectly correlated state")
    G = np.asarray(G, dtype=float)
    if not symmetry.is_vertex_transitive(G):
        raise NotTransitive("network is not transitive")
    prof = symmetry.degree_profile(G)
    d = prof["d"]
    mu_min = float(np.linalg.eigvalsh(sym(G))[0])
    cutoff = -1.0 / (d - 2.0 * mu_min)
    if beta >= cutoff:
        lam = 2.0 / (1.0 - beta * d)
        y = 1.0 / (1.0 - beta * d)
        x = lam * y / 2.0
        return TransitiveWelfareSolution(True, cutoff, 1.0, lam, x, y)
    lam = 1.0 / (1.0 - beta * mu_min)
    y = lam / (2.0 * lam * (1.0 - beta * d) - 2.0)
    x = lam * y / 2.0
    s = (1.0 / abs(beta) + mu_min) / (d - mu_min)
    return TransitiveWelfareSolution(False, cutoff, s, lam, x, y)


def _no_disclosure_region(n, v, c) -> bool:
    return v <= c <= -v / (n - 1)


def complete_common(n: int, beta: float, v: float, c: float) -> CompleteNetworkSolution:
    """Complete network, common-value state, exchangeable objective.

    The objective matrix has diagonal v and off-diagonal c. Disclosure
    regime boundaries and the partial-disclosure covariances are explicit.
    """
    if n < 2:
        raise ValueError("need at least two agents")
    if not (-1.0 < beta < 1.0 / (n - 1)):
        raise ValueError("beta outside the admissible interval")
    if _no_disclosure_region(n, v, c):
        return CompleteNetworkSolution("NoDisclosure", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    f = -(1.0 + (n + 1) * beta) / (2 * n - 1 + (n - 1) * beta)
    if c >= -v / (n - 1) and c >= f * v:
        lam = 2.0 * (v + (n - 1) * c) / (1.0 - (n - 1) * beta)
        y = 1.0 / (1.0 - (n - 1) * beta)
        return CompleteNetworkSolution("FullDisclosure", y * y, y, 1.0, 1.0,
                                       lam, 1.0)
    lam = (v - c) / (1.0 + beta)
    den = beta * v + (2.0 + beta) * c
    x = (c - v) * den / (4.0 * n * (1.0 + beta) * (c + beta * v) ** 2)
    y = (c - v) / (2.0 * n * (c + beta * v))
    rho_x = -((1.0 + 2.0 * beta) * v + c) / ((n - 1) * den)
    s = (1.0 + beta) * (c - v) / (n * den)
    return CompleteNetworkSolution("Partial", x, y, rho_x, 1.0, lam, s)


def complete_environment(n: int, beta: float, rho: float, v: float,
                         c: float) -> Environment:
    """The exchangeable complete-network environment used by the oracles."""
    net = NetworkSpec(n=n, G=complete_adjacency(n), beta=beta)
    V = (v - c) * np.eye(n) + c * np.ones((n, n))
    return network_environment(net, V, np.zeros((n, n)), equicorrelated_Z(n, rho))


def _private_system(n, beta, rho, v, c):
    """Residuals of the five-equation covariance system in
    (x, y, rho_x, rho_y, lam)."""

    def F(u):
        x, y, rx, ry, lam = u
        a1 = (1.0 + beta) * lam - (v - c)
        a2 = (1.0 - (n - 1) * beta) * lam - (v + (n - 1) * c)
        if abs(a1) < 1e-14 or abs(a2) < 1e-14:
            return np.full(5, 1e6)
        a_own = (a1 + (n - 1) * a2) / (n * a1 * a2)
        a_opp = (a1 - a2) / (n * a1 * a2)
        hd = 0.5 * lam * a_own
        ho = 0.5 * lam * a_opp
        return np.array([
            hd + (n - 1) * ho * rho - y,
            hd * rho + ho * (1.0 + (n - 2) * rho) - ry * y,
            hd * y + (n - 1) * ho * ry * y - x,
            hd * ry * y + ho * (y + (n - 2) * ry * y) - rx * x,
            y + (n - 1) * beta * rx * x - x,
        ])

    return F


def complete_private(n: int, beta: float, rho: float, v: float,
                     c: float) -> CompleteNetworkSolution:
    """Complete network with an imperfectly correlated (private-value) state.

    No and full disclosure have analytic boundaries; the partial regime
    solves the five-equation covariance system numerically, seeded from the
    SDP solution and polished to residual 1e-9.
    """
    if not (-1.0 / (n - 1) < rho < 1.0):
        raise ValueError("rho outside (-1/(n-1), 1)")
    if not (-1.0 < beta < 1.0 / (n - 1)):
        raise ValueError("beta outside the admissible interval")
    if _no_disclosure_region(n, v, c):
        return CompleteNetworkSolution("NoDisclosure", 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    if v >= 0 and abs(c + beta * v) <= 1e-12 * (1.0 + abs(v)):
        # full disclosure blocks: H = Q^{-1}, X = H Z H, Y = H Z
        env = complete_environment(n, beta, rho, v, c)
        pt = designsdp.full_disclosure_point(env)
        x = float(pt.X[0, 0])
        y = float(pt.Y[0, 0])
        rx = float(pt.X[0, 1]) / x
        ry = float(pt.Y[0, 1]) / y
        lam = 2.0 * v  # from A_Lambda = lam*Q - V proportional structure
        s = y * y / x if x > 0 else 1.0
        return CompleteNetworkSolution("FullDisclosure", x, y, rx, ry, lam,
                                       min(s, 1.0))
    env = complete_environment(n, beta, rho, v, c)
    point, cert, report, v_p = designsdp.solve_design(env)
    grp = symmetry.complete_group(n)
    point = symmetry.symmetrize(point, grp, env)
    lam0 = float(np.mean(cert.lam))
    x0 = float(point.X[0, 0])
    y0 = float(point.Y[0, 0])
    rx0 = float(point.X[0, 1]) / x0 if x0 > 1e-12 else 0.0
    ry0 = float(point.Y[0, 1]) / y0 if abs(y0) > 1e-12 else 0.0
    F = _private_system(n, beta, rho, v, c)
    sol = scipy.optimize.root(F, np.array([x0, y0, rx0, ry0, lam0]),
                              method="hybr", tol=1e-12)
    resid = float(np.linalg.norm(F(sol.x)))
    if resid > 1e-9:
        raise NewtonFailed(f"covariance system residual {resid:.2e}")
    x, y, rx, ry, lam = sol.x
    s = y * y / x if x > 0 else 0.0
    return CompleteNetworkSolution("Partial", x, y, rx, ry, lam, min(s, 1.0))


def _objective_rank(env: Environment) -> int:
    """Number of strictly positive eigenvalues of the objective block matrix."""
    Vb = designsdp.objective_block(env)
    w = np.linalg.eigvalsh(Vb)
    eps = 1e-9 * (1.0 + max(abs(float(w[0])), abs(float(w[-1]))))
    return int(np.sum(w > eps))


def public_design(env: Environment) -> PublicDesignSolution:
    """Optimal public signal via the eigenstructure of Z^{1/2} Cbar Z^{1/2}.

    The value is the sum of the strictly positive eigenvalues; the optimal
    variance reduction S spans the corresponding eigendirections pulled back
    through Z^{1/2}. Requires nonsingular Z.
    """
    wz = np.linalg.eigvalsh(env.Z)
    if wz[0] <= 1e-12 * (1.0 + wz[-1]):
        raise ValueError("requires a nonsingular state covariance")
    Zh = sqrt_psd(env.Z)
    Chat = sym(Zh @ _cbar(env) @ Zh)
    ed = eig_sym(Chat)
    nrm = max(abs(float(ed.values[0])), abs(float(ed.values[-1]))) if ed.values.size else 0.0
    eps = 1e-9 * (1.0 + nrm)
    k_star = int(np.sum(ed.values > eps))
    val = float(np.sum(ed.values[:k_star]))
    Uk = ed.vectors[:, :k_star]
    S = sym(Zh @ Uk @ Uk.T @ Zh)
    Zh_inv = np.linalg.inv(Zh)
    signal_map = Uk.T @ Zh_inv
    p = _objective_rank(env)
    if not (p - env.n <= k_star <= p):
        raise AssertionError("signal count violates the objective-rank bounds")
    return PublicDesignSolution(k_star=k_star, value=val, S=S,
                                signal_map=signal_map, globally_optimal=None)


def public_value_sdp(env: Environment, gap_tol: float = 1e-8) -> float:
    """Cross-check of the public value by a lifted SDP.

    max Chat . S over I >= S >= O, encoded as one PSD variable
    [[S, .], [., T]] of order 2m with entrywise constraints S + T = I. The
    optimal S and I - S commute, so a PSD completion of the off-diagonal
    block exists and the relaxation is tight.
    """
    m = env.m
    Zh = sqrt_psd(env.Z)
    Chat = sym(Zh @ _cbar(env) @ Zh)
    C = np.zeros((2 * m, 2 * m))
    C[:m, :m] = Chat
    cons = []
    for i in range(m):
        for j in range(i, m):
            A = np.zeros((2 * m, 2 * m))
            for (a, b) in ((i, j), (j, i)):
                A[a, b] += 0.5
                A[m + a, m + b] += 0.5
            A = sym(A)
            cons.append((A, float(np.eye(m)[i, j])))
    sol = sdpcore.solve(sdpcore.CanonicalSDP(order=2 * m, C=C, constraints=cons),
                        gap_tol=gap_tol)
    return sol.primal_value


def public_globally_optimal(env: Environment, sol: PublicDesignSolution,
                            tol: float = 1e-8):
    """Does the best public signal attain the unrestricted optimum?

    Stacks the rank-wise stationarity conditions into a linear system in the
    multiplier diagonal and accepts iff the least-squares residual vanishes
    and the resulting A block is PSD.
    """
    n, m = env.n, env.m
    Zh = sqrt_psd(env.Z)
    Chat = sym(Zh @ _cbar(env) @ Zh)
    ed = eig_sym(Chat)
    U = ed.vectors
    k = sol.k_star
    QiR = np.linalg.solve(env.Q, env.R)

    def resid_vec(lam_vec):
        cert = designsdp.certificate(env, lam_vec)
        out = []
        for j in range(m):
            col = Zh @ U[:, j]
            if j < k:
                out.append((cert.A @ QiR - cert.B) @ col)
            else:
                out.append(cert.B @ col)
        return np.concatenate(out)

    f0 = resid_vec(np.zeros(n))
    cols = [resid_vec(np.eye(n)[j]) - f0 for j in range(n)]
    lam, *_ = np.linalg.lstsq(np.column_stack(cols), -f0, rcond=None)
    resid = float(np.linalg.norm(resid_vec(lam)))
    cert = designsdp.certificate(env, lam)
    a_ok, _ = is_psd(cert.A, 1e-9)
    scale = 1.0 + float(np.linalg.norm(cert.A)) + float(np.linalg.norm(cert.B))
    verdict = bool(resid <= tol * scale and a_ok)
    return {"verdict": verdict, "lambda": lam, "residual": resid}

"""Environment construction and validation.

An environment bundles the agents' best-response data (Q, R), the designer's
quadratic objective (V, W), and the Gaussian state law (Z, theta_mean).
Network environments use Q = I - beta G with R = I. The proportional
objective transform moves state-dependence out of W when each row of W is
proportional to the matching row of R.

Reported values are always net of the information-independent affine
constant; it is never reconstructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import _check_finite, sym


class BasicAssumptionViolated(ValueError):
    """Q + Q.T is not positive definite."""


class DegenerateState(ValueError):
    """A state coordinate has nonpositive variance."""


class PdcNotSatisfied(ValueError):
    """W is not row-proportional to R."""


@dataclass(frozen=True)
class Environment:
    n: int
    m: int
    Q: np.ndarray
    R: np.ndarray
    V: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    theta_mean: np.ndarray


def make_environment(Q, R, V, W, Z, theta_mean=None) -> Environment:
    """Validate and assemble an environment.

    Q + Q.T must be positive definite and Z must be PSD with strictly
    positive diagonal. V is symmetrized on construction.
    """
    Q = _check_finite(Q, "Q")
    R = _check_finite(R, "R")
    W = _check_finite(W, "W")
    V = sym(V)
    Z = sym(Z)
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ValueError("Q must be square")
    m = R.shape[1] if R.ndim == 2 else 1
    R = R.reshape(n, m)
    W = W.reshape(n, m)
    if V.shape != (n, n) or Z.shape != (m, m):
        raise ValueError("V or Z dimensions do not conform")
    if theta_mean is None:
        theta_mean = np.zeros(m)
    theta_mean = np.asarray(theta_mean, dtype=float).reshape(m)

    w = np.linalg.eigvalsh(Q + Q.T)
    if w[0] <= 1e-10:
        raise BasicAssumptionViolated(
            f"Q + Q.T must be positive definite (lambda_min = {w[0]:.3e})"
        )
    if np.any(np.diag(Z) <= 0):
        raise DegenerateState("Z must have strictly positive diagonal")
    wz = np.linalg.eigvalsh(Z)
    if wz[0] < -1e-9 * max(1.0, abs(wz[-1])):
        raise DegenerateState("Z must be positive semidefinite")

    for a in (Q, R, V, W, Z, theta_mean):
        a.setflags(write=False)
    return Environment(n=n, m=m, Q=Q, R=R, V=V, W=W, Z=Z, theta_mean=theta_mean)


@dataclass(frozen=True)
class NetworkSpec:
    """Adjacency matrix with interaction strength beta.

    G must be nonnegative with zero diagonal; beta must lie strictly inside
    the spectral interval making I - beta*G pass the positive-definiteness
    requirement on Q + Q.T.
    """

    n: int
    G: np.ndarray
    beta: float

    def __post_init__(self):
        G = _check_finite(self.G, "G")
        if G.shape != (self.n, self.n):
            raise ValueError("G must be n x n")
        if np.any(np.diag(G) != 0):
            raise ValueError("G must have zero diagonal")
        if np.any(G < 0):
            raise ValueError("G must be nonnegative")
        G = G.copy()
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        lo, hi = beta_bounds(G)
        if not (lo + 1e-9 < self.beta < hi - 1e-9):
            raise ValueError(
                f"beta = {self.beta} outside admissible interval ({lo}, {hi})"
            )


def complete_adjacency(n: int) -> np.ndarray:
    return np.ones((n, n)) - np.eye(n)


def cycle_adjacency(n: int) -> np.ndarray:
    G = np.zeros((n, n))
    for i in range(n):
        G[i, (i + 1) % n] = 1.0
        G[i, (i - 1) % n] = 1.0
    return G


def star_adjacency(n: int) -> np.ndarray:
    """Hub at index 0, spokes 1..n-1."""
    G = np.zeros((n, n))
    G[0, 1:] = 1.0
    G[1:, 0] = 1.0
    return G


def equicorrelated_Z(n: int, rho: float) -> np.ndarray:
    """Unit variances with common pairwise correlation rho."""
    return (1.0 - rho) * np.eye(n) + rho * np.ones((n, n))


def beta_bounds(G):
    """Admissible open interval for beta given adjacency G.

    Bounds are the reciprocals of the extreme eigenvalues of (G + G.T)/2,
    with an infinite endpoint when the corresponding eigenvalue vanishes.
    """
    w = np.linalg.eigvalsh(sym(G))
    mu_min, mu_max = float(w[0]), float(w[-1])
    lo = 1.0 / mu_min if mu_min < 0 else -np.inf
    hi = 1.0 / mu_max if mu_max > 0 else np.inf
    return lo, hi


def network_environment(net: NetworkSpec, V, W, Z, theta_mean=None) -> Environment:
    """Environment with Q = I - beta G and R = I (so m = n)."""
    Q = np.eye(net.n) - net.beta * net.G
    return make_environment(Q, np.eye(net.n), V, W, Z, theta_mean)


def welfare_environment(env_or_net, weights=None, *, Z=None, theta_mean=None) -> Environment:
    """Weighted-welfare designer objective: V = Diag(v_i q_ii), W = O.

    Accepts either an Environment (objective replaced) or a NetworkSpec
    (in which case Z must be given). All weights must be positive; the
    utilitarian case is weights = 1.
    """
    if isinstance(env_or_net, NetworkSpec):
        if Z is None:
            raise ValueError("Z required when building from a NetworkSpec")
        base = network_environment(env_or_net, np.eye(env_or_net.n),
                                   np.zeros((env_or_net.n, env_or_net.n)), Z,
                                   theta_mean)
    else:
        base = env_or_net
    v = np.ones(base.n) if weights is None else np.asarray(weights, dtype=float)
    if v.shape != (base.n,):
        raise ValueError("weights must have one entry per agent")
    if np.any(v <= 0):
        raise ValueError("welfare weights must be positive")
    V = np.diag(v * np.diag(base.Q))
    W = np.zeros((base.n, base.m))
    return make_environment(base.Q, base.R, V, W, base.Z, base.theta_mean)


def pdc_check(env: Environment):
    """Return the diagonal Delta with W = Delta R, or None.

    Row i must satisfy W[i] = delta_i * R[i] within 1e-10 relative; a zero
    row of R forces a zero row of W (delta_i = 0 canonically).
    """
    deltas = np.zeros(env.n)
    for i in range(env.n):
        r, w = env.R[i], env.W[i]
        rn, wn = np.linalg.norm(r), np.linalg.norm(w)
        if rn == 0.0:
            if wn > 1e-10:
                return None
            continue
        delta = float(r @ w) / float(r @ r)
        if np.linalg.norm(w - delta * r) > 1e-10 * (1.0 + wn + abs(delta) * rn):
            return None
        deltas[i] = delta
    return np.diag(deltas)


def pdc_transform(env: Environment) -> Environment:
    """Fold a row-proportional W into V, leaving W = O.

    V becomes V + (Delta Q + Q.T Delta)/2; the objective value of every
    primal-feasible pair is unchanged.
    """
    Delta = pdc_check(env)
    if Delta is None:
        raise PdcNotSatisfied("W is not row-proportional to R")
    V = sym(env.V + (Delta @ env.Q + env.Q.T @ Delta) / 2.0)
    W = np.zeros((env.n, env.m))
    return make_environment(env.Q, env.R, V, W, env.Z, env.theta_mean)


def mean_actions(env: Environment) -> np.ndarray:
    """Equilibrium mean actions, constant across information structures."""
    return np.linalg.solve(env.Q, env.R @ env.theta_mean)


def _cbar(env: Environment) -> np.ndarray:
    QiR = np.linalg.solve(env.Q, env.R)
    return sym(QiR.T @ env.V @ QiR + (QiR.T @ env.W + env.W.T @ QiR) / 2.0)


def full_disclosure_value(env: Environment) -> float:
    """Designer value of revealing the state exactly to every agent."""
    return float(np.tensordot(_cbar(env), env.Z))


def no_disclosure_value(env: Environment) -> float:
    """Designer value of revealing nothing (always zero, net of constants)."""
    return 0.0

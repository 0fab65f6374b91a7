"""Analysis of Gaussian information structures.

A primal point (X, Y) together with the state law defines the joint Gaussian
distribution of the recommended action profile and the state. This module
classifies such structures (noise-free, state-identifiable), computes the
per-agent informativeness metrics, and provides a Monte Carlo obedience
oracle that checks the equilibrium moment restrictions on simulated draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designsdp import PrimalPoint, assemble_M, is_feasible
from .envmodel import Environment, mean_actions
from .matcore import GaussianLaw, gaussian_conditional, pinv, sample_gaussian, sym


@dataclass(frozen=True)
class GaussianInfoStructure:
    n: int
    m: int
    mean: np.ndarray  # stacked (mean actions, mean state)
    cov: np.ndarray   # [[X, Y], [Y.T, Z]]

    @property
    def X(self):
        return self.cov[: self.n, : self.n]

    @property
    def Y(self):
        return self.cov[: self.n, self.n:]

    @property
    def Z(self):
        return self.cov[self.n:, self.n:]

    def law(self) -> GaussianLaw:
        return GaussianLaw(mean=self.mean, cov=self.cov)


@dataclass(frozen=True)
class Metrics:
    """Per-agent informativeness.

    s[i]: share of agent i's state variance explained by her own signal.
    S[i]: share explained by the whole signal profile.
    N[i]: share of signal variance unexplained by the state.
    Entries are NaN where the defining variance is zero.
    """

    s: np.ndarray
    S: np.ndarray
    N: np.ndarray


def from_primal(env: Environment, point: PrimalPoint) -> GaussianInfoStructure:
    """Joint law of (actions, state) under direct recommendations."""
    if not is_feasible(env, point):
        raise ValueError("primal point is not feasible")
    mean = np.concatenate([mean_actions(env), env.theta_mean])
    cov = assemble_M(point, env.Z)
    # solver output sits on the PSD boundary; clip roundoff-level negatives
    w, U = np.linalg.eigh(cov)
    nrm = max(1.0, float(np.abs(w).max()))
    if w[0] < -1e-7 * nrm:
        raise ValueError("covariance block is materially indefinite")
    cov = sym((U * np.clip(w, 0.0, None)) @ U.T)
    return GaussianInfoStructure(n=env.n, m=env.m, mean=mean, cov=cov)


def noise_freeness(gis: GaussianInfoStructure, tol: float = 1e-8):
    """Are actions deterministic given the state?

    The conditional covariance of actions given the state is X - Y Z^+ Y.T;
    the structure is noise-free when it vanishes.
    """
    cond = sym(gis.X - gis.Y @ pinv(gis.Z) @ gis.Y.T)
    flag = float(np.linalg.norm(cond)) <= tol * (1.0 + float(np.linalg.norm(gis.X)))
    return {"is_noise_free": bool(flag), "conditional_cov": cond}


def state_identifiability(gis: GaussianInfoStructure, tol: float = 1e-8):
    """Is the state recoverable from the action profile?"""
    cond = sym(gis.Z - gis.Y.T @ pinv(gis.X) @ gis.Y)
    flag = float(np.linalg.norm(cond)) <= tol * (1.0 + float(np.linalg.norm(gis.Z)))
    return {"is_identifiable": bool(flag), "conditional_cov": cond}


def metrics(gis: GaussianInfoStructure) -> Metrics:
    n, m = gis.n, gis.m
    if m != n:
        raise ValueError("per-agent metrics require one state per agent")
    X, Y, Z = gis.X, gis.Y, gis.Z
    s = np.full(n, np.nan)
    S = np.full(n, np.nan)
    N = np.full(n, np.nan)

    # Var[theta | all signals]
    law_all = GaussianLaw(mean=np.concatenate([gis.mean[n:], gis.mean[:n]]),
                          cov=np.block([[Z, Y.T], [Y, X]]))
    _, _, cond_all = gaussian_conditional(law_all, n)
    # Var[signals | theta]
    _, _, cond_sig = gaussian_conditional(gis.law(), n)

    for i in range(n):
        zi = float(Z[i, i])
        xi = float(X[i, i])
        if zi > 0:
            # Var[theta_i | sigma_i] from the 2x2 marginal
            cov2 = np.array([[zi, Y[i, i]], [Y[i, i], xi]])
            law2 = GaussianLaw(mean=np.zeros(2), cov=cov2)
            _, _, c2 = gaussian_conditional(law2, 1)
            s[i] = 1.0 - float(c2[0, 0]) / zi
            S[i] = 1.0 - float(cond_all[i, i]) / zi
        if xi > 0:
            N[i] = float(cond_sig[i, i]) / xi
    # clip roundoff outside [0, 1]
    for arr in (s, S, N):
        np.clip(arr, 0.0, 1.0, out=arr)
    return Metrics(s=s, S=S, N=N)


def mc_obedience(env: Environment, gis: GaussianInfoStructure, count: int,
                 seed: int):
    """Monte Carlo check of the equilibrium moment restrictions.

    Draws (sigma, theta) and tests, within 5-standard-error bands:
    first moments Q mean(sigma) = R mean(theta), the diagonal obedience
    restriction on second moments, and the first-order condition via the
    regression of q_i.sigma - r_i.theta on agent i's own signal.
    Returns residuals measured in standard-error units plus pass flags.
    """
    if count < 10_000:
        raise ValueError("count must be at least 10^4")
    draws = sample_gaussian(gis.law(), count, seed)
    sig = draws[:, : env.n]
    th = draws[:, env.n:]
    root = np.sqrt(count)

    # first moments
    lhs1 = env.Q @ sig.mean(axis=0)
    rhs1 = env.R @ th.mean(axis=0)
    se1 = (np.abs(env.Q) @ sig.std(axis=0) + np.abs(env.R) @ th.std(axis=0)) / root
    se1 = np.maximum(se1, 1e-12)
    m1 = float(np.max(np.abs(lhs1 - rhs1) / se1))

    # second moments: per-agent obedience sum_j q_ij x_ij = sum_k r_ik y_ik
    dsig = sig - sig.mean(axis=0)
    dth = th - th.mean(axis=0)
    m2 = 0.0
    foc = 0.0
    for i in range(env.n):
        # realized per-draw products whose mean is the obedience residual
        prod = dsig[:, i] * (dsig @ env.Q[i] - dth @ env.R[i])
        mu = float(prod.mean())
        se = max(float(prod.std(ddof=1)) / root, 1e-12)
        m2 = max(m2, abs(mu) / se)
        # FOC regression: the residual q_i.sigma - r_i.theta must be
        # uncorrelated with sigma_i; slope in SE units
        var_i = float(dsig[:, i] @ dsig[:, i]) / count
        if var_i > 1e-14:
            foc = max(foc, abs(mu) / se)

    return {
        "moment1_residual": m1,
        "moment2_residual": m2,
        "foc_regression_residual": foc,
        "ok": bool(m1 <= 5.0 and m2 <= 5.0 and foc <= 5.0),
    }

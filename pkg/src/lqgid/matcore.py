"""Dense symmetric-matrix primitives.

Everything downstream (environment validation, the SDP assembly, certificate
checks, Gaussian conditioning) is built on the handful of operations here:
symmetric eigendecomposition with a deterministic ordering, Moore-Penrose
pseudoinverse, PSD tests (direct and blockwise via the generalized Schur
complement), symmetric square roots, Gaussian conditional laws, and seeded
Gaussian sampling.

All functions are pure; returned arrays are freshly allocated and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_finite(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def sym(M):
    """Return the exact symmetrization (M + M.T) / 2 as a new array."""
    M = _check_finite(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted non-increasing with matching orthonormal columns.

    Eigenvector signs are canonical: the first component of each column whose
    magnitude exceeds a small threshold is made positive, so the decomposition
    is deterministic for a fixed input matrix.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def eig_sym(M) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, deterministically ordered."""
    M = sym(M)
    w, U = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    U = U[:, order]
    # canonical signs: first non-negligible component of each column positive
    n = M.shape[0]
    for k in range(U.shape[1]):
        col = U[:, k]
        thresh = 1e-12 * max(1.0, float(np.abs(col).max()))
        for i in range(n):
            if abs(col[i]) > thresh:
                if col[i] < 0:
                    U[:, k] = -col
                break
    w = np.ascontiguousarray(w)
    U = np.ascontiguousarray(U)
    w.setflags(write=False)
    U.setflags(write=False)
    return EigenDecomposition(values=w, vectors=U)


def pinv(M, rank_tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative rank cutoff."""
    M = _check_finite(M)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    if M.size == 0:
        return M.T.copy()
    return np.linalg.pinv(M, rcond=rank_tol)


def rank_eps(M) -> float:
    """Relative rank tolerance eps = 1e-9 * max(1, ||M||_2)."""
    M = np.asarray(M, dtype=float)
    nrm = float(np.linalg.norm(M, 2)) if M.size else 0.0
    return 1e-9 * max(1.0, nrm)


def is_psd(M, tol: float = 1e-9):
    """PSD test. Returns (flag, smallest eigenvalue).

    True iff lambda_min(M) >= -tol * (1 + ||M||_2).
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    M = sym(M)
    if M.size == 0:
        return True, 0.0
    w = np.linalg.eigvalsh(M)
    lam_min = float(w[0])
    nrm2 = float(max(abs(w[0]), abs(w[-1])))
    return lam_min >= -tol * (1.0 + nrm2), lam_min


def block_psd(A, B, C, tol: float = 1e-9) -> bool:
    """PSD test for [[A, B], [B.T, C]] via the generalized Schur complement.

    True iff A is PSD, B lies in the range of A (B = A A^+ B), and the Schur
    complement C - B.T A^+ B is PSD, all within tol. Equivalent to a direct
    eigenvalue test of the assembled block matrix.
    """
    A = sym(A)
    C = sym(C)
    B = _check_finite(B)
    if B.shape != (A.shape[0], C.shape[0]):
        raise ValueError("block dimensions do not conform")
    ok_a, _ = is_psd(A, tol)
    if not ok_a:
        return False
    Ap = pinv(A)
    scale = 1.0 + float(np.linalg.norm(A)) + float(np.linalg.norm(B))
    if np.linalg.norm(B - A @ Ap @ B) > tol * scale:
        return False
    S = sym(C - B.T @ Ap @ B)
    if S.size == 0:
        return True
    w = np.linalg.eigvalsh(S)
    scale_c = 1.0 + float(np.linalg.norm(C, 2)) + float(np.linalg.norm(B))
    return float(w[0]) >= -tol * scale_c


def sqrt_psd(M) -> np.ndarray:
    """Symmetric PSD square root.

    Eigenvalues in [-1e-9 * ||M||_2, 0) are clipped to 0; materially negative
    eigenvalues (below -1e-6 * ||M||_2) are an error.
    """
    M = sym(M)
    ed = eig_sym(M)
    w = ed.values.copy()
    nrm = float(abs(w[0])) if w.size else 0.0
    nrm = max(nrm, float(abs(w[-1])) if w.size else 0.0)
    if w.size and w[-1] < -1e-6 * max(nrm, 1e-300):
        raise ValueError("matrix is materially indefinite, no PSD square root")
    np.clip(w, 0.0, None, out=w)
    R = (ed.vectors * np.sqrt(w)) @ ed.vectors.T
    return sym(R)


def psd_project_law(cov):
    """Validate/clean a covariance for use in a GaussianLaw.

    Eigenvalues in [-1e-9 * ||cov||_2, 0) are clipped to zero; anything more
    negative raises. Solver output sits on the PSD boundary at optimality, so
    tiny negative eigenvalues are expected.
    """
    cov = sym(cov)
    ed = eig_sym(cov)
    w = ed.values.copy()
    if w.size == 0:
        return cov
    nrm = max(float(abs(w[0])), float(abs(w[-1])), 1e-300)
    if w[-1] < -1e-9 * nrm - 1e-300:
        raise ValueError("covariance is not PSD within tolerance")
    np.clip(w, 0.0, None, out=w)
    return sym((ed.vectors * w) @ ed.vectors.T)


@dataclass(frozen=True)
class GaussianLaw:
    """A multivariate Gaussian, mean vector plus PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = psd_project_law(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise ValueError("mean/cov dimension mismatch")
        mean = mean.copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.shape[0]


def gaussian_conditional(joint: GaussianLaw, split: int):
    """Condition the first block on the second.

    For xi = (xi1, xi2) with xi1 the first `split` coordinates, returns
    (K, c, cond_cov) such that E[xi1 | xi2] = c + K xi2 and
    Var[xi1 | xi2] = S11 - S12 S22^+ S21. The pseudoinverse handles singular
    second-block covariance.
    """
    d = joint.dim
    if not 0 <= split <= d:
        raise ValueError("split out of range")
    S = joint.cov
    S11 = S[:split, :split]
    S12 = S[:split, split:]
    S22 = S[split:, split:]
    K = S12 @ pinv(S22)
    c = joint.mean[:split] - K @ joint.mean[split:]
    cond = sym(S11 - K @ S12.T)
    # clip roundoff negatives relative to the marginal's scale; the exact
    # conditional covariance is PSD and dominated by S11
    if cond.size:
        w, U = np.linalg.eigh(cond)
        floor = -1e-7 * (1.0 + float(np.linalg.norm(S11, 2)))
        if w[0] < floor:
            raise ValueError("conditional covariance is materially indefinite")
        cond = sym((U * np.clip(w, 0.0, None)) @ U.T)
    return K, c, cond


def _philox_u64(seed: int, count: int) -> np.ndarray:
    """Raw 64-bit stream from the Philox counter-based generator."""
    bg = np.random.Philox(seed)
    return np.random.Generator(bg).integers(0, 2**64, size=count, dtype=np.uint64)


def _box_muller(u64: np.ndarray) -> np.ndarray:
    """Standard normals from pairs of uniforms derived from the u64 stream."""
    if u64.size % 2:
        u64 = u64[:-1]
    u = (u64.astype(np.float64) + 0.5) / 2.0**64
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(u64.size, dtype=float)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z


def sample_gaussian(law: GaussianLaw, count: int, seed: int) -> np.ndarray:
    """Draw `count` iid samples, one per row. Deterministic for a fixed seed.

    Uses the Philox counter-based generator for the u64 stream and Box-Muller
    for the normal variates, so draws are reproducible bit-identically.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    d = law.dim
    need = count * d
    z = _box_muller(_philox_u64(int(seed), need + (need % 2)))[:need]
    Z = z.reshape(count, d)
    L = sqrt_psd(law.cov)
    return law.mean + Z @ L.T

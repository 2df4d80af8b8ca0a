"""Dense linear algebra used by the optimizer steps and the width-scaling probes.

Everything here operates on 2-D float64 numpy arrays and is pure: inputs are
never mutated, so values can be shared freely across threads.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Fixed seed for the power-iteration start vector: probes must be reproducible.
_POWER_SEED = 8971
POWER_TOL = 1e-10
POWER_MAX_ITER = 1000
RANK_TOL = 1e-12
NS_TOL = 1e-3


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def frobenius_norm(a) -> float:
    a = as_matrix(a)
    s = float(np.sum(a * a))
    if s > 0.0 and np.isfinite(s):
        return float(np.sqrt(s))
    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        return 0.0
    scaled = a / peak  # rescale to dodge under/overflow in the squares
    return peak * float(np.sqrt(np.sum(scaled * scaled)))


class PowerIterationResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def spectral_norm_power(a, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> PowerIterationResult:
    """Largest singular value of `a` via power iteration on the smaller Gram matrix.

    The start vector comes from a fixed seed, so repeated calls on the same
    input give identical results. Converges when the estimate's relative
    change drops below `tol`; estimates approach the true value from below.
    """
    a = as_matrix(a)
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    m, n = a.shape
    # Power-iterate on a a^T or a^T a, whichever is smaller.
    if m <= n:
        gram = a @ a.T
    else:
        gram = a.T @ a
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    # spectral <= Frobenius is a theorem; cap the estimate so round-off cannot break it
    cap = frobenius_norm(a)
    sigma = 0.0
    for it in range(1, max_iter + 1):
        w = gram @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return PowerIterationResult(0.0, True, it)
        new_sigma = float(np.sqrt(lam))
        v = w / lam
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return PowerIterationResult(min(new_sigma, cap), True, it)
        sigma = new_sigma
    return PowerIterationResult(min(sigma, cap), False, max_iter)


def spectral_norm(a, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    return spectral_norm_power(a, tol, max_iter).value


@dataclass(frozen=True)
class EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    Columns of `eigenvectors` are unit eigenvectors; V diag(w) V^T
    reconstructs the input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(s, sym_tol: float = 1e-10) -> EigenDecomposition:
    """Eigendecompose a symmetric matrix; rejects asymmetric input."""
    s = as_matrix(s, "symmetric matrix")
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"matrix must be square, got {s.shape}")
    skew = np.max(np.abs(s - s.T))
    if skew > sym_tol:
        raise ValueError(f"matrix is not symmetric: max |s - s^T| = {skew:.3e} > {sym_tol:.1e}")
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    order = np.argsort(w)[::-1]
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=v[:, order])


def matrix_fractional_power(s, p: float, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Eigenvalue power sum_i lam_i^p u_i u_i^T over eigenvalues above the rank cutoff.

    Eigenvalues at or below rank_tol * lam_max contribute zero, including for
    negative p (pseudo-power). Input must be symmetric PSD up to the cutoff.
    """
    if rank_tol < 0:
        raise ValueError("rank_tol must be nonnegative")
    eig = sym_eig(s)
    lam = eig.eigenvalues
    lam_max = max(float(lam[0]), 0.0)
    cutoff = rank_tol * lam_max
    if lam[-1] < -cutoff:
        raise ValueError(f"matrix is not PSD: smallest eigenvalue {lam[-1]:.3e}")
    keep = lam > cutoff
    if not np.any(keep):
        return np.zeros_like(np.asarray(s, dtype=np.float64))
    v = eig.eigenvectors[:, keep]
    powered = lam[keep] ** p
    return (v * powered) @ v.T


class NewtonSchulzResult(NamedTuple):
    matrix: np.ndarray
    converged: bool
    iterations: int


def newton_schulz_orthogonalize(g, iters: int = 60, tol: float = NS_TOL) -> NewtonSchulzResult:
    """Orthogonalize `g` toward the polar factor U V^T of its reduced SVD.

    Cubic iteration X <- 1.5 X - 0.5 X X^T X after pre-normalizing by the
    Frobenius norm; converged once every singular value of X above the rank
    cutoff lies in [1 - tol, 1 + tol] (checked through the smaller Gram
    matrix). Nonzero input required.
    """
    g = as_matrix(g, "gradient")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    fro = frobenius_norm(g)
    if fro == 0.0:
        raise ValueError("cannot orthogonalize the zero matrix")
    x = g / fro
    rows_small = x.shape[0] <= x.shape[1]
    for it in range(iters + 1):
        gram = x @ x.T if rows_small else x.T @ x
        evals = np.linalg.eigvalsh(gram)
        top = max(float(evals[-1]), 0.0)
        # rank cutoff on singular values: sigma > RANK_TOL * sigma_max
        live = evals > (RANK_TOL ** 2) * top
        sigma = np.sqrt(np.clip(evals[live], 0.0, None))
        if sigma.size and np.all(np.abs(sigma - 1.0) <= tol):
            return NewtonSchulzResult(x, True, it)
        if it == iters:
            break
        x = 1.5 * x - 0.5 * (gram @ x if rows_small else x @ gram)
    return NewtonSchulzResult(x, False, iters)


def singular_values(a) -> np.ndarray:
    return np.linalg.svd(as_matrix(a), compute_uv=False)


def numerical_rank(a, rank_tol: float = RANK_TOL) -> int:
    """Count of singular values above rank_tol times the largest one."""
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))

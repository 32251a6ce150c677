"""Maximum-likelihood tomography baseline.

The state is parametrized through a lower-triangular complex factor T
as rho = T^dag T / Tr(T^dag T), which is Hermitian, PSD and unit-trace
by construction. The mean per-record log-likelihood of the observed
outcomes is maximized by gradient ascent with a backtracking line
search; the gradient is analytic (and finite-difference checked in the
test suite).

The parameter vector ``t`` has length 4^N: the 2^N real diagonal
entries of T first, then (real, imaginary) pairs for the strictly
lower triangle in row-major order.
"""

from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .qcore import DensityMatrix, basis_rotation, ensure_within_cap

ARMIJO_C = 1e-4
MAX_HALVINGS = 60


def _tri_indices(dim: int):
    rows, cols = np.tril_indices(dim, k=-1)
    return rows, cols


def cholesky_matrix(t: np.ndarray, n_qubits: int) -> np.ndarray:
    """Lower-triangular T from the flat parameter vector."""
    dim = 2**n_qubits
    t = np.asarray(t, dtype=float)
    if t.size != dim * dim:
        raise ValueError(f"expected {dim * dim} parameters, got {t.size}")
    T = np.zeros((dim, dim), dtype=complex)
    T[np.diag_indices(dim)] = t[:dim]
    rows, cols = _tri_indices(dim)
    off = t[dim:].reshape(-1, 2)
    T[rows, cols] = off[:, 0] + 1j * off[:, 1]
    return T


def params_from_cholesky(T: np.ndarray) -> np.ndarray:
    """Flatten a lower-triangular factor back to the parameter vector."""
    dim = T.shape[0]
    rows, cols = _tri_indices(dim)
    off = T[rows, cols]
    return np.concatenate([
        T.diagonal().real,
        np.column_stack([off.real, off.imag]).ravel(),
    ])


def rho_from_cholesky(t: np.ndarray, n_qubits: int) -> DensityMatrix:
    """T^dag T normalized to unit trace; valid by construction."""
    T = cholesky_matrix(t, n_qubits)
    gram = T.conj().T @ T
    tr = np.trace(gram).real
    if tr <= 0.0:
        raise ValueError("parameter vector must not be identically zero")
    return DensityMatrix(dim=gram.shape[0], matrix=gram / tr)


def _count_table(dataset: Dataset):
    """Distinct (basis, outcome) counts and their projector vectors
    w = U_b^dag e_outcome, so p = |T w|^2 / Tr(T^dag T)."""
    dim = 2**dataset.n_qubits
    shifts = np.arange(dataset.n_qubits - 1, -1, -1)
    vectors = []
    counts = []
    for basis, rec in dataset.groups.items():
        u = basis_rotation(basis)
        idx = rec.astype(np.int64) @ (1 << shifts)
        binc = np.bincount(idx, minlength=dim)
        for outcome in np.nonzero(binc)[0]:
            vectors.append(u[outcome].conj())
            counts.append(binc[outcome])
    return np.array(vectors), np.array(counts, dtype=float)


def _loglik_and_grad(T, vectors, counts):
    """Mean per-record log-likelihood and its Wirtinger gradient dL/dT*."""
    n_tot = counts.sum()
    y = vectors @ T.T  # y_j = T w_j
    norms = np.einsum("ij,ij->i", y.conj(), y).real
    tau = np.einsum("ij,ij->", T.conj(), T).real
    if np.any(norms <= 0.0):
        return -np.inf, None
    loglik = float((counts @ (np.log(norms) - np.log(tau))) / n_tot)
    weights = counts / (n_tot * norms)
    g = np.einsum("j,jr,jc->rc", weights, y, vectors.conj())
    g -= T / tau
    return loglik, g


def _grad_vector(g: np.ndarray, dim: int) -> np.ndarray:
    """Real gradient in the t layout from the Wirtinger matrix."""
    rows, cols = _tri_indices(dim)
    off = 2.0 * g[rows, cols]
    return np.concatenate([
        2.0 * g.diagonal().real,
        np.column_stack([off.real, off.imag]).ravel(),
    ])


@dataclass
class MaxLikResult:
    rho: DensityMatrix
    t: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    log_likelihood: float
    likelihood_trace: list = field(default_factory=list)


def maxlik_fit(
    dataset: Dataset,
    max_iters: int = 1000,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> MaxLikResult:
    """Gradient-ascent maximum-likelihood fit of the measurement data.

    Converged when the infinity norm of the gradient of the mean
    log-likelihood drops below ``tolerance``; otherwise stops at
    ``max_iters`` with ``converged=False`` and the final gradient norm
    in the result.
    """
    ensure_within_cap(dataset.n_qubits)
    dim = 2**dataset.n_qubits
    vectors, counts = _count_table(dataset)

    rng = np.random.default_rng(seed)
    T = np.eye(dim, dtype=complex)
    T[np.tril_indices(dim, k=-1)] += 0.01 * (
        rng.normal(size=dim * (dim - 1) // 2)
        + 1j * rng.normal(size=dim * (dim - 1) // 2)
    )
    T /= np.linalg.norm(T)
    t = params_from_cholesky(T)

    loglik, g = _loglik_and_grad(T, vectors, counts)
    trace = [loglik]
    step = 1.0
    converged = False
    grad_norm = np.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        gvec = _grad_vector(g, dim)
        grad_norm = float(np.max(np.abs(gvec)))
        if grad_norm < tolerance:
            converged = True
            break
        accepted = False
        for _ in range(MAX_HALVINGS):
            t_new = t + step * gvec
            T_new = cholesky_matrix(t_new, dataset.n_qubits)
            scale = np.linalg.norm(T_new)
            T_new /= scale
            with np.errstate(divide="ignore", invalid="ignore"):
                ll_new, g_new = _loglik_and_grad(T_new, vectors, counts)
            if ll_new >= loglik + ARMIJO_C * step * float(gvec @ gvec):
                t = params_from_cholesky(T_new)
                T = T_new
                loglik, g = ll_new, g_new
                trace.append(loglik)
                step = min(step * 1.5, 1e6)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # line search exhausted: gradient noise floor reached
            break

    return MaxLikResult(
        rho=rho_from_cholesky(t, dataset.n_qubits),
        t=t,
        converged=converged,
        iterations=iters,
        grad_norm=grad_norm,
        log_likelihood=loglik,
        likelihood_trace=trace,
    )

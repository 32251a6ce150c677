"""The neural density operator: an RBM purification of a mixed state.

The model holds two real-weight RBMs over binary units {0, 1}: an
amplitude set ``lam`` and a phase set ``mu``. Hidden units are
marginalized analytically; auxiliary units live in the latent layer and
are traced out in closed form, which is what lets a bipartite-graph
network represent a mixed state. With the auxiliary couplings ``U`` set
to zero the state is pure.

Everything is kept in log space (log-amplitude plus phase) until a
dense matrix is actually requested, so moderate parameter magnitudes
never overflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .qcore import (
    MAX_QUBITS,
    DensityMatrix,
    NumericalDomainError,
    enumerate_configs,
)

# Default init: weights uniform in [-width/2, width/2], biases zero.
DEFAULT_INIT_WIDTH = 0.01

# |1 + exp(z)| below this is treated as a branch-cut singularity.
_LOG1PEXP_GUARD = 1e-14

# exp() beyond this real part would overflow a double.
_EXP_GUARD = 700.0


@dataclass
class ParamSet:
    """One RBM parameter set.

    ``W`` couples hidden to visible units, ``U`` auxiliary to visible;
    ``b``, ``c``, ``d`` are visible, hidden and auxiliary biases. The
    phase set carries no auxiliary bias (``d is None``): it would
    cancel identically in the traced-out state.
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray | None = None

    def copy(self) -> "ParamSet":
        return ParamSet(
            W=self.W.copy(),
            U=self.U.copy(),
            b=self.b.copy(),
            c=self.c.copy(),
            d=None if self.d is None else self.d.copy(),
        )


@dataclass
class NdoParams:
    """Full parameter container: amplitude set ``lam``, phase set ``mu``."""

    n_visible: int
    n_hidden: int
    n_aux: int
    lam: ParamSet
    mu: ParamSet

    def __post_init__(self):
        n, nh, na = self.n_visible, self.n_hidden, self.n_aux
        if min(n, nh, na) < 0 or n == 0:
            raise ValueError("layer sizes must be positive (aux may be 0)")
        expected = {
            "lam.W": (self.lam.W, (nh, n)),
            "lam.U": (self.lam.U, (na, n)),
            "lam.b": (self.lam.b, (n,)),
            "lam.c": (self.lam.c, (nh,)),
            "lam.d": (self.lam.d, (na,)),
            "mu.W": (self.mu.W, (nh, n)),
            "mu.U": (self.mu.U, (na, n)),
            "mu.b": (self.mu.b, (n,)),
            "mu.c": (self.mu.c, (nh,)),
        }
        for name, (arr, shape) in expected.items():
            if arr is None or arr.shape != shape:
                got = None if arr is None else arr.shape
                raise ValueError(f"{name} has shape {got}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.mu.d is not None:
            raise ValueError("the phase set carries no auxiliary bias")

    def copy(self) -> "NdoParams":
        return NdoParams(
            self.n_visible, self.n_hidden, self.n_aux,
            self.lam.copy(), self.mu.copy(),
        )


@dataclass
class Gradients:
    """Parameter-shaped gradient container (same layout as NdoParams)."""

    lam: ParamSet
    mu: ParamSet


def init_params(
    n_visible: int,
    n_hidden: int,
    n_aux: int,
    seed: int,
    width: float = DEFAULT_INIT_WIDTH,
) -> NdoParams:
    """Fresh parameters: weights uniform around zero, biases zero.

    Draw order is fixed (lam.W, lam.U, mu.W, mu.U) so a seed pins the
    initialization bit-for-bit.
    """
    rng = np.random.default_rng(seed)

    def draw(shape):
        return rng.uniform(-width / 2.0, width / 2.0, size=shape)

    lam = ParamSet(
        W=draw((n_hidden, n_visible)),
        U=draw((n_aux, n_visible)),
        b=np.zeros(n_visible),
        c=np.zeros(n_hidden),
        d=np.zeros(n_aux),
    )
    mu = ParamSet(
        W=draw((n_hidden, n_visible)),
        U=draw((n_aux, n_visible)),
        b=np.zeros(n_visible),
        c=np.zeros(n_hidden),
        d=None,
    )
    return NdoParams(n_visible, n_hidden, n_aux, lam, mu)


def n_parameters(params: NdoParams) -> int:
    n, nh, na = params.n_visible, params.n_hidden, params.n_aux
    lam_size = nh * n + na * n + n + nh + na
    mu_size = nh * n + na * n + n + nh
    return lam_size + mu_size


def pack_params(params: NdoParams) -> np.ndarray:
    """Flatten to a single vector: lam (W, U, b, c, d) then mu (W, U, b, c)."""
    return np.concatenate([
        params.lam.W.ravel(), params.lam.U.ravel(),
        params.lam.b, params.lam.c, params.lam.d,
        params.mu.W.ravel(), params.mu.U.ravel(),
        params.mu.b, params.mu.c,
    ])


def unpack_params(vec: np.ndarray, n_visible: int, n_hidden: int, n_aux: int) -> NdoParams:
    """Inverse of :func:`pack_params`."""
    n, nh, na = n_visible, n_hidden, n_aux
    sizes = [nh * n, na * n, n, nh, na, nh * n, na * n, n, nh]
    if vec.size != sum(sizes):
        raise ValueError(f"vector length {vec.size} != {sum(sizes)}")
    parts = np.split(np.asarray(vec, dtype=float), np.cumsum(sizes)[:-1])
    lam = ParamSet(parts[0].reshape(nh, n), parts[1].reshape(na, n),
                   parts[2], parts[3], parts[4])
    mu = ParamSet(parts[5].reshape(nh, n), parts[6].reshape(na, n),
                  parts[7], parts[8], None)
    return NdoParams(n, nh, na, lam, mu)


def pack_gradients(grads: Gradients) -> np.ndarray:
    return np.concatenate([
        grads.lam.W.ravel(), grads.lam.U.ravel(),
        grads.lam.b, grads.lam.c, grads.lam.d,
        grads.mu.W.ravel(), grads.mu.U.ravel(),
        grads.mu.b, grads.mu.c,
    ])


def unpack_gradients(vec: np.ndarray, params: NdoParams) -> Gradients:
    as_params = unpack_params(vec, params.n_visible, params.n_hidden, params.n_aux)
    return Gradients(lam=as_params.lam, mu=as_params.mu)


# ---------------------------------------------------------------------------
# Stable scalar kernels
# ---------------------------------------------------------------------------

def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x), evaluated as max(x, 0) + log1p(e^-|x|)."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log1pexp_complex(z: np.ndarray) -> np.ndarray:
    """Principal-branch log(1 + e^z) for complex z, overflow-safe.

    Raises :class:`NumericalDomainError` when |1 + e^z| < 1e-14, where
    the principal branch is ill-conditioned (z near i*pi mod 2*pi*i).
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    u = np.exp(-np.abs(x))
    # mag^2 - 1 of (1 + e^z) after factoring out e^max(x,0)
    m2m1 = u * (u + 2.0 * np.cos(y))
    if np.any(1.0 + m2m1 < _LOG1PEXP_GUARD**2):
        raise NumericalDomainError(
            "1 + exp(z) vanishes: phase-coupling argument hit the log branch cut"
        )
    re = np.maximum(x, 0.0) + 0.5 * np.log1p(m2m1)
    neg = x <= 0.0
    p = np.where(neg, u, 1.0)
    q = np.where(neg, 1.0, u)
    im = np.arctan2(p * np.sin(y), q + p * np.cos(y))
    return re + 1j * im


def logistic_complex(z: np.ndarray) -> np.ndarray:
    """Complex logistic e^z / (1 + e^z), overflow-safe, same guard as above."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    u = np.exp(-np.abs(x))
    w = u * np.exp(1j * np.where(x >= 0.0, -y, y))
    denom = 1.0 + w
    if np.any(np.abs(denom) < _LOG1PEXP_GUARD):
        raise NumericalDomainError(
            "1 + exp(z) vanishes: phase-coupling argument hit a pole"
        )
    return np.where(x >= 0.0, 1.0 / denom, w / denom)


def mix_log_and_logistic(z: np.ndarray):
    """Fused log(1 + e^z) and e^z/(1 + e^z) sharing one set of
    exponentials; the training inner loop calls this every update."""
    x, y = z.real, z.imag
    u = np.exp(-np.abs(x))
    cy = np.cos(y)
    sy = np.sin(y)
    m2m1 = u * (u + 2.0 * cy)
    if np.any(1.0 + m2m1 < _LOG1PEXP_GUARD**2):
        raise NumericalDomainError(
            "1 + exp(z) vanishes: phase-coupling argument hit the log branch cut"
        )
    neg = x <= 0.0
    p = np.where(neg, u, 1.0)
    q = np.where(neg, 1.0, u)
    den_re = q + p * cy
    den_im = p * sy
    log_term = (np.maximum(x, 0.0) + 0.5 * np.log1p(m2m1)) \
        + 1j * np.arctan2(den_im, den_re)
    # logistic: e^z/(1+e^z) = p*e^{iy} / (q + p*e^{iy}) in both branches
    den2 = den_re * den_re + den_im * den_im
    logi = p * (cy + 1j * sy) * (den_re - 1j * den_im) / den2
    return log_term, logi


# ---------------------------------------------------------------------------
# Vectorized building blocks (configs given as rows of a {0,1} matrix)
# ---------------------------------------------------------------------------

def hidden_theta(pset: ParamSet, sigmas: np.ndarray) -> np.ndarray:
    """Hidden-unit pre-activations W sigma + c for each row, shape (m, n_h)."""
    return sigmas @ pset.W.T + pset.c


def visible_log_weight(pset: ParamSet, sigmas: np.ndarray) -> np.ndarray:
    """Hidden-marginalized log weight of each visible row (no aux part):
    sum_i softplus(W^[i] sigma + c_i) + b . sigma, shape (m,)."""
    return softplus(hidden_theta(pset, sigmas)).sum(axis=1) + sigmas @ pset.b


def mixing_z(params: NdoParams, half_sum: np.ndarray, half_dif: np.ndarray) -> np.ndarray:
    """Auxiliary-trace arguments z_k for row pairs, shape (m, n_aux).

    ``half_sum`` and ``half_dif`` are (sigma + sigma')/2 and
    (sigma - sigma')/2 as (m, N) float arrays.
    """
    z = half_sum @ params.lam.U.T + params.lam.d
    return z + 1j * (half_dif @ params.mu.U.T)


def log_rho_pairs(params: NdoParams, s_left: np.ndarray, s_right: np.ndarray) -> np.ndarray:
    """Complex log of the unnormalized matrix element for row pairs.

    ``s_left``/``s_right`` are (m, N) {0,1} float arrays; returns (m,).
    """
    a_lam_l = visible_log_weight(params.lam, s_left)
    a_lam_r = visible_log_weight(params.lam, s_right)
    a_mu_l = visible_log_weight(params.mu, s_left)
    a_mu_r = visible_log_weight(params.mu, s_right)
    z = mixing_z(params, 0.5 * (s_left + s_right), 0.5 * (s_left - s_right))
    mix = log1pexp_complex(z).sum(axis=1)
    return 0.5 * (a_lam_l + a_lam_r) + 0.5j * (a_mu_l - a_mu_r) + mix


# ---------------------------------------------------------------------------
# Matrix-element operations
# ---------------------------------------------------------------------------

def _as_config(sigma, n: int | None = None) -> np.ndarray:
    arr = np.asarray(sigma, dtype=float).ravel()
    if n is not None and arr.size != n:
        raise ValueError(f"configuration length {arr.size}, expected {n}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("configurations must be binary 0/1 vectors")
    return arr


def pair_log_weight(pset: ParamSet, sigma, sigma_prime, sign: int) -> float:
    """Symmetric (+1) or antisymmetric (-1) half-combination of the
    hidden-marginalized log weights of two configurations:

        0.5 * [sp(W s + c).sum() +/- sp(W s' + c).sum() + b.(s +/- s')]
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    s = _as_config(sigma)
    sp = _as_config(sigma_prime, s.size)
    rows = np.stack([s, sp])
    a = visible_log_weight(pset, rows)
    return float(0.5 * (a[0] + sign * a[1]))


def mixing_term(params: NdoParams, sigma, sigma_prime) -> complex:
    """Closed-form auxiliary trace for one configuration pair:
    sum_k log(1 + exp[U_lam^[k].(s+s')/2 + i U_mu^[k].(s-s')/2 + d_k])."""
    s = _as_config(sigma, params.n_visible)
    sp = _as_config(sigma_prime, params.n_visible)
    z = mixing_z(params, (0.5 * (s + sp))[None, :], (0.5 * (s - sp))[None, :])
    return complex(log1pexp_complex(z).sum())


def log_rho_unnormalized(params: NdoParams, sigma, sigma_prime) -> complex:
    """Complex log of one unnormalized density-matrix element."""
    s = _as_config(sigma, params.n_visible)[None, :]
    sp = _as_config(sigma_prime, params.n_visible)[None, :]
    return complex(log_rho_pairs(params, s, sp)[0])


def rho_unnormalized(params: NdoParams, sigma, sigma_prime) -> complex:
    """One unnormalized density-matrix element (exponentiated)."""
    lr = log_rho_unnormalized(params, sigma, sigma_prime)
    if lr.real > _EXP_GUARD:
        raise NumericalDomainError(
            f"unnormalized element overflows: log magnitude {lr.real:.1f}"
        )
    return complex(np.exp(lr))


def _check_cap(params: NdoParams):
    if params.n_visible > MAX_QUBITS:
        raise ValueError(
            f"{params.n_visible} qubits exceeds the enumeration cap of {MAX_QUBITS}"
        )


def _log_diag(params: NdoParams) -> np.ndarray:
    s = enumerate_configs(params.n_visible).astype(float)
    return log_rho_pairs(params, s, s).real


def log_partition(params: NdoParams) -> float:
    """log of the normalization sum over all diagonal elements."""
    _check_cap(params)
    diag = _log_diag(params)
    m = float(diag.max())
    return m + float(np.log(np.exp(diag - m).sum()))


def partition(params: NdoParams) -> float:
    """Normalization constant: sum of all unnormalized diagonal elements.

    Depends only on the amplitude set. Use :func:`log_partition` when
    parameters are large enough to overflow the plain sum.
    """
    lz = log_partition(params)
    if lz > _EXP_GUARD:
        raise NumericalDomainError(f"partition overflows: log Z = {lz:.1f}")
    return float(np.exp(lz))


def materialize(params: NdoParams) -> DensityMatrix:
    """Dense normalized density matrix over all 2^N configurations."""
    _check_cap(params)
    n = params.n_visible
    dim = 2**n
    s = enumerate_configs(n).astype(float)
    left = np.repeat(np.arange(dim), dim)
    right = np.tile(np.arange(dim), dim)
    logrho = log_rho_pairs(params, s[left], s[right]).reshape(dim, dim)
    diag = logrho.diagonal().real
    m = float(diag.max())
    log_z = m + float(np.log(np.exp(diag - m).sum()))
    rho = np.exp(logrho - log_z)
    return DensityMatrix(dim=dim, matrix=rho)


def log_marginal(pset: ParamSet, sigma, aux) -> float:
    """Hidden-marginalized log weight of a (visible, auxiliary) joint
    configuration; the auxiliary bias term is skipped for the phase set."""
    s = _as_config(sigma)
    a = _as_config(aux, pset.U.shape[0])
    total = visible_log_weight(pset, s[None, :])[0]
    total += float(a @ pset.U @ s)
    if pset.d is not None:
        total += float(pset.d @ a)
    return float(total)


def psi_amplitude(params: NdoParams, sigma, aux) -> complex:
    """Purified wave-function coefficient of a (visible, auxiliary) pair:
    sqrt of the normalized amplitude weight times the phase factor."""
    log_z = log_partition(params)
    lp_lam = log_marginal(params.lam, sigma, aux)
    lp_mu = log_marginal(params.mu, sigma, aux)
    return complex(np.exp(0.5 * (lp_lam - log_z) + 0.5j * lp_mu))

"""Block Gibbs sampling over the three-layer network and the Monte
Carlo estimator for sparse observables.

The joint distribution factorizes per layer given the others, so one
sweep updates whole layers at once in the fixed order hidden ->
auxiliary -> visible. Hidden and auxiliary units are conditionally
independent given the visible layer, which makes that order a valid
block scheme with the full Boltzmann distribution stationary.

Randomness: every chain owns a ``numpy.random.Generator`` (PCG64)
seeded from an integer, so trajectories are bit-reproducible. Parallel
chains should be given seeds spawned from one ``SeedSequence``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .model import NdoParams, ParamSet, visible_log_weight
from .qcore import NumericalDomainError, enumerate_configs, index_to_bits

# |exponent| above this in the amplitude-ratio weight is treated as an
# overflow rather than silently returning inf.
RATIO_LOG_GUARD = 500.0

DEFAULT_BURN_IN = 1000
N_ERROR_BATCHES = 30


@dataclass
class SpinConfig:
    """Binary configuration of the three layers; hidden may be absent
    when it has been marginalized out."""

    sigma: np.ndarray
    aux: np.ndarray
    hidden: np.ndarray | None = None


@dataclass
class ChainState:
    """One Markov chain: current configuration, generator, sweep count."""

    config: SpinConfig
    rng: np.random.Generator
    seed: int
    sweep_count: int = 0


def conditional_hidden(pset: ParamSet, sigma) -> np.ndarray:
    """P(h_i = 1 | sigma) = logistic(W^[i] sigma + c_i), factorized."""
    s = np.asarray(sigma, dtype=float)
    return expit(pset.W @ s + pset.c)


def conditional_aux(pset: ParamSet, sigma) -> np.ndarray:
    """P(a_k = 1 | sigma) = logistic(U^[k] sigma + d_k), factorized."""
    s = np.asarray(sigma, dtype=float)
    return expit(pset.U @ s + pset.d)


def conditional_visible(pset: ParamSet, hidden, aux) -> np.ndarray:
    """P(sigma_j = 1 | h, a) = logistic(h.W_:j + a.U_:j + b_j), factorized."""
    h = np.asarray(hidden, dtype=float)
    a = np.asarray(aux, dtype=float)
    return expit(h @ pset.W + a @ pset.U + pset.b)


def init_chain(pset: ParamSet, seed: int, sigma0=None) -> ChainState:
    """Fresh chain; the visible layer starts at ``sigma0`` or a uniform
    random configuration, latent layers from their conditionals."""
    rng = np.random.default_rng(seed)
    n = pset.W.shape[1]
    if sigma0 is None:
        sigma = (rng.random(n) < 0.5).astype(np.uint8)
    else:
        sigma = np.asarray(sigma0, dtype=np.uint8).copy()
    hidden = (rng.random(pset.W.shape[0]) < conditional_hidden(pset, sigma)).astype(np.uint8)
    aux = (rng.random(pset.U.shape[0]) < conditional_aux(pset, sigma)).astype(np.uint8)
    return ChainState(SpinConfig(sigma, aux, hidden), rng, seed)


def gibbs_sweep(state: ChainState, pset: ParamSet) -> ChainState:
    """One block update in the fixed order hidden -> auxiliary -> visible.

    Mutates and returns the state; the sweep counter increments by one.
    """
    rng = state.rng
    sigma = state.config.sigma.astype(float)
    hidden = (rng.random(pset.W.shape[0]) < conditional_hidden(pset, sigma)).astype(np.uint8)
    aux = (rng.random(pset.U.shape[0]) < conditional_aux(pset, sigma)).astype(np.uint8)
    p_vis = conditional_visible(pset, hidden, aux)
    new_sigma = (rng.random(p_vis.size) < p_vis).astype(np.uint8)
    state.config = SpinConfig(new_sigma, aux, hidden)
    state.sweep_count += 1
    return state


def _sweep_batch(pset: ParamSet, sigma: np.ndarray, rng: np.random.Generator):
    """Vectorized sweep over chains stacked as rows of ``sigma``."""
    ph = expit(sigma @ pset.W.T + pset.c)
    hidden = (rng.random(ph.shape) < ph).astype(float)
    pa = expit(sigma @ pset.U.T + pset.d)
    aux = (rng.random(pa.shape) < pa).astype(float)
    pv = expit(hidden @ pset.W + aux @ pset.U + pset.b)
    new_sigma = (rng.random(pv.shape) < pv).astype(float)
    return new_sigma, aux, hidden


def cd_negative_sample(pset: ParamSet, data_sigma, k: int, seed: int) -> SpinConfig:
    """Contrastive-divergence chain: seeded at a data configuration and
    advanced ``k`` sweeps; returns the final configuration."""
    if k < 1:
        raise ValueError("contrastive divergence needs k >= 1")
    state = init_chain(pset, seed, sigma0=data_sigma)
    for _ in range(k):
        gibbs_sweep(state, pset)
    return state.config


def cd_sweep_batch(pset: ParamSet, sigma0: np.ndarray, k: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Advance a batch of chains (rows) ``k`` sweeps; returns the final
    visible configurations. Used for the training negative phase."""
    if k < 1:
        raise ValueError("contrastive divergence needs k >= 1")
    sigma = np.asarray(sigma0, dtype=float)
    for _ in range(k):
        sigma, _, _ = _sweep_batch(pset, sigma, rng)
    return sigma


@dataclass
class SparseObservable:
    """Operator on the visible system given row-wise: for each visible
    index ``s``, ``rows[s]`` lists the nonzero (s', O_{s's}) pairs."""

    n_sites: int
    rows: list = field(default_factory=list)

    @classmethod
    def identity(cls, n_sites: int) -> "SparseObservable":
        dim = 2**n_sites
        return cls(n_sites, [[(s, 1.0 + 0.0j)] for s in range(dim)])

    @classmethod
    def pauli(cls, letters: str) -> "SparseObservable":
        """Tensor product of single-site Paulis, e.g. ``"ZI"`` or ``"XX"``.

        Each row has exactly one nonzero: the X/Y sites flip, Z/Y sites
        contribute outcome-dependent signs (Y an extra factor of i).
        """
        if any(ch not in "IXYZ" for ch in letters):
            raise ValueError(f"invalid Pauli string {letters!r}")
        n = len(letters)
        rows = []
        for s in range(2**n):
            bits = index_to_bits(s, n)
            coef = 1.0 + 0.0j
            target = list(bits)
            for j, ch in enumerate(letters):
                if ch == "Z":
                    coef *= 1.0 - 2.0 * bits[j]
                elif ch == "X":
                    target[j] ^= 1
                elif ch == "Y":
                    target[j] ^= 1
                    coef *= 1j * (1.0 - 2.0 * bits[j])
            t = 0
            for b in target:
                t = (t << 1) | int(b)
            rows.append([(t, coef)])
        return cls(n, rows)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, tol: float = 0.0) -> "SparseObservable":
        m = np.asarray(matrix, dtype=complex)
        dim = m.shape[0]
        n = int(round(np.log2(dim)))
        rows = []
        for s in range(dim):
            col = m[:, s]
            rows.append([(int(sp), complex(col[sp]))
                         for sp in np.nonzero(np.abs(col) > tol)[0]])
        return cls(n, rows)

    def to_dense(self) -> np.ndarray:
        dim = 2**self.n_sites
        m = np.zeros((dim, dim), dtype=complex)
        for s, entries in enumerate(self.rows):
            for sp, coef in entries:
                m[sp, s] = coef
        return m


@dataclass(frozen=True)
class ObservableEstimate:
    """Monte Carlo estimate with a batch-means standard error."""

    mean: complex
    stderr: float
    n_samples: int


def _joint_log_weight_parts(pset: ParamSet, configs: np.ndarray):
    """Per visible configuration: hidden-marginalized log weight and the
    auxiliary coupling row, so log p(sigma, a) = base[s] + a . coup[s] (+ d.a)."""
    base = visible_log_weight(pset, configs)
    coup = configs @ pset.U.T
    return base, coup


def estimate_observable(
    params: NdoParams,
    observable: SparseObservable,
    n_samples: int,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
) -> ObservableEstimate:
    """Monte Carlo average of a sparse observable over the purified state.

    Samples (sigma, a) from the amplitude distribution with a Gibbs
    chain, then averages the importance-weighted row sums

        sum_{s'} sqrt(p(s', a) / p(s, a)) * exp(i(phi(s, a) - phi(s', a))) * O_{s's}

    Amplitude ratios are formed in log space and guarded against
    overflow. The standard error comes from 30 contiguous batch means.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if observable.n_sites != params.n_visible:
        raise ValueError("observable size does not match the model")
    n = params.n_visible
    rng = np.random.default_rng(seed)
    sigma = (rng.random((1, n)) < 0.5).astype(float)
    for _ in range(burn_in):
        sigma, aux, _ = _sweep_batch(params.lam, sigma, rng)

    sig_idx = np.empty(n_samples, dtype=np.int64)
    aux_samples = np.empty((n_samples, params.n_aux))
    weights = 2 ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for t in range(n_samples):
        sigma, aux, _ = _sweep_batch(params.lam, sigma, rng)
        sig_idx[t] = int(sigma[0] @ weights)
        aux_samples[t] = aux[0]

    configs = enumerate_configs(n).astype(float)
    lam_base, lam_coup = _joint_log_weight_parts(params.lam, configs)
    mu_base, mu_coup = _joint_log_weight_parts(params.mu, configs)
    # d-terms cancel in the lam ratio (same a) and are absent for mu.

    values = np.zeros(n_samples, dtype=complex)
    for s in range(2**n):
        mask = sig_idx == s
        if not np.any(mask):
            continue
        a_rows = aux_samples[mask]
        acc = np.zeros(a_rows.shape[0], dtype=complex)
        for sp, coef in observable.rows[s]:
            log_ratio = 0.5 * (lam_base[sp] - lam_base[s]
                               + a_rows @ (lam_coup[sp] - lam_coup[s]))
            if np.any(np.abs(log_ratio) > RATIO_LOG_GUARD):
                raise NumericalDomainError(
                    "amplitude ratio exponent exceeded the log-space guard"
                )
            phase = 0.5 * (mu_base[s] - mu_base[sp]
                           + a_rows @ (mu_coup[s] - mu_coup[sp]))
            acc += np.exp(log_ratio + 1j * phase) * coef
        values[mask] = acc

    mean = complex(values.mean())
    batches = np.array_split(values, min(N_ERROR_BATCHES, n_samples))
    bm = np.array([b.mean() for b in batches])
    nb = len(bm)
    if nb > 1:
        var = (np.var(bm.real, ddof=1) + np.var(bm.imag, ddof=1)) / nb
        stderr = float(np.sqrt(var))
    else:
        stderr = float("inf")
    return ObservableEstimate(mean=mean, stderr=stderr, n_samples=n_samples)

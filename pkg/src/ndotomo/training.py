"""Training the neural density operator on basis-labeled measurements.

The objective is the data-averaged negative log-likelihood of the
rotated diagonal elements,

    nll = sum_b ||D_b||^-1 sum_{records in D_b} -log rho^b(s, s),

with rho^b the state rotated into the measurement basis. Its gradient
splits into a data term (a quasiprobability-weighted average of
matrix-element gradients over configuration pairs that differ from the
record only at rotated sites) and, for the amplitude set, a model term
from the normalization. The model term enters once per record weight:
the derivative of the stated objective carries it with total weight
sum_b 1 over a full dataset, which is what the finite-difference checks
pin down.

Everything is evaluated on a precomputed table of configuration pairs,
so one parameter update is a handful of dense matrix products.
"""

import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .datagen import Dataset
from .gibbs import cd_sweep_batch
from .model import (
    Gradients,
    NdoParams,
    ParamSet,
    init_params,
    log_partition,
    log_rho_pairs,
    materialize,
    mix_log_and_logistic,
    pack_params,
    softplus,
    unpack_params,
)
from .qcore import (
    LOCAL_UNITARIES,
    DensityMatrix,
    NumericalDomainError,
    ensure_within_cap,
    enumerate_configs,
    fidelity,
)

QSUM_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Pair tables: which (sigma, sigma') pairs a record touches, with which
# rotation coefficients
# ---------------------------------------------------------------------------

def _class_pairs(basis: str, outcome: np.ndarray):
    """Configuration pairs and coefficients for one (basis, outcome).

    Only the t sites with a non-identity local rotation vary; the double
    sum then runs over 4^t pairs with coefficients
    U(outcome, sigma) * conj(U(outcome, sigma')).
    """
    n = len(basis)
    rot_sites = [j for j, ch in enumerate(basis) if ch != "Z"]
    base_idx = 0
    for j, bit in enumerate(outcome):
        if j not in rot_sites:
            base_idx += int(bit) << (n - 1 - j)
    site_weight = [1 << (n - 1 - j) for j in rot_sites]
    t = len(rot_sites)
    side_idx = np.empty(2**t, dtype=np.int64)
    side_coef = np.empty(2**t, dtype=complex)
    for x, bits in enumerate(enumerate_configs(t)):
        idx = base_idx
        coef = 1.0 + 0.0j
        for pos, j in enumerate(rot_sites):
            idx += int(bits[pos]) * site_weight[pos]
            coef *= LOCAL_UNITARIES[basis[j]][int(outcome[j]), int(bits[pos])]
        side_idx[x] = idx
        side_coef[x] = coef
    left = np.repeat(side_idx, 2**t)
    right = np.tile(side_idx, 2**t)
    coefs = np.repeat(side_coef, 2**t) * np.tile(side_coef.conj(), 2**t)
    return left, right, coefs


class PairEngine:
    """Precomputed evaluation table for one dataset.

    Holds the union of configuration pairs touched by any record class
    (always including the diagonal), a dense class-by-pair coefficient
    matrix, per-class record counts/weights, and the flat class index of
    every record for minibatch bookkeeping.
    """

    def __init__(self, dataset: Dataset, params_like: NdoParams):
        self.n = dataset.n_qubits
        if self.n != params_like.n_visible:
            raise ValueError("dataset and model disagree on qubit count")
        ensure_within_cap(self.n)
        self.n_hidden = params_like.n_hidden
        self.n_aux = params_like.n_aux
        dim = 2**self.n
        self.configs = enumerate_configs(self.n).astype(float)

        pair_pos = {(i, i): i for i in range(dim)}
        pairs = [(i, i) for i in range(dim)]
        class_entries = []
        class_keys = []
        class_count = []
        class_weight = []
        record_class_parts = []
        class_of = {}
        for basis, rec in dataset.groups.items():
            group_weight = 1.0 / rec.shape[0]
            rec_idx = rec.astype(np.int64) @ (1 << np.arange(self.n - 1, -1, -1))
            for outcome_idx in np.unique(rec_idx):
                key = (basis, int(outcome_idx))
                outcome_bits = ((outcome_idx >> np.arange(self.n - 1, -1, -1)) & 1)
                left, right, coefs = _class_pairs(basis, outcome_bits)
                entries = []
                for li, ri, cf in zip(left, right, coefs):
                    pos = pair_pos.setdefault((li, ri), len(pairs))
                    if pos == len(pairs):
                        pairs.append((li, ri))
                    entries.append((pos, cf))
                class_of[key] = len(class_keys)
                class_keys.append(key)
                class_entries.append(entries)
                class_count.append(int((rec_idx == outcome_idx).sum()))
                class_weight.append(group_weight)
            record_class_parts.append(
                np.array([class_of[(basis, int(i))] for i in rec_idx], dtype=np.int64)
            )

        self.n_classes = len(class_keys)
        self.n_pairs = len(pairs)
        self.class_keys = class_keys
        self.class_count = np.array(class_count, dtype=np.int64)
        self.class_weight = np.array(class_weight)
        self.record_class = np.concatenate(record_class_parts)
        shifts = np.arange(self.n - 1, -1, -1)
        outcome_idx = np.array([key[1] for key in class_keys], dtype=np.int64)
        self.class_outcome = ((outcome_idx[:, None] >> shifts) & 1).astype(float)
        self.coef = np.zeros((self.n_classes, self.n_pairs), dtype=complex)
        for ci, entries in enumerate(class_entries):
            for pos, cf in entries:
                self.coef[ci, pos] += cf

        pair_arr = np.array(pairs, dtype=np.int64)
        self.pair_left = pair_arr[:, 0]
        self.pair_right = pair_arr[:, 1]
        self.diag_pos = np.arange(dim)
        self.s_left = self.configs[self.pair_left]
        self.s_right = self.configs[self.pair_right]
        self.half_sum = 0.5 * (self.s_left + self.s_right)
        self.half_dif = 0.5 * (self.s_left - self.s_right)
        self.half_sum_c = self.half_sum.astype(complex)
        self.i_half_dif = 1j * self.half_dif

        n, nh, na = self.n, self.n_hidden, self.n_aux
        self.p_lam = nh * n + na * n + n + nh + na
        self.p_mu = nh * n + na * n + n + nh
        self.n_params = self.p_lam + self.p_mu

    # -- per-update evaluation ---------------------------------------------

    def pair_eval(self, params: NdoParams, want_grads: bool):
        """Log matrix elements on the pair table and, optionally, the
        per-pair gradient matrix in pack_params order."""
        cf = self.configs
        nh = self.n_hidden
        pl, pr = self.pair_left, self.pair_right
        # both hidden layers in one product: columns [lam | mu]
        th = cf @ np.concatenate([params.lam.W, params.mu.W]).T
        th += np.concatenate([params.lam.c, params.mu.c])
        sp = softplus(th)
        a_l = sp[:, :nh].sum(axis=1) + cf @ params.lam.b
        a_m = sp[:, nh:].sum(axis=1) + cf @ params.mu.b
        z = self.half_sum @ params.lam.U.T + params.lam.d \
            + 1j * (self.half_dif @ params.mu.U.T)
        mix, sc = mix_log_and_logistic(z)
        log_rho = 0.5 * (a_l[pl] + a_l[pr]) + 0.5j * (a_m[pl] - a_m[pr]) \
            + mix.sum(axis=1)
        if not want_grads:
            return log_rho, None

        lg = expit(th)
        lg_left, lg_right = lg[pl], lg[pr]
        sl, sr = self.s_left, self.s_right
        m_pairs = pl.size
        gw_l = 0.5 * (lg_left[:, :nh, None] * sl[:, None, :]
                      + lg_right[:, :nh, None] * sr[:, None, :])
        gu_l = sc[:, :, None] * self.half_sum[:, None, :]
        gc_l = 0.5 * (lg_left[:, :nh] + lg_right[:, :nh])
        gw_m = 0.5j * (lg_left[:, nh:, None] * sl[:, None, :]
                       - lg_right[:, nh:, None] * sr[:, None, :])
        gu_m = sc[:, :, None] * self.i_half_dif[:, None, :]
        gc_m = 0.5j * (lg_left[:, nh:] - lg_right[:, nh:])
        grads = np.concatenate([
            gw_l.reshape(m_pairs, -1), gu_l.reshape(m_pairs, -1),
            self.half_sum_c, gc_l, sc,
            gw_m.reshape(m_pairs, -1), gu_m.reshape(m_pairs, -1),
            self.i_half_dif, gc_m,
        ], axis=1)
        return log_rho, grads

    def class_terms(self, log_rho):
        """Shifted diagonal weights and per-class quasiprobability sums."""
        diag = log_rho[self.diag_pos].real
        shift = float(diag.max())
        diag_w = np.exp(diag - shift)
        rho_s = np.exp(log_rho - shift)
        qsum = self.coef @ rho_s
        return shift, diag_w, rho_s, qsum

    def check_qsums(self, qsum):
        re = qsum.real
        if np.any(re <= QSUM_FLOOR):
            ci = int(np.argmin(re))
            basis, outcome = self.class_keys[ci]
            raise NumericalDomainError(
                f"non-positive rotated diagonal for basis {basis}, "
                f"outcome {outcome:0{self.n}b}: {re[ci]:.3e}"
            )
        return re

    def nll_value(self, params: NdoParams, class_tot_weight=None) -> float:
        log_rho, _ = self.pair_eval(params, want_grads=False)
        _, diag_w, _, qsum = self.class_terms(log_rho)
        re = self.check_qsums(qsum)
        if class_tot_weight is None:
            class_tot_weight = self.class_count * self.class_weight
        per_class = np.log(diag_w.sum()) - np.log(re)
        return float(class_tot_weight @ per_class)

    def gradient_vector(
        self,
        params: NdoParams,
        class_counts: np.ndarray,
        scale: float,
        negative_phase: str,
        cd_k: int,
        rng: "np.random.Generator | None",
        cd_seeds: "np.ndarray | None" = None,
    ) -> np.ndarray:
        """Gradient of the weighted NLL in pack_params order."""
        log_rho, grads = self.pair_eval(params, want_grads=True)
        _, diag_w, rho_s, qsum = self.class_terms(log_rho)
        self.check_qsums(qsum)
        weighted = rho_s[:, None] * grads
        numer = self.coef @ weighted
        pos = (numer / qsum[:, None]).real
        wvec = class_counts * self.class_weight
        data_term = -(wvec @ pos)
        if negative_phase == "exact":
            p_diag = diag_w / diag_w.sum()
            neg = p_diag @ grads[self.diag_pos].real
        else:
            if cd_seeds is None:
                # chains start from the batch's own measured outcomes
                cd_seeds = np.repeat(
                    self.class_outcome, class_counts.astype(np.int64), axis=0)
            final = cd_sweep_batch(params.lam, cd_seeds, cd_k, rng)
            neg = diag_gradient_rows(params, final).mean(axis=0)
        return scale * (data_term + wvec.sum() * neg)


def diag_gradient_rows(params: NdoParams, sigmas: np.ndarray) -> np.ndarray:
    """Rows of the diagonal log-element gradient, pack_params order.

    Only the amplitude block is nonzero: the diagonal element depends on
    the phase set not at all.
    """
    s = np.asarray(sigmas, dtype=float)
    m = s.shape[0]
    lg = expit(s @ params.lam.W.T + params.lam.c)
    sa = expit(s @ params.lam.U.T + params.lam.d)
    gw = lg[:, :, None] * s[:, None, :]
    gu = sa[:, :, None] * s[:, None, :]
    n, nh, na = params.n_visible, params.n_hidden, params.n_aux
    p_mu = nh * n + na * n + n + nh
    return np.concatenate([
        gw.reshape(m, -1), gu.reshape(m, -1), s, lg, sa,
        np.zeros((m, p_mu)),
    ], axis=1)


# ---------------------------------------------------------------------------
# Spec surface: nll, rotated diagonal, quasiprobability average, gradients
# ---------------------------------------------------------------------------

def nll(dataset: Dataset, params: NdoParams) -> float:
    """Data-averaged negative log-likelihood of the rotated diagonals."""
    return PairEngine(dataset, params).nll_value(params)


def rotated_diagonal(params: NdoParams, basis: str, outcome) -> complex:
    """One diagonal element of the state rotated into a measurement
    basis, via the 4^t-term restricted double sum."""
    outcome = np.asarray(outcome).astype(np.int64)
    left, right, coefs = _class_pairs(basis, outcome)
    configs = enumerate_configs(params.n_visible).astype(float)
    log_rho = log_rho_pairs(params, configs[left], configs[right])
    shift = log_partition(params)
    return complex(np.sum(coefs * np.exp(log_rho - shift)))


def quasi_average(params: NdoParams, basis: str, outcome, integrand) -> np.ndarray:
    """Quasiprobability-weighted average of an integrand over the
    restricted configuration pairs of one record.

    ``integrand(sigma_bits, sigma_prime_bits)`` returns an array; the
    result is sum(Q * f) / sum(Q) with Q built from unnormalized matrix
    elements (the normalization cancels).
    """
    outcome = np.asarray(outcome).astype(np.int64)
    left, right, coefs = _class_pairs(basis, outcome)
    configs = enumerate_configs(params.n_visible).astype(float)
    log_rho = log_rho_pairs(params, configs[left], configs[right])
    shift = float(log_rho.real.max())
    q = coefs * np.exp(log_rho - shift)
    denom = q.sum()
    if abs(denom) < QSUM_FLOOR:
        raise NumericalDomainError(
            f"vanishing quasiprobability sum for basis {basis}"
        )
    values = [np.asarray(integrand(configs[li], configs[ri]), dtype=complex)
              for li, ri in zip(left, right)]
    total = sum(qi * vi for qi, vi in zip(q, values))
    return total / denom


def _full_gradient(dataset, params, negative_phase, cd_k, seed) -> np.ndarray:
    engine = PairEngine(dataset, params)
    counts = np.bincount(engine.record_class, minlength=engine.n_classes).astype(float)
    rng = np.random.default_rng(seed) if negative_phase != "exact" else None
    return engine.gradient_vector(
        params, counts, scale=1.0,
        negative_phase=negative_phase, cd_k=cd_k, rng=rng,
    )


def _split_vector(vec: np.ndarray, params: NdoParams) -> Gradients:
    shaped = unpack_params(vec, params.n_visible, params.n_hidden, params.n_aux)
    return Gradients(lam=shaped.lam, mu=shaped.mu)


def grad_lambda(
    dataset: Dataset,
    params: NdoParams,
    negative_phase_mode: str = "exact",
    cd_k: int = 10,
    seed: int = 0,
) -> ParamSet:
    """Amplitude-set gradient of the NLL: quasiprobability data term
    plus the normalization (model) term, exact or contrastive-divergence
    estimated."""
    mode = _check_mode(negative_phase_mode)
    vec = _full_gradient(dataset, params, mode, cd_k, seed)
    return _split_vector(vec, params).lam


def grad_mu(dataset: Dataset, params: NdoParams) -> ParamSet:
    """Phase-set gradient of the NLL. The normalization is independent
    of the phase set, so there is no model term."""
    vec = _full_gradient(dataset, params, "exact", 1, 0)
    return _split_vector(vec, params).mu


def _check_mode(mode: str) -> str:
    if mode in ("exact",):
        return "exact"
    if mode in ("cd", "cd-k"):
        return "cd"
    raise ValueError(f"unknown negative-phase mode {mode!r}")


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    """SGD or AdaDelta state over the packed parameter vector."""

    kind: str
    learning_rate: float = 0.05
    rho: float = 0.95
    eps: float = 1e-6
    acc_grad_sq: np.ndarray | None = None
    acc_delta_sq: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("sgd", "adadelta"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("adadelta decay must lie in (0, 1)")

    def ensure(self, n_params: int):
        if self.kind == "adadelta" and self.acc_grad_sq is None:
            self.acc_grad_sq = np.zeros(n_params)
            self.acc_delta_sq = np.zeros(n_params)

    def step_vector(self, vec: np.ndarray, grad: np.ndarray) -> None:
        """Apply one update in place."""
        if grad.shape != vec.shape:
            raise ValueError("gradient and parameter shapes differ")
        if self.kind == "sgd":
            vec -= self.learning_rate * grad
            return
        self.ensure(vec.size)
        self.acc_grad_sq *= self.rho
        self.acc_grad_sq += (1.0 - self.rho) * grad**2
        delta = -np.sqrt(self.acc_delta_sq + self.eps) \
            / np.sqrt(self.acc_grad_sq + self.eps) * grad
        self.acc_delta_sq *= self.rho
        self.acc_delta_sq += (1.0 - self.rho) * delta**2
        vec += delta


def optimizer_step(
    state: OptimizerState, params: NdoParams, grads: Gradients
) -> tuple[NdoParams, OptimizerState]:
    """One optimizer update on a parameter container; returns the
    updated parameters and (mutated) state."""
    vec = pack_params(params)
    gvec = pack_params(NdoParams(
        params.n_visible, params.n_hidden, params.n_aux, grads.lam, grads.mu,
    ))
    state.step_vector(vec, gvec)
    return unpack_params(vec, params.n_visible, params.n_hidden, params.n_aux), state


# ---------------------------------------------------------------------------
# The training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    n_hidden: int = 1
    n_aux: int = 2
    epochs: int = 1000
    batch_size: int = 10
    optimizer: str = "adadelta"
    learning_rate: float = 0.05
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    negative_phase: str = "exact"
    cd_k: int = 10
    seed: int = 0
    init_width: float = 0.01
    holdout_fraction: float = 0.0
    progress: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.cd_k < 1:
            raise ValueError("epochs, batch_size and cd_k must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout fraction must lie in [0, 1)")
        _check_mode(self.negative_phase)


@dataclass
class EpochRecord:
    epoch: int
    nll: float
    fidelity: float | None = None


@dataclass
class TrainReport:
    epochs: list
    best_epoch: int
    best_nll: float
    best_params: NdoParams
    final_params: NdoParams


def _holdout_split(dataset: Dataset, fraction: float, rng) -> tuple[Dataset, Dataset]:
    train_groups, hold_groups = {}, {}
    for basis, rec in dataset.groups.items():
        n = rec.shape[0]
        n_hold = int(round(fraction * n))
        n_hold = min(max(n_hold, 1), n - 1)
        perm = rng.permutation(n)
        hold_groups[basis] = rec[perm[:n_hold]]
        train_groups[basis] = rec[perm[n_hold:]]
    return (Dataset(dataset.n_qubits, train_groups),
            Dataset(dataset.n_qubits, hold_groups))


def train(
    dataset: Dataset,
    config: TrainConfig,
    reference: DensityMatrix | None = None,
) -> TrainReport:
    """Fit an NDO to a dataset; returns the per-epoch trace and the
    parameters at the epoch of minimum selection NLL.

    Selection NLL is measured on the training records unless a holdout
    fraction is configured. With a reference state given, fidelity is
    recorded each epoch (diagnostic only; selection stays NLL-based).
    """
    mode = _check_mode(config.negative_phase)
    ss = np.random.SeedSequence(config.seed)
    init_ss, shuffle_ss, cd_ss = ss.spawn(3)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    cd_rng = np.random.default_rng(cd_ss)

    if config.holdout_fraction > 0.0:
        train_set, selection_set = _holdout_split(
            dataset, config.holdout_fraction, shuffle_rng)
    else:
        train_set = selection_set = dataset

    params0 = init_params(
        dataset.n_qubits, config.n_hidden, config.n_aux,
        seed=init_ss, width=config.init_width,
    )
    vec = pack_params(params0)
    # live views into vec: in-place vector updates move the parameters
    params = unpack_params(vec, dataset.n_qubits, config.n_hidden, config.n_aux)

    engine = PairEngine(train_set, params)
    sel_engine = engine if selection_set is train_set else PairEngine(selection_set, params)
    sel_tot_weight = sel_engine.class_count * sel_engine.class_weight

    opt = OptimizerState(
        kind=config.optimizer,
        learning_rate=config.learning_rate,
        rho=config.adadelta_rho,
        eps=config.adadelta_eps,
    )
    opt.ensure(vec.size)

    m_total = engine.record_class.size
    batch = max(1, config.batch_size)
    records = []
    best_nll = np.inf
    best_epoch = -1
    best_vec = vec.copy()

    epoch = 0
    try:
        for epoch in range(config.epochs):
            order = shuffle_rng.permutation(m_total)
            shuffled = engine.record_class[order]
            for start in range(0, m_total, batch):
                ids = shuffled[start:start + batch]
                counts = np.bincount(ids, minlength=engine.n_classes).astype(float)
                grad = engine.gradient_vector(
                    params, counts, scale=m_total / ids.size,
                    negative_phase=mode, cd_k=config.cd_k, rng=cd_rng,
                )
                opt.step_vector(vec, grad)
            sel_nll = sel_engine.nll_value(params, sel_tot_weight)
            fid = None
            if reference is not None:
                fid = fidelity(reference, materialize(params))
            records.append(EpochRecord(epoch=epoch, nll=sel_nll, fidelity=fid))
            if sel_nll < best_nll:
                best_nll = sel_nll
                best_epoch = epoch
                best_vec = vec.copy()
            if config.progress:
                fid_part = "" if fid is None else f" fidelity={fid:.6f}"
                print(f"epoch {epoch + 1}/{config.epochs} nll={sel_nll:.6f}{fid_part}",
                      file=sys.stderr)
    except NumericalDomainError as err:
        raise NumericalDomainError(f"training aborted at epoch {epoch}: {err}") from err

    best_params = unpack_params(
        best_vec, dataset.n_qubits, config.n_hidden, config.n_aux)
    final_params = unpack_params(
        vec.copy(), dataset.n_qubits, config.n_hidden, config.n_aux)
    return TrainReport(
        epochs=records,
        best_epoch=best_epoch,
        best_nll=float(best_nll),
        best_params=best_params,
        final_params=final_params,
    )

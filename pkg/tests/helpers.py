"""Shared test fixtures and independent brute-force oracles.

The oracles here deliberately avoid the package's closed-form code
paths: they enumerate hidden/auxiliary configurations and sum plain
Boltzmann weights, so they can certify the analytic expressions.
"""

import numpy as np

from ndotomo.model import NdoParams, ParamSet
from ndotomo.qcore import enumerate_configs


def random_params(rng, n_visible, n_hidden, n_aux, scale=1.0) -> NdoParams:
    """Parameters with entries uniform in [-scale, scale]."""

    def draw(*shape):
        return rng.uniform(-scale, scale, size=shape)

    lam = ParamSet(
        W=draw(n_hidden, n_visible),
        U=draw(n_aux, n_visible),
        b=draw(n_visible),
        c=draw(n_hidden),
        d=draw(n_aux),
    )
    mu = ParamSet(
        W=draw(n_hidden, n_visible),
        U=draw(n_aux, n_visible),
        b=draw(n_visible),
        c=draw(n_hidden),
        d=None,
    )
    return NdoParams(n_visible, n_hidden, n_aux, lam, mu)


def brute_joint_weight(pset: ParamSet, sigma, aux, hidden) -> float:
    """Unnormalized Boltzmann weight of one full (sigma, aux, hidden)
    configuration, including the aux bias only when the set carries one."""
    s = np.asarray(sigma, dtype=float)
    a = np.asarray(aux, dtype=float)
    h = np.asarray(hidden, dtype=float)
    e = h @ pset.W @ s + a @ pset.U @ s + pset.b @ s + pset.c @ h
    if pset.d is not None:
        e += pset.d @ a
    return float(np.exp(e))


def brute_marginal(pset: ParamSet, sigma, aux) -> float:
    """Sum of joint weights over every hidden configuration."""
    n_hidden = pset.W.shape[0]
    return sum(
        brute_joint_weight(pset, sigma, aux, h)
        for h in enumerate_configs(n_hidden)
    )


def brute_partition(params: NdoParams) -> float:
    """Double enumeration of the amplitude weight over (sigma, aux)."""
    total = 0.0
    for s in enumerate_configs(params.n_visible):
        for a in enumerate_configs(params.n_aux):
            total += brute_marginal(params.lam, s, a)
    return total


def brute_psi(params: NdoParams, sigma, aux, z=None) -> complex:
    """Wave-function coefficient built from brute-force marginals only."""
    if z is None:
        z = brute_partition(params)
    p_lam = brute_marginal(params.lam, sigma, aux)
    phase = 0.5 * np.log(brute_marginal(params.mu, sigma, aux))
    return np.sqrt(p_lam / z) * np.exp(1j * phase)


def brute_density(params: NdoParams) -> np.ndarray:
    """Density matrix assembled as the auxiliary trace of psi psi*."""
    dim = 2**params.n_visible
    z = brute_partition(params)
    configs = enumerate_configs(params.n_visible)
    aux_configs = enumerate_configs(params.n_aux)
    psi = np.array(
        [[brute_psi(params, s, a, z) for a in aux_configs] for s in configs]
    )
    return psi @ psi.conj().T


def random_density(rng, dim) -> np.ndarray:
    """Random full-rank density matrix from a Ginibre draw."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real

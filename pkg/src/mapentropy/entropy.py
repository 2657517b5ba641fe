"""Entropies of states and channels.

All entropy functions take ``base`` (2 for bits, ``math.e`` for nats); the
default is bits. Eigenvalues below ``1e-12 * lambda_max`` are treated as zero.
"""
from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from . import matrixcore as mc
from .channel import Channel, _as_kraus, require_tp
from .haar import MonteCarloEstimate, monte_carlo, random_pure_states


def _log(x, base: float):
    return np.log(x) / math.log(base)


def spectrum_entropy(w: np.ndarray, p: float = 1.0, base: float = 2) -> float:
    """Renyi-p entropy of a probability vector (``p == 1`` is Shannon)."""
    w = np.asarray(w, dtype=float)
    w = w[w > 0]
    if p == 1:
        return float(max(0.0, -np.sum(w * _log(w, base))))
    if p == 0:
        return float(_log(w.size, base))
    if np.isinf(p):
        return float(max(0.0, -_log(w.max(), base)))
    return float(max(0.0, _log(np.sum(w**p), base) / (1.0 - p)))


def von_neumann_entropy(rho, base: float = 2) -> float:
    return spectrum_entropy(mc.psd_eigenvalues(rho), 1.0, base)


def renyi_entropy(rho, p: float, base: float = 2) -> float:
    """``log(sum_i lambda_i^p) / (1 - p)``; ``p == 1`` gives the von Neumann entropy."""
    if p < 0:
        raise ValueError(f"Renyi order must be non-negative, got {p}")
    return spectrum_entropy(mc.psd_eigenvalues(rho), p, base)


def purity(rho) -> float:
    rho = mc.as_matrix(rho)
    return float(np.sum(np.abs(rho) ** 2))


def map_entropy(c: Channel, p: float = 1.0, base: float = 2) -> float:
    """Renyi-p entropy of the Jamiolkowski state ``J(Phi) / n``."""
    require_tp(c)
    return renyi_entropy(c.jamiolkowski_state, p, base)


def map_purity(c: Channel) -> float:
    require_tp(c)
    return purity(c.jamiolkowski_state)


def output_purity(c: Channel, phi) -> float:
    """``tr[Phi(|phi><phi|)^2]`` from the output density matrix."""
    phi = np.asarray(phi, dtype=np.complex128).reshape(-1)
    if phi.size != c.dim_in:
        raise mc.DimensionError(f"state of dimension {phi.size} does not match channel input {c.dim_in}")
    return purity(c(np.outer(phi, phi.conj())))


def output_purity_kraus(c: Channel, phi) -> float:
    """``sum_ij |<phi|K_i^dag K_j|phi>|^2``; an independent route to :func:`output_purity`."""
    phi = np.asarray(phi, dtype=np.complex128).reshape(-1)
    if phi.size != c.dim_in:
        raise mc.DimensionError(f"state of dimension {phi.size} does not match channel input {c.dim_in}")
    v = np.einsum("kab,b->ka", c.kraus, phi)
    gram = v.conj() @ v.T
    return float(np.sum(np.abs(gram) ** 2))


def _batched_purity(k: np.ndarray, phis: np.ndarray):
    v = np.einsum("kab,rb->rka", k, phis)
    rho = np.einsum("rka,rkb->rab", v, v.conj())
    f = np.sum(np.abs(rho) ** 2, axis=(1, 2))
    return f, rho, v


def _batched_gradient(k: np.ndarray, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Phi^dag(Phi(|phi><phi|)) |phi>
    w = np.einsum("rab,rkb->rka", rho, v)
    return np.einsum("kba,rkb->ra", k.conj(), w)


def max_output_purity(c: Channel, restarts: int = 64, seed: int = 0, tol: float = 1e-12,
                      max_iter: int = 20000) -> Tuple[float, np.ndarray]:
    """Best output purity over pure inputs found by multi-start ascent on the sphere.

    Each restart starts from a uniformly random state seeded by ``(seed, restart)``
    and runs projected gradient ascent with step doubling on success and halving
    on failure. A restart stops once an accepted step gains less than ``tol``.
    The result never exceeds the true maximum.

    Returns:
        ``(purity, witness)`` where ``witness`` is the best unit vector found.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    k = c.kraus
    n = c.dim_in
    phis = np.stack([random_pure_states(n, 1, np.random.SeedSequence(entropy=seed, spawn_key=(r,)))[0]
                     for r in range(restarts)])
    f, rho, v = _batched_purity(k, phis)
    step = np.ones(restarts)
    active = np.ones(restarts, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        g = _batched_gradient(k, rho[idx], v[idx])
        g = g - f[idx, None] * phis[idx]
        gnorm = np.linalg.norm(g, axis=1)
        cand = phis[idx] + step[idx, None] * g
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        fc, rc, vc = _batched_purity(k, cand)
        gain = fc - f[idx]
        up = gain > 0
        acc = idx[up]
        phis[acc], f[acc], rho[acc], v[acc] = cand[up], fc[up], rc[up], vc[up]
        step[acc] *= 2.0
        step[idx[~up]] *= 0.5
        done = (up & (gain < tol)) | (step[idx] < 1e-14) | (gnorm < 1e-14)
        active[idx[done]] = False
    best = int(np.argmax(f))
    return float(f[best]), phis[best].copy()


def min_output_entropy_2(c: Channel, restarts: int = 64, seed: int = 0, base: float = 2) -> Tuple[float, np.ndarray]:
    """Estimate of the minimal Renyi-2 output entropy, ``-log`` of the best purity found.

    Since the purity search can only undershoot the maximum, the returned entropy
    is an upper bound on the true value.
    """
    p, witness = max_output_purity(c, restarts, seed)
    return float(max(0.0, -_log(p, base))), witness


def entropy_exchange_state(c: Channel, rho) -> np.ndarray:
    """Matrix ``sigma_ij = tr(K_i rho K_j^dag)`` for the Kraus set as given."""
    rho = mc.as_matrix(rho)
    if rho.shape != (c.dim_in, c.dim_in):
        raise mc.DimensionError(f"state of shape {rho.shape} does not match channel input {c.dim_in}")
    k = c.kraus
    return np.einsum("iab,bc,jac->ij", k, rho, k.conj())


def depolarizing_output_purity(n: int, x: float) -> float:
    """Output purity of the depolarizing channel on any pure input."""
    return (1 - x) ** 2 + 2 * x * (1 - x) / n + x**2 / n


def depolarizing_map_purity(n: int, x: float) -> float:
    """``tr rho(Lambda)^2`` for the depolarizing channel with parameter ``x``."""
    top = 1 - x + x / n**2
    return top**2 + (n**2 - 1) * (x / n**2) ** 2


def depolarizing_min_from_map(n: int, s_map_2: float, base: float = 2) -> float:
    """Minimal Renyi-2 output entropy of a depolarizing channel from its Renyi-2 map entropy.

    ``S_min = -log((1 + n * base^(-S_map)) / (n + 1))``; increasing in ``S_map``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    hi = 2 * math.log(n) / math.log(base)
    if not -1e-12 <= s_map_2 <= hi + 1e-12:
        raise ValueError(f"map entropy {s_map_2} outside [0, {hi}]")
    return float(-math.log((1 + n * base ** (-s_map_2)) / (n + 1), base))


def depolarizing_map_from_min(n: int, s_min_2: float, base: float = 2) -> float:
    """Inverse relation: ``S_map = -log[1 - (1 + 1/n) eps]`` with ``eps = 1 - base^(-S_min)``."""
    eps = 1 - base ** (-s_min_2)
    return float(-math.log(1 - (1 + 1 / n) * eps, base))


def average_output_purity_closed_form(kraus) -> float:
    """Sphere average of the output purity: ``[sum_ij tr(K_i K_i^dag K_j K_j^dag) + sum_ij |tr K_i^dag K_j|^2] / (n(n+1))``."""
    k = _as_kraus(kraus)
    n = k.shape[2]
    return (schwarz_sum(k) + trace_gram_sum(k)) / (n * (n + 1))


def schwarz_sum(kraus) -> float:
    """``sum_ij tr(K_i K_i^dag K_j K_j^dag) = tr[(sum_i K_i K_i^dag)^2]``."""
    k = _as_kraus(kraus)
    a = np.einsum("kij,klj->kil", k, k.conj())
    return float(np.einsum("iab,jba->", a, a).real)


def trace_gram_sum(kraus) -> float:
    """``sum_ij |tr K_i^dag K_j|^2``."""
    k = _as_kraus(kraus)
    g = np.einsum("iab,jab->ij", k.conj(), k)
    return float(np.sum(np.abs(g) ** 2))


def average_output_purity_monte_carlo(c: Channel, samples: int, seed: int, jobs: int = 1) -> MonteCarloEstimate:
    k = c.kraus

    def sampler(rng, count):
        return _batched_purity(k, random_pure_states(c.dim_in, count, rng))[0]

    return monte_carlo(sampler, samples, seed, jobs)

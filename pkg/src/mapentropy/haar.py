"""Haar-random unitaries and pure states, sphere and twirl averages.

Monte Carlo estimators draw samples in fixed-size blocks whose generators are
derived from ``(seed, block index)``. Blocks may be evaluated concurrently, but
they are always merged in block order, so the estimate does not depend on the
number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Literal, Union

import numpy as np

from . import matrixcore as mc

BLOCK_SIZE = 4096
MC_SIGMA_BAND = 4.0


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean with its standard error (entrywise for matrix-valued estimates).

    For complex entries the standard error uses ``sqrt(E|z - mean|^2)``, i.e. the
    real and imaginary spreads combined.
    """

    mean: Union[float, complex, np.ndarray]
    std_error: Union[float, np.ndarray]
    samples: int
    seed: int

    def agrees_with(self, value, band: float = MC_SIGMA_BAND) -> bool:
        dev = np.abs(np.asarray(self.mean) - np.asarray(value))
        return bool(np.all(dev <= band * np.asarray(self.std_error) + 1e-12))

    def z_scores(self, value) -> np.ndarray:
        dev = np.abs(np.asarray(self.mean) - np.asarray(value))
        se = np.asarray(self.std_error)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, dev / np.where(se > 0, se, 1.0), np.where(dev > 1e-12, np.inf, 0.0))
        return z


def _rng(seed):
    return np.random.default_rng(seed)


def haar_unitaries(n: int, count: int, seed=None) -> np.ndarray:
    """Stack of ``count`` Haar-random ``n x n`` unitaries (QR with phase fix)."""
    rng = _rng(seed)
    z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(n: int, seed=None) -> np.ndarray:
    if n < 1:
        raise ValueError("dimension must be positive")
    return haar_unitaries(n, 1, seed)[0]


def random_pure_states(n: int, count: int, seed=None) -> np.ndarray:
    """Uniform points on the unit sphere of C^n (normalized complex Gaussians), one per row."""
    rng = _rng(seed)
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_pure_state(n: int, seed=None) -> np.ndarray:
    if n < 1:
        raise ValueError("dimension must be positive")
    return random_pure_states(n, 1, seed)[0]


def _block_seed(seed: int, block: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(block,))


def monte_carlo(sampler: Callable[[np.random.Generator, int], np.ndarray], samples: int, seed: int,
                jobs: int = 1) -> MonteCarloEstimate:
    """Blockwise mean and standard error of ``sampler(rng, count)`` outputs.

    ``sampler`` returns an array whose first axis indexes samples.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    sizes = [BLOCK_SIZE] * (samples // BLOCK_SIZE)
    if samples % BLOCK_SIZE:
        sizes.append(samples % BLOCK_SIZE)

    def run(b):
        x = np.asarray(sampler(_rng(_block_seed(seed, b)), sizes[b]))
        m = x.mean(axis=0)
        return x.shape[0], m, np.sum(np.abs(x - m) ** 2, axis=0)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]

    count, mean, m2 = parts[0]
    for c, m, s in parts[1:]:
        total = count + c
        delta = m - mean
        mean = mean + delta * (c / total)
        m2 = m2 + s + np.abs(delta) ** 2 * (count * c / total)
        count = total
    std = np.sqrt(m2 / (count - 1))
    se = std / np.sqrt(count)
    if np.ndim(mean) == 0:
        mean = complex(mean) if np.iscomplexobj(mean) else float(mean)
        se = float(se)
    return MonteCarloEstimate(mean=mean, std_error=se, samples=count, seed=seed)


def sphere_average_closed_form(m) -> float:
    """Uniform sphere average of ``|<psi|M|psi>|^2``: ``[tr(M M^dag) + |tr M|^2] / (n (n + 1))``."""
    m = mc.as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise mc.DimensionError("matrix must be square")
    n = m.shape[0]
    return float((np.trace(m @ m.conj().T).real + abs(np.trace(m)) ** 2) / (n * (n + 1)))


def sphere_average_monte_carlo(m, samples: int, seed: int, jobs: int = 1) -> MonteCarloEstimate:
    m = mc.as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise mc.DimensionError("matrix must be square")
    if samples < 100:
        raise ValueError("need at least 100 samples")
    n = m.shape[0]

    def sampler(rng, count):
        psi = random_pure_states(n, count, rng)
        return np.abs(np.einsum("sa,ab,sb->s", psi.conj(), m, psi)) ** 2

    return monte_carlo(sampler, samples, seed, jobs)


TwirlForm = Literal["corrected", "printed"]


def twirl_coefficients(a, n: int, form: TwirlForm = "corrected"):
    """Coefficients ``(c_I, c_S)`` of the two-fold twirl of ``a`` in the span of ``{I, S}``.

    ``form="printed"`` returns the squared-coefficient variant that circulates in
    the literature; it is kept only so it can be tested against Monte Carlo.
    """
    a = mc.as_matrix(a)
    if n < 2 or a.shape != (n * n, n * n):
        raise mc.DimensionError(f"expected an {n * n}x{n * n} matrix with n >= 2, got {a.shape}")
    s = mc.swap_operator(n, n)
    tr_a = np.trace(a)
    tr_as = np.trace(a @ s)
    d = n * n - 1
    if form == "corrected":
        return (tr_a - tr_as / n) / d, (tr_as - tr_a / n) / d
    if form == "printed":
        return (tr_a / d - tr_as / (n * d)) ** 2, -((tr_a / (n * d) - tr_as / d) ** 2)
    raise ValueError(f"unknown twirl form {form!r}")


def twofold_twirl_closed_form(a, n: int, form: TwirlForm = "corrected") -> np.ndarray:
    c_i, c_s = twirl_coefficients(a, n, form)
    return c_i * np.eye(n * n) + c_s * mc.swap_operator(n, n)


def twofold_twirl_monte_carlo(a, n: int, samples: int, seed: int, jobs: int = 1) -> MonteCarloEstimate:
    """Entrywise Monte Carlo estimate of ``int U(x)U A (U(x)U)^dag dU``."""
    a = mc.as_matrix(a)
    if a.shape != (n * n, n * n):
        raise mc.DimensionError(f"expected an {n * n}x{n * n} matrix, got {a.shape}")
    if samples < 100:
        raise ValueError("need at least 100 samples")

    def sampler(rng, count):
        u = haar_unitaries(n, count, rng)
        w = np.einsum("sab,scd->sacbd", u, u).reshape(count, n * n, n * n)
        return w @ a @ np.conj(np.swapaxes(w, 1, 2))

    return monte_carlo(sampler, samples, seed, jobs)


def twirl_fixed_point_report(n: int, form: TwirlForm, atol: float = 1e-12) -> Dict[str, bool]:
    """Whether a closed form maps ``I -> I`` and ``S -> S`` exactly."""
    eye = np.eye(n * n, dtype=np.complex128)
    s = mc.swap_operator(n, n)
    return {
        "identity": bool(np.abs(twofold_twirl_closed_form(eye, n, form) - eye).max() <= atol),
        "swap": bool(np.abs(twofold_twirl_closed_form(s, n, form) - s).max() <= atol),
    }


def twirl_form_report(a, n: int, samples: int, seed: int, jobs: int = 1) -> Dict[str, object]:
    """Compare both closed forms against one Monte Carlo estimate of the twirl of ``a``."""
    est = twofold_twirl_monte_carlo(a, n, samples, seed, jobs)
    out: Dict[str, object] = {"samples": est.samples, "seed": seed}
    for form in ("corrected", "printed"):
        closed = twofold_twirl_closed_form(a, n, form)
        z = est.z_scores(closed)
        out[form] = {
            "agrees": est.agrees_with(closed),
            "max_z": float(np.max(z)),
            "max_abs_dev": float(np.abs(est.mean - closed).max()),
            "fixed_points": twirl_fixed_point_report(n, form),
        }
    supported = [f for f in ("corrected", "printed") if out[f]["agrees"]]
    out["supported"] = supported
    return out

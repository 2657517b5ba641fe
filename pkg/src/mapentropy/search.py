"""Numerical search over the slack of the conjectured entropy inequality

    S(rho) + S(Phi(Psi(rho))) <= S(Phi(rho)) + S(Psi(rho))

for bistochastic ``Phi`` and ``Psi``. The slack is ``RHS - LHS``; a negative
value would be a counterexample.

Channels are drawn from mixtures of unitaries, which for n >= 3 do not cover
every bistochastic map. Depolarizing channels enter through their Weyl-operator
mixture form.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy.optimize import minimize

from . import matrixcore as mc
from .channel import Channel, compose, require_bistochastic, unitary_mixture
from .entropy import map_entropy, spectrum_entropy, von_neumann_entropy
from .haar import haar_unitaries

LIMITATION = (
    "channels are mixtures of unitaries (plus depolarizing channels); for n >= 3 this is a strict "
    "subset of the bistochastic maps"
)
OPTIMIZERS = ("random-only", "finite-difference-gradient", "simplex")
COUNTEREXAMPLE_THRESHOLD = -1e-6
PURE_FRACTION = 0.1
MIXED_FRACTION = 0.1
DEPOLARIZING_FRACTION = 0.1


@dataclass(frozen=True)
class SearchConfig:
    n: int = 2
    k_phi: int = 2
    k_psi: int = 2
    trials: int = 1000
    optimizer: Optional[str] = None
    max_iters: int = 200
    slack_tolerance: float = 1e-6
    master_seed: int = 0
    base: float = 2

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.k_phi < 1 or self.k_psi < 1:
            raise ValueError("mixture sizes must be at least 1")
        if not self.slack_tolerance > 0:
            raise ValueError("slack_tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.optimizer is not None and self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    @property
    def resolved_optimizer(self) -> str:
        if self.optimizer is not None:
            return self.optimizer
        return "simplex" if max(self.k_phi, self.k_psi) <= 3 else "finite-difference-gradient"


def _encode(a) -> list:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.tolist()


def _decode_complex(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass
class SlackRecord:
    """One evaluation of the slack, with everything needed to recompute it."""

    seed: List[int]
    phi_weights: np.ndarray
    phi_unitaries: np.ndarray
    psi_weights: np.ndarray
    psi_unitaries: np.ndarray
    rho: np.ndarray
    entropies: Tuple[float, float, float, float]
    slack: float
    converged: bool = True
    kind: str = "random"
    state_kind: str = "hilbert-schmidt"
    base: float = 2
    counterexample_candidate: bool = False
    verified_slack: Optional[float] = None
    trace: List[float] = field(default_factory=list)

    @property
    def phi(self) -> Channel:
        return unitary_mixture(self.phi_weights, self.phi_unitaries)

    @property
    def psi(self) -> Channel:
        return unitary_mixture(self.psi_weights, self.psi_unitaries)

    def recompute(self) -> float:
        return conjecture_slack(self.phi, self.psi, self.rho, self.base)

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        for key in ("phi_weights", "psi_weights"):
            d[key] = np.asarray(d[key], dtype=float).tolist()
        for key in ("phi_unitaries", "psi_unitaries", "rho"):
            d[key] = _encode(d[key])
        d["entropies"] = dict(zip(("rho", "phi_rho", "psi_rho", "phi_psi_rho"), map(float, self.entropies)))
        d["slack"] = float(self.slack)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, object]) -> "SlackRecord":
        d = dict(d)
        ent = d["entropies"]
        d["entropies"] = tuple(ent[k] for k in ("rho", "phi_rho", "psi_rho", "phi_psi_rho"))
        for key in ("phi_weights", "psi_weights"):
            d[key] = np.asarray(d[key], dtype=float)
        for key in ("phi_unitaries", "psi_unitaries", "rho"):
            d[key] = _decode_complex(d[key])
        return cls(**d)


def conjecture_slack(phi: Channel, psi: Channel, rho, base: float = 2) -> float:
    """``S(Phi(rho)) + S(Psi(rho)) - S(rho) - S(Phi(Psi(rho)))`` for bistochastic maps."""
    require_bistochastic(phi)
    require_bistochastic(psi)
    rho = mc.hermitize(rho)
    terms = (rho, phi(rho), psi(rho), compose(phi, psi)(rho))
    s = [von_neumann_entropy(t, base) for t in terms]
    return s[1] + s[2] - s[0] - s[3]


def _mix(weights: np.ndarray, unitaries: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.einsum("k,kab,bc,kdc->ad", weights, unitaries, rho, unitaries.conj())


def _entropy_fast(rho: np.ndarray, base: float) -> float:
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    cutoff = mc.CLAMP_RTOL * max(w[-1], 0.0)
    return spectrum_entropy(np.where(w < cutoff, 0.0, w), 1.0, base)


def slack_terms(pw, pu, qw, qu, rho, base: float = 2) -> Tuple[Tuple[float, float, float, float], float]:
    """Entropies ``(S(rho), S(Phi rho), S(Psi rho), S(Phi Psi rho))`` and the slack, from mixture parameters."""
    psi_rho = _mix(qw, qu, rho)
    s = (
        _entropy_fast(rho, base),
        _entropy_fast(_mix(pw, pu, rho), base),
        _entropy_fast(psi_rho, base),
        _entropy_fast(_mix(pw, pu, psi_rho), base),
    )
    return s, s[1] + s[2] - s[0] - s[3]


def weyl_operators(n: int) -> np.ndarray:
    """The ``n^2`` clock-and-shift unitaries ``X^a Z^b``; ``W_00 = I``."""
    omega = np.exp(2j * np.pi / n)
    x = np.roll(np.eye(n), 1, axis=0)
    z = np.diag(omega ** np.arange(n))
    ops = [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(n) for b in range(n)]
    return np.asarray(ops, dtype=np.complex128)


def depolarizing_mixture(n: int, x: float) -> Tuple[np.ndarray, np.ndarray]:
    """Weights and unitaries with ``sum_i p_i W_i rho W_i^dag == (1 - x) rho + x I/n``."""
    w = np.full(n * n, x / n**2)
    w[0] += 1.0 - x
    return w, weyl_operators(n)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt random density matrix ``G G^dag / tr(G G^dag)``."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,)))


def _random_mixture(n: int, k: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if rng.random() < DEPOLARIZING_FRACTION:
        return depolarizing_mixture(n, float(rng.random()))
    return rng.dirichlet(np.ones(k)), haar_unitaries(n, k, rng)


def random_trial(cfg: SearchConfig, trial: int) -> SlackRecord:
    rng = _trial_rng(cfg.master_seed, trial)
    n = cfg.n
    pw, pu = _random_mixture(n, cfg.k_phi, rng)
    qw, qu = _random_mixture(n, cfg.k_psi, rng)
    u = rng.random()
    if u < PURE_FRACTION:
        psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        psi /= np.linalg.norm(psi)
        rho, state_kind = np.outer(psi, psi.conj()), "pure"
    elif u < PURE_FRACTION + MIXED_FRACTION:
        rho, state_kind = np.eye(n, dtype=np.complex128) / n, "maximally-mixed"
    else:
        rho, state_kind = random_state(n, rng), "hilbert-schmidt"
    ent, slack = slack_terms(pw, pu, qw, qu, rho, cfg.base)
    rec = SlackRecord([cfg.master_seed, trial], pw, pu, qw, qu, rho, ent, slack, state_kind=state_kind,
                      base=cfg.base)
    return _screen(rec)


def high_precision_slack(rec: SlackRecord, dps: int = 40) -> float:
    """Slack recomputed in extended precision with symmetrized inputs and no eigenvalue clamping."""
    with mpmath.workdps(dps):
        def mat(a):
            return mpmath.matrix([[mpmath.mpc(complex(z)) for z in row] for row in np.asarray(a)])

        def sym(m):
            return (m + m.H) * mpmath.mpf("0.5")

        def mix(ws, us, r):
            out = mpmath.zeros(r.rows, r.cols)
            for w, u in zip(ws, us):
                uu = mat(u)
                out += mpmath.mpf(float(w)) * (uu * r * uu.H)
            return sym(out)

        def entropy(m):
            evals, _ = mpmath.eighe(sym(m))
            total = mpmath.mpf(0)
            for lam in evals:
                lam = mpmath.re(lam)
                if lam > 0:
                    total -= lam * mpmath.log(lam)
            return total / mpmath.log(rec.base)

        rho = sym(mat(rec.rho))
        rho = rho / sum(mpmath.re(rho[i, i]) for i in range(rho.rows))
        psi_rho = mix(rec.psi_weights, rec.psi_unitaries, rho)
        s = [entropy(rho), entropy(mix(rec.phi_weights, rec.phi_unitaries, rho)), entropy(psi_rho),
             entropy(mix(rec.phi_weights, rec.phi_unitaries, psi_rho))]
        return float(s[1] + s[2] - s[0] - s[3])


def _screen(rec: SlackRecord) -> SlackRecord:
    """Re-verify records whose slack falls below the counterexample threshold."""
    if rec.slack < COUNTEREXAMPLE_THRESHOLD:
        rec.verified_slack = high_precision_slack(rec)
        rec.counterexample_candidate = rec.verified_slack < COUNTEREXAMPLE_THRESHOLD
    return rec


def _sort_key(rec: SlackRecord):
    return (rec.slack, tuple(rec.seed), rec.kind)


def _run_trials(args) -> List[SlackRecord]:
    cfg, lo, hi = args
    return [random_trial(cfg, t) for t in range(lo, hi)]


def random_search(cfg: SearchConfig, jobs: int = 1) -> List[SlackRecord]:
    """Independent random trials, sorted ascending by ``(slack, seed)``."""
    if jobs > 1:
        step = math.ceil(cfg.trials / jobs)
        chunks = [(cfg, lo, min(lo + step, cfg.trials)) for lo in range(0, cfg.trials, step)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = [r for part in pool.map(_run_trials, chunks) for r in part]
    else:
        records = _run_trials((cfg, 0, cfg.trials))
    return sorted(records, key=_sort_key)


# ---------------------------------------------------------------------------
# local descent

def _hermitian_from(h: np.ndarray, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.complex128)
    iu = np.triu_indices(n, 1)
    m[np.diag_indices(n)] = h[:n]
    nu = len(iu[0])
    m[iu] = h[n:n + nu] + 1j * h[n + nu:]
    return m + np.triu(m, 1).conj().T


def _expi(hs: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hs)
    return np.einsum("kab,kb,kcb->kac", v, np.exp(1j * w), v.conj())


class _Parameterization:
    """Local coordinates around a starting record.

    Weights are a softmax of free coordinates, each unitary is ``U0 exp(iH)``
    with Hermitian ``H``, and the state is ``L L^dag / tr(L L^dag)``.
    """

    def __init__(self, rec: SlackRecord):
        self.n = rec.rho.shape[0]
        self.base = rec.base
        self.u_phi, self.u_psi = np.asarray(rec.phi_unitaries), np.asarray(rec.psi_unitaries)
        self.k_phi, self.k_psi = len(rec.phi_weights), len(rec.psi_weights)
        n2 = self.n * self.n
        self.sizes = [self.k_phi, self.k_phi * n2, self.k_psi, self.k_psi * n2, 2 * n2]
        w, v = np.linalg.eigh(mc.hermitize(rec.rho))
        l0 = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        self.x0 = np.concatenate([
            np.log(np.clip(rec.phi_weights, 1e-300, None)).clip(-50, None),
            np.zeros(self.k_phi * n2),
            np.log(np.clip(rec.psi_weights, 1e-300, None)).clip(-50, None),
            np.zeros(self.k_psi * n2),
            l0.real.ravel(), l0.imag.ravel(),
        ])

    def unpack(self, x: np.ndarray):
        parts = np.split(x, np.cumsum(self.sizes)[:-1])
        n, n2 = self.n, self.n * self.n

        def weights(a):
            e = np.exp(a - a.max())
            return e / e.sum()

        def unitaries(u0, h, k):
            hs = np.stack([_hermitian_from(h[i * n2:(i + 1) * n2], n) for i in range(k)])
            return u0 @ _expi(hs)

        lr = parts[4]
        el = (lr[:n2] + 1j * lr[n2:]).reshape(n, n)
        rho = el @ el.conj().T
        rho = rho / np.trace(rho).real
        return (weights(parts[0]), unitaries(self.u_phi, parts[1], self.k_phi),
                weights(parts[2]), unitaries(self.u_psi, parts[3], self.k_psi), rho)

    def slack(self, x: np.ndarray) -> float:
        return slack_terms(*self.unpack(x), base=self.base)[1]


def fd_gradient(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient."""
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _probe(f, x: np.ndarray, fx: float, deltas=(1e-1, 1e-2, 1e-3)):
    """Best coordinate step of size ``delta`` that lowers ``f``, or ``None``.

    Pure states are critical points of the state parameterization (the entropy
    is even in the perturbation), so a vanishing gradient there is not a minimum.
    """
    for delta in deltas:
        best, best_f = None, fx
        for i in range(x.size):
            for sign in (1.0, -1.0):
                xn = x.copy()
                xn[i] += sign * delta
                fn = f(xn)
                if fn < best_f:
                    best, best_f = xn, fn
        if best is not None:
            return best, best_f
    return None


def _gradient_descent(f, x0: np.ndarray, max_iters: int, tol: float):
    x, fx = x0.copy(), f(x0)
    trace = [fx]
    converged = False
    t = 1.0
    for _ in range(max_iters):
        g = fd_gradient(f, x)
        gg = float(g @ g)
        xn = None
        if gg >= 1e-14:
            while t > 1e-14:
                xn = x - t * g
                fn = f(xn)
                if fn <= fx - 1e-4 * t * gg:
                    break
                t *= 0.5
            else:
                xn = None
        if xn is None or fx - fn < tol * 1e-3:
            probe = _probe(f, x, fx)
            if probe is not None and (xn is None or probe[1] < fn):
                xn, fn = probe
                t = 1.0
        if xn is None or fx - fn < tol * 1e-3:
            converged = True
            if xn is not None and fn < fx:
                x, fx = xn, fn
                trace.append(fx)
            break
        x, fx = xn, fn
        trace.append(fx)
        t *= 2.0
    return x, fx, trace, converged


def _simplex(f, x0: np.ndarray, max_iters: int, tol: float):
    # convergence is judged on the slack spread only; flat directions are common
    trace = [f(x0)]

    def record(xk):
        trace.append(min(trace[-1], f(xk)))

    res = minimize(f, x0, method="Nelder-Mead", callback=record,
                   options={"maxiter": max_iters, "xatol": np.inf, "fatol": tol * 1e-3, "adaptive": True})
    return res.x, float(res.fun), trace, bool(res.success)


def minimize_slack(cfg: SearchConfig, start: SlackRecord) -> SlackRecord:
    """Local descent of the slack from ``start`` over channel and state parameters.

    The returned record never has larger slack than ``start`` (up to 1e-12);
    ``trace`` holds the best slack after each iteration.
    """
    par = _Parameterization(start)
    f = par.slack
    method = cfg.resolved_optimizer
    if method == "random-only":
        x, fx, trace, converged = par.x0, f(par.x0), [f(par.x0)], True
    elif method == "simplex":
        x, fx, trace, converged = _simplex(f, par.x0, cfg.max_iters, cfg.slack_tolerance)
    else:
        x, fx, trace, converged = _gradient_descent(f, par.x0, cfg.max_iters, cfg.slack_tolerance)
    pw, pu, qw, qu, rho = par.unpack(x)
    ent, slack = slack_terms(pw, pu, qw, qu, rho, start.base)
    if slack > start.slack + 1e-12:
        pw, pu, qw, qu, rho = (start.phi_weights, start.phi_unitaries, start.psi_weights,
                               start.psi_unitaries, start.rho)
        ent, slack = start.entropies, start.slack
    rec = SlackRecord(list(start.seed), pw, pu, qw, qu, rho, ent, slack, converged=converged, kind="descent",
                      state_kind="optimized", base=start.base, trace=[float(v) for v in trace])
    return _screen(rec)


# ---------------------------------------------------------------------------
# saturation features

def record_features(rec: SlackRecord) -> Dict[str, float]:
    n = rec.rho.shape[0]
    phi, psi = rec.phi, rec.psi
    psi_t = unitary_mixture(rec.psi_weights, np.transpose(rec.psi_unitaries, (0, 2, 1)))
    comm = phi.choi @ psi_t.choi - psi_t.choi @ phi.choi
    return {
        "rho_distance_to_mixed": float(np.linalg.norm(rec.rho - np.eye(n) / n)),
        "rho_purity": float(np.sum(np.abs(rec.rho) ** 2)),
        "phi_map_entropy": map_entropy(phi, 1, rec.base),
        "psi_map_entropy": map_entropy(psi, 1, rec.base),
        "choi_commutator": float(np.linalg.norm(comm)),
    }


def classify(features: Dict[str, float], atol: float = 1e-6) -> str:
    phi_u = features["phi_map_entropy"] < atol
    psi_u = features["psi_map_entropy"] < atol
    if phi_u and psi_u:
        return "unitary/unitary/any-rho"
    if features["rho_distance_to_mixed"] < atol:
        return "maximally mixed state"
    if phi_u or psi_u:
        return "one unitary channel"
    if features["choi_commutator"] < atol:
        return "commuting Choi matrices"
    if abs(features["rho_purity"] - 1.0) < atol:
        return "pure state"
    return "unclassified"


def saturation_scan(records: Sequence[SlackRecord], cfg: SearchConfig) -> Dict[str, object]:
    """Group near-zero-slack records by structural features; no analytic claim is made."""
    near = [r for r in records if abs(r.slack) < cfg.slack_tolerance]
    clusters: Dict[str, Dict[str, object]] = {}
    for rec in sorted(near, key=_sort_key):
        feats = record_features(rec)
        label = classify(feats)
        entry = clusters.setdefault(label, {"count": 0, "seeds": [], "features": {k: [] for k in feats}})
        entry["count"] += 1
        entry["seeds"].append(list(rec.seed))
        for k, v in feats.items():
            entry["features"][k].append(v)
    summary = {}
    for label in sorted(clusters):
        entry = clusters[label]
        stats = {k: {"min": float(np.min(v)), "max": float(np.max(v)), "mean": float(np.mean(v))}
                 for k, v in entry["features"].items()}
        summary[label] = {"count": entry["count"], "seeds": entry["seeds"], "features": stats}
    return {"limitation": LIMITATION, "tolerance": cfg.slack_tolerance, "near_zero": len(near), "clusters": summary}


def run_search(cfg: SearchConfig, minimize_from_worst: int = 0, jobs: int = 1):
    """Random search followed by local descents from the lowest-slack records.

    Returns:
        ``(records, descents, summary)``.
    """
    records = random_search(cfg, jobs)
    starts = records[:minimize_from_worst]
    if jobs > 1 and len(starts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            descents = list(pool.map(minimize_slack, [cfg] * len(starts), starts))
    else:
        descents = [minimize_slack(cfg, s) for s in starts]
    everything = sorted(records + descents, key=_sort_key)
    candidates = [r for r in everything if r.counterexample_candidate]
    summary = {
        "limitation": LIMITATION,
        "config": {**asdict(cfg), "optimizer": cfg.resolved_optimizer},
        "trials": len(records),
        "descents": len(descents),
        "min_slack": float(everything[0].slack),
        "min_slack_seed": list(everything[0].seed),
        "min_slack_kind": everything[0].kind,
        "saturation_candidates": sum(1 for r in records if r.slack < cfg.slack_tolerance),
        "counterexample_candidates": [
            {"seed": list(r.seed), "kind": r.kind, "slack": float(r.slack), "verified_slack": r.verified_slack}
            for r in candidates
        ],
        "descent_results": [
            {"seed": list(d.seed), "start_slack": float(s.slack), "end_slack": float(d.slack),
             "iterations": len(d.trace) - 1, "converged": d.converged}
            for s, d in zip(starts, descents)
        ],
        "saturation": saturation_scan(everything, cfg),
    }
    return records, descents, summary

"""Machine-checkable predicates for identities and inequalities about channels.

Every check returns a :class:`CheckReport`. A check may consist of several parts
(for example a lower and an upper bound); each part carries a signed margin
(positive or zero when satisfied, ``-deviation`` for equalities) and its own
tolerance. The report margin is ``min_i(margin_i + tol_i) - tolerance`` where
``tolerance`` is the smallest part tolerance, so ``passed`` is equivalent to
``margin >= -tolerance`` and, for single-part checks, ``margin`` is just the
part margin.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import matrixcore as mc
from .channel import (
    Channel,
    NotTracePreserving,
    _as_kraus,
    adjoint_channel,
    apply_kraus,
    compose,
    depolarizing,
    identity_channel,
    kraus_tp_residual,
    kraus_unital_residual,
    random_bistochastic,
    random_cptp,
    require_bistochastic,
    require_tp,
    tensor_channels,
    transpose_channel,
    unitary_channel,
)
from .entropy import (
    average_output_purity_closed_form,
    average_output_purity_monte_carlo,
    depolarizing_map_from_min,
    depolarizing_min_from_map,
    depolarizing_output_purity,
    entropy_exchange_state,
    map_entropy,
    map_purity,
    max_output_purity,
    schwarz_sum,
    trace_gram_sum,
    von_neumann_entropy,
)
from .haar import MC_SIGMA_BAND, haar_unitary

LINEAR_TOL = 1e-11
ENTROPY_TOL = 1e-9
EXTREMALITY_TOL = 1e-6


@dataclass
class CheckReport:
    check_name: str
    inputs_digest: Dict[str, object]
    lhs: object
    rhs: object
    margin: float
    tolerance: float
    passed: bool
    statistical: bool
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _report(name: str, digest, lhs, rhs, parts: Dict[str, Tuple[float, float]], statistical: bool = False,
            **details) -> CheckReport:
    tolerance = min(t for _, t in parts.values())
    margin = min(m + t for m, t in parts.values()) - tolerance
    passed = all(m >= -t for m, t in parts.values())
    details["parts"] = {k: {"margin": float(m), "tolerance": t} for k, (m, t) in parts.items()}
    return CheckReport(name, digest, lhs, rhs, float(margin), tolerance, passed, statistical, details)


def _digest(seed=None, **dims) -> Dict[str, object]:
    return {"seed": seed, **dims}


def _maxdev(a, b) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def check_tp_schwarz(kraus, seed=None) -> CheckReport:
    """``sum_ij tr(K_i K_i^dag K_j K_j^dag) >= n`` for a trace-preserving Kraus set.

    Equality holds exactly when the map is also unital.
    """
    k = _as_kraus(kraus)
    if kraus_tp_residual(k) > 1e-10:
        raise NotTracePreserving("Kraus set is not trace preserving")
    n = k.shape[2]
    total = schwarz_sum(k)
    margin = total - n
    return _report("tp_schwarz", _digest(seed, n=n, k=k.shape[0]), total, n, {"schwarz": (margin, 1e-10)},
                   unital=kraus_unital_residual(k) <= 1e-10, equality=abs(margin) < 1e-10)


def check_average_purity_identity(c: Channel, samples: int = 100_000, seed: int = 0, jobs: int = 1) -> CheckReport:
    """Monte Carlo sphere average of the output purity against its closed form.

    Also checks ``sum_ij |tr K_i^dag K_j|^2 == n^2 tr rho(Phi)^2``.
    """
    require_tp(c)
    n = c.dim_in
    closed = average_output_purity_closed_form(c.kraus)
    est = average_output_purity_monte_carlo(c, samples, seed, jobs)
    dev = abs(est.mean - closed)
    gram_dev = abs(trace_gram_sum(c.kraus) - n * n * map_purity(c))
    parts = {
        "monte_carlo": (MC_SIGMA_BAND * est.std_error - dev + 1e-12, 0.0),
        "gram_identity": (-gram_dev, 1e-10),
    }
    return _report("average_purity_identity", _digest(seed, n=n, k=c.rank, samples=samples), est.mean, closed,
                   parts, statistical=True, std_error=est.std_error, z=dev / est.std_error if est.std_error else 0.0)


def depolarizing_parameter(c: Channel, atol: float = 1e-12) -> Optional[float]:
    """The ``x`` with ``c == depolarizing(n, x)`` (same Choi matrix), or ``None``."""
    if not c.is_square or not c.tp:
        return None
    n = c.dim_in
    x = (1.0 - c.choi[0, 0].real) / (1.0 - 1.0 / n)
    if not -atol <= x <= 1 + atol:
        return None
    x = min(max(x, 0.0), 1.0)
    return x if _maxdev(depolarizing(n, x).choi, c.choi) <= atol else None


def check_prop1_depolarizing_extremality(c: Channel, restarts: int = 64, seed: int = 0,
                                         escalate_restarts: int = 256) -> CheckReport:
    """``max output purity <= 1 - eps  =>  tr rho(Phi)^2 <= 1 - (1 + 1/n) eps``.

    For depolarizing channels the maximal purity is known in closed form and the
    check is exact. Otherwise it comes from :func:`max_output_purity`, which can
    only undershoot, so a negative margin may be an optimizer miss rather than
    a counterexample; such cases are rerun with ``escalate_restarts``.
    """
    require_tp(c)
    if not c.is_square:
        raise mc.DimensionError("channel must be square")
    n = c.dim_in
    x = depolarizing_parameter(c)
    mp = map_purity(c)
    if x is not None:
        p_max = depolarizing_output_purity(n, x)
        bound = 1 - (1 + 1 / n) * (1 - p_max)
        return _report("prop1_extremality", _digest(seed, n=n, k=c.rank), mp, bound,
                       {"extremality": (bound - mp, 1e-10)}, statistical=False, max_purity=p_max,
                       depolarizing_x=x, exact=True)
    p_max, _ = max_output_purity(c, restarts, seed)
    bound = 1 - (1 + 1 / n) * (1 - p_max)
    escalated = False
    if bound - mp < -EXTREMALITY_TOL and escalate_restarts > restarts:
        escalated = True
        p2, _ = max_output_purity(c, escalate_restarts, seed)
        if p2 > p_max:
            p_max = p2
            bound = 1 - (1 + 1 / n) * (1 - p_max)
    return _report("prop1_extremality", _digest(seed, n=n, k=c.rank, restarts=restarts), mp, bound,
                   {"extremality": (bound - mp, EXTREMALITY_TOL)}, statistical=True, max_purity=p_max,
                   exact=False, escalated=escalated)


def check_corollary_monotone(n: int, grid: int = 21, base: float = 2) -> CheckReport:
    """Direct minimal output entropy of depolarizing channels vs the closed-form map relation."""
    if n < 2 or grid < 3:
        raise ValueError("need n >= 2 and grid >= 3")
    xs = np.linspace(0.0, 1.0, grid)
    s_map, s_min, s_rel, round_trip = [], [], [], []
    for x in xs:
        c = depolarizing(n, float(x))
        sm = map_entropy(c, 2, base)
        p, _ = max_output_purity(c, restarts=1, seed=0)
        s_map.append(sm)
        s_min.append(max(-math.log(p, base), 0.0))
        s_rel.append(depolarizing_min_from_map(n, sm, base))
        round_trip.append(abs(depolarizing_map_from_min(n, s_rel[-1], base) - sm))
    s_map, s_min, s_rel = map(np.asarray, (s_map, s_min, s_rel))
    parts = {
        "relation": (-float(np.abs(s_min - s_rel).max()), 1e-9),
        "round_trip": (-float(max(round_trip)), 1e-9),
        "map_monotone": (float(min(np.diff(s_map).min(), 0.0)), 1e-12),
        "min_monotone": (float(min(np.diff(s_min).min(), 0.0)), 1e-12),
    }
    return _report("corollary_monotone", _digest(None, n=n, grid=grid), s_min.tolist(), s_rel.tolist(), parts,
                   s_map=s_map.tolist())


def _transpose_kraus(k: np.ndarray) -> np.ndarray:
    return np.transpose(k, (0, 2, 1))


def check_choi_identities(phi: Channel, psi: Channel, seed=None) -> CheckReport:
    """Choi matrices of tensor products and compositions.

    (a) ``J(Phi (x) Psi) == P^dag (J(Phi) (x) J(Psi)) P`` with ``P`` the bipartite
    vec permutation; (b) ``J(Phi o Psi) == (Phi (x) id)(J(Psi)) == (id (x) Psi^T)(J(Phi))
    == (Phi (x) Psi^T)(vec(I) vec(I)^dag)``.
    """
    if psi.dim_out != phi.dim_in:
        raise mc.DimensionError("psi output dimension must equal phi input dimension")
    p = mc.bipartite_vec_permutation(phi.dim_out, psi.dim_out, phi.dim_in, psi.dim_in)
    j_tensor = tensor_channels(phi, psi).choi
    j_perm = p.conj().T @ np.kron(phi.choi, psi.choi) @ p
    dev_tensor = _maxdev(j_tensor, j_perm)

    d_in, d_mid = psi.dim_in, psi.dim_out
    j_comp = compose(phi, psi).choi
    left = apply_kraus([np.kron(m, np.eye(d_in)) for m in phi.kraus], psi.choi)
    psi_t = _transpose_kraus(psi.kraus)
    right = apply_kraus([np.kron(np.eye(phi.dim_out), nt) for nt in psi_t], phi.choi)
    omega = mc.vec(np.eye(d_mid))
    both = apply_kraus([np.kron(m, nt) for m in phi.kraus for nt in psi_t], np.outer(omega, omega.conj()))
    dev_comp = max(_maxdev(j_comp, left), _maxdev(j_comp, right), _maxdev(j_comp, both))
    parts = {"tensor": (-dev_tensor, LINEAR_TOL), "composition": (-dev_comp, LINEAR_TOL)}
    return _report("choi_identities", _digest(seed, n=phi.dim_in), 0.0, 0.0, parts,
                   tensor_deviation=dev_tensor, composition_deviation=dev_comp)


def check_transpose_dual(c: Channel, seed=None) -> CheckReport:
    """``J(Phi^T) == S J S`` and ``J(Phi^dag) == S J^T S``; map entropy of ``Phi^T`` equals that of ``Phi`` when bistochastic."""
    if not c.is_square:
        raise mc.DimensionError("channel must be square")
    n = c.dim_in
    s = mc.swap_operator(n, n)
    dev_t = _maxdev(transpose_channel(c).choi, s @ c.choi @ s)
    dev_a = _maxdev(adjoint_channel(c).choi, s @ c.choi.T @ s)
    parts = {"transpose": (-dev_t, LINEAR_TOL), "dual": (-dev_a, LINEAR_TOL)}
    details = {"transpose_deviation": dev_t, "dual_deviation": dev_a}
    if c.bistochastic:
        dev_e = abs(map_entropy(transpose_channel(c)) - map_entropy(c))
        parts["map_entropy"] = (-dev_e, 1e-10)
        details["map_entropy_deviation"] = dev_e
    return _report("transpose_dual", _digest(seed, n=n), 0.0, 0.0, parts, **details)


def check_additivity(phi: Channel, psi: Channel, p: float, base: float = 2, seed=None) -> CheckReport:
    """Renyi-p map entropy of ``Phi (x) Psi`` equals the sum of the parts."""
    require_tp(phi)
    require_tp(psi)
    lhs = map_entropy(tensor_channels(phi, psi), p, base)
    rhs = map_entropy(phi, p, base) + map_entropy(psi, p, base)
    return _report("additivity", _digest(seed, n=phi.dim_in, p=p), lhs, rhs, {"additivity": (-abs(lhs - rhs), ENTROPY_TOL)})


def check_lindblad(c: Channel, rho, base: float = 2, seed=None) -> CheckReport:
    """``|S(sigma) - S(rho)| <= S(Phi(rho)) <= S(sigma) + S(rho)`` with ``sigma`` the entropy-exchange state."""
    require_tp(c)
    rho = mc.hermitize(rho)
    s_rho = von_neumann_entropy(rho, base)
    s_out = von_neumann_entropy(c(rho), base)
    s_ex = von_neumann_entropy(entropy_exchange_state(c, rho), base)
    parts = {
        "lower": (s_out - abs(s_ex - s_rho), ENTROPY_TOL),
        "upper": (s_ex + s_rho - s_out, ENTROPY_TOL),
    }
    return _report("lindblad", _digest(seed, n=c.dim_in, k=c.rank), s_out, [abs(s_ex - s_rho), s_ex + s_rho],
                   parts, entropies={"rho": s_rho, "output": s_out, "exchange": s_ex})


def check_lindblad_stochastic(phi: Channel, psi: Channel, base: float = 2, seed=None) -> CheckReport:
    """Lindblad's inequality for ``id (x) Psi`` on the Jamiolkowski state of ``Phi``.

    This instance bounds ``S((Phi (x) Psi)(|I><I|)/n)`` by the map entropies of
    ``Phi`` and ``Psi`` for arbitrary trace-preserving maps.
    """
    ext = tensor_channels(identity_channel(phi.dim_out), psi)
    report = check_lindblad(ext, phi.jamiolkowski_state, base, seed)
    report.check_name = "lindblad_stochastic"
    report.details["map_entropies"] = {"phi": map_entropy(phi, 1, base), "psi": map_entropy(psi, 1, base)}
    return report


def check_dynamical_subadditivity(phi: Channel, psi: Channel, base: float = 2, seed=None) -> CheckReport:
    """``max(S(Phi), S(Psi)) <= S(Phi o Psi) <= S(Phi) + S(Psi)`` for bistochastic maps."""
    require_bistochastic(phi)
    require_bistochastic(psi)
    s_phi, s_psi = map_entropy(phi, 1, base), map_entropy(psi, 1, base)
    s_comp = map_entropy(compose(phi, psi), 1, base)
    parts = {
        "lower": (s_comp - max(s_phi, s_psi), ENTROPY_TOL),
        "upper": (s_phi + s_psi - s_comp, ENTROPY_TOL),
    }
    return _report("dynamical_subadditivity", _digest(seed, n=phi.dim_in), s_comp,
                   [max(s_phi, s_psi), s_phi + s_psi], parts)


def check_entangled_input(phi: Channel, psi: Channel, u=None, seed=None, base: float = 2) -> CheckReport:
    """Entropy of ``(Phi (x) Psi)`` applied to a maximally entangled state ``vec(U)/sqrt(n)``.

    Bounds: ``max(S(Phi), S(Psi)) <= S(...) <= S(Phi) + S(Psi)``; also checks the
    reduction ``S((Phi (x) Psi)(|I><I|/n)) == S(Phi o Psi^T)``.
    """
    require_bistochastic(phi)
    require_bistochastic(psi)
    n = phi.dim_in
    if psi.dim_in != n:
        raise mc.DimensionError("channels must act on the same dimension")
    u = haar_unitary(n, seed) if u is None else mc.as_matrix(u)
    if u.shape != (n, n) or _maxdev(u.conj().T @ u, np.eye(n)) > 1e-10:
        raise ValueError("u must be an n x n unitary")
    both = tensor_channels(phi, psi)
    vu = mc.vec(u)
    middle = von_neumann_entropy(both(np.outer(vu, vu.conj()) / n), base)
    omega = mc.vec(np.eye(n))
    s_identity_input = von_neumann_entropy(both(np.outer(omega, omega.conj()) / n), base)
    s_reduced = map_entropy(compose(phi, transpose_channel(psi)), 1, base)
    s_phi, s_psi = map_entropy(phi, 1, base), map_entropy(psi, 1, base)
    parts = {
        "lower": (middle - max(s_phi, s_psi), ENTROPY_TOL),
        "upper": (s_phi + s_psi - middle, ENTROPY_TOL),
        "reduction": (-abs(s_identity_input - s_reduced), 1e-10),
    }
    return _report("entangled_input", _digest(seed, n=n), middle, [max(s_phi, s_psi), s_phi + s_psi], parts,
                   reduction_deviation=abs(s_identity_input - s_reduced))


# ---------------------------------------------------------------------------
# suite runner

def _rng_for(seed: int, n: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, i)))


def _random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _random_channel(n: int, rng: np.random.Generator) -> Channel:
    return random_cptp(n, int(rng.integers(1, n * n + 1)), rng)


def _random_bistochastic(n: int, rng: np.random.Generator) -> Channel:
    return random_bistochastic(n, int(rng.integers(1, n * n + 1)), rng)


SuiteFn = Callable[[int, int, int, dict], List[CheckReport]]


def _suite_choi_identities(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        out.append(check_choi_identities(_random_channel(n, rng), _random_channel(n, rng), seed=seed))
    return out


def _suite_transpose_dual(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        out.append(check_transpose_dual(_random_channel(n, rng), seed=seed))
        out.append(check_transpose_dual(_random_bistochastic(n, rng), seed=seed))
    return out


def _suite_additivity(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        phi, psi = _random_channel(n, rng), _random_channel(n, rng)
        out.extend(check_additivity(phi, psi, p, seed=seed) for p in (0.5, 1.0, 2.0, 3.0))
    return out


def _suite_tp_schwarz(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        out.append(check_tp_schwarz(_random_channel(n, rng).kraus, seed=seed))
        out.append(check_tp_schwarz(_random_bistochastic(n, rng).kraus, seed=seed))
    return out


def _suite_average_purity(n, seed, count, opts):
    out = []
    for i in range(min(count, opts.get("mc_count", count))):
        rng = _rng_for(seed, n, i)
        out.append(check_average_purity_identity(_random_channel(n, rng), opts.get("samples", 100_000),
                                                 seed=int(rng.integers(2**32))))
    return out


def _suite_extremality(n, seed, count, opts):
    out = [check_prop1_depolarizing_extremality(depolarizing(n, float(x))) for x in np.linspace(0, 1, 21)]
    for i in range(count):
        rng = _rng_for(seed, n, i)
        out.append(check_prop1_depolarizing_extremality(_random_channel(n, rng), opts.get("restarts", 64),
                                                        seed=int(rng.integers(2**32))))
    return out


def _suite_corollary(n, seed, count, opts):
    return [check_corollary_monotone(n, 21)]


def _suite_lindblad(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        c = _random_channel(n, rng)
        out.append(check_lindblad(c, _random_state(n, rng), seed=seed))
        out.append(check_lindblad_stochastic(c, _random_channel(n, rng), seed=seed))
    return out


def _suite_subadditivity(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        out.append(check_dynamical_subadditivity(_random_bistochastic(n, rng), _random_bistochastic(n, rng), seed=seed))
    return out


def _suite_entangled_input(n, seed, count, opts):
    out = []
    for i in range(count):
        rng = _rng_for(seed, n, i)
        phi, psi = _random_bistochastic(n, rng), _random_bistochastic(n, rng)
        out.append(check_entangled_input(phi, psi, haar_unitary(n, rng), seed=seed))
    return out


SUITES: Dict[str, SuiteFn] = {
    "additivity": _suite_additivity,
    "average_purity_identity": _suite_average_purity,
    "choi_identities": _suite_choi_identities,
    "corollary_monotone": _suite_corollary,
    "dynamical_subadditivity": _suite_subadditivity,
    "entangled_input": _suite_entangled_input,
    "lindblad": _suite_lindblad,
    "prop1_extremality": _suite_extremality,
    "tp_schwarz": _suite_tp_schwarz,
    "transpose_dual": _suite_transpose_dual,
}


def resolve_suites(selection: str) -> List[str]:
    """Expand a comma-separated suite filter; ``all`` selects every suite."""
    names = [s.strip() for s in selection.split(",") if s.strip()]
    if not names or "all" in names:
        return sorted(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise KeyError(f"unknown check name(s): {', '.join(unknown)}")
    return sorted(set(names))


def run_suite(names: Sequence[str], ns: Sequence[int], seed: int = 0, count: int = 20, jobs: int = 1,
              **opts) -> List[CheckReport]:
    """Run the selected suites for every dimension; reports come back in (name, n) order."""
    tasks = [(name, n) for name in sorted(names) for n in ns]

    def run(task):
        name, n = task
        return SUITES[name](n, seed, count, opts)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(run, tasks))
    else:
        chunks = [run(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


def saturating_reports(n: int, base: float = 2) -> List[CheckReport]:
    """Checks evaluated on families where the inequality or identity is tight."""
    ident = identity_channel(n)
    full = depolarizing(n, 1.0)
    u = unitary_channel(haar_unitary(n, 0))
    pure = np.zeros((n, n), dtype=np.complex128)
    pure[0, 0] = 1.0
    return [
        check_tp_schwarz(u.kraus),
        check_tp_schwarz(depolarizing(n, 0.5).kraus),
        check_prop1_depolarizing_extremality(depolarizing(n, 0.5)),
        check_prop1_depolarizing_extremality(u),
        check_lindblad(u, pure, base),
        check_lindblad(full, pure, base),
        check_dynamical_subadditivity(ident, ident, base),
        check_dynamical_subadditivity(u, random_bistochastic(n, 3, 1), base),
        check_entangled_input(ident, ident, np.eye(n), base=base),
        check_additivity(ident, ident, 2.0, base),
    ]

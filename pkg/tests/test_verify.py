import json
import math

import numpy as np
import pytest

from mapentropy import matrixcore as mc
from mapentropy.channel import (
    Channel,
    NotBistochastic,
    NotTracePreserving,
    depolarizing,
    identity_channel,
    random_bistochastic,
    random_cptp,
    transpose_channel,
    unitary_channel,
)
from mapentropy.haar import haar_unitary
from mapentropy.verify import (
    SUITES,
    CheckReport,
    check_additivity,
    check_average_purity_identity,
    check_choi_identities,
    check_corollary_monotone,
    check_dynamical_subadditivity,
    check_entangled_input,
    check_lindblad,
    check_lindblad_stochastic,
    check_prop1_depolarizing_extremality,
    check_tp_schwarz,
    check_transpose_dual,
    depolarizing_parameter,
    resolve_suites,
    run_suite,
    saturating_reports,
)

from conftest import random_density


def pure(n, i=0):
    rho = np.zeros((n, n), dtype=complex)
    rho[i, i] = 1
    return rho


def assert_consistent(r: CheckReport):
    assert r.passed == (r.margin >= -r.tolerance)
    json.dumps(r.to_dict())


def test_tp_schwarz_examples():
    r = check_tp_schwarz(unitary_channel(haar_unitary(3, 0)).kraus)
    assert r.passed and abs(r.margin) < 1e-12 and r.details["equality"]
    for n in (2, 3):
        r = check_tp_schwarz(depolarizing(n, 0.3).kraus)
        assert abs(r.margin) < 1e-12 and r.details["unital"]
    r = check_tp_schwarz(random_cptp(2, 2, 5).kraus)
    assert r.passed and r.margin > 1e-3 and not r.details["unital"]
    with pytest.raises(NotTracePreserving):
        check_tp_schwarz([0.5 * np.eye(2)])


def test_average_purity_identity_examples():
    r = check_average_purity_identity(identity_channel(3), 1000, 0)
    assert r.passed and r.statistical
    assert np.isclose(r.rhs, 1) and abs(r.lhs - 1) < 1e-12
    r = check_average_purity_identity(depolarizing(2, 0.5), 100_000, 1)
    assert np.isclose(r.rhs, 5 / 8) and r.passed
    r = check_average_purity_identity(random_cptp(3, 4, 2), 100_000, 2)
    assert r.passed and r.details["parts"]["gram_identity"]["margin"] > -1e-10
    assert_consistent(r)


def test_depolarizing_parameter_detection():
    assert np.isclose(depolarizing_parameter(depolarizing(3, 0.25)), 0.25)
    assert depolarizing_parameter(depolarizing(2, 0.0)) == 0.0
    assert depolarizing_parameter(random_cptp(2, 3, 0)) is None
    assert depolarizing_parameter(unitary_channel(haar_unitary(2, 1))) is None


def test_extremality_examples():
    r = check_prop1_depolarizing_extremality(depolarizing(2, 0.5))
    assert not r.statistical and r.details["exact"]
    assert np.isclose(r.rhs, 7 / 16) and np.isclose(r.lhs, 7 / 16)
    assert abs(r.margin) < 1e-12
    r = check_prop1_depolarizing_extremality(unitary_channel(haar_unitary(3, 2)), restarts=8)
    assert r.statistical and abs(r.margin) < 1e-9 and r.passed


def test_extremality_random_channels():
    worst = math.inf
    for s in range(200):
        n = 2 + s % 2
        r = check_prop1_depolarizing_extremality(random_cptp(n, 1 + s % (n * n), s), restarts=64, seed=s)
        assert r.passed, s
        worst = min(worst, r.margin)
    assert worst >= -1e-6


def test_extremality_rejects_non_square():
    c = Channel(np.stack([np.eye(3, 2)]))
    with pytest.raises(mc.DimensionError):
        check_prop1_depolarizing_extremality(c)


def test_depolarizing_relation_check_examples():
    r = check_corollary_monotone(2, 21)
    assert r.passed and not r.statistical
    assert r.lhs[0] == 0 and r.rhs[0] == 0
    assert np.isclose(r.lhs[-1], 1) and np.isclose(r.details["s_map"][-1], 2)
    assert r.details["parts"]["relation"]["margin"] > -1e-9
    for n in (3, 4):
        r = check_corollary_monotone(n, 11, base=math.e)
        assert r.passed and np.isclose(r.details["s_map"][-1], 2 * math.log(n))
    with pytest.raises(ValueError):
        check_corollary_monotone(2, 2)


def test_choi_identity_examples():
    ident = identity_channel(2)
    r = check_choi_identities(ident, ident)
    assert r.passed and r.details["tensor_deviation"] == 0
    u, v = unitary_channel(haar_unitary(3, 0)), unitary_channel(haar_unitary(3, 1))
    assert check_choi_identities(u, v).passed
    r = check_choi_identities(random_cptp(2, 3, 0), random_cptp(2, 3, 1))
    assert r.passed and r.details["composition_deviation"] < 1e-11
    with pytest.raises(mc.DimensionError):
        check_choi_identities(random_cptp(2, 2, 0), random_cptp(3, 2, 0))


def test_transpose_dual_examples():
    assert check_transpose_dual(identity_channel(3)).passed
    u = haar_unitary(3, 4)
    assert np.allclose(transpose_channel(unitary_channel(u)).choi, unitary_channel(u.T).choi)
    assert check_transpose_dual(unitary_channel(u)).passed
    r = check_transpose_dual(random_bistochastic(3, 4, 0))
    assert r.passed and r.details["map_entropy_deviation"] < 1e-10
    assert "map_entropy" not in check_transpose_dual(random_cptp(3, 2, 0)).details["parts"]


def test_additivity_examples():
    r = check_additivity(identity_channel(2), identity_channel(2), 1)
    assert r.passed and abs(r.lhs) < 1e-12
    full = depolarizing(2, 1.0)
    r = check_additivity(full, full, 1)
    assert np.isclose(r.lhs, 4) and np.isclose(r.rhs, 4)
    for s in range(10):
        for p in (0.5, 2, 3):
            assert check_additivity(random_cptp(2, 3, s), random_cptp(3, 2, s + 50), p).passed


def test_lindblad_examples():
    r = check_lindblad(unitary_channel(haar_unitary(2, 0)), pure(2))
    assert r.passed and abs(r.margin) < 1e-9
    r = check_lindblad(depolarizing(2, 1.0), pure(2))
    ent = r.details["entropies"]
    assert abs(ent["rho"]) < 1e-12 and np.isclose(ent["output"], 1) and np.isclose(ent["exchange"], 1)
    assert abs(r.details["parts"]["upper"]["margin"]) < 1e-9


def test_lindblad_random_pairs(rng):
    for s in range(500):
        n = 2 + s % 2
        r = check_lindblad(random_cptp(n, 1 + s % (n * n), s), random_density(rng, n))
        assert r.passed, s


def test_lindblad_stochastic_instance():
    for s in range(50):
        r = check_lindblad_stochastic(random_cptp(2, 2, s), random_cptp(2, 3, 100 + s))
        assert r.passed and r.check_name == "lindblad_stochastic"


def test_subadditivity_examples():
    ident = identity_channel(3)
    r = check_dynamical_subadditivity(ident, ident)
    assert r.passed and abs(r.lhs) < 1e-12
    psi = random_bistochastic(3, 3, 0)
    r = check_dynamical_subadditivity(unitary_channel(haar_unitary(3, 0)), psi)
    assert abs(r.details["parts"]["lower"]["margin"]) < 1e-9
    with pytest.raises(NotBistochastic):
        check_dynamical_subadditivity(random_cptp(2, 2, 0), identity_channel(2))


def test_subadditivity_random_pairs():
    for s in range(500):
        n = 2 + s % 2
        r = check_dynamical_subadditivity(random_bistochastic(n, 1 + s % 4, s), random_bistochastic(n, 1 + s % 3, s + 1000))
        assert r.passed, s


def test_entangled_input_examples():
    phi = random_bistochastic(2, 3, 0)
    r = check_entangled_input(phi, identity_channel(2), np.eye(2))
    assert abs(r.details["parts"]["lower"]["margin"]) < 1e-9
    assert abs(r.details["parts"]["upper"]["margin"]) < 1e-9
    r = check_entangled_input(random_bistochastic(3, 2, 1), random_bistochastic(3, 4, 2), np.eye(3))
    assert r.details["reduction_deviation"] < 1e-10
    with pytest.raises(ValueError):
        check_entangled_input(phi, phi, np.ones((2, 2)))


def test_entangled_input_random_triples():
    for s in range(200):
        n = 2 + s % 2
        r = check_entangled_input(random_bistochastic(n, 2, s), random_bistochastic(n, 3, s + 500), seed=s)
        assert r.passed, s


@pytest.mark.parametrize("n", [2, 3])
def test_saturating_families(n):
    for r in saturating_reports(n):
        assert r.passed, r.check_name
        assert abs(r.margin) <= 1e-9, (r.check_name, r.margin)


def test_report_invariants():
    reports = run_suite(list(SUITES), [2], seed=3, count=3, samples=5000, mc_count=2, restarts=16)
    assert {r.check_name for r in reports} >= set(SUITES) - {"dynamical_subadditivity"}
    for r in reports:
        assert_consistent(r)
        assert r.statistical == (r.check_name in ("average_purity_identity",) or
                                 (r.check_name == "prop1_extremality" and not r.details["exact"]))


def test_run_suite_deterministic_and_jobs_independent():
    names = ["additivity", "average_purity_identity", "prop1_extremality", "lindblad"]
    a = run_suite(names, [2, 3], seed=4, count=3, samples=4096, mc_count=1, restarts=8)
    b = run_suite(names, [2, 3], seed=4, count=3, samples=4096, mc_count=1, restarts=8, jobs=4)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    suites = [r.check_name.replace("_stochastic", "") for r in a]
    assert suites == sorted(suites)


def test_non_statistical_checks_never_fail_over_seeds():
    names = [s for s in SUITES if s not in ("average_purity_identity", "prop1_extremality")]
    for seed in range(100):
        for r in run_suite(names, [2, 3], seed=seed, count=5):
            assert r.passed, (seed, r.check_name, r.margin)


def test_resolve_suites():
    assert resolve_suites("all") == sorted(SUITES)
    assert resolve_suites("lindblad,additivity") == ["additivity", "lindblad"]
    with pytest.raises(KeyError):
        resolve_suites("nope")

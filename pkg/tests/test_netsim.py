import json
import threading
from pathlib import Path

import pytest

from mdtls.encoding import int_to_bytes
from mdtls.netsim import (FAULT_KINDS, Fault, Topology, adversary_view, load_scenarios,
                          run_scenario, run_session, simulate)
from mdtls.protocol import SessionConfig

MATRIX = Path(__file__).resolve().parent.parent / "fixtures" / "scenarios" / "fault_matrix.json"


@pytest.fixture(scope="module")
def matrix_results():
    out = []
    for sc in load_scenarios(MATRIX):
        _, _, verdict, ok = run_scenario(sc)
        out.append((sc, verdict, ok))
    return out


def test_every_scenario_matches_expectation(matrix_results):
    bad = [(sc["name"], v.to_dict()) for sc, v, ok in matrix_results if not ok]
    assert not bad


def test_fault_matrix_complete_for_both_modes(matrix_results):
    for mode in ("mdtls", "matls"):
        covered = {sc["faults"][0].kind for sc, v, _ in matrix_results
                   if sc["config"].mode == mode and sc["faults"] and not v.completed}
        assert covered == set(FAULT_KINDS), mode
        honest = [v for sc, v, _ in matrix_results if sc["config"].mode == mode
                  and sc["expected_verdict"] == {"status": "completed"}]
        assert honest and all(v.completed for v in honest)


def test_no_false_completes(matrix_results):
    assert all(not v.completed for sc, v, _ in matrix_results if sc["faults"])


def test_abort_points_are_stable(matrix_results):
    for sc, v, _ in matrix_results[:6]:
        again = run_session(sc["config"], sc["faults"])[2]
        assert again == v


def test_topology_indices():
    t = Topology(2)
    assert t.entities == ["client", "mb1", "mb2", "server"]
    assert t.index_of("server") == t.n == 3


def test_fault_validation():
    with pytest.raises(ValueError):
        Fault("teleport", 1)
    c = SessionConfig(middlebox_count=1)
    with pytest.raises(ValueError):
        run_session(c, [Fault("drop", 1, "server_hello"), Fault("drop", 0, "server_hello")])
    with pytest.raises(ValueError):
        run_session(c, [Fault("silent-modify", 2)])
    f = Fault("replay", 1, "record", {"source_seed": 3})
    assert Fault.from_dict(f.to_dict()) == f


def test_determinism():
    c = SessionConfig(middlebox_count=2, seed=42, records=2, modifiers=(2,))
    a, b = run_session(c), run_session(c)
    assert a[0].to_json() == b[0].to_json()
    assert a[1] == b[1] and a[2] == b[2]
    other = run_session(SessionConfig(middlebox_count=2, seed=43, records=2, modifiers=(2,)))
    assert other[0].to_json() != a[0].to_json()


def test_concurrent_sessions_are_isolated():
    configs = [SessionConfig(middlebox_count=n, seed=n) for n in range(4)]
    expected = [run_session(c)[0].to_json() for c in configs]
    got = [None] * len(configs)

    def work(i):
        got[i] = run_session(configs[i])[0].to_json()
    threads = [threading.Thread(target=work, args=(i,)) for i in range(len(configs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert got == expected


@pytest.mark.parametrize("mode,scheme", [("mdtls", "ecdsa"), ("matls", "ecdsa"), ("mdtls", "schnorr")])
def test_adversary_view_leaks_no_secrets(mode, scheme):
    r = simulate(SessionConfig(mode=mode, scheme=scheme, middlebox_count=2, seed=5, records=2,
                               modifiers=(1,)))
    assert r.verdict.completed
    corpus = adversary_view(r.transcript)
    for ent in r.entities:
        for secret in ent.secrets():
            assert int_to_bytes(secret, 32) not in corpus
        for keys in ent.segments.values():
            assert keys.enc_key not in corpus and keys.mac_key not in corpus
            assert keys.shared_secret not in corpus
    for pub in r.transcript.public_keys:
        assert pub in corpus
    for d in r.transcript.deliveries:
        assert d["plaintext"] not in corpus
        assert d["plaintext"][:12] not in corpus


def test_load_scenarios_defaults(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps([{"config": {"middlebox_count": 1}}]))
    (sc,) = load_scenarios(path)
    assert sc["faults"] == [] and sc["expected_verdict"] == {"status": "completed"}
    assert run_scenario(sc)[3]

import json

import numpy as np
import pytest

from quditmc.channels import compose, dephasing, depolarizing, identity_channel, unitary_channel
from quditmc.estimator import (
    ProtocolError,
    SamplingPlan,
    draw_events,
    manifest_text,
    run_estimate,
    run_estimate_hermitized,
    verify_guarantee,
)
from quditmc.gates import fourier, haar_unitary, phase_gate
from quditmc.mub import mubs_explicit
from quditmc.operator_basis import QupitDims, gell_mann_basis, gen_pauli, hermitize, tensor_basis
from quditmc.relevance import characteristic_table, clifford_map, relevance_distribution

Q3 = QupitDims(3)
F3 = fourier(3)


def noisy(u, q=0.1, dims=Q3):
    return compose(unitary_channel(u), depolarizing(q, dims))


def test_plan_validation():
    with pytest.raises(ValueError):
        SamplingPlan(0, 0.1, 1)
    with pytest.raises(ValueError):
        SamplingPlan(0.1, 1.0, 1)
    with pytest.raises(ValueError, match="seed"):
        SamplingPlan(0.1, 0.1, -1)
    with pytest.raises(ValueError, match="protocol"):
        SamplingPlan(0.1, 0.1, 1, protocol="nope")
    assert SamplingPlan(0.1, 0.1, 1).L == 1000


@pytest.mark.parametrize("protocol", ["entanglement", "two_design", "classical"])
def test_identity_channel_exact(protocol):
    plan = SamplingPlan(0.2, 0.2, 5, protocol=protocol, shot_mode="exact_expectation")
    res = run_estimate(np.eye(3), identity_channel(3), gen_pauli(3), plan, mubs=mubs_explicit(3))
    assert res.fav_estimate == pytest.approx(1.0)
    assert res.y_tilde.imag == pytest.approx(0.0, abs=1e-12)


def test_exact_mode_event_values():
    # identity events return 1, every other Pauli is shrunk by 1 - q
    plan = SamplingPlan(0.1, 0.1, 3, shot_mode="exact_expectation")
    res = run_estimate(F3, noisy(F3), gen_pauli(3), plan)
    expected = np.array([1.0 if e.i == 0 else 0.9 for e in res.events])
    assert np.allclose(res.x_values, expected)
    assert res.oracle["fav"] == pytest.approx(0.93333333, abs=1e-8)
    assert abs(res.fav_estimate - res.oracle["fav"]) < 0.01


def test_finite_shot_estimate_near_oracle():
    res = run_estimate(F3, noisy(F3), gen_pauli(3), SamplingPlan(0.05, 0.05, 9))
    assert abs(res.fav_estimate - 0.93333333) < 0.05
    assert res.total_shots == sum(e.m for e in res.events)


def test_shortcut_matches_table_route():
    b = gen_pauli(3)
    u = phase_gate(3) @ F3
    plan = SamplingPlan(0.1, 0.1, 21)
    dist = relevance_distribution(characteristic_table("entanglement", u, None, b))
    via_table = draw_events(dist, plan, np.random.default_rng(0))
    via_map = draw_events(None, plan, np.random.default_rng(0), clifford_map(u, b))
    assert [(e.i, e.k, e.m) for e in via_table] == [(e.i, e.k, e.m) for e in via_map]
    assert np.allclose([e.beta for e in via_table], [e.beta for e in via_map])
    fast = run_estimate(u, noisy(u), b, plan)
    slow = run_estimate(u, noisy(u), b, plan, use_shortcut=False)
    assert fast.fav_estimate == slow.fav_estimate


def test_deterministic_and_thread_independent():
    u = haar_unitary(3, 4)
    plan = SamplingPlan(0.2, 0.1, 77)
    a = run_estimate(u, noisy(u), gen_pauli(3), plan, threads=1)
    b = run_estimate(u, noisy(u), gen_pauli(3), plan, threads=4)
    assert manifest_text(a) == manifest_text(b)
    c = run_estimate(u, noisy(u), gen_pauli(3), SamplingPlan(0.2, 0.1, 78), threads=1)
    assert manifest_text(a) != manifest_text(c)


def test_runs_are_independent():
    plan = SamplingPlan(0.2, 0.2, 1)
    a = run_estimate(F3, noisy(F3), gen_pauli(3), plan, run=0)
    b = run_estimate(F3, noisy(F3), gen_pauli(3), plan, run=1)
    assert a.kappa != b.kappa


def test_generic_unitary_estimate():
    u = haar_unitary(3, 8)
    res = run_estimate(u, noisy(u, 0.2), gen_pauli(3), SamplingPlan(0.1, 0.1, 2))
    assert abs(res.fav_estimate - res.oracle["fav"]) < 0.1


def test_x_variance_bounded():
    # X = chi_D / chi_U has second moment sum |chi_D|^2 / d^2, at most 1
    u = haar_unitary(3, 3)
    res = run_estimate(u, noisy(u), gen_pauli(3), SamplingPlan(0.2, 0.2, 4, shot_mode="exact_expectation"))
    assert np.mean(np.abs(res.x_values) ** 2) < 1.3
    assert np.var(res.x_values.real) <= 1.3


def test_two_design_estimate():
    plan = SamplingPlan(0.1, 0.1, 6, protocol="two_design")
    res = run_estimate(F3, noisy(F3), gen_pauli(3), plan)
    assert abs(res.fav_estimate - 0.93333333) < 0.1
    assert res.fe_estimate == pytest.approx((4 * res.fav_estimate - 1) / 3)


def test_classical_estimate_reports_bounds():
    u = phase_gate(3)
    ch = compose(unitary_channel(u), dephasing(0.1, Q3))
    res = run_estimate(u, ch, gen_pauli(3), SamplingPlan(0.1, 0.1, 6, protocol="classical", shot_mode="exact_expectation"))
    oc = res.oracle["classical"]
    assert res.extra["classical_f1"] == pytest.approx(oc["f1"])
    assert abs(res.extra["classical_f2"] - oc["f2"]) < 0.05
    assert oc["fav_lower"] <= res.oracle["fav"] <= oc["fav_upper"]
    assert abs(res.extra["fav_lower"] - oc["fav_lower"]) < 0.1


def test_state_protocol_refused_on_non_partitioning_basis():
    b = tensor_basis(hermitize(gen_pauli(3)), 2)
    plan = SamplingPlan(0.3, 0.3, 1, protocol="two_design")
    with pytest.raises(ProtocolError):
        run_estimate(np.eye(9), identity_channel(9), b, plan)


def test_gell_mann_operator_protocol():
    u = haar_unitary(3, 5)
    res = run_estimate(u, noisy(u), gell_mann_basis(), SamplingPlan(0.1, 0.1, 2))
    assert abs(res.fav_estimate - res.oracle["fav"]) < 0.1


def test_hermitized_two_stage():
    h = hermitize(gen_pauli(3))
    u = phase_gate(3)
    ch = compose(unitary_channel(u), dephasing(0.1, Q3))
    res = run_estimate_hermitized(u, ch, h, SamplingPlan(0.1, 0.1, 3))
    assert abs(res.fav_estimate - res.oracle["fav"]) < 0.1
    exact = run_estimate_hermitized(u, ch, h, SamplingPlan(0.1, 0.1, 3, shot_mode="exact_expectation"))
    assert abs(exact.fav_estimate - exact.oracle["fav"]) < 0.05


def test_hermitized_requires_clifford():
    with pytest.raises(ProtocolError, match="Clifford"):
        run_estimate_hermitized(haar_unitary(3, 0), identity_channel(3), hermitize(gen_pauli(3)), SamplingPlan(0.2, 0.2, 1))


def test_total_shots_clifford_within_bound():
    from quditmc.relevance import shot_bound

    res = run_estimate(F3, noisy(F3), gen_pauli(3), SamplingPlan(0.1, 0.1, 1))
    assert res.total_shots <= shot_bound(0.1, 0.1)
    assert res.total_shots == 2 * 1000


def test_manifest_is_json():
    res = run_estimate(F3, noisy(F3), gen_pauli(3), SamplingPlan(0.2, 0.2, 1))
    doc = json.loads(manifest_text(res, verbose=True))
    assert doc["plan"]["L"] == 125
    assert len(doc["events"]) == 125
    assert "guarantee" in doc
    assert res.csv_text().splitlines()[0].startswith("protocol,d,")


@pytest.mark.slow
def test_guarantee_small():
    rep = verify_guarantee(F3, noisy(F3), gen_pauli(3), SamplingPlan(0.2, 0.2, 0), runs=40)
    assert rep.ok
    assert rep.oracle_fav == pytest.approx(0.93333333)

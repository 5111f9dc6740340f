import cmath
import math
import random

import numpy as np
import pytest

import dense_oracle
from faraday_ecp.errors import BadCoefficients, MalformedInput
from faraday_ecp.protocol import (
    FAIL_MINUS,
    FAIL_PLUS,
    LABELS,
    SUCCESS_MINUS,
    SUCCESS_PLUS,
    DetectionModel,
    ProtocolConfig,
    RoundCoefficients,
    analytic_round_probability,
    build_auxiliary_photon,
    build_initial_state,
    coefficient_recurrence,
    coefficients_for_round,
    detector_labels,
    ghz_state,
    peng_success_probability,
    rival_crossover,
    run_protocol_exact,
    run_round,
    total_success_probability,
)
from faraday_ecp.state import fidelity, largest_schmidt_coefficient, make_state

S = 1 / math.sqrt(2)
A08, B08 = math.sqrt(0.8), math.sqrt(0.2)


def random_alpha(rng, lo=0.05, hi=0.95):
    a2 = rng.uniform(lo, hi)
    return math.sqrt(a2), math.sqrt(1 - a2)


def random_complex_alpha(rng):
    a, b = random_alpha(rng)
    return a * cmath.exp(1j * rng.uniform(0, 2 * math.pi)), b * cmath.exp(1j * rng.uniform(0, 2 * math.pi))


def one_round(a, b, n=2):
    return run_round(build_initial_state(a, b, n), build_auxiliary_photon(1, a, b))


# ---------------------------------------------------------------- construction


def test_initial_state_two_photons():
    s = build_initial_state(A08, B08, 2)
    assert s.layout.names == ("a1", "b1")
    assert s.terms == {("L", "R"): pytest.approx(A08), ("R", "L"): pytest.approx(B08)}


def test_initial_state_symmetric_ghz_is_maximally_entangled():
    s = build_initial_state(S, S, 3)
    for slot in s.layout.names:
        assert largest_schmidt_coefficient(s, {slot}) == pytest.approx(S, abs=1e-12)


def test_initial_state_five_photons():
    a, b = math.sqrt(0.81), math.sqrt(0.19)
    s = build_initial_state(a, b, 5)
    assert s.layout.names == ("a1", "b1", "b2", "b3", "b4")
    assert s.amplitude(("L", "R", "R", "R", "R")) == pytest.approx(a, abs=1e-15)
    assert s.amplitude(("R", "L", "L", "L", "L")) == pytest.approx(b, abs=1e-15)


@pytest.mark.parametrize("a,b", [(1, 0), (0, 1), (0.5, 0.5), (0.9, 0.9)])
def test_initial_state_bad_coefficients(a, b):
    with pytest.raises(BadCoefficients):
        build_initial_state(a, b, 2)


def test_auxiliary_photon_rounds():
    aux = build_auxiliary_photon(1, A08, B08)
    assert aux.amplitude(("L",)) == pytest.approx(A08) and aux.amplitude(("R",)) == pytest.approx(B08)
    aux = build_auxiliary_photon(2, A08, B08)
    norm = math.sqrt(0.8 ** 2 + 0.2 ** 2)
    assert aux.amplitude(("L",)) == pytest.approx(0.8 / norm, abs=1e-15)
    assert aux.amplitude(("R",)) == pytest.approx(0.2 / norm, abs=1e-15)
    for k in (1, 2, 5, 40):
        aux = build_auxiliary_photon(k, S, S)
        assert aux.amplitude(("L",)) == pytest.approx(S, abs=1e-15)


def test_auxiliary_photon_direct_power_form_complex():
    rng = random.Random(11)
    for _ in range(20):
        a, b = random_complex_alpha(rng)
        for k in (1, 2, 3, 4):
            e = 2 ** (k - 1)
            v = np.array([a ** e, b ** e])
            v /= np.linalg.norm(v)
            aux = build_auxiliary_photon(k, a, b)
            assert aux.amplitude(("L",)) == pytest.approx(v[0], abs=1e-12)
            assert aux.amplitude(("R",)) == pytest.approx(v[1], abs=1e-12)


def test_config_validation():
    with pytest.raises(BadCoefficients):
        ProtocolConfig(0.6, 0.6)
    with pytest.raises(BadCoefficients):
        ProtocolConfig(1.0, 0.0)
    with pytest.raises(BadCoefficients):
        ProtocolConfig(S, S, n_photons=1)
    with pytest.raises(BadCoefficients):
        ProtocolConfig(S, S, max_rounds=0)
    with pytest.raises(BadCoefficients):
        ProtocolConfig(S, S, eta_a=1.2)
    with pytest.raises(BadCoefficients):
        ProtocolConfig.from_alpha2(1.0)


# ---------------------------------------------------------------- one round


def test_detector_label_map():
    # classified by fidelity on a probe input; agrees with the two-photon derivation
    assert detector_labels() == {
        ("H", "gL"): SUCCESS_PLUS,
        ("V", "gL"): SUCCESS_MINUS,
        ("V", "gR"): FAIL_PLUS,
        ("H", "gR"): FAIL_MINUS,
    }


def test_round_probabilities_match_dense_oracle():
    outcomes = {o.label: o for o in one_round(A08, B08)}
    assert [o.label for o in one_round(A08, B08)] == list(LABELS)
    psi = dense_oracle.round_state(A08, B08, [A08, B08], 2)
    bit = {"H": 0, "V": 1, "gL": 0, "gR": 1}
    for o in outcomes.values():
        p, _, _ = dense_oracle.branch(psi, 2, bit[o.detector_outcome[0]], bit[o.detector_outcome[1]])
        assert o.probability == pytest.approx(p, abs=1e-14)
    # frozen from the dense oracle
    assert outcomes[SUCCESS_PLUS].probability == pytest.approx(0.16, abs=1e-12)
    assert outcomes[SUCCESS_MINUS].probability == pytest.approx(0.16, abs=1e-12)
    assert outcomes[FAIL_PLUS].probability == pytest.approx(0.34, abs=1e-12)
    assert outcomes[FAIL_MINUS].probability == pytest.approx(0.34, abs=1e-12)


def test_round_symmetric_point():
    outcomes = one_round(S, S, 3)
    assert sum(o.probability for o in outcomes if o.success) == pytest.approx(0.5, abs=1e-12)
    for o in outcomes:
        assert largest_schmidt_coefficient(o.post_state, {"a1"}) == pytest.approx(S, abs=1e-12)


def test_round_probabilities_sum_to_one():
    rng = random.Random(12)
    for _ in range(50):
        a, b = random_complex_alpha(rng)
        outcomes = one_round(a, b, rng.randint(2, 6))
        assert sum(o.probability for o in outcomes) == pytest.approx(1, abs=1e-12)


def test_success_minus_corrected_to_plus():
    outcomes = {o.label: o for o in one_round(A08, B08, 4)}
    o = outcomes[SUCCESS_MINUS]
    assert o.corrected
    assert fidelity(o.post_state, ghz_state(4)) == pytest.approx(1, abs=1e-12)
    assert not outcomes[SUCCESS_PLUS].corrected


def test_success_branches_certified_for_random_inputs():
    rng = random.Random(13)
    for _ in range(50):
        a, b = random_complex_alpha(rng)
        n = rng.randint(2, 6)
        for o in one_round(a, b, n):
            if o.success:
                assert fidelity(o.post_state, ghz_state(n)) >= 1 - 1e-10
                assert abs(largest_schmidt_coefficient(o.post_state, {"a1"}) - S) <= 1e-10


def test_run_round_rejects_non_ghz_input():
    product = make_state(["a1", "b1"], {("L", "R"): 1})
    with pytest.raises(MalformedInput):
        run_round(product, build_auxiliary_photon(1, A08, B08))
    wrong = make_state(["a1", "b1"], {("L", "L"): 1, ("R", "R"): 1})
    with pytest.raises(MalformedInput):
        run_round(wrong, build_auxiliary_photon(1, S, S))


def test_run_round_rejects_mismatched_aux():
    with pytest.raises(MalformedInput):
        run_round(build_initial_state(A08, B08), build_auxiliary_photon(2, A08, B08))
    with pytest.raises(MalformedInput):
        run_round(build_initial_state(A08, B08), build_auxiliary_photon(1, A08, B08),
                  RoundCoefficients(S, S, 1))


# ---------------------------------------------------------------- recurrence


def test_recurrence_fixed_point():
    c = coefficient_recurrence(RoundCoefficients(S, S, 1))
    assert c.alpha_k == pytest.approx(S, abs=1e-15) and c.beta_k == pytest.approx(S, abs=1e-15)
    assert c.round_index == 2


def test_recurrence_value():
    c = coefficient_recurrence(RoundCoefficients(A08, B08, 1))
    assert c.alpha_k == pytest.approx(0.8 / math.sqrt(0.68), abs=1e-15)
    assert c.beta_k == pytest.approx(0.2 / math.sqrt(0.68), abs=1e-15)
    assert (c.alpha_k, c.beta_k) == pytest.approx((0.9701, 0.2425), abs=1e-4)


def test_recurrence_matches_fail_branch():
    rng = random.Random(14)
    for _ in range(100):
        a, b = random_complex_alpha(rng)
        n = rng.choice([2, 3, 4])
        c = RoundCoefficients(a, b, 1)
        rebuilt = build_initial_state(*(lambda r: (r.alpha_k, r.beta_k))(coefficient_recurrence(c)), n)
        for o in run_round(build_initial_state(a, b, n), build_auxiliary_photon(1, a, b), c):
            if not o.success:
                assert o.post_state.allclose(rebuilt, atol=1e-12)


# ---------------------------------------------------------------- closed forms


def test_analytic_symmetric():
    for k in range(1, 12):
        assert analytic_round_probability(k, S, S) == pytest.approx(0.5 ** k, rel=1e-12)


def test_analytic_explicit_values():
    assert analytic_round_probability(1, A08, B08) == pytest.approx(0.32, abs=1e-15)
    # explicit two- and three-round expressions, evaluated
    p2 = 2 * 0.16 ** 2 / (0.8 ** 2 + 0.2 ** 2)
    p3 = 2 * 0.16 ** 4 / ((0.8 ** 2 + 0.2 ** 2) * (0.8 ** 4 + 0.2 ** 4))
    assert analytic_round_probability(2, A08, B08) == pytest.approx(p2, abs=1e-15)
    assert analytic_round_probability(3, A08, B08) == pytest.approx(p3, abs=1e-15)
    assert p2 == pytest.approx(0.0752941176, abs=1e-10)
    assert p3 == pytest.approx(4.687571527e-3, abs=1e-12)


def test_analytic_large_k_underflows_to_zero():
    assert analytic_round_probability(80, A08, B08) == 0.0
    assert analytic_round_probability(60, S, S) == pytest.approx(0.5 ** 60, rel=1e-12)


def test_analytic_matches_dense_chain():
    rng = random.Random(15)
    for _ in range(50):
        a, b = random_alpha(rng)
        dense = dense_oracle.chained_success(a, b, 6)
        for k, p in enumerate(dense, start=1):
            assert analytic_round_probability(k, a, b) == pytest.approx(p, abs=1e-10)


def test_simulation_formula_equivalence():
    rng = random.Random(16)
    for _ in range(200):
        a, b = random_complex_alpha(rng)
        cfg = ProtocolConfig(a, b, n_photons=rng.randint(2, 6), max_rounds=rng.randint(1, 6), eta_a=1, eta_p=1)
        run = run_protocol_exact(cfg, check=False)
        for row in run.report.per_round:
            assert row.p_unconditional == pytest.approx(analytic_round_probability(row.k, a, b), abs=1e-10)


def test_n_invariance_exact():
    rng = random.Random(17)
    for _ in range(20):
        a, b = random_alpha(rng)
        ref = [r.p_unconditional for r in run_protocol_exact(ProtocolConfig(a, b, 2, 4)).report.per_round]
        for n in (3, 5, 7):
            got = [r.p_unconditional for r in run_protocol_exact(ProtocolConfig(a, b, n, 4)).report.per_round]
            assert got == ref


def test_recurrence_closure_through_chain():
    rng = random.Random(18)
    for _ in range(20):
        a, b = random_complex_alpha(rng)
        cfg = ProtocolConfig(a, b, n_photons=3, max_rounds=4)
        run = run_protocol_exact(cfg)
        for k, state in enumerate(run.inputs, start=1):
            c = coefficients_for_round(k, a, b)
            assert state.allclose(build_initial_state(c.alpha_k, c.beta_k, 3), atol=1e-12)


# ---------------------------------------------------------------- totals


def test_total_symmetric_final_detection():
    cfg = ProtocolConfig(S, S, n_photons=5, max_rounds=5, eta_a=0.8, eta_p=0.8)
    report = total_success_probability(cfg)
    assert report.total_success == pytest.approx(0.64 * (1 - 2 ** -5), abs=1e-12)
    assert report.total_success == pytest.approx(0.62, abs=1e-12)


def test_total_single_round_ideal():
    cfg = ProtocolConfig(A08, B08, max_rounds=1, eta_a=1, eta_p=1)
    assert total_success_probability(cfg).total_success == pytest.approx(2 * 0.16, abs=1e-15)


def test_total_zero_atom_efficiency():
    cfg = ProtocolConfig(A08, B08, eta_a=0, eta_p=0.9)
    for model in DetectionModel:
        assert total_success_probability(cfg, model).total_success == 0


def test_per_round_model():
    cfg = ProtocolConfig(S, S, max_rounds=3, eta_a=0.8, eta_p=0.8)
    report = total_success_probability(cfg, "per-round")
    expected = sum(0.64 ** k * 0.5 ** k for k in (1, 2, 3))
    assert report.total_success == pytest.approx(expected, abs=1e-15)
    assert report.total_success < total_success_probability(cfg, "final").total_success


def test_report_total_is_weighted_sum():
    cfg = ProtocolConfig(A08, B08, max_rounds=4, eta_a=0.7, eta_p=0.9)
    for model in DetectionModel:
        r = total_success_probability(cfg, model)
        assert r.total_success == pytest.approx(
            sum(row.p_unconditional * model.efficiency(row.k, 0.7, 0.9) for row in r.per_round), abs=1e-15)
        assert 0 <= r.total_success <= 1


def test_total_independent_of_n_under_final_detection():
    totals = {total_success_probability(ProtocolConfig(A08, B08, n_photons=n)).total_success for n in (2, 5, 10, 50)}
    assert len(totals) == 1


def test_monotone_exhaustion():
    rng = random.Random(19)
    for _ in range(20):
        a, b = random_alpha(rng)
        totals = [total_success_probability(ProtocolConfig(a, b, max_rounds=k)).total_success for k in range(1, 12)]
        assert all(t2 >= t1 for t1, t2 in zip(totals, totals[1:]))
        assert totals[-1] <= 1
    t = total_success_probability(ProtocolConfig(S, S, max_rounds=60)).total_success
    assert t == pytest.approx(0.64, abs=1e-12)


def test_peng_values():
    assert peng_success_probability(S, S, 5, 0.8, 0.8) == pytest.approx(0.131072, abs=1e-12)
    assert peng_success_probability(S, S, 10, 0.8, 0.8) == pytest.approx(0.8 ** 11 * 0.5, abs=1e-15)
    assert peng_success_probability(S, S, 10, 0.8, 0.8) == pytest.approx(0.04295, abs=1e-5)
    for n in (2, 7):
        single = total_success_probability(ProtocolConfig(A08, B08, n, 1, 1, 1)).total_success
        assert peng_success_probability(A08, B08, n, 1, 1) == pytest.approx(single, abs=1e-15)


def test_rival_crossover():
    for eta_p in (0.3, 0.8, 0.95):
        cfg = ProtocolConfig(S, S, max_rounds=5, eta_a=0.8, eta_p=eta_p)
        n_star = rival_crossover(cfg)
        assert n_star is not None
        for n in range(n_star, n_star + 30):
            for i in range(11, 90):
                a = i / 100
                c = ProtocolConfig.from_alpha2(a * a, n_photons=n, max_rounds=5, eta_a=0.8, eta_p=eta_p)
                assert total_success_probability(c).total_success > c.eta_p ** n * c.eta_a * 2 * (a * a) * (1 - a * a)


# ---------------------------------------------------------------- end to end


def test_exact_run_same_probabilities_for_different_n():
    a, b = A08, B08
    p2 = [r.p_unconditional for r in run_protocol_exact(ProtocolConfig(a, b, 2, 3)).report.per_round]
    p7 = [r.p_unconditional for r in run_protocol_exact(ProtocolConfig(a, b, 7, 3)).report.per_round]
    assert p2 == p7


def test_exact_run_cumulative_two_rounds():
    run = run_protocol_exact(ProtocolConfig(A08, B08, max_rounds=2, eta_a=1, eta_p=1))
    assert run.report.total_success == pytest.approx(0.32 + 2 * 0.16 ** 2 / 0.68, abs=1e-12)
    assert run.report.total_success == pytest.approx(0.39529, abs=1e-5)


def test_exact_run_symmetric_single_round():
    run = run_protocol_exact(ProtocolConfig(S, S, max_rounds=1, eta_a=1, eta_p=1))
    assert run.report.total_success == pytest.approx(0.5, abs=1e-12)


def test_exact_run_survives_pruned_tail():
    # beta_k falls below the pruning floor after a few rounds; the chain stops cleanly
    cfg = ProtocolConfig.from_alpha2(0.99, max_rounds=10, eta_a=1, eta_p=1)
    run = run_protocol_exact(cfg)
    assert len(run.rounds) < 10
    for row in run.report.per_round:
        assert row.p_unconditional == pytest.approx(analytic_round_probability(row.k, cfg.alpha, cfg.beta), abs=1e-10)


def test_report_json_shape():
    d = run_protocol_exact(ProtocolConfig(A08, B08, max_rounds=2)).report.to_dict()
    assert d["schema_version"] == 1
    assert [r["k"] for r in d["per_round"]] == [1, 2]
    assert d["detection_model"] == "final"

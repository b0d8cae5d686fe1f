"""Protocol state-machine tests: counters, estimators, decision, determinism."""

import json

import numpy as np
import pytest

from fklab.analysis import hoeffding_bound
from fklab.lattice import build_lattice, random_input
from fklab.prover import NoiseModel, exact_model_parameters, make_degraded_model, make_honest_model
from fklab.verifier import CHUNK_SIZE, ProtocolConfig, decide, run_protocol

FULL_BUDGET = 3_500_000


@pytest.fixture(scope="module")
def setup_2x2():
    lattice = build_lattice(2, 2)
    spec = random_input(4, np.random.default_rng(11))
    model = make_honest_model(lattice, spec, NoiseModel(clock_phase_theta=0.4))
    return lattice, spec, model


def run(model, lattice, spec, num_copies, seed, **cfg_kwargs):
    config = ProtocolConfig(num_copies=num_copies, master_seed=seed, **cfg_kwargs)
    return run_protocol(model, lattice, spec, config)


# ---------------------------------------------------------------------------
# full-budget behavior


def test_perfect_prover_accepted_at_full_budget(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, FULL_BUDGET, seed=1234)
    assert report.accepted
    assert report.f_in_m >= 0.994
    assert report.o10_sq_scaled >= 0.994
    assert 0.494 <= report.p_samp_m <= 0.506


def test_branch_allocation_concentration(setup_2x2):
    # Expected branch sizes N/2, N/4, N/8, N/8; each within 1% at 3.5e6 copies.
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, FULL_BUDGET, seed=77)
    c = report.counters
    assert abs(c.n_total_sampling - FULL_BUDGET / 2) < 0.01 * FULL_BUDGET / 2
    assert abs(c.n_input_test - FULL_BUDGET / 4) < 0.01 * FULL_BUDGET / 4
    assert abs(c.n_x - FULL_BUDGET / 8) < 0.01 * FULL_BUDGET / 8
    assert abs(c.n_y - FULL_BUDGET / 8) < 0.01 * FULL_BUDGET / 8


def test_degraded_prover_rejected(setup_2x2):
    lattice, spec, _ = setup_2x2
    degraded = make_degraded_model(lattice, spec, 0.97, 1.0)
    for seed in (5, 6, 7):
        _, report = run(degraded, lattice, spec, FULL_BUDGET, seed=seed)
        assert not report.accepted
        assert report.o10_sq_scaled < 0.994


# ---------------------------------------------------------------------------
# counters and transcript


def test_counter_invariants_and_books_balance(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, 200_000, seed=3)
    c = report.counters
    assert c.n_in_plus_0 <= c.n_in_plus
    total = c.n_total_sampling + c.n_input_test + c.n_x + c.n_y
    assert total == 200_000
    assert report.samples.size <= c.n_total_sampling


def test_report_recomputable_from_transcript_bit_for_bit(setup_2x2):
    lattice, spec, model = setup_2x2
    transcript, report = run(model, lattice, spec, 150_000, seed=21)
    counters, samples = transcript.recompute_counters()
    assert counters == report.counters
    assert np.array_equal(samples, report.samples)
    o10_again = 4.0 * abs((counters.s_xu / counters.n_x - 1j * counters.s_yu / counters.n_y) / 2.0) ** 2
    assert o10_again == report.o10_sq_scaled


def test_transcript_records_well_formed(setup_2x2):
    lattice, spec, model = setup_2x2
    transcript, _ = run(model, lattice, spec, 400, seed=8)
    modes_seen = set()
    for record in transcript.iter_records():
        json.dumps(record)  # JSONL-serializable
        assert record["clock_outcome"] in (-1, 1)
        if record["b_sampling"] == 1:
            assert record["basis_choice"] is None
            assert record["u"] is None
            modes_seen.add("sample")
            if record["clock_outcome"] == -1:
                assert len(record["system_outcomes"]) == 4
        elif record["b_testtype"] == 1:
            assert record["basis_choice"] in ("X", "Y")
            assert len(record["system_outcomes"]) == 4
            assert abs(complex(*record["u"])) == pytest.approx(1.0, abs=1e-9)
            modes_seen.add("prop")
        else:
            modes_seen.add("input")
    assert modes_seen == {"sample", "prop", "input"}


def test_u_column_matches_u_value(setup_2x2):
    from fklab.simulator import u_value

    lattice, spec, model = setup_2x2
    transcript, _ = run(model, lattice, spec, 2_000, seed=13)
    prop = transcript.basis != -1
    for i in np.flatnonzero(prop)[:50]:
        signs = [1 - 2 * ((int(transcript.sys_idx[i]) >> k) & 1) for k in range(4)]
        assert abs(transcript.u[i] - u_value(signs, lattice)) < 1e-10


# ---------------------------------------------------------------------------
# estimator statistics


def test_estimators_unbiased_over_runs(rng):
    lattice = build_lattice(2, 2)
    spec = random_input(4, rng)
    model = make_honest_model(lattice, spec, NoiseModel(clock_phase_theta=1.0))
    exact = exact_model_parameters(model)
    o10s, f_ins = [], []
    for seed in range(200):
        _, report = run(model, lattice, spec, 20_000, seed=seed)
        o10s.append(report.o10_m)
        f_ins.append(report.f_in_m)
    o10s = np.array(o10s)
    assert all(f == 1.0 for f in f_ins)  # perfect input, no flips
    for part in (np.real, np.imag):
        vals = part(o10s)
        se = vals.std() / np.sqrt(len(vals))
        assert abs(vals.mean() - part(exact.tr_rho_o10)) < 3 * se + 1e-12


def test_f_in_deviation_fraction_within_hoeffding(rng):
    # Degraded input fidelity 0.97; with ~N/8 clock +1 input copies the
    # deviation beyond 0.006 should be rarer than the two-sided tail bound.
    lattice = build_lattice(2, 2)
    spec = random_input(4, rng)
    model = make_degraded_model(lattice, spec, 1.0, 0.97)
    num_copies = 200_000
    exceed = 0
    runs = 10
    for seed in range(runs):
        _, report = run(model, lattice, spec, num_copies, seed=1_000 + seed)
        exceed += abs(report.f_in_m - 0.97) > 0.006
    bound = hoeffding_bound(0.006, num_copies // 8, 2)
    assert exceed / runs <= bound + 0.1


# ---------------------------------------------------------------------------
# degenerate inputs


def test_zero_copies_rejected_with_reason(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, 0, seed=1)
    assert not report.accepted
    assert report.undefined_reason is not None
    assert report.f_in_m is None and report.o10_m is None and report.p_samp_m is None


def test_single_copy_starves_some_branch(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, 1, seed=2)
    assert not report.accepted
    assert report.undefined_reason is not None


# ---------------------------------------------------------------------------
# decide


def test_decide_examples():
    config = ProtocolConfig(num_copies=1, master_seed=0)
    assert decide(1.0, 1.0, 0.5, config)
    assert not decide(0.9939, 1.0, 0.5, config)  # strict floor
    assert not decide(1.0, 1.0, 0.52, config)  # outside the sampling window


def test_decide_window_inclusive():
    config = ProtocolConfig(num_copies=1, master_seed=0)
    assert decide(1.0, 1.0, 0.494, config)
    assert decide(1.0, 1.0, 0.506, config)


def test_config_validation():
    with pytest.raises(Exception):
        ProtocolConfig(num_copies=-1, master_seed=0)
    with pytest.raises(Exception):
        ProtocolConfig(num_copies=1, master_seed=0, threshold_o10=1.5)
    with pytest.raises(Exception):
        ProtocolConfig(num_copies=1, master_seed=0, psamp_window=(0.6, 0.4))


# ---------------------------------------------------------------------------
# determinism


def test_same_seed_reproduces_everything(setup_2x2):
    lattice, spec, model = setup_2x2
    t1, r1 = run(model, lattice, spec, 80_000, seed=99)
    t2, r2 = run(model, lattice, spec, 80_000, seed=99)
    assert json.dumps(r1.to_json_dict(), sort_keys=True) == json.dumps(
        r2.to_json_dict(), sort_keys=True
    )
    assert np.array_equal(t1.sys_idx, t2.sys_idx)
    assert np.array_equal(t1.clock, t2.clock)


def test_thread_count_does_not_change_results(setup_2x2):
    lattice, spec, model = setup_2x2
    num = 3 * CHUNK_SIZE + 777  # multiple chunks plus a partial one
    config = ProtocolConfig(num_copies=num, master_seed=314)
    t1, r1 = run_protocol(model, lattice, spec, config, threads=1)
    t8, r8 = run_protocol(model, lattice, spec, config, threads=8)
    assert json.dumps(r1.to_json_dict(), sort_keys=True) == json.dumps(
        r8.to_json_dict(), sort_keys=True
    )
    assert r1.counters.s_xu == r8.counters.s_xu  # bitwise, not approximate
    assert np.array_equal(t1.u[t1.basis != -1], t8.u[t8.basis != -1])


def test_report_json_schema(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, 50_000, seed=4)
    data = report.to_json_dict()
    assert set(data) == {
        "f_in_m",
        "p_samp_m",
        "o10_re",
        "o10_im",
        "o10_sq_scaled",
        "accepted",
        "counters",
    }
    assert set(data["counters"]) == {
        "s_xu",
        "s_yu",
        "n_x",
        "n_y",
        "n_in_plus",
        "n_in_plus_0",
        "n_total_sampling",
        "n_clock_minus",
    }
    assert data["o10_sq_scaled"] == 4.0 * abs(complex(data["o10_re"], data["o10_im"])) ** 2


def test_sample_bitstrings_shape(setup_2x2):
    lattice, spec, model = setup_2x2
    _, report = run(model, lattice, spec, 10_000, seed=5)
    strings = report.sample_bitstrings()
    assert len(strings) == report.samples.size
    assert all(len(s) == 4 and set(s) <= {"0", "1"} for s in strings)

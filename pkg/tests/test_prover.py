"""History-state model, echo circuit, and per-copy measurement tests."""

import numpy as np
import pytest

from fklab.analysis import DensityMatrix, exact_parameters
from fklab.errors import CapacityError, SearchFailureError, ValidationError
from fklab.lattice import InputType, build_lattice, random_input
from fklab.prover import (
    HistoryStateModel,
    InstructionMode,
    MeasurementInstruction,
    NoiseModel,
    batch_outcomes,
    echo_prepare,
    exact_model_parameters,
    ideal_history_state,
    make_degraded_model,
    make_honest_model,
    measure_copy,
    mode_distributions,
    tune_evolution_scale,
)
from fklab.simulator import state_fidelity, u_value

from conftest import (
    dense_coupling_hamiltonian,
    dense_history_vector,
    spectral_expm,
)


@pytest.fixture
def lattice():
    return build_lattice(2, 2)


@pytest.fixture
def spec(rng):
    return random_input(4, rng)


def honest(lattice, spec, **noise_kwargs):
    return make_honest_model(lattice, spec, NoiseModel(**noise_kwargs))


# ---------------------------------------------------------------------------
# make_honest_model and exact parameters


def test_noiseless_model_exact_parameters(lattice, spec):
    params = exact_model_parameters(honest(lattice, spec))
    assert abs(params.f_in - 1.0) < 1e-12
    assert params.p_samp == 0.5
    assert abs(4.0 * abs(params.tr_rho_o10) ** 2 - 1.0) < 1e-12
    assert abs(params.f_out - 1.0) < 1e-12


@pytest.mark.parametrize("theta", [0.0, 0.7, 2.1, -1.3])
def test_clock_phase_invariance(lattice, spec, theta):
    base = exact_model_parameters(honest(lattice, spec))
    rotated = exact_model_parameters(honest(lattice, spec, clock_phase_theta=theta))
    assert abs(rotated.f_in - base.f_in) < 1e-14
    assert rotated.p_samp == base.p_samp
    assert abs(abs(rotated.tr_rho_o10) - abs(base.tr_rho_o10)) < 1e-14
    assert abs(rotated.f_out - base.f_out) < 1e-14


def test_evolution_scale_hits_target_overlap(lattice, spec):
    eta = tune_evolution_scale(lattice, spec, 0.999)
    params = exact_model_parameters(honest(lattice, spec, evolution_scale=eta))
    assert abs(4.0 * abs(params.tr_rho_o10) ** 2 - 0.999) < 1e-6
    assert abs(params.f_in - 1.0) < 1e-12


@pytest.mark.parametrize(
    "noise",
    [
        NoiseModel(),
        NoiseModel(clock_phase_theta=0.9),
        NoiseModel(evolution_scale=0.08),
        NoiseModel(input_tilt=0.2),
        NoiseModel(clock_phase_theta=1.4, evolution_scale=0.05, input_tilt=0.1),
        NoiseModel(depolarizing_rate=0.3),
        NoiseModel(clock_phase_theta=0.4, depolarizing_rate=0.1),
    ],
)
def test_model_parameters_match_density_matrix_oracle(lattice, spec, noise):
    model = make_honest_model(lattice, spec, noise)
    analytic = exact_model_parameters(model)
    dense = exact_parameters(
        DensityMatrix(5, model.to_density_matrix()), lattice, spec
    )
    assert abs(analytic.f_in - dense.f_in) < 1e-10
    assert abs(analytic.p_samp - dense.p_samp) < 1e-10
    assert abs(analytic.tr_rho_o10 - dense.tr_rho_o10) < 1e-10
    assert abs(analytic.f_out - dense.f_out) < 1e-10


def test_depolarizing_scales_coherence(lattice, spec):
    clean = exact_model_parameters(honest(lattice, spec))
    noisy = exact_model_parameters(honest(lattice, spec, depolarizing_rate=0.25))
    assert abs(noisy.tr_rho_o10 - 0.75 * clean.tr_rho_o10) < 1e-12
    assert noisy.p_samp == 0.5


def test_depolarizing_mixture_weights(lattice, spec):
    model = honest(lattice, spec, depolarizing_rate=0.2)
    weights = [q for q, _ in model.components()]
    assert abs(sum(weights) - 1.0) < 1e-12
    assert len(weights) == 1 + 2 ** (4 + 1)


def test_depolarizing_capacity_guard():
    lat = build_lattice(3, 4)
    spec = random_input(12, np.random.default_rng(0))
    with pytest.raises(CapacityError):
        make_honest_model(lat, spec, NoiseModel(depolarizing_rate=0.1))


def test_noise_model_validation():
    with pytest.raises(ValidationError):
        NoiseModel(measurement_flip_rate=1.5)
    with pytest.raises(ValidationError):
        NoiseModel(depolarizing_rate=-0.1)
    with pytest.raises(ValidationError):
        NoiseModel(clock_phase_theta=float("inf"))


def test_noise_model_json_keys():
    noise = NoiseModel(clock_phase_theta=0.1, evolution_scale=0.2, input_tilt=0.3,
                       measurement_flip_rate=0.05, depolarizing_rate=0.01)
    data = noise.to_json_dict()
    assert set(data) == {"theta", "eta", "input_tilt", "meas_flip", "depolarizing"}
    assert NoiseModel.from_json_dict(data) == noise


# ---------------------------------------------------------------------------
# make_degraded_model


def test_degraded_identity_targets(lattice, spec):
    model = make_degraded_model(lattice, spec, 1.0, 1.0)
    params = exact_model_parameters(model)
    assert abs(4.0 * abs(params.tr_rho_o10) ** 2 - 1.0) < 1e-12
    assert abs(params.f_in - 1.0) < 1e-12


def test_degraded_o10_target_against_oracle(lattice, spec):
    model = make_degraded_model(lattice, spec, 0.97, 1.0)
    dense = exact_parameters(DensityMatrix(5, model.to_density_matrix()), lattice, spec)
    assert abs(4.0 * abs(dense.tr_rho_o10) ** 2 - 0.97) < 1e-6
    assert abs(dense.f_in - 1.0) < 1e-10


def test_degraded_f_in_target_against_oracle(lattice, spec):
    model = make_degraded_model(lattice, spec, 1.0, 0.95)
    dense = exact_parameters(DensityMatrix(5, model.to_density_matrix()), lattice, spec)
    assert abs(dense.f_in - 0.95) < 1e-6
    assert abs(4.0 * abs(dense.tr_rho_o10) ** 2 - 1.0) < 1e-6


def test_degraded_infeasible_target(lattice, spec):
    with pytest.raises(SearchFailureError):
        make_degraded_model(lattice, spec, 0.0, 1.0)
    with pytest.raises(ValidationError):
        make_degraded_model(lattice, spec, 1.2, 1.0)


# ---------------------------------------------------------------------------
# echo_prepare


@pytest.mark.parametrize("rows,cols", [(1, 2), (2, 2)])
def test_echo_matches_dense_history_state(rows, cols, rng):
    lat = build_lattice(rows, cols)
    spec = random_input(lat.num_qubits, rng)
    prepared = echo_prepare(lat, spec)
    target = dense_history_vector(lat, spec)
    fid = float(np.abs(np.vdot(target, prepared.amplitudes)) ** 2)
    assert fid >= 1 - 1e-10


@pytest.mark.parametrize("rows,cols", [(1, 2), (2, 2), (2, 3), (3, 3)])
def test_echo_sweep_random_inputs(rows, cols):
    lat = build_lattice(rows, cols)
    rng = np.random.default_rng(1000 + rows * 10 + cols)
    for _ in range(4):
        spec = random_input(lat.num_qubits, rng)
        fid = state_fidelity(echo_prepare(lat, spec), ideal_history_state(lat, spec))
        assert fid >= 1 - 1e-10


def test_echo_clock_balance(lattice, spec):
    state = echo_prepare(lattice, spec)
    p_minus = float(np.sum(np.abs(state.amplitudes[16:]) ** 2))
    assert abs(p_minus - 0.5) < 1e-10


def test_echo_capacity_guard():
    lat = build_lattice(10, 10)
    with pytest.raises(CapacityError):
        echo_prepare(lat, random_input(100, np.random.default_rng(0)))


# ---------------------------------------------------------------------------
# measure_copy


def test_input_test_perfect_state(lattice, spec, rng):
    model = honest(lattice, spec)
    instruction = MeasurementInstruction(InstructionMode.INPUT_TEST)
    saw_plus = False
    for _ in range(64):
        record = measure_copy(model, instruction, NoiseModel(), rng)
        assert record.basis_labels[0] == "Z"
        if record.outcomes[0] == 1:
            saw_plus = True
            assert len(record.outcomes) == 5
            assert all(o == 1 for o in record.outcomes[1:])
            for label, kind in zip(record.basis_labels[1:], spec.choices):
                assert label == ("XROT" if kind is InputType.X_TYPE else "YROT")
        else:
            assert len(record.outcomes) == 1
    assert saw_plus


def test_sample_mode_record_shape(lattice, spec, rng):
    model = honest(lattice, spec)
    instruction = MeasurementInstruction(InstructionMode.SAMPLE)
    for _ in range(32):
        record = measure_copy(model, instruction, NoiseModel(), rng)
        if record.outcomes[0] == -1:
            assert record.basis_labels == ("Z",) + ("X",) * 4
        else:
            assert record.basis_labels == ("Z",)


def test_flip_rate_one_negates_everything(lattice, spec, rng):
    model = honest(lattice, spec)
    instruction = MeasurementInstruction(InstructionMode.INPUT_TEST)
    noise = NoiseModel(measurement_flip_rate=1.0)
    for _ in range(16):
        record = measure_copy(model, instruction, noise, rng)
        if len(record.outcomes) > 1:
            # True clock was +1 and perfect inputs give all +1, so every
            # reported value is now -1.
            assert all(o == -1 for o in record.outcomes)


def _dense_mode_joint(model, mode):
    """Born-rule outcome distribution of one instruction mode, built densely.

    SAMPLE and INPUT_TEST return length 2^n + 1 vectors: entry z is the
    probability of measuring outcome string z on the measured clock branch,
    and the final bucket is the probability of the branch that skips the
    system measurement. Propagation modes return the full 2^(n+1) joint with
    index b_bit * 2^n + z (b_bit 1 meaning clock outcome -1).
    """
    n = model.num_system_qubits
    dim = 1 << n
    rho_parts = [(q, model.input_component.amplitudes,
                  np.exp(1j * model.clock_phase) * comp.amplitudes)
                 for q, comp in model.components()]
    if mode is InstructionMode.SAMPLE:
        h_all = np.array([[1.0]])
        for _ in range(n):
            h_all = np.kron(np.array([[1, 1], [1, -1]]) / np.sqrt(2), h_all)
        joint = np.zeros(dim + 1)
        joint[dim] = 0.5
        for q, _, bot in rho_parts:
            joint[:dim] += q * 0.5 * np.abs(h_all @ bot) ** 2
        return joint
    if mode is InstructionMode.INPUT_TEST:
        from fklab.simulator import rotated_basis

        rot = np.array([[1.0]])
        for kind in model.input_spec.choices:
            rot = np.kron(rotated_basis(kind).conj().T, rot)
        joint = np.zeros(dim + 1)
        joint[dim] = 0.5
        for q, top, _ in rho_parts:
            joint[:dim] += q * 0.5 * np.abs(rot @ top) ** 2
        return joint
    sign = 1.0 if mode is InstructionMode.PROP_TEST_X else -1j
    joint = np.zeros(2 * dim)
    for q, top, bot in rho_parts:
        joint[:dim] += q * 0.25 * np.abs(top + sign * bot) ** 2
        joint[dim:] += q * 0.25 * np.abs(top - sign * bot) ** 2
    return joint


@pytest.mark.parametrize(
    "mode",
    [
        InstructionMode.SAMPLE,
        InstructionMode.INPUT_TEST,
        InstructionMode.PROP_TEST_X,
        InstructionMode.PROP_TEST_Y,
    ],
)
def test_measurement_marginals_match_born_rule(mode, lattice, spec):
    # 1e6 vectorized shots per mode, compared against an independently built
    # dense joint distribution; the expected empirical TVD is ~2e-3.
    model = honest(lattice, spec, clock_phase_theta=0.6, evolution_scale=0.03)
    n = 4
    shots = 1_000_000
    clock, sys_idx = batch_outcomes(
        model, mode, NoiseModel(), np.random.default_rng(555), shots
    )
    dense = _dense_mode_joint(model, mode)
    measured = sys_idx >= 0
    counts = np.zeros(dense.size)
    if mode in (InstructionMode.SAMPLE, InstructionMode.INPUT_TEST):
        np.add.at(counts, sys_idx[measured], 1)
        counts[1 << n] = (~measured).sum()
    else:
        joint_idx = ((clock == -1).astype(np.int64) << n) | sys_idx
        np.add.at(counts, joint_idx, 1)
    tvd_emp = 0.5 * np.abs(counts / shots - dense).sum()
    assert tvd_emp < 0.01


def test_prop_x_empirical_mean_matches_dense_expectation(lattice, spec):
    # <X (x) U> oracle: psi_top^dag U psi_bot + psi_bot^dag U psi_top for the
    # dense time-1 evolution.
    model = honest(lattice, spec, clock_phase_theta=0.25)
    u_dense = spectral_expm(dense_coupling_hamiltonian(lattice))
    top = model.input_component.amplitudes / np.sqrt(2)
    bot = np.exp(1j * model.clock_phase) * model.output_component.amplitudes / np.sqrt(2)
    exact = np.vdot(top, u_dense @ bot) + np.vdot(bot, u_dense @ top)

    clock, sys_idx = batch_outcomes(
        model, InstructionMode.PROP_TEST_X, NoiseModel(), np.random.default_rng(8), 100_000
    )
    u_vals = np.array([u_value([1 - 2 * ((z >> k) & 1) for k in range(4)], lattice)
                       for z in range(16)])
    mean_bu = np.mean(clock * u_vals[sys_idx])
    assert abs(mean_bu - exact) < 0.02


def test_sample_histogram_matches_ideal_distribution(lattice, spec):
    from fklab.analysis import tvd
    from fklab.simulator import ideal_output_distribution

    model = honest(lattice, spec)
    clock, sys_idx = batch_outcomes(
        model, InstructionMode.SAMPLE, NoiseModel(), np.random.default_rng(99), 1_000_000
    )
    kept = sys_idx[sys_idx >= 0]
    hist = np.bincount(kept, minlength=16) / kept.size
    assert tvd(hist, ideal_output_distribution(lattice, spec)) < 0.01


def test_mode_distributions_cached(lattice, spec):
    model = honest(lattice, spec)
    assert mode_distributions(model) is mode_distributions(model)


def test_history_model_rejects_bad_mixture(lattice, spec):
    base = honest(lattice, spec)
    with pytest.raises(ValidationError):
        HistoryStateModel(
            lattice=lattice,
            input_spec=spec,
            clock_phase=0.0,
            input_component=base.input_component,
            output_component=base.output_component,
            stochastic_mixture=[(0.5, base.output_component)],
        )


def test_statevector_against_conftest_oracle(lattice, spec):
    model = honest(lattice, spec, clock_phase_theta=1.1)
    mine = model.to_statevector().amplitudes
    oracle = dense_history_vector(lattice, spec, theta=1.1)
    assert np.max(np.abs(mine - oracle)) < 1e-10

"""Prover-side models: history states, the echo preparation circuit, and
per-copy measurement responses.

The honest prover is modeled analytically as clock-indexed input/output
components (optionally a classical mixture over output components), so copy
measurement statistics can be precomputed once and sampled in O(1) per shot.
echo_prepare exists separately to certify that a gate-level device prepares
the same state.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    CapacityError,
    DimensionMismatchError,
    SearchFailureError,
    ValidationError,
)
from .lattice import InputSpec, InputType, LatticeGeometry
from .simulator import (
    Distribution,
    HADAMARD,
    MeasurementRecord,
    PAULI_X,
    PureState,
    apply_global_cz,
    apply_single_qubit,
    interaction_energies,
    product_state,
    rotated_basis,
    sample,
    walsh_hadamard,
    zz_phases,
)

MAX_ECHO_SYSTEM_QUBITS = 20
MAX_MODEL_DENSITY_QUBITS = 6
MAX_DEPOLARIZING_QUBITS = 10

TARGET_TOL = 1e-6


@dataclass(frozen=True)
class NoiseModel:
    """Device imperfections applied when building and measuring models.

    clock_phase_theta: fixed phase on the output branch of the clock.
    evolution_scale: eta, so the simulated evolution time is T*(1+eta).
    input_tilt: per-qubit diagonal rotation angle on state preparation.
    measurement_flip_rate: probability that each reported outcome flips.
    depolarizing_rate: probability of replacing the output component with
        the maximally mixed state.
    """

    clock_phase_theta: float = 0.0
    evolution_scale: float = 0.0
    input_tilt: float = 0.0
    measurement_flip_rate: float = 0.0
    depolarizing_rate: float = 0.0

    def __post_init__(self):
        for name in ("measurement_flip_rate", "depolarizing_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {rate}")
        for name in ("clock_phase_theta", "evolution_scale", "input_tilt"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def to_json_dict(self) -> dict:
        return {
            "theta": self.clock_phase_theta,
            "eta": self.evolution_scale,
            "input_tilt": self.input_tilt,
            "meas_flip": self.measurement_flip_rate,
            "depolarizing": self.depolarizing_rate,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "NoiseModel":
        return cls(
            clock_phase_theta=float(data.get("theta", 0.0)),
            evolution_scale=float(data.get("eta", 0.0)),
            input_tilt=float(data.get("input_tilt", 0.0)),
            measurement_flip_rate=float(data.get("meas_flip", 0.0)),
            depolarizing_rate=float(data.get("depolarizing", 0.0)),
        )


class InstructionMode(Enum):
    SAMPLE = "sample"
    INPUT_TEST = "input_test"
    PROP_TEST_X = "prop_test_x"
    PROP_TEST_Y = "prop_test_y"


@dataclass(frozen=True)
class MeasurementInstruction:
    """One copy's instruction; the mode fully determines per-qubit bases."""

    mode: InstructionMode


@dataclass(eq=False)
class HistoryStateModel:
    """Analytic (n+1)-qubit state (|0>|input> + e^{i theta}|1>|output>)/sqrt(2).

    The clock sits at the highest bit, so the statevector would be the
    concatenation [input_component, e^{i theta} output_component] / sqrt(2).
    stochastic_mixture, when present, replaces the single output component
    with a classical mixture of pure output components (weights sum to 1).
    """

    lattice: LatticeGeometry
    input_spec: InputSpec
    clock_phase: float
    input_component: PureState
    output_component: PureState
    stochastic_mixture: list[tuple[float, PureState]] | None = None

    def __post_init__(self):
        n = self.lattice.num_qubits
        if self.input_spec.num_qubits != n:
            raise DimensionMismatchError("input spec size does not match lattice")
        if self.input_component.num_qubits != n or self.output_component.num_qubits != n:
            raise DimensionMismatchError("component size does not match lattice")
        if self.stochastic_mixture is not None:
            total = sum(q for q, _ in self.stochastic_mixture)
            if abs(total - 1.0) > 1e-10:
                raise ValidationError(f"mixture weights sum to {total!r}, not 1")

    @property
    def num_system_qubits(self) -> int:
        return self.lattice.num_qubits

    def components(self) -> list[tuple[float, PureState]]:
        """Output components as (weight, state) pairs."""
        if self.stochastic_mixture is None:
            return [(1.0, self.output_component)]
        return self.stochastic_mixture

    def to_statevector(self, weight_index: int = 0) -> PureState:
        """Full (n+1)-qubit statevector of one pure branch."""
        _, comp = self.components()[weight_index]
        amps = np.concatenate(
            [self.input_component.amplitudes, np.exp(1j * self.clock_phase) * comp.amplitudes]
        ) / math.sqrt(2)
        return PureState(self.num_system_qubits + 1, amps)

    def to_density_matrix(self) -> np.ndarray:
        """Dense (n+1)-qubit density matrix; guarded to small systems."""
        n = self.num_system_qubits
        if n > MAX_MODEL_DENSITY_QUBITS:
            raise CapacityError(
                f"density matrix for {n} system qubits exceeds the "
                f"{MAX_MODEL_DENSITY_QUBITS}-qubit guard"
            )
        dim = 1 << (n + 1)
        rho = np.zeros((dim, dim), dtype=np.complex128)
        for k, (q, _) in enumerate(self.components()):
            psi = self.to_statevector(k).amplitudes
            rho += q * np.outer(psi, psi.conj())
        return rho


@dataclass(frozen=True)
class ModelParameters:
    """Exact protocol parameters of an analytic model (any guarded size)."""

    f_in: float
    p_samp: float
    tr_rho_o10: complex
    f_out: float


def _tilted_input(spec: InputSpec, tilt: float) -> PureState:
    """Ideal product input with a diagonal R_z(tilt) error on every qubit."""
    state = product_state(spec)
    if tilt == 0.0:
        return state
    n = spec.num_qubits
    idx = np.arange(1 << n, dtype=np.int64)
    ones = np.zeros(1 << n, dtype=np.int64)
    for k in range(n):
        ones += (idx >> k) & 1
    # R_z(t) = diag(e^{-it/2}, e^{+it/2}) per qubit.
    phases = np.exp(1j * (tilt / 2.0) * (2 * ones - n))
    return PureState(n, state.amplitudes * phases)


def _depolarized_mixture(
    coherent_weight: float, coherent: PureState, depol_weight: float, n: int
) -> list[tuple[float, PureState]]:
    """Exact pure-state decomposition of (1-p)|B><B| + p I/2^n on the output slot.

    Signed basis states in +/- pairs cancel the clock off-diagonal blocks, so
    the resulting classical mixture of history states reproduces the
    depolarized density matrix exactly.
    """
    if n > MAX_DEPOLARIZING_QUBITS:
        raise CapacityError(
            f"depolarizing mixture at {n} qubits exceeds the "
            f"{MAX_DEPOLARIZING_QUBITS}-qubit guard"
        )
    mixture: list[tuple[float, PureState]] = [(coherent_weight, coherent)]
    w = depol_weight / (1 << (n + 1))
    eye = np.eye(1 << n, dtype=np.complex128)
    for z in range(1 << n):
        mixture.append((w, PureState(n, eye[z])))
        mixture.append((w, PureState(n, -eye[z])))
    return mixture


def make_honest_model(
    lattice: LatticeGeometry, input_spec: InputSpec, noise: NoiseModel
) -> HistoryStateModel:
    """Honest prover's (possibly noisy) history state.

    The input component carries the preparation tilt; the output component is
    the (1+eta)-time evolution of the ideal input; the clock carries theta.
    With depolarizing_rate p the output becomes the exact mixture
    (1-p)|phi'><phi'| + p I/2^n.
    """
    ideal = product_state(input_spec)
    input_component = _tilted_input(input_spec, noise.input_tilt)
    output_component = PureState(
        ideal.num_qubits,
        ideal.amplitudes * zz_phases(lattice, 1.0 + noise.evolution_scale),
    )
    mixture = None
    if noise.depolarizing_rate > 0.0:
        mixture = _depolarized_mixture(
            1.0 - noise.depolarizing_rate,
            output_component,
            noise.depolarizing_rate,
            lattice.num_qubits,
        )
    return HistoryStateModel(
        lattice=lattice,
        input_spec=input_spec,
        clock_phase=noise.clock_phase_theta,
        input_component=input_component,
        output_component=output_component,
        stochastic_mixture=mixture,
    )


def exact_model_parameters(model: HistoryStateModel) -> ModelParameters:
    """Exact F_in, p_samp, Tr[rho O10], F_out of an analytic model.

    Computed directly from the components in O(K 2^n); the density-matrix
    route in the analysis module is the independent oracle for small n.
    """
    lattice = model.lattice
    ideal = product_state(model.input_spec).amplitudes
    a = model.input_component.amplitudes
    u_diag = zz_phases(lattice, 1.0)
    u_ideal = u_diag * ideal

    f_in = float(np.abs(np.vdot(ideal, a)) ** 2)
    tr = 0.0 + 0.0j
    f_out = 0.0
    for q, comp in model.components():
        b = comp.amplitudes
        tr += q * np.vdot(b, u_diag * a)
        f_out += q * float(np.abs(np.vdot(b, u_ideal)) ** 2)
    tr *= 0.5 * np.exp(-1j * model.clock_phase)
    return ModelParameters(f_in=f_in, p_samp=0.5, tr_rho_o10=complex(tr), f_out=f_out)


def _overlap_sq_at_eta(lattice: LatticeGeometry, weights: np.ndarray, eta: float) -> float:
    """|<U^{1+eta} A | U A>|^2 as a function of eta, for |A_z|^2 = weights."""
    energy = interaction_energies(lattice)
    chi = np.sum(weights * np.exp(1j * eta * (np.pi / 4) * energy))
    return float(np.abs(chi) ** 2)


def tune_evolution_scale(
    lattice: LatticeGeometry, input_spec: InputSpec, target_overlap_sq: float
) -> float:
    """Find eta >= 0 with |<U^{1+eta} phi | U phi>|^2 = target within 1e-6."""
    if not 0.0 <= target_overlap_sq <= 1.0:
        raise ValidationError(f"target overlap must be in [0, 1], got {target_overlap_sq}")
    weights = np.abs(product_state(input_spec).amplitudes) ** 2
    if target_overlap_sq == 1.0:
        return 0.0
    hi = 0.0
    for _ in range(400):
        hi += 0.02
        if _overlap_sq_at_eta(lattice, weights, hi) < target_overlap_sq:
            break
    else:
        raise SearchFailureError(
            f"overlap target {target_overlap_sq} unreachable on the monotone segment"
        )
    lo = hi - 0.02
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _overlap_sq_at_eta(lattice, weights, mid) > target_overlap_sq:
            lo = mid
        else:
            hi = mid
    eta = 0.5 * (lo + hi)
    if abs(_overlap_sq_at_eta(lattice, weights, eta) - target_overlap_sq) > TARGET_TOL:
        raise SearchFailureError("overlap bisection failed to converge")
    return eta


def _tune_input_tilt(input_spec: InputSpec, target_f_in: float) -> float:
    """Find tilt >= 0 with |<phi_ideal | phi_tilt>|^2 = target within 1e-6."""
    if not 0.0 <= target_f_in <= 1.0:
        raise ValidationError(f"target input fidelity must be in [0, 1], got {target_f_in}")
    if target_f_in == 1.0:
        return 0.0
    ideal = product_state(input_spec).amplitudes

    def f_in_at(tilt: float) -> float:
        return float(np.abs(np.vdot(ideal, _tilted_input(input_spec, tilt).amplitudes)) ** 2)

    lo, hi = 0.0, math.pi
    if f_in_at(hi) > target_f_in:
        raise SearchFailureError(f"input fidelity target {target_f_in} unreachable")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if f_in_at(mid) > target_f_in:
            lo = mid
        else:
            hi = mid
    tilt = 0.5 * (lo + hi)
    if abs(f_in_at(tilt) - target_f_in) > TARGET_TOL:
        raise SearchFailureError("input tilt bisection failed to converge")
    return tilt


def make_degraded_model(
    lattice: LatticeGeometry,
    input_spec: InputSpec,
    target_o10_sq: float,
    target_f_in: float,
) -> HistoryStateModel:
    """Soundness fixture hitting exact parameter targets within 1e-6.

    The two knobs decouple: the input tilt is diagonal, so the propagation
    overlap depends only on eta, and 4|Tr rho O10|^2 = target_o10_sq while
    F_in = target_f_in. Unlike make_honest_model, the output component evolves
    the tilted input, which keeps (1, f_in < 1) targets reachable.
    """
    if not 0.0 <= target_o10_sq <= 1.0 or not 0.0 <= target_f_in <= 1.0:
        raise ValidationError("targets must lie in [0, 1]")
    eta = tune_evolution_scale(lattice, input_spec, target_o10_sq)
    tilt = _tune_input_tilt(input_spec, target_f_in)
    tilted = _tilted_input(input_spec, tilt)
    output = PureState(tilted.num_qubits, tilted.amplitudes * zz_phases(lattice, 1.0 + eta))
    model = HistoryStateModel(
        lattice=lattice,
        input_spec=input_spec,
        clock_phase=0.0,
        input_component=tilted,
        output_component=output,
    )
    params = exact_model_parameters(model)
    if abs(4.0 * abs(params.tr_rho_o10) ** 2 - target_o10_sq) > 2 * TARGET_TOL:
        raise SearchFailureError("degraded model missed the o10 target")
    if abs(params.f_in - target_f_in) > 2 * TARGET_TOL:
        raise SearchFailureError("degraded model missed the f_in target")
    return model


def echo_prepare(lattice: LatticeGeometry, input_spec: InputSpec) -> PureState:
    """Gate-level echo preparation of the history state.

    Runs, on |+>|phi_in>: (H_B, global CZ, H_B), half-time evolution, (H_B,
    global CZ, H_B), X on the clock, half-time evolution. The clock is the
    highest qubit; the global CZ acts on every system qubit, and the H
    conjugation turns it into a controlled bit-flip on sublattice B while the
    stray controlled-Z phases on sublattice A cancel between the two blocks.
    """
    n = lattice.num_qubits
    if input_spec.num_qubits != n:
        raise DimensionMismatchError("input spec size does not match lattice")
    if n > MAX_ECHO_SYSTEM_QUBITS:
        raise CapacityError(
            f"echo statevector needs {n}+1 qubits, over the {MAX_ECHO_SYSTEM_QUBITS}-qubit guard"
        )
    clock = n
    plus = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2)
    state = PureState(n + 1, np.kron(plus, product_state(input_spec).amplitudes))
    half = np.tile(zz_phases(lattice, 0.5), 2)

    def controlled_flip_b(s: PureState) -> PureState:
        for q in sorted(lattice.partition_b):
            s = apply_single_qubit(s, q, HADAMARD)
        s = apply_global_cz(s, clock, range(n))
        for q in sorted(lattice.partition_b):
            s = apply_single_qubit(s, q, HADAMARD)
        return s

    state = controlled_flip_b(state)
    state = PureState(n + 1, state.amplitudes * half)
    state = controlled_flip_b(state)
    state = apply_single_qubit(state, clock, PAULI_X)
    return PureState(n + 1, state.amplitudes * half)


def ideal_history_state(
    lattice: LatticeGeometry, input_spec: InputSpec, theta: float = 0.0
) -> PureState:
    """(|0>|phi_in> + e^{i theta}|1>U|phi_in>)/sqrt(2), clock at the top bit."""
    phi = product_state(input_spec)
    out = phi.amplitudes * zz_phases(lattice, 1.0)
    amps = np.concatenate([phi.amplitudes, np.exp(1j * theta) * out]) / math.sqrt(2)
    return PureState(lattice.num_qubits + 1, amps)


@dataclass
class ModeDistributions:
    """Per-instruction-mode outcome distributions of one model.

    Precomputed once per model so copies sample in O(1). Joint propagation
    outcomes are indexed j = b_bit * 2^n + z with b_bit 0 meaning clock
    outcome +1.
    """

    num_system: int
    p_clock_minus: float
    sample_given_minus: Distribution
    input_given_plus: Distribution
    prop_x: Distribution
    prop_y: Distribution
    u_table: np.ndarray


_DIST_CACHE: "weakref.WeakKeyDictionary[HistoryStateModel, ModeDistributions]" = (
    weakref.WeakKeyDictionary()
)


def mode_distributions(model: HistoryStateModel) -> ModeDistributions:
    """Build (and memoize) the four measurement distributions of a model."""
    cached = _DIST_CACHE.get(model)
    if cached is not None:
        return cached
    n = model.num_system_qubits
    dim = 1 << n
    a = model.input_component.amplitudes
    phase = np.exp(1j * model.clock_phase)

    samp = np.zeros(dim)
    prop_x = np.zeros(2 * dim)
    prop_y = np.zeros(2 * dim)
    for q, comp in model.components():
        b = phase * comp.amplitudes
        samp += q * np.abs(walsh_hadamard(comp).amplitudes) ** 2
        prop_x[:dim] += q * 0.25 * np.abs(a + b) ** 2
        prop_x[dim:] += q * 0.25 * np.abs(a - b) ** 2
        prop_y[:dim] += q * 0.25 * np.abs(a - 1j * b) ** 2
        prop_y[dim:] += q * 0.25 * np.abs(a + 1j * b) ** 2

    rotated = model.input_component
    for k, kind in enumerate(model.input_spec.choices):
        rotated = apply_single_qubit(rotated, k, rotated_basis(kind).conj().T)
    input_probs = np.abs(rotated.amplitudes) ** 2

    dists = ModeDistributions(
        num_system=n,
        p_clock_minus=0.5,
        sample_given_minus=Distribution(n, samp / samp.sum()),
        input_given_plus=Distribution(n, input_probs / input_probs.sum()),
        prop_x=Distribution(n + 1, prop_x / prop_x.sum()),
        prop_y=Distribution(n + 1, prop_y / prop_y.sum()),
        u_table=np.exp((-1j * np.pi / 4) * interaction_energies(model.lattice)),
    )
    _DIST_CACHE[model] = dists
    return dists


def _outcome_signs(index: int, n: int) -> tuple[int, ...]:
    """Bit k of the index encodes qubit k's outcome, 1 meaning -1."""
    return tuple(-1 if (index >> k) & 1 else 1 for k in range(n))


def _flip_signs(outcomes: tuple[int, ...], eps: float, rng: np.random.Generator):
    if eps <= 0.0:
        return outcomes
    flips = rng.random(len(outcomes)) < eps
    return tuple(-o if f else o for o, f in zip(outcomes, flips))


def measure_copy(
    model: HistoryStateModel,
    instruction: MeasurementInstruction,
    noise: NoiseModel | None,
    rng: np.random.Generator,
) -> MeasurementRecord:
    """Measure one copy per the instruction.

    Outcomes are drawn from the exact joint distribution (clock first, then
    the conditional system measurement the mode prescribes); every reported
    outcome is then independently flipped with the noise model's flip rate.
    """
    dists = mode_distributions(model)
    n = dists.num_system
    eps = noise.measurement_flip_rate if noise is not None else 0.0
    mode = instruction.mode

    if mode is InstructionMode.SAMPLE:
        minus = rng.random() < dists.p_clock_minus
        if minus:
            x = sample(dists.sample_given_minus, rng)
            labels = ("Z",) + ("X",) * n
            outcomes = (-1,) + _outcome_signs(x, n)
        else:
            labels, outcomes = ("Z",), (1,)
    elif mode is InstructionMode.INPUT_TEST:
        minus = rng.random() < dists.p_clock_minus
        rot = tuple("XROT" if k is InputType.X_TYPE else "YROT" for k in model.input_spec.choices)
        if not minus:
            o = sample(dists.input_given_plus, rng)
            labels = ("Z",) + rot
            outcomes = (1,) + _outcome_signs(o, n)
        else:
            labels, outcomes = ("Z",), (-1,)
    elif mode in (InstructionMode.PROP_TEST_X, InstructionMode.PROP_TEST_Y):
        joint = (
            dists.prop_x if mode is InstructionMode.PROP_TEST_X else dists.prop_y
        )
        j = sample(joint, rng)
        b = -1 if j >> n else 1
        labels = ("X" if mode is InstructionMode.PROP_TEST_X else "Y",) + ("Z",) * n
        outcomes = (b,) + _outcome_signs(j & ((1 << n) - 1), n)
    else:
        raise ValidationError(f"unknown instruction mode {mode!r}")

    return MeasurementRecord(basis_labels=labels, outcomes=_flip_signs(outcomes, eps, rng))


def batch_outcomes(
    model: HistoryStateModel,
    mode: InstructionMode,
    noise: NoiseModel | None,
    rng: np.random.Generator,
    shots: int,
):
    """Vectorized many-copy variant of measure_copy for statistics tests.

    Returns (clock_signs, system_indices); system index -1 marks copies whose
    mode skipped the system measurement. Flip noise is applied to reported
    values exactly as in measure_copy.
    """
    dists = mode_distributions(model)
    n = dists.num_system
    eps = noise.measurement_flip_rate if noise is not None else 0.0
    u = rng.random((3, shots))

    if mode in (InstructionMode.SAMPLE, InstructionMode.INPUT_TEST):
        minus = u[0] < dists.p_clock_minus
        clock = np.where(minus, -1, 1).astype(np.int8)
        measured = minus if mode is InstructionMode.SAMPLE else ~minus
        dist = (
            dists.sample_given_minus
            if mode is InstructionMode.SAMPLE
            else dists.input_given_plus
        )
        sys_idx = np.full(shots, -1, dtype=np.int64)
        sys_idx[measured] = dist.pick(u[1][measured], u[2][measured])
    else:
        joint = dists.prop_x if mode is InstructionMode.PROP_TEST_X else dists.prop_y
        j = joint.pick(u[0], u[1])
        clock = np.where(j >> n, -1, 1).astype(np.int8)
        sys_idx = (j & ((1 << n) - 1)).astype(np.int64)
        measured = np.ones(shots, dtype=bool)

    if eps > 0.0:
        flips = rng.random((shots, n + 1)) < eps
        clock = (clock * np.where(flips[:, n], -1, 1)).astype(np.int8)
        flip_bits = (flips[:, :n] << np.arange(n)).sum(axis=1).astype(np.int64)
        sys_idx = np.where(measured, sys_idx ^ flip_bits, sys_idx)
    return clock, sys_idx

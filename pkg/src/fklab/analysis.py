"""Exact oracles and bound verifiers.

Everything here works on dense arrays at desk scale (system size n <= 6 for
matrix oracles) and is independent of the fast diagonal-phase kernels, so it
can certify them. Matrix exponentials are of Hermitian generators only and
are computed spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    DimensionMismatchError,
    InconsistentInputsError,
    NotInvertibleError,
    OutOfRegimeError,
    ValidationError,
)
from .lattice import InputSpec, LatticeGeometry, build_lattice, random_input
from .prover import ideal_history_state
from .rng import TAG_BOUNDS, substream
from .simulator import (
    Distribution,
    MAX_DENSE_QUBITS,
    PureState,
    product_state,
    walsh_hadamard,
    zz_phases,
)

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
EIGENVALUE_CUTOFF = 1e-14

PAULI_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


# ---------------------------------------------------------------------------
# Dense building blocks


def dense_pauli(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string; label[k] acts on qubit k (bit k)."""
    out = np.array([[1.0 + 0.0j]])
    for ch in label:
        if ch not in PAULI_MATRICES:
            raise ValidationError(f"malformed Pauli label character {ch!r}")
        out = np.kron(PAULI_MATRICES[ch], out)
    return out


def dense_hamiltonian(terms, num_qubits: int) -> np.ndarray:
    """Sum of weighted Pauli strings as a dense Hermitian matrix."""
    dim = 1 << num_qubits
    h = np.zeros((dim, dim), dtype=np.complex128)
    for coeff, label in terms:
        if len(label) != num_qubits:
            raise ValidationError(
                f"term {label!r} has length {len(label)}, expected {num_qubits}"
            )
        h += complex(coeff) * dense_pauli(label)
    return h


def expm_hermitian(h: np.ndarray, time: float = 1.0) -> np.ndarray:
    """exp(-i * time * h) for Hermitian h, via eigendecomposition."""
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * time * evals)) @ evecs.conj().T


def zz_terms(lattice: LatticeGeometry) -> list[tuple[float, str]]:
    """The lattice coupling as weighted Pauli strings (pi/4 Z_i Z_j per edge)."""
    n = lattice.num_qubits
    terms = []
    for i, j in lattice.edges:
        label = "".join("Z" if k in (i, j) else "I" for k in range(n))
        terms.append((math.pi / 4, label))
    return terms


def dense_evolution_product(lattice: LatticeGeometry) -> np.ndarray:
    """Product over edges of exp(-i pi/4 Z_i Z_j), each factor exponentiated densely."""
    n = lattice.num_qubits
    if n > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense product at {n} qubits exceeds the {MAX_DENSE_QUBITS}-qubit guard")
    u = np.eye(1 << n, dtype=np.complex128)
    for coeff, label in zz_terms(lattice):
        u = expm_hermitian(coeff * dense_pauli(label)) @ u
    return u


def apply_two_qubit_dense(vec: np.ndarray, num_qubits: int, qi: int, qj: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 4x4 gate to qubits (qi, qj) of a dense statevector."""
    if qi == qj:
        raise ValidationError("two-qubit gate needs distinct qubits")
    t = vec.reshape([2] * num_qubits)
    ax_i = num_qubits - 1 - qi
    ax_j = num_qubits - 1 - qj
    t = np.moveaxis(t, (ax_i, ax_j), (0, 1)).reshape(4, -1)
    t = gate @ t
    t = np.moveaxis(t.reshape(2, 2, *[2] * (num_qubits - 2)), (0, 1), (ax_i, ax_j))
    return t.reshape(-1)


# ---------------------------------------------------------------------------
# Exact protocol parameters


MAX_DENSITY_QUBITS = 7


@dataclass
class DensityMatrix:
    """Validated density matrix on `num_qubits` qubits (at most 7)."""

    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.num_qubits > MAX_DENSITY_QUBITS:
            raise CapacityError(
                f"{self.num_qubits} qubits exceeds the {MAX_DENSITY_QUBITS}-qubit density guard"
            )
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        dim = 1 << self.num_qubits
        if self.matrix.shape != (dim, dim):
            raise DimensionMismatchError(f"expected {dim}x{dim} matrix, got {self.matrix.shape}")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > HERMITIAN_ATOL:
            raise ValidationError("matrix is not Hermitian within 1e-10")
        tr = complex(np.trace(self.matrix))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"trace is {tr!r}, not 1 within 1e-10")
        if float(np.linalg.eigvalsh(self.matrix).min()) < EIGENVALUE_FLOOR:
            raise ValidationError("matrix has an eigenvalue below -1e-10")


@dataclass(frozen=True)
class ExactParameters:
    """Exact protocol parameters of a density matrix.

    Construction re-checks the structural ceilings: |Tr rho O10|^2 <= 1/4
    (a consequence of the Cauchy-Schwarz inequality) and unit ranges for the
    fidelities, sampling probability, and purity.
    """

    f_in: float
    p_samp: float
    tr_rho_o10: complex
    f_out: float
    purity: float

    def __post_init__(self):
        if abs(self.tr_rho_o10) ** 2 > 0.25 + 1e-10:
            raise ValidationError("|Tr rho O10|^2 exceeds the 1/4 ceiling")
        for name in ("f_in", "p_samp", "f_out", "purity"):
            v = getattr(self, name)
            if not -1e-10 <= v <= 1.0 + 1e-10:
                raise ValidationError(f"{name} = {v!r} is outside [0, 1]")


def exact_parameters(
    rho: DensityMatrix, lattice: LatticeGeometry, input_spec: InputSpec
) -> ExactParameters:
    """Evaluate the four defining parameter sums from an eigendecomposition.

    Eigenvectors are split at the clock bit (the highest qubit) into the
    unnormalized input/output components; every reported quantity is a
    basis-independent sum, so any orthonormal eigenbasis gives the same
    values.
    """
    n = lattice.num_qubits
    if n > MAX_DENSE_QUBITS:
        raise CapacityError(f"exact parameters at {n} system qubits exceeds the guard")
    if input_spec.num_qubits != n:
        raise DimensionMismatchError("input spec size does not match lattice")
    if rho.num_qubits != n + 1:
        raise DimensionMismatchError(
            f"density matrix has {rho.num_qubits} qubits, expected {n + 1}"
        )
    dim = 1 << n
    phi_in = product_state(input_spec).amplitudes
    u_diag = zz_phases(lattice, 1.0)
    u_phi = u_diag * phi_in

    evals, evecs = np.linalg.eigh(rho.matrix)
    weight_plus = 0.0
    weight_minus = 0.0
    f_in_num = 0.0
    f_out_num = 0.0
    tr = 0.0 + 0.0j
    purity = 0.0
    for p, psi in zip(evals, evecs.T):
        p = float(p)
        if p < EIGENVALUE_CUTOFF:
            continue
        purity += p * p
        a = psi[:dim]
        b = psi[dim:]
        weight_plus += p * float(np.vdot(a, a).real)
        weight_minus += p * float(np.vdot(b, b).real)
        f_in_num += p * float(np.abs(np.vdot(phi_in, a)) ** 2)
        f_out_num += p * float(np.abs(np.vdot(b, u_phi)) ** 2)
        tr += p * np.vdot(b, u_diag * a)
    if weight_plus < 1e-12 or weight_minus < 1e-12:
        raise ValidationError("state has (numerically) no support on one clock branch")
    return ExactParameters(
        f_in=f_in_num / weight_plus,
        p_samp=weight_minus,
        tr_rho_o10=complex(tr),
        f_out=f_out_num / weight_minus,
        purity=purity,
    )


# ---------------------------------------------------------------------------
# Closed-form bounds


def fidelity_lower_bound(o10_sq: float, f_in: float) -> float:
    """Output-fidelity floor 16*o10_sq + 3*f_in - 6 (o10_sq is |Tr rho O10|^2)."""
    return 16.0 * o10_sq + 3.0 * f_in - 6.0


def tvd(p, q) -> float:
    """Total variation distance (1/2) sum |p - q|."""
    p_arr = p.probabilities if isinstance(p, Distribution) else np.asarray(p, dtype=np.float64)
    q_arr = q.probabilities if isinstance(q, Distribution) else np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        raise DimensionMismatchError(f"support sizes differ: {p_arr.shape} vs {q_arr.shape}")
    return 0.5 * float(np.abs(p_arr - q_arr).sum())


def tvd_fidelity_bound(f_out: float) -> float:
    """sqrt(1 - f_out), the TVD ceiling implied by the output fidelity."""
    if not 0.0 <= f_out <= 1.0:
        raise ValidationError(f"fidelity must be in [0, 1], got {f_out}")
    return math.sqrt(1.0 - f_out)


def stochastic_trace_bound(delta_f: float, delta_p: float) -> float:
    """Trace-distance ceiling delta_f + sqrt(delta_f - delta_f^2/2 - delta_p/2).

    The radicand is non-negative for any true (infidelity, impurity) pair;
    values below -1e-12 mean the impurity exceeds what the fidelity permits.
    """
    if not 0.0 <= delta_f <= 1.0 or not 0.0 <= delta_p <= 1.0:
        raise ValidationError("delta_f and delta_p must be in [0, 1]")
    radicand = delta_f - delta_f**2 / 2.0 - delta_p / 2.0
    if radicand < -1e-12:
        raise InconsistentInputsError(
            f"impurity {delta_p} exceeds what infidelity {delta_f} permits"
        )
    return delta_f + math.sqrt(max(0.0, radicand))


def hoeffding_bound(delta: float, trials: int, sides: int) -> float:
    """Two- or four-sided Hoeffding tail sides * exp(-2 delta^2 trials)."""
    if delta <= 0 or trials < 1 or sides not in (2, 4):
        raise ValidationError("need delta > 0, trials >= 1, sides in {2, 4}")
    return sides * math.exp(-2.0 * delta * delta * trials)


def completeness_rejection_bound(num_copies: int) -> float:
    """Worst-case rejection probability of a perfect prover.

    Copy budget split: half the copies sample, a quarter feed the input test
    (half of those land on clock +1), a quarter feed the propagation
    estimate. The compound bound is the worse of the 0.006-deviation input
    tail and the 0.0015-deviation propagation tail.
    """
    return max(
        hoeffding_bound(0.006, num_copies // 8, 2),
        hoeffding_bound(0.0015, num_copies // 4, 4),
    )


def noisy_measurement_tvd_bound(delta_f: float, eps: float, n: int) -> float:
    """(1 - eps*n) sqrt(delta_f) + eps*n, valid while eps*n < 1."""
    if not 0.0 <= delta_f <= 1.0:
        raise ValidationError(f"delta_f must be in [0, 1], got {delta_f}")
    if eps < 0:
        raise ValidationError("eps must be non-negative")
    if eps * n >= 1.0:
        raise OutOfRegimeError(f"eps*n = {eps * n} is out of the eps*n < 1 regime")
    return (1.0 - eps * n) * math.sqrt(delta_f) + eps * n


def convolve_flip_noise(probabilities: np.ndarray, eps: float, n: int) -> np.ndarray:
    """Exact outcome distribution after independent per-bit flips at rate eps."""
    p = np.asarray(probabilities, dtype=np.float64).copy()
    if p.size != 1 << n:
        raise DimensionMismatchError(f"expected {1 << n} probabilities")
    for k in range(n):
        p = p.reshape(-1, 2, 1 << k)
        keep = p.copy()
        p[:, 0, :] = (1 - eps) * keep[:, 0, :] + eps * keep[:, 1, :]
        p[:, 1, :] = (1 - eps) * keep[:, 1, :] + eps * keep[:, 0, :]
    return p.reshape(-1)


# ---------------------------------------------------------------------------
# Correlated-trial (martingale) experiment


class CorrelationScheme:
    """Per-trial observable source; subclasses may correlate trials.

    step() consumes one uniform per run and returns (conditional mean,
    outcome) vectors; outcomes must stay within +-outcome_bound.
    """

    outcome_bound: float

    def step(self, u: np.ndarray, prev_outcome: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass
class IIDScheme(CorrelationScheme):
    """Same two-point +-scale observable every trial."""

    p_plus: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        self.outcome_bound = self.scale

    def step(self, u, prev_outcome):
        mean = np.full(u.shape, self.scale * (2.0 * self.p_plus - 1.0))
        return mean, np.where(u < self.p_plus, self.scale, -self.scale)


@dataclass
class AlternatingScheme(CorrelationScheme):
    """Adversarial correlations: the trial state flips between two fixed
    preparations depending on the previous outcome's sign."""

    p_plus_a: float = 0.9
    p_plus_b: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        self.outcome_bound = self.scale

    def step(self, u, prev_outcome):
        if prev_outcome is None:
            p = np.full(u.shape, self.p_plus_a)
        else:
            p = np.where(prev_outcome > 0, self.p_plus_a, self.p_plus_b)
        mean = self.scale * (2.0 * p - 1.0)
        return mean, np.where(u < p, self.scale, -self.scale)


@dataclass(frozen=True)
class MartingaleTailStats:
    """Empirical deviation quantiles of the correlated-trial estimator."""

    trials: int
    beta: float
    runs: int
    q50: float
    q90: float
    q99: float
    max_abs: float
    width_limit: float
    azuma_q99: float


def azuma_tail_bound(deviation: float, trials: int, beta: float) -> float:
    """Azuma tail 2 exp(-deviation^2 trials / (8 beta^2)) for 2beta/N differences."""
    return 2.0 * math.exp(-(deviation**2) * trials / (8.0 * beta**2))


def azuma_quantile(alpha: float, trials: int, beta: float) -> float:
    """Deviation at which the Azuma tail drops to alpha."""
    return beta * math.sqrt(8.0 * math.log(2.0 / alpha) / trials)


def martingale_experiment(
    scheme: CorrelationScheme,
    trials: int,
    beta: float,
    rng: np.random.Generator,
    runs: int = 400,
) -> MartingaleTailStats:
    """Estimate an observable over correlated trials and measure deviations.

    Each run averages `trials` outcomes F_j and subtracts the average of the
    per-trial conditional means Tr(A sigma_j); quantiles of the absolute
    deviation are returned. Raises ValidationError if the scheme's outcomes
    can exceed the stated bound beta.
    """
    if trials < 1 or runs < 1:
        raise ValidationError("need trials >= 1 and runs >= 1")
    if scheme.outcome_bound > beta + 1e-12:
        raise ValidationError(
            f"observable bound {scheme.outcome_bound} exceeds the stated beta {beta}"
        )
    f_sum = np.zeros(runs)
    mean_sum = np.zeros(runs)
    prev = None
    for _ in range(trials):
        u = rng.random(runs)
        mu, outcome = scheme.step(u, prev)
        f_sum += outcome
        mean_sum += mu
        prev = outcome
    dev = np.abs(f_sum - mean_sum) / trials
    q50, q90, q99 = (float(np.quantile(dev, q)) for q in (0.5, 0.9, 0.99))
    return MartingaleTailStats(
        trials=trials,
        beta=beta,
        runs=runs,
        q50=q50,
        q90=q90,
        q99=q99,
        max_abs=float(dev.max()),
        width_limit=3.2 * beta / math.sqrt(trials),
        azuma_q99=azuma_quantile(0.01, trials, beta),
    )


# ---------------------------------------------------------------------------
# Pauli-product sign inversion and the generalized echo

MAX_GENERAL_ECHO_QUBITS = 7  # total, clock included


def _validate_pauli_label(label: str, num_qubits: int | None = None) -> None:
    if num_qubits is not None and len(label) != num_qubits:
        raise ValidationError(f"label {label!r} has length {len(label)}, expected {num_qubits}")
    for ch in label:
        if ch not in PAULI_MATRICES:
            raise ValidationError(f"malformed Pauli label character {ch!r}")


def php_negation_check(terms, p: str) -> bool:
    """True iff the single-qubit product P anticommutes with every term.

    Two Pauli strings anticommute iff they differ on an odd number of
    positions where both are non-identity.
    """
    _validate_pauli_label(p)
    for coeff, label in terms:
        _validate_pauli_label(label, len(p))
        if coeff == 0:
            continue
        differing = sum(
            1 for a, b in zip(label, p) if a != "I" and b != "I" and a != b
        )
        if differing % 2 == 0:
            return False
    return True


def generalized_echo_prepare(terms, p: str, input_state: PureState, time: float) -> PureState:
    """History-state preparation for any Hamiltonian with a sign-inverting P.

    Runs controlled-P, half-time evolution, controlled-P, X on the clock,
    half-time evolution on (|0> + |1>)|phi>/sqrt(2); the clock is the
    highest qubit of the returned state.
    """
    n = input_state.num_qubits
    if n + 1 > MAX_GENERAL_ECHO_QUBITS:
        raise CapacityError(
            f"{n + 1} qubits exceeds the {MAX_GENERAL_ECHO_QUBITS}-qubit dense-echo guard"
        )
    if not php_negation_check(terms, p):
        raise NotInvertibleError("P does not anticommute with every Hamiltonian term")
    _validate_pauli_label(p, n)
    h = dense_hamiltonian(terms, n)
    u_half = expm_hermitian(h, time / 2.0)
    p_dense = dense_pauli(p)

    v0 = input_state.amplitudes / math.sqrt(2)
    v1 = input_state.amplitudes / math.sqrt(2)
    v1 = p_dense @ v1                     # controlled-P
    v0, v1 = u_half @ v0, u_half @ v1     # half-time evolution
    v1 = p_dense @ v1                     # controlled-P
    v0, v1 = v1, v0                       # X on the clock
    v0, v1 = u_half @ v0, u_half @ v1     # half-time evolution
    return PureState(n + 1, np.concatenate([v0, v1]))


def xb_inversion_label(lattice: LatticeGeometry) -> str:
    """X on sublattice B, identity elsewhere; inverts the coupling sign."""
    return "".join("X" if k in lattice.partition_b else "I" for k in range(lattice.num_qubits))


# ---------------------------------------------------------------------------
# Random states for the bound suites


def random_density_matrix(num_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Normalized Wishart (Ginibre) random state."""
    dim = 1 << num_qubits
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(num_qubits, rho)


def _random_two_qubit_rotation(num_qubits: int, rng: np.random.Generator, max_angle: float) -> tuple[int, int, np.ndarray]:
    qi, qj = rng.choice(num_qubits, size=2, replace=False)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    g = 0.5 * (g + g.conj().T)
    g /= max(np.linalg.norm(g, 2), 1e-12)
    angle = rng.uniform(0.0, max_angle)
    return int(qi), int(qj), expm_hermitian(g, angle)


def near_ideal_history_density(
    lattice: LatticeGeometry,
    input_spec: InputSpec,
    rng: np.random.Generator,
    max_angle: float = 0.05,
    max_depol: float = 0.004,
    theta: float | None = None,
) -> DensityMatrix:
    """Perfect history state with small coherent and depolarizing admixtures.

    Perturbation magnitudes keep the state inside the epsilon <= 0.02 regime
    of the first-order output-fidelity bound by construction.
    """
    n = lattice.num_qubits
    if theta is None:
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
    psi = ideal_history_state(lattice, input_spec, theta).amplitudes
    for _ in range(2):
        qi, qj, gate = _random_two_qubit_rotation(n + 1, rng, max_angle)
        psi = apply_two_qubit_dense(psi, n + 1, qi, qj, gate)
    rate = float(rng.uniform(0.0, max_depol))
    dim = psi.size
    rho = (1.0 - rate) * np.outer(psi, psi.conj()) + rate * np.eye(dim) / dim
    return DensityMatrix(n + 1, rho)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2)||rho - sigma||_tr via the spectrum of the Hermitian difference."""
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


# ---------------------------------------------------------------------------
# Bound-verification suites

SUITE_NAMES = (
    "cauchy_schwarz",
    "lower_bound",
    "tvd_chain",
    "stochastic",
    "martingale",
    "php_echo",
    "noisy_meas",
)


@dataclass(frozen=True)
class SuiteResult:
    """One row of the bound-verification table.

    max_margin is the worst signed margin toward violation; positive margin
    means the bound was violated by that amount.
    """

    test_name: str
    instances: int
    violations: int
    max_margin: float


def _suite_lattice_and_input(seed: int) -> tuple[LatticeGeometry, InputSpec]:
    lattice = build_lattice(2, 2)
    return lattice, random_input(lattice.num_qubits, substream(seed, TAG_BOUNDS, 997))


def suite_cauchy_schwarz(instances: int, seed: int) -> SuiteResult:
    """|Tr rho O10|^2 <= 1/4 for arbitrary states."""
    lattice, spec = _suite_lattice_and_input(seed)
    rng = substream(seed, TAG_BOUNDS, 0)
    violations = 0
    worst = -math.inf
    for _ in range(instances):
        rho = random_density_matrix(lattice.num_qubits + 1, rng)
        params = exact_parameters(rho, lattice, spec)
        margin = abs(params.tr_rho_o10) ** 2 - 0.25 - 1e-10
        worst = max(worst, margin)
        violations += margin > 0
    return SuiteResult("cauchy_schwarz", instances, violations, worst)


def suite_lower_bound(instances: int, seed: int, slack: float = 5e-3) -> SuiteResult:
    """f_out >= 16|Tr rho O10|^2 + 3 f_in - 6 - slack for in-regime states."""
    lattice, spec = _suite_lattice_and_input(seed)
    rng = substream(seed, TAG_BOUNDS, 1)
    violations = 0
    worst = -math.inf
    for _ in range(instances):
        rho = near_ideal_history_density(lattice, spec, rng)
        params = exact_parameters(rho, lattice, spec)
        eps = 0.25 - abs(params.tr_rho_o10) ** 2
        eps_prime = abs(0.5 - params.p_samp)
        eps_dprime = 1.0 - params.f_in
        if max(eps, eps_prime, eps_dprime) > 0.02:
            raise ValidationError("generated state left the epsilon <= 0.02 regime")
        bound = fidelity_lower_bound(abs(params.tr_rho_o10) ** 2, params.f_in)
        margin = (bound - slack) - params.f_out
        worst = max(worst, margin)
        violations += margin > 0
    return SuiteResult("lower_bound", instances, violations, worst)


def suite_tvd_chain(instances: int, seed: int) -> SuiteResult:
    """tvd(P_ideal, P_real) <= sqrt(1 - f_out) for pure output states."""
    lattice, spec = _suite_lattice_and_input(seed)
    rng = substream(seed, TAG_BOUNDS, 2)
    n = lattice.num_qubits
    ideal_out = product_state(spec).amplitudes * zz_phases(lattice, 1.0)
    p_ideal = np.abs(walsh_hadamard(PureState(n, ideal_out)).amplitudes) ** 2
    violations = 0
    worst = -math.inf
    for k in range(instances):
        if k % 2 == 0:
            raw = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        else:
            raw = ideal_out + 0.15 * (rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n))
        phi = raw / np.linalg.norm(raw)
        f_out = float(np.abs(np.vdot(phi, ideal_out)) ** 2)
        p_real = np.abs(walsh_hadamard(PureState(n, phi)).amplitudes) ** 2
        margin = tvd(p_ideal, p_real) - tvd_fidelity_bound(f_out) - 1e-10
        worst = max(worst, margin)
        violations += margin > 0
    return SuiteResult("tvd_chain", instances, violations, worst)


def suite_stochastic(instances: int, seed: int) -> SuiteResult:
    """(1/2)||rho - sigma||_tr <= stochastic_trace_bound(delta_f, delta_p)."""
    lattice, spec = _suite_lattice_and_input(seed)
    rng = substream(seed, TAG_BOUNDS, 3)
    n = lattice.num_qubits
    ideal_out = product_state(spec).amplitudes * zz_phases(lattice, 1.0)
    sigma = np.outer(ideal_out, ideal_out.conj())
    violations = 0
    worst = -math.inf
    for _ in range(instances):
        raw = ideal_out + rng.uniform(0.0, 0.4) * (
            rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        )
        phi = raw / np.linalg.norm(raw)
        w = rng.uniform(0.0, 0.3)
        rho = (1.0 - w) * np.outer(phi, phi.conj()) + w * random_density_matrix(n, rng).matrix
        delta_f = 1.0 - float(np.real(ideal_out.conj() @ rho @ ideal_out))
        delta_p = 1.0 - float(np.real(np.trace(rho @ rho)))
        bound = stochastic_trace_bound(min(max(delta_f, 0.0), 1.0), min(max(delta_p, 0.0), 1.0))
        margin = trace_distance(rho, sigma) - bound - 1e-10
        worst = max(worst, margin)
        violations += margin > 0
    return SuiteResult("stochastic", instances, violations, worst)


def suite_noisy_meas(instances: int, seed: int, eps: float | None = None) -> SuiteResult:
    """Exact flip-convolved sampling TVD against (1 - eps n) sqrt(delta_f) + eps n."""
    lattice, spec = _suite_lattice_and_input(seed)
    rng = substream(seed, TAG_BOUNDS, 4)
    n = lattice.num_qubits
    if eps is None:
        eps = 1.0 / (100.0 * n)
    ideal_out = product_state(spec).amplitudes * zz_phases(lattice, 1.0)
    p_ideal = np.abs(walsh_hadamard(PureState(n, ideal_out)).amplitudes) ** 2
    violations = 0
    worst = -math.inf
    for k in range(instances):
        if k == 0:
            phi = ideal_out
        else:
            raw = ideal_out + 0.1 * (rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n))
            phi = raw / np.linalg.norm(raw)
        delta_f = 1.0 - float(np.abs(np.vdot(phi, ideal_out)) ** 2)
        p_clean = np.abs(walsh_hadamard(PureState(n, phi)).amplitudes) ** 2
        p_noisy = convolve_flip_noise(p_clean, eps, n)
        margin = tvd(p_noisy, p_ideal) - noisy_measurement_tvd_bound(min(delta_f, 1.0), eps, n) - 1e-10
        worst = max(worst, margin)
        violations += margin > 0
    return SuiteResult("noisy_meas", instances, violations, worst)


def suite_martingale(instances: int, seed: int) -> SuiteResult:
    """99th-percentile deviations inside the 3.2 beta/sqrt(N) envelope."""
    rng = substream(seed, TAG_BOUNDS, 5)
    violations = 0
    worst = -math.inf
    checked = 0
    for trials in (1000, 10000):
        for scheme in (IIDScheme(), AlternatingScheme()):
            stats = martingale_experiment(scheme, trials, 1.0, rng, runs=max(instances, 50))
            margin = stats.q99 - stats.width_limit
            worst = max(worst, margin)
            violations += margin > 0
            checked += 1
    return SuiteResult("martingale", checked, violations, worst)


def suite_php_echo(instances: int, seed: int) -> SuiteResult:
    """Symbolic PHP = -H checks against dense algebra plus echo fidelities."""
    rng = substream(seed, TAG_BOUNDS, 6)
    violations = 0
    worst = -math.inf
    cases = 0
    shapes = [(1, 2), (2, 2), (1, 3)]
    for k in range(max(1, instances // 4)):
        lattice = build_lattice(*shapes[k % len(shapes)])
        n = lattice.num_qubits
        spec = random_input(n, rng)
        terms = zz_terms(lattice)
        label = xb_inversion_label(lattice)
        # Symbolic answer vs dense PHP + H == 0.
        h = dense_hamiltonian(terms, n)
        p_dense = dense_pauli(label)
        dense_inverts = float(np.max(np.abs(p_dense @ h @ p_dense + h))) < 1e-10
        if php_negation_check(terms, label) != dense_inverts:
            violations += 1
            worst = max(worst, 1.0)
        state = generalized_echo_prepare(terms, label, product_state(spec), 1.0)
        target = ideal_history_state(lattice, spec).amplitudes
        fid = float(np.abs(np.vdot(target, state.amplitudes)) ** 2)
        margin = (1.0 - 1e-10) - fid
        worst = max(worst, margin)
        violations += margin > 0
        cases += 2
    # The non-commuting hopping-plus-field instance on a 1x2 lattice.
    terms = [(1.0, "XX"), (1.0, "YY"), (1.0, "ZI"), (1.0, "IZ")]
    phi = PureState(2, np.array([0.5, 0.5, 0.5, 0.5], dtype=np.complex128))
    state = generalized_echo_prepare(terms, "XY", phi, 1.0)
    u_full = expm_hermitian(dense_hamiltonian(terms, 2), 1.0)
    target = np.concatenate([phi.amplitudes, u_full @ phi.amplitudes]) / math.sqrt(2)
    fid = float(np.abs(np.vdot(target, state.amplitudes)) ** 2)
    margin = (1.0 - 1e-10) - fid
    worst = max(worst, margin)
    violations += margin > 0
    cases += 1
    return SuiteResult("php_echo", cases, violations, worst)


def run_bound_suite(name: str, instances: int, seed: int) -> SuiteResult:
    """Dispatch a named suite; unknown names raise ValidationError."""
    suites = {
        "cauchy_schwarz": suite_cauchy_schwarz,
        "lower_bound": suite_lower_bound,
        "tvd_chain": suite_tvd_chain,
        "stochastic": suite_stochastic,
        "martingale": suite_martingale,
        "php_echo": suite_php_echo,
        "noisy_meas": suite_noisy_meas,
    }
    if name not in suites:
        raise ValidationError(f"unknown suite {name!r}; choose from {sorted(suites)}")
    return suites[name](instances, seed)

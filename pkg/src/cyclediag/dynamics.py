"""One-cycle propagators and repeated-cycle experiments.

A circuit is modeled at the cycle level: a fixed effective Hamiltonian (time
duration already absorbed, optionally weakened by a factor gamma) plus a
noise model, exponentiated once into the cycle propagator.  Running the
experiment means applying that propagator k times and recording expectation
values after 0..k cycles.

Registers up to six qubits use dense Liouville matrices; for seven or eight
qubits the generator is applied matrix-free through
:func:`cyclediag.liouville.expm_action`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as _sla

from .channels import NoiseModel, assemble, hilbert_jump_operators
from .liouville import (
    MAX_DENSE_LIOUVILLE_DIM,
    DensityMatrix,
    LiouvilleVector,
    Observable,
    Superoperator,
    devectorize,
    expm,
    expm_action,
    kron_all,
    liouville_hamiltonian,
    liouville_inner,
    partial_trace,
    random_hermitian,
    spectral_spread,
    vectorize,
)

#: Imaginary parts of expectation values of Hermitian observables above this
#: threshold indicate a bug and raise instead of being dropped.
REALITY_TOL = 1e-10


@dataclass(frozen=True)
class CircuitSpec:
    """Everything needed to build one cycle of the circuit."""

    n: int
    hamiltonian: Observable
    noise: NoiseModel
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.hamiltonian.dim != 2**self.n:
            raise ValueError(
                f"hamiltonian dim {self.hamiltonian.dim} does not match n={self.n} qubits"
            )
        if self.noise.n != self.n:
            raise ValueError(f"noise model is for n={self.noise.n}, circuit has n={self.n}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class CycleTrace:
    """Expectation values of one observable after 0..k cycles."""

    values: tuple[float, ...]
    observable_id: str = "rho0"
    initial_state_id: str = "rho0"
    shots: int | None = None
    stderr: tuple[float, ...] | None = None
    protocol: str = "cycles"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("a trace needs at least the zero-cycle entry")
        object.__setattr__(self, "values", vals)
        if (self.shots is None) != (self.stderr is None):
            raise ValueError("shots and stderr must be set together")
        if self.stderr is not None:
            err = tuple(float(e) for e in self.stderr)
            if len(err) != len(vals):
                raise ValueError("stderr length must match values length")
            object.__setattr__(self, "stderr", err)

    @property
    def cycles(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class ResetSpec:
    """Bipartition of the register with the part reset between cycles.

    ``keep`` lists the qubits whose reduced state is tracked; ``reset`` lists
    the qubits re-prepared in ``psi_b`` at the start of every cycle.
    """

    keep: tuple[int, ...]
    reset: tuple[int, ...]
    psi_b: np.ndarray | None = None

    def __post_init__(self):
        keep = tuple(sorted(int(q) for q in self.keep))
        rst = tuple(sorted(int(q) for q in self.reset))
        if set(keep) & set(rst):
            raise ValueError("keep and reset sets overlap")
        if not keep:
            raise ValueError("the kept part must contain at least one qubit")
        object.__setattr__(self, "keep", keep)
        object.__setattr__(self, "reset", rst)
        if rst:
            if self.psi_b is None:
                raise ValueError("psi_b required when the reset part is nonempty")
            v = np.asarray(self.psi_b, dtype=complex).reshape(-1)
            if v.size != 2 ** len(rst):
                raise ValueError(
                    f"psi_b has length {v.size}, expected {2 ** len(rst)} for {len(rst)} qubits"
                )
            nrm = np.linalg.norm(v)
            if nrm == 0.0:
                raise ValueError("psi_b must be a nonzero state vector")
            object.__setattr__(self, "psi_b", v / nrm)

    def check_covers(self, n: int) -> None:
        if set(self.keep) | set(self.reset) != set(range(n)):
            raise ValueError(
                f"partition {self.keep} + {self.reset} does not cover qubits 0..{n - 1}"
            )


def generator(spec: CircuitSpec) -> Superoperator:
    """One-cycle generator -1j * gamma * H_L + dissipator."""
    x = (-1j * spec.gamma) * liouville_hamiltonian(spec.hamiltonian)
    if spec.noise.channels:
        x = x + assemble(spec.noise)
    return x


def propagator(spec: CircuitSpec) -> Superoperator:
    """Dense one-cycle propagator exp(-1j * gamma * H_L + L)."""
    if 4**spec.n > MAX_DENSE_LIOUVILLE_DIM:
        raise ValueError(
            f"n={spec.n} exceeds the dense cap; use run_cycles, which switches to the "
            "matrix-free generator"
        )
    return expm(generator(spec))


def generator_matvec(spec: CircuitSpec):
    """Matrix-free generator action on density vectors.

    Returns (matvec, norm_bound).  The generator is applied through
    Hilbert-space products, so nothing of size 4^n x 4^n is built; this is
    also an independent route to the same map as :func:`generator`.
    """
    dim = 2**spec.n
    h = spec.gamma * spec.hamiltonian.entries
    jumps = [
        (rate, c, c.conj().T @ c) for rate, c in hilbert_jump_operators(spec.noise)
    ]

    def matvec(v: np.ndarray) -> np.ndarray:
        rho = v.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h)
        for rate, c, cc in jumps:
            out = out + rate * (c @ rho @ c.conj().T - 0.5 * (cc @ rho + rho @ cc))
        return out.reshape(-1)

    bound = spec.gamma * spectral_spread(spec.hamiltonian) + sum(
        2.0 * rate * np.linalg.norm(c, 2) ** 2 for rate, c, _ in jumps
    )
    return matvec, float(max(bound, 1e-12))


def _cycle_stepper(spec: CircuitSpec):
    if 4**spec.n <= MAX_DENSE_LIOUVILLE_DIM:
        k = propagator(spec).entries
        return lambda v: k @ v
    matvec, bound = generator_matvec(spec)
    return lambda v: expm_action(matvec, v, bound)


def run_cycles(spec: CircuitSpec, rho0: DensityMatrix, observables, cycles: int):
    """Expectation-value traces of each observable after 0..cycles cycles.

    Args:
        rho0: initial state, shared by every run.
        observables: list of Hermitian Observables.
        cycles: number of repetitions, at least 2.

    Returns:
        One CycleTrace per observable, entry k holding trace(O @ rho_k).
    """
    if cycles < 2:
        raise ValueError(f"need at least 2 cycles, got {cycles}")
    if rho0.dim != 2**spec.n:
        raise ValueError(f"state dim {rho0.dim} does not match n={spec.n}")
    obs = list(observables)
    for o in obs:
        if o.dim != rho0.dim:
            raise ValueError(f"observable dim {o.dim} does not match state dim {rho0.dim}")
    obs_vecs = [vectorize(o).entries for o in obs]
    step = _cycle_stepper(spec)
    v = vectorize(rho0).entries
    series: list[list[float]] = [[] for _ in obs]
    for _ in range(cycles + 1):
        for row, ov in zip(series, obs_vecs):
            val = complex(np.vdot(ov, v))
            if abs(val.imag) > REALITY_TOL:
                raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
            row.append(val.real)
        v = step(v)
    return [
        CycleTrace(tuple(row), observable_id=f"obs{i}", initial_state_id="rho0")
        for i, row in enumerate(series)
    ]


def survival_trace(spec: CircuitSpec, rho0: DensityMatrix, cycles: int) -> CycleTrace:
    """Survival-probability trace: the measured observable is rho0 itself."""
    trace = run_cycles(spec, rho0, [Observable(rho0.entries)], cycles)[0]
    return replace(trace, observable_id="rho0", initial_state_id="rho0")


def _compose_register(rho_a: np.ndarray, rho_b: np.ndarray, reset: ResetSpec, n: int) -> np.ndarray:
    """Tensor rho_a (on reset.keep) with rho_b (on reset.reset) in register order."""
    order = list(reset.keep) + list(reset.reset)
    rho = np.kron(rho_a, rho_b)
    if order == sorted(order):
        return rho
    pos = {q: i for i, q in enumerate(order)}
    axes = [pos[q] for q in range(n)]
    t = rho.reshape((2,) * (2 * n))
    t = t.transpose(axes + [a + n for a in axes])
    return t.reshape(2**n, 2**n)


def run_reset_cycles(spec: CircuitSpec, reset: ResetSpec, psi_a, cycles: int):
    """Reduced states of the kept part under the cycle-and-reset protocol.

    Each cycle tensors the current reduced state with a fresh copy of
    ``psi_b`` on the reset qubits, applies one cycle of the full dynamics,
    and traces the reset part back out.  Starting from the pure product
    state, the reduced dynamics becomes a periodic CP map.

    Returns:
        List of DensityMatrix on the kept qubits after 0..cycles cycles.
    """
    reset.check_covers(spec.n)
    if cycles < 1:
        raise ValueError(f"need at least 1 cycle, got {cycles}")
    psi_a = np.asarray(psi_a, dtype=complex).reshape(-1)
    if psi_a.size != 2 ** len(reset.keep):
        raise ValueError(
            f"psi_a has length {psi_a.size}, expected {2 ** len(reset.keep)}"
        )
    rho_a = DensityMatrix.from_statevector(psi_a)
    if not reset.reset:
        # Degenerate partition: nothing is reset, so this is plain cycling.
        states = [rho_a]
        step = _cycle_stepper(spec)
        v = vectorize(rho_a).entries
        for _ in range(cycles):
            v = step(v)
            states.append(DensityMatrix(devectorize(v)))
        return states

    rho_b = DensityMatrix.from_statevector(reset.psi_b).entries
    dims = [2] * spec.n

    if spec.noise.is_empty():
        u = _sla.expm(-1j * spec.gamma * spec.hamiltonian.entries)
        evolve = lambda full: u @ full @ u.conj().T  # noqa: E731
    elif 4**spec.n <= 256:
        k = propagator(spec).entries
        evolve = lambda full: devectorize(k @ full.reshape(-1))  # noqa: E731
    else:
        matvec, bound = generator_matvec(spec)
        evolve = lambda full: devectorize(  # noqa: E731
            expm_action(matvec, full.reshape(-1), bound)
        )

    states = [rho_a]
    for _ in range(cycles):
        full = _compose_register(states[-1].entries, rho_b, reset, spec.n)
        full = evolve(full)
        states.append(partial_trace(full, reset.keep, dims))
    return states


def reset_survival_trace(states) -> CycleTrace:
    """Survival trace of the kept part from :func:`run_reset_cycles` output."""
    ref = vectorize(states[0])
    values = []
    for s in states:
        val = liouville_inner(ref, vectorize(s))
        if abs(val.imag) > REALITY_TOL:
            raise ValueError(f"survival value has imaginary part {val.imag:.3e}")
        values.append(val.real)
    return CycleTrace(
        tuple(values), observable_id="rho0_kept", initial_state_id="rho0_kept", protocol="reset"
    )


def inverse_circuit(spec: CircuitSpec, d_h: Observable | None = None) -> Superoperator:
    """Propagator of the undo circuit: Hamiltonian negated (plus an optional
    coherent error d_h), dissipation unchanged."""
    h_i = -spec.hamiltonian.entries
    if d_h is not None:
        if d_h.dim != spec.hamiltonian.dim:
            raise ValueError("d_h dimension mismatch")
        h_i = h_i + d_h.entries
    return propagator(replace(spec, hamiltonian=Observable(h_i)))


def random_circuit(
    n: int,
    element_scale: float,
    seed: int,
    norm_cap: float | None = None,
    noise: NoiseModel | None = None,
    gamma: float = 1.0,
) -> CircuitSpec:
    """Random effective Hamiltonian with box-uniform complex entries.

    Entries of the pre-Hermitization matrix have real and imaginary parts
    uniform in [-element_scale, element_scale]; the result is (M + M')/2.
    With ``norm_cap`` set, the Hamiltonian is scaled down (never up) so its
    operator norm does not exceed the cap.  Deterministic in ``seed``.
    """
    if n > 8:
        raise ValueError(f"register cap is 8 qubits, got n={n}")
    rng = np.random.default_rng(seed)
    h = random_hermitian(2**n, rng, element_scale)
    if norm_cap is not None:
        nrm = np.linalg.norm(h, 2)
        if nrm > norm_cap:
            h = h * (norm_cap / nrm)
    return CircuitSpec(
        n=n,
        hamiltonian=Observable(h),
        noise=noise if noise is not None else NoiseModel.empty(n),
        gamma=gamma,
        seed=seed,
    )


def scale_to_norm(spec: CircuitSpec, norm: float) -> CircuitSpec:
    """Rescale the Hamiltonian to an exact operator norm."""
    h = spec.hamiltonian.entries
    cur = np.linalg.norm(h, 2)
    if cur == 0.0:
        raise ValueError("cannot rescale a zero Hamiltonian")
    return replace(spec, hamiltonian=Observable(h * (norm / cur)))


def action_norm(spec: CircuitSpec) -> float:
    """Operator norm of the one-cycle generator (the action of the circuit)."""
    return float(np.linalg.norm(generator(spec).entries, 2))


def action_spread(spec: CircuitSpec) -> float:
    """Eigenvalue spread of the weakened Hamiltonian, the companion action proxy."""
    return spec.gamma * spectral_spread(spec.hamiltonian)


def shot_noise(
    trace: CycleTrace, shots: int, seed: int, value_range: tuple[float, float] = (0.0, 1.0)
) -> CycleTrace:
    """Replace each trace entry by a finite-shot two-outcome estimate.

    Each expectation value is rescaled into [0, 1] using the observable's
    eigenvalue range, sampled as a binomial mean over ``shots`` draws, and
    mapped back; stderr holds the sample standard error per entry.
    """
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    lo, hi = value_range
    span = hi - lo
    if span <= 0:
        raise ValueError(f"invalid value range {value_range}")
    rng = np.random.default_rng(seed)
    values, errs = [], []
    for v in trace.values:
        p = (v - lo) / span
        if p < -1e-9 or p > 1 + 1e-9:
            raise ValueError(f"value {v} outside the stated range {value_range}")
        p = min(max(p, 0.0), 1.0)
        phat = rng.binomial(shots, p) / shots
        values.append(lo + span * phat)
        errs.append(span * math.sqrt(phat * (1.0 - phat) / shots))
    return CycleTrace(
        tuple(values),
        observable_id=trace.observable_id,
        initial_state_id=trace.initial_state_id,
        shots=shots,
        stderr=tuple(errs),
        protocol=trace.protocol,
    )


def nested_commutator(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """k-fold nested commutator [a, [a, ... [a, b]]]; k=0 returns b."""
    out = np.asarray(b, dtype=complex)
    a = np.asarray(a, dtype=complex)
    for _ in range(k):
        out = a @ out - out @ a
    return out


def propagator_series(
    hamiltonian_super: Superoperator, dissipator: Superoperator, k_max: int = 12
) -> Superoperator:
    """First-order-in-dissipation expansion of the cycle propagator.

    Expands exp(-1j*H_L + L) as exp(-1j*H_L) @ (1 + sum_k C_k / (k+1)!) with
    C_0 = L and C_k = [1j*H_L, C_(k-1)], truncated at k_max.  The neglected
    remainder is quadratic in the dissipator plus the series tail.
    """
    h = np.asarray(hamiltonian_super.entries)
    ih = 1j * h
    term = np.asarray(dissipator.entries)
    corr = np.zeros_like(term)
    for k in range(k_max + 1):
        corr = corr + term / math.factorial(k + 1)
        term = ih @ term - term @ ih
    u = _sla.expm(-1j * h)
    return Superoperator(u @ (np.eye(h.shape[0]) + corr), kind="propagator")


def kron_product_state(single_qubit_kets) -> np.ndarray:
    """Tensor product of per-qubit state vectors."""
    return kron_all([np.asarray(k, dtype=complex).reshape(2, 1) for k in single_qubit_kets]).reshape(-1)

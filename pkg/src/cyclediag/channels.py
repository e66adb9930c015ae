"""Single-qubit Lindblad dissipators and their multi-qubit embeddings.

Basis convention, used everywhere: ``|up> = (1, 0)`` is the excited state
and the lowering operator maps it to ``|down> = (0, 1)``.  A channel's
Liouville matrix follows the row-major vectorization of
:mod:`cyclediag.liouville`, so a jump operator c with rate xi contributes
``xi * (kron(c, conj(c)) - kron(c'c, I)/2 - kron(I, (c'c).T)/2)``.

Dissipators of separate channels add; repeated channels on one qubit are
simply summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .liouville import IDENTITY_2, PAULI_Z, Superoperator

#: Lowering operator: |up> -> |down> under the (1,0)-is-excited convention.
LOWERING = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
RAISING = LOWERING.conj().T

CHANNEL_KINDS = (
    "spontaneous_emission",
    "excitation",
    "depolarizing",
    "decoherence",
    "thermal",
)


class NonThermalChannelError(ValueError):
    """The channel has a vanishing decay element, so no temperature ratio exists."""


@dataclass(frozen=True)
class ChannelSpec:
    """One noise channel acting on one qubit at a fixed rate per cycle."""

    kind: str
    rate: float
    target: int = 0
    beta_omega: float | None = None

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")
        if self.target < 0:
            raise ValueError(f"target must be nonnegative, got {self.target}")
        if self.kind == "thermal":
            if self.beta_omega is None or not math.isfinite(self.beta_omega):
                raise ValueError("thermal channel requires a finite beta_omega")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "rate": self.rate, "target": self.target}
        if self.beta_omega is not None:
            d["beta_omega"] = self.beta_omega
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        allowed = {"kind", "rate", "target", "beta_omega"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown channel keys: {sorted(unknown)}")
        return cls(
            kind=d["kind"],
            rate=float(d["rate"]),
            target=int(d.get("target", 0)),
            beta_omega=d.get("beta_omega"),
        )


@dataclass(frozen=True)
class NoiseModel:
    """Collection of channels on an n-qubit register."""

    n: int
    channels: tuple[ChannelSpec, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"qubit count must be positive, got {self.n}")
        chans = tuple(self.channels)
        for c in chans:
            if c.target >= self.n:
                raise ValueError(f"channel target {c.target} out of range for n={self.n}")
        object.__setattr__(self, "channels", chans)

    @classmethod
    def empty(cls, n: int) -> "NoiseModel":
        return cls(n=n, channels=())

    def is_empty(self) -> bool:
        return all(c.rate == 0 for c in self.channels)

    def to_dict(self) -> dict:
        return {"n": self.n, "channels": [c.to_dict() for c in self.channels]}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        unknown = set(d) - {"n", "channels"}
        if unknown:
            raise ValueError(f"unknown noise-model keys: {sorted(unknown)}")
        return cls(
            n=int(d["n"]),
            channels=tuple(ChannelSpec.from_dict(c) for c in d.get("channels", ())),
        )


def lindblad_dissipator(c, rate: float = 1.0) -> np.ndarray:
    """Row-major Liouville matrix of rho -> rate * (c rho c' - {c'c, rho}/2)."""
    c = np.asarray(c, dtype=complex)
    cc = c.conj().T @ c
    eye = np.eye(c.shape[0], dtype=complex)
    return rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cc, eye) - 0.5 * np.kron(eye, cc.T))


def lindblad_operators(kind: str, rate: float, beta_omega: float | None = None):
    """Jump operators and rates realizing a named channel.

    Returns a list of (rate, operator) pairs.  The thermal channel combines
    emission at the nominal rate with excitation damped by the detailed
    balance factor exp(-beta_omega).
    """
    if kind == "spontaneous_emission":
        return [(rate, LOWERING)]
    if kind == "excitation":
        return [(rate, RAISING)]
    if kind == "depolarizing":
        return [(rate, LOWERING), (rate, RAISING)]
    if kind == "decoherence":
        # sigma_z jump at rate/2 reproduces (rate/2) * (kron(sz, sz) - I4).
        return [(rate / 2.0, PAULI_Z)]
    if kind == "thermal":
        if beta_omega is None:
            raise ValueError("thermal channel requires beta_omega")
        return [(rate, LOWERING), (rate * math.exp(-beta_omega), RAISING)]
    raise ValueError(f"unknown channel kind {kind!r}")


def dissipator_single(kind: str, rate: float, beta_omega: float | None = None) -> Superoperator:
    """4x4 dissipator of a named single-qubit channel."""
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    m = np.zeros((4, 4), dtype=complex)
    for r, c in lindblad_operators(kind, rate, beta_omega):
        m += lindblad_dissipator(c, r)
    return Superoperator(m, kind="dissipator")


def _row_major_to_interleaved(n: int) -> np.ndarray:
    """Index map from the row-major density-vector ordering to the ordering
    where each qubit contributes one adjacent (row bit, column bit) pair."""
    dim = 2**n
    idx = np.arange(dim * dim)
    i, j = idx // dim, idx % dim
    out = np.zeros_like(idx)
    for q in range(n):
        shift = n - 1 - q
        out = (out << 2) | (((i >> shift) & 1) << 1) | ((j >> shift) & 1)
    return out


def embed(local: Superoperator, target: int, n: int) -> Superoperator:
    """Lift a single-qubit superoperator to the n-qubit Liouville space."""
    if local.dim2 != 4:
        raise ValueError(f"expected a 4x4 single-qubit superoperator, got dim {local.dim2}")
    if not 0 <= target < n:
        raise ValueError(f"target {target} out of range for {n} qubits")
    if n == 1:
        return local
    inter = np.kron(
        np.kron(np.eye(4**target), local.entries), np.eye(4 ** (n - target - 1))
    )
    f = _row_major_to_interleaved(n)
    return Superoperator(inter[np.ix_(f, f)], kind=local.kind)


def assemble(model: NoiseModel) -> Superoperator:
    """Sum of the embedded dissipators of every channel in the model."""
    dim2 = 4**model.n
    total = np.zeros((dim2, dim2), dtype=complex)
    for spec in model.channels:
        local = dissipator_single(spec.kind, spec.rate, spec.beta_omega)
        total += embed(local, spec.target, model.n).entries
    return Superoperator(total, kind="dissipator")


def hilbert_jump_operators(model: NoiseModel) -> list[tuple[float, np.ndarray]]:
    """All (rate, jump operator) pairs of the model lifted to the full register.

    This is the matrix-free counterpart of :func:`assemble`, used to apply a
    generator without materializing the Liouville matrix.
    """
    from .liouville import op_on_qubit

    pairs = []
    for spec in model.channels:
        for rate, c in lindblad_operators(spec.kind, spec.rate, spec.beta_omega):
            pairs.append((rate, op_on_qubit(c, spec.target, model.n)))
    return pairs


def thermal_ratio(l: Superoperator) -> float:
    """Detailed-balance factor exp(-beta_omega) read off a single-qubit dissipator.

    The ratio of the excitation decay element to the emission decay element
    (the Liouville diagonal entries at the down and up populations) equals
    exp(-beta_omega) for a thermal channel and 1 at infinite temperature.

    Raises:
        NonThermalChannelError: if either decay element vanishes, e.g. a pure
            zero-temperature emission channel or a pure dephasing channel.
    """
    if l.dim2 != 4:
        raise ValueError(f"expected a single-qubit dissipator, got dim {l.dim2}")
    elem_up = complex(l.entries[0, 0])
    elem_down = complex(l.entries[3, 3])
    scale = max(abs(elem_up), abs(elem_down))
    if scale == 0.0 or min(abs(elem_up), abs(elem_down)) < 1e-12 * scale:
        raise NonThermalChannelError(
            "a decay matrix element vanishes; the channel has no finite temperature"
        )
    return float(np.real(elem_down / elem_up))

"""Dense linear algebra for density operators in Hilbert and Liouville space.

An operator on the 2^n-dimensional Hilbert space is flattened row-major into
a length-4^n "density vector"; superoperators are dense 4^n x 4^n complex
matrices acting on those vectors.  Under the row-major convention the map
rho -> A @ rho @ B becomes kron(A, B.T) acting on vec(rho), so the commutator
generator of unitary dynamics is kron(H, I) - kron(I, H.T).

All value types are immutable after construction and validated against hard
tolerances; a violation raises ValueError rather than warning, since a
drifting density matrix would silently corrupt every downstream estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as _sla

#: Flattening order shared by every module.  Row-major ("C") makes
#: vec(A @ rho @ B) == kron(A, B.T) @ vec(rho).
VECTORIZATION_ORDER = "C"

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10

#: Largest Liouville dimension (4^n) for which dense superoperators are
#: materialized; six qubits.  Beyond that, evolution goes through
#: ``expm_action`` with a matrix-free generator.
MAX_DENSE_LIOUVILLE_DIM = 4096

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _square_matrix(entries, what: str) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {m.shape}")
    return m


def _check_hermitian(m: np.ndarray, tol: float, what: str) -> None:
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > tol:
        raise ValueError(f"{what} is not Hermitian (max deviation {dev:.3e} > {tol:.0e})")


def _entries_of(obj) -> np.ndarray:
    return obj.entries if hasattr(obj, "entries") else np.asarray(obj, dtype=complex)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite operator.

    Hermiticity and trace are checked to 1e-12, eigenvalues must stay above
    -1e-10; any violation is a hard error.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = _square_matrix(self.entries, "density matrix")
        _check_hermitian(m, HERMITICITY_TOL, "density matrix")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {TRACE_TOL:.0e}")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < EIGENVALUE_FLOOR:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_statevector(cls, psi) -> "DensityMatrix":
        """Pure-state projector |psi><psi| (the vector is normalized first)."""
        v = np.asarray(psi, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / nrm
        return cls(np.outer(v, v.conj()))


@dataclass(frozen=True)
class Observable:
    """Hermitian operator in Hilbert space."""

    entries: np.ndarray

    def __post_init__(self):
        m = _square_matrix(self.entries, "observable")
        _check_hermitian(m, HERMITICITY_TOL, "observable")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LiouvilleVector:
    """Row-major flattening of a Hilbert-space operator."""

    entries: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.entries, dtype=complex).reshape(-1)
        d = math.isqrt(v.size)
        if d * d != v.size or v.size == 0:
            raise ValueError(f"density-vector length {v.size} is not a positive perfect square")
        object.__setattr__(self, "entries", _freeze(v))

    @property
    def dim2(self) -> int:
        return self.entries.size

    @property
    def dim(self) -> int:
        return math.isqrt(self.entries.size)


_SUPEROP_KINDS = ("hamiltonian", "dissipator", "generator", "propagator")


@dataclass(frozen=True)
class Superoperator:
    """Dense matrix acting on density vectors.

    ``kind`` tags what the matrix is: a Hamiltonian commutator generator
    (checked Hermitian), a dissipator, a combined generator, or an
    exponentiated one-cycle propagator.
    """

    entries: np.ndarray
    kind: str = "generator"

    def __post_init__(self):
        if self.kind not in _SUPEROP_KINDS:
            raise ValueError(f"unknown superoperator kind {self.kind!r}")
        m = _square_matrix(self.entries, "superoperator")
        if self.kind == "hamiltonian":
            _check_hermitian(m, HERMITICITY_TOL, "hamiltonian superoperator")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim2(self) -> int:
        return self.entries.shape[0]

    def __add__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.dim2 != self.dim2:
            raise ValueError(f"dimension mismatch: {self.dim2} vs {other.dim2}")
        kind = self.kind if self.kind == other.kind and self.kind != "propagator" else "generator"
        return Superoperator(self.entries + other.entries, kind)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, complex)):
            return NotImplemented
        if self.kind == "hamiltonian" and isinstance(scalar, (int, float)):
            kind = "hamiltonian"
        elif self.kind == "dissipator" and isinstance(scalar, (int, float)) and scalar >= 0:
            kind = "dissipator"
        else:
            kind = "generator"
        return Superoperator(scalar * self.entries, kind)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        kind = "propagator" if self.kind == other.kind == "propagator" else "generator"
        return Superoperator(self.entries @ other.entries, kind)

    def apply(self, v) -> LiouvilleVector:
        """Act on a density vector."""
        vec = _entries_of(v).reshape(-1)
        if vec.size != self.dim2:
            raise ValueError(f"dimension mismatch: {self.dim2} vs {vec.size}")
        return LiouvilleVector(self.entries @ vec)


def vectorize(m) -> LiouvilleVector:
    """Flatten a square matrix row-major into a density vector."""
    a = _square_matrix(_entries_of(m), "vectorize input")
    return LiouvilleVector(a.reshape(-1))


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`; returns the plain matrix."""
    a = np.asarray(_entries_of(v), dtype=complex).reshape(-1)
    d = math.isqrt(a.size)
    if d * d != a.size:
        raise ValueError(f"length {a.size} is not a perfect square")
    return a.reshape(d, d).copy()


def liouville_hamiltonian(h) -> Superoperator:
    """Commutator superoperator kron(H, I) - kron(I, H.T) of a Hermitian H."""
    a = _square_matrix(_entries_of(h), "hamiltonian")
    _check_hermitian(a, HERMITICITY_TOL, "hamiltonian")
    eye = np.eye(a.shape[0], dtype=complex)
    return Superoperator(np.kron(a, eye) - np.kron(eye, a.T), kind="hamiltonian")


def liouville_inner(a, b) -> complex:
    """Inner product of density vectors, conjugate-linear in the first slot.

    Equals the Hilbert-space overlap trace(A^dag @ B) of the devectorized
    operators.
    """
    va = _entries_of(a).reshape(-1)
    vb = _entries_of(b).reshape(-1)
    if va.size != vb.size:
        raise ValueError(f"dimension mismatch: {va.size} vs {vb.size}")
    return complex(np.vdot(va, vb))


def expm(g: Superoperator) -> Superoperator:
    """One-cycle propagator exp(X) of a generator or dissipator.

    A raw Hamiltonian superoperator is rejected on purpose: multiply it by
    -1j first so the missing factor cannot slip through silently.
    """
    if not isinstance(g, Superoperator):
        raise TypeError("expm expects a Superoperator")
    if g.kind not in ("generator", "dissipator"):
        raise ValueError(
            f"cannot exponentiate kind={g.kind!r}; scale a hamiltonian by -1j to make a generator"
        )
    if not np.all(np.isfinite(g.entries)):
        raise ValueError("superoperator has non-finite entries")
    return Superoperator(_sla.expm(np.asarray(g.entries)), kind="propagator")


def expm_action(matvec, v, norm_bound: float, tol: float = 1e-15, max_terms: int = 120) -> np.ndarray:
    """Apply exp(X) to a vector without materializing X or exp(X).

    Uses scaling plus a truncated Taylor series: exp(X) = exp(X/s)^s with
    s = ceil(norm_bound), summing terms until they stop contributing.

    Args:
        matvec: callable computing X @ y for a 1-D array y, or a dense matrix.
        v: the vector (array or LiouvilleVector).
        norm_bound: any upper bound on the operator norm of X.
    """
    if not callable(matvec):
        mat = np.asarray(_entries_of(matvec))
        matvec = lambda y: mat @ y  # noqa: E731
    y = np.array(_entries_of(v), dtype=complex).reshape(-1)
    steps = max(1, math.ceil(norm_bound))
    for _ in range(steps):
        term = y
        acc = y.copy()
        for j in range(1, max_terms + 1):
            term = matvec(term) / (steps * j)
            acc += term
            if np.linalg.norm(term) <= tol * np.linalg.norm(acc):
                break
        else:
            raise ValueError("expm_action series did not converge; check norm_bound")
        y = acc
    return y


def partial_trace(rho, keep, dims) -> DensityMatrix:
    """Reduced state on the tensor factors listed in ``keep``.

    Args:
        rho: DensityMatrix or matrix on the full space.
        keep: indices of the factors to retain (ascending output order).
        dims: dimension of every tensor factor; their product must match rho.
    """
    m = _square_matrix(_entries_of(rho), "partial_trace input")
    dims = [int(d) for d in dims]
    if math.prod(dims) != m.shape[0]:
        raise ValueError(f"factor dims {dims} do not multiply to {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")
    if not keep:
        raise ValueError("must keep at least one factor")
    t = m.reshape(dims + dims)
    remaining = list(range(len(dims)))
    for idx in sorted(set(range(len(dims))) - set(keep), reverse=True):
        pos = remaining.index(idx)
        t = np.trace(t, axis1=pos, axis2=pos + len(remaining))
        remaining.pop(pos)
    d_keep = math.prod(dims[k] for k in keep)
    return DensityMatrix(t.reshape(d_keep, d_keep))


def purity(rho) -> float:
    """trace(rho^2), between 1/dim and 1 for a valid state."""
    m = _entries_of(rho)
    return float(np.real(np.vdot(m, m)))


def renyi2(rho) -> float:
    """Order-two Renyi entropy -ln trace(rho^2); zero for a pure state."""
    p = purity(rho)
    if p <= 0.0:
        raise ValueError(f"purity {p} is not positive")
    return float(-np.log(p))


# ---------------------------------------------------------------------------
# small construction helpers shared by tests, experiments and the CLI


def kron_all(mats) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def op_on_qubit(op, target: int, n: int) -> np.ndarray:
    """Lift a single-qubit operator to qubit ``target`` of an n-qubit register."""
    if not 0 <= target < n:
        raise ValueError(f"target {target} out of range for {n} qubits")
    return kron_all([np.asarray(op) if q == target else IDENTITY_2 for q in range(n)])


def basis_ket(n: int, index: int) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    v[index] = 1.0
    return v


def plus_ket(n: int) -> np.ndarray:
    """|+>^(x n), the uniform superposition."""
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """(M + M^dag)/2 with real and imaginary parts of M uniform in [-scale, scale]."""
    m = rng.uniform(-scale, scale, (dim, dim)) + 1j * rng.uniform(-scale, scale, (dim, dim))
    return (m + m.conj().T) / 2


def random_pure_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Full-rank random state G G^dag / trace."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m))


def spectral_spread(h) -> float:
    """max eigenvalue minus min eigenvalue of a Hermitian matrix."""
    ev = np.linalg.eigvalsh(_entries_of(h))
    return float(ev[-1] - ev[0])

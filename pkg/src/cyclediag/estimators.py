"""Weighted cycle sums and the dissipation estimators built on them.

The central object is the order-n weighted sum over a cycle trace,
sum_k w_k * O_k, whose weights are chosen so that in the weak-action regime
the constant and second-order contributions cancel.  For a survival trace
the sum then reads off minus the dissipator matrix element, which feeds the
purity-change, per-qubit dissipative-change and entanglement estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .dynamics import CycleTrace
from .liouville import DensityMatrix, Observable

MIN_ORDER = 2
MAX_ORDER = 8

#: Leading error order (power of the action) of the dissipator-element
#: estimates at each supported combination order.
DISSIPATOR_ERROR_ORDER = {2: 3, 3: 4}

#: Leading error order of the dissipative-change combinations.
DISSIPATIVE_CHANGE_ERROR_ORDER = {2: 3, 3: 4, 4: 5}

#: Commutation tolerance required between an observable and the initial
#: state before the dissipative-change combinations are meaningful.
COMMUTATION_TOL = 1e-10

#: Entanglement-change prefactor on the reset-protocol weighted sum.  The
#: weighted sum estimates half the (sign-flipped) subsystem purity change,
#: and for small changes the entropy change equals minus the purity change;
#: the exactly solvable two-qubit coupling pins the constant at 2.
RENYI2_SUM_FACTOR = 2.0


def _exact_weights(n: int) -> tuple[Fraction, ...]:
    pref = Fraction(2 * (2 * n - 1), n)
    w = [Fraction(2) - Fraction(1, n)]
    for k in range(1, n + 1):
        w.append(
            pref
            * Fraction(math.factorial(n) ** 2, math.factorial(n - k) * math.factorial(n + k))
            * (-1) ** k
        )
    return tuple(w)


@dataclass(frozen=True)
class WeightSet:
    """Cycle weights of one combination order, kept exactly as rationals."""

    order: int
    exact: tuple[Fraction, ...] = field(repr=False)
    w: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(f) for f in self.exact))


def weights(n: int) -> WeightSet:
    """Weights w_0..w_n of the order-n cycle sum.

    w_0 = 2 - 1/n and w_k = (2(2n-1)/n) * n!^2 / ((n-k)! (n+k)!) * (-1)^k;
    they sum to zero, which kills the constant term of any trace.
    """
    if not MIN_ORDER <= n <= MAX_ORDER:
        raise ValueError(f"order must be in [{MIN_ORDER}, {MAX_ORDER}], got {n}")
    return WeightSet(order=n, exact=_exact_weights(n))


def s_sum(trace: CycleTrace, n: int) -> float:
    """Order-n weighted sum over the first n+1 trace entries."""
    ws = weights(n)
    if len(trace.values) < n + 1:
        raise ValueError(
            f"order {n} needs {n + 1} trace entries, trace has {len(trace.values)}"
        )
    return float(sum(w * v for w, v in zip(ws.w, trace.values)))


def s_sum_stderr(trace: CycleTrace, n: int) -> float | None:
    """Propagated standard error sqrt(sum w_k^2 sigma_k^2), or None without shots."""
    if trace.stderr is None:
        return None
    ws = weights(n)
    if len(trace.values) < n + 1:
        raise ValueError(
            f"order {n} needs {n + 1} trace entries, trace has {len(trace.values)}"
        )
    return float(math.sqrt(sum((w * e) ** 2 for w, e in zip(ws.w, trace.stderr))))


def dissipator_element(trace: CycleTrace, orders=(2, 3)) -> dict[int, float]:
    """Estimates of the dissipation rate -<rho0| L |rho0> from a survival trace.

    Order 2 returns the plain weighted sum (error cubic in the action);
    order 3 returns the two-order combination 2*S3 - S2 (error quartic).
    """
    out = {}
    for n in orders:
        if n == 2:
            out[2] = s_sum(trace, 2)
        elif n == 3:
            out[3] = 2.0 * s_sum(trace, 3) - s_sum(trace, 2)
        else:
            raise ValueError(f"unsupported dissipator-element order {n}; use 2 or 3")
    return out


class PurityChange(NamedTuple):
    basic: float
    refined: float


def purity_change(trace: CycleTrace) -> PurityChange:
    """One-cycle purity-change estimates from a survival trace.

    ``basic`` is -2*S2.  ``refined`` adds the square correction
    -2*S2 + 2*S2^2, which is justified when the dissipator is Hermitian in
    Liouville space (dephasing, depolarizing); callers should flag it
    otherwise.
    """
    if trace.observable_id != trace.initial_state_id:
        raise ValueError(
            "purity_change needs a survival trace (observable equal to the initial state); "
            f"got observable {trace.observable_id!r} on state {trace.initial_state_id!r}"
        )
    s2 = s_sum(trace, 2)
    return PurityChange(basic=-2.0 * s2, refined=-2.0 * s2 + 2.0 * s2 * s2)


def _combination(trace: CycleTrace, order: int) -> float:
    if order == 2:
        return -s_sum(trace, 2)
    if order == 3:
        return -2.0 * s_sum(trace, 3) + s_sum(trace, 2)
    if order == 4:
        return -5.0 * s_sum(trace, 4) + 4.0 * s_sum(trace, 3)
    raise ValueError(f"unsupported dissipative-change order {order}; use 2, 3 or 4")


def dissipative_change(
    observable: Observable,
    rho0: DensityMatrix,
    trace: CycleTrace,
    orders=(2, 3, 4),
    trace_negative: CycleTrace | None = None,
) -> dict[int, float]:
    """Per-order estimates of the dissipative part of the observable's change.

    The observable must commute with the initial state, otherwise even the
    first-order coherent contribution survives and the combinations estimate
    nothing; violations are rejected outright.  Passing the trace of the
    sign-flipped drive averages away the terms odd in the Hamiltonian.
    """
    comm = observable.entries @ rho0.entries - rho0.entries @ observable.entries
    dev = float(np.linalg.norm(comm))
    if dev > COMMUTATION_TOL:
        raise ValueError(
            f"observable does not commute with the initial state "
            f"(||[A, rho0]|| = {dev:.3e} > {COMMUTATION_TOL:.0e}); "
            "the dissipative-change combinations are not applicable"
        )
    out = {}
    for n in orders:
        est = _combination(trace, n)
        if trace_negative is not None:
            est = 0.5 * (est + _combination(trace_negative, n))
        out[n] = est
    return out


def renyi2_change(trace: CycleTrace, order: int = 2) -> float:
    """Entanglement-entropy change of the kept part from a reset-protocol trace.

    Only traces produced under the reset protocol qualify; without the reset
    the reduced dynamics is not a periodic CP map and the weighted sum does
    not estimate the subsystem purity change.
    """
    if trace.protocol != "reset":
        raise ValueError(
            "renyi2_change requires a reset-protocol trace; the reduced dynamics of a "
            "plain cycle run is not periodic CP"
        )
    return RENYI2_SUM_FACTOR * s_sum(trace, order)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Bundle of estimator outputs for one circuit, ready for serialization."""

    s_values: dict[int, float]
    purity_change_basic: float | None = None
    purity_change_refined: float | None = None
    refined_hermitian_dissipator: bool | None = None
    dissipator_elements: dict[str, float] = field(default_factory=dict)
    hotspot_table: dict[str, dict[int, float]] = field(default_factory=dict)
    renyi2_est: float | None = None
    seed: int | None = None
    spec_hash: str | None = None

    def __post_init__(self):
        bad = set(self.s_values) - {2, 3, 4, 5}
        if bad:
            raise ValueError(f"report orders must be within {{2,3,4,5}}, got extra {sorted(bad)}")

    def as_dict(self) -> dict:
        return {
            "s_values": {str(k): v for k, v in sorted(self.s_values.items())},
            "purity_change_basic": self.purity_change_basic,
            "purity_change_refined": self.purity_change_refined,
            "refined_hermitian_dissipator": self.refined_hermitian_dissipator,
            "dissipator_elements": dict(sorted(self.dissipator_elements.items())),
            "hotspot_table": {
                k: {str(o): v for o, v in sorted(tbl.items())}
                for k, tbl in sorted(self.hotspot_table.items())
            },
            "renyi2_est": self.renyi2_est,
            "seed": self.seed,
            "spec_hash": self.spec_hash,
        }

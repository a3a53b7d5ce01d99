"""Sign-resolved probe readout from simulated quantum states.

A statevector is only defined up to a global phase, so absolute field signs
are pinned by shifting one reference component positive before evolving: the
reference amplitude then never changes sign, every other sign is chained to
it through a two-amplitude interference comparison, and the shift is removed
afterwards by subtracting its own evolved response (the shift is a full field
configuration and generally evolves; subtracting the evolved response is
exact by linearity).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IndeterminateSignError, RecoveryInfeasibleError
from .grid import Component, FieldLayout, FieldState
from .lifting import PRegister, recovery_bound

EXACT = "exact"


@dataclass(frozen=True)
class ProbeRequest:
    component: Component
    i: int
    j: int
    k: int = 0

    def same_point(self, other: "ProbeRequest") -> bool:
        return (self.component, self.i, self.j, self.k) == (
            other.component,
            other.i,
            other.j,
            other.k,
        )


@dataclass(frozen=True)
class MagnitudeEstimate:
    value: float
    stderr: float
    shots_used: int | str

    def __post_init__(self):
        assert self.value >= 0


@dataclass(frozen=True)
class SignedReading:
    magnitude: float
    sign: int
    value: float
    shots_used: int | str

    def __post_init__(self):
        assert self.magnitude >= 0


def offset_bound(u0: FieldState) -> float:
    """Certified bound on any component's excursion: the initial 2-norm."""
    return float(np.linalg.norm(u0.values))


def apply_offset(u0: FieldState, component: Component, c: float) -> FieldState:
    """Shift one component by +c at every active sample.

    ``c`` must exceed the largest negative excursion the component can reach;
    for a unit impulse that bound is the initial norm, and choosing ``c``
    exactly at the bound is allowed but flagged.
    """
    if c <= 0:
        raise ValueError("offset must be positive")
    bound = offset_bound(u0)
    if c <= bound:
        warnings.warn(
            f"offset {c} does not strictly exceed the certified excursion "
            f"bound {bound}; the shifted component may touch zero",
            stacklevel=2,
        )
    layout = u0.layout
    values = u0.values.copy()
    spec = layout.spec
    for k in range(spec.nz):
        for j in range(spec.ny):
            for i in range(spec.nx):
                if layout.is_active(component, i, j, k):
                    values[layout.flat_index(component, i, j, k)] += c
    return FieldState(values=values, layout=layout, time=u0.time)


def unit_offset_state(layout: FieldLayout, component: Component) -> FieldState:
    """Unit shift configuration of one component (all active samples at 1)."""
    values = np.zeros(layout.state_len)
    spec = layout.spec
    for k in range(spec.nz):
        for j in range(spec.ny):
            for i in range(spec.nx):
                if layout.is_active(component, i, j, k):
                    values[layout.flat_index(component, i, j, k)] = 1.0
    return FieldState(values=values, layout=layout, time=0.0)


def remove_offset(
    evolved: FieldState, c: float, offset_response: FieldState
) -> FieldState:
    """Subtract the evolved shift response: physical = evolved - c * response.

    The response must be the evolution of the unit shift to the same time;
    naive constant subtraction is only correct at t = 0.
    """
    if c <= 0:
        raise ValueError("offset must be positive")
    if abs(evolved.time - offset_response.time) > 1e-9:
        raise ValueError(
            f"offset response at t={offset_response.time} does not match "
            f"field at t={evolved.time}"
        )
    return FieldState(
        values=evolved.values - c * offset_response.values,
        layout=evolved.layout,
        time=evolved.time,
    )


def magnitude_at(
    psi: np.ndarray,
    flat_index: int,
    ancilla_index: int,
    system_dim: int,
    scale: float,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> MagnitudeEstimate:
    """|amplitude| at one probe slot, rescaled to physical units.

    ``scale`` carries the recovery factor e^{p*} times the recorded global
    norm.  With ``shots`` the estimate comes from simulated measurement
    frequencies with its binomial standard error.
    """
    amp = psi[ancilla_index * system_dim + flat_index]
    if shots is None:
        return MagnitudeEstimate(abs(amp) * scale, 0.0, EXACT)
    rng = rng or np.random.default_rng()
    p = min(abs(amp) ** 2, 1.0)
    hits = rng.binomial(shots, p)
    phat = hits / shots
    value = math.sqrt(phat) * scale
    if phat > 0:
        se = scale * math.sqrt(phat * (1 - phat) / shots) / (2 * math.sqrt(phat))
    else:
        se = scale * 0.5 / math.sqrt(shots)
    return MagnitudeEstimate(value, se, shots)


def _aligned_amplitudes(psi, ref_index, target_index, phase_tol):
    a_r = psi[ref_index]
    a_t = psi[target_index]
    if abs(a_r) == 0.0:
        raise IndeterminateSignError(
            "reference amplitude vanishes; global phase cannot be fixed",
            abs(a_t) ** 2 / 2,
            abs(a_t) ** 2 / 2,
        )
    phase = a_r / abs(a_r)
    at = a_t * phase.conjugate()
    if abs(at.imag) > phase_tol * max(abs(at), 1.0e-30):
        raise ValueError(
            f"relative phase of probe amplitudes is not 0 or pi "
            f"(residual imaginary part {at.imag:.3e})"
        )
    return abs(a_r), at.real


def relative_sign(
    psi: np.ndarray,
    ref_index: int,
    target_index: int,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    phase_tol: float = 1e-6,
) -> int:
    """Interference comparison of two real amplitudes: +1 same sign, -1 opposite.

    Compares estimators of the squared sum and squared difference of the two
    magnitudes; whichever dominates decides the sign.  A tie (exact mode) or
    a gap below three combined standard errors (shot mode) is indeterminate.
    """
    ar, at = _aligned_amplitudes(psi, ref_index, target_index, phase_tol)
    e_plus = (ar + at) ** 2 / 2.0
    e_minus = (ar - at) ** 2 / 2.0
    if shots is None:
        if e_plus == e_minus:
            raise IndeterminateSignError(
                "interference estimates tie exactly", e_plus, e_minus
            )
        return 1 if e_plus > e_minus else -1
    rng = rng or np.random.default_rng()
    rest = max(1.0 - e_plus - e_minus, 0.0)
    n_plus, n_minus, _ = rng.multinomial(shots, [e_plus, e_minus, rest])
    if abs(int(n_plus) - int(n_minus)) < 3.0 * math.sqrt(n_plus + n_minus):
        raise IndeterminateSignError(
            f"sign gap below the shot-noise floor ({n_plus} vs {n_minus} "
            f"of {shots})",
            n_plus / shots,
            n_minus / shots,
        )
    return 1 if n_plus > n_minus else -1


@dataclass(frozen=True)
class PipelineState:
    """Read-only measurement context for one recovered instant."""

    psi: np.ndarray
    layout: FieldLayout
    reg: PRegister
    scale: float
    time: float
    offset_component: Component
    offset_c: float
    offset_response: FieldState
    reference: ProbeRequest
    weights: np.ndarray | None = None

    @property
    def system_dim(self) -> int:
        return self.layout.state_len

    @property
    def ancilla_index(self) -> int:
        return self.reg.n_points - 1

    def probe_scale(self, flat_index: int) -> float:
        """Physical rescale for one slot (undoes a similarity weighting)."""
        if self.weights is None:
            return self.scale
        return self.scale / float(self.weights[flat_index])


def pipeline_state(
    runner,
    offset_c: float,
    offset_response: FieldState,
    reference: ProbeRequest,
    offset_component: Component = Component.EZ,
) -> PipelineState:
    """Measurement context from a step runner at its current time."""
    bound = recovery_bound(runner.pair, runner.time)
    p_star = runner.reg.p_values[-1]
    if p_star <= bound:
        raise RecoveryInfeasibleError(
            f"recovery point {p_star:.4g} below spectral bound {bound:.4g}",
            required_p=bound,
        )
    return PipelineState(
        psi=runner.psi.values,
        layout=runner.layout,
        reg=runner.reg,
        scale=math.exp(p_star) * runner.norm,
        time=runner.time,
        offset_component=offset_component,
        offset_c=offset_c,
        offset_response=offset_response,
        reference=reference,
        weights=runner.weights,
    )


def signed_field_at(
    request: ProbeRequest,
    pipe: PipelineState,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> SignedReading:
    """Full probe readout: magnitude, chained sign, and offset removal.

    The reference component's sign is absolute (+1) by the offset guarantee;
    the target sign is taken relative to it.  An exactly vanishing target
    amplitude reads as zero.
    """
    layout = pipe.layout
    flat_t = layout.flat_index(request.component, request.i, request.j, request.k)
    flat_r = layout.flat_index(
        pipe.reference.component, pipe.reference.i, pipe.reference.j, pipe.reference.k
    )
    est = magnitude_at(
        pipe.psi,
        flat_t,
        pipe.ancilla_index,
        pipe.system_dim,
        pipe.probe_scale(flat_t),
        shots,
        rng,
    )
    base = pipe.ancilla_index * pipe.system_dim
    if request.same_point(pipe.reference):
        sign = 1
    elif shots is None and pipe.psi[base + flat_t] == 0.0:
        sign = 1  # exact zero: sign is immaterial
    else:
        sign = relative_sign(pipe.psi, base + flat_r, base + flat_t, shots, rng)
    raw = sign * est.value
    correction = pipe.offset_c * pipe.offset_response.at(
        request.component, request.i, request.j, request.k
    )
    value = raw - correction
    return SignedReading(
        magnitude=abs(value),
        sign=1 if value >= 0 else -1,
        value=value,
        shots_used=est.shots_used,
    )

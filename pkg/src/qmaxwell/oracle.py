"""Classical ground truth and splitting-error tables.

The reference evolution is the exact matrix exponential: dense scaling and
squaring below the desk-scale threshold, Krylov-subspace action above it.
Error tables run the circuit pipeline against this reference over a grid of
step sizes and horizons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .grid import Component, FieldLayout, FieldState, GridSpec
from .lifting import PRegister
from .operators import SparseOperator
from .trotter import TrotterRunner

log = logging.getLogger(__name__)

_DENSE_LIMIT = 4096
_DIMENSION_CAP = 1 << 16


def exact_evolution(a, u0, t: float):
    """u(t) = exp(A t) u0; dense below dimension 4096, Krylov action above."""
    m = a.tocsr() if isinstance(a, SparseOperator) else sp.csr_matrix(a)
    dim = m.shape[0]
    if dim > _DIMENSION_CAP:
        raise ValueError(f"dimension {dim} exceeds the desk-scale cap {_DIMENSION_CAP}")
    values = u0.values if isinstance(u0, FieldState) else np.asarray(u0, dtype=float)
    if t == 0.0:
        out = values.copy()
    elif dim < _DENSE_LIMIT:
        out = expm(m.toarray() * t) @ values
    else:
        out = expm_multiply(m.tocsc() * t, values)
    if isinstance(u0, FieldState):
        return FieldState(values=out, layout=u0.layout, time=u0.time + t)
    return out


def rk4_evolution(a, u0, t: float, dt: float = 1e-4):
    """Explicit fixed-step integration; independent cross-check of the exponential."""
    m = a.tocsr() if isinstance(a, SparseOperator) else sp.csr_matrix(a)
    values = u0.values if isinstance(u0, FieldState) else np.asarray(u0, dtype=float)
    steps = max(1, round(t / dt))
    h = t / steps
    v = values.astype(float)
    for _ in range(steps):
        k1 = m @ v
        k2 = m @ (v + 0.5 * h * k1)
        k3 = m @ (v + 0.5 * h * k2)
        k4 = m @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if isinstance(u0, FieldState):
        return FieldState(values=v, layout=u0.layout, time=u0.time + t)
    return v


def krylov_evolution(a, u0, t: float):
    """Krylov-subspace action regardless of size (cross-validation helper)."""
    m = a.tocsr() if isinstance(a, SparseOperator) else sp.csr_matrix(a)
    values = u0.values if isinstance(u0, FieldState) else np.asarray(u0, dtype=float)
    out = expm_multiply(m.tocsc() * t, values)
    if isinstance(u0, FieldState):
        return FieldState(values=out, layout=u0.layout, time=u0.time + t)
    return out


@dataclass(frozen=True)
class ErrorRow:
    time: float
    dt: float
    errors: dict


@dataclass(frozen=True)
class ErrorTable:
    components: tuple[Component, ...]
    rows: tuple[ErrorRow, ...]

    def filtered(self, dt: float) -> list[ErrorRow]:
        return [r for r in self.rows if r.dt == dt]

    def check_monotone(self) -> bool:
        """Errors should not shrink with the horizon; violations are logged."""
        ok = True
        for dt in sorted({r.dt for r in self.rows}):
            rows = sorted(self.filtered(dt), key=lambda r: r.time)
            for a, b in zip(rows, rows[1:]):
                for comp in self.components:
                    if b.errors[comp] < a.errors[comp]:
                        log.warning(
                            "error for %s at dt=%g shrank from T=%g to T=%g",
                            comp.value, dt, a.time, b.time,
                        )
                        ok = False
        return ok

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            names = ",".join(c.value for c in self.components)
            fh.write(f"time,dt,{names}\n")
            for r in self.rows:
                errs = ",".join(repr(float(r.errors[c])) for c in self.components)
                fh.write(f"{r.time!r},{r.dt!r},{errs}\n")


def component_errors(state: FieldState, reference: FieldState) -> dict:
    """Per-component 2-norm distance between two field states."""
    layout = state.layout
    out = {}
    for comp in layout.components:
        diff = state.component(comp) - reference.component(comp)
        out[comp] = float(np.linalg.norm(diff))
    return out


def trotter_error_table(
    a: SparseOperator,
    u0: FieldState,
    dts,
    times,
    reg: PRegister,
    recovery_mode: str = "single",
    check_norm: bool = False,
) -> ErrorTable:
    """Run the circuit pipeline over (dt, T) pairs and tabulate recovery errors.

    Horizons must be multiples of each step size.  One runner per dt walks
    the requested horizons in order.
    """
    layout = u0.layout
    times = sorted(times)
    rows = []
    for dt in dts:
        runner = TrotterRunner.from_generator(a, u0, reg, dt, layout, check_norm)
        for t_target in times:
            steps = round(t_target / dt)
            if abs(steps * dt - t_target) > 1e-9:
                raise ValueError(f"horizon {t_target} is not a multiple of dt={dt}")
            runner.advance(steps - runner.steps_done)
            recovered = runner.recover(mode=recovery_mode)
            reference = exact_evolution(a, u0, t_target)
            rows.append(
                ErrorRow(time=t_target, dt=dt, errors=component_errors(recovered, reference))
            )
    table = ErrorTable(components=layout.components, rows=tuple(rows))
    table.check_monotone()
    return table


_PLANES = {"xy": (1, 0), "xz": (2, 0), "yz": (2, 1)}


def snapshot(state: FieldState, component: Component, plane: str = "xy", index: int = 0):
    """Extract one component on the full 2D grid or a 3D cross-section.

    ``plane`` selects the cut in 3D ("xy" at a z index, "xz" at a y index,
    "yz" at an x index); rows of the returned array run along the plane's
    second letter, columns along the first.
    """
    spec = state.layout.spec
    arr = state.component(component)  # (nz, ny, nx)
    if spec.dim == 2:
        return arr[0].copy()
    if plane not in _PLANES:
        raise ValueError(f"unknown plane {plane!r}")
    limit = {"xy": spec.nz, "xz": spec.ny, "yz": spec.nx}[plane]
    if not 0 <= index < limit:
        raise ValueError(f"plane index {index} out of range for {plane}")
    if plane == "xy":
        return arr[index].copy()
    if plane == "xz":
        return arr[:, index, :].copy()
    return arr[:, :, index].copy()


def normalized_cross_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two field snapshots (scale-invariant)."""
    av = np.asarray(a, dtype=float).ravel()
    bv = np.asarray(b, dtype=float).ravel()
    na, nb = np.linalg.norm(av), np.linalg.norm(bv)
    if na == 0 or nb == 0:
        return 0.0
    return float(av @ bv / (na * nb))

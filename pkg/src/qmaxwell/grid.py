"""Staggered-grid field layout and index arithmetic.

Electric components live at integer positions along their own axis offset by
half a cell, magnetic components at the complementary half-offsets.  Every
component is stored as a full ``nx*ny*nz`` block; samples that the staggering
removes (one per half-offset axis) are kept as zero pads at the high end of
that axis so the state length stays a power of two.

State layout (x fastest):

* 2D: ``[E_z, H_x, H_y, pad]`` blocks, total length ``4*nx*ny``
* 3D: ``[E_x, E_y, E_z, H_x, H_y, H_z, pad, pad]``, total ``8*nx*ny*nz``

All types here are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import GeometryError, GridError, PlacementError

PMC = "pmc"
PEC = "pec"


class Component(Enum):
    EX = "Ex"
    EY = "Ey"
    EZ = "Ez"
    HX = "Hx"
    HY = "Hy"
    HZ = "Hz"

    def __str__(self) -> str:
        return self.value


COMPONENTS_2D = (Component.EZ, Component.HX, Component.HY)
COMPONENTS_3D = (
    Component.EX,
    Component.EY,
    Component.EZ,
    Component.HX,
    Component.HY,
    Component.HZ,
)

# Axes (0=x, 1=y, 2=z) along which a component sits at half-integer offsets.
_STAGGER_3D = {
    Component.EX: (0,),
    Component.EY: (1,),
    Component.EZ: (2,),
    Component.HX: (1, 2),
    Component.HY: (0, 2),
    Component.HZ: (0, 1),
}
_STAGGER_2D = {
    Component.EZ: (),
    Component.HX: (1,),
    Component.HY: (0,),
}


def component_name(name: str) -> Component:
    """Look up a component from its short name, case-insensitively."""
    for c in Component:
        if c.value.lower() == name.lower():
            return c
    raise GridError(f"unknown field component {name!r}")


@dataclass(frozen=True)
class Boundaries:
    """Per-face boundary conditions, one of ``"pmc"`` or ``"pec"``.

    The z faces are inert in 2D mode (the retained components satisfy any
    z-face condition identically) and are kept for bookkeeping only.
    """

    xlo: str = PMC
    xhi: str = PMC
    ylo: str = PMC
    yhi: str = PMC
    zlo: str = PMC
    zhi: str = PMC

    def __post_init__(self):
        for face in ("xlo", "xhi", "ylo", "yhi", "zlo", "zhi"):
            if getattr(self, face) not in (PMC, PEC):
                raise GridError(f"boundary {face} must be 'pmc' or 'pec'")

    def face(self, axis: int, side: int) -> str:
        """Condition at ``axis`` (0..2) and ``side`` (0=lo, 1=hi)."""
        return (
            (self.xlo, self.xhi),
            (self.ylo, self.yhi),
            (self.zlo, self.zhi),
        )[axis][side]


@dataclass(frozen=True)
class ScattererBox:
    """Axis-aligned internal body with walls on integer node planes.

    Samples strictly inside the open box ``(lo, hi)`` are frozen at zero;
    samples on the wall planes stay active.  ``faces`` is the condition the
    body's lateral walls impose on the surrounding field.
    """

    lo: tuple[int, int]
    hi: tuple[int, int]
    faces: str = PMC

    def __post_init__(self):
        if self.faces not in (PMC, PEC):
            raise GridError("scatterer faces must be 'pmc' or 'pec'")
        if len(self.lo) != 2 or len(self.hi) != 2:
            raise GridError("scatterer corners must be (i, j) pairs")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise GridError("scatterer hi corner must not precede lo corner")

    @property
    def is_empty(self) -> bool:
        """True when the box encloses no grid sample (zero volume)."""
        return any(h - l < 1 for l, h in zip(self.lo, self.hi))

    def contains(self, x: float, y: float) -> bool:
        """Strict interior test on physical (possibly half-integer) coordinates."""
        return self.lo[0] < x < self.hi[0] and self.lo[1] < y < self.hi[1]


@dataclass(frozen=True)
class GridSpec:
    """Computational grid: sizes, spacings, boundary conditions, material constants.

    ``nx``, ``ny`` (and ``nz`` in 3D) count samples per axis and must be
    powers of two; ``nz`` is 1 in 2D mode.
    """

    nx: int
    ny: int
    nz: int = 1
    dim: int = 2
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    boundaries: Boundaries = field(default_factory=Boundaries)
    scatterer: ScattererBox | None = None
    epsilon: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError("dim must be 2 or 3")
        axes = [self.nx, self.ny] + ([self.nz] if self.dim == 3 else [])
        for n in axes:
            if n < 2 or n & (n - 1):
                raise GridError(f"axis size {n} is not a power of two >= 2")
        if self.dim == 2 and self.nz != 1:
            raise GridError("nz must be 1 in 2D mode")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise GridError("grid spacings must be positive")
        if self.epsilon <= 0 or self.mu <= 0:
            raise GridError("epsilon and mu must be positive")
        if self.scatterer is not None:
            if self.dim != 2:
                raise GeometryError("internal scatterers are supported in 2D only")
            lo, hi = self.scatterer.lo, self.scatterer.hi
            if not (
                0 < lo[0] and hi[0] < self.nx - 1 and 0 < lo[1] and hi[1] < self.ny - 1
            ):
                raise GeometryError(
                    "scatterer walls must lie strictly inside the outer boundary"
                )

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def components(self) -> tuple[Component, ...]:
        return COMPONENTS_2D if self.dim == 2 else COMPONENTS_3D

    def staggered_axes(self, component: Component) -> tuple[int, ...]:
        table = _STAGGER_2D if self.dim == 2 else _STAGGER_3D
        if component not in table:
            raise GridError(f"component {component} not present in {self.dim}D mode")
        return table[component]


@dataclass(frozen=True)
class FieldLayout:
    """Mapping between (component, i, j, k) samples and flat state indices."""

    spec: GridSpec

    @property
    def block_size(self) -> int:
        return self.spec.nx * self.spec.ny * self.spec.nz

    @property
    def n_blocks(self) -> int:
        """Block count including zero pads (4 in 2D, 8 in 3D)."""
        return 4 if self.spec.dim == 2 else 8

    @property
    def state_len(self) -> int:
        return self.n_blocks * self.block_size

    @property
    def components(self) -> tuple[Component, ...]:
        return self.spec.components

    def block_index(self, component: Component) -> int:
        try:
            return self.components.index(component)
        except ValueError:
            raise GridError(
                f"component {component} not present in {self.spec.dim}D mode"
            ) from None

    def flat_index(self, component: Component, i: int, j: int, k: int = 0) -> int:
        """Flat state index of one stored sample (pads addressable)."""
        spec = self.spec
        if not (0 <= i < spec.nx and 0 <= j < spec.ny and 0 <= k < spec.nz):
            raise GridError(
                f"index ({i},{j},{k}) out of range for grid {spec.shape}"
            )
        block = self.block_index(component)
        return block * self.block_size + (k * spec.ny + j) * spec.nx + i

    def position(self, component: Component, i: int, j: int, k: int = 0):
        """Physical coordinates of a sample, including half offsets."""
        stag = self.spec.staggered_axes(component)
        return tuple(
            idx + (0.5 if ax in stag else 0.0) for ax, idx in enumerate((i, j, k))
        )

    def is_pad(self, component: Component, i: int, j: int, k: int = 0) -> bool:
        """True for the zero-pad slot at the high end of a half-offset axis."""
        stag = self.spec.staggered_axes(component)
        idx = (i, j, k)
        n = self.spec.shape
        return any(idx[ax] == n[ax] - 1 for ax in stag)

    def in_scatterer(self, component: Component, i: int, j: int, k: int = 0) -> bool:
        body = self.spec.scatterer
        if body is None or body.is_empty:
            return False
        x, y, _ = self.position(component, i, j, k)
        return body.contains(x, y)

    def on_pec_wall(self, component: Component, i: int, j: int, k: int = 0) -> bool:
        """True for a tangential-E sample pinned to zero by a PEC outer face."""
        if component in (Component.HX, Component.HY, Component.HZ):
            return False
        spec = self.spec
        comp_axis = {"Ex": 0, "Ey": 1, "Ez": 2}[component.value]
        idx = (i, j, k)
        n_axes = 2 if spec.dim == 2 else 3
        for axis in range(n_axes):
            if axis == comp_axis:
                continue
            if idx[axis] == 0 and spec.boundaries.face(axis, 0) == PEC:
                return True
            if idx[axis] == spec.shape[axis] - 1 and spec.boundaries.face(axis, 1) == PEC:
                return True
        return False

    def is_active(self, component: Component, i: int, j: int, k: int = 0) -> bool:
        """True for a free degree of freedom (not pad, frozen, or excluded)."""
        return not (
            self.is_pad(component, i, j, k)
            or self.in_scatterer(component, i, j, k)
            or self.on_pec_wall(component, i, j, k)
        )

    def active_mask(self) -> np.ndarray:
        """Boolean mask over the full state; False marks structurally-zero slots."""
        mask = np.zeros(self.state_len, dtype=bool)
        spec = self.spec
        for comp in self.components:
            for k in range(spec.nz):
                for j in range(spec.ny):
                    for i in range(spec.nx):
                        if self.is_active(comp, i, j, k):
                            mask[self.flat_index(comp, i, j, k)] = True
        return mask

    def component_values(self, values: np.ndarray, component: Component) -> np.ndarray:
        """View of one component's block shaped (nz, ny, nx)."""
        b = self.block_index(component)
        spec = self.spec
        block = values[b * self.block_size : (b + 1) * self.block_size]
        return block.reshape(spec.nz, spec.ny, spec.nx)


@dataclass(frozen=True)
class FieldState:
    """Flattened padded field stack at one instant.

    ``values`` is treated as immutable; operations return new states.
    """

    values: np.ndarray
    layout: FieldLayout
    time: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.layout.state_len,):
            raise GridError(
                f"state length {self.values.shape} does not match layout "
                f"({self.layout.state_len},)"
            )

    def component(self, component: Component) -> np.ndarray:
        return self.layout.component_values(self.values, component)

    def at(self, component: Component, i: int, j: int, k: int = 0) -> float:
        return float(self.values[self.layout.flat_index(component, i, j, k)])


def flat_index(layout: FieldLayout, component: Component, i: int, j: int, k: int = 0) -> int:
    return layout.flat_index(component, i, j, k)


def qubit_count(spec: GridSpec) -> int:
    """Register width needed for the padded state (exact by the power-of-two invariants)."""
    length = FieldLayout(spec).state_len
    n = int(math.log2(length))
    assert 1 << n == length
    return n


def pack_initial_condition(
    spec: GridSpec,
    impulses: list[tuple[Component, int, int, int, float]],
) -> FieldState:
    """Build an initial state from point impulses.

    Each impulse is ``(component, i, j, k, amplitude)``; ``k`` must be 0 in
    2D mode.  Impulses on pad slots, frozen PEC-wall samples, or inside a
    scatterer are placement errors.
    """
    layout = FieldLayout(spec)
    values = np.zeros(layout.state_len)
    for comp, i, j, k, amp in impulses:
        if spec.dim == 2 and k != 0:
            raise PlacementError(f"k={k} impulse index in 2D mode")
        idx = layout.flat_index(comp, i, j, k)
        if layout.is_pad(comp, i, j, k):
            raise PlacementError(f"impulse at {comp}({i},{j},{k}) is a pad slot")
        if layout.in_scatterer(comp, i, j, k):
            raise PlacementError(f"impulse at {comp}({i},{j},{k}) lies inside the scatterer")
        if layout.on_pec_wall(comp, i, j, k):
            raise PlacementError(f"impulse at {comp}({i},{j},{k}) sits on a PEC wall")
        values[idx] += amp
    return FieldState(values=values, layout=layout, time=0.0)


def unpack_impulses(state: FieldState) -> list[tuple[Component, int, int, int, float]]:
    """Inverse of :func:`pack_initial_condition` for states that are sparse impulses."""
    layout = state.layout
    spec = layout.spec
    out = []
    nz = np.nonzero(state.values)[0]
    for flat in nz:
        block, rest = divmod(int(flat), layout.block_size)
        k, rest = divmod(rest, spec.ny * spec.nx)
        j, i = divmod(rest, spec.nx)
        comp = layout.components[block]
        out.append((comp, i, j, k, float(state.values[flat])))
    return out

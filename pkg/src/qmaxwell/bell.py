"""Exact decomposition of Hermitian operators into rank-one tensor strings.

Every operator of dimension ``2^n`` splits exactly into terms of the form
``coeff * s_1 (x) ... (x) s_n`` with each factor one of ``|0><0|``,
``|0><1|``, ``|1><0|``, ``|1><1|`` or the identity.  The recursion peels the
most significant qubit and merges the two diagonal sub-blocks wherever their
entries coincide bit-for-bit, so banded difference operators come out with a
term count linear in the qubit number instead of one term per matrix entry;
boundary and scatterer deviations fall out as a handful of extra strings.

Each off-diagonal string appears together with its adjoint.  A matched pair
compiles into one circuit block: a basis change built from a superposition
gate, a fan-out of flips, and bit-fixing X gates, conjugating one
multi-controlled phase rotation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import HermiticityError
from .operators import SparseOperator

ID = "i"
S00 = "s00"
S01 = "s01"
S10 = "s10"
S11 = "s11"

_SIGMA = {
    ID: np.eye(2, dtype=complex),
    S00: np.array([[1, 0], [0, 0]], dtype=complex),
    S01: np.array([[0, 1], [0, 0]], dtype=complex),
    S10: np.array([[0, 0], [1, 0]], dtype=complex),
    S11: np.array([[0, 0], [0, 1]], dtype=complex),
}

_ADJOINT_TAG = {ID: ID, S00: S00, S11: S11, S01: S10, S10: S01}

# Row/column bit carried by each factor tag (None = unconstrained).
_TAG_BITS = {ID: (None, None), S00: (0, 0), S01: (0, 1), S10: (1, 0), S11: (1, 1)}


@dataclass(frozen=True)
class TensorTerm:
    """One tensor-product string; ``factors[0]`` acts on the most significant qubit."""

    coefficient: complex
    factors: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def is_diagonal(self) -> bool:
        return all(f not in (S01, S10) for f in self.factors)

    def adjoint_factors(self) -> tuple[str, ...]:
        return tuple(_ADJOINT_TAG[f] for f in self.factors)

    def matrix(self) -> np.ndarray:
        return self.coefficient * reduce(np.kron, (_SIGMA[f] for f in self.factors))


def _entry_dict(h) -> tuple[dict, int]:
    if isinstance(h, SparseOperator):
        m = h.tocsr()
    elif sp.issparse(h):
        m = h.tocsr()
    else:
        m = sp.csr_matrix(np.asarray(h))
    if m.shape[0] != m.shape[1]:
        raise ValueError("operator must be square")
    dim = m.shape[0]
    if dim < 1 or dim & (dim - 1):
        raise ValueError(f"dimension {dim} is not a power of two")
    coo = m.tocoo()
    entries = {}
    for r, c, v in zip(coo.row, coo.col, coo.data):
        v = complex(v)
        if v != 0:
            entries[(int(r), int(c))] = v
    return entries, int(math.log2(dim))


def _tensorize_entries(entries: dict, nq: int):
    if not entries:
        return []
    if nq == 0:
        return [((), entries[(0, 0)])]
    half = 1 << (nq - 1)
    groups = {S00: {}, S01: {}, S10: {}, S11: {}}
    tag_of = ((S00, S01), (S10, S11))
    for (r, c), v in entries.items():
        rb, cb = r >= half, c >= half
        groups[tag_of[rb][cb]][(r - rb * half, c - cb * half)] = v
    # Bit-identical entries shared by both diagonal sub-blocks lift to an
    # identity factor; only the deviations stay behind.
    d00, d11 = groups[S00], groups[S11]
    common = {k: v for k, v in d00.items() if d11.get(k) == v}
    if common:
        groups[S00] = {k: v for k, v in d00.items() if common.get(k) != v}
        groups[S11] = {k: v for k, v in d11.items() if common.get(k) != v}
    out = []
    for tag, sub in ((ID, common), *groups.items()):
        for factors, coeff in _tensorize_entries(sub, nq - 1):
            out.append(((tag,) + factors, coeff))
    return out


def tensorize(h) -> list[TensorTerm]:
    """Decompose a ``2^n``-dimensional operator exactly into tensor strings.

    The sum of the returned terms reproduces the input; strings are unique
    and sorted for determinism.  Diagonal strings (no flip factors) are
    permitted and flagged via :attr:`TensorTerm.is_diagonal`.
    """
    entries, nq = _entry_dict(h)
    raw = _tensorize_entries(entries, nq)
    raw.sort(key=lambda fc: fc[0])
    return [TensorTerm(coefficient=c, factors=f) for f, c in raw]


@dataclass(frozen=True)
class AdjointPair:
    """Matched ``(S, S^dagger)`` string pair of a Hermitian operator.

    The pair contributes ``c*T + conj(c)*T^dagger`` where ``T`` is the
    representative string; ``weight`` and ``phase`` are its polar parts, so
    the contribution is ``weight * (e^{i phase} T + h.c.)``.
    """

    coefficient: complex
    factors: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def weight(self) -> float:
        return abs(self.coefficient)

    @property
    def phase(self) -> float:
        return cmath.phase(self.coefficient)

    def matrix(self) -> np.ndarray:
        t = TensorTerm(self.coefficient, self.factors).matrix()
        return t + t.conj().T


def pair_adjoints(terms) -> tuple[list[AdjointPair], list[TensorTerm]]:
    """Match every off-diagonal string with its adjoint.

    Returns the matched pairs plus the diagonal residue.  An off-diagonal
    string without its adjoint partner, a mismatched coefficient, or a
    diagonal string with a non-real coefficient all mean the input was not
    Hermitian and raise :class:`HermiticityError`.
    """
    diag = []
    by_factors = {}
    for t in terms:
        if t.is_diagonal:
            if abs(t.coefficient.imag) > 1e-12 * max(1.0, abs(t.coefficient)):
                raise HermiticityError(
                    f"diagonal term {t.factors} has complex coefficient {t.coefficient}"
                )
            diag.append(t)
        else:
            if t.factors in by_factors:
                raise HermiticityError(f"duplicate term {t.factors}")
            by_factors[t.factors] = t
    pairs = []
    seen = set()
    for factors, t in by_factors.items():
        if factors in seen:
            continue
        adj = t.adjoint_factors()
        partner = by_factors.get(adj)
        if partner is None:
            raise HermiticityError(f"term {factors} has no adjoint partner")
        if abs(partner.coefficient - t.coefficient.conjugate()) > 1e-12 * max(
            1.0, abs(t.coefficient)
        ):
            raise HermiticityError(
                f"adjoint coefficients differ for {factors}: "
                f"{t.coefficient} vs {partner.coefficient}"
            )
        seen.add(factors)
        seen.add(adj)
        rep = t if factors <= adj else partner
        pairs.append(AdjointPair(coefficient=rep.coefficient, factors=rep.factors))
    pairs.sort(key=lambda p: p.factors)
    return pairs, diag


BELL = "bell"
DIAGONAL = "diagonal"

CTRL_NONE = "none"
CTRL_ZERO = "control-0"
CTRL_ONE = "control-1"
CTRL_BELL = "bell-control"


@dataclass(frozen=True)
class BellBlock:
    """Compiled circuit block for one adjoint pair and a time step.

    ``a_bits``/``b_bits`` are qubit-indexed (index 0 = least significant
    qubit) with -1 marking identity positions.  ``theta`` is the rotation
    weight ``2 * weight * dt`` for flip blocks and the phase ``coeff * dt``
    for diagonal blocks; ``phase`` carries the pair's coefficient phase.
    """

    kind: str
    n: int
    a_bits: tuple[int, ...]
    b_bits: tuple[int, ...]
    flip_qubits: tuple[int, ...]
    control_spec: tuple[str, ...]
    target: int
    theta: float
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in (BELL, DIAGONAL):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.kind == BELL:
            assert self.flip_qubits, "flip blocks need at least one flip qubit"
            assert all(
                self.a_bits[q] != self.b_bits[q] for q in self.flip_qubits
            ), "a and b must differ on every flip qubit"


def build_bell_block(pair, dt: float) -> BellBlock:
    """Compile an adjoint pair (or diagonal term) into a circuit block.

    Flip qubits carry the basis change; qubits holding projector factors
    become polarity controls; identity qubits are untouched.  A term with an
    empty flip set is routed to a diagonal-phase block (real coefficient
    required); a term proportional to the identity has no circuit meaning
    and is rejected.
    """
    if isinstance(pair, TensorTerm) and not pair.is_diagonal:
        raise ValueError("off-diagonal terms must be paired before compilation")
    factors = pair.factors
    n = len(factors)
    a_bits, b_bits, flips, spec = [], [], [], []
    for q in range(n):
        tag = factors[n - 1 - q]
        ab, bb = _TAG_BITS[tag]
        a_bits.append(-1 if ab is None else ab)
        b_bits.append(-1 if bb is None else bb)
        if tag in (S01, S10):
            flips.append(q)
            spec.append(CTRL_BELL)
        elif tag == S00:
            spec.append(CTRL_ZERO)
        elif tag == S11:
            spec.append(CTRL_ONE)
        else:
            spec.append(CTRL_NONE)
    if flips:
        return BellBlock(
            kind=BELL,
            n=n,
            a_bits=tuple(a_bits),
            b_bits=tuple(b_bits),
            flip_qubits=tuple(flips),
            control_spec=tuple(spec),
            target=min(flips),
            theta=2.0 * pair.weight * dt,
            phase=pair.phase,
        )
    coeff = pair.coefficient
    if abs(coeff.imag) > 1e-12 * max(1.0, abs(coeff)):
        raise HermiticityError(f"diagonal block needs a real coefficient, got {coeff}")
    constrained = [q for q in range(n) if spec[q] != CTRL_NONE]
    if not constrained:
        raise ValueError("identity term cannot be realized as a circuit block")
    return BellBlock(
        kind=DIAGONAL,
        n=n,
        a_bits=tuple(a_bits),
        b_bits=tuple(b_bits),
        flip_qubits=(),
        control_spec=tuple(spec),
        target=min(constrained),
        theta=coeff.real * dt,
        phase=0.0,
    )


def compile_blocks(h, dt: float) -> list[BellBlock]:
    """Tensorize, pair, and compile an operator into circuit blocks."""
    pairs, diag = pair_adjoints(tensorize(h))
    return [build_bell_block(p, dt) for p in pairs] + [
        build_bell_block(t, dt) for t in diag
    ]


def reconstruct(items) -> np.ndarray:
    """Sum term (or pair) matrices densely; verification helper for small dims."""
    items = list(items)
    if not items:
        return np.zeros((1, 1), dtype=complex)
    dim = 1 << items[0].n
    out = np.zeros((dim, dim), dtype=complex)
    for it in items:
        out += it.matrix()
    return out


def block_generator(block: BellBlock, dt: float) -> np.ndarray:
    """Dense Hermitian generator whose ``exp(i * dt * .)`` the block realizes."""
    n = block.n
    if block.kind == DIAGONAL:
        coeff = block.theta / dt
        factors = []
        for q in reversed(range(n)):
            s = block.control_spec[q]
            factors.append({CTRL_NONE: ID, CTRL_ZERO: S00, CTRL_ONE: S11}[s])
        return TensorTerm(coeff, tuple(factors)).matrix()
    w = block.theta / (2.0 * dt)
    c = w * cmath.exp(1j * block.phase)
    factors = []
    for q in reversed(range(n)):
        s = block.control_spec[q]
        if s == CTRL_BELL:
            factors.append(S01 if block.a_bits[q] == 0 else S10)
        else:
            factors.append({CTRL_NONE: ID, CTRL_ZERO: S00, CTRL_ONE: S11}[s])
    t = TensorTerm(c, tuple(factors)).matrix()
    return t + t.conj().T


def blocks_to_json(blocks) -> list[dict]:
    """JSON-ready description of compiled blocks (documented in the README)."""

    def bits_str(bits):
        return "".join("x" if b < 0 else str(b) for b in bits)

    out = []
    for b in blocks:
        out.append(
            {
                "kind": b.kind,
                "n_qubits": b.n,
                "a": bits_str(b.a_bits),
                "b": bits_str(b.b_bits),
                "flip_qubits": list(b.flip_qubits),
                "controls": list(b.control_spec),
                "target": b.target,
                "theta": b.theta,
                "phase": b.phase,
            }
        )
    return out

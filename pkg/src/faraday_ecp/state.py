"""Sparse pure states over photon-polarization and atom-ground-level slots.

A state is a mapping from basis labels (one symbol per slot) to complex
amplitudes. Every protocol state has at most a handful of nonzero terms no
matter how many photons are involved, so nothing here ever builds a dense
vector except for the small Schmidt matrix.

All public operations return new, normalized :class:`PureState` values.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import (
    ArityMismatch,
    BadPartition,
    BasisMismatch,
    EmptyState,
    IncompleteTable,
    LayoutMismatch,
    NonUnitaryGate,
    NonUnitPhase,
    UnknownSlot,
)

PRUNE_TOL = 1e-15
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10

CIRCULAR = "circular"
LINEAR = "linear"
ATOM = "atom"

BASES: dict[str, tuple[str, str]] = {
    CIRCULAR: ("L", "R"),
    LINEAR: ("H", "V"),
    ATOM: ("gL", "gR"),
}
_ROLE_BASES = {"photon": (CIRCULAR, LINEAR), "atom": (ATOM,)}
_SYMBOL_BASIS = {s: b for b, syms in BASES.items() for s in syms}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PHASE_FLIP = np.array([[1, 0], [0, -1]], dtype=complex)

Key = tuple[str, ...]


@dataclass(frozen=True)
class Slot:
    name: str
    role: str = "photon"
    basis: str | None = None

    def __post_init__(self):
        if self.role not in _ROLE_BASES:
            raise ValueError(f"slot role must be 'photon' or 'atom', got {self.role!r}")
        if self.basis is None and self.role == "atom":
            object.__setattr__(self, "basis", ATOM)
        if self.basis is not None and self.basis not in _ROLE_BASES[self.role]:
            raise BasisMismatch(f"slot {self.name!r} ({self.role}) cannot use basis {self.basis!r}")


@dataclass(frozen=True)
class SlotLayout:
    """Ordered, uniquely named slots; at most one of them is the atom."""

    slots: tuple[Slot, ...]

    def __post_init__(self):
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise ValueError(f"slot names must be unique: {names}")
        if sum(s.role == "atom" for s in self.slots) > 1:
            raise ValueError("a layout holds at most one atom slot")

    @classmethod
    def of(cls, *specs: str | Slot | tuple) -> "SlotLayout":
        """Build from slot names, ``(name, role[, basis])`` tuples or :class:`Slot`\\ s.

        A bare name ``"c"`` is an atom slot; other bare names are photons.
        """
        slots = []
        for spec in specs:
            if isinstance(spec, Slot):
                slots.append(spec)
            elif isinstance(spec, str):
                slots.append(Slot(spec, "atom" if spec == "c" else "photon"))
            else:
                slots.append(Slot(*spec))
        return cls(tuple(slots))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.slots):
            if s.name == name:
                return i
        raise UnknownSlot(f"no slot named {name!r} in layout {self.names}")

    def basis_of(self, name: str) -> str:
        return self.slots[self.index(name)].basis

    def with_basis(self, name: str, basis: str) -> "SlotLayout":
        i = self.index(name)
        old = self.slots[i]
        return SlotLayout(self.slots[:i] + (Slot(old.name, old.role, basis),) + self.slots[i + 1:])

    def without(self, names: Iterable[str]) -> "SlotLayout":
        drop = set(names)
        return SlotLayout(tuple(s for s in self.slots if s.name not in drop))


@dataclass(frozen=True, eq=False)
class PureState:
    """Immutable normalized pure state. Build it with :func:`make_state`."""

    layout: SlotLayout
    terms: Mapping[Key, complex] = field(repr=False)

    def __repr__(self) -> str:
        return f"PureState({format_state(self)})"

    def amplitude(self, key: Sequence[str]) -> complex:
        return self.terms.get(tuple(key), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def allclose(self, other: "PureState", atol: float = NORM_TOL) -> bool:
        """Amplitude-wise comparison, global phase included."""
        if self.layout != other.layout:
            return False
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= atol for k in keys)


def format_state(state: PureState, digits: int = 6) -> str:
    parts = []
    for key, amp in sorted(state.terms.items()):
        ket = ",".join(f"{s}_{n}" for s, n in zip(key, state.layout.names))
        parts.append(f"({amp.real:.{digits}g}{amp.imag:+.{digits}g}j)|{ket}>")
    return " + ".join(parts) if parts else "0"


def _resolve_layout(layout: SlotLayout, raw: Mapping[Key, complex]) -> SlotLayout:
    """Check arity and basis discipline, filling in photon bases left as ``None``."""
    n = len(layout)
    seen: list[set[str]] = [set() for _ in range(n)]
    for key in raw:
        if len(key) != n:
            raise ArityMismatch(f"key {key} has {len(key)} symbols, layout has {n} slots")
        for i, sym in enumerate(key):
            if sym not in _SYMBOL_BASIS:
                raise BasisMismatch(f"unknown basis symbol {sym!r}")
            seen[i].add(_SYMBOL_BASIS[sym])
    slots = []
    for slot, bases in zip(layout.slots, seen):
        if len(bases) > 1:
            raise BasisMismatch(f"slot {slot.name!r} mixes bases {sorted(bases)}")
        basis = slot.basis
        if bases:
            (used,) = bases
            if basis is None:
                if used not in _ROLE_BASES[slot.role]:
                    raise BasisMismatch(f"slot {slot.name!r} ({slot.role}) cannot hold {used!r} symbols")
                basis = used
            elif used != basis:
                raise BasisMismatch(f"slot {slot.name!r} is tagged {basis!r} but holds {used!r} symbols")
        if basis is None:
            basis = CIRCULAR
        slots.append(Slot(slot.name, slot.role, basis))
    return SlotLayout(tuple(slots))


def _finish(layout: SlotLayout, raw: Mapping[Key, complex]) -> PureState:
    norm = math.sqrt(sum(abs(a) ** 2 for a in raw.values()))
    if norm < PRUNE_TOL:
        raise EmptyState("all amplitudes vanish")
    terms = {}
    for key, amp in raw.items():
        amp = complex(amp) / norm
        if abs(amp) >= PRUNE_TOL:
            terms[key] = amp
    # pruning can shave off up to ~1e-30 of weight; renormalize so the invariant is exact
    norm = math.sqrt(sum(abs(a) ** 2 for a in terms.values()))
    if norm != 1.0:
        terms = {k: a / norm for k, a in terms.items()}
    return PureState(layout, MappingProxyType(terms))


def make_state(
    layout: SlotLayout | Sequence,
    terms: Mapping[Sequence[str], complex] | Iterable[tuple[Sequence[str], complex]],
) -> PureState:
    """Normalized state from (key, amplitude) pairs; repeated keys are summed."""
    if not isinstance(layout, SlotLayout):
        layout = SlotLayout.of(*layout)
    items = terms.items() if isinstance(terms, Mapping) else terms
    raw: dict[Key, complex] = {}
    for key, amp in items:
        key = (key,) if isinstance(key, str) else tuple(key)
        raw[key] = raw.get(key, 0j) + complex(amp)
    return _finish(_resolve_layout(layout, raw), raw)


def tensor(*states: PureState) -> PureState:
    """Product state; slot names across the factors must be distinct."""
    layout = SlotLayout(tuple(itertools.chain.from_iterable(s.layout.slots for s in states)))
    raw = {(): 1 + 0j}
    for s in states:
        raw = {k1 + k2: a1 * a2 for k1, a1 in raw.items() for k2, a2 in s.terms.items()}
    return _finish(layout, raw)


def _check_unitary(gate) -> np.ndarray:
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise NonUnitaryGate(f"expected a 2x2 matrix, got shape {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, np.eye(2), rtol=0, atol=UNITARY_TOL):
        raise NonUnitaryGate(f"gate is not unitary within {UNITARY_TOL}:\n{gate}")
    return gate


def gate_terms(
    layout: SlotLayout,
    terms: Mapping[Key, complex],
    slot: str,
    gate,
    output_basis: str | None = None,
) -> tuple[SlotLayout, dict[Key, complex]]:
    """Linear kernel behind :func:`apply_1slot_gate`: no normalization, no pruning.

    ``gate[i, j]`` is the amplitude for output symbol ``i`` given input
    symbol ``j``, both indexed in their basis' ``BASES`` order.
    """
    gate = np.asarray(gate, dtype=complex)
    i = layout.index(slot)
    in_syms = BASES[layout.slots[i].basis]
    out_basis = output_basis or layout.slots[i].basis
    out_syms = BASES[out_basis]
    new_layout = layout.with_basis(slot, out_basis)
    out: dict[Key, complex] = {}
    for key, amp in terms.items():
        j = in_syms.index(key[i])
        for o, sym in enumerate(out_syms):
            coeff = gate[o, j]
            if coeff != 0:
                new_key = key[:i] + (sym,) + key[i + 1:]
                out[new_key] = out.get(new_key, 0j) + coeff * amp
    return new_layout, out


def apply_1slot_gate(
    state: PureState,
    slot: str,
    gate,
    output_basis: str | None = None,
    input_basis: str | None = None,
) -> PureState:
    """Apply a single-slot unitary, optionally switching the slot's basis tag.

    ``output_basis`` defaults to the slot's current basis. If ``input_basis``
    is given it must equal the slot's current basis.
    """
    gate = _check_unitary(gate)
    current = state.layout.basis_of(slot)
    if input_basis is not None and input_basis != current:
        raise BasisMismatch(f"gate expects {input_basis!r} on slot {slot!r}, which is in {current!r}")
    role = state.layout.slots[state.layout.index(slot)].role
    if output_basis is not None and output_basis not in _ROLE_BASES[role]:
        raise BasisMismatch(f"{role} slot {slot!r} cannot be moved to basis {output_basis!r}")
    layout, raw = gate_terms(state.layout, state.terms, slot, gate, output_basis)
    return _finish(layout, raw)


def hadamard(state: PureState, slot: str) -> PureState:
    """Hadamard on ``slot``; a circular photon comes out in the linear basis (QWP)."""
    basis = state.layout.basis_of(slot)
    out = LINEAR if basis == CIRCULAR else basis
    return apply_1slot_gate(state, slot, HADAMARD, output_basis=out)


def phase_flip(state: PureState, slot: str) -> PureState:
    return apply_1slot_gate(state, slot, PHASE_FLIP)


def apply_joint_phase_gate(
    state: PureState,
    slots: Sequence[str],
    phase_table: Mapping[Sequence[str], complex],
) -> PureState:
    """Multiply each term by the unit phase its joint outcome on ``slots`` selects."""
    idx = [state.layout.index(s) for s in slots]
    table = {tuple(k): complex(v) for k, v in phase_table.items()}
    for outcome in itertools.product(*(BASES[state.layout.slots[i].basis] for i in idx)):
        if outcome not in table:
            raise IncompleteTable(f"phase table has no entry for {outcome} on slots {tuple(slots)}")
    for k, v in table.items():
        if abs(abs(v) - 1) > UNITARY_TOL:
            raise NonUnitPhase(f"entry {k} has modulus {abs(v)}")
    raw = {key: amp * table[tuple(key[i] for i in idx)] for key, amp in state.terms.items()}
    return _finish(state.layout, raw)


@dataclass(frozen=True)
class MeasurementBranch:
    outcome: tuple[str, ...]
    probability: float
    collapsed: PureState


def measure(state: PureState, slots: Sequence[str]) -> list[MeasurementBranch]:
    """Projective measurement of ``slots``, each in its current basis.

    Returns one branch per outcome with nonzero probability, in basis order.
    """
    idx = [state.layout.index(s) for s in slots]
    keep = [i for i in range(len(state.layout)) if i not in idx]
    rest = state.layout.without(slots)
    groups: dict[tuple[str, ...], dict[Key, complex]] = {}
    for key, amp in state.terms.items():
        outcome = tuple(key[i] for i in idx)
        groups.setdefault(outcome, {})[tuple(key[i] for i in keep)] = amp
    branches = []
    for outcome in itertools.product(*(BASES[state.layout.slots[i].basis] for i in idx)):
        if outcome not in groups:
            continue
        sub = groups[outcome]
        prob = sum(abs(a) ** 2 for a in sub.values())
        branches.append(MeasurementBranch(outcome, prob, _finish(rest, sub)))
    return branches


def largest_schmidt_coefficient(state: PureState, partition: Iterable[str]) -> float:
    """Largest singular value of the amplitude matrix across ``partition | rest``."""
    part = set(partition)
    names = set(state.layout.names)
    if not part or not part < names:
        raise BadPartition(f"partition {sorted(part)} must be a nonempty proper subset of {sorted(names)}")
    left = [i for i, n in enumerate(state.layout.names) if n in part]
    right = [i for i, n in enumerate(state.layout.names) if n not in part]
    rows: dict[Key, int] = {}
    cols: dict[Key, int] = {}
    entries = []
    for key, amp in state.terms.items():
        r = rows.setdefault(tuple(key[i] for i in left), len(rows))
        c = cols.setdefault(tuple(key[i] for i in right), len(cols))
        entries.append((r, c, amp))
    mat = np.zeros((len(rows), len(cols)), dtype=complex)
    for r, c, amp in entries:
        mat[r, c] = amp
    return float(np.linalg.svd(mat, compute_uv=False)[0])


def overlap(state: PureState, target: PureState) -> complex:
    """<target|state>."""
    if state.layout != target.layout:
        raise LayoutMismatch(f"layouts differ: {state.layout} vs {target.layout}")
    return sum((target.terms[k].conjugate() * a for k, a in state.terms.items() if k in target.terms), 0j)


def fidelity(state: PureState, target: PureState) -> float:
    return min(1.0, abs(overlap(state, target)) ** 2)

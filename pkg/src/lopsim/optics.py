"""Linear-optical elements, mode unitaries, and exact multi-photon evolution.

Element conventions (pinned; the post-selected gate regressions lock them):

* ``BasisRotator(theta)`` rotates the polarization vector counterclockwise,
  ``[[cos t, -sin t], [sin t, cos t]]`` on (H, V).
* ``WavePlate(theta)`` is a half-wave plate, the real involutory Jones matrix
  ``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``.
* ``PolarizingBS(0)`` transmits H in place on each port and swaps V between
  the two ports, amplitude +1 on both reflections. A splitter at basis angle
  ``t`` is the rotator sandwich R(t) . PBS(0) . R(-t) applied on both ports,
  which is how a rotated analysis frame is realized with fiber rotators.
* ``BeamSplitter(R)`` uses the symmetric i-reflection convention
  ``[[sqrt(1-R), i sqrt(R)], [i sqrt(R), sqrt(1-R)]]`` per polarization.
* ``PhaseShifter(phi)`` multiplies every mode of its port by exp(i phi).
* ``Polarizer`` is a projector and is legal only at the detection stage;
  compiling it into a circuit raises ``NonUnitaryElementError``.

All elements act identically and independently on every internal bin, so
compiled unitaries never mix bins. Evolution exploits that: the permanent of
a transition submatrix factorizes over bins, which keeps the amplitude
enumeration cheap even with several distinguishability bins in play.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import NonUnitaryElementError, PhotonCapError, RegistryConflictError
from .fock import ModeRegistry, Occupation, PhotonicState
from .permanent import permanent

UNITARITY_TOL = 1e-12
_SUPPORT_TOL = 1e-14


def rotation_jones(angle_deg: float) -> np.ndarray:
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate_jones(angle_deg: float) -> np.ndarray:
    t = math.radians(2.0 * angle_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [s, -c]], dtype=complex)


def polarizer_jones(angle_deg: float) -> np.ndarray:
    t = math.radians(angle_deg)
    v = np.array([math.cos(t), math.sin(t)])
    return np.outer(v, v).astype(complex)


@dataclass(frozen=True)
class BeamSplitter:
    ports: tuple[str, str]
    reflectivity: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError("reflectivity must lie in [0, 1]")


@dataclass(frozen=True)
class PolarizingBS:
    ports: tuple[str, str]
    basis_angle_deg: float = 0.0


@dataclass(frozen=True)
class WavePlate:
    port: str
    angle_deg: float


@dataclass(frozen=True)
class BasisRotator:
    port: str
    angle_deg: float


@dataclass(frozen=True)
class PhaseShifter:
    port: str
    phase_deg: float


@dataclass(frozen=True)
class Polarizer:
    """Projective analyzer. Detection stage only, never a circuit element."""

    port: str
    angle_deg: float


OpticalElement = Union[
    BeamSplitter, PolarizingBS, WavePlate, BasisRotator, PhaseShifter, Polarizer
]


@dataclass(frozen=True)
class ModeUnitary:
    """A unitary on the full dense mode space of a registry."""

    matrix: np.ndarray
    registry: ModeRegistry

    def __post_init__(self) -> None:
        m = self.matrix
        n = self.registry.n_modes
        if m.shape != (n, n):
            raise RegistryConflictError(
                f"matrix shape {m.shape} does not match {n} modes"
            )
        dev = np.max(np.abs(m.conj().T @ m - np.eye(n)))
        if dev > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (max deviation {dev:.3e})")

    def then(self, other: "ModeUnitary") -> "ModeUnitary":
        if other.registry != self.registry:
            raise RegistryConflictError("cannot compose unitaries across registries")
        return ModeUnitary(other.matrix @ self.matrix, self.registry)


def _embed_single_port(
    registry: ModeRegistry, port: str, jones: np.ndarray
) -> np.ndarray:
    u = np.eye(registry.n_modes, dtype=complex)
    for b in range(registry.internal_bins):
        idx = [registry.index(port, 0, b), registry.index(port, 1, b)]
        u[np.ix_(idx, idx)] = jones
    return u


def _embed_two_port(
    registry: ModeRegistry, ports: tuple[str, str], block: np.ndarray
) -> np.ndarray:
    # block is 4x4 on (aH, aV, bH, bV)
    a, b = ports
    u = np.eye(registry.n_modes, dtype=complex)
    for k in range(registry.internal_bins):
        idx = [
            registry.index(a, 0, k),
            registry.index(a, 1, k),
            registry.index(b, 0, k),
            registry.index(b, 1, k),
        ]
        u[np.ix_(idx, idx)] = block
    return u


_PBS0_BLOCK = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
    ],
    dtype=complex,
)


def _pbs_block(basis_angle_deg: float) -> np.ndarray:
    if basis_angle_deg % 360.0 == 0.0:
        return _PBS0_BLOCK.copy()
    r = rotation_jones(basis_angle_deg)
    rr = np.block(
        [[r, np.zeros((2, 2))], [np.zeros((2, 2)), r]]
    )
    return rr @ _PBS0_BLOCK @ rr.conj().T


def element_unitary(element: OpticalElement, registry: ModeRegistry) -> ModeUnitary:
    """Full-space unitary for one element, identity on untouched modes."""
    if isinstance(element, Polarizer):
        raise NonUnitaryElementError(
            "a polarizer is a projector; use it at the detection stage, "
            "not as a circuit element"
        )
    if isinstance(element, BeamSplitter):
        t = math.sqrt(1.0 - element.reflectivity)
        r = math.sqrt(element.reflectivity)
        per_pol = np.array([[t, 1j * r], [1j * r, t]], dtype=complex)
        block = np.zeros((4, 4), dtype=complex)
        for s in (0, 1):  # same matrix on H and V
            block[np.ix_([s, s + 2], [s, s + 2])] = per_pol
        return ModeUnitary(_embed_two_port(registry, element.ports, block), registry)
    if isinstance(element, PolarizingBS):
        block = _pbs_block(element.basis_angle_deg)
        return ModeUnitary(_embed_two_port(registry, element.ports, block), registry)
    if isinstance(element, WavePlate):
        return ModeUnitary(
            _embed_single_port(registry, element.port, waveplate_jones(element.angle_deg)),
            registry,
        )
    if isinstance(element, BasisRotator):
        return ModeUnitary(
            _embed_single_port(registry, element.port, rotation_jones(element.angle_deg)),
            registry,
        )
    if isinstance(element, PhaseShifter):
        phase = np.exp(1j * math.radians(element.phase_deg))
        u = np.eye(registry.n_modes, dtype=complex)
        for m in registry.port_modes(element.port):
            u[m, m] = phase
        return ModeUnitary(u, registry)
    raise TypeError(f"unknown optical element {element!r}")


@dataclass(frozen=True)
class OpticalCircuit:
    """Ordered element list on a fixed registry."""

    registry: ModeRegistry
    elements: tuple[OpticalElement, ...] = ()

    def compile(self) -> ModeUnitary:
        return compile_circuit(self)


def compile_circuit(circuit: OpticalCircuit) -> ModeUnitary:
    """Ordered product of element matrices; the first element acts first."""
    u = np.eye(circuit.registry.n_modes, dtype=complex)
    for element in circuit.elements:
        u = element_unitary(element, circuit.registry).matrix @ u
    return ModeUnitary(u, circuit.registry)


def analyzer_rotation(
    registry: ModeRegistry, angles_deg: dict[str, float]
) -> ModeUnitary:
    """Rotation taking each port's analyzer basis onto the H/V channels.

    After applying this unitary, a polarizer at ``angles_deg[port]``
    corresponds to the plain H channel of that port.
    """
    u = np.eye(registry.n_modes, dtype=complex)
    for port, theta in angles_deg.items():
        if theta % 180.0 == 0.0:
            continue
        u = _embed_single_port(registry, port, rotation_jones(-theta)) @ u
    return ModeUnitary(u, registry)


def _factorial_prod(occ: Iterable[int]) -> float:
    p = 1.0
    for n in occ:
        if n > 1:
            p *= math.factorial(n)
    return p


def _support_groups(
    u: np.ndarray, in_modes: list[int]
) -> list[tuple[list[int], list[int]]]:
    """Partition input columns into groups with disjoint output support.

    Two occupied input modes land in one group when the sets of output modes
    they can reach overlap. The transition permanent then factorizes exactly
    into one block per group. For bin-diagonal unitaries this reproduces the
    per-bin split; for a general unitary it degrades to a single group.
    """
    supports: dict[int, frozenset[int]] = {}
    for c in set(in_modes):
        supports[c] = frozenset(np.where(np.abs(u[:, c]) > _SUPPORT_TOL)[0].tolist())
    groups: list[tuple[set[int], set[int]]] = []  # (cols, rows)
    for c in sorted(set(in_modes)):
        rows = set(supports[c])
        merged_cols = {c}
        keep: list[tuple[set[int], set[int]]] = []
        for cols_g, rows_g in groups:
            if rows & rows_g:
                merged_cols |= cols_g
                rows |= rows_g
            else:
                keep.append((cols_g, rows_g))
        keep.append((merged_cols, rows))
        groups = keep
    out = []
    for cols_g, rows_g in groups:
        cols = [m for m in in_modes if m in cols_g]
        out.append((cols, sorted(rows_g)))
    return out


def evolve(state: PhotonicState, unitary: ModeUnitary) -> PhotonicState:
    """Exact multi-photon evolution through a compiled unitary.

    The amplitude to scatter input occupation S into output occupation T is
    perm(U[T, S]) / sqrt(prod S_i! prod T_j!), with U[T, S] built by repeating
    rows and columns by multiplicity. Photon number is conserved term by term.

    Occupied input modes are partitioned by output support before the pattern
    enumeration. Elements never mix internal bins, so distinguishability bins
    split into independent blocks and the permanents stay small.
    """
    if unitary.registry != state.registry:
        raise RegistryConflictError("state and unitary registries differ")
    reg = state.registry
    u = unitary.matrix
    out: dict[Occupation, complex] = {}
    n_modes = reg.n_modes
    for occ, amp in state.terms.items():
        n = sum(occ)
        if n > reg.max_photons:
            raise PhotonCapError(f"term has {n} photons, cap is {reg.max_photons}")
        if n == 0:
            out[occ] = out.get(occ, 0j) + amp
            continue
        in_modes: list[int] = []
        for m, k in enumerate(occ):
            in_modes.extend([m] * k)
        base = amp / math.sqrt(_factorial_prod(occ))
        group_cols: list[list[int]] = []
        group_patterns: list[list[tuple[int, ...]]] = []
        for cols_g, rows_g in _support_groups(u, in_modes):
            group_cols.append(cols_g)
            group_patterns.append(
                list(combinations_with_replacement(rows_g, len(cols_g)))
            )
        for combo in product(*group_patterns):
            amp_t = base
            occ_out = [0] * n_modes
            for rows_g, cols_g in zip(combo, group_cols):
                amp_t *= permanent(u[np.ix_(rows_g, cols_g)])
                if amp_t == 0:
                    break
                for r in rows_g:
                    occ_out[r] += 1
            else:
                key = tuple(occ_out)
                out[key] = out.get(key, 0j) + amp_t / math.sqrt(_factorial_prod(key))
    return PhotonicState(reg, out)

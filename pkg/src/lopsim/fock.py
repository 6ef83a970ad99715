"""Sparse Fock-space states for polarization-encoded photons.

States live on a registry of labelled spatial ports. Every port carries the
two polarization modes H and V plus a configurable number of internal bins
that stand in for spectral/temporal degrees of freedom (the handle used to
model partial distinguishability). Amplitudes are held sparsely as a map
from occupation tuples to complex numbers.

Mode ordering is canonical and stable: ports in declaration order, H before
V, internal bins ascending. Occupation tuples built against one registry are
therefore comparable across a whole run.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import PhotonCapError, RegistryConflictError, ZeroNormError

#: Amplitudes with modulus below this threshold are dropped from sparse maps.
PRUNE_THRESHOLD = 1e-14

#: Default hard cap on total photon number (three experiment photons plus one
#: contamination photon). Exceeding the cap raises, it is never truncated.
DEFAULT_PHOTON_CAP = 4

POLARIZATIONS = ("H", "V")

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class ModeRegistry:
    """Dense indexing of (port, polarization, internal bin) modes.

    The registry fixes the meaning of every slot in an occupation tuple.
    ``max_photons`` is the operational photon-number cap enforced by state
    constructors and evolution.
    """

    ports: tuple[str, ...]
    internal_bins: int = 1
    max_photons: int = DEFAULT_PHOTON_CAP

    def __post_init__(self) -> None:
        if len(set(self.ports)) != len(self.ports):
            raise RegistryConflictError(f"duplicate port labels in {self.ports}")
        if not self.ports:
            raise ValueError("registry needs at least one port")
        if self.internal_bins < 1:
            raise ValueError("internal_bins must be >= 1")
        if self.max_photons < 1:
            raise ValueError("max_photons must be >= 1")

    @property
    def n_modes(self) -> int:
        return len(self.ports) * 2 * self.internal_bins

    def port_index(self, port: str) -> int:
        try:
            return self.ports.index(port)
        except ValueError:
            raise RegistryConflictError(f"unknown port {port!r}; have {self.ports}") from None

    def index(self, port: str, pol: str | int, bin: int = 0) -> int:
        """Dense index of a single mode."""
        p = self.port_index(port)
        s = pol if isinstance(pol, int) else POLARIZATIONS.index(pol)
        if not 0 <= s < 2:
            raise ValueError(f"polarization must be H/V or 0/1, got {pol!r}")
        if not 0 <= bin < self.internal_bins:
            raise ValueError(f"bin {bin} outside 0..{self.internal_bins - 1}")
        return (p * 2 + s) * self.internal_bins + bin

    def mode(self, index: int) -> tuple[str, str, int]:
        """Inverse of :meth:`index`."""
        if not 0 <= index < self.n_modes:
            raise ValueError(f"mode index {index} out of range")
        bin = index % self.internal_bins
        ps = index // self.internal_bins
        return self.ports[ps // 2], POLARIZATIONS[ps % 2], bin

    def modes(self) -> Iterator[tuple[str, str, int]]:
        for i in range(self.n_modes):
            yield self.mode(i)

    def port_modes(self, port: str) -> list[int]:
        """All dense indices belonging to one port."""
        p = self.port_index(port)
        base = p * 2 * self.internal_bins
        return list(range(base, base + 2 * self.internal_bins))

    def channel_modes(self, port: str, pol: str | int) -> list[int]:
        """Indices of one polarization channel of a port, all bins."""
        first = self.index(port, pol, 0)
        return list(range(first, first + self.internal_bins))

    def merged(self, other: "ModeRegistry") -> "ModeRegistry":
        if set(self.ports) & set(other.ports):
            raise RegistryConflictError(
                f"overlapping port labels {set(self.ports) & set(other.ports)}"
            )
        if self.internal_bins != other.internal_bins:
            raise RegistryConflictError("internal bin counts differ, cannot merge")
        return ModeRegistry(
            self.ports + other.ports,
            self.internal_bins,
            max(self.max_photons, other.max_photons),
        )


def photon_number(occupation: Occupation) -> int:
    return sum(occupation)


class PhotonicState:
    """Sparse superposition of Fock occupation states.

    Instances are immutable after construction; every operation returns a new
    state. The constructor prunes amplitudes below ``PRUNE_THRESHOLD`` and
    enforces the registry's photon cap.
    """

    __slots__ = ("registry", "_terms")

    def __init__(
        self,
        registry: ModeRegistry,
        terms: Mapping[Occupation, complex],
        prune: bool = True,
    ) -> None:
        n_modes = registry.n_modes
        cap = registry.max_photons
        clean: dict[Occupation, complex] = {}
        for occ, amp in terms.items():
            if prune and abs(amp) < PRUNE_THRESHOLD:
                continue
            if len(occ) != n_modes:
                raise RegistryConflictError(
                    f"occupation length {len(occ)} does not match {n_modes} modes"
                )
            n = sum(occ)
            if any(k < 0 for k in occ):
                raise ValueError(f"negative occupation in {occ}")
            if n > cap:
                raise PhotonCapError(f"{n} photons exceed cap {cap}")
            clean[occ] = complex(amp)
        self.registry = registry
        self._terms = clean

    @property
    def terms(self) -> Mapping[Occupation, complex]:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._terms.values()))

    def sector_weights(self) -> dict[int, float]:
        """Squared norm per total photon number."""
        out: dict[int, float] = {}
        for occ, amp in self._terms.items():
            n = sum(occ)
            out[n] = out.get(n, 0.0) + abs(amp) ** 2
        return out

    def amplitude(self, occupation: Occupation) -> complex:
        return self._terms.get(tuple(occupation), 0j)

    def scaled(self, factor: complex) -> "PhotonicState":
        return PhotonicState(
            self.registry, {o: a * factor for o, a in self._terms.items()}
        )

    def __repr__(self) -> str:
        n = len(self._terms)
        return f"PhotonicState({n} terms, norm={self.norm():.6g})"


def vacuum(registry: ModeRegistry) -> PhotonicState:
    return PhotonicState(registry, {(0,) * registry.n_modes: 1.0 + 0j})


def add_photon(
    state: PhotonicState, mode_amplitudes: Mapping[int, complex]
) -> PhotonicState:
    """Apply a creation operator sum_m c_m a^dagger_m to every term.

    Bosonic sqrt(n+1) factors are included, so repeated application builds
    multi-photon occupations with the correct weights.
    """
    reg = state.registry
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        if sum(occ) + 1 > reg.max_photons:
            raise PhotonCapError(
                f"adding a photon to a {sum(occ)}-photon term exceeds cap {reg.max_photons}"
            )
        for m, c in mode_amplitudes.items():
            if c == 0:
                continue
            n = occ[m]
            key = occ[:m] + (n + 1,) + occ[m + 1 :]
            out[key] = out.get(key, 0j) + amp * c * math.sqrt(n + 1)
    return PhotonicState(reg, out)


def single_photon(
    registry: ModeRegistry,
    port: str,
    pol_amplitudes: Sequence[complex] = (1.0, 0.0),
    internal: Sequence[complex] | None = None,
) -> PhotonicState:
    """One photon in ``port`` with the given Jones vector and internal state."""
    if internal is None:
        internal = [1.0] + [0.0] * (registry.internal_bins - 1)
    if len(internal) != registry.internal_bins:
        raise ValueError("internal vector length must equal internal_bins")
    amps = {}
    for s, c_pol in enumerate(pol_amplitudes):
        for b, c_bin in enumerate(internal):
            c = complex(c_pol) * complex(c_bin)
            if c != 0:
                amps[registry.index(port, s, b)] = c
    return add_photon(vacuum(registry), amps)


def tensor(a: PhotonicState, b: PhotonicState) -> PhotonicState:
    """Combine states on disjoint port sets into one product state."""
    reg = a.registry.merged(b.registry)
    out: dict[Occupation, complex] = {}
    for occ_a, amp_a in a.terms.items():
        for occ_b, amp_b in b.terms.items():
            if sum(occ_a) + sum(occ_b) > reg.max_photons:
                raise PhotonCapError("tensor product exceeds photon cap")
            out[occ_a + occ_b] = out.get(occ_a + occ_b, 0j) + amp_a * amp_b
    return PhotonicState(reg, out)


def inner_product(a: PhotonicState, b: PhotonicState) -> complex:
    """<a|b>, conjugate linear in the first argument."""
    if a.registry != b.registry:
        raise RegistryConflictError("inner product requires identical registries")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for occ, amp in small.terms.items():
        other = large.terms.get(occ)
        if other is not None:
            if small is a:
                total += amp.conjugate() * other
            else:
                total += other.conjugate() * amp
    return total


def normalize(state: PhotonicState) -> tuple[PhotonicState, float]:
    """Return the unit-norm state and the original norm."""
    n = state.norm()
    if n < 1e-150:
        raise ZeroNormError("cannot normalize a zero state")
    return state.scaled(1.0 / n), n


def permute_modes(state: PhotonicState, perm: Sequence[int]) -> PhotonicState:
    """Relabel modes: photon content of mode i moves to mode perm[i]."""
    reg = state.registry
    if sorted(perm) != list(range(reg.n_modes)):
        raise ValueError("perm must be a permutation of all mode indices")
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        new = [0] * reg.n_modes
        for i, n in enumerate(occ):
            new[perm[i]] = n
        out[tuple(new)] = amp
    return PhotonicState(reg, out)


def bit_flip(state: PhotonicState, port: str) -> PhotonicState:
    """Swap the H and V channels of one port (polarization X), bin by bin."""
    reg = state.registry
    perm = list(range(reg.n_modes))
    for b in range(reg.internal_bins):
        i = reg.index(port, "H", b)
        j = reg.index(port, "V", b)
        perm[i], perm[j] = j, i
    return permute_modes(state, perm)


def phase_flip(state: PhotonicState, port: str) -> PhotonicState:
    """Polarization Z on one port: each V photon contributes a factor -1."""
    reg = state.registry
    v_modes = reg.channel_modes(port, "V")
    out = {
        occ: amp * (-1.0) ** sum(occ[m] for m in v_modes)
        for occ, amp in state.terms.items()
    }
    return PhotonicState(reg, out)


@dataclass(frozen=True)
class InputAmplitudes:
    """Two-qubit input on the control/target logical basis.

    Component order is |0c 0t>, |0c 1t>, |1c 0t>, |1c 1t>. The vector must be
    normalized to 1 within 1e-10.
    """

    a1: complex
    a2: complex
    a3: complex
    a4: complex

    def __post_init__(self) -> None:
        if abs(self.norm_sq() - 1.0) > 1e-10:
            raise ValueError(
                f"input amplitudes must be normalized, got |a|^2 = {self.norm_sq()!r}"
            )

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.vector())

    def vector(self) -> tuple[complex, complex, complex, complex]:
        return (complex(self.a1), complex(self.a2), complex(self.a3), complex(self.a4))

    @classmethod
    def from_vector(cls, v: Sequence[complex]) -> "InputAmplitudes":
        n = math.sqrt(sum(abs(x) ** 2 for x in v))
        if n < 1e-150:
            raise ZeroNormError("cannot build input from a zero vector")
        return cls(*(complex(x) / n for x in v))

    @classmethod
    def basis(cls, control: int, target: int) -> "InputAmplitudes":
        v = [0j, 0j, 0j, 0j]
        v[control * 2 + target] = 1.0 + 0j
        return cls(*v)

    def as_state(
        self,
        registry: ModeRegistry,
        control_port: str = "C",
        target_port: str = "T",
    ) -> PhotonicState:
        """Two single photons carrying the logical amplitudes, bin 0."""
        terms: dict[Occupation, complex] = {}
        v = self.vector()
        for i, (c, t) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
            if v[i] == 0:
                continue
            occ = [0] * registry.n_modes
            occ[registry.index(control_port, c, 0)] += 1
            occ[registry.index(target_port, t, 0)] += 1
            terms[tuple(occ)] = v[i]
        return PhotonicState(registry, terms)

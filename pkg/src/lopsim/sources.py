"""Photon sources, partial distinguishability, analyzers, and count sampling.

The pair source delivers exactly one photon into each of two ports per
accepted trial; the third photon comes either from an ideal single-photon
stand-in or from a weak coherent pulse with Poissonian photon number, which
is what introduces multi-photon contamination. Distinguishability is kept
pure-state: every photon carries a unit internal vector over the registry's
bins, and the vectors are chosen by factorizing the configured Gram matrix
of pairwise overlaps. The stored overlap values are squared moduli of the
internal inner products, so a two-photon interference dip at a balanced
splitter has visibility exactly equal to the configured overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .fock import ModeRegistry, PhotonicState, add_photon, normalize, vacuum
from .optics import (
    ModeUnitary,
    OpticalCircuit,
    analyzer_rotation,
    compile_circuit,
    evolve,
    waveplate_jones,
)
from .gates import ANY, DetectionPattern


def poisson_weight(n: int, mean: float) -> float:
    return math.exp(-mean) * mean**n / math.factorial(n)


def poisson_tail(mean: float, n_max: int) -> float:
    return 1.0 - sum(poisson_weight(n, mean) for n in range(n_max + 1))


@dataclass(frozen=True)
class SpdcPairConfig:
    """Down-conversion pair feeding the ancilla and control ports.

    Preparation half-wave plates act on an H-polarized photon, so an angle of
    22.5 degrees yields the equal superposition and 45 degrees the logical 1.
    """

    ancilla_port: str = "A"
    control_port: str = "C"
    ancilla_waveplate_deg: float = 22.5
    control_waveplate_deg: float = 0.0


@dataclass(frozen=True)
class SinglePhotonTarget:
    """Idealized one-photon target source (no contamination sectors)."""

    port: str = "T"
    waveplate_deg: float = 0.0


@dataclass(frozen=True)
class WeakCoherentConfig:
    """Attenuated-pulse target with Poissonian photon number.

    The default mean of 1e-3 keeps the two-photon sector three orders of
    magnitude below the single-photon sector, the regime in which a weak
    pulse passes as a single-photon source.
    """

    port: str = "T"
    mean_photon_number: float = 1e-3
    truncation: int = 2
    waveplate_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.mean_photon_number <= 0:
            raise ConfigError("mean photon number must be positive")
        if self.truncation < 1:
            raise ConfigError("truncation must keep at least the one-photon sector")
        tail = poisson_tail(self.mean_photon_number, self.truncation)
        if tail > 1e-4:
            raise ConfigError(
                f"truncated Poisson tail {tail:.3e} exceeds 1e-4; "
                "raise the truncation or lower the mean"
            )


TargetConfig = Any  # SinglePhotonTarget | WeakCoherentConfig


class DistinguishabilityConfig:
    """Pairwise overlaps between the photons' internal states.

    ``overlaps[(i, j)]`` is the squared modulus of the internal inner product
    of photons i and j; missing pairs default to 1 (indistinguishable). The
    implied Gram matrix must be positive semidefinite, which is checked as
    soon as a label set is factorized.
    """

    def __init__(self, overlaps: Mapping[tuple[str, str], float] | None = None) -> None:
        clean: dict[tuple[str, str], float] = {}
        for (i, j), v in (overlaps or {}).items():
            if i == j:
                if abs(v - 1.0) > 1e-12:
                    raise ConfigError("self overlap must be 1")
                continue
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"overlap {v!r} for {(i, j)} outside [0, 1]")
            clean[tuple(sorted((i, j)))] = float(v)
        self._overlaps = clean

    @classmethod
    def ideal(cls) -> "DistinguishabilityConfig":
        return cls({})

    @classmethod
    def uniform(
        cls, value: float, labels: Sequence[str] = ("A", "C", "T")
    ) -> "DistinguishabilityConfig":
        pairs = {}
        for i, a in enumerate(labels):
            for b in labels[i + 1 :]:
                pairs[(a, b)] = value
        return cls(pairs)

    @classmethod
    def paper_like(
        cls, target_overlap: float, pair_overlap: float = 0.90
    ) -> "DistinguishabilityConfig":
        """Pair photons overlapping at ``pair_overlap``, target photon at
        ``target_overlap`` with both. The target value normally comes out of
        the calibration procedure, not out of thin air."""
        return cls(
            {
                ("A", "C"): pair_overlap,
                ("A", "T"): target_overlap,
                ("C", "T"): target_overlap,
            }
        )

    def overlap(self, i: str, j: str) -> float:
        if i == j:
            return 1.0
        return self._overlaps.get(tuple(sorted((i, j))), 1.0)

    def as_dict(self) -> dict[tuple[str, str], float]:
        return dict(self._overlaps)

    def gram(self, labels: Sequence[str]) -> np.ndarray:
        n = len(labels)
        g = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                g[i, j] = g[j, i] = math.sqrt(self.overlap(labels[i], labels[j]))
        return g

    def internal_vectors(
        self, labels: Sequence[str]
    ) -> tuple[int, dict[str, np.ndarray]]:
        """Factorize the Gram matrix into unit vectors, one per photon label.

        Returns the number of bins actually needed (the Gram rank) and the
        vectors, padded to that length.
        """
        g = self.gram(labels)
        w, v = np.linalg.eigh(g)
        if w.min() < -1e-9:
            raise ConfigError(
                f"overlap table is not realizable (Gram eigenvalue {w.min():.3e})"
            )
        w = np.clip(w, 0.0, None)
        rank = max(int(np.sum(w > 1e-12)), 1)
        basis = v[:, -rank:] * np.sqrt(w[-rank:])
        return rank, {label: basis[i] for i, label in enumerate(labels)}


@dataclass(frozen=True)
class AnalyzerSettings:
    """Analyzer angles for the three detection arms, degrees mod 180.

    ``frame`` selects how the angles are meant: "logical" uses them directly,
    "physical" first removes each arm's frame offset (the arms behind the
    rotated splitter sit 45 degrees away from the logical frame).
    """

    theta_a: float = 0.0
    theta_c: float = 0.0
    theta_t: float = 0.0
    frame: str = "logical"

    def __post_init__(self) -> None:
        if self.frame not in ("logical", "physical"):
            raise ConfigError("frame must be 'logical' or 'physical'")

    def logical_angles(
        self, frame_offsets: Mapping[str, float] | None = None
    ) -> dict[str, float]:
        raw = {"A": self.theta_a, "C": self.theta_c, "T": self.theta_t}
        if self.frame == "logical":
            return {p: a % 180.0 for p, a in raw.items()}
        offsets = frame_offsets or {}
        return {p: (a - offsets.get(p, 0.0)) % 180.0 for p, a in raw.items()}


@dataclass(frozen=True)
class CountingConfig:
    """Monte Carlo layer. Trials stand in for integration time."""

    trials_per_setting: int = 100_000
    detector_efficiency: float = 1.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.trials_per_setting < 1:
            raise ConfigError("trials_per_setting must be >= 1")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ConfigError("detector efficiency must lie in (0, 1]")


def _prep_vector(waveplate_deg: float) -> tuple[complex, complex]:
    j = waveplate_jones(waveplate_deg)
    return complex(j[0, 0]), complex(j[1, 0])


def build_input_state(
    spdc: SpdcPairConfig,
    target: TargetConfig,
    distinguishability: DistinguishabilityConfig | None = None,
    registry: ModeRegistry | None = None,
) -> PhotonicState:
    """Assemble the full input state of a three-photon run.

    Internal bins are sized to the Gram rank of the overlap table; with all
    overlaps at 1 a single bin suffices and the state is the ideal one. For a
    weak coherent target the photon-number sectors are built with amplitudes
    sqrt(P(n)) and the state is renormalized over the kept sectors.
    """
    dist = distinguishability or DistinguishabilityConfig.ideal()
    labels = (spdc.ancilla_port, spdc.control_port, target.port)
    bins, vectors = dist.internal_vectors(labels)
    if registry is None:
        registry = ModeRegistry(labels, internal_bins=bins)
    elif registry.internal_bins < bins:
        raise ConfigError(
            f"registry has {registry.internal_bins} bins, overlaps need {bins}"
        )

    def mode_amps(port: str, waveplate_deg: float) -> dict[int, complex]:
        pol = _prep_vector(waveplate_deg)
        vec = vectors[port]
        amps: dict[int, complex] = {}
        for s in (0, 1):
            for b in range(len(vec)):
                c = pol[s] * complex(vec[b])
                if c != 0:
                    amps[registry.index(port, s, b)] = c
        return amps

    base = vacuum(registry)
    base = add_photon(base, mode_amps(spdc.ancilla_port, spdc.ancilla_waveplate_deg))
    base = add_photon(base, mode_amps(spdc.control_port, spdc.control_waveplate_deg))

    if isinstance(target, SinglePhotonTarget):
        state = add_photon(base, mode_amps(target.port, target.waveplate_deg))
    elif isinstance(target, WeakCoherentConfig):
        if 2 + target.truncation > registry.max_photons:
            raise ConfigError(
                f"truncation {target.truncation} exceeds the photon cap "
                f"{registry.max_photons} together with the pair photons"
            )
        tgt_amps = mode_amps(target.port, target.waveplate_deg)
        merged: dict = {}
        sector = base
        for n in range(target.truncation + 1):
            if n > 0:
                sector = add_photon(sector, tgt_amps)
            scale = math.sqrt(
                poisson_weight(n, target.mean_photon_number) / math.factorial(n)
            )
            for occ, amp in sector.terms.items():
                merged[occ] = merged.get(occ, 0j) + amp * scale
        state = PhotonicState(registry, merged)
    else:
        raise ConfigError(f"unknown target source {target!r}")

    state, _ = normalize(state)
    return state


def coincidence_probability(
    state: PhotonicState,
    circuit: OpticalCircuit,
    analyzers: AnalyzerSettings,
    pattern: DetectionPattern,
    frame_offsets: Mapping[str, float] | None = None,
    efficiency: float = 1.0,
) -> float:
    """Probability that every pattern detector fires behind its analyzer.

    Each listed port needs at least ``count`` photons in the analyzer-aligned
    channel (value 0) or the orthogonal one (value 1); bins are summed since
    detectors resolve neither bins nor photon number. Extra photons from
    contamination sectors may land anywhere, including the blocked channel,
    which is exactly how a multi-photon pulse fakes a coincidence.
    """
    reg = state.registry
    unitary = compile_circuit(circuit)
    angles = analyzers.logical_angles(frame_offsets)
    ports = [r.port for r in pattern.required]
    missing = [p for p in ports if p not in angles]
    if missing:
        raise ConfigError(f"no analyzer angle for ports {missing}")
    rot = analyzer_rotation(reg, {p: angles[p] for p in ports})
    combined = ModeUnitary(rot.matrix @ unitary.matrix, reg)
    final = evolve(state, combined)

    channels = {}
    for r in pattern.required:
        value = 0 if r.value is ANY else r.value
        channels[r.port] = (reg.channel_modes(r.port, value), r.count, r.value)

    accepted = 0.0
    for occ, amp in final.terms.items():
        ok = True
        for port, (modes, count, value) in channels.items():
            if value is ANY:
                hits = sum(occ[m] for m in reg.port_modes(port))
            else:
                hits = sum(occ[m] for m in modes)
            if hits < count:
                ok = False
                break
        if ok:
            accepted += abs(amp) ** 2
    total = state.norm() ** 2
    return (accepted / total) * efficiency ** len(pattern.required)


def sample_counts(
    prob_table: Sequence[tuple[Any, float]],
    counting: CountingConfig,
) -> list[tuple[Any, int]]:
    """Draw per-setting coincidence counts, reproducibly.

    Counts are Binomial(trials, p * efficiency^3), the efficiency entering
    once per detector of a three-fold coincidence. One seeded generator is
    consumed in the order settings are listed, so identical (seed, table)
    pairs give identical counts.
    """
    if counting.seed is None:
        raise ConfigError("sampling requires an explicit seed")
    rng = np.random.default_rng(counting.seed)
    eff = counting.detector_efficiency**3
    out = []
    for setting, p in prob_table:
        if not -1e-12 <= p <= 1.0 + 1e-12:
            raise ConfigError(f"probability {p!r} outside [0, 1]")
        scaled = min(max(p * eff, 0.0), 1.0)
        out.append((setting, int(rng.binomial(counting.trials_per_setting, scaled))))
    return out

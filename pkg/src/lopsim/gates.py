"""Post-selected gate presets, detection patterns, and logical-level checks.

The one-ancilla controlled-NOT works in the coincidence basis: an ancilla
photon prepared in (|0> + |1>)/sqrt(2) meets the control at a polarizing
splitter, the ancilla arm then meets the target at a second splitter whose
basis is rotated by 45 degrees, and events count only when one photon exits
each of the three output ports. Accepting the ancilla detector's logical |0>
outcome projects the control/target pair onto the CNOT image of the input
with probability 1/8; accepting the |1> outcome as well and bit-flipping the
target raises that to 1/4.

Analyzer geometry: on the arms downstream of the rotated splitter the
physical analyzer frame is rotated by 45 degrees relative to the logical
frame. ``physical_to_logical_angle`` is the single place that mapping lives;
the frame offsets of each preset are published next to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConventionError, RegistryConflictError
from .fock import (
    InputAmplitudes,
    ModeRegistry,
    Occupation,
    PhotonicState,
    bit_flip,
    normalize,
    phase_flip,
    single_photon,
    tensor,
    vacuum,
)
from .optics import (
    ModeUnitary,
    OpticalCircuit,
    PolarizingBS,
    analyzer_rotation,
    compile_circuit,
    evolve,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)

#: Detector value meaning "fire on any polarization".
ANY = None

CNOT_MATRIX = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ],
    dtype=complex,
)

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")

#: Physical-minus-logical analyzer offsets (degrees) for the gate presets.
#: Arms behind the 45-degree splitter are rotated; the control arm is not.
FRAME_OFFSETS = {
    "cnot1a": {"A": 45.0, "C": 0.0, "T": 45.0},
    "cnot2a": {"A1": 0.0, "A2": 45.0, "C": 0.0, "T": 45.0},
    "encoder": {"A": 0.0, "C": 0.0},
    "dcnot": {"C": 45.0, "T": 45.0},
}


def physical_to_logical_angle(physical_deg: float, offset_deg: float) -> float:
    """Map a lab analyzer angle onto the logical frame of its arm."""
    return (physical_deg - offset_deg) % 180.0


def logical_to_physical_angle(logical_deg: float, offset_deg: float) -> float:
    return (logical_deg + offset_deg) % 180.0


@dataclass(frozen=True)
class PatternRequirement:
    """Photon count demanded on one analyzed output port.

    ``value`` 0 selects the polarization aligned with ``basis_angle_deg``
    (logical frame), 1 the orthogonal one, and ``ANY`` counts photons in the
    port regardless of polarization. Internal bins are always summed over:
    detectors do not resolve them.
    """

    port: str
    count: int = 1
    basis_angle_deg: float = 0.0
    value: int | None = ANY

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("required count must be >= 0")
        if self.value not in (ANY, 0, 1):
            raise ValueError("value must be 0, 1, or ANY")


@dataclass(frozen=True)
class DetectionPattern:
    required: tuple[PatternRequirement, ...]
    total_photons: int

    def __post_init__(self) -> None:
        ports = [r.port for r in self.required]
        if len(set(ports)) != len(ports):
            raise ValueError("pattern ports must be distinct")
        if self.total_photons < 0:
            raise ValueError("total_photons must be >= 0")


def coincidence_pattern(
    ports: Sequence[str], ancilla: str | None = None, ancilla_value: int = 0
) -> DetectionPattern:
    """One photon per port; optionally pin the ancilla arm's logical value."""
    reqs = []
    for p in ports:
        if p == ancilla:
            reqs.append(PatternRequirement(p, 1, 0.0, ancilla_value))
        else:
            reqs.append(PatternRequirement(p, 1))
    return DetectionPattern(tuple(reqs), len(ports))


@dataclass(frozen=True)
class Branch:
    """One accepted detector outcome with its conditional state."""

    outcomes: tuple[tuple[str, int], ...]
    probability: float
    state: PhotonicState | None
    correction: str = ""


@dataclass(frozen=True)
class PostSelectOutcome:
    conditional_state: PhotonicState | None
    success_probability: float
    residual_weight: float
    flagged: bool = False
    branches: tuple[Branch, ...] = ()


def _rotation_for_pattern(
    registry: ModeRegistry, pattern: DetectionPattern
) -> ModeUnitary | None:
    angles = {
        r.port: r.basis_angle_deg
        for r in pattern.required
        if r.value is not ANY and r.basis_angle_deg % 180.0 != 0.0
    }
    if not angles:
        return None
    return analyzer_rotation(registry, angles)


def post_select(state: PhotonicState, pattern: DetectionPattern) -> PostSelectOutcome:
    """Project onto a detection pattern and renormalize.

    The returned probability is relative to the state's squared norm.
    ``residual_weight`` is the weight failing the port-occupancy part of the
    pattern alone, i.e. the weight outside the coincidence condition, which
    for the three-port gate patterns is the non-coincidence remainder.
    """
    reg = state.registry
    for r in pattern.required:
        reg.port_index(r.port)  # raises on unknown ports
    total_sq = state.norm() ** 2
    if total_sq == 0.0:
        return PostSelectOutcome(None, 0.0, 0.0, flagged=True)

    rot = _rotation_for_pattern(reg, pattern)
    work = evolve(state, rot) if rot is not None else state

    port_mode_cache = {r.port: reg.port_modes(r.port) for r in pattern.required}
    channel_cache = {
        r.port: reg.channel_modes(r.port, r.value)
        for r in pattern.required
        if r.value is not ANY
    }

    matched: dict[Occupation, complex] = {}
    coincidence_sq = 0.0
    for occ, amp in work.terms.items():
        counts_ok = sum(occ) == pattern.total_photons and all(
            sum(occ[m] for m in port_mode_cache[r.port]) == r.count
            for r in pattern.required
        )
        if not counts_ok:
            continue
        coincidence_sq += abs(amp) ** 2
        if all(
            r.value is ANY
            or sum(occ[m] for m in channel_cache[r.port]) == r.count
            for r in pattern.required
        ):
            matched[occ] = amp

    probability = sum(abs(a) ** 2 for a in matched.values()) / total_sq
    residual = 1.0 - coincidence_sq / total_sq
    if probability < 1e-30:
        return PostSelectOutcome(None, 0.0, residual, flagged=True)
    projected = PhotonicState(reg, matched)
    if rot is not None:
        back = ModeUnitary(rot.matrix.conj().T, reg)
        projected = evolve(projected, back)
    conditional, _ = normalize(projected)
    return PostSelectOutcome(conditional, probability, residual)


@dataclass(frozen=True)
class FeedForwardRule:
    """Classical correction: flip the target when the trigger value is seen."""

    trigger_port: str
    trigger_value: int
    correction_port: str

    def applies(self, port: str, value: int) -> bool:
        return port == self.trigger_port and value == self.trigger_value

    def apply(self, state: PhotonicState) -> PhotonicState:
        return bit_flip(state, self.correction_port)


def bell_state(
    registry: ModeRegistry, label: str, port0: str, port1: str
) -> PhotonicState:
    """Maximally entangled polarization pair on two ports, bin 0."""
    if label not in BELL_LABELS:
        raise ValueError(f"label must be one of {BELL_LABELS}")
    terms: dict[Occupation, complex] = {}
    pairs = {
        "phi+": (((0, 0), 1.0), ((1, 1), 1.0)),
        "phi-": (((0, 0), 1.0), ((1, 1), -1.0)),
        "psi+": (((0, 1), 1.0), ((1, 0), 1.0)),
        "psi-": (((0, 1), 1.0), ((1, 0), -1.0)),
    }[label]
    for (p0, p1), sign in pairs:
        occ = [0] * registry.n_modes
        occ[registry.index(port0, p0, 0)] += 1
        occ[registry.index(port1, p1, 0)] += 1
        terms[tuple(occ)] = sign * INV_SQRT2
    return PhotonicState(registry, terms)


def gate_registry(internal_bins: int = 1) -> ModeRegistry:
    return ModeRegistry(("A", "C", "T"), internal_bins)


def one_ancilla_circuit(
    registry: ModeRegistry,
    ancilla: str = "A",
    control: str = "C",
    target: str = "T",
) -> OpticalCircuit:
    """Splitter network of the one-ancilla gate.

    The ancilla/control splitter separates H and V; the ancilla/target
    splitter works in the 45-degree basis, realized as a rotator sandwich.
    """
    return OpticalCircuit(
        registry,
        (
            PolarizingBS((ancilla, control), 0.0),
            PolarizingBS((ancilla, target), 45.0),
        ),
    )


def two_ancilla_circuit(
    registry: ModeRegistry,
    ancilla1: str = "A1",
    ancilla2: str = "A2",
    control: str = "C",
    target: str = "T",
) -> OpticalCircuit:
    return OpticalCircuit(
        registry,
        (
            PolarizingBS((control, ancilla1), 0.0),
            PolarizingBS((ancilla2, target), 45.0),
        ),
    )


def superposition_ancilla(registry: ModeRegistry, port: str = "A") -> PhotonicState:
    return single_photon(registry, port, (INV_SQRT2, INV_SQRT2))


def cnot_one_ancilla(
    input: InputAmplitudes, registry: ModeRegistry | None = None
) -> PostSelectOutcome:
    """Run the one-ancilla gate, accepting only the ancilla |0> outcome.

    The conditional state equals CNOT applied to the input, exactly under the
    pinned splitter conventions, with success probability 1/8.
    """
    reg = registry or gate_registry()
    anc = single_photon(
        ModeRegistry(("A",), reg.internal_bins, reg.max_photons),
        "A",
        (INV_SQRT2, INV_SQRT2),
    )
    qubits = input.as_state(
        ModeRegistry(("C", "T"), reg.internal_bins, reg.max_photons)
    )
    state = tensor(anc, qubits)
    out = evolve(state, compile_circuit(one_ancilla_circuit(state.registry)))
    pattern = coincidence_pattern(("A", "C", "T"), ancilla="A", ancilla_value=0)
    return post_select(out, pattern)


def cnot_one_ancilla_with_feedforward(input: InputAmplitudes) -> PostSelectOutcome:
    """Accept both ancilla outcomes, bit-flipping the target on |1>.

    Both corrected branches carry the same CNOT image of the input; the
    combined success probability is 1/4.
    """
    reg = gate_registry()
    anc = single_photon(ModeRegistry(("A",)), "A", (INV_SQRT2, INV_SQRT2))
    qubits = input.as_state(ModeRegistry(("C", "T")))
    state = tensor(anc, qubits)
    out = evolve(state, compile_circuit(one_ancilla_circuit(state.registry)))

    rule = FeedForwardRule("A", 1, "T")
    branches = []
    for value in (0, 1):
        sel = post_select(
            out, coincidence_pattern(("A", "C", "T"), ancilla="A", ancilla_value=value)
        )
        st = sel.conditional_state
        corr = ""
        if st is not None and rule.applies("A", value):
            st = rule.apply(st)
            corr = "X on T"
        branches.append(Branch((("A", value),), sel.success_probability, st, corr))
    total = sum(b.probability for b in branches)
    residual = post_select(
        out, coincidence_pattern(("A", "C", "T"))
    ).residual_weight
    _check_branches_agree(branches)
    return PostSelectOutcome(
        branches[0].state, total, residual, branches=tuple(branches)
    )


def _check_branches_agree(branches: Sequence[Branch], tol: float = 1e-10) -> None:
    states = [b.state for b in branches if b.state is not None]
    for other in states[1:]:
        from .fock import inner_product

        overlap = abs(inner_product(states[0], other))
        if abs(overlap - 1.0) > tol:
            raise ConventionError(
                f"corrected branches disagree (|overlap| = {overlap!r}); "
                "the splitter sign conventions are broken"
            )


#: Outcome-dependent corrections for the two-ancilla gate. Keys are the
#: (parity-check, target-side) detector readings; entries list the Pauli
#: fixes plus the bookkeeping phase that makes every branch literally equal.
TWO_ANCILLA_CORRECTIONS = {
    (0, 0): ((), 1.0),
    (0, 1): (("X:T",), 1.0),
    (1, 0): (("Z:C",), -1.0),
    (1, 1): (("Z:C", "X:T"), -1.0),
}


def cnot_two_ancilla(input: InputAmplitudes) -> PostSelectOutcome:
    """Entangled-ancilla-pair gate with all four detector outcomes accepted.

    The parity-check detector on the first ancilla arm is read in the
    45-degree basis, the detector behind the rotated splitter in its logical
    basis. Outcome-dependent Z (control) and X (target) corrections bring
    every branch onto CNOT(input); the corrected total probability is 1/4.
    """
    reg = ModeRegistry(("A1", "A2", "C", "T"))
    pair = bell_state(ModeRegistry(("A1", "A2")), "phi+", "A1", "A2")
    qubits = input.as_state(ModeRegistry(("C", "T")))
    state = tensor(pair, qubits)
    out = evolve(state, compile_circuit(two_ancilla_circuit(state.registry)))

    branches = []
    for d1 in (0, 1):
        for d2 in (0, 1):
            pattern = DetectionPattern(
                (
                    PatternRequirement("A1", 1, 45.0, d1),
                    PatternRequirement("A2", 1, 0.0, d2),
                    PatternRequirement("C", 1),
                    PatternRequirement("T", 1),
                ),
                4,
            )
            sel = post_select(out, pattern)
            st = sel.conditional_state
            labels, phase = TWO_ANCILLA_CORRECTIONS[(d1, d2)]
            if st is not None:
                for label in labels:
                    kind, port = label.split(":")
                    st = bit_flip(st, port) if kind == "X" else phase_flip(st, port)
                if phase != 1.0:
                    st = st.scaled(phase)
            branches.append(
                Branch(
                    (("A1", d1), ("A2", d2)),
                    sel.success_probability,
                    st,
                    " ".join(labels),
                )
            )
    _check_branches_agree(branches)
    total = sum(b.probability for b in branches)
    residual = post_select(
        out, coincidence_pattern(("A1", "A2", "C", "T"))
    ).residual_weight
    return PostSelectOutcome(
        branches[0].state, total, residual, branches=tuple(branches)
    )


def encoder(
    qubit: tuple[complex, complex], registry: ModeRegistry | None = None
) -> PostSelectOutcome:
    """Copy a logical value onto two ports using one ancilla photon.

    beta0 |0> + beta1 |1> becomes beta0 |00> + beta1 |11> across the splitter
    outputs with probability 1/2.
    """
    b0, b1 = qubit
    if abs(abs(b0) ** 2 + abs(b1) ** 2 - 1.0) > 1e-10:
        raise ValueError("qubit amplitudes must be normalized")
    reg = registry or ModeRegistry(("A", "C"))
    anc = superposition_ancilla(reg, "A")
    state = add_qubit_photon(anc, "C", (b0, b1))
    circ = OpticalCircuit(reg, (PolarizingBS(("A", "C"), 0.0),))
    out = evolve(state, compile_circuit(circ))
    return post_select(out, coincidence_pattern(("A", "C")))


def add_qubit_photon(
    state: PhotonicState, port: str, pol_amplitudes: tuple[complex, complex]
) -> PhotonicState:
    from .fock import add_photon

    reg = state.registry
    amps = {}
    for s, c in enumerate(pol_amplitudes):
        if c != 0:
            amps[reg.index(port, s, 0)] = complex(c)
    return add_photon(state, amps)


def destructive_cnot(input: InputAmplitudes) -> PostSelectOutcome:
    """Single rotated splitter between control and target.

    The control-side detector reads its logical |0> (a 45-degree analyzer in
    the lab frame); the surviving photon carries the XOR of the two inputs.
    The control qubit is consumed, so this is not a full two-qubit gate.
    """
    reg = ModeRegistry(("C", "T"))
    state = input.as_state(reg)
    circ = OpticalCircuit(reg, (PolarizingBS(("C", "T"), 45.0),))
    out = evolve(state, compile_circuit(circ))
    pattern = DetectionPattern(
        (PatternRequirement("C", 1, 0.0, 0), PatternRequirement("T", 1)), 2
    )
    return post_select(out, pattern)


def encoder_then_destructive_cnot(input: InputAmplitudes) -> PostSelectOutcome:
    """Compose the encoder with the destructive gate on the copied arm.

    Wiring one encoder output into the destructive stage reproduces the
    one-ancilla gate; the composition is checked as a logical map.
    """
    reg = gate_registry()
    anc = single_photon(ModeRegistry(("A",)), "A", (INV_SQRT2, INV_SQRT2))
    qubits = input.as_state(ModeRegistry(("C", "T")))
    state = tensor(anc, qubits)

    enc = evolve(
        state,
        compile_circuit(OpticalCircuit(reg, (PolarizingBS(("A", "C"), 0.0),))),
    )
    enc_sel = post_select(
        enc,
        DetectionPattern(
            (
                PatternRequirement("A", 1),
                PatternRequirement("C", 1),
                PatternRequirement("T", 1),
            ),
            3,
        ),
    )
    if enc_sel.conditional_state is None:
        return enc_sel
    dc = evolve(
        enc_sel.conditional_state,
        compile_circuit(OpticalCircuit(reg, (PolarizingBS(("A", "T"), 45.0),))),
    )
    dc_sel = post_select(
        dc, coincidence_pattern(("A", "C", "T"), ancilla="A", ancilla_value=0)
    )
    total_p = enc_sel.success_probability * dc_sel.success_probability
    return PostSelectOutcome(
        dc_sel.conditional_state, total_p, dc_sel.residual_weight
    )


def logical_two_qubit_amplitudes(
    state: PhotonicState,
    control_port: str = "C",
    target_port: str = "T",
) -> np.ndarray:
    """Extract the four logical amplitudes of a coincidence-basis state.

    Every term must hold exactly one bin-0 photon in each analyzed port, and
    any spectator content must be identical across terms, otherwise the state
    is not a pure two-qubit vector and a ValueError is raised.
    """
    reg = state.registry
    spectator_modes = [
        m
        for m in range(reg.n_modes)
        if reg.mode(m)[0] not in (control_port, target_port)
    ]
    vec = np.zeros(4, dtype=complex)
    spectator_ref: tuple[int, ...] | None = None
    for occ, amp in state.terms.items():
        spect = tuple(occ[m] for m in spectator_modes)
        if spectator_ref is None:
            spectator_ref = spect
        elif spect != spectator_ref:
            raise ValueError("spectator modes are entangled with the qubit pair")
        c = t = None
        for pol in (0, 1):
            if occ[reg.index(control_port, pol, 0)] == 1:
                c = pol
            if occ[reg.index(target_port, pol, 0)] == 1:
                t = pol
        if c is None or t is None:
            raise ValueError("term is not a one-photon-per-port logical state")
        vec[c * 2 + t] = amp
    return vec


@dataclass(frozen=True)
class LogicalMap:
    """Post-selected transfer matrix on the control/target logical space.

    ``matrix`` carries the sqrt(success probability) scale, so for an ideal
    preset matrix^dagger matrix equals p times the identity.
    """

    matrix: np.ndarray
    success_probability: float
    max_deviation: float


def extract_logical_map(
    gate: Callable[[InputAmplitudes], PostSelectOutcome],
    reference: np.ndarray | None = None,
    tol: float = 1e-10,
) -> LogicalMap:
    """Reconstruct the 4x4 map of a preset from basis and superposition probes.

    Raises ConventionError when the success probability varies across inputs
    or the superposition probes break linearity; both indicate a sign or
    frame convention bug rather than noise.
    """
    ref = CNOT_MATRIX if reference is None else reference
    basis_vectors = [
        (1, 0, 0, 0),
        (0, 1, 0, 0),
        (0, 0, 1, 0),
        (0, 0, 0, 1),
    ]
    columns = []
    probs = []
    for v in basis_vectors:
        outcome = gate(InputAmplitudes(*v))
        if outcome.conditional_state is None:
            raise ConventionError("gate produced an empty outcome on a basis input")
        amps = logical_two_qubit_amplitudes(outcome.conditional_state)
        probs.append(outcome.success_probability)
        columns.append(amps * math.sqrt(outcome.success_probability))
    matrix = np.column_stack(columns)

    s = INV_SQRT2
    superpositions = [
        (s, 0, s, 0),
        (0, s, 0, s),
        (s, s, 0, 0),
        (s, 0, 0, 1j * s),
    ]
    for v in superpositions:
        outcome = gate(InputAmplitudes(*v))
        probs.append(outcome.success_probability)
        amps = logical_two_qubit_amplitudes(outcome.conditional_state)
        predicted = matrix @ np.array(v, dtype=complex)
        if np.max(np.abs(predicted - amps * math.sqrt(outcome.success_probability))) > tol:
            raise ConventionError("post-selected map is not linear on probes")

    p_mean = float(np.mean(probs))
    if max(probs) - min(probs) > tol:
        raise ConventionError(
            f"success probability varies across inputs: {min(probs)}..{max(probs)}"
        )
    deviation = float(np.max(np.abs(matrix / math.sqrt(p_mean) - ref)))
    return LogicalMap(matrix, p_mean, deviation)


def _joint_value_probabilities(
    state: PhotonicState,
    ports: tuple[str, str],
    angles_deg: tuple[float, float],
) -> np.ndarray:
    """2x2 table of analyzer outcomes on two ports, bins summed."""
    reg = state.registry
    rotated = evolve(
        state,
        analyzer_rotation(reg, {ports[0]: angles_deg[0], ports[1]: angles_deg[1]}),
    )
    table = np.zeros((2, 2))
    chans = {
        (p, v): reg.channel_modes(p, v) for p in ports for v in (0, 1)
    }
    for occ, amp in rotated.terms.items():
        vals = []
        for p in ports:
            n0 = sum(occ[m] for m in chans[(p, 0)])
            n1 = sum(occ[m] for m in chans[(p, 1)])
            if n0 + n1 != 1:
                raise ValueError(
                    f"port {p} does not hold exactly one photon; "
                    "not a two-qubit coincidence-basis state"
                )
            vals.append(0 if n0 == 1 else 1)
        table[vals[0], vals[1]] += abs(amp) ** 2
    return table


def correlation(
    state: PhotonicState,
    angle_a_deg: float,
    angle_b_deg: float,
    ports: tuple[str, str] = ("C", "T"),
) -> float:
    """Polarization correlation E(a, b) of a coincidence-basis pair."""
    t = _joint_value_probabilities(state, ports, (angle_a_deg, angle_b_deg))
    total = t.sum()
    if total <= 0:
        raise ValueError("state has no weight in the coincidence sector")
    return float((t[0, 0] + t[1, 1] - t[0, 1] - t[1, 0]) / total)


def canonical_chsh_pairs(
    a: float = 0.0, b: float = 22.5, a2: float = 45.0, b2: float = 67.5
) -> tuple[tuple[float, float], ...]:
    return ((a, b), (a, b2), (a2, b), (a2, b2))


def chsh_value(
    state: PhotonicState,
    angle_pairs: Sequence[tuple[float, float]] | None = None,
    ports: tuple[str, str] = ("C", "T"),
) -> float:
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| for a qubit pair.

    Up to 2 for any classical (product) statistics, 2 sqrt(2) for an ideal
    maximally entangled pair at the canonical angle set.
    """
    pairs = canonical_chsh_pairs() if angle_pairs is None else tuple(angle_pairs)
    if len(pairs) != 4:
        raise ValueError("CHSH needs exactly four analyzer angle pairs")
    e = [correlation(state, a, b, ports) for a, b in pairs]
    return abs(e[0] - e[1] + e[2] + e[3])

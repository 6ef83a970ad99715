"""Experiment orchestration: scenario files, runners, fits, and tables.

A scenario bundles sources, a gate preset or explicit circuit, an analyzer
sweep, and the counting configuration. Runners come in two modes: exact
probabilities, or seeded sampled counts that stand in for integration time.
Scenario parsing is strict, unknown keys are hard errors.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .fitting import FitResult, fit_cos_squared
from .fock import InputAmplitudes, ModeRegistry, PhotonicState, add_photon, vacuum
from .gates import (
    FRAME_OFFSETS,
    DetectionPattern,
    PatternRequirement,
    canonical_chsh_pairs,
    chsh_value,
    cnot_two_ancilla,
    coincidence_pattern,
    logical_two_qubit_amplitudes,
    one_ancilla_circuit,
    post_select,
)
from .optics import (
    BasisRotator,
    BeamSplitter,
    OpticalCircuit,
    PhaseShifter,
    PolarizingBS,
    Polarizer,
    WavePlate,
    compile_circuit,
    evolve,
)
from .sources import (
    AnalyzerSettings,
    CountingConfig,
    DistinguishabilityConfig,
    SinglePhotonTarget,
    SpdcPairConfig,
    WeakCoherentConfig,
    build_input_state,
    coincidence_probability,
    sample_counts,
)

EXPERIMENTS = ("truth-table", "fringe", "hom", "three-photon-scan", "chsh")
PRESETS = ("cnot1a", "cnot2a", "encoder", "dcnot")

DEFAULT_FRINGE_POINTS = 13
DEFAULT_OVERLAP_GRID = (0.0, 0.25, 0.5, 0.85, 0.95, 1.0)
DEFAULT_CHSH_GRID = (1.0, 0.9, 0.8, 0.7071067811865476, 0.65, 0.615, 0.5)
DEFAULT_CALIBRATION_TARGET = 0.615
DEFAULT_PAIR_OVERLAP = 0.90

_THREE_FOLD = DetectionPattern(
    (
        PatternRequirement("A", 1, 0.0, 0),
        PatternRequirement("C", 1, 0.0, 0),
        PatternRequirement("T", 1, 0.0, 0),
    ),
    3,
)


@dataclass(frozen=True)
class SourcesSpec:
    spdc: SpdcPairConfig
    target: Any
    overlaps: DistinguishabilityConfig
    birefringence: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    experiment: str
    preset: str | None
    circuit_spec: tuple | None
    frames: Mapping[str, float]
    sources: SourcesSpec
    sweep: Mapping[str, Any]
    counting: CountingConfig
    mode: str
    raw: Mapping[str, Any]

    @property
    def sampled(self) -> bool:
        return self.mode == "sampled-counts"


@dataclass(frozen=True)
class TruthTableReport:
    """4x4 grid of coincidence outcomes for the basis-input truth table.

    ``grid[i][j]`` pairs input basis i (control, target) with output analyzer
    cell j, both in the order 00, 01, 10, 11. In exact mode the rows are
    conditional distributions and ``row_success`` carries the pre-conditioning
    coincidence probability of each input; in sampled mode the grid holds raw
    counts. ``error_fraction`` is the weight on the twelve incorrect cells.
    """

    inputs: tuple[str, ...]
    grid: tuple[tuple[float, ...], ...]
    row_success: tuple[float, ...] | None
    error_fraction: float
    mode: str


@dataclass(frozen=True)
class RunArtifacts:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    summary: Mapping[str, Any]
    metadata: Mapping[str, Any]


# ---------------------------------------------------------------------------
# scenario parsing


def _take(raw: Mapping[str, Any], allowed: Sequence[str], context: str) -> dict:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {context}; allowed: {sorted(allowed)}")
    return dict(raw)


def _parse_overlaps(value: Any) -> DistinguishabilityConfig:
    if value is None or value == "ideal":
        return DistinguishabilityConfig.ideal()
    if value == "paper-like":
        return DistinguishabilityConfig.paper_like(calibrated_target_overlap())
    if isinstance(value, Mapping):
        pairs: dict[tuple[str, str], float] = {}
        for key, v in value.items():
            if isinstance(key, str):
                if len(key) != 2:
                    raise ConfigError(
                        f"overlap key {key!r} must name two single-letter ports"
                    )
                pairs[(key[0], key[1])] = float(v)
            else:
                pairs[tuple(key)] = float(v)
        return DistinguishabilityConfig(pairs)
    raise ConfigError(f"cannot interpret overlaps spec {value!r}")


def _parse_target(raw: Mapping[str, Any]) -> Any:
    kind = raw.get("kind", "weak-coherent")
    if kind == "single":
        spec = _take(raw, ("kind", "port", "waveplate_deg"), "sources.target")
        return SinglePhotonTarget(
            port=spec.get("port", "T"),
            waveplate_deg=float(spec.get("waveplate_deg", 0.0)),
        )
    if kind == "weak-coherent":
        spec = _take(
            raw,
            ("kind", "port", "waveplate_deg", "mean_photon_number", "truncation"),
            "sources.target",
        )
        return WeakCoherentConfig(
            port=spec.get("port", "T"),
            mean_photon_number=float(spec.get("mean_photon_number", 1e-3)),
            truncation=int(spec.get("truncation", 2)),
            waveplate_deg=float(spec.get("waveplate_deg", 0.0)),
        )
    raise ConfigError(f"unknown target source kind {kind!r}")


def _parse_sources(raw: Mapping[str, Any]) -> SourcesSpec:
    spec = _take(raw, ("spdc", "target", "overlaps", "birefringence"), "sources")
    spdc_raw = _take(
        spec.get("spdc", {}),
        (
            "ancilla_port",
            "control_port",
            "ancilla_waveplate_deg",
            "control_waveplate_deg",
        ),
        "sources.spdc",
    )
    spdc = SpdcPairConfig(
        ancilla_port=spdc_raw.get("ancilla_port", "A"),
        control_port=spdc_raw.get("control_port", "C"),
        ancilla_waveplate_deg=float(spdc_raw.get("ancilla_waveplate_deg", 22.5)),
        control_waveplate_deg=float(spdc_raw.get("control_waveplate_deg", 0.0)),
    )
    target = _parse_target(spec.get("target", {"kind": "single"}))
    overlaps = _parse_overlaps(spec.get("overlaps"))
    biref = {str(k): float(v) for k, v in spec.get("birefringence", {}).items()}
    return SourcesSpec(spdc, target, overlaps, biref)


_ELEMENT_PARSERS: dict[str, Callable[[dict], Any]] = {
    "beam_splitter": lambda d: BeamSplitter(
        tuple(d["ports"]), float(d.get("reflectivity", 0.5))
    ),
    "polarizing_bs": lambda d: PolarizingBS(
        tuple(d["ports"]), float(d.get("basis_angle_deg", 0.0))
    ),
    "wave_plate": lambda d: WavePlate(d["port"], float(d["angle_deg"])),
    "basis_rotator": lambda d: BasisRotator(d["port"], float(d["angle_deg"])),
    "phase_shifter": lambda d: PhaseShifter(d["port"], float(d["phase_deg"])),
    "polarizer": lambda d: Polarizer(d["port"], float(d["angle_deg"])),
}

_ELEMENT_KEYS: dict[str, tuple[str, ...]] = {
    "beam_splitter": ("kind", "ports", "reflectivity"),
    "polarizing_bs": ("kind", "ports", "basis_angle_deg"),
    "wave_plate": ("kind", "port", "angle_deg"),
    "basis_rotator": ("kind", "port", "angle_deg"),
    "phase_shifter": ("kind", "port", "phase_deg"),
    "polarizer": ("kind", "port", "angle_deg"),
}


def parse_element(raw: Mapping[str, Any]) -> Any:
    kind = raw.get("kind")
    if kind not in _ELEMENT_PARSERS:
        raise ConfigError(
            f"unknown element kind {kind!r}; allowed: {sorted(_ELEMENT_PARSERS)}"
        )
    spec = _take(raw, _ELEMENT_KEYS[kind], f"circuit element {kind}")
    return _ELEMENT_PARSERS[kind](spec)


def parse_scenario(raw: Mapping[str, Any]) -> Scenario:
    spec = _take(
        raw,
        (
            "name",
            "experiment",
            "preset",
            "circuit",
            "frames",
            "sources",
            "sweep",
            "counting",
            "mode",
        ),
        "scenario",
    )
    experiment = spec.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {EXPERIMENTS}, got {experiment!r}"
        )
    preset = spec.get("preset")
    circuit_spec = spec.get("circuit")
    if preset is not None and circuit_spec is not None:
        raise ConfigError("give either a preset or an explicit circuit, not both")
    if preset is None and circuit_spec is None:
        preset = "cnot1a"
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"preset must be one of {PRESETS}, got {preset!r}")
    circuit_elements = (
        tuple(parse_element(e) for e in circuit_spec) if circuit_spec else None
    )
    frames = {str(k): float(v) for k, v in spec.get("frames", {}).items()}
    if not frames:
        frames = dict(FRAME_OFFSETS["cnot1a"]) if preset == "cnot1a" else {}
    sources = _parse_sources(spec.get("sources", {}))

    counting_raw = _take(
        spec.get("counting", {}),
        ("trials_per_setting", "detector_efficiency", "seed"),
        "counting",
    )
    counting = CountingConfig(
        trials_per_setting=int(counting_raw.get("trials_per_setting", 100_000)),
        detector_efficiency=float(counting_raw.get("detector_efficiency", 1.0)),
        seed=counting_raw.get("seed"),
    )
    mode = spec.get("mode", "exact-probabilities")
    if mode not in ("exact-probabilities", "sampled-counts"):
        raise ConfigError(
            "mode must be 'exact-probabilities' or 'sampled-counts', got "
            f"{mode!r}"
        )
    if mode == "sampled-counts" and counting.seed is None:
        raise ConfigError("sampled-counts mode requires counting.seed")
    sweep = dict(spec.get("sweep", {}))
    return Scenario(
        name=spec.get("name", experiment),
        experiment=experiment,
        preset=preset,
        circuit_spec=circuit_elements,
        frames=frames,
        sources=sources,
        sweep=sweep,
        counting=counting,
        mode=mode,
        raw=dict(raw),
    )


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(json.load(fh))


def scenario_hash(sc: Scenario) -> str:
    blob = json.dumps(sc.raw, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# pipeline pieces


def _scenario_circuit(sc: Scenario, registry: ModeRegistry) -> OpticalCircuit:
    if sc.circuit_spec is not None:
        elements = sc.circuit_spec
    else:
        elements = one_ancilla_circuit(registry).elements
    extra = tuple(
        BasisRotator(port, angle) for port, angle in sorted(sc.sources.birefringence.items())
    )
    return OpticalCircuit(registry, tuple(elements) + extra)


def _pipeline_probability(
    sc: Scenario,
    state: PhotonicState,
    circuit: OpticalCircuit,
    analyzers: AnalyzerSettings,
) -> float:
    return coincidence_probability(
        state, circuit, analyzers, _THREE_FOLD, frame_offsets=sc.frames
    )


def _require_preset(sc: Scenario, allowed: tuple[str, ...]) -> None:
    if sc.circuit_spec is not None:
        return
    if sc.preset not in allowed:
        raise ConfigError(
            f"experiment {sc.experiment!r} needs a preset in {allowed}, "
            f"got {sc.preset!r}"
        )


# ---------------------------------------------------------------------------
# truth table

_BASIS_LABELS = ("00", "01", "10", "11")


def run_truth_table(sc: Scenario) -> TruthTableReport:
    """Coincidence outcomes for every basis input against every analyzer cell."""
    _require_preset(sc, ("cnot1a", "cnot2a"))
    if sc.preset == "cnot2a":
        return _truth_table_two_ancilla(sc)

    probs: list[list[float]] = []
    for ci, ti in ((0, 0), (0, 1), (1, 0), (1, 1)):
        spdc = SpdcPairConfig(
            ancilla_port=sc.sources.spdc.ancilla_port,
            control_port=sc.sources.spdc.control_port,
            ancilla_waveplate_deg=sc.sources.spdc.ancilla_waveplate_deg,
            control_waveplate_deg=45.0 * ci,
        )
        target = _with_waveplate(sc.sources.target, 45.0 * ti)
        state = build_input_state(spdc, target, sc.sources.overlaps)
        circuit = _scenario_circuit(sc, state.registry)
        row = []
        for co, to in ((0, 0), (0, 1), (1, 0), (1, 1)):
            analyzers = AnalyzerSettings(
                theta_a=0.0, theta_c=90.0 * co, theta_t=90.0 * to, frame="logical"
            )
            row.append(_pipeline_probability(sc, state, circuit, analyzers))
        probs.append(row)
    return _finish_truth_table(sc, probs)


def _with_waveplate(target: Any, angle: float) -> Any:
    if isinstance(target, SinglePhotonTarget):
        return SinglePhotonTarget(target.port, angle)
    return WeakCoherentConfig(
        target.port, target.mean_photon_number, target.truncation, angle
    )


def _truth_table_two_ancilla(sc: Scenario) -> TruthTableReport:
    if sc.sources.overlaps.as_dict():
        raise ConfigError(
            "the two-ancilla preset runs at the logical level; "
            "distinguishability knobs apply to the one-ancilla pipeline only"
        )
    probs = []
    for ci, ti in ((0, 0), (0, 1), (1, 0), (1, 1)):
        outcome = cnot_two_ancilla(InputAmplitudes.basis(ci, ti))
        amps = logical_two_qubit_amplitudes(outcome.conditional_state)
        cells = np.abs(amps) ** 2 * outcome.success_probability
        probs.append([float(c) for c in cells])
    return _finish_truth_table(sc, probs)


def _finish_truth_table(sc: Scenario, probs: list[list[float]]) -> TruthTableReport:
    correct = {i: (i >> 1) * 2 + (((i >> 1) ^ (i & 1)) & 1) for i in range(4)}
    if sc.sampled:
        table = [
            ((i, j), probs[i][j]) for i in range(4) for j in range(4)
        ]
        counts = dict(
            ((i, j), c) for (i, j), c in sample_counts(table, sc.counting)
        )
        grid = tuple(
            tuple(float(counts[(i, j)]) for j in range(4)) for i in range(4)
        )
        total = sum(sum(r) for r in grid)
        wrong = sum(
            grid[i][j] for i in range(4) for j in range(4) if j != correct[i]
        )
        err = wrong / total if total else 0.0
        return TruthTableReport(_BASIS_LABELS, grid, None, err, sc.mode)
    row_success = tuple(sum(row) for row in probs)
    grid = tuple(
        tuple(p / s if s > 0 else 0.0 for p in row)
        for row, s in zip(probs, row_success)
    )
    total = sum(sum(r) for r in probs)
    wrong = sum(
        probs[i][j] for i in range(4) for j in range(4) if j != correct[i]
    )
    err = wrong / total if total else 0.0
    return TruthTableReport(_BASIS_LABELS, grid, row_success, err, sc.mode)


# ---------------------------------------------------------------------------
# fringe


@dataclass(frozen=True)
class FringeRun:
    angles_deg: tuple[float, ...]
    values: tuple[float, ...]
    fit: FitResult
    mode: str


def _fringe_angles(sc: Scenario) -> tuple[np.ndarray, AnalyzerSettings]:
    sweep = _take(
        sc.sweep,
        ("start", "stop", "points", "theta_a", "theta_c", "frame", "free_period"),
        "sweep",
    )
    start = float(sweep.get("start", 0.0))
    stop = float(sweep.get("stop", 180.0))
    points = int(sweep.get("points", DEFAULT_FRINGE_POINTS))
    frame = sweep.get("frame", "physical")
    theta_a = float(sweep.get("theta_a", 45.0 if frame == "physical" else 0.0))
    theta_c = float(sweep.get("theta_c", 0.0))
    if points < 3:
        raise ConfigError("a fringe sweep needs at least 3 points")
    grid = np.linspace(start, stop, points)
    base = AnalyzerSettings(theta_a=theta_a, theta_c=theta_c, frame=frame)
    return grid, base


def run_fringe(sc: Scenario) -> FringeRun:
    """Coincidence fringe against the target analyzer, with its Malus fit.

    Only the target analyzer varies across the sweep; the ancilla arm stays
    on its logical |0> and the control analyzer is held fixed.
    """
    _require_preset(sc, ("cnot1a",))
    grid, base = _fringe_angles(sc)
    state = build_input_state(
        sc.sources.spdc, sc.sources.target, sc.sources.overlaps
    )
    circuit = _scenario_circuit(sc, state.registry)
    probs = [
        _pipeline_probability(
            sc,
            state,
            circuit,
            AnalyzerSettings(base.theta_a, base.theta_c, float(t), base.frame),
        )
        for t in grid
    ]
    if sc.sampled:
        counts = sample_counts(list(zip(grid, probs)), sc.counting)
        values = [float(c) for _, c in counts]
    else:
        values = probs
    free_period = bool(sc.sweep.get("free_period", False))
    fit = fit_cos_squared(np.asarray(grid), np.asarray(values), free_period=free_period)
    return FringeRun(tuple(float(t) for t in grid), tuple(values), fit, sc.mode)


# ---------------------------------------------------------------------------
# two-photon interference scan


def hom_coincidence_probability(overlap: float) -> float:
    """Coincidence probability for one photon per input of a balanced splitter."""
    dist = DistinguishabilityConfig({("A", "C"): overlap})
    bins, vectors = dist.internal_vectors(("A", "C"))
    reg = ModeRegistry(("A", "C"), internal_bins=bins)
    state = vacuum(reg)
    for port in ("A", "C"):
        amps = {
            reg.index(port, 0, b): complex(c)
            for b, c in enumerate(vectors[port])
            if c != 0
        }
        state = add_photon(state, amps)
    circuit = OpticalCircuit(reg, (BeamSplitter(("A", "C"), 0.5),))
    out = evolve(state, compile_circuit(circuit))
    return post_select(out, coincidence_pattern(("A", "C"))).success_probability


def run_hom_scan(sc: Scenario) -> tuple[tuple[float, float, float], ...]:
    """Rows of (overlap, coincidence probability, visibility 1 - 2p)."""
    sweep = _take(sc.sweep, ("overlaps",), "sweep")
    grid = [float(s) for s in sweep.get("overlaps", DEFAULT_OVERLAP_GRID)]
    rows = []
    for s in grid:
        p = hom_coincidence_probability(s)
        rows.append((s, p, 1.0 - 2.0 * p))
    return tuple(rows)


# ---------------------------------------------------------------------------
# three-photon scan and calibration


def gated_fringe_visibility(
    target_overlap: float,
    pair_overlap: float = DEFAULT_PAIR_OVERLAP,
    points: int = DEFAULT_FRINGE_POINTS,
) -> float:
    """Fitted fringe visibility of the full gate at a given target overlap.

    Uses the ideal single-photon target so the scan isolates the overlap
    dependence; this is the calibration curve.
    """
    sc = parse_scenario(
        {
            "experiment": "fringe",
            "sources": {
                "target": {"kind": "single"},
                "overlaps": {
                    "AC": pair_overlap,
                    "AT": target_overlap,
                    "CT": target_overlap,
                },
            },
            "sweep": {"points": points},
        }
    )
    return run_fringe(sc).fit.visibility


def run_three_photon_scan(sc: Scenario) -> tuple[tuple[float, float], ...]:
    """Rows of (target-photon overlap, gated fringe visibility)."""
    sweep = _take(sc.sweep, ("overlaps", "pair_overlap"), "sweep")
    grid = [
        float(s)
        for s in sweep.get("overlaps", [round(0.1 * k, 3) for k in range(11)])
    ]
    pair = float(sweep.get("pair_overlap", DEFAULT_PAIR_OVERLAP))
    return tuple((s, gated_fringe_visibility(s, pair)) for s in grid)


def calibrate_overlaps(
    target_visibility: float = DEFAULT_CALIBRATION_TARGET,
    pair_overlap: float = DEFAULT_PAIR_OVERLAP,
    tolerance: float = 1e-6,
    max_iterations: int = 60,
) -> dict[str, float]:
    """Find the target-photon overlap whose gated visibility hits the target.

    Bisection on the monotone scan curve. Returns the full overlap table
    (pair overlap passed through) ready to feed back into scenarios.
    """
    if not 0.0 <= target_visibility <= 1.0:
        raise ConfigError("target visibility must lie in [0, 1]")
    lo, hi = 0.0, 1.0
    v_lo = gated_fringe_visibility(lo, pair_overlap)
    v_hi = gated_fringe_visibility(hi, pair_overlap)
    if not v_lo <= target_visibility <= v_hi:
        raise ConfigError(
            f"target visibility {target_visibility} outside the reachable "
            f"range [{v_lo:.6f}, {v_hi:.6f}]"
        )
    s = 0.5 * (lo + hi)
    for _ in range(max_iterations):
        s = 0.5 * (lo + hi)
        v = gated_fringe_visibility(s, pair_overlap)
        if abs(v - target_visibility) < tolerance:
            break
        if v < target_visibility:
            lo = s
        else:
            hi = s
    return {"AC": pair_overlap, "AT": s, "CT": s}


_calibration_cache: dict[tuple[float, float], float] = {}


def calibrated_target_overlap(
    target_visibility: float = DEFAULT_CALIBRATION_TARGET,
    pair_overlap: float = DEFAULT_PAIR_OVERLAP,
) -> float:
    key = (target_visibility, pair_overlap)
    if key not in _calibration_cache:
        _calibration_cache[key] = calibrate_overlaps(
            target_visibility, pair_overlap
        )["AT"]
    return _calibration_cache[key]


# ---------------------------------------------------------------------------
# CHSH


@dataclass(frozen=True)
class ChshRun:
    pairs: tuple[tuple[float, float], ...]
    ideal_s: float
    sweep: tuple[tuple[float, float], ...]  # (uniform overlap, S)
    scenario_s: float


def _entangled_conditional_state(overlaps: DistinguishabilityConfig) -> PhotonicState:
    # superposition control, target held at logical 0
    spdc = SpdcPairConfig(control_waveplate_deg=22.5)
    state = build_input_state(spdc, SinglePhotonTarget(), overlaps)
    circuit = one_ancilla_circuit(state.registry)
    out = evolve(state, compile_circuit(circuit))
    sel = post_select(
        out, coincidence_pattern(("A", "C", "T"), ancilla="A", ancilla_value=0)
    )
    if sel.conditional_state is None:
        raise ConfigError("entanglement scenario produced an empty outcome")
    return sel.conditional_state


def run_chsh(sc: Scenario) -> ChshRun:
    """S at the canonical angles for the entangling scenario.

    The sweep column degrades all pairwise overlaps together; that uniform
    degradation scales every correlation alike, so S crosses the classical
    bound 2 where the shared overlap passes 1/sqrt(2).
    """
    _require_preset(sc, ("cnot1a",))
    sweep = _take(sc.sweep, ("angles", "overlap_grid"), "sweep")
    angles = sweep.get("angles")
    pairs = (
        canonical_chsh_pairs(*[float(a) for a in angles])
        if angles
        else canonical_chsh_pairs()
    )
    ideal = chsh_value(
        _entangled_conditional_state(DistinguishabilityConfig.ideal()), pairs
    )
    rows = []
    for v in sweep.get("overlap_grid", DEFAULT_CHSH_GRID):
        state = _entangled_conditional_state(DistinguishabilityConfig.uniform(float(v)))
        rows.append((float(v), chsh_value(state, pairs)))
    scenario_s = chsh_value(
        _entangled_conditional_state(sc.sources.overlaps), pairs
    )
    return ChshRun(pairs, ideal, tuple(rows), scenario_s)


# ---------------------------------------------------------------------------
# dispatch and emission


def execute(sc: Scenario) -> RunArtifacts:
    metadata = {
        "scenario": sc.name,
        "experiment": sc.experiment,
        "scenario_hash": scenario_hash(sc),
        "seed": sc.counting.seed,
        "mode": sc.mode,
    }
    invariants_ok = True
    if sc.experiment == "truth-table":
        report = run_truth_table(sc)
        rows = []
        for i, label in enumerate(report.inputs):
            for j, cell in enumerate(_BASIS_LABELS):
                rows.append((label, cell, report.grid[i][j]))
        if report.row_success is not None:
            for row in report.grid:
                if abs(sum(row) - 1.0) > 1e-10:
                    invariants_ok = False
        summary = {
            "error_fraction": report.error_fraction,
            "row_success": list(report.row_success) if report.row_success else None,
            "invariants_ok": invariants_ok,
        }
        return RunArtifacts(
            ("input", "analyzers", "value"), tuple(rows), summary, metadata
        )
    if sc.experiment == "fringe":
        run = run_fringe(sc)
        rows = tuple(
            (t, v) for t, v in zip(run.angles_deg, run.values)
        )
        invariants_ok = run.fit.converged
        summary = {"fit": run.fit.as_dict(), "invariants_ok": invariants_ok}
        return RunArtifacts(("theta_t_deg", "value"), rows, summary, metadata)
    if sc.experiment == "hom":
        rows = run_hom_scan(sc)
        summary = {"invariants_ok": True}
        return RunArtifacts(
            ("overlap", "coincidence_probability", "visibility"),
            rows,
            summary,
            metadata,
        )
    if sc.experiment == "three-photon-scan":
        rows = run_three_photon_scan(sc)
        summary = {"invariants_ok": True}
        return RunArtifacts(
            ("target_overlap", "gated_visibility"), rows, summary, metadata
        )
    if sc.experiment == "chsh":
        run = run_chsh(sc)
        rows = run.sweep
        summary = {
            "ideal_s": run.ideal_s,
            "scenario_s": run.scenario_s,
            "angle_pairs": [list(p) for p in run.pairs],
            "invariants_ok": True,
        }
        return RunArtifacts(("uniform_overlap", "s_value"), rows, summary, metadata)
    raise ConfigError(f"unknown experiment {sc.experiment!r}")


def to_csv(artifacts: RunArtifacts) -> str:
    lines = [
        f"# {key}={artifacts.metadata[key]}"
        for key in sorted(artifacts.metadata)
    ]
    lines.append(",".join(artifacts.columns))
    for row in artifacts.rows:
        lines.append(",".join(_fmt(v) for v in row))
    lines.append("# summary " + json.dumps(artifacts.summary, sort_keys=True))
    return "\n".join(lines) + "\n"


def to_json(artifacts: RunArtifacts) -> str:
    payload = {
        "metadata": dict(artifacts.metadata),
        "columns": list(artifacts.columns),
        "rows": [list(r) for r in artifacts.rows],
        "summary": dict(artifacts.summary),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)

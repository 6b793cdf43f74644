"""Alignment percolation toolkit: sampling, exact oracles, renormalization."""

from alignperc.cluster import (
    ClusterReport,
    annulus_circuit_absent,
    circuit_absent_radii,
    circuit_exists_annulus,
    circuit_exists_primal,
    components,
    crossing,
    one_arm,
)
from alignperc.covdecay import (
    CovarianceEstimate,
    LocalEventSpec,
    covariance_estimate,
    decay_bound,
    decoupling_event_probability,
    dominance_cells,
)
from alignperc.errors import (
    AlignpercError,
    ParameterError,
    PatternError,
    SizeRefusalError,
    VerdictError,
)
from alignperc.experiments import (
    ExperimentManifest,
    PhaseDiagramRow,
    lambda_c_estimate,
    phase_diagram,
    wrap_bottlenecks,
)
from alignperc.hexembed import (
    HexEmbedding,
    HexThreshold,
    build_hex,
    crossing_bottlenecks,
    embedded_edge_states,
    hex_threshold_estimate,
)
from alignperc.lattice import LatticeSpec
from alignperc.model import (
    EdgeConfig,
    FeasiblePair,
    LineSegmentation,
    PairStates,
    SiteConfig,
    assign_pair_states,
    coupled_sample_lambda,
    coupled_sample_p,
    extract_pairs,
    project_edges,
    sample_bernoulli_bonds,
    sample_edges,
    sample_one_choice,
    sample_sites,
    sample_sites_sparse,
)
from alignperc.oracle import (
    EdgePattern,
    all_open_probability,
    enumerate_box_probability,
    incident_edge_probability,
    lattice_condition_gap,
    pattern_probability,
    pattern_probability_torus,
)
from alignperc.renorm import (
    EventEstimate,
    RecurrenceConstants,
    ScaleLadder,
    derive_constants,
    estimate_psi,
    estimate_qk,
    halfline_cover,
    inductive_decay_check,
    ladder,
    lambda0_trigger,
    p0_trigger,
    recurrence_check,
)
from alignperc.rng import RandomSource

__all__ = [
    "AlignpercError",
    "ParameterError",
    "PatternError",
    "SizeRefusalError",
    "VerdictError",
    "LatticeSpec",
    "EdgeConfig",
    "FeasiblePair",
    "LineSegmentation",
    "PairStates",
    "SiteConfig",
    "assign_pair_states",
    "coupled_sample_lambda",
    "coupled_sample_p",
    "extract_pairs",
    "project_edges",
    "sample_bernoulli_bonds",
    "sample_edges",
    "sample_one_choice",
    "sample_sites",
    "sample_sites_sparse",
    "RandomSource",
    "EdgePattern",
    "pattern_probability",
    "pattern_probability_torus",
    "incident_edge_probability",
    "lattice_condition_gap",
    "all_open_probability",
    "enumerate_box_probability",
    "ClusterReport",
    "components",
    "crossing",
    "one_arm",
    "annulus_circuit_absent",
    "circuit_absent_radii",
    "circuit_exists_annulus",
    "circuit_exists_primal",
    "LocalEventSpec",
    "CovarianceEstimate",
    "covariance_estimate",
    "decay_bound",
    "decoupling_event_probability",
    "dominance_cells",
    "EventEstimate",
    "RecurrenceConstants",
    "ScaleLadder",
    "derive_constants",
    "estimate_qk",
    "halfline_cover",
    "inductive_decay_check",
    "ladder",
    "lambda0_trigger",
    "p0_trigger",
    "recurrence_check",
    "estimate_psi",
    "HexEmbedding",
    "HexThreshold",
    "build_hex",
    "embedded_edge_states",
    "hex_threshold_estimate",
    "crossing_bottlenecks",
    "ExperimentManifest",
    "PhaseDiagramRow",
    "lambda_c_estimate",
    "phase_diagram",
    "wrap_bottlenecks",
]

__version__ = "0.1.0"

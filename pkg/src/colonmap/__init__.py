"""Topological mapping and discrete Bayesian localization over descriptor streams.

The pipeline in one breath: a stream of 512-d unit descriptors is grouped
into place nodes chained in traversal order (mapping); a later stream is
grouped the same way and tracked over the map with a discrete Bayes
filter whose accepted localizations are graded against ground truth
(localization, evaluation); synthetic worlds make the whole loop
reproducible without any real imagery (simulation).
"""

from .descriptors import (
    DESCRIPTOR_DIM,
    BadMagicError,
    DescriptorError,
    DescriptorFileError,
    DescriptorSet,
    Frame,
    FrameOrderError,
    TruncatedFileError,
    as_descriptor,
    load_descriptors,
    normalize,
    save_descriptors,
    similarity,
)
from .errors import ColonmapDataError
from .evaluation import (
    BASELINE_THRESHOLDS,
    Metrics,
    ScoredQuery,
    Verdict,
    baseline_at_count,
    baseline_at_threshold,
    baseline_curve,
    baseline_retrieval,
    classify_decision,
    compute_metrics,
    emit_posterior_trace,
    emit_timeline,
    majority_place,
    write_report,
)
from .localization import (
    LOST_STATE,
    DecisionsFile,
    DecisionsFormatError,
    FilterCollapseError,
    LocalizationConfig,
    LocalizationDecision,
    LocalizationRun,
    QueryNode,
    QueryNodeBuilder,
    SequentialLocalizer,
    apply_top_k_floor,
    check_acceptance,
    likelihood,
    load_decisions,
    localize_sequence,
    node_score,
    predict,
    save_decisions,
    state_count,
    transition_row,
    uniform_posterior,
    update,
)
from .mapping import (
    EVENT_FRAME_ADDED,
    EVENT_FRAME_SKIPPED,
    EVENT_NODE_INSERTED,
    EVENT_PROTO_DISCARDED,
    EventLogError,
    MapFormatError,
    MappingConfig,
    MappingEvent,
    Node,
    TopoMap,
    TopoMapper,
    build_map,
    load_map,
    replay_events,
    save_map,
)
from .matching import (
    MatchBackend,
    MatchCache,
    MatchCacheFormatError,
    SyntheticMatcher,
    SyntheticMatchParams,
    UnknownPairError,
    canonical_pair,
    load_match_cache,
    save_match_cache,
    synthetic_match_count,
)
from .simulate import (
    WALL,
    GroundTruth,
    SeparationError,
    SessionParams,
    TruthCoverageError,
    TruthEntry,
    TruthFormatError,
    World,
    WorldParams,
    generate_session,
    generate_world,
    load_truth,
    save_truth,
)

__version__ = "0.1.0"

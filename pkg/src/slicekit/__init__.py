"""Approximate subgroup discovery over discrete tabular data.

slicekit finds conjunctive rules ("subgroups") whose rows have unusual
outcome statistics, using a sampled beam search that scales to wide and
tall datasets, plus an exhaustive baseline, interactive re-ranking, a 2-D
subgroup map layout, an HTTP session service, and a CLI.
"""

from .dataset import (
    MISSING_LABEL,
    FeatureColumn,
    FeatureMatrix,
    LazyBinaryColumn,
    OutcomeVector,
    SplitAssignment,
    bin_continuous,
    encode_categorical,
    load_schema,
    load_table,
    make_split,
    matrix_from_codes,
    matrix_from_sparse_binary,
)
from .discovery import (
    DiscoveryConfig,
    GroupMetrics,
    SubgroupResult,
    attach_raw_scores,
    beam_search_from_row,
    compute_group_metrics,
    discover,
    evaluate_rule,
    results_to_json,
    sample_source_rows,
    targeted_discover,
)
from .errors import (
    CandidateSpaceError,
    ConfigError,
    IngestionError,
    RuleSyntaxError,
    RuleValueError,
    SchemaError,
    SliceKitError,
    UndefinedScoreError,
)
from .groupmap import (
    Bubble,
    BubbleLayout,
    IntersectionSummary,
    aggregate_bubbles,
    build_layout,
    bubbles_matching,
    distinguishing_feature,
    embed,
    intersection_summary,
    overlay_subgroups,
    relax_overlaps,
)
from .oracle import (
    DEFAULT_CAP,
    estimate_rule_count,
    exhaustive_search,
    recall_at_k,
    run_sweep,
)
from .ranking import (
    RankingSpec,
    ScoreVector,
    combine_and_rank,
    group_size_score,
    interaction_effect,
    mean_difference,
    outcome_coverage,
    outcome_rate,
    outcome_rate_low,
    raw_score,
    simple_rule_score,
)
from .rules import (
    EMPTY_RULE,
    Mask,
    Rule,
    SetValues,
    ToggleFeature,
    edit_rule,
    evaluate_mask,
    format_rule,
    parse_rule,
    rule_subsets,
)

__version__ = "0.1.0"

"""Mid-level pattern discovery over patch activations.

Pipeline: patch feature files -> top-K transactions -> association-rule
mining -> element retrieval and coverage selection -> LDA ensemble merging ->
Bag-of-Patterns / Bag-of-Elements encodings -> one-vs-rest classification,
plus a detection firing-type analyzer against pixel masks.
"""

from .featstore import (
    FeatureStore,
    PatchGeometry,
    PatchRecord,
    read_featfile,
    sample_patch_grid,
    write_featfile,
)
from .transact import (
    Transaction,
    TransactionDatabase,
    binarize_topk,
    build_database,
    make_transaction,
    max_pool_vectors,
    sparsify_topk,
    top_k_indices,
)
from .miner import (
    MiningConfig,
    Pattern,
    confidence,
    mine_rules,
    mine_rules_bruteforce,
    support,
)
from .elements import (
    InvertedIndex,
    MidLevelElement,
    build_inverted_index,
    coverage,
    retrieve_element,
    select_top_patterns,
)
from .lda import (
    BackgroundStats,
    Detector,
    MergedElement,
    ensemble_merge,
    estimate_background,
    score_element,
    train_lda,
)
from .encode import (
    ImageEncoding,
    PyramidLayout,
    encode_boe,
    encode_bop,
    pyramid_cell_of,
)
from .learn import (
    LinearModel,
    average_precision,
    decision_scores,
    train_ovr,
)
from .context import (
    FiringType,
    PixelMasks,
    classify_firing,
    element_firing_type,
    overlap_ratios,
)
from .synthgen import (
    SynthSpec,
    generate_dataset,
    planted_recovery_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

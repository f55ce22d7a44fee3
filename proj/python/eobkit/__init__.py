"""Python bindings for the eobkit C++ core."""

from ._eobkit import (
    SCHEMA_VERSION,
    EobkitError,
    audit,
    candidate_embedding_id,
    dedupe_candidates,
    expected_eob,
    extract_choice,
    flag_sample,
    kmeans,
    l2_normalize,
    load_samples,
    normalize_option,
    read_embedding_file,
    replace_negatives,
    run_cli,
    select_clip_topm,
    select_cluster_clip,
    select_random,
    similarity_scores,
    simulate_random_models,
    temporal_average_pool,
    visual_embedding_id,
    write_embedding_file,
)

__all__ = [
    "SCHEMA_VERSION",
    "EobkitError",
    "audit",
    "candidate_embedding_id",
    "dedupe_candidates",
    "expected_eob",
    "extract_choice",
    "flag_sample",
    "kmeans",
    "l2_normalize",
    "load_samples",
    "normalize_option",
    "read_embedding_file",
    "replace_negatives",
    "run_cli",
    "select_clip_topm",
    "select_cluster_clip",
    "select_random",
    "similarity_scores",
    "simulate_random_models",
    "temporal_average_pool",
    "visual_embedding_id",
    "write_embedding_file",
]

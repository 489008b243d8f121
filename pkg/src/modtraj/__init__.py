"""Reconstruct moderation-block histories and study post-block trajectories."""

from .errors import ConfigError, DataError, ModTrajError
from .ingest import (
    BlockLogEntry,
    BlockSpan,
    CommentEvent,
    CommentIndex,
    build_spans,
    load_comments,
    merge_block_spans,
    parse_block_log,
)
from .trajectory import CohortConfig, TrajectoryLabel, build_timelines, label_cohort, select_cohort

__version__ = "0.1.0"

__all__ = [
    "BlockLogEntry",
    "BlockSpan",
    "CohortConfig",
    "CommentEvent",
    "CommentIndex",
    "ConfigError",
    "DataError",
    "ModTrajError",
    "TrajectoryLabel",
    "build_spans",
    "build_timelines",
    "label_cohort",
    "load_comments",
    "merge_block_spans",
    "parse_block_log",
    "select_cohort",
]

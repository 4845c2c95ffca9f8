"""Training-free group recommendation via multi-view item-similarity graph filtering."""

from .data import ALL_ITEMS, Dataset, EvalInstance, load_agree_format, load_canonical, sample_negatives, save_canonical
from .filters import FilterSpec, preset
from .graphs import SimilarityGraph, build_group_view, build_member_view, build_unified_view, build_views
from .metrics import EvalReport, compare_reports, evaluate
from .recommender import GraphFilterRecommender, ModelConfig, ScoreRow, top_k
from .tuning import TuneGrid, grid_search

__version__ = "0.1.0"

__all__ = [
    "ALL_ITEMS",
    "Dataset",
    "EvalInstance",
    "EvalReport",
    "FilterSpec",
    "GraphFilterRecommender",
    "ModelConfig",
    "ScoreRow",
    "SimilarityGraph",
    "TuneGrid",
    "build_group_view",
    "build_member_view",
    "build_unified_view",
    "build_views",
    "compare_reports",
    "evaluate",
    "grid_search",
    "load_agree_format",
    "load_canonical",
    "preset",
    "sample_negatives",
    "save_canonical",
    "top_k",
    "__version__",
]

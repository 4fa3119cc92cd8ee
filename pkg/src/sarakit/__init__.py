"""sarakit: grid-entropy saliency ranking with ranking, gaze and statistics evaluation."""

__version__ = "0.1.0"

from .backbone import DepthMap, SaliencyMap, load_depth_map, load_saliency_map, spectral_residual_saliency
from .normalize import NormalizeConfig, normalize_map
from .rank_eval import EvalConfig, EvalResult, RankPair, evaluate_dataset, shuffled_auc, sor, srcc
from .sara import (
    ElementMask,
    GridConfig,
    RankList,
    ScoreWeights,
    SegmentScore,
    build_grid,
    rank_masks,
    rank_segments,
    score_segment,
)

__all__ = [
    "DepthMap", "ElementMask", "EvalConfig", "EvalResult", "GridConfig", "NormalizeConfig",
    "RankList", "RankPair", "SaliencyMap", "ScoreWeights", "SegmentScore", "build_grid",
    "evaluate_dataset", "load_depth_map", "load_saliency_map", "normalize_map", "rank_masks",
    "rank_segments", "score_segment", "shuffled_auc", "sor", "spectral_residual_saliency", "srcc",
]

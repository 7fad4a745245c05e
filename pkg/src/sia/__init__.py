"""Syntax-informed attention for multi-turn dialogue response selection.

Pipeline: ingest dependency-parsed dialogues (CoNLL-U or JSON), derive
ancestor/depth statistics, build intra-/inter-sentence attention masks, run a
small masked-attention encoder with a fused syntax branch, and evaluate
rankings with R_n@k / MAP / MRR / P@1.
"""

from .attention import (
    AttentionConfig,
    EncoderLayerParams,
    MultiHeadParams,
    SiaBlockParams,
    fuse,
    layer_norm,
    masked_attention,
    multi_head,
    sia_block,
)
from .conllu import (
    ConlluError,
    DataError,
    DependencyTree,
    DialogueExample,
    EvalCase,
    Token,
    load_dialogues,
    load_eval_cases,
    parse_conllu,
    save_dialogues,
    save_eval_cases,
    serialize_conllu,
)
from .estimator import ResponseSelector
from .masks import (
    AssembledSequence,
    AttentionMask,
    SpecialToken,
    WordRef,
    assemble,
    build_mask,
    expand_to_subwords,
    inter_mask,
    intra_mask,
    mask_from_json,
    mask_to_json,
    render_mask_ascii,
    sia_mask,
)
from .metrics import RankedCase, evaluation_report, mean_average_precision, mrr, p_at_1, recall_at_k
from .model import (
    ForwardStates,
    ModelConfig,
    ModelParams,
    TrainConfig,
    TrainingDiverged,
    Vocab,
    evaluate_cases,
    forward,
    forward_states,
    gradients,
    load_checkpoint,
    loss,
    save_checkpoint,
    score_candidates,
    train,
)
from .trees import TreeStats, ancestors, depth, tree_stats

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "AssembledSequence",
    "AttentionMask",
    "ConlluError",
    "DataError",
    "DependencyTree",
    "DialogueExample",
    "EncoderLayerParams",
    "EvalCase",
    "ForwardStates",
    "ModelConfig",
    "ModelParams",
    "MultiHeadParams",
    "RankedCase",
    "ResponseSelector",
    "SiaBlockParams",
    "SpecialToken",
    "Token",
    "TrainConfig",
    "TrainingDiverged",
    "TreeStats",
    "Vocab",
    "WordRef",
    "ancestors",
    "assemble",
    "build_mask",
    "depth",
    "evaluate_cases",
    "evaluation_report",
    "expand_to_subwords",
    "forward",
    "forward_states",
    "fuse",
    "gradients",
    "inter_mask",
    "intra_mask",
    "layer_norm",
    "load_checkpoint",
    "load_dialogues",
    "load_eval_cases",
    "loss",
    "mask_from_json",
    "mask_to_json",
    "masked_attention",
    "mean_average_precision",
    "mrr",
    "multi_head",
    "p_at_1",
    "parse_conllu",
    "recall_at_k",
    "render_mask_ascii",
    "save_checkpoint",
    "save_dialogues",
    "save_eval_cases",
    "score_candidates",
    "serialize_conllu",
    "sia_block",
    "sia_mask",
    "train",
    "tree_stats",
]

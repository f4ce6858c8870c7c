"""Hyperlink-derived pre-training pairs, a from-scratch transformer encoder
and reranking metrics. The heavy lifting lives in the compiled extension."""

from ._anchorpt import (
    AnchorptError,
    Encoder,
    Ranker,
    generate_synthetic,
    hinge_loss,
    mlm_loss,
    mrr_at_k,
    ndcg_at_k,
    pack_input,
    run_command,
    tokenize,
)

__all__ = [
    "AnchorptError",
    "Encoder",
    "Ranker",
    "generate_synthetic",
    "hinge_loss",
    "mlm_loss",
    "mrr_at_k",
    "ndcg_at_k",
    "pack_input",
    "run_command",
    "tokenize",
]

"""Whole-model assembly: parameters, forward pass, and explanation."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .encoder import encode_dual, init_encoder
from .fusion import attend, build_fusion_map, init_attention, init_predictor, predict
from .graphs import dualize
from .seeding import substream
from .text import encode_question, init_gru, init_lstm


@dataclass
class ForwardResult:
    answer: str
    logits: ad.Tensor  # 1 x |answers|
    probs: ad.Tensor
    scores: ad.Tensor  # head-averaged attention over fusion rows, 1 x R
    provenance: list
    q: ad.Tensor
    r: ad.Tensor


def init_params(cfg, n_answers, seed):
    """Named parameter map for the full model (uniform Xavier, seeded)."""
    rng = substream(seed, "init")
    params = {}
    if cfg.qenc == "lstm":
        init_lstm(params, "qenc", cfg.d_m, cfg.d_q, rng)
    else:
        init_gru(params, "qenc", cfg.d_m, cfg.d_q, rng)
    init_encoder(params, "obj_enc", cfg, rng)
    if not cfg.base_obj:
        init_encoder(params, "rel_enc", cfg, rng)
    init_attention(params, cfg, rng)
    init_predictor(params, cfg, n_answers, rng)
    return params


class Model:
    """DM-GNN scene-graph question answerer."""

    def __init__(self, cfg, vocab, answer_space, params=None, seed=0):
        cfg.validate()
        self.cfg = cfg
        self.vocab = vocab
        self.answer_space = answer_space
        self.params = (
            params if params is not None else init_params(cfg, len(answer_space), seed)
        )

    def forward(self, sg, question_tokens, training=False, dropout_rng=None):
        """Full pipeline: dualize, encode both views, encode the question,
        fuse, attend, predict. Pure function of inputs in eval mode."""
        cfg = self.cfg
        pair = dualize(sg)
        g_nodes, g_edges = encode_dual(pair, self.vocab, self.params, cfg)
        enc = encode_question(
            question_tokens,
            self.vocab,
            self.params,
            cfg.d_m,
            cfg.d_q,
            cell=cfg.qenc,
            dropout=cfg.dropout if training else 0.0,
            dropout_rng=dropout_rng if training else None,
        )
        fmap = build_fusion_map(sg, g_nodes, g_edges, self.vocab, cfg)
        r, scores = attend(fmap, enc.q, self.params, cfg)
        logits, probs, answer = predict(
            enc.q, r, self.params, self.answer_space, cfg
        )
        return ForwardResult(
            answer=answer,
            logits=logits,
            probs=probs,
            scores=scores,
            provenance=fmap.provenance,
            q=enc.q,
            r=r,
        )

    def loss(self, sg, question_tokens, answer, training=False, dropout_rng=None):
        label = self.answer_space.index[answer]
        result = self.forward(sg, question_tokens, training, dropout_rng)
        return ad.cross_entropy(result.logits, label), result

    def explain(self, sg, question_tokens, top_k=5):
        """Ranked (rank, score, kind, token, owner) rows plus the answer."""
        result = self.forward(sg, question_tokens)
        scores = result.scores.data[0]
        order = np.argsort(-scores, kind="stable")[:top_k]
        ranked = [
            {
                "rank": rank + 1,
                "score": float(scores[i]),
                "kind": result.provenance[i].kind,
                "token": result.provenance[i].token,
                "node_or_edge_id": result.provenance[i].owner,
            }
            for rank, i in enumerate(order)
        ]
        return ranked, result.answer

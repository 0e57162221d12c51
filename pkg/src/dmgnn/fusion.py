"""Full-scale feature map, question attention, and the answer predictor.

Every fusion row pairs an encoder embedding with a raw token embedding
and carries provenance (node name / node attribute / edge) so attention
scores map back to candidate answers.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .text import init_bias, init_linear


@dataclass(frozen=True)
class RowProvenance:
    kind: str  # "name" | "attribute" | "relation"
    owner: int  # node id for name/attribute rows, edge id for relation rows
    token: str
    attr_index: int = -1


@dataclass
class FusionMap:
    rows: ad.Tensor  # R x d_f
    provenance: list  # RowProvenance per row


class EmptyFusionMapError(ValueError):
    pass


class AnswerSpace:
    """Ordered candidate answers (most frequent first, ties lexicographic)."""

    def __init__(self, tokens):
        if not tokens:
            raise ValueError("answer space must be non-empty")
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    @classmethod
    def from_answers(cls, answers, max_answers):
        counts = {}
        for a in answers:
            counts[a] = counts.get(a, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([tok for tok, _ in ranked[:max_answers]])


def build_fusion_map(sg, g_nodes, g_edges, vocab, cfg):
    """Rows per Eq-style counting: each node contributes its name row plus
    one row per attribute; each edge contributes one row. The ablation
    flags drop attribute rows / edge rows respectively."""
    if g_nodes.shape[0] != len(sg.nodes):
        raise ValueError(
            f"node embedding count {g_nodes.shape[0]} != node count {len(sg.nodes)}"
        )
    if g_edges is not None and g_edges.shape[0] != len(sg.edges):
        raise ValueError(
            f"edge embedding count {g_edges.shape[0]} != edge count {len(sg.edges)}"
        )
    owners = []
    embs = []
    provenance = []
    for node in sg.nodes:
        owners.append(node.id)
        embs.append(vocab.lookup(node.name))
        provenance.append(RowProvenance("name", node.id, node.name))
        if not cfg.wo_attr:
            for l, attr in enumerate(node.attributes):
                owners.append(node.id)
                embs.append(vocab.lookup(attr))
                provenance.append(RowProvenance("attribute", node.id, attr, l))
    blocks = []
    if owners:
        node_emb = ad.Tensor(np.vstack(embs))
        blocks.append(
            ad.concat([ad.gather_rows(g_nodes, owners), node_emb], axis=1)
        )
    if not cfg.wo_rela and g_edges is not None and sg.edges:
        edge_emb = ad.Tensor(
            np.vstack([vocab.lookup(e.predicate) for e in sg.edges])
        )
        blocks.append(ad.concat([g_edges, edge_emb], axis=1))
        for edge in sg.edges:
            provenance.append(RowProvenance("relation", edge.id, edge.predicate))
    if not blocks:
        raise EmptyFusionMapError("scene graph produced no fusion rows")
    rows = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=0)
    return FusionMap(rows=rows, provenance=provenance)


def init_attention(params, cfg, rng):
    d_head = cfg.d_f // cfg.n_heads
    for h in range(cfg.n_heads):
        init_linear(params, f"attn.Wq.{h}", cfg.d_f, d_head, rng)
        init_linear(params, f"attn.Wk.{h}", cfg.d_f, d_head, rng)
        init_linear(params, f"attn.Wv.{h}", cfg.d_f, d_head, rng)
    init_linear(params, "attn.Wo", cfg.d_f, cfg.d_f, rng)
    if cfg.d_q != cfg.d_f:
        init_linear(params, "attn.q_proj", cfg.d_q, cfg.d_f, rng)


def attend(fmap, q, params, cfg):
    """Scaled dot-product attention of the question over the feature map.

    Returns the reasoning vector (1 x d_f) and the head-averaged score
    distribution over rows (1 x R).
    """
    if fmap.rows.shape[0] == 0:
        raise EmptyFusionMapError("scene graph produced no fusion rows")
    fmat = fmap.rows
    if cfg.d_q != cfg.d_f:
        q = ad.matmul(q, params["attn.q_proj"])
    d_head = cfg.d_f // cfg.n_heads
    inv_sqrt = 1.0 / math.sqrt(d_head)
    head_outs = []
    score_sum = None
    for h in range(cfg.n_heads):
        qh = ad.matmul(q, params[f"attn.Wq.{h}"])
        keys = ad.matmul(fmat, params[f"attn.Wk.{h}"])
        values = ad.matmul(fmat, params[f"attn.Wv.{h}"])
        logits = ad.scale(ad.matmul(qh, ad.transpose(keys)), inv_sqrt)
        s = ad.softmax(logits)
        head_outs.append(ad.matmul(s, values))
        score_sum = s if score_sum is None else ad.add(score_sum, s)
    r = ad.matmul(ad.concat(head_outs, axis=1), params["attn.Wo"])
    scores = ad.scale(score_sum, 1.0 / cfg.n_heads)
    return r, scores


def init_predictor(params, cfg, n_answers, rng):
    d_in = cfg.d_f if cfg.wo_qf else cfg.d_q + cfg.d_f
    init_linear(params, "pred.W1", d_in, cfg.predictor_hidden, rng)
    init_bias(params, "pred.b1", cfg.predictor_hidden)
    init_linear(params, "pred.W2", cfg.predictor_hidden, n_answers, rng)
    init_bias(params, "pred.b2", n_answers)


def predict(q, r, params, space, cfg):
    """Two-layer MLP classifier over the answer space.

    Returns (logits, probs, answer token); argmax takes the lowest index
    on ties. The question-fusion flag controls whether q is concatenated
    with the reasoning vector.
    """
    x = r if cfg.wo_qf else ad.concat([q, r], axis=1)
    hidden = ad.relu(ad.add(ad.matmul(x, params["pred.W1"]), params["pred.b1"]))
    logits = ad.add(ad.matmul(hidden, params["pred.W2"]), params["pred.b2"])
    probs = ad.softmax(logits)
    answer = space.tokens[int(np.argmax(probs.data[0]))]
    return logits, probs, answer

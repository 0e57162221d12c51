"""Message-passing enhanced GGNN encoder.

Each node keeps a hidden state updated for T synchronous steps. Per step,
a bidirectional GRU turns every (edge, neighbor) tuple in the node's
incident and outgoing adjacency into an information gain; the two summed
gains are concatenated and drive a gated (update/reset) state blend. A
final two-layer MLP over [h_i^T, payload embedding] yields the per-node
graph embedding. The model instantiates this twice: an object encoder
over the object-significant view and a relation encoder over the
relation-significant view.

The hot path batches all tuples of a step into matrix ops (gather /
segment-sum); :func:`mp_gain` is the per-node reference the batched form
is checked against.
"""

import numpy as np

from . import autodiff as ad
from .text import gru_cell, init_bias, init_gru, init_linear


def init_encoder(params, prefix, cfg, rng):
    d_x = cfg.d_emb + cfg.d_h  # MP input slot: [edge-embedding | hidden]
    init_gru(params, f"{prefix}.mp.fwd", d_x, cfg.d_mp, rng)
    init_gru(params, f"{prefix}.mp.bwd", d_x, cfg.d_mp, rng)
    if cfg.d_h != cfg.d_mp:
        init_linear(params, f"{prefix}.mp.proj", cfg.d_h, cfg.d_mp, rng)
    init_linear(params, f"{prefix}.W", cfg.d_h + 2 * cfg.d_mp, cfg.d_c, rng)
    init_bias(params, f"{prefix}.b", cfg.d_c)
    init_linear(params, f"{prefix}.U_z", cfg.d_c, cfg.d_h, rng)
    init_linear(params, f"{prefix}.U_r", cfg.d_c, cfg.d_h, rng)
    init_linear(params, f"{prefix}.U_1", 2 * cfg.d_mp, cfg.d_h, rng)
    init_linear(params, f"{prefix}.U_2", cfg.d_h, cfg.d_h, rng)
    init_linear(params, f"{prefix}.fg.W1", cfg.d_h + cfg.d_emb, cfg.g_hidden, rng)
    init_bias(params, f"{prefix}.fg.b1", cfg.g_hidden)
    init_linear(params, f"{prefix}.fg.W2", cfg.g_hidden, cfg.d_g, rng)
    init_bias(params, f"{prefix}.fg.b2", cfg.d_g)


def initial_states(view, vocab, cfg):
    """H^0 matrix (N x d_h): payload embeddings zero-padded to d_h."""
    mat = np.zeros((len(view.node_tokens), cfg.d_h))
    for i, tok in enumerate(view.node_tokens):
        mat[i, : cfg.d_emb] = vocab.lookup(tok)
    return ad.Tensor(mat)


def _edge_emb_matrix(view, vocab, cfg):
    mat = np.zeros((len(view.edge_tokens), cfg.d_emb))
    for k, tok in enumerate(view.edge_tokens):
        mat[k] = vocab.lookup(tok)
    return mat


def _mp_sequence_inputs(edge_emb, h_j, cfg):
    # the two sequence elements occupy disjoint slots of the MP input
    rows = h_j.shape[0]
    x1 = np.zeros((rows, cfg.d_emb + cfg.d_h))
    x1[:, : cfg.d_emb] = edge_emb
    x1 = ad.Tensor(x1)
    pad = ad.Tensor(np.zeros((rows, cfg.d_emb)))
    x2 = ad.concat([pad, h_j], axis=1)
    return x1, x2


def mp_gain(i, adjacency, H, edge_embs, params, prefix, cfg):
    """Information gain for node i over one adjacency list (reference form).

    Per tuple, the bidirectional GRU reads [edge, neighbor-state] (and the
    reverse) from initial state h_i; the two final states are summed.
    Gains sum over tuples; no tuples gives a zero vector. ``H`` is the
    N x d_h state matrix; ``edge_embs`` the E x d_emb embedding matrix.
    """
    tuples = adjacency[i]
    if not tuples:
        return ad.Tensor(np.zeros((1, cfg.d_mp)))
    h_i = ad.gather_rows(H, [i])
    if cfg.d_h != cfg.d_mp:
        h_i = ad.matmul(h_i, params[f"{prefix}.mp.proj"])
    total = None
    for edge_idx, j in tuples:
        x1, x2 = _mp_sequence_inputs(
            edge_embs[edge_idx], ad.gather_rows(H, [j]), cfg
        )
        fwd = gru_cell(x1, h_i, params, f"{prefix}.mp.fwd")
        fwd = gru_cell(x2, fwd, params, f"{prefix}.mp.fwd")
        bwd = gru_cell(x2, h_i, params, f"{prefix}.mp.bwd")
        bwd = gru_cell(x1, bwd, params, f"{prefix}.mp.bwd")
        gain = ad.add(fwd, bwd)
        total = gain if total is None else ad.add(total, gain)
    return total


def batched_gains(H, adjacency, edge_embs, params, prefix, cfg):
    """All nodes' gains for one adjacency direction as an N x d_mp matrix.

    Flattens every (node, edge, neighbor) tuple into one row batch, runs
    the bidirectional GRU once over the batch, and segment-sums rows back
    to their owning node. Equivalent to :func:`mp_gain` per node.
    """
    n = len(adjacency)
    owners, edge_idx, nbr_idx = [], [], []
    for i, tuples in enumerate(adjacency):
        for k, j in tuples:
            owners.append(i)
            edge_idx.append(k)
            nbr_idx.append(j)
    if not owners:
        return ad.Tensor(np.zeros((n, cfg.d_mp)))
    h_i = ad.gather_rows(H, owners)
    if cfg.d_h != cfg.d_mp:
        h_i = ad.matmul(h_i, params[f"{prefix}.mp.proj"])
    x1, x2 = _mp_sequence_inputs(
        edge_embs[edge_idx], ad.gather_rows(H, nbr_idx), cfg
    )
    fwd = gru_cell(x1, h_i, params, f"{prefix}.mp.fwd")
    fwd = gru_cell(x2, fwd, params, f"{prefix}.mp.fwd")
    bwd = gru_cell(x2, h_i, params, f"{prefix}.mp.bwd")
    bwd = gru_cell(x1, bwd, params, f"{prefix}.mp.bwd")
    return ad.segment_sum(ad.add(fwd, bwd), owners, n)


def propagate_step(H, view, edge_embs, params, prefix, cfg):
    """One synchronous gated update of all node states from H^{t-1}."""
    gate = ad.relu if cfg.gates == "relu" else ad.logistic
    k = ad.concat(
        [
            batched_gains(H, view.a_in, edge_embs, params, prefix, cfg),
            batched_gains(H, view.a_out, edge_embs, params, prefix, cfg),
        ],
        axis=1,
    )
    c = ad.add_bias(
        ad.matmul(ad.concat([H, k], axis=1), params[f"{prefix}.W"]),
        params[f"{prefix}.b"],
    )
    z = gate(ad.matmul(c, params[f"{prefix}.U_z"]))
    r = gate(ad.matmul(c, params[f"{prefix}.U_r"]))
    h_cand = ad.tanh(
        ad.add(
            ad.matmul(k, params[f"{prefix}.U_1"]),
            ad.matmul(ad.hadamard(r, H), params[f"{prefix}.U_2"]),
        )
    )
    # (1-z) (.) h + z (.) h_cand
    return ad.add(H, ad.hadamard(z, ad.sub(h_cand, H)))


def encode(view, vocab, params, prefix, cfg, t_steps=None):
    """Run T propagation steps and emit per-node graph embeddings (N x d_g)."""
    if t_steps is None:
        t_steps = cfg.t_steps
    edge_embs = _edge_emb_matrix(view, vocab, cfg)
    H = initial_states(view, vocab, cfg)
    for _ in range(t_steps):
        H = propagate_step(H, view, edge_embs, params, prefix, cfg)
    payload = ad.Tensor(
        np.vstack([vocab.lookup(tok) for tok in view.node_tokens])
        if view.node_tokens
        else np.zeros((0, cfg.d_emb))
    )
    x = ad.concat([H, payload], axis=1)
    hidden = ad.relu(
        ad.add_bias(ad.matmul(x, params[f"{prefix}.fg.W1"]), params[f"{prefix}.fg.b1"])
    )
    G = ad.relu(
        ad.add_bias(
            ad.matmul(hidden, params[f"{prefix}.fg.W2"]),
            params[f"{prefix}.fg.b2"],
        )
    )
    return H, G


def encode_dual(pair, vocab, params, cfg, t_steps=None):
    """Object-encoder rows per object, relation-encoder rows per edge.

    With the single-encoder baseline flag set, the relation encoder is
    skipped entirely and no edge embeddings are produced.
    """
    _, g_nodes = encode(pair.object_view, vocab, params, "obj_enc", cfg, t_steps)
    if cfg.base_obj:
        return g_nodes, None
    _, g_edges = encode(pair.relation_view, vocab, params, "rel_enc", cfg, t_steps)
    return g_nodes, g_edges

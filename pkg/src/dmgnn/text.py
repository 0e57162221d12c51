"""Token vocabulary, positional encoding, and the recurrent question encoder."""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .seeding import substream, token_seed

UNK = "<unk>"


class EmbeddingFormatError(ValueError):
    pass


class Vocabulary:
    """Token -> embedding-row map. Index 0 is reserved for <unk>.

    The table is frozen (not trained); unknown tokens map to a
    deterministic hash-seeded vector at lookup time.
    """

    def __init__(self, tokens, table, d_emb):
        self.d_emb = d_emb
        self.index = {UNK: 0}
        for tok in tokens:
            if tok not in self.index:
                self.index[tok] = len(self.index)
        if table.shape != (len(self.index), d_emb):
            raise EmbeddingFormatError(
                f"table shape {table.shape} != ({len(self.index)}, {d_emb})"
            )
        self.table = table.astype(np.float64)
        self._oov_cache = {}

    def __len__(self):
        return len(self.index)

    def lookup(self, token):
        """Embedding row (1 x d_emb) for a token; deterministic for OOV."""
        idx = self.index.get(token)
        if idx is not None:
            return self.table[idx : idx + 1]
        vec = self._oov_cache.get(token)
        if vec is None:
            rng = np.random.default_rng(token_seed(token))
            vec = (rng.random(self.d_emb) - 0.5).reshape(1, -1)
            self._oov_cache[token] = vec
        return vec


def random_vocabulary(tokens, d_emb, seed):
    """Seeded-random embedding table (GLOVE stand-in)."""
    uniq = [UNK]
    seen = {UNK}
    for tok in tokens:
        if tok not in seen:
            seen.add(tok)
            uniq.append(tok)
    rng = substream(seed, "embeddings")
    # O(1) entries, matching the scale of pretrained word vectors
    table = rng.random((len(uniq), d_emb)) - 0.5
    table[0] = 0.0  # <unk> row
    return Vocabulary(uniq[1:], table, d_emb)


def load_embeddings(path, d_emb):
    """Load a whitespace-separated "token v1 .. v_d" embedding file."""
    tokens = []
    rows = [np.zeros(d_emb)]  # <unk>
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) - 1 != d_emb:
                raise EmbeddingFormatError(
                    f"line {lineno}: expected {d_emb} values, got {len(parts) - 1}"
                )
            tokens.append(parts[0])
            try:
                rows.append(np.array([float(v) for v in parts[1:]]))
            except ValueError as e:
                raise EmbeddingFormatError(f"line {lineno}: {e}") from e
    return Vocabulary(tokens, np.vstack(rows), d_emb)


def positional_encoding(seq_len, d_m):
    """Sinusoidal position matrix: sin on even dims, cos on odd dims."""
    if d_m % 2 != 0:
        raise ValueError(f"model dimension must be even, got {d_m}")
    pe = np.zeros((seq_len, d_m))
    pos = np.arange(seq_len).reshape(-1, 1)
    freq = np.power(10000.0, -np.arange(0, d_m, 2) / d_m)
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


# ---------------------------------------------------------------------------
# recurrent cells (autodiff-level; params is a flat name->Tensor map)


def init_linear(params, name, d_in, d_out, rng):
    a = math.sqrt(6.0 / (d_in + d_out))
    params[name] = ad.Tensor(
        rng.uniform(-a, a, size=(d_in, d_out)), requires_grad=True
    )


def init_bias(params, name, d_out):
    params[name] = ad.Tensor(np.zeros((1, d_out)), requires_grad=True)


def init_gru(params, prefix, d_x, d_h, rng):
    for gate in ("z", "r", "h"):
        init_linear(params, f"{prefix}.W_{gate}", d_x, d_h, rng)
        init_linear(params, f"{prefix}.U_{gate}", d_h, d_h, rng)
        init_bias(params, f"{prefix}.b_{gate}", d_h)


def init_lstm(params, prefix, d_x, d_h, rng):
    for gate in ("i", "f", "o", "c"):
        init_linear(params, f"{prefix}.W_{gate}", d_x, d_h, rng)
        init_linear(params, f"{prefix}.U_{gate}", d_h, d_h, rng)
        init_bias(params, f"{prefix}.b_{gate}", d_h)


def _affine(x, h, params, prefix, gate):
    pre = ad.add_bias(
        ad.add(
            ad.matmul(x, params[f"{prefix}.W_{gate}"]),
            ad.matmul(h, params[f"{prefix}.U_{gate}"]),
        ),
        params[f"{prefix}.b_{gate}"],
    )
    return pre


def gru_cell(x, h, params, prefix):
    """Standard GRU update applied row-wise; x and h have matching rows."""
    z = ad.logistic(_affine(x, h, params, prefix, "z"))
    r = ad.logistic(_affine(x, h, params, prefix, "r"))
    h_cand = ad.add_bias(
        ad.add(
            ad.matmul(x, params[f"{prefix}.W_h"]),
            ad.matmul(ad.hadamard(r, h), params[f"{prefix}.U_h"]),
        ),
        params[f"{prefix}.b_h"],
    )
    h_cand = ad.tanh(h_cand)
    # (1-z) (.) h + z (.) h_cand, written as h + z (.) (h_cand - h)
    return ad.add(h, ad.hadamard(z, ad.sub(h_cand, h)))


def lstm_cell(x, state, params, prefix):
    """Standard LSTM update; state is (h, c)."""
    h, c = state
    i = ad.logistic(_affine(x, h, params, prefix, "i"))
    f = ad.logistic(_affine(x, h, params, prefix, "f"))
    o = ad.logistic(_affine(x, h, params, prefix, "o"))
    g = ad.tanh(_affine(x, h, params, prefix, "c"))
    c_next = ad.add(ad.hadamard(f, c), ad.hadamard(i, g))
    h_next = ad.hadamard(o, ad.tanh(c_next))
    return h_next, c_next


@dataclass
class QuestionEncoding:
    q: ad.Tensor  # 1 x d_q
    token_states: list  # per-token hidden states, each 1 x d_q


def encode_question(
    tokens, vocab, params, d_m, d_q, cell="gru", dropout=0.0, dropout_rng=None
):
    """Embed, zero-pad to d_m, add positions, run a left-to-right RNN.

    Dropout (inverted, on the RNN inputs) is applied only when a
    dropout rate and generator are both given, i.e. in training mode.
    """
    if not tokens:
        raise ValueError("question must contain at least one token")
    if vocab.d_emb > d_m:
        raise ValueError(f"d_emb {vocab.d_emb} exceeds model dimension {d_m}")
    pe = positional_encoding(len(tokens), d_m)
    training = dropout > 0.0 and dropout_rng is not None

    h = ad.Tensor(np.zeros((1, d_q)))
    c = ad.Tensor(np.zeros((1, d_q)))
    states = []
    for pos, tok in enumerate(tokens):
        row = np.zeros((1, d_m))
        row[0, : vocab.d_emb] = vocab.lookup(tok)
        row += pe[pos : pos + 1]
        x = ad.Tensor(row)
        if training:
            keep = (dropout_rng.random((1, d_m)) >= dropout) / (1.0 - dropout)
            x = ad.hadamard(x, ad.Tensor(keep))
        if cell == "lstm":
            h, c = lstm_cell(x, (h, c), params, "qenc")
        else:
            h = gru_cell(x, h, params, "qenc")
        states.append(h)
    return QuestionEncoding(q=h, token_states=states)

"""Seeded micro fixture (3 nodes, 2 edges, reduced widths) used by the
gradient-check command and the verification suite."""

from . import autodiff as ad
from .config import ModelConfig
from .fusion import AnswerSpace
from .graphs import scene_graph
from .model import Model
from .text import random_vocabulary


def micro_config(t_steps=2, gates="logistic", qenc="gru", **overrides):
    base = dict(
        d_emb=8,
        d_m=8,
        d_q=8,
        d_h=8,
        d_mp=8,
        d_c=16,
        d_g=8,
        g_hidden=8,
        n_heads=4,
        predictor_hidden=8,
        t_steps=t_steps,
        dropout=0.0,
        gates=gates,
        qenc=qenc,
    )
    base.update(overrides)
    return ModelConfig(**base).validate()


def micro_scene_graph():
    return scene_graph(
        nodes=[
            ("man", ["tall"]),
            ("horse", ["brown"]),
            ("hat", []),
        ],
        edges=[
            (0, "riding", 1),
            (0, "wearing", 2),
        ],
    )


def build_micro_fixture(seed=0, t_steps=2, gates="logistic", qenc="gru"):
    """Model, graph, question, and gold label for the micro fixture."""
    cfg = micro_config(t_steps=t_steps, gates=gates, qenc=qenc)
    sg = micro_scene_graph()
    question = ("what", "is", "the", "man", "riding")
    tokens = [n.name for n in sg.nodes]
    tokens += [a for n in sg.nodes for a in n.attributes]
    tokens += [e.predicate for e in sg.edges]
    tokens += list(question)
    vocab = random_vocabulary(tokens, cfg.d_emb, seed)
    space = AnswerSpace(["man", "horse", "hat", "riding", "wearing", "tall"])
    model = Model(cfg, vocab, space, seed=seed)
    return model, sg, question, "horse"


def micro_loss_fn(model, sg, question, answer):
    def f():
        loss, _ = model.loss(sg, question, answer)
        return loss

    return f


def gradcheck_by_group(seed=0, t_steps=2, gates="logistic", qenc="gru", eps=1e-4):
    """Max relative finite-difference error per parameter group."""
    model, sg, question, answer = build_micro_fixture(seed, t_steps, gates, qenc)
    f = micro_loss_fn(model, sg, question, answer)
    groups = {}
    for name in model.params:
        groups.setdefault(name.split(".", 1)[0], {})[name] = model.params[name]
    return {
        group: ad.finite_diff_check(f, params, eps)
        for group, params in sorted(groups.items())
    }

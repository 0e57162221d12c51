"""Whole-model forward, loss, explanation, and determinism tests."""

import numpy as np
import pytest

from dmgnn import autodiff as ad
from dmgnn.micro import build_micro_fixture, micro_config, micro_scene_graph
from dmgnn.model import Model, init_params


class TestInitParams:
    def test_group_layout(self):
        cfg = micro_config()
        params = init_params(cfg, n_answers=6, seed=0)
        groups = {name.split(".", 1)[0] for name in params}
        assert groups == {"qenc", "obj_enc", "rel_enc", "attn", "pred"}

    def test_base_obj_drops_relation_encoder(self):
        cfg = micro_config(base_obj=True)
        params = init_params(cfg, n_answers=6, seed=0)
        assert not any(name.startswith("rel_enc.") for name in params)

    def test_seed_determinism(self):
        cfg = micro_config()
        a = init_params(cfg, 6, seed=0)
        b = init_params(cfg, 6, seed=0)
        c = init_params(cfg, 6, seed=1)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a)
        assert any(not np.array_equal(a[k].data, c[k].data) for k in a)

    def test_lstm_question_encoder(self):
        cfg = micro_config(qenc="lstm")
        params = init_params(cfg, 6, seed=0)
        assert "qenc.W_i" in params and "qenc.W_h" not in params


class TestForward:
    def test_result_fields(self):
        model, sg, question, _ = build_micro_fixture()
        out = model.forward(sg, question)
        n_rows = len(out.provenance)
        assert out.scores.shape == (1, n_rows)
        assert out.probs.shape == (1, len(model.answer_space))
        assert out.answer in model.answer_space
        assert abs(out.scores.data.sum() - 1.0) < 1e-12
        assert abs(out.probs.data.sum() - 1.0) < 1e-12

    def test_eval_mode_is_pure(self):
        model, sg, question, _ = build_micro_fixture()
        a = model.forward(sg, question)
        b = model.forward(sg, question)
        assert np.array_equal(a.probs.data, b.probs.data)

    def test_loss_positive_and_differentiable(self):
        model, sg, question, answer = build_micro_fixture()
        with ad.Tape() as tape:
            loss, _ = model.loss(sg, question, answer)
        assert loss.item() > 0
        tape.backward(loss)
        touched = [
            name for name, p in model.params.items() if p.grad is not None
        ]
        # every parameter group receives gradient
        assert {n.split(".", 1)[0] for n in touched} == {
            "qenc", "obj_enc", "rel_enc", "attn", "pred"
        }

    def test_unknown_answer_raises(self):
        model, sg, question, _ = build_micro_fixture()
        with pytest.raises(KeyError):
            model.loss(sg, question, "unicorn")

    def test_ablations_run_to_completion(self):
        for flag in ("wo_attr", "wo_rela", "wo_qf", "base_obj"):
            model, sg, question, _ = build_micro_fixture()
            setattr(model.cfg, flag, True)
            model.params = init_params(model.cfg, len(model.answer_space), 0)
            out = model.forward(sg, question)
            assert out.answer in model.answer_space


class TestExplain:
    def test_ranked_scores(self):
        model, sg, question, _ = build_micro_fixture()
        ranked, answer = model.explain(sg, question, top_k=3)
        assert len(ranked) == 3
        assert [r["rank"] for r in ranked] == [1, 2, 3]
        scores = [r["score"] for r in ranked]
        assert scores == sorted(scores, reverse=True)
        assert answer in model.answer_space

    def test_top_k_clamps_to_row_count(self):
        model, sg, question, _ = build_micro_fixture()
        ranked, _ = model.explain(sg, question, top_k=100)
        out = model.forward(sg, question)
        assert len(ranked) == len(out.provenance)

    def test_provenance_tokens_come_from_graph(self):
        model, sg, question, _ = build_micro_fixture()
        ranked, _ = model.explain(sg, question, top_k=5)
        graph_tokens = {n.name for n in sg.nodes}
        graph_tokens |= {a for n in sg.nodes for a in n.attributes}
        graph_tokens |= {e.predicate for e in sg.edges}
        assert all(r["token"] in graph_tokens for r in ranked)

"""Acceptance suite.

Each test implements one numbered acceptance criterion with its pinned
tolerance; the suite is property-based (oracle recomputation, closed-form
values, determinism, capacity) rather than benchmark reproduction.
"""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from dmgnn import autodiff as ad
from dmgnn.cli import main as cli_main
from dmgnn.config import GenConfig, ModelConfig, TrainConfig
from dmgnn.fusion import build_fusion_map
from dmgnn.graphs import build_relation_view, scene_graph
from dmgnn.metrics import mean_recall_at_k, recall_at_k
from dmgnn.micro import build_micro_fixture, gradcheck_by_group
from dmgnn.synth import generate, split
from dmgnn.text import random_vocabulary
from dmgnn.training import evaluate, lr_schedule, train

GRADCHECK_TOL = 1e-4
HELD_OUT_FLOOR = 0.80
TRAIN_FLOOR = 0.95


# --------------------------------------------------------------------------
# 1. Gradient correctness


def test_criterion_1_gradient_check():
    """End-to-end finite differences on the seeded micro fixture: max
    relative error <= 1e-4 over every parameter, under 60 s."""
    start = time.time()
    errors = gradcheck_by_group(seed=0, t_steps=2, gates="logistic", qenc="gru")
    elapsed = time.time() - start
    worst = max(errors.values())
    assert worst <= GRADCHECK_TOL, f"worst group error {worst:.3e}"
    assert elapsed < 60.0, f"gradient check took {elapsed:.1f}s"
    print(f"ACCEPTANCE 1 PASS: max rel err {worst:.3e} in {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. Dualization oracle


def _brute_force_tuple_counts(sg):
    """Ordered-edge-pair enumeration: one directed tuple per endpoint
    object shared by two distinct edges (a self-loop's endpoints count
    once)."""
    counts = {}
    for ei in sg.edges:
        for ej in sg.edges:
            if ei.id == ej.id:
                continue
            shared = {ei.subject, ei.object} & {ej.subject, ej.object}
            if shared:
                counts[(ei.id, ej.id)] = len(shared)
    return counts


def test_criterion_2_dualization_oracle():
    """build_relation_view matches brute-force edge-pair enumeration on
    500 random graphs (<= 8 nodes, <= 12 edges), exactly, in under 5 s."""
    rng = np.random.default_rng(2024)
    start = time.time()
    for _ in range(500):
        n = int(rng.integers(1, 9))
        edges = [
            (int(rng.integers(n)), f"p{k}", int(rng.integers(n)))
            for k in range(int(rng.integers(0, 13)))
        ]
        sg = scene_graph([(f"o{i}", []) for i in range(n)], edges)
        view = build_relation_view(sg)
        got = {}
        for i in range(len(sg.edges)):
            for _, j in view.a_out[i]:
                got[(i, j)] = got.get((i, j), 0) + 1
        assert got == _brute_force_tuple_counts(sg)
        # mirror invariant: a_in is exactly a_out reversed
        ins = {(k, j, i) for i in range(len(sg.edges)) for k, j in view.a_in[i]}
        outs = {(k, i, j) for i in range(len(sg.edges)) for k, j in view.a_out[i]}
        assert ins == outs
    elapsed = time.time() - start
    assert elapsed < 5.0, f"dualization oracle took {elapsed:.1f}s"
    print(f"ACCEPTANCE 2 PASS: 500 graphs in {elapsed:.2f}s")


# --------------------------------------------------------------------------
# 3. mR@K oracle


def _random_retrieval_instances(rng, n):
    from dmgnn.metrics import RetrievalInstance

    out = []
    for i in range(n):
        preds = [
            (int(rng.integers(6)), f"p{int(rng.integers(5))}", int(rng.integers(6)))
            for _ in range(int(rng.integers(1, 20)))
        ]
        gt = {t for t in preds if rng.random() < 0.35}
        gt |= {
            (int(rng.integers(6)), f"p{int(rng.integers(5))}", int(rng.integers(6)))
            for _ in range(int(rng.integers(0, 4)))
        }
        if not gt:
            gt = {preds[0]}
        out.append(
            RetrievalInstance(f"img{i}", tuple(preds), frozenset(gt))
        )
    return out


def test_criterion_3_mean_recall_oracle():
    """mean_recall_at_k matches an independent per-class recomputation on
    300 random instances exactly; single-class mR@K == R@K exactly; both
    are monotone in K."""
    rng = np.random.default_rng(7)
    instances = _random_retrieval_instances(rng, 300)
    for k in (1, 5, 20, 50):
        mrk, per = mean_recall_at_k(instances, k)
        classes = sorted({p for i in instances for (_, p, _) in i.gt})
        expected = {}
        for cls in classes:
            recalls = []
            for i in instances:
                gt_cls = {t for t in i.gt if t[1] == cls}
                if gt_cls:
                    recalls.append(len(set(i.predictions[:k]) & gt_cls) / len(gt_cls))
            expected[cls] = sum(recalls) / len(recalls)
        assert per == expected  # exact float equality, same reduction order
        assert mrk == sum(expected.values()) / len(expected)

    single = [
        i for i in _random_retrieval_instances(np.random.default_rng(8), 300)
    ]
    from dmgnn.metrics import RetrievalInstance

    single = [
        RetrievalInstance(
            i.image_id,
            tuple((s, "p0", o) for s, _, o in i.predictions),
            frozenset((s, "p0", o) for s, _, o in i.gt),
        )
        for i in single
    ]
    for k in (1, 10, 40):
        assert mean_recall_at_k(single, k)[0] == recall_at_k(single, k)

    ks = (1, 2, 5, 10, 20, 50, 100)
    r_values = [recall_at_k(instances, k) for k in ks]
    mr_values = [mean_recall_at_k(instances, k)[0] for k in ks]
    assert r_values == sorted(r_values)
    assert mr_values == sorted(mr_values)
    print("ACCEPTANCE 3 PASS: 300-instance oracle exact, monotone in K")


# --------------------------------------------------------------------------
# 4. LR schedule


def test_criterion_4_lr_schedule():
    """Epochs {0, 35, 65, 85} of 100 give exactly {1e-3, 2e-4, 4e-5, 8e-6}."""
    assert lr_schedule(0, 100) == 1e-3
    assert lr_schedule(35, 100) == 2e-4
    assert lr_schedule(65, 100) == 4e-5
    assert lr_schedule(85, 100) == 8e-6
    print("ACCEPTANCE 4 PASS: schedule values exact")


# --------------------------------------------------------------------------
# 5. Capacity / held-out generalization / dual-encoder gain


@pytest.fixture(scope="module")
def capacity_runs():
    """Shared 200-example experiment: the full model and the Base-Obj
    ablation trained on the same split."""
    examples = generate(GenConfig(seed=0, n_examples=200))
    train_recs, test_recs = split([e.record for e in examples], 0.8, seed=0)
    tc = TrainConfig(epochs=200, batch_size=8, seed=3, stop_at_train_accuracy=0.99)
    runs = {}
    start = time.time()
    for tag, cfg in (
        ("full", ModelConfig.reduced()),
        ("base_obj", ModelConfig.reduced(base_obj=True)),
    ):
        result = train(train_recs, cfg, tc)
        runs[tag] = {
            "result": result,
            "train_report": evaluate(train_recs, result.model),
            "test_report": evaluate(test_recs, result.model),
        }
    runs["elapsed"] = time.time() - start
    return runs


def test_criterion_5_capacity_and_generalization(capacity_runs):
    """200 seeded synthetic examples, reduced dims: train accuracy >= 0.95
    within 200 epochs in under 10 minutes; held-out accuracy >= 0.80 on
    disjoint graphs; full model >= Base-Obj on the relation-query slice."""
    full = capacity_runs["full"]
    base = capacity_runs["base_obj"]
    elapsed = capacity_runs["elapsed"]

    assert full["result"].epochs_run <= 200
    assert elapsed < 600.0, f"capacity experiment took {elapsed:.0f}s"
    train_acc = full["train_report"].accuracy
    test_acc = full["test_report"].accuracy
    assert train_acc >= TRAIN_FLOOR, f"train accuracy {train_acc:.3f}"
    assert test_acc >= HELD_OUT_FLOOR, f"held-out accuracy {test_acc:.3f}"

    full_rel = full["test_report"].qtype_accuracy("relation-query")
    base_rel = base["test_report"].qtype_accuracy("relation-query")
    assert full_rel >= base_rel, (
        f"dual encoders {full_rel:.3f} < single encoder {base_rel:.3f} "
        "on relation queries"
    )
    print(
        f"ACCEPTANCE 5 PASS: train {train_acc:.3f}, held-out {test_acc:.3f}, "
        f"relation slice {full_rel:.3f} vs base-obj {base_rel:.3f}, "
        f"{elapsed:.0f}s"
    )


# --------------------------------------------------------------------------
# 6. Normalization invariants


def test_criterion_6_normalization_and_row_counting():
    """Every softmax/attention distribution sums to 1 within 1e-12; the
    fusion-map row count matches the counting formula (one name row per
    node + one row per attribute + one row per edge) on 1000 random
    graphs exactly."""
    rng = np.random.default_rng(6)
    for _ in range(200):
        row = ad.Tensor(rng.standard_normal((1, int(rng.integers(1, 30)))) * 10)
        assert abs(ad.softmax(row).data.sum() - 1.0) < 1e-12

    model, sg, question, _ = build_micro_fixture()
    out = model.forward(sg, question)
    assert abs(out.scores.data.sum() - 1.0) < 1e-12
    assert abs(out.probs.data.sum() - 1.0) < 1e-12

    cfg = ModelConfig.reduced()
    vocab = random_vocabulary(["tok"], cfg.d_emb, 0)
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        nodes = [
            (f"o{i}", [f"a{j}" for j in range(int(rng.integers(0, 4)))])
            for i in range(n)
        ]
        edges = [
            (int(rng.integers(n)), f"p{k}", int(rng.integers(n)))
            for k in range(int(rng.integers(0, 7)))
        ]
        sg = scene_graph(nodes, edges)
        g_nodes = ad.Tensor(np.zeros((n, cfg.d_g)))
        g_edges = ad.Tensor(np.zeros((len(edges), cfg.d_g)))
        fmap = build_fusion_map(sg, g_nodes, g_edges, vocab, cfg)
        expected = (
            len(sg.nodes)
            + sum(len(nd.attributes) for nd in sg.nodes)
            + len(sg.edges)
        )
        assert fmap.rows.shape[0] == expected
        assert len(fmap.provenance) == expected
    print("ACCEPTANCE 6 PASS: distributions normalized, row counts exact")


# --------------------------------------------------------------------------
# 7. Determinism


def test_criterion_7_bitwise_determinism(tmp_path):
    """Two cmd_train runs with identical config produce bitwise-identical
    loss CSVs and checkpoints; a checkpoint round-trip reproduces the
    EvalReport bitwise."""
    runner = CliRunner()
    data_dir = tmp_path / "data"
    result = runner.invoke(
        cli_main,
        ["synth", "--out", str(data_dir), "--n", "24", "--seed", "5"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output

    outputs = []
    for run_dir in ("run_a", "run_b"):
        out = tmp_path / run_dir
        result = runner.invoke(
            cli_main,
            ["train", "--data", str(data_dir / "train.jsonl"), "--out", str(out),
             "--epochs", "3", "--batch-size", "4", "--seed", "11"],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        outputs.append(out)

    a, b = outputs
    assert (a / "loss.csv").read_bytes() == (b / "loss.csv").read_bytes()
    assert (a / "checkpoint.ckpt").read_bytes() == (b / "checkpoint.ckpt").read_bytes()

    from dmgnn.checkpoint import load_model, save_model
    from dmgnn.graphs import load_dataset

    records = load_dataset(data_dir / "train.jsonl")
    model, _ = load_model(a / "checkpoint.ckpt")
    report_before = evaluate(records, model)
    save_model(tmp_path / "again.ckpt", model, "h")
    reloaded, _ = load_model(tmp_path / "again.ckpt")
    assert evaluate(records, reloaded) == report_before
    print("ACCEPTANCE 7 PASS: bitwise-identical runs and round-trip")


# --------------------------------------------------------------------------
# 8. Ablation plumbing


def test_criterion_8_ablation_plumbing():
    """--wo-attr / --wo-rela / --wo-qf change the documented structure and
    run to completion; error-breakdown counts partition the errors."""
    examples = generate(GenConfig(seed=4, n_examples=24))
    records = [e.record for e in examples]
    tc = TrainConfig(epochs=1, batch_size=8, seed=0)

    baseline = train(records, ModelConfig.reduced(), tc)
    sample = records[0]
    base_rows = len(baseline.model.forward(sample.graph, sample.question).provenance)

    wo_attr = train(records, ModelConfig.reduced(wo_attr=True), tc)
    attr_rows = wo_attr.model.forward(sample.graph, sample.question).provenance
    n_attrs = sum(len(n.attributes) for n in sample.graph.nodes)
    assert len(attr_rows) == base_rows - n_attrs
    assert all(p.kind != "attribute" for p in attr_rows)

    wo_rela = train(records, ModelConfig.reduced(wo_rela=True), tc)
    rela_rows = wo_rela.model.forward(sample.graph, sample.question).provenance
    assert len(rela_rows) == base_rows - len(sample.graph.edges)
    assert all(p.kind != "relation" for p in rela_rows)

    wo_qf = train(records, ModelConfig.reduced(wo_qf=True), tc)
    cfg = ModelConfig.reduced()
    assert baseline.model.params["pred.W1"].shape[0] == cfg.d_q + cfg.d_f
    assert wo_qf.model.params["pred.W1"].shape[0] == cfg.d_f

    for run in (baseline, wo_attr, wo_rela, wo_qf):
        report = evaluate(records, run.model)
        assert sum(report.error_breakdown.values()) == report.total - report.correct
    print("ACCEPTANCE 8 PASS: ablations change structure; errors partition")

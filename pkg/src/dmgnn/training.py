"""Optimizers, the staged learning-rate schedule, training loop, and
evaluation with per-question-type accuracy and the object / relation /
attribute error breakdown."""

import sys
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .fusion import AnswerSpace
from .model import Model
from .seeding import substream
from .text import random_vocabulary

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def lr_schedule(epoch, total_epochs, base_lr=1e-3):
    """Piecewise-constant decay at 30% / 60% / 80% of the epoch budget.

    The plateau values are 1e-3, 2e-4, 4e-5, 8e-6 at the default base
    rate, scaled proportionally for other base rates.
    """
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    frac = epoch / total_epochs
    if frac < 0.3:
        value = 1e-3
    elif frac < 0.6:
        value = 2e-4
    elif frac < 0.8:
        value = 4e-5
    else:
        value = 8e-6
    return value * (base_lr / 1e-3)


class OptimizerState:
    """Adam moment accumulators (or a bare step counter for SGD)."""

    def __init__(self, params, kind="adam"):
        self.kind = kind
        self.step = 0
        self.m = {}
        self.v = {}
        if kind == "adam":
            for name, p in params.items():
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)


def optimizer_step(params, state, lr):
    """In-place parameter update from populated gradients."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = p.grad_view()
        if not np.isfinite(g).all():
            raise ad.NumericError(f"non-finite gradient in parameter {name}")
        if state.kind == "sgd":
            p.data -= lr * g
        else:
            m = state.m[name]
            v = state.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            m_hat = m / (1.0 - ADAM_BETA1**t)
            v_hat = v / (1.0 - ADAM_BETA2**t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class EvalReport:
    total: int
    correct: int
    per_qtype: dict  # qtype -> (correct, total)
    error_breakdown: dict  # object / relation / attribute / other -> count
    mean_loss: float
    skipped_unrepresentable: int

    @property
    def accuracy(self):
        return self.correct / self.total if self.total else 0.0

    def qtype_accuracy(self, qtype):
        c, t = self.per_qtype.get(qtype, (0, 0))
        return c / t if t else 0.0

    def to_text(self):
        lines = [
            f"examples        {self.total}",
            f"accuracy        {self.accuracy:.4f}",
            f"mean_loss       {self.mean_loss:.6f}",
        ]
        for qtype in sorted(self.per_qtype):
            c, t = self.per_qtype[qtype]
            lines.append(f"qtype {qtype:<18} {c}/{t} = {c / t:.4f}")
        lines.append("error breakdown (by gold-answer role in the graph):")
        for kind in ("object", "relation", "attribute", "other"):
            lines.append(f"  {kind:<10} {self.error_breakdown.get(kind, 0)}")
        if self.skipped_unrepresentable:
            lines.append(
                f"answers outside the answer space: {self.skipped_unrepresentable}"
            )
        return "\n".join(lines)


def classify_error(graph, gold_answer):
    """Role of the gold answer token in the graph, priority
    object > relation > attribute; unknown tokens go to "other"."""
    if any(n.name == gold_answer for n in graph.nodes):
        return "object"
    if any(e.predicate == gold_answer for e in graph.edges):
        return "relation"
    if any(gold_answer in n.attributes for n in graph.nodes):
        return "attribute"
    return "other"


def evaluate(records, model):
    """Eval-mode forward over a dataset."""
    correct = 0
    per_qtype = {}
    breakdown = {}
    losses = []
    skipped = 0
    for rec in records:
        result = model.forward(rec.graph, rec.question)
        if rec.answer in model.answer_space:
            label = model.answer_space.index[rec.answer]
            losses.append(ad.cross_entropy(result.logits, label).item())
        else:
            skipped += 1
        c, t = per_qtype.get(rec.qtype, (0, 0))
        if result.answer == rec.answer:
            correct += 1
            per_qtype[rec.qtype] = (c + 1, t + 1)
        else:
            per_qtype[rec.qtype] = (c, t + 1)
            kind = classify_error(rec.graph, rec.answer)
            breakdown[kind] = breakdown.get(kind, 0) + 1
    return EvalReport(
        total=len(records),
        correct=correct,
        per_qtype=per_qtype,
        error_breakdown=breakdown,
        mean_loss=float(np.mean(losses)) if losses else 0.0,
        skipped_unrepresentable=skipped,
    )


@dataclass
class TrainResult:
    model: Model
    loss_trace: list  # (epoch, batch, loss, lr)
    epochs_run: int
    dropped_answers: int  # training examples with out-of-space answers
    skipped_batches: int


def build_model(records, model_cfg, seed):
    """Vocabulary and answer space from the training split, fresh params."""
    tokens = []
    for rec in records:
        tokens.extend(rec.question)
        for n in rec.graph.nodes:
            tokens.append(n.name)
            tokens.extend(n.attributes)
        for e in rec.graph.edges:
            tokens.append(e.predicate)
    vocab = random_vocabulary(tokens, model_cfg.d_emb, seed)
    space = AnswerSpace.from_answers(
        [r.answer for r in records], model_cfg.max_answers
    )
    return Model(model_cfg, vocab, space, seed=seed)


def train(records, model_cfg, train_cfg, model=None, log=None):
    """Seeded mini-batch training; deterministic given the config seed.

    Batch loss is the mean of per-example cross-entropies. Examples whose
    answer is outside the answer space are dropped (counted); a batch
    with no representable answers is skipped with a warning.
    """
    if not records:
        raise ValueError("training dataset is empty")
    if model is None:
        model = build_model(records, model_cfg, train_cfg.seed)
    params = model.params
    state = OptimizerState(params, train_cfg.optimizer)
    shuffle_rng = substream(train_cfg.seed, "shuffle")
    dropout_rng = substream(train_cfg.seed, "dropout")

    dropped = sum(1 for r in records if r.answer not in model.answer_space)

    trace = []
    skipped_batches = 0
    epochs_run = 0
    for epoch in range(train_cfg.epochs):
        lr = lr_schedule(epoch, train_cfg.epochs, train_cfg.base_lr)
        order = shuffle_rng.permutation(len(records))
        for batch_idx in range(0, len(order), train_cfg.batch_size):
            chunk = order[batch_idx : batch_idx + train_cfg.batch_size]
            batch = [
                records[i]
                for i in chunk
                if records[i].answer in model.answer_space
            ]
            if not batch:
                skipped_batches += 1
                print(
                    "warning: skipping batch with no representable answers",
                    file=sys.stderr,
                )
                continue
            with ad.Tape() as tape:
                total = None
                for rec in batch:
                    loss, _ = model.loss(
                        rec.graph,
                        rec.question,
                        rec.answer,
                        training=True,
                        dropout_rng=dropout_rng,
                    )
                    total = loss if total is None else ad.add(total, loss)
                batch_loss = ad.scale(total, 1.0 / len(batch))
            ad.zero_grads(params.values())
            tape.backward(batch_loss)
            optimizer_step(params, state, lr)
            trace.append(
                (epoch, batch_idx // train_cfg.batch_size, batch_loss.item(), lr)
            )
        epochs_run = epoch + 1
        if log is not None:
            log(epoch, trace)
        if train_cfg.stop_at_train_accuracy > 0:
            report = evaluate(records, model)
            if report.accuracy >= train_cfg.stop_at_train_accuracy:
                break
    return TrainResult(
        model=model,
        loss_trace=trace,
        epochs_run=epochs_run,
        dropped_answers=dropped,
        skipped_batches=skipped_batches,
    )


def write_loss_csv(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,batch,loss,lr\n")
        for epoch, batch, loss, lr in trace:
            fh.write(f"{epoch},{batch},{loss!r},{lr!r}\n")

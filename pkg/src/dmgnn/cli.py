"""Command-line entry point.

Exit codes: 0 success, 1 assertion/threshold failure, 2 usage or parse
error. Every command echoes the effective config hash; all randomness
flows from the config seed through named substreams.
"""

import hashlib
import json
import os
import sys

import click

from .checkpoint import load_model, save_model
from .config import ConfigError, config_hash, load_run_config
from .graphs import (
    GraphParseError,
    dualize,
    load_dataset,
    parse_scene_graph,
    save_dataset,
)
from .metrics import (
    MetricsError,
    build_instances,
    load_ground_truth,
    load_predictions,
    metrics_table,
)
from .micro import gradcheck_by_group
from .synth import GenerationError, enumerate_answers, generate, split
from .training import build_model, evaluate, train, write_loss_csv

GRADCHECK_THRESHOLD = 1e-4


def _dict_hash(d):
    payload = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _fail_usage(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@click.group()
def main():
    """DM-GNN scene-graph question answering toolkit."""


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="JSON config file.")(fn)
    return fn


def _load_config(config_path, overrides):
    try:
        return load_run_config(config_path, overrides)
    except (ConfigError, OSError) as e:
        _fail_usage(e)


def _echo_config(cfg):
    click.echo(f"config {config_hash(cfg)}")


@main.command("synth")
@_config_options
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", "n_examples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--ratio", type=float, default=0.8, show_default=True)
@click.option("--audit", is_flag=True, help="Re-verify answer uniqueness.")
def cmd_synth(config_path, out_dir, n_examples, seed, ratio, audit):
    """Generate a synthetic dataset and write train/test JSONL splits."""
    overrides = {"gen": {}}
    if n_examples is not None:
        overrides["gen"]["n_examples"] = n_examples
    if seed is not None:
        overrides["gen"]["seed"] = seed
    cfg = _load_config(config_path, overrides)
    _echo_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    train_path = os.path.join(out_dir, "train.jsonl")
    test_path = os.path.join(out_dir, "test.jsonl")
    try:
        examples = generate(cfg.gen)
    except GenerationError as e:
        _fail_usage(e)
    if audit:
        for ex in examples:
            rec = ex.record
            answers = enumerate_answers(rec.graph, rec.question, rec.qtype)
            if answers != {rec.answer}:
                click.echo(f"audit FAILED: {rec.question} -> {sorted(answers)}")
                sys.exit(1)
        click.echo(f"audit: 100% unique answers ({len(examples)} examples)")
    header = f"dmgnn synthetic dataset, seed={cfg.gen.seed}, n={cfg.gen.n_examples}"
    if not examples:
        save_dataset([], train_path, header=header)
        save_dataset([], test_path, header=header)
    else:
        try:
            train_split, test_split = split(examples, ratio, cfg.gen.seed)
        except ValueError as e:
            _fail_usage(e)
        save_dataset([ex.record for ex in train_split], train_path, header=header)
        save_dataset([ex.record for ex in test_split], test_path, header=header)
    click.echo(f"wrote {train_path} and {test_path}")


@main.command("train")
@_config_options
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default=None)
@click.option("--t-steps", type=int, default=None)
@click.option("--gates", type=click.Choice(["logistic", "relu"]), default=None)
@click.option("--qenc", type=click.Choice(["gru", "lstm"]), default=None)
@click.option("--stop-at-acc", type=float, default=None,
              help="Stop once train accuracy reaches this value.")
@click.option("--wo-attr", is_flag=True, default=None)
@click.option("--wo-rela", is_flag=True, default=None)
@click.option("--wo-qf", is_flag=True, default=None)
@click.option("--base-obj", is_flag=True, default=None)
def cmd_train(config_path, data_path, out_dir, **kw):
    """Train a model; writes checkpoint.ckpt and loss.csv."""
    model_keys = {
        "t_steps": kw["t_steps"],
        "gates": kw["gates"],
        "qenc": kw["qenc"],
        "wo_attr": kw["wo_attr"],
        "wo_rela": kw["wo_rela"],
        "wo_qf": kw["wo_qf"],
        "base_obj": kw["base_obj"],
    }
    train_keys = {
        "epochs": kw["epochs"],
        "batch_size": kw["batch_size"],
        "base_lr": kw["lr"],
        "seed": kw["seed"],
        "optimizer": kw["optimizer"],
        "stop_at_train_accuracy": kw["stop_at_acc"],
    }
    overrides = {
        "model": {k: v for k, v in model_keys.items() if v is not None},
        "train": {k: v for k, v in train_keys.items() if v is not None},
    }
    cfg = _load_config(config_path, overrides)
    _echo_config(cfg)
    try:
        records = load_dataset(data_path)
    except GraphParseError as e:
        _fail_usage(e)
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.ckpt")
    cfg_hash = config_hash(cfg)
    meta = {"model_config_hash": _dict_hash(vars(cfg.model))}
    try:
        model = build_model(records, cfg.model, cfg.train.seed)

        def checkpoint_each_epoch(epoch, trace):
            save_model(ckpt_path, model, cfg_hash, meta)

        result = train(
            records, cfg.model, cfg.train, model=model, log=checkpoint_each_epoch
        )
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    save_model(ckpt_path, result.model, cfg_hash, meta)
    write_loss_csv(result.loss_trace, os.path.join(out_dir, "loss.csv"))
    final_loss = result.loss_trace[-1][2] if result.loss_trace else float("nan")
    click.echo(
        f"trained {result.epochs_run} epochs, final batch loss {final_loss:.6f}"
    )
    if result.dropped_answers:
        click.echo(f"dropped {result.dropped_answers} out-of-space answers")
    click.echo(f"wrote {ckpt_path}")


@main.command("eval")
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--force", is_flag=True, help="Evaluate despite a config-hash mismatch.")
@click.option("--wo-attr", is_flag=True, default=False)
@click.option("--wo-rela", is_flag=True, default=False)
@click.option("--wo-qf", is_flag=True, default=False)
def cmd_eval(ckpt_path, data_path, force, wo_attr, wo_rela, wo_qf):
    """Evaluate a checkpoint: accuracy, per-qtype accuracy, error breakdown."""
    try:
        model, metadata = load_model(ckpt_path)
        records = load_dataset(data_path)
    except (ValueError, OSError) as e:
        _fail_usage(e)
    if wo_attr:
        model.cfg.wo_attr = True
    if wo_rela:
        model.cfg.wo_rela = True
    if wo_qf:
        model.cfg.wo_qf = True
    stored_hash = metadata.get("model_config_hash")
    effective_hash = _dict_hash(vars(model.cfg))
    if stored_hash is not None and effective_hash != stored_hash and not force:
        click.echo(
            "error: flags change the model configuration recorded in the "
            "checkpoint; pass --force to evaluate anyway",
            err=True,
        )
        sys.exit(2)
    click.echo(f"config {metadata.get('config_hash', 'unknown')}")
    report = evaluate(records, model)
    click.echo(report.to_text())


@main.command("gradcheck")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--t-steps", type=int, default=2, show_default=True)
@click.option("--gates", type=click.Choice(["logistic", "relu"]), default="logistic")
@click.option("--qenc", type=click.Choice(["gru", "lstm"]), default="gru")
@click.option("--eps", type=float, default=1e-4, show_default=True,
              help="Central-difference step; larger than the unit-test "
              "default to keep cancellation noise below threshold on the "
              "smallest end-to-end gradients.")
def cmd_gradcheck(seed, t_steps, gates, qenc, eps):
    """Finite-difference check of every parameter on the micro fixture."""
    click.echo(
        f"config {_dict_hash(dict(seed=seed, t_steps=t_steps, gates=gates, qenc=qenc, eps=eps))}"
    )
    results = gradcheck_by_group(seed, t_steps, gates, qenc, eps)
    worst = 0.0
    for group, err in results.items():
        click.echo(f"{group:<10} max rel err {err:.3e}")
        worst = max(worst, err)
    if worst <= GRADCHECK_THRESHOLD:
        click.echo(f"PASS (max {worst:.3e} <= {GRADCHECK_THRESHOLD:.0e})")
    else:
        click.echo(f"FAIL (max {worst:.3e} > {GRADCHECK_THRESHOLD:.0e})")
        sys.exit(1)


@main.command("dualize")
@click.argument("graph_file", type=click.Path(exists=True))
def cmd_dualize(graph_file):
    """Print the object-significant and relation-significant views."""
    try:
        with open(graph_file, encoding="utf-8") as fh:
            sg = parse_scene_graph(fh.read())
    except GraphParseError as e:
        _fail_usage(e)
    pair = dualize(sg)
    for label, view in (
        ("object-significant", pair.object_view),
        ("relation-significant", pair.relation_view),
    ):
        n_tuples = sum(len(x) for x in view.a_in)
        click.echo(f"{label}: {len(view.node_tokens)} nodes, {n_tuples} directed tuples")
        for i, tok in enumerate(view.node_tokens):
            ins = ", ".join(
                f"(e{k} from {view.node_tokens[j]})" for k, j in view.a_in[i]
            )
            outs = ", ".join(
                f"(e{k} to {view.node_tokens[j]})" for k, j in view.a_out[i]
            )
            click.echo(f"  [{i}] {tok}: in=[{ins}] out=[{outs}]")
        for k, tok in enumerate(view.edge_tokens):
            click.echo(f"  edge e{k}: {tok}")
    if sg.self_loops:
        click.echo(f"self-loop edges: {list(sg.self_loops)}")


@main.command("metrics")
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--ks", default="20,50,100", show_default=True)
def cmd_metrics(pred_path, gt_path, ks):
    """R@K and mR@K table from prediction and ground-truth files."""
    try:
        k_values = [int(k) for k in ks.split(",") if k]
        instances = build_instances(
            load_predictions(pred_path), load_ground_truth(gt_path)
        )
        click.echo(metrics_table(instances, k_values))
    except (MetricsError, ValueError) as e:
        _fail_usage(e)


@main.command("explain")
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--graph", "graph_file", type=click.Path(exists=True), required=True)
@click.option("--question", required=True, help="Whitespace-tokenized question.")
@click.option("--top-k", type=int, default=5, show_default=True)
def cmd_explain(ckpt_path, graph_file, question, top_k):
    """Top attention scores over fusion rows, plus the predicted answer."""
    try:
        model, metadata = load_model(ckpt_path)
        with open(graph_file, encoding="utf-8") as fh:
            sg = parse_scene_graph(fh.read())
    except (ValueError, OSError) as e:
        _fail_usage(e)
    tokens = tuple(question.split())
    if not tokens:
        _fail_usage("question is empty")
    click.echo(f"config {metadata.get('config_hash', 'unknown')}")
    try:
        ranked, answer = model.explain(sg, tokens, top_k=top_k)
    except ValueError as e:
        _fail_usage(e)
    for row in ranked:
        click.echo(
            f"{row['rank']}. {row['score']:.4f}  {row['kind']:<9} "
            f"{row['token']} (id {row['node_or_edge_id']})"
        )
    click.echo(f"answer: {answer}")


if __name__ == "__main__":
    main()

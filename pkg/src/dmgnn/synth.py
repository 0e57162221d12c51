"""Seeded generator of scene graphs with templated QA pairs.

Tokens come from disjoint object / predicate / attribute vocabularies so
the evaluation error breakdown is exact. Every emitted question has
exactly one valid answer in its graph; ambiguous draws are rejected and
resampled.
"""

from dataclasses import dataclass

from .graphs import QARecord, scene_graph
from .seeding import substream

QTYPES = ("object-query", "relation-query", "attribute-query", "composite-why")

MAX_ATTEMPTS = 500


class GenerationError(ValueError):
    pass


def object_token(i):
    return f"obj{i:02d}"


def predicate_token(i):
    return f"rel{i:02d}"


def attribute_token(i):
    return f"attr{i:02d}"


def _random_graph(rng, cfg):
    n_nodes = int(rng.integers(cfg.nodes_range[0], cfg.nodes_range[1] + 1))
    n_edges = int(rng.integers(cfg.edges_range[0], cfg.edges_range[1] + 1))
    nodes = []
    for _ in range(n_nodes):
        name = object_token(int(rng.integers(cfg.object_vocab_size)))
        n_attrs = int(
            rng.integers(cfg.attrs_per_node_range[0], cfg.attrs_per_node_range[1] + 1)
        )
        n_attrs = min(n_attrs, cfg.attribute_vocab_size)
        attrs = rng.choice(cfg.attribute_vocab_size, size=n_attrs, replace=False)
        nodes.append((name, [attribute_token(int(a)) for a in sorted(attrs)]))
    edges = []
    if n_nodes > 0:
        for _ in range(n_edges):
            s = int(rng.integers(n_nodes))
            o = int(rng.integers(n_nodes))
            p = predicate_token(int(rng.integers(cfg.predicate_vocab_size)))
            edges.append((s, p, o))
    return scene_graph(nodes, edges)


def enumerate_answers(graph, question, qtype):
    """All answers the graph supports for a templated question; used both
    to reject ambiguous draws and by the uniqueness audit."""
    q = list(question)
    if qtype == "object-query":
        # "what is <pred> the <obj>" -> subject name
        pred, obj = q[2], q[4]
        return {
            graph.nodes[e.subject].name
            for e in graph.edges
            if e.predicate == pred and graph.nodes[e.object].name == obj
        }
    if qtype == "relation-query":
        # "what relation from <a> to <b>" -> predicate
        a, b = q[3], q[5]
        return {
            e.predicate
            for e in graph.edges
            if graph.nodes[e.subject].name == a and graph.nodes[e.object].name == b
        }
    if qtype == "attribute-query":
        # "what attribute has the <obj>" -> the node's attribute
        obj = q[4]
        return {
            attr for n in graph.nodes if n.name == obj for attr in n.attributes
        }
    if qtype == "composite-why":
        # "why <attr> <obj>" -> predicate on the edge incident to the
        # attribute-bearing node
        attr, obj = q[1], q[2]
        answers = set()
        for n in graph.nodes:
            if n.name == obj and attr in n.attributes:
                for e in graph.edges:
                    if n.id in (e.subject, e.object):
                        answers.add(e.predicate)
        return answers
    raise GenerationError(f"unknown qtype {qtype!r}")


def _draw_question(rng, graph, qtype):
    """Instantiate the template on the graph, or None if impossible."""
    if qtype == "object-query":
        if not graph.edges:
            return None
        e = graph.edges[int(rng.integers(len(graph.edges)))]
        question = (
            "what", "is", e.predicate, "the", graph.nodes[e.object].name,
        )
        answer = graph.nodes[e.subject].name
    elif qtype == "relation-query":
        if not graph.edges:
            return None
        e = graph.edges[int(rng.integers(len(graph.edges)))]
        question = (
            "what", "relation", "from",
            graph.nodes[e.subject].name, "to", graph.nodes[e.object].name,
        )
        answer = e.predicate
    elif qtype == "attribute-query":
        candidates = [n for n in graph.nodes if n.attributes]
        if not candidates:
            return None
        n = candidates[int(rng.integers(len(candidates)))]
        question = ("what", "attribute", "has", "the", n.name)
        answer = n.attributes[int(rng.integers(len(n.attributes)))]
    elif qtype == "composite-why":
        candidates = [
            n
            for n in graph.nodes
            if n.attributes
            and any(n.id in (e.subject, e.object) for e in graph.edges)
        ]
        if not candidates:
            return None
        n = candidates[int(rng.integers(len(candidates)))]
        attr = n.attributes[int(rng.integers(len(n.attributes)))]
        incident = [e for e in graph.edges if n.id in (e.subject, e.object)]
        question = ("why", attr, n.name)
        answer = incident[int(rng.integers(len(incident)))].predicate
    else:
        raise GenerationError(f"unknown qtype {qtype!r}")
    return question, answer


_ANSWER_KIND = {
    "object-query": "object",
    "relation-query": "relation",
    "attribute-query": "attribute",
    "composite-why": "relation",
}


@dataclass(frozen=True)
class QAExample:
    record: QARecord
    answer_kind: str


def generate(cfg):
    """Deterministic dataset from the seed; every question has exactly one
    valid answer (ambiguous draws are resampled with a fresh graph)."""
    cfg.validate()
    rng = substream(cfg.seed, "datagen")
    qtypes = [q for q in QTYPES if cfg.qtype_mix.get(q, 0) > 0]
    weights = [cfg.qtype_mix[q] for q in qtypes]
    total_w = sum(weights)
    probs = [w / total_w for w in weights]

    examples = []
    for _ in range(cfg.n_examples):
        qtype = qtypes[int(rng.choice(len(qtypes), p=probs))]
        for _attempt in range(MAX_ATTEMPTS):
            graph = _random_graph(rng, cfg)
            drawn = _draw_question(rng, graph, qtype)
            if drawn is None:
                continue
            question, answer = drawn
            if enumerate_answers(graph, question, qtype) == {answer}:
                examples.append(
                    QAExample(
                        record=QARecord(graph, question, answer, qtype),
                        answer_kind=_ANSWER_KIND[qtype],
                    )
                )
                break
        else:
            raise GenerationError(
                f"could not satisfy template {qtype!r} in {MAX_ATTEMPTS} draws; "
                "widen the generator ranges"
            )
    return examples


def split(examples, ratio, seed):
    """Disjoint seeded split; graphs never appear on both sides (the
    generator creates a fresh graph per example)."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n_train = int(len(examples) * ratio)
    if n_train == 0 or n_train == len(examples):
        raise ValueError(f"too few examples ({len(examples)}) to split at {ratio}")
    rng = substream(seed, "split")
    order = rng.permutation(len(examples))
    train = [examples[i] for i in order[:n_train]]
    test = [examples[i] for i in order[n_train:]]
    return train, test

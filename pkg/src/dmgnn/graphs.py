"""Scene-graph data model and its object/relation-significant dualization.

A scene graph describes an image symbolically: objects (with attributes)
as nodes, predicates as directed edges. The object-significant view is
the graph in its native form. The relation-significant view is the dual:
one node per relation *instance*, with a directed tuple in each direction
between two relations whenever they share an endpoint object (one tuple
pair per shared endpoint), structurally a line-graph-like transform.
"""

import json
from dataclasses import dataclass, field


class GraphParseError(ValueError):
    pass


@dataclass(frozen=True)
class SgNode:
    id: int
    name: str
    attributes: tuple


@dataclass(frozen=True)
class SgEdge:
    id: int
    subject: int
    predicate: str
    object: int


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple
    edges: tuple

    @property
    def self_loops(self):
        return tuple(e.id for e in self.edges if e.subject == e.object)

    def to_dict(self):
        return {
            "nodes": [
                {"name": n.name, "attributes": list(n.attributes)} for n in self.nodes
            ],
            "edges": [
                {"subject": e.subject, "predicate": e.predicate, "object": e.object}
                for e in self.edges
            ],
        }


@dataclass(frozen=True)
class GraphView:
    """Encodable graph: token payloads plus incident/outgoing adjacency.

    a_in[i] lists (edge_index, neighbor) pairs where i is the target;
    a_out[i] lists pairs where i is the source.
    """

    node_tokens: tuple
    edge_tokens: tuple
    a_in: tuple  # per node: tuple of (edge_index, neighbor_index)
    a_out: tuple
    origin: str  # "object" | "relation"


@dataclass(frozen=True)
class DualPair:
    object_view: GraphView
    relation_view: GraphView
    # relation-view node index -> original edge id
    rel_node_to_edge: tuple
    # relation-view directed tuple occurrences -> shared original node id,
    # keyed by (rel_edge_index) in emission order
    rel_edge_shared_node: tuple


def scene_graph(nodes, edges):
    """Build a validated SceneGraph from plain (name, attributes) and
    (subject, predicate, object) sequences; ids are assigned densely."""
    sg_nodes = tuple(
        SgNode(i, name, tuple(attrs)) for i, (name, attrs) in enumerate(nodes)
    )
    sg_edges = []
    for i, (s, p, o) in enumerate(edges):
        for label, ref in (("subject", s), ("object", o)):
            if not 0 <= ref < len(sg_nodes):
                raise GraphParseError(f"edges[{i}].{label}: unknown node {ref}")
        sg_edges.append(SgEdge(i, s, p, o))
    return SceneGraph(sg_nodes, tuple(sg_edges))


def parse_scene_graph(document):
    """Parse a scene-graph record (JSON text or already-decoded dict)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise GraphParseError(f"invalid JSON: {e}") from e
    if not isinstance(document, dict):
        raise GraphParseError("top level: expected an object")
    unknown = set(document) - {"nodes", "edges"}
    if unknown:
        raise GraphParseError(f"top level: unknown fields {sorted(unknown)}")

    nodes = []
    for i, raw in enumerate(document.get("nodes", [])):
        if not isinstance(raw, dict) or "name" not in raw:
            raise GraphParseError(f"nodes[{i}]: expected an object with 'name'")
        name = raw["name"]
        if not isinstance(name, str):
            raise GraphParseError(f"nodes[{i}].name: expected a string")
        attrs = raw.get("attributes", [])
        if not isinstance(attrs, list) or not all(isinstance(a, str) for a in attrs):
            raise GraphParseError(f"nodes[{i}].attributes: expected a list of strings")
        nodes.append((name, attrs))

    edges = []
    for i, raw in enumerate(document.get("edges", [])):
        if not isinstance(raw, dict):
            raise GraphParseError(f"edges[{i}]: expected an object")
        for key in ("subject", "predicate", "object"):
            if key not in raw:
                raise GraphParseError(f"edges[{i}].{key}: missing")
        s, p, o = raw["subject"], raw["predicate"], raw["object"]
        if not isinstance(s, int) or isinstance(s, bool):
            raise GraphParseError(f"edges[{i}].subject: expected an int")
        if not isinstance(o, int) or isinstance(o, bool):
            raise GraphParseError(f"edges[{i}].object: expected an int")
        if not isinstance(p, str):
            raise GraphParseError(f"edges[{i}].predicate: expected a string")
        edges.append((s, p, o))

    return scene_graph(nodes, edges)


def build_object_view(sg):
    """Native view: nodes are objects, edges are predicates."""
    n = len(sg.nodes)
    a_in = [[] for _ in range(n)]
    a_out = [[] for _ in range(n)]
    for e in sg.edges:
        a_out[e.subject].append((e.id, e.object))
        a_in[e.object].append((e.id, e.subject))
    return GraphView(
        node_tokens=tuple(nd.name for nd in sg.nodes),
        edge_tokens=tuple(e.predicate for e in sg.edges),
        a_in=tuple(tuple(x) for x in a_in),
        a_out=tuple(tuple(x) for x in a_out),
        origin="object",
    )


def _shared_endpoint_tuples(sg):
    """Directed tuples (edge_i -> edge_j via node_k) for every unordered
    pair of distinct edges sharing endpoint k, emitted in both directions.
    Two edges sharing both endpoints yield one tuple pair per endpoint."""
    out = []
    edges = sg.edges
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            ei, ej = edges[i], edges[j]
            shared = []
            for k in (ei.subject, ei.object):
                if k in (ej.subject, ej.object):
                    shared.append(k)
            if ei.subject == ei.object and shared:
                # self-loop endpoints collapse to one shared object
                shared = shared[:1]
            for k in shared:
                out.append((i, j, k))
                out.append((j, i, k))
    return out


def build_relation_view(sg):
    """Dual view: one node per relation instance; relations connect when
    they share an endpoint object."""
    n = len(sg.edges)
    tuples = _shared_endpoint_tuples(sg)
    a_in = [[] for _ in range(n)]
    a_out = [[] for _ in range(n)]
    edge_tokens = []
    for idx, (i, j, k) in enumerate(tuples):
        a_out[i].append((idx, j))
        a_in[j].append((idx, i))
        edge_tokens.append(sg.nodes[k].name)
    return GraphView(
        node_tokens=tuple(e.predicate for e in sg.edges),
        edge_tokens=tuple(edge_tokens),
        a_in=tuple(tuple(x) for x in a_in),
        a_out=tuple(tuple(x) for x in a_out),
        origin="relation",
    )


def dualize(sg):
    object_view = build_object_view(sg)
    relation_view = build_relation_view(sg)
    shared = tuple(k for (_, _, k) in _shared_endpoint_tuples(sg))
    return DualPair(
        object_view=object_view,
        relation_view=relation_view,
        rel_node_to_edge=tuple(e.id for e in sg.edges),
        rel_edge_shared_node=shared,
    )


# ---------------------------------------------------------------------------
# dataset records


@dataclass(frozen=True)
class QARecord:
    graph: SceneGraph
    question: tuple
    answer: str
    qtype: str


def parse_dataset_line(line, lineno=0):
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        raise GraphParseError(f"line {lineno}: invalid JSON: {e}") from e
    for key in ("graph", "question", "answer", "qtype"):
        if key not in raw:
            raise GraphParseError(f"line {lineno}: missing field '{key}'")
    question = raw["question"]
    if not isinstance(question, list) or not all(
        isinstance(t, str) for t in question
    ):
        raise GraphParseError(f"line {lineno}: question must be a list of tokens")
    return QARecord(
        graph=parse_scene_graph(raw["graph"]),
        question=tuple(question),
        answer=raw["answer"],
        qtype=raw["qtype"],
    )


def load_dataset(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            records.append(parse_dataset_line(line, lineno))
    return records


def save_dataset(records, path, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "graph": rec.graph.to_dict(),
                        "question": list(rec.question),
                        "answer": rec.answer,
                        "qtype": rec.qtype,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

"""Textual graphs, QA datasets, and deterministic subgraph textualization.

Datasets are JSON Lines, one QA example per line:

    {"id": str, "question": str, "answers": [str, ...],
     "graph": {"nodes": [{"id": int, "text": str}],
               "edges": [{"src": int, "dst": int, "text": str}]}}

Node ids may also be strings in the file; in that case the whole graph is
re-keyed to contiguous integers and the original ids are kept in an alias
table on the graph. Everything is immutable after load and safe to share
across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError


@dataclass(frozen=True)
class TextNode:
    id: int
    text: str


@dataclass(frozen=True)
class TextEdge:
    src: int
    dst: int
    text: str


@dataclass(frozen=True)
class TextualGraph:
    """A graph whose nodes and edges carry free-text attributes."""

    nodes: tuple[TextNode, ...]
    edges: tuple[TextEdge, ...]
    alias: dict[str, int] | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def node_index(self) -> dict[int, int]:
        """Map node id -> position in the node list (last wins on duplicates)."""
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node_ids(self) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes)


def validate(graph: TextualGraph) -> list[str]:
    """Return every invariant violation in ``graph``; empty iff valid.

    Violations are report entries, not failures: duplicate node ids,
    dangling edge endpoints, self-loops, and empty (after trimming) texts.
    """
    report: list[str] = []
    seen: set[int] = set()
    for node in graph.nodes:
        if node.id in seen:
            report.append(f"duplicate node id {node.id}")
        seen.add(node.id)
        if not node.text.strip():
            report.append(f"node {node.id} has empty text")
    ids = graph.node_ids()
    for k, edge in enumerate(graph.edges):
        for endpoint in (edge.src, edge.dst):
            if endpoint not in ids:
                report.append(f"edge {k} has dangling endpoint {endpoint}")
        if edge.src == edge.dst:
            report.append(f"edge {k} is a self-loop on node {edge.src}")
        if not edge.text.strip():
            report.append(f"edge {k} ({edge.src}->{edge.dst}) has empty text")
    return report


@dataclass(frozen=True)
class Subgraph:
    """A node/edge selection from a parent graph; endpoints stay inside it."""

    parent: TextualGraph
    node_ids: frozenset[int]
    edge_indices: frozenset[int]

    def __post_init__(self):
        parent_ids = self.parent.node_ids()
        if not self.node_ids <= parent_ids:
            raise ValueError(f"subgraph nodes {sorted(self.node_ids - parent_ids)} not in parent")
        for k in self.edge_indices:
            if k < 0 or k >= self.parent.num_edges:
                raise ValueError(f"edge index {k} out of range")
            edge = self.parent.edges[k]
            if edge.src not in self.node_ids or edge.dst not in self.node_ids:
                raise ValueError(f"edge {k} has endpoint outside the subgraph")

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edge_indices)

    def sorted_nodes(self) -> list[TextNode]:
        index = self.parent.node_index()
        return sorted((self.parent.nodes[index[i]] for i in self.node_ids), key=lambda n: n.id)

    def sorted_edges(self) -> list[TextEdge]:
        picked = [self.parent.edges[k] for k in self.edge_indices]
        return sorted(picked, key=lambda e: (e.src, e.dst, e.text))


@dataclass(frozen=True)
class QaExample:
    id: str
    question: str
    answers: tuple[str, ...]
    graph: TextualGraph


@dataclass(frozen=True)
class Demonstration:
    """A solved example: retrieved subgraph plus its cached prompt text."""

    example: QaExample
    subgraph: Subgraph
    prompt_text: str


def textualize(subgraph: Subgraph) -> str:
    """Flatten a subgraph into a canonical text block.

    Nodes render as ``id|text`` sorted by id, edges as ``src|text|dst``
    sorted by (src, dst, text); insertion order never matters, so equal
    subgraph contents give byte-identical strings.
    """
    lines = ["nodes:\n"]
    for node in subgraph.sorted_nodes():
        lines.append(f"{node.id}|{node.text}\n")
    lines.append("edges:\n")
    lines.append("\n".join(f"{e.src}|{e.text}|{e.dst}" for e in subgraph.sorted_edges()))
    return "".join(lines)


def _parse_graph(obj: dict, where: str) -> TextualGraph:
    try:
        raw_nodes = obj["nodes"]
        raw_edges = obj["edges"]
    except (KeyError, TypeError):
        raise DataError(f"{where}: graph object needs 'nodes' and 'edges'")

    alias: dict[str, int] | None = None
    if any(not isinstance(n.get("id"), int) or isinstance(n.get("id"), bool) for n in raw_nodes):
        # String (or mixed) ids: re-key every node to 0..n-1 in file order.
        alias = {}
        for n in raw_nodes:
            key = str(n.get("id"))
            if key in alias:
                raise DataError(f"{where}: duplicate node id {key!r}")
            alias[key] = len(alias)
        id_of = lambda raw: alias.get(str(raw))
    else:
        id_of = lambda raw: raw if isinstance(raw, int) else None

    nodes = []
    seen: set[int] = set()
    for n in raw_nodes:
        try:
            nid = alias[str(n["id"])] if alias is not None else n["id"]
            text = n["text"]
        except (KeyError, TypeError):
            raise DataError(f"{where}: malformed node entry {n!r}")
        if not isinstance(text, str):
            raise DataError(f"{where}: node {n['id']!r} text must be a string")
        if nid in seen:
            raise DataError(f"{where}: duplicate node id {n['id']!r}")
        seen.add(nid)
        nodes.append(TextNode(id=nid, text=text))

    edges = []
    for k, e in enumerate(raw_edges):
        try:
            src, dst, text = id_of(e["src"]), id_of(e["dst"]), e["text"]
        except (KeyError, TypeError):
            raise DataError(f"{where}: malformed edge entry {e!r}")
        if src is None or src not in seen:
            raise DataError(f"{where}: dangling endpoint, edge {k} src {e['src']!r}")
        if dst is None or dst not in seen:
            raise DataError(f"{where}: dangling endpoint, edge {k} dst {e['dst']!r}")
        if src == dst:
            raise DataError(f"{where}: self-loop on node {e['src']!r}, edge {k}")
        if not isinstance(text, str):
            raise DataError(f"{where}: edge {k} text must be a string")
        edges.append(TextEdge(src=src, dst=dst, text=text))

    return TextualGraph(nodes=tuple(nodes), edges=tuple(edges), alias=alias)


def _parse_example(obj: dict, where: str) -> QaExample:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected a JSON object")
    for key in ("id", "question", "answers", "graph"):
        if key not in obj:
            raise DataError(f"{where}: missing key {key!r}")
    question = obj["question"]
    answers = obj["answers"]
    if not isinstance(question, str) or not question.strip():
        raise DataError(f"{where}: question must be a non-empty string")
    if not isinstance(answers, list) or not answers or not all(isinstance(a, str) for a in answers):
        raise DataError(f"{where}: answers must be a non-empty list of strings")
    return QaExample(
        id=str(obj["id"]),
        question=question,
        answers=tuple(answers),
        graph=_parse_graph(obj["graph"], where),
    )


def load_dataset(path: str | Path) -> list[QaExample]:
    """Load a JSON Lines QA dataset, preserving file order.

    Raises DataError naming the offending line on malformed JSON, dangling
    edge endpoints, self-loops, duplicate ids, or empty answer lists.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    examples: list[QaExample] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON ({exc.msg})")
            examples.append(_parse_example(obj, where))
    return examples


def example_to_obj(example: QaExample) -> dict:
    """Serialize one example back to the JSONL object shape."""
    return {
        "id": example.id,
        "question": example.question,
        "answers": list(example.answers),
        "graph": {
            "nodes": [{"id": n.id, "text": n.text} for n in example.graph.nodes],
            "edges": [{"src": e.src, "dst": e.dst, "text": e.text} for e in example.graph.edges],
        },
    }


def save_dataset(examples: list[QaExample], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example_to_obj(example), ensure_ascii=False) + "\n")


def full_subgraph(graph: TextualGraph) -> Subgraph:
    """The subgraph covering the whole graph (used for whole-graph prompts)."""
    return Subgraph(
        parent=graph,
        node_ids=graph.node_ids(),
        edge_indices=frozenset(range(graph.num_edges)),
    )

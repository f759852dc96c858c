"""End-to-end orchestration: embed, retrieve, route, encode, prompt, generate.

Every stage failure is wrapped in a StageError carrying the stage name.
Traces hold only JSON-serializable values and no timestamps, so a trace
digest is stable across identical runs; manifests add wall-clock metadata
on top of the traces.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .embed import HashEmbedder, RemoteEmbedder, embed_texts
from .encoder import (
    DemoInput,
    EncoderDims,
    EncoderParams,
    encode_subgraph,
    fuse_demonstrations,
    init_params,
    load_checkpoint,
    project,
)
from .errors import DataError, GraphQAError, StageError
from .experts import (
    ClusterModel,
    DemoPool,
    build_prompt_text,
    default_lambda_reg,
    load_cluster_model,
    route,
    select_cluster_count,
    select_demo_indices,
)
from .llm import RemoteLlm, StubLlm, assemble_prompt, generate
from .metrics import MetricReport, hit_at_1, normalize
from .pcst import KERNEL_NAME, retrieve_subgraph
from .store import Demonstration, QaExample, Subgraph, load_dataset

METRIC_NAMES = ("accuracy", "hit_at_1")


@dataclass
class PipelineContext:
    """Loaded models and providers shared by every example of a run."""

    config: PipelineConfig
    embedder: object
    provider: object
    params: EncoderParams
    pool: DemoPool | None
    cluster_model: ClusterModel | None
    demo_inputs: tuple[DemoInput, ...]


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc)


def _graph_vectors(embedder, graph):
    node_vecs = embed_texts(embedder, [n.text for n in graph.nodes])
    edge_vecs = embed_texts(embedder, [e.text for e in graph.edges])
    return node_vecs, edge_vecs


def _subgraph_vectors(subgraph: Subgraph, node_vecs, edge_vecs):
    """Vectors aligned with the subgraph's sorted node/edge views."""
    graph = subgraph.parent
    by_id = {node.id: vec for node, vec in zip(graph.nodes, node_vecs)}
    sub_nodes = tuple(by_id[n.id] for n in subgraph.sorted_nodes())
    order = sorted(
        sorted(subgraph.edge_indices),
        key=lambda k: (graph.edges[k].src, graph.edges[k].dst, graph.edges[k].text),
    )
    sub_edges = tuple(edge_vecs[k] for k in order)
    return sub_nodes, sub_edges


def retrieve_for(embedder, example: QaExample, config: PipelineConfig, trace=None):
    node_vecs, edge_vecs = _graph_vectors(embedder, example.graph)
    query_vec = embed_texts(embedder, [example.question])[0]
    subgraph = retrieve_subgraph(
        example.graph,
        query_vec,
        node_vecs,
        edge_vecs,
        k_nodes=config.k_nodes,
        k_edges=config.k_edges,
        edge_cost=config.edge_cost,
        trace=trace,
    )
    return subgraph, query_vec, node_vecs, edge_vecs


def build_pool(embedder, config: PipelineConfig):
    """Solve every pool example once and cache its demo parts."""
    examples = load_dataset(config.pool_path)
    if not examples:
        raise DataError(f"demo pool {config.pool_path} is empty")
    demos = []
    demo_inputs = []
    for example in examples:
        subgraph, _, node_vecs, edge_vecs = retrieve_for(embedder, example, config)
        seed_demo = Demonstration(example=example, subgraph=subgraph, prompt_text="")
        demo = Demonstration(
            example=example,
            subgraph=subgraph,
            prompt_text=build_prompt_text(seed_demo),
        )
        demos.append(demo)
        sub_nodes, sub_edges = _subgraph_vectors(subgraph, node_vecs, edge_vecs)
        demo_inputs.append(
            DemoInput(subgraph=subgraph, node_vecs=sub_nodes, edge_vecs=sub_edges)
        )
    prompt_vectors = embed_texts(embedder, [d.prompt_text for d in demos])
    pool = DemoPool(demos=tuple(demos), prompt_vectors=tuple(prompt_vectors))
    return pool, tuple(demo_inputs)


def stub_vocab(examples) -> tuple[str, ...]:
    """Sorted unique gold answers; the stub's candidate set."""
    answers = sorted({a for ex in examples for a in ex.answers})
    if not answers:
        raise DataError("no answers available to build a stub vocabulary")
    return tuple(answers)


def load_context(config: PipelineConfig) -> PipelineContext:
    """Materialize providers, the demo pool, and encoder weights."""
    if config.embed_url:
        embedder = RemoteEmbedder(
            config.embed_url, dim=config.d_in, timeout_secs=config.timeout_secs
        )
    else:
        embedder = HashEmbedder(dim=config.d_in, seed=config.seed)

    pool = None
    demo_inputs: tuple[DemoInput, ...] = ()
    cluster_model = None
    if config.pool_path:
        pool, demo_inputs = build_pool(embedder, config)
        if config.cluster_path:
            cluster_model = load_cluster_model(config.cluster_path)
            if len(cluster_model.assignments) != len(pool.demos):
                raise DataError(
                    f"cluster model {config.cluster_path} covers "
                    f"{len(cluster_model.assignments)} demos, pool has {len(pool.demos)}"
                )
            if cluster_model.centroids[0].shape[0] != config.d_in:
                raise DataError(
                    f"cluster model {config.cluster_path} dim "
                    f"{cluster_model.centroids[0].shape[0]} != d_in {config.d_in}"
                )
        else:
            points = np.stack(pool.prompt_vectors)
            lambda_reg = (
                config.lambda_reg
                if config.lambda_reg is not None
                else default_lambda_reg(points)
            )
            cluster_model = select_cluster_count(
                points, lambda_reg, config.c_max, config.seed
            )

    dims = EncoderDims(
        d_in=config.d_in,
        d_hidden=config.d_hidden,
        d_llm=config.d_llm,
        layers=config.layers,
        projector_activation=config.projector_activation,
    )
    if config.checkpoint_path:
        params = load_checkpoint(config.checkpoint_path)
        if params.dims != dims:
            raise DataError(
                f"checkpoint {config.checkpoint_path} dims {params.dims} "
                f"do not match the configured dims {dims}"
            )
    else:
        params = init_params(dims, config.seed)

    if config.llm_url:
        provider = RemoteLlm(
            config.llm_url,
            timeout_secs=config.timeout_secs,
            max_tokens=config.max_tokens,
        )
    else:
        if pool is not None:
            vocab_source = [d.example for d in pool.demos]
        elif config.dataset_path:
            vocab_source = load_dataset(config.dataset_path)
        else:
            raise DataError(
                "the stub provider needs pool_path or dataset_path for a vocabulary"
            )
        provider = StubLlm(vocab=stub_vocab(vocab_source), seed=config.seed)

    return PipelineContext(
        config=config,
        embedder=embedder,
        provider=provider,
        params=params,
        pool=pool,
        cluster_model=cluster_model,
        demo_inputs=demo_inputs,
    )


def run_pipeline(context: PipelineContext, example: QaExample):
    """Answer one example; returns (GenerationResult, trace dict)."""
    config = context.config
    trace: dict = {"example_id": example.id, "kernel": KERNEL_NAME}

    retrieve_trace: dict = {}
    subgraph, query_vec, node_vecs, edge_vecs = _stage(
        "retrieve", retrieve_for, context.embedder, example, config, retrieve_trace
    )
    trace["embed"] = {
        "dim": config.d_in,
        "query_digest": hashlib.sha256(query_vec.tobytes()).hexdigest(),
        "embedder": context.embedder.identifier,
    }
    trace["retrieve"] = _jsonable(retrieve_trace)

    demos = []
    demo_idx: list[int] = []
    if context.pool is not None and context.cluster_model is not None and config.demos_m > 0:
        def _route_and_pick():
            routed = route(query_vec, context.cluster_model)
            ids = select_demo_indices(
                context.pool, context.cluster_model, routed, query_vec, config.demos_m
            )
            picked = [context.pool.demos[i] for i in ids]
            return routed, picked, list(ids)

        routed, demos, demo_idx = _stage("route", _route_and_pick)
        trace["route"] = {
            "cluster": routed.cluster,
            "score": routed.score,
            "demo_ids": [context.pool.demos[i].example.id for i in demo_idx],
        }
    else:
        trace["route"] = {"cluster": None, "score": None, "demo_ids": []}

    def _encode():
        sub_nodes, sub_edges = _subgraph_vectors(subgraph, node_vecs, edge_vecs)
        current = encode_subgraph(
            subgraph, sub_nodes, sub_edges, query_vec, context.params
        )
        demo_zs = [
            encode_subgraph(
                context.demo_inputs[i].subgraph,
                context.demo_inputs[i].node_vecs,
                context.demo_inputs[i].edge_vecs,
                query_vec,
                context.params,
            ).z_s
            for i in demo_idx
        ]
        fusion = fuse_demonstrations(current.z_s, demo_zs, query_vec, context.params)
        return project(fusion.z_final, context.params), fusion

    p_graph, fusion = _stage("encode", _encode)
    trace["encode"] = {
        "fusion_weights": [round(float(w), 9) for w in fusion.weights],
        "p_graph_digest": hashlib.sha256(p_graph.tobytes()).hexdigest(),
    }

    bundle = _stage(
        "assemble",
        assemble_prompt,
        demos,
        p_graph,
        subgraph,
        example.question,
        config.budget_chars,
    )
    trace["assemble"] = {
        "prompt_chars": len(bundle.p_demo) + len(bundle.p_text_graph),
        "demos_rendered": bundle.p_demo.count("---\n"),
    }

    result = _stage("generate", generate, context.provider, bundle)
    trace["generate"] = {"answer": result.answer, "provider": result.provider}
    return result, trace


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return round(float(value), 9)
    if isinstance(value, frozenset):
        return sorted(value)
    return value


def trace_digest(trace: dict) -> str:
    """Stable digest of a trace (no timestamps ever enter traces)."""
    blob = json.dumps(_jsonable(trace), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run with offline providers."""

    config: dict
    seed: int
    providers: dict
    kernel: str
    started: str
    finished: str
    traces: list

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "providers": self.providers,
            "kernel": self.kernel,
            "started": self.started,
            "finished": self.finished,
            "traces": self.traces,
        }

    def digest(self) -> str:
        """Digest over everything except wall-clock fields."""
        obj = self.to_dict()
        obj.pop("started")
        obj.pop("finished")
        blob = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _verdict(prediction: str, example: QaExample, metric: str) -> str:
    if metric == "accuracy":
        wanted = {normalize(a) for a in example.answers}
        return "correct" if normalize(prediction) in wanted else "wrong"
    return "correct" if hit_at_1(prediction, list(example.answers)) else "wrong"


def evaluate(config: PipelineConfig, dataset, metric: str = "accuracy"):
    """Run the pipeline over a dataset; returns (MetricReport, RunManifest).

    Per-example failures become verdict "error" rows; the run aborts only
    if every example fails (the first error is re-raised).
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"metric must be one of {METRIC_NAMES}")
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset must be non-empty")
    started = _now()
    context = load_context(config)

    def job(example):
        try:
            result, trace = run_pipeline(context, example)
            return result.answer, trace, None
        except GraphQAError as exc:
            return "", {"example_id": example.id, "error": str(exc)}, exc

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        outcomes = list(pool.map(job, dataset))

    errors = [exc for _, _, exc in outcomes if exc is not None]
    if len(errors) == len(dataset):
        raise errors[0]

    rows = []
    hits = 0
    correct = 0
    traces = []
    for example, (answer, trace, exc) in zip(dataset, outcomes):
        traces.append(trace)
        if exc is not None:
            rows.append((example.id, "", "error"))
            continue
        verdict = _verdict(answer, example, metric)
        if verdict == "correct":
            correct += 1
        if hit_at_1(answer, list(example.answers)):
            hits += 1
        rows.append((example.id, answer, verdict))

    n = len(dataset)
    report = MetricReport(
        n=n,
        correct=correct,
        accuracy=correct / n,
        hit_at_1=hits / n,
        per_example=tuple(rows),
    )
    manifest = RunManifest(
        config=config.to_dict(),
        seed=config.seed,
        providers={
            "embedder": context.embedder.identifier,
            "llm": context.provider.identifier,
        },
        kernel=KERNEL_NAME,
        started=started,
        finished=_now(),
        traces=traces,
    )
    return report, manifest


def report_to_dict(report: MetricReport) -> dict:
    return {
        "n": report.n,
        "correct": report.correct,
        "accuracy": report.accuracy,
        "hit_at_1": report.hit_at_1,
        "per_example": [list(row) for row in report.per_example],
    }

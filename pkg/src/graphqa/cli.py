"""Command-line surface.

Subcommands mirror the pipeline stages: ingest, embed, retrieve,
cluster-demos, train, gradcheck, answer, evaluate. Exit codes: 0 success,
1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from .config import PipelineConfig, load_config
from .embed import EmbeddingCache, HashEmbedder, RemoteEmbedder
from .encoder import (
    EncoderDims,
    TrainExample,
    grad_check,
    init_head,
    init_params,
    save_checkpoint,
    train_encoder,
)
from .errors import DataError, GraphQAError, ProviderError, StageError, UsageError
from .experts import default_lambda_reg, save_cluster_model, select_cluster_count
from .pcst import KERNEL_NAME
from .pipeline import (
    build_pool,
    retrieve_for,
    evaluate,
    load_context,
    report_to_dict,
    run_pipeline,
    stub_vocab,
    trace_digest,
)
from .store import load_dataset, save_dataset, textualize

GRADCHECK_DIMS = EncoderDims(d_in=6, d_hidden=6, d_llm=5, layers=2)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_retrieval_flags(parser):
    parser.add_argument("--k-nodes", type=int, help="top-k nodes given prizes")
    parser.add_argument("--k-edges", type=int, help="top-k edges given prizes")
    parser.add_argument("--edge-cost", type=float, help="per-edge inclusion cost")


def _add_provider_flags(parser):
    parser.add_argument("--llm-url", help="remote generation endpoint")
    parser.add_argument("--stub", action="store_true",
                        help="force the offline stub generator")
    parser.add_argument("--budget-chars", type=int,
                        help="demonstration character budget")
    parser.add_argument("--timeout-secs", type=float,
                        help="provider timeout in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphqa", description=__doc__)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--trace", action="store_true",
                        help="emit per-stage trace JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and normalize ids")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="fill an embedding cache for a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--embed-url", help="remote embedding endpoint")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("retrieve", help="retrieve the subgraph for one example")
    p.add_argument("--dataset", required=True)
    p.add_argument("--id", required=True, dest="example_id")
    p.add_argument("--output", help="write the result JSON here instead of stdout")
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("cluster-demos", help="cluster the demonstration pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--c-max", type=int)
    p.add_argument("--lambda-reg", type=float)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_cluster_demos)

    p = sub.add_parser("train", help="train the encoder on a demo pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference check of the encoder")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("answer", help="answer a single example end to end")
    p.add_argument("--dataset", required=True)
    p.add_argument("--id", required=True, dest="example_id")
    p.add_argument("--pool")
    _add_retrieval_flags(p)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("evaluate", help="score the pipeline over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pool")
    p.add_argument("--metric", choices=("accuracy", "hit_at_1"),
                   default="accuracy")
    p.add_argument("--report", help="write the metric report JSON here")
    p.add_argument("--manifest", help="write the run manifest JSON here")
    _add_retrieval_flags(p)
    _add_provider_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def _config_for(args) -> PipelineConfig:
    """Start from --config (or defaults) and fold in the given flags."""
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    flag_map = {
        "k_nodes": "k_nodes",
        "k_edges": "k_edges",
        "edge_cost": "edge_cost",
        "budget_chars": "budget_chars",
        "timeout_secs": "timeout_secs",
        "llm_url": "llm_url",
        "embed_url": "embed_url",
        "c_max": "c_max",
        "lambda_reg": "lambda_reg",
        "pool": "pool_path",
        "dataset": "dataset_path",
    }
    known = {f.name for f in fields(PipelineConfig)}
    for attr, field in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None and field in known:
            overrides[field] = value
    if getattr(args, "stub", False):
        overrides["llm_url"] = None
    return config.replace(**overrides)


def _embedder_for(config: PipelineConfig):
    if config.embed_url:
        return RemoteEmbedder(config.embed_url, dim=config.d_in,
                              timeout_secs=config.timeout_secs)
    return HashEmbedder(dim=config.d_in, seed=config.seed)


def _find_example(examples, example_id: str):
    for example in examples:
        if example.id == example_id:
            return example
    raise DataError(f"example id {example_id!r} not found in the dataset")


def _emit(obj, path: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_ingest(args) -> int:
    examples = load_dataset(args.input)
    save_dataset(examples, args.output)
    print(f"ingested {len(examples)} examples -> {args.output}")
    return 0


def cmd_embed(args) -> int:
    config = _config_for(args)
    examples = load_dataset(args.input)
    embedder = _embedder_for(config)
    cache = EmbeddingCache(embedder.identifier, config.d_in)
    texts = []
    for example in examples:
        texts.append(example.question)
        texts.extend(n.text for n in example.graph.nodes)
        texts.extend(e.text for e in example.graph.edges)
    cache.embed(embedder, texts)
    cache.save(args.output)
    print(f"cached {len(cache)} vectors ({embedder.identifier}) -> {args.output}")
    return 0


def cmd_retrieve(args) -> int:
    config = _config_for(args)
    examples = load_dataset(args.dataset)
    example = _find_example(examples, args.example_id)
    trace: dict | None = {} if args.trace else None
    embedder = _embedder_for(config)
    subgraph, _, _, _ = retrieve_for(embedder, example, config, trace)
    result = {
        "id": example.id,
        "kernel": KERNEL_NAME,
        "nodes": [[n.id, n.text] for n in subgraph.sorted_nodes()],
        "edges": [[e.src, e.text, e.dst] for e in subgraph.sorted_edges()],
        "textualized": textualize(subgraph),
    }
    if trace is not None:
        result["trace"] = trace
    _emit(result, args.output)
    return 0


def cmd_cluster_demos(args) -> int:
    config = _config_for(args)
    embedder = _embedder_for(config)
    pool, _ = build_pool(embedder, config)
    points = np.stack(pool.prompt_vectors)
    lambda_reg = (
        config.lambda_reg if config.lambda_reg is not None
        else default_lambda_reg(points)
    )
    model = select_cluster_count(points, lambda_reg, config.c_max, config.seed)
    save_cluster_model(model, args.output)
    sizes = [model.assignments.count(c) for c in range(model.c_star)]
    print(
        f"clustered {len(pool.demos)} demos into {model.c_star} experts "
        f"(sizes {sizes}, lambda {lambda_reg:.6g}) -> {args.output}"
    )
    return 0


def cmd_train(args) -> int:
    config = _config_for(args)
    embedder = _embedder_for(config)
    pool, demo_inputs = build_pool(embedder, config)
    dims = EncoderDims(
        d_in=config.d_in,
        d_hidden=config.d_hidden,
        d_llm=config.d_llm,
        layers=config.layers,
        projector_activation=config.projector_activation,
    )
    vocab = stub_vocab([d.example for d in pool.demos])
    head = init_head(vocab, config.d_llm, config.seed)
    params = init_params(dims, config.seed)
    dataset = []
    for demo, inputs in zip(pool.demos, demo_inputs):
        query_vec = embedder.embed([demo.example.question])[0]
        dataset.append(
            TrainExample(
                subgraph=inputs.subgraph,
                node_vecs=inputs.node_vecs,
                edge_vecs=inputs.edge_vecs,
                query_vec=query_vec,
                label=demo.example.answers[0],
                demos=(),
            )
        )
    trained, curve = train_encoder(
        dataset, params, head, lr=args.lr, epochs=args.epochs, seed=config.seed
    )
    save_checkpoint(trained, args.output)
    if curve:
        print(
            f"trained {args.epochs} epochs on {len(dataset)} examples: "
            f"loss {curve[0]:.6f} -> {curve[-1]:.6f} -> {args.output}"
        )
    else:
        print(f"saved untrained parameters -> {args.output}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(0)
    params = init_params(GRADCHECK_DIMS, seed=0)
    head = init_head(("left", "right", "up"), GRADCHECK_DIMS.d_llm, seed=1)
    from .store import TextEdge, TextNode, TextualGraph, full_subgraph

    nodes = tuple(TextNode(id=i, text=f"n{i}") for i in range(4))
    edges = (
        TextEdge(src=0, dst=1, text="a"),
        TextEdge(src=1, dst=2, text="b"),
        TextEdge(src=2, dst=3, text="c"),
        TextEdge(src=0, dst=3, text="d"),
    )
    subgraph = full_subgraph(TextualGraph(nodes=nodes, edges=edges))
    d = GRADCHECK_DIMS.d_in
    batch = [
        TrainExample(
            subgraph=subgraph,
            node_vecs=tuple(rng.normal(size=d) for _ in range(4)),
            edge_vecs=tuple(rng.normal(size=d) for _ in range(4)),
            query_vec=rng.normal(size=d),
            label=label,
        )
        for label in ("left", "up")
    ]
    err = grad_check(batch, params, head, eps=args.eps)
    status = "PASS" if err <= args.tol else "FAIL"
    print(f"gradcheck {status}: max relative error {err:.3e} (tol {args.tol:.1e})")
    return 0 if err <= args.tol else 2


def cmd_answer(args) -> int:
    config = _config_for(args)
    examples = load_dataset(args.dataset)
    example = _find_example(examples, args.example_id)
    context = load_context(config)
    result, trace = run_pipeline(context, example)
    if args.trace:
        _emit(
            {"answer": result.answer, "trace": trace,
             "trace_digest": trace_digest(trace)},
            None,
        )
    else:
        print(result.answer)
    return 0


def cmd_evaluate(args) -> int:
    config = _config_for(args)
    examples = load_dataset(args.dataset)
    report, manifest = evaluate(config, examples, metric=args.metric)
    if args.report:
        _emit(report_to_dict(report), args.report)
    if args.manifest:
        _emit(manifest.to_dict(), args.manifest)
    print(
        f"n={report.n} correct={report.correct} "
        f"accuracy={report.accuracy:.4f} hit_at_1={report.hit_at_1:.4f}"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        code = 3 if isinstance(exc.cause, ProviderError) else 2
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (DataError, GraphQAError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

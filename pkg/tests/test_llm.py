"""Tests for prompt assembly and generation providers."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from graphqa.errors import ProviderError
from graphqa.llm import (
    GenerationResult,
    PromptBundle,
    RemoteLlm,
    StubLlm,
    assemble_prompt,
    generate,
    render_demos,
    render_prompt,
    stub_generate,
)
from graphqa.store import (
    Demonstration,
    QaExample,
    TextEdge,
    TextNode,
    TextualGraph,
    full_subgraph,
    textualize,
)


def tiny_graph(texts, edges):
    nodes = tuple(TextNode(id=i, text=t) for i, t in enumerate(texts))
    edge_objs = tuple(TextEdge(src=s, dst=d, text=t) for s, d, t in edges)
    return TextualGraph(nodes=nodes, edges=edge_objs)


def make_demo(question, answer, texts=("amanita", "forest"), edges=((0, 1, "grows in"),)):
    graph = tiny_graph(texts, edges)
    example = QaExample(
        id=f"demo-{question[:8]}", question=question, answers=(answer,), graph=graph
    )
    sub = full_subgraph(graph)
    return Demonstration(example=example, subgraph=sub, prompt_text="")


class TestRenderDemos:
    def test_empty_list(self):
        assert render_demos([], budget_chars=100) == ""

    def test_single_demo_format(self):
        demo = make_demo("where does amanita grow?", "forest")
        out = render_demos([demo], budget_chars=10_000)
        expected = (
            f"graph:\n{textualize(demo.subgraph)}\n"
            f"question: where does amanita grow?\n"
            f"answer: forest\n---\n"
        )
        assert out == expected

    def test_two_demos_in_order_with_separator(self):
        a = make_demo("first question?", "one")
        b = make_demo("second question?", "two")
        out = render_demos([a, b], budget_chars=10_000)
        assert out.index("first question?") < out.index("second question?")
        assert out.count("---\n") == 2

    def test_one_demo_exceeding_budget_gives_empty(self):
        demo = make_demo("a question?", "answer")
        assert render_demos([demo], budget_chars=5) == ""

    def test_drops_from_end_until_within_budget(self):
        demos = [make_demo(f"question number {i}?", f"a{i}") for i in range(4)]
        full = render_demos(demos, budget_chars=100_000)
        block_len = len(full) // 4
        assert block_len * 4 == len(full)  # equal-size blocks by construction
        kept_two = render_demos(demos, budget_chars=2 * block_len + 5)
        assert kept_two == full[: 2 * block_len]
        assert "question number 0?" in kept_two
        assert "question number 1?" in kept_two
        assert "question number 2?" not in kept_two

    def test_never_truncates_mid_demo(self):
        demos = [make_demo(f"question number {i}?", f"a{i}") for i in range(3)]
        blocks = [render_demos([d], budget_chars=10_000) for d in demos]
        for budget in range(1, sum(len(b) for b in blocks) + 10, 7):
            out = render_demos(demos, budget_chars=budget)
            assert any(
                out == "".join(blocks[:k]) for k in range(len(blocks) + 1)
            ), f"budget {budget} produced a partial block"

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            render_demos([], budget_chars=0)


class TestAssemblePrompt:
    def test_zero_demos(self):
        graph = tiny_graph(("boletus",), ())
        bundle = assemble_prompt(
            [], np.zeros(4), full_subgraph(graph), "is it edible?"
        )
        assert bundle.p_demo == ""
        assert bundle.instruction
        assert "boletus" in bundle.p_text_graph
        assert bundle.question == "is it edible?"

    def test_part_order_in_rendered_prompt(self):
        demo = make_demo("earlier question?", "yes")
        graph = tiny_graph(("morel", "spring"), ((0, 1, "appears in"),))
        bundle = assemble_prompt(
            [demo], np.ones(3), full_subgraph(graph), "when does morel appear?"
        )
        text = render_prompt(bundle)
        positions = [
            text.index(bundle.instruction),
            text.index("earlier question?"),
            text.index("0|morel"),
            text.index("when does morel appear?"),
        ]
        assert positions == sorted(positions)

    def test_deterministic_bytes(self):
        demo = make_demo("repeatable?", "yes")
        graph = tiny_graph(("chanterelle", "oak"), ((0, 1, "found near"),))
        a = assemble_prompt([demo], np.ones(3), full_subgraph(graph), "where?")
        b = assemble_prompt([demo], np.ones(3), full_subgraph(graph), "where?")
        assert render_prompt(a) == render_prompt(b)
        assert a.p_demo == b.p_demo and a.p_text_graph == b.p_text_graph

    def test_over_budget_drops_demos_keeps_order(self):
        demos = [make_demo(f"question number {i}?", f"a{i}") for i in range(3)]
        one_block = len(render_demos([demos[0]], budget_chars=10_000))
        graph = tiny_graph(("x",), ())
        bundle = assemble_prompt(
            demos, np.zeros(2), full_subgraph(graph), "q?",
            budget_chars=one_block + 1,
        )
        assert "question number 0?" in bundle.p_demo
        assert "question number 1?" not in bundle.p_demo

    def test_empty_question_rejected(self):
        graph = tiny_graph(("x",), ())
        with pytest.raises(ValueError):
            assemble_prompt([], np.zeros(2), full_subgraph(graph), "   ")

    def test_only_p_demo_is_elastic(self):
        demos = [make_demo(f"question number {i}?", f"a{i}") for i in range(3)]
        graph = tiny_graph(("persistent",), ())
        for budget in (1, 50, 10_000):
            bundle = assemble_prompt(
                demos, np.zeros(2), full_subgraph(graph), "still here?",
                budget_chars=budget,
            )
            text = render_prompt(bundle)
            assert "persistent" in text
            assert "still here?" in text
            assert bundle.instruction in text


class TestStubGenerate:
    def bundle_with(self, p_text_graph, p_demo="", p_graph=(0.0,)):
        return PromptBundle(
            instruction="answer",
            p_demo=p_demo,
            p_graph=np.array(p_graph),
            p_text_graph=p_text_graph,
            question="q?",
        )

    def test_count_dominance(self):
        bundle = self.bundle_with("nodes:\n0|yes yes\nedges:\n")
        assert stub_generate(bundle, ["yes", "no"], seed=0) == "yes"

    def test_counts_include_demo_answers(self):
        bundle = self.bundle_with(
            "nodes:\n0|neutral\nedges:\n",
            p_demo="graph:\nnodes:\nedges:\n\nquestion: q?\nanswer: truffle\n---\n",
        )
        assert stub_generate(bundle, ["truffle", "absent"], seed=0) == "truffle"

    def test_deterministic(self):
        bundle = self.bundle_with("nodes:\n0|some text\nedges:\n")
        vocab = ["alpha", "beta", "gamma"]
        outs = {stub_generate(bundle, vocab, seed=9) for _ in range(5)}
        assert len(outs) == 1

    def test_output_always_in_vocab(self):
        rng = np.random.default_rng(5)
        vocab = ["one", "two", "three"]
        for _ in range(20):
            bundle = self.bundle_with(
                "nodes:\n0|filler\nedges:\n", p_graph=tuple(rng.normal(size=3))
            )
            assert stub_generate(bundle, vocab, seed=3) in vocab

    def test_soft_prompt_breaks_ties(self):
        vocab = ["alpha", "beta"]
        winners = set()
        for value in np.linspace(-1.0, 1.0, 17):
            bundle = self.bundle_with("nodes:\n0|nothing relevant\nedges:\n",
                                      p_graph=(float(value),))
            winners.add(stub_generate(bundle, vocab, seed=1))
        assert winners == {"alpha", "beta"}

    def test_rounding_merges_nearby_graph_prompts(self):
        a = self.bundle_with("nodes:\nedges:\n", p_graph=(0.25,))
        b = self.bundle_with("nodes:\nedges:\n", p_graph=(0.25 + 1e-9,))
        vocab = ["alpha", "beta", "gamma"]
        assert stub_generate(a, vocab, seed=2) == stub_generate(b, vocab, seed=2)

    def test_empty_vocab_rejected(self):
        bundle = self.bundle_with("nodes:\nedges:\n")
        with pytest.raises(ValueError):
            stub_generate(bundle, [], seed=0)


class TestGenerate:
    def test_stub_provider_round_trip(self):
        graph = tiny_graph(("porcini", "pine"), ((0, 1, "grows under"),))
        bundle = assemble_prompt(
            [], np.zeros(3), full_subgraph(graph), "what grows under pine?"
        )
        provider = StubLlm(vocab=("porcini", "nothing"), seed=0)
        result = generate(provider, bundle)
        assert isinstance(result, GenerationResult)
        assert result.answer == "porcini"
        assert result.provider == "stub"
        assert result.prompt_chars == len(render_prompt(bundle))

    def test_stub_determinism_across_runs(self):
        graph = tiny_graph(("truffle",), ())
        bundle = assemble_prompt([], np.ones(2), full_subgraph(graph), "what?")
        provider = StubLlm(vocab=("truffle", "morel"), seed=4)
        answers = {generate(provider, bundle).answer for _ in range(5)}
        assert len(answers) == 1

    def test_empty_answer_is_provider_error(self):
        class BlankProvider:
            identifier = "blank"
            supports_soft_prompt = False

            def complete(self, bundle):
                return "   "

        graph = tiny_graph(("x",), ())
        bundle = assemble_prompt([], np.zeros(2), full_subgraph(graph), "q?")
        with pytest.raises(ProviderError, match="empty"):
            generate(BlankProvider(), bundle)

    def test_answer_is_trimmed_verbatim(self):
        class EchoProvider:
            identifier = "echo"
            supports_soft_prompt = False

            def complete(self, bundle):
                return "  The Answer  "

        graph = tiny_graph(("x",), ())
        bundle = assemble_prompt([], np.zeros(2), full_subgraph(graph), "q?")
        assert generate(EchoProvider(), bundle).answer == "The Answer"


class _GenHandler(BaseHTTPRequestHandler):
    status = 200
    body = None
    seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length).decode("utf-8"))
        type(self).seen.append((self.path, payload))
        if self.status != 200:
            self.send_response(self.status)
            self.end_headers()
            return
        body = self.body if self.body is not None else json.dumps(
            {"text": f"echo: {payload['prompt'][:20]}"}
        )
        data = body.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def gen_server():
    _GenHandler.status = 200
    _GenHandler.body = None
    _GenHandler.seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _GenHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join()


class TestRemoteLlm:
    def make_bundle(self):
        graph = tiny_graph(("shiitake",), ())
        return assemble_prompt([], np.zeros(2), full_subgraph(graph), "q?")

    def test_posts_expected_wire_format(self, gen_server):
        provider = RemoteLlm(gen_server, max_tokens=32)
        result = generate(provider, self.make_bundle())
        assert result.provider == "remote"
        assert result.answer.startswith("echo:")
        path, payload = _GenHandler.seen[0]
        assert path == "/generate"
        assert set(payload) == {"prompt", "max_tokens"}
        assert payload["max_tokens"] == 32
        assert "shiitake" in payload["prompt"]

    def test_http_error_surfaces_status(self, gen_server):
        _GenHandler.status = 500
        provider = RemoteLlm(gen_server)
        with pytest.raises(ProviderError, match="500"):
            generate(provider, self.make_bundle())

    def test_malformed_body(self, gen_server):
        _GenHandler.body = "not json at all"
        provider = RemoteLlm(gen_server)
        with pytest.raises(ProviderError, match="malformed"):
            generate(provider, self.make_bundle())

    def test_missing_text_key(self, gen_server):
        _GenHandler.body = json.dumps({"output": "wrong key"})
        provider = RemoteLlm(gen_server)
        with pytest.raises(ProviderError, match="malformed"):
            generate(provider, self.make_bundle())

    def test_unreachable_endpoint(self):
        provider = RemoteLlm("http://127.0.0.1:9", timeout_secs=0.5)
        with pytest.raises(ProviderError, match="unreachable"):
            generate(provider, self.make_bundle())

    def test_ctor_validation(self):
        with pytest.raises(ValueError):
            RemoteLlm("http://x", timeout_secs=0.0)
        with pytest.raises(ValueError):
            RemoteLlm("http://x", max_tokens=0)
        with pytest.raises(ValueError):
            RemoteLlm("http://x", max_in_flight=0)

"""Prompt assembly and pluggable generation providers.

The final prompt concatenates, in fixed order: an instruction preamble,
rendered demonstrations, the graph prompt vector, the textualized
subgraph, and the question. Soft prompts cannot cross an HTTP text
boundary, so the remote provider receives only the text parts while the
in-process stub consumes the vector too, keeping the four-part
concatenation exercised end to end offline.
"""

from __future__ import annotations

import hashlib
import json
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import ProviderError
from .store import Subgraph, textualize

INSTRUCTION = (
    "Answer the question using the graph context below. "
    "Reply with the answer only."
)
SEPARATOR = "\n\n"
ENV_LLM_URL = "GRAPHQA_LLM_URL"
DEFAULT_BUDGET_CHARS = 8000
DEFAULT_TIMEOUT_SECS = 60.0


@dataclass(frozen=True)
class PromptBundle:
    """The assembled prompt parts, ordered as they reach the model."""

    instruction: str
    p_demo: str
    p_graph: np.ndarray
    p_text_graph: str
    question: str


@dataclass(frozen=True)
class GenerationResult:
    answer: str
    provider: str
    prompt_chars: int


def render_demos(demos, budget_chars: int) -> str:
    """Render demonstrations, dropping whole blocks from the end to fit.

    Demos arrive most-relevant first; blocks are never truncated mid-demo,
    so a single over-budget demo renders as an empty string.
    """
    if budget_chars <= 0:
        raise ValueError("budget_chars must be positive")
    blocks = []
    for demo in demos:
        blocks.append(
            f"graph:\n{textualize(demo.subgraph)}\n"
            f"question: {demo.example.question}\n"
            f"answer: {demo.example.answers[0]}\n---\n"
        )
    while blocks and sum(len(b) for b in blocks) > budget_chars:
        blocks.pop()
    return "".join(blocks)


def assemble_prompt(
    demos,
    graph_prompt,
    subgraph: Subgraph,
    question: str,
    budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> PromptBundle:
    """Build the full prompt bundle in the fixed part order."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    return PromptBundle(
        instruction=INSTRUCTION,
        p_demo=render_demos(demos, budget_chars),
        p_graph=np.asarray(graph_prompt, dtype=np.float64),
        p_text_graph=textualize(subgraph),
        question=question,
    )


def render_prompt(bundle: PromptBundle) -> str:
    """The textual rendering: non-empty parts joined by a blank line."""
    parts = [bundle.instruction, bundle.p_demo, bundle.p_text_graph, bundle.question]
    return SEPARATOR.join(part for part in parts if part)


def _demo_answers(p_demo: str) -> str:
    """The answer lines of a rendered demonstration block."""
    return "\n".join(
        line[len("answer: "):]
        for line in p_demo.splitlines()
        if line.startswith("answer: ")
    )


def stub_generate(bundle: PromptBundle, vocab, seed: int) -> str:
    """Deterministic offline stand-in for a generation model.

    Scores each vocab entry by its occurrence count in the textualized
    subgraph plus the demonstration answers; ties break on a seeded hash
    of the entry and the graph prompt rounded to 1e-6, so the output is
    sensitive to both the text and the soft prompt.
    """
    vocab = list(vocab)
    if not vocab:
        raise ValueError("vocab must be non-empty")
    answers_text = _demo_answers(bundle.p_demo)
    rounded = np.round(np.asarray(bundle.p_graph, dtype=np.float64), 6).tolist()
    graph_key = json.dumps(rounded).encode("utf-8")

    def tie_digest(entry: str) -> bytes:
        h = hashlib.blake2b(digest_size=16, key=str(seed).encode("utf-8"))
        h.update(graph_key)
        h.update(b"|")
        h.update(entry.encode("utf-8"))
        return h.digest()

    def rank(entry: str):
        count = bundle.p_text_graph.count(entry) + answers_text.count(entry)
        return (-count, tie_digest(entry))

    return min(vocab, key=rank)


@dataclass(frozen=True)
class StubLlm:
    """In-process provider; the only one that can consume the soft prompt."""

    vocab: tuple[str, ...]
    seed: int = 0
    identifier: str = "stub"
    supports_soft_prompt: bool = True

    def complete(self, bundle: PromptBundle) -> str:
        return stub_generate(bundle, self.vocab, self.seed)


class RemoteLlm:
    """HTTP provider: POST /generate with {"prompt", "max_tokens"}."""

    supports_soft_prompt = False

    def __init__(
        self,
        url: str,
        timeout_secs: float = DEFAULT_TIMEOUT_SECS,
        max_tokens: int = 64,
        max_in_flight: int = 4,
    ):
        if timeout_secs <= 0:
            raise ValueError("timeout_secs must be positive")
        if max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.url = url.rstrip("/")
        self.timeout_secs = timeout_secs
        self.max_tokens = max_tokens
        self.identifier = "remote"
        self._gate = threading.Semaphore(max_in_flight)

    def complete(self, bundle: PromptBundle) -> str:
        payload = json.dumps(
            {"prompt": render_prompt(bundle), "max_tokens": self.max_tokens}
        ).encode("utf-8")
        request = urllib.request.Request(
            f"{self.url}/generate",
            data=payload,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with self._gate:
            try:
                with urllib.request.urlopen(request, timeout=self.timeout_secs) as resp:
                    body = resp.read()
            except urllib.error.HTTPError as exc:
                raise ProviderError(f"generation endpoint returned HTTP {exc.code}")
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                raise ProviderError(f"generation endpoint unreachable: {exc}")
        try:
            obj = json.loads(body.decode("utf-8"))
            text = obj["text"]
        except (ValueError, KeyError, UnicodeDecodeError):
            raise ProviderError("generation endpoint returned a malformed body")
        if not isinstance(text, str):
            raise ProviderError("generation endpoint 'text' must be a string")
        return text


def generate(provider, bundle: PromptBundle) -> GenerationResult:
    """Dispatch a bundle to a provider and wrap its verbatim trimmed answer."""
    prompt_chars = len(render_prompt(bundle))
    answer = provider.complete(bundle).strip()
    if not answer:
        raise ProviderError(f"provider {provider.identifier!r} returned an empty answer")
    return GenerationResult(
        answer=answer, provider=provider.identifier, prompt_chars=prompt_chars
    )

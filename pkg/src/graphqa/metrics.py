"""QA metrics: exact-match accuracy and answer containment (hit@1)."""

from __future__ import annotations

import re
from dataclasses import dataclass

_WS = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Lowercase, trim, and collapse runs of whitespace to single spaces."""
    return _WS.sub(" ", text.strip()).lower()


def accuracy_metric(predictions, golds) -> float:
    """Fraction of predictions exactly matching any gold answer.

    Both sides are normalized before comparison; golds is a list of
    answer-lists aligned with predictions.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"got {len(predictions)} predictions for {len(golds)} gold lists"
        )
    if not predictions:
        raise ValueError("cannot score an empty list")
    correct = 0
    for pred, answers in zip(predictions, golds):
        wanted = {normalize(a) for a in answers}
        if normalize(pred) in wanted:
            correct += 1
    return correct / len(predictions)


def hit_at_1(prediction: str, golds) -> bool:
    """True iff any normalized gold occurs inside the normalized prediction.

    Generated free text often embeds the answer in a sentence, so
    containment rather than equality is the scoring rule here.
    """
    golds = list(golds)
    if not golds:
        raise ValueError("golds must be non-empty")
    haystack = normalize(prediction)
    return any(normalize(g) in haystack for g in golds)


@dataclass(frozen=True)
class MetricReport:
    """Aggregate scores plus one (id, prediction, verdict) row per example.

    ``accuracy`` is the pass rate of whichever metric the evaluation ran
    with (its verdicts are the per_example rows); ``hit_at_1`` is always
    the containment rate, reported alongside for comparison.
    """

    n: int
    correct: int
    accuracy: float
    hit_at_1: float
    per_example: tuple[tuple[str, str, str], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("report needs at least one example")
        if len(self.per_example) != self.n:
            raise ValueError("per_example length must equal n")
        if abs(self.accuracy - self.correct / self.n) > 1e-12:
            raise ValueError("accuracy must equal correct/n")
        if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.hit_at_1 <= 1.0):
            raise ValueError("rates must lie in [0, 1]")

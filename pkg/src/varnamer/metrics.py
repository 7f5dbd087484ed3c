"""Evaluation measures: length Hit@K, token-set accuracy, exact match,
token-level edit distance, character error rate, and corpus aggregation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from . import bpe
from .bpe import SubwordVocab
from .corpus import RefactoringRecord
from .errors import EmptyTruth


def hit_at_k(ranked: list[int], truth: int, k: int) -> int:
    """1 if the true value appears among the first k ranked entries."""
    if not ranked:
        raise ValueError("ranked list must be non-empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1 if truth in ranked[:k] else 0


def accuracy(pred_tokens: list[str], truth_tokens: list[str]) -> float:
    """Recall of distinct ground-truth tokens among the predicted tokens."""
    if not truth_tokens:
        raise EmptyTruth("ground-truth token list is empty")
    truth_set = set(truth_tokens)
    return len(truth_set & set(pred_tokens)) / len(truth_set)


def exact_match(pred_name: str, truth_name: str) -> int:
    return 1 if pred_name == truth_name else 0


def token_edit_distance(pred_tokens: list[str], truth_tokens: list[str]) -> int:
    """Levenshtein distance over token sequences (unit-cost operations)."""
    return _levenshtein(pred_tokens, truth_tokens)


def _levenshtein(a, b) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, item_a in enumerate(a, start=1):
        current = [i]
        for j, item_b in enumerate(b, start=1):
            cost = 0 if item_a == item_b else 1
            current.append(min(previous[j] + 1,        # delete
                               current[j - 1] + 1,     # insert
                               previous[j - 1] + cost))  # substitute
        previous = current
    return previous[-1]


def cer(pred_name: str, truth_name: str) -> float:
    """Character-level edit distance normalized by the truth length, x100.

    Values may exceed 100 when the prediction is much longer than the truth.
    """
    if not truth_name:
        raise EmptyTruth("ground-truth name is empty")
    return _levenshtein(pred_name, truth_name) / len(truth_name) * 100.0


@dataclass
class ExampleResult:
    record_id: str
    prediction: str | None
    truth: str
    hit1: int | None
    hit3: int | None
    accuracy: float | None
    exact_match: int | None
    token_ed: int | None
    cer: float | None


@dataclass
class EvalReport:
    """Aggregated metrics over one dataset plus the per-example rows."""

    dataset: str
    evaluated: int
    excluded: int
    hit_at_1: float | None
    hit_at_3: float | None
    accuracy: float | None
    exact_match: float | None
    mean_token_ed: float | None
    mean_cer: float | None
    rows: list[ExampleResult] = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "evaluated": self.evaluated,
            "excluded": self.excluded,
            "hit_at_1": self.hit_at_1,
            "hit_at_3": self.hit_at_3,
            "accuracy": self.accuracy,
            "exact_match": self.exact_match,
            "mean_token_ed": self.mean_token_ed,
            "mean_cer": self.mean_cer,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "prediction", "truth", "hit1", "hit3",
                             "accuracy", "exact_match", "token_ed", "cer"])
            for row in self.rows:
                writer.writerow([
                    row.record_id, row.prediction, row.truth, row.hit1,
                    row.hit3, row.accuracy, row.exact_match, row.token_ed,
                    row.cer,
                ])

    def summary_table(self) -> str:
        def fmt(value, digits=3):
            return "-" if value is None else f"{value:.{digits}f}"

        lines = [
            f"dataset: {self.dataset}  (evaluated {self.evaluated}, excluded {self.excluded})",
            "Hit@1   Hit@3   Accuracy  EM      CER       ED",
            f"{fmt(self.hit_at_1)}   {fmt(self.hit_at_3)}   "
            f"{fmt(self.accuracy)}     {fmt(self.exact_match)}   "
            f"{fmt(self.mean_cer)}   {fmt(self.mean_token_ed)}",
        ]
        return "\n".join(lines)


def _mean(values: list) -> float | None:
    cleaned = [v for v in values if v is not None]
    if not cleaned:
        return None
    return sum(cleaned) / len(cleaned)


def evaluate_corpus(
    predictor,
    records: list[RefactoringRecord],
    vocab: SubwordVocab,
    max_name_tokens: int = 5,
    dataset: str = "dataset",
) -> EvalReport:
    """Run length and generation metrics over a corpus.

    The predictor may implement ``predict_length(record)`` (ranked
    (length, score) pairs), ``predict_name(record)`` (a name string), or
    both; missing capabilities leave that metric family as None. Records
    whose true name exceeds ``max_name_tokens`` sub-tokens are excluded
    and counted. Predicted and true names are tokenized with the same
    vocabulary so comparisons are like for like.
    """
    has_length = hasattr(predictor, "predict_length")
    has_name = hasattr(predictor, "predict_name")
    rows: list[ExampleResult] = []
    excluded = 0
    for record in records:
        truth_tokens = bpe.tokenize_variable(vocab, record.variable_after)
        if len(truth_tokens) > max_name_tokens:
            excluded += 1
            continue
        hit1 = hit3 = None
        if has_length:
            ranked = [length for length, _ in predictor.predict_length(record)]
            hit1 = hit_at_k(ranked, len(truth_tokens), 1)
            hit3 = hit_at_k(ranked, len(truth_tokens), 3)
        acc = em = ed = cer_value = None
        pred_name = None
        if has_name:
            pred_name = predictor.predict_name(record)
            pred_tokens = bpe.tokenize_variable(vocab, pred_name) if pred_name else []
            acc = accuracy(pred_tokens, truth_tokens)
            em = exact_match(pred_name, record.variable_after)
            ed = token_edit_distance(pred_tokens, truth_tokens)
            cer_value = cer(pred_name, record.variable_after)
        rows.append(ExampleResult(
            record_id=record.id,
            prediction=pred_name,
            truth=record.variable_after,
            hit1=hit1,
            hit3=hit3,
            accuracy=acc,
            exact_match=em,
            token_ed=ed,
            cer=cer_value,
        ))
    return EvalReport(
        dataset=dataset,
        evaluated=len(rows),
        excluded=excluded,
        hit_at_1=_mean([r.hit1 for r in rows]),
        hit_at_3=_mean([r.hit3 for r in rows]),
        accuracy=_mean([r.accuracy for r in rows]),
        exact_match=_mean([r.exact_match for r in rows]),
        mean_token_ed=_mean([r.token_ed for r in rows]),
        mean_cer=_mean([r.cer for r in rows]),
        rows=rows,
    )

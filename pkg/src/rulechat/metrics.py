"""Evaluation metrics: accuracy, BLEU, and agreement coefficients.

All text metrics run on the engine-wide tokenizer.  BLEU here is
sentence-level with epsilon smoothing on zero higher-order precisions,
and corpus BLEU is the mean of sentence scores; identity pairs score
exactly 1.0 and disjoint pairs exactly 0.0.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .core import ValidationError
from .text import tokenize

BLEU_EPSILON = 1e-9

REPORT_FORMAT = "rulechat-report"
REPORT_VERSION = 1


def micro_macro_accuracy(
    preds: Sequence[str], golds: Sequence[str]
) -> tuple[float, float]:
    """Overall fraction correct, and the unweighted mean of per-class
    recall over the classes present in the gold labels."""
    if len(preds) != len(golds):
        raise ValidationError("prediction and gold counts differ")
    if not golds:
        raise ValidationError("nothing to score")
    micro = sum(p == g for p, g in zip(preds, golds)) / len(golds)
    recalls = []
    for cls in sorted(set(golds)):
        total = sum(g == cls for g in golds)
        hit = sum(p == g == cls for p, g in zip(preds, golds))
        recalls.append(hit / total)
    return micro, sum(recalls) / len(recalls)


def confusion_counts(
    preds: Sequence[str], golds: Sequence[str]
) -> dict[str, dict[str, int]]:
    """Nested counts: gold class to predicted class to count."""
    if len(preds) != len(golds):
        raise ValidationError("prediction and gold counts differ")
    table: dict[str, dict[str, int]] = {}
    for p, g in zip(preds, golds):
        table.setdefault(g, {})
        table[g][p] = table[g].get(p, 0) + 1
    return table


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_order: int = 4) -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions up to
    max_order, times the brevity penalty.

    Conventions: an empty candidate, or one sharing no unigram with the
    reference, scores exactly 0.0; zero precisions at higher orders
    (including orders longer than the candidate) are smoothed to a tiny
    epsilon instead.
    """
    if max_order not in (1, 2, 3, 4):
        raise ValidationError("max_order must be 1..4")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        return 0.0
    log_precisions = []
    for order in range(1, max_order + 1):
        total = len(cand) - order + 1
        if total <= 0:
            log_precisions.append(math.log(BLEU_EPSILON))
            continue
        cand_counts = _ngrams(cand, order)
        ref_counts = _ngrams(ref, order)
        matched = sum(
            min(count, ref_counts.get(gram, 0)) for gram, count in cand_counts.items()
        )
        if matched == 0:
            if order == 1:
                return 0.0
            log_precisions.append(math.log(BLEU_EPSILON))
        else:
            log_precisions.append(math.log(matched / total))
    if len(cand) >= len(ref):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(math.fsum(log_precisions) / max_order)


def corpus_bleu(pairs: Sequence[tuple[str, str]], max_order: int = 4) -> float:
    """Mean sentence BLEU over (candidate, reference) pairs."""
    if not pairs:
        raise ValidationError("no pairs to score")
    return sum(bleu(c, r, max_order) for c, r in pairs) / len(pairs)


def cohens_kappa(a: Sequence[str], b: Sequence[str]) -> float:
    """Two-annotator chance-corrected agreement.

    Expected agreement comes from the product of the two annotators'
    marginal distributions.  When both annotators are constant and
    identical, expected agreement is 1 and kappa is taken to be 1.0.
    """
    if len(a) != len(b):
        raise ValidationError("annotation lengths differ")
    if not a:
        raise ValidationError("nothing to score")
    n = len(a)
    observed = sum(x == y for x, y in zip(a, b)) / n
    freq_a = Counter(a)
    freq_b = Counter(b)
    expected = sum(freq_a[c] * freq_b.get(c, 0) for c in freq_a) / (n * n)
    if expected >= 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def sampled_pairwise_kappa(
    annotations: Sequence[Sequence[str]], repeats: int = 100, seed: int = 0
) -> float:
    """Mean Cohen's kappa over randomly chosen annotator pairs.

    Every item must carry exactly three annotations.  Each repeat picks
    one unordered pair of annotator columns at random and scores full
    columns against each other; the mean over repeats is returned.
    """
    if repeats < 1:
        raise ValidationError("repeats must be positive")
    rows = [list(r) for r in annotations]
    if not rows:
        raise ValidationError("nothing to score")
    if any(len(r) != 3 for r in rows):
        raise ValidationError("every item needs exactly 3 annotations")
    rng = random.Random(seed)
    total = 0.0
    for _ in range(repeats):
        i, j = rng.sample(range(3), 2)
        total += cohens_kappa([r[i] for r in rows], [r[j] for r in rows])
    return total / repeats


def fleiss_kappa(table: Sequence[Sequence[int]]) -> float:
    """Multi-rater agreement over an item x category count table.

    Every item must be rated by the same number of raters (row sums
    equal, at least 2).  A table where every rating falls in a single
    category has expected agreement 1 and scores 1.0 by convention.
    """
    rows = [list(r) for r in table]
    if not rows:
        raise ValidationError("empty table")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError("ragged table: rows have different category counts")
    raters = {sum(r) for r in rows}
    if len(raters) != 1:
        raise ValidationError("ragged table: items rated by different rater counts")
    n = raters.pop()
    if n < 2:
        raise ValidationError("need at least 2 raters per item")
    items = len(rows)
    categories = widths.pop()
    p_observed = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in rows
    ) / items
    totals = [sum(row[j] for row in rows) for j in range(categories)]
    shares = [t / (items * n) for t in totals]
    p_expected = sum(s * s for s in shares)
    if p_expected >= 1.0 - 1e-12:
        return 1.0
    return (p_observed - p_expected) / (1.0 - p_expected)


@dataclass(frozen=True)
class MetricReport:
    micro_acc: float
    macro_acc: float
    bleu: dict[int, float] = field(default_factory=dict)
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "micro_acc": self.micro_acc,
            "macro_acc": self.macro_acc,
            "bleu": {str(k): v for k, v in self.bleu.items()},
            "counts": self.counts,
            "meta": self.meta,
        }

    @staticmethod
    def from_dict(record: dict) -> "MetricReport":
        if record.get("format") != REPORT_FORMAT:
            raise ValidationError("not a metric report")
        return MetricReport(
            micro_acc=float(record["micro_acc"]),
            macro_acc=float(record["macro_acc"]),
            bleu={int(k): float(v) for k, v in record.get("bleu", {}).items()},
            counts={
                str(g): {str(p): int(c) for p, c in row.items()}
                for g, row in record.get("counts", {}).items()
            },
            meta=dict(record.get("meta", {})),
        )

"""Term-frequency / inverse-document-frequency vectors over sparse rows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import log
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .core import TrainingError
from .text import tokenize


@dataclass(frozen=True)
class TfidfModel:
    """Fitted vocabulary with idf weights.

    idf(t) = ln(N / df(t)) with raw term counts as tf; weights are
    nonnegative because every vocabulary term occurs in at least one
    document.
    """

    vocabulary: dict[str, int]
    idf: np.ndarray
    document_count: int

    @property
    def size(self) -> int:
        return len(self.vocabulary)


def fit_tfidf(documents: Iterable[str]) -> TfidfModel:
    """Fit vocabulary and idf weights on tokenized documents."""
    doc_freq: Counter[str] = Counter()
    count = 0
    for doc in documents:
        count += 1
        doc_freq.update(set(tokenize(doc)))
    if count == 0:
        raise TrainingError("cannot fit tf-idf on zero documents")
    vocabulary = {token: i for i, token in enumerate(sorted(doc_freq))}
    idf = np.zeros(len(vocabulary))
    for token, i in vocabulary.items():
        idf[i] = log(count / doc_freq[token])
    return TfidfModel(vocabulary=vocabulary, idf=idf, document_count=count)


def tfidf_vectorize(model: TfidfModel, text: str) -> sparse.csr_matrix:
    """Sparse 1 x V row of tf * idf weights; unknown tokens are ignored."""
    counts = Counter(tokenize(text))
    cols = []
    data = []
    for token, tf in counts.items():
        i = model.vocabulary.get(token)
        if i is not None:
            cols.append(i)
            data.append(tf * model.idf[i])
    row = sparse.csr_matrix(
        (data, ([0] * len(cols), cols)), shape=(1, model.size), dtype=float
    )
    return row


def cosine(a: sparse.csr_matrix, b: sparse.csr_matrix) -> float:
    """Cosine similarity between two sparse rows; zero vectors give 0.0."""
    na = sparse.linalg.norm(a)
    nb = sparse.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a.multiply(b).sum() / (na * nb))


def l2_normalize(row: sparse.csr_matrix) -> sparse.csr_matrix:
    norm = sparse.linalg.norm(row)
    if norm == 0.0:
        return row
    return row / norm


def stack_blocks(blocks: Sequence[sparse.csr_matrix]) -> sparse.csr_matrix:
    """Concatenate per-field rows (each L2-normalized) plus a bias column."""
    normalized = [l2_normalize(b) for b in blocks]
    bias = sparse.csr_matrix(np.ones((1, 1)))
    return sparse.hstack(normalized + [bias], format="csr")

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import sparse

from rulechat.core import TrainingError
from rulechat.vectors import (
    cosine,
    fit_tfidf,
    l2_normalize,
    stack_blocks,
    tfidf_vectorize,
)

DOCS = ["the cat sat", "the cat ran", "a dog ran"]


def test_idf_is_log_of_inverse_document_frequency():
    model = fit_tfidf(DOCS)
    # df: the=2, cat=2, sat=1, ran=2, a=1, dog=1 over N=3 documents.
    by_token = {t: model.idf[i] for t, i in model.vocabulary.items()}
    assert by_token["the"] == pytest.approx(math.log(3 / 2))
    assert by_token["cat"] == pytest.approx(math.log(3 / 2))
    assert by_token["sat"] == pytest.approx(math.log(3))
    assert by_token["dog"] == pytest.approx(math.log(3))
    assert model.document_count == 3


def test_vocabulary_is_sorted_and_fitting_is_deterministic():
    a = fit_tfidf(DOCS)
    b = fit_tfidf(DOCS)
    assert a.vocabulary == b.vocabulary
    assert list(a.vocabulary) == sorted(a.vocabulary)
    assert np.array_equal(a.idf, b.idf)


def test_vectorize_multiplies_term_count_by_idf():
    model = fit_tfidf(DOCS)
    row = tfidf_vectorize(model, "cat cat sat")
    dense = row.toarray()[0]
    assert dense[model.vocabulary["cat"]] == pytest.approx(2 * math.log(3 / 2))
    assert dense[model.vocabulary["sat"]] == pytest.approx(math.log(3))
    assert row.shape == (1, model.size)


def test_vectorize_ignores_unseen_tokens():
    model = fit_tfidf(DOCS)
    assert tfidf_vectorize(model, "zebra quagga").nnz == 0


def test_vectorize_empty_text_gives_zero_row():
    model = fit_tfidf(DOCS)
    assert tfidf_vectorize(model, "").nnz == 0


def test_fitting_zero_documents_is_an_error():
    with pytest.raises(TrainingError):
        fit_tfidf([])


def test_cosine_of_identical_rows_is_one():
    model = fit_tfidf(DOCS)
    row = tfidf_vectorize(model, "the cat sat")
    assert cosine(row, row) == pytest.approx(1.0)


def test_cosine_of_disjoint_rows_is_zero():
    model = fit_tfidf(DOCS)
    a = tfidf_vectorize(model, "sat")
    b = tfidf_vectorize(model, "dog")
    assert cosine(a, b) == 0.0


def test_cosine_with_zero_vector_is_zero_not_nan():
    model = fit_tfidf(DOCS)
    zero = tfidf_vectorize(model, "")
    other = tfidf_vectorize(model, "cat")
    assert cosine(zero, other) == 0.0


def test_l2_normalize_gives_unit_norm_and_keeps_zero_rows():
    model = fit_tfidf(DOCS)
    row = tfidf_vectorize(model, "the cat sat ran")
    assert sparse.linalg.norm(l2_normalize(row)) == pytest.approx(1.0)
    zero = tfidf_vectorize(model, "")
    assert l2_normalize(zero).nnz == 0


def test_stack_blocks_appends_a_bias_column():
    model = fit_tfidf(DOCS)
    blocks = [tfidf_vectorize(model, "cat"), tfidf_vectorize(model, "dog ran")]
    stacked = stack_blocks(blocks)
    assert stacked.shape == (1, 2 * model.size + 1)
    assert stacked.toarray()[0, -1] == 1.0
    # each block is normalized independently
    first = stacked.toarray()[0, : model.size]
    assert np.linalg.norm(first) == pytest.approx(1.0)

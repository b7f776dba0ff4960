import math
import random

import pytest

from citegauge.corpus import CitationPair
from citegauge.errors import ConfigurationError, DataError
from citegauge.features import (
    author_overlap,
    compute_feature_matrix,
    cosine_similarity,
    extract_features,
    fit_tfidf,
    tokenize,
    vectorize,
)

from conftest import make_corpus, make_paper
from oracles import oracle_author_jaccard, oracle_tfidf_vector
from fixture_corpus import EXPECTED_TARGET_COUNTS, all_papers, PAIR_ROWS, TARGET_ID


class TestTokenize:
    def test_words_only(self):
        assert tokenize("Citation counts, counted!") == ["citation", "counts", "counted"]

    def test_empty(self):
        assert tokenize("") == []

    def test_short_tokens_and_numbers_dropped(self):
        assert tokenize("TF-IDF in 2015") == ["tf", "idf", "in"]

    def test_no_stopword_removal(self):
        assert "the" in tokenize("the model")


class TestFitTfidf:
    def test_term_in_every_document(self):
        model = fit_tfidf([f"alpha word{i}" for i in range(10)])
        assert model.document_count == 10
        assert model.idf("alpha") == pytest.approx(1.0)

    def test_rare_term(self):
        model = fit_tfidf(["unique term here", "other words", "more words"])
        # ln(4/2) + 1
        assert model.idf("unique") == pytest.approx(1.6931471805599454)

    def test_identical_abstracts_identical_vectors(self):
        text = "same words in both"
        model = fit_tfidf([text, text])
        assert vectorize(model, text) == vectorize(model, text)

    def test_requires_two_documents(self):
        with pytest.raises(ConfigurationError):
            fit_tfidf(["only one"])

    def test_vocabulary_sorted_and_order_independent(self):
        docs = ["zebra apple", "mango zebra", "apple pear"]
        forward = fit_tfidf(docs)
        backward = fit_tfidf(list(reversed(docs)))
        assert forward.vocabulary == backward.vocabulary
        assert list(forward.vocabulary) == sorted(forward.vocabulary)


class TestVectorize:
    DOCS = ["cat cat dog", "cat fish", "bird bird"]

    def test_empty_text(self):
        assert vectorize(fit_tfidf(self.DOCS), "") == {}

    def test_out_of_vocabulary_only(self):
        assert vectorize(fit_tfidf(self.DOCS), "zebra quagga") == {}

    def test_against_oracle(self):
        model = fit_tfidf(self.DOCS)
        for text in self.DOCS + ["cat cat dog", "dog dog dog fish"]:
            got = vectorize(model, text)
            want = oracle_tfidf_vector(self.DOCS, text)
            assert got.keys() == want.keys()
            for dim in want:
                assert got[dim] == pytest.approx(want[dim], rel=1e-12)

    def test_frozen_hand_values(self):
        # df(cat)=2, df(dog)=1, N=3; dims sorted: bird=0, cat=1, dog=2, fish=3
        model = fit_tfidf(self.DOCS)
        vec = vectorize(model, "cat cat dog")
        assert vec[1] == pytest.approx(2 * (math.log(4 / 3) + 1))
        assert vec[2] == pytest.approx(1 * (math.log(4 / 2) + 1))
        assert set(vec) == {1, 2}


class TestCosineSimilarity:
    def test_self_similarity(self):
        v = {0: 1.0, 3: 2.5}
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity({0: 1.0}, {1: 2.0}) == 0.0

    def test_hand_value(self):
        # (1,2,0) . (2,1,1) = 4; norms sqrt(5), sqrt(6)
        assert cosine_similarity((1, 2, 0), (2, 1, 1)) == pytest.approx(
            4 / math.sqrt(30), abs=1e-12
        )

    def test_zero_vector(self):
        assert cosine_similarity({}, {0: 1.0}) == 0.0
        assert cosine_similarity((0, 0), (0, 0)) == 0.0

    def test_symmetry_and_scale_invariance(self):
        rng = random.Random(11)
        for _ in range(100):
            a = {i: rng.uniform(0, 5) for i in rng.sample(range(10), rng.randint(1, 6))}
            b = {i: rng.uniform(0, 5) for i in rng.sample(range(10), rng.randint(1, 6))}
            lam = rng.uniform(0.01, 100)
            ab = cosine_similarity(a, b)
            assert ab == pytest.approx(cosine_similarity(b, a), abs=1e-12)
            scaled = {k: lam * v for k, v in a.items()}
            assert cosine_similarity(scaled, b) == pytest.approx(ab, abs=1e-9)
            assert 0.0 <= ab <= 1.0


class TestAuthorOverlap:
    def test_identical_lists(self):
        authors = ["John Smith", "Anna Jones"]
        assert author_overlap(authors, list(authors)) == 1.0

    def test_disjoint_lists(self):
        assert author_overlap(["John Smith"], ["Ken Lee"]) == 0.0

    def test_jaccard_hand_value(self):
        a = ["John Smith", "Anna Jones"]
        b = ["J. Smith", "Ken Lee", "Sora Park"]
        assert author_overlap(a, b) == pytest.approx(0.25)

    def test_symmetric_reorder_duplicates(self):
        a = ["John Smith", "Anna Jones", "john smith"]
        b = ["Anna Jones", "Sora Park"]
        assert author_overlap(a, b) == author_overlap(b, a)
        assert author_overlap(a, b) == author_overlap(["Anna Jones", "John Smith"], b)

    def test_comma_and_initial_forms_match(self):
        assert author_overlap(["Smith, John"], ["J. Smith"]) == 1.0

    def test_diacritics_folded(self):
        assert author_overlap(["José Muñoz"], ["Jose Munoz"]) == 1.0

    def test_empty_sides(self):
        assert author_overlap([], ["A B"]) == 0.0
        assert author_overlap([], []) == 0.0

    def test_boolean_mode(self):
        a = ["John Smith", "Anna Jones"]
        b = ["J. Smith", "Ken Lee", "Sora Park"]
        assert author_overlap(a, b, mode="boolean") == 1.0
        assert author_overlap(["X Y"], ["Z W"], mode="boolean") == 0.0

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            author_overlap(["A B"], ["A B"], mode="dice")


def _maximal_pair_corpus():
    shared_abstract = "Overlapping abstract text about adaptive convolution restoration."
    cited = make_paper(
        "cited",
        title="Adaptive Convolution Networks",
        authors=["Elena Marchetti", "Tomas Novak"],
        abstract=shared_abstract,
        body="irrelevant",
    )
    citing = make_paper(
        "citing",
        title="A follow-up",
        authors=["Elena Marchetti", "Tomas Novak"],
        abstract=shared_abstract,
        body=(
            "We build on [1] twice: first [1] here.\n\n"
            "References\n"
            "[1] Marchetti, E., Novak, T. 2019. Adaptive Convolution Networks.\n"
        ),
    )
    return make_corpus(cited, citing)


class TestExtractFeatures:
    def test_maximal_synthetic_pair(self):
        corpus = _maximal_pair_corpus()
        tfidf = fit_tfidf([corpus["citing"].abstract, corpus["cited"].abstract])
        vec = extract_features(CitationPair("citing", "cited", 1), corpus, tfidf)
        assert vec.f1_direct_count == 2
        assert vec.f4_author_overlap == 1.0
        assert vec.f9_abstract_sim == pytest.approx(1.0, abs=1e-12)

    def test_minimal_pair(self):
        cited = make_paper(
            "cited", title="Entirely Different Topic", authors=["Q W"],
            abstract="unrelated vocabulary entirely", body="x",
        )
        citing = make_paper(
            "citing", title="Another", authors=["Z Y"],
            abstract="separate disjoint wording", body="No references here.",
        )
        corpus = make_corpus(cited, citing)
        tfidf = fit_tfidf([citing.abstract, cited.abstract])
        vec = extract_features(CitationPair("citing", "cited", 0), corpus, tfidf)
        assert vec.f1_direct_count == 0
        assert vec.f4_author_overlap == 0.0
        assert vec.f9_abstract_sim == 0.0

    def test_missing_record_raises(self):
        corpus = _maximal_pair_corpus()
        tfidf = fit_tfidf(["a b", "c d"])
        with pytest.raises(DataError):
            extract_features(CitationPair("citing", "ghost", 0), corpus, tfidf)

    def test_self_similarity_is_one_with_in_vocab_term(self):
        rng = random.Random(3)
        words = ["alpha", "beta", "gamma", "delta"]
        docs = [" ".join(rng.choices(words, k=5)) for _ in range(6)]
        model = fit_tfidf(docs)
        for doc in docs:
            vec = vectorize(model, doc)
            assert cosine_similarity(vec, vec) == pytest.approx(1.0, abs=1e-12)


class TestFeatureMatrixOracle:
    def test_fixture_corpus_matches_oracle(self):
        papers = {p.id: p for p in all_papers()}
        corpus = make_corpus(*papers.values())
        pairs = [
            CitationPair(c, t, label)
            for c, t, label in PAIR_ROWS
            if papers[c].abstract and papers[t].abstract
        ]
        rows, _ = compute_feature_matrix(corpus, pairs)
        assert len(rows) == len(pairs)

        abstracts = [p.abstract for p in papers.values() if p.abstract]
        for pair, vec in rows:
            if pair.cited_id == TARGET_ID:
                assert vec.f1_direct_count == EXPECTED_TARGET_COUNTS[pair.citing_id]
            citing, cited = papers[pair.citing_id], papers[pair.cited_id]
            assert vec.f4_author_overlap == pytest.approx(
                oracle_author_jaccard(citing.authors, cited.authors)
            )
            want_f9 = cosine_similarity(
                oracle_tfidf_vector(abstracts, citing.abstract),
                oracle_tfidf_vector(abstracts, cited.abstract),
            )
            assert vec.f9_abstract_sim == pytest.approx(want_f9, abs=1e-12)
            assert 0.0 <= vec.f9_abstract_sim <= 1.0
            assert 0.0 <= vec.f4_author_overlap <= 1.0

    def test_reproducible_across_runs_and_threads(self):
        corpus = make_corpus(*all_papers())
        pairs = [CitationPair(c, t, label) for c, t, label in PAIR_ROWS]
        rows_a, _ = compute_feature_matrix(corpus, pairs, threads=1)
        rows_b, _ = compute_feature_matrix(corpus, pairs, threads=4)
        rows_c, _ = compute_feature_matrix(corpus, pairs, threads=1)
        assert rows_a == rows_b == rows_c

    def test_missing_record_collects_warning(self):
        corpus = make_corpus(*all_papers())
        pairs = [CitationPair("c01", "ghost", 0), CitationPair("c01", TARGET_ID, 1)]
        rows, warnings = compute_feature_matrix(corpus, pairs)
        assert len(rows) == 1
        assert any(w["type"] == "extraction-error" for w in warnings)

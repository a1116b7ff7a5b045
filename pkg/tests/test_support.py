import numpy as np
from hypothesis import given, settings, strategies as st

from review_insight.parallel import parallel_map
from review_insight.synthetic import generate_mglda_corpus, generate_restaurant_slice, greedy_topic_overlap


def square_plus(x, k):
    return x * x + k


@settings(max_examples=5, deadline=None)
@given(st.lists(st.integers(-100, 100), max_size=40), st.integers(1, 3))
def test_parallel_map_preserves_order(items, threads):
    assert parallel_map(square_plus, items, threads, 1) == [x * x + 1 for x in items]


def test_planted_corpus_shape():
    pc = generate_mglda_corpus(n_docs=5, sentences_per_doc=3, words_per_sentence=4, seed=1)
    assert len(pc.docs) == 5 and all(len(d) == 3 and all(len(s) == 4 for s in d) for d in pc.docs)
    assert all(0 <= w < pc.V for d in pc.docs for s in d for w in s)
    assert generate_mglda_corpus(n_docs=5, seed=1) == generate_mglda_corpus(n_docs=5, seed=1)


def test_greedy_overlap():
    truth = [[0, 1, 2], [3, 4, 5]]
    assert greedy_topic_overlap([[3, 4, 9], [0, 1, 2]], truth) == [1.0, 2 / 3]
    assert greedy_topic_overlap([[7]], truth) == [0.0, 0.0]


def test_restaurant_slice():
    ps = generate_restaurant_slice(n_restaurants=6, n_users=10, rep_reviews=5, casual_reviews=2, seed=3)
    assert len(ps.corpus.businesses) == 6 and set(ps.user_topic) == {f"u{i:03d}" for i in range(10)}
    assert all(1 <= r.stars <= 5 and r.stars == int(r.stars) for r in ps.corpus.reviews)
    pairs = [(r.user_id, r.business_id) for r in ps.corpus.reviews]
    assert len(pairs) == len(set(pairs))
    assert np.all((ps.quality >= 1.5) & (ps.quality <= 4.8))

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from review_insight.mglda import MgldaParams, TopicModel, estimate_phi, init_state, load_model, save_model, top_words, train
from review_insight.mglda import backend
from review_insight.mglda.model import GibbsState, flatten_corpus, log_joint, run_sweep
from review_insight.segment import assign_sentence_topic
from review_insight.synthetic import generate_mglda_corpus
from review_insight.textprep import build_vocabulary

SMALL = MgldaParams(k_glo=2, k_loc=3, iterations=20, seed=1)


def random_docs(seed, n_docs=10, V=30):
    rng = np.random.default_rng(seed)
    return [
        [list(map(int, rng.integers(0, V, size=int(rng.integers(1, 6))))) for _ in range(int(rng.integers(1, 5)))]
        for _ in range(n_docs)
    ]


# --- params -------------------------------------------------------------------

def test_default_params():
    p = MgldaParams()
    assert (p.k_glo, p.k_loc, p.window, p.iterations) == (40, 15, 2, 1000)
    assert all(getattr(p, n) == 0.1 for n in p.concentration_names())
    assert p.effective_burn_in == 500 and p.sample_lag == 25


@pytest.mark.parametrize("kw", [
    {"k_loc": 0}, {"window": 0}, {"iterations": 0}, {"gamma": 0.0}, {"beta_loc": -1.0},
    {"burn_in": 20, "iterations": 20}, {"seed": -1},
])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        MgldaParams(**kw)


def test_retained_sweeps():
    assert MgldaParams(iterations=100, sample_lag=25).retained_sweeps() == [75, 100]
    assert MgldaParams(iterations=10, sample_lag=25).retained_sweeps() == [10]
    assert MgldaParams(iterations=10, burn_in=0, sample_lag=5).retained_sweeps() == [5, 10]


# --- corpus and state ---------------------------------------------------------

def test_window_geometry():
    V, words, t_doc, t_sent, s_doc, s_win0, w_doc = flatten_corpus([[[0], [1], [2]], [[3]]], W=2)
    # 3 sentences -> 4 windows, 1 sentence -> 2 windows
    assert list(w_doc) == [0, 0, 0, 0, 1, 1]
    assert list(s_win0) == [0, 1, 2, 4]


def test_empty_sentences_skipped():
    _, words, *_ = flatten_corpus([[[], [1, 2], []]], W=2)
    assert list(words) == [1, 2]


@pytest.mark.parametrize("corpus", [[], [[[]]], [[[1]], [[], []]]])
def test_empty_inputs_rejected(corpus):
    with pytest.raises(ValueError):
        train(corpus, SMALL)


def test_token_out_of_range():
    with pytest.raises(ValueError):
        train([[[0, 5]]], SMALL, V=5)


def test_invariants_hold_after_each_sweep():
    seen = []
    train(random_docs(0), SMALL, V=30, callback=lambda it, s: (s.check_invariants(), seen.append(it)))
    assert seen == list(range(1, 21))


def test_invariant_check_detects_corruption():
    state = init_state(random_docs(0), SMALL, 30, np.random.default_rng(0))
    state.check_invariants()
    state.n_zw_loc[0, 0] += 1
    with pytest.raises(AssertionError):
        state.check_invariants()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_window_validity(seed):
    params = MgldaParams(k_glo=2, k_loc=2, window=3, iterations=3, seed=seed)
    def check(it, s):
        s.check_invariants()
        assert ((s.tok_j >= 0) & (s.tok_j < 3)).all()
        assert (s.win_doc[s.tok_window] == s.tok_doc).all()
    train(random_docs(seed % 1000, n_docs=4), params, V=30, callback=check)


# --- sampler correctness ------------------------------------------------------

def exact_marginals(docs, params, V):
    """Posterior over each token's (j, r, z) by enumerating every joint state."""
    state = init_state(docs, params, V, np.random.default_rng(0))
    Kg, Kl, W = params.k_glo, params.k_loc, params.window
    labels = [(j, r, z) for j in range(W) for r, K in ((0, Kg), (1, Kl)) for z in range(K)]
    n = state.n_tokens
    logp, configs = [], []
    for combo in itertools.product(range(len(labels)), repeat=n):
        for t, c in enumerate(combo):
            state.tok_j[t], state.tok_r[t], state.tok_z[t] = labels[c]
        for name, table in state.recount().items():
            getattr(state, name)[...] = table
        logp.append(log_joint(state, params))
        configs.append(combo)
    logp = np.array(logp)
    p = np.exp(logp - logp.max())
    p /= p.sum()
    marg = np.zeros((n, len(labels)))
    for prob, combo in zip(p, configs):
        for t, c in enumerate(combo):
            marg[t, c] += prob
    return marg, labels


@pytest.mark.parametrize("which", ["python", "cython"])
def test_sampler_matches_exact_posterior(which):
    if which == "cython" and backend.compiled_sweep is None:
        pytest.skip("extension not built")
    docs = [[[0, 1], [1]], [[2]]]
    params = MgldaParams(k_glo=1, k_loc=2, window=2, alpha_glo=0.5, alpha_loc=0.3, alpha_mix_glo=0.7,
                         alpha_mix_loc=0.4, beta_glo=0.2, beta_loc=0.6, gamma=0.9)
    exact, labels = exact_marginals(docs, params, V=3)
    rng = np.random.default_rng(1)
    state = init_state(docs, params, 3, rng)
    sweep = backend.get_sweep(which)
    n_sweeps = 60000 if which == "cython" else 15000
    counts = np.zeros_like(exact)
    index = {lab: i for i, lab in enumerate(labels)}
    for it in range(n_sweeps):
        run_sweep(state, params, rng.random(state.n_tokens), sweep)
        for t in range(state.n_tokens):
            counts[t, index[(state.tok_j[t], state.tok_r[t], state.tok_z[t])]] += 1
    empirical = counts / n_sweeps
    tol = 0.01 if which == "cython" else 0.02
    assert np.abs(empirical - exact).max() < tol


def test_backends_bit_identical():
    if backend.compiled_sweep is None:
        pytest.skip("extension not built")
    docs = random_docs(3, n_docs=20)
    a = train(docs, SMALL, V=30, backend="python")
    b = train(docs, SMALL, V=30, backend="cython")
    assert np.array_equal(a.phi_loc, b.phi_loc) and np.array_equal(a.phi_glo, b.phi_glo)


def test_deterministic_given_seed():
    docs = random_docs(4)
    states = []
    for _ in range(2):
        run = []
        train(docs, SMALL, V=30, callback=lambda it, s: run.append(s.tok_z.copy()) if it == 20 else None)
        states.append(run[0])
    assert np.array_equal(*states)
    a, b = train(docs, SMALL, V=30), train(docs, SMALL, V=30)
    assert np.array_equal(a.phi_loc, b.phi_loc)
    c = train(docs, MgldaParams(**{**SMALL.__dict__, "seed": 2}), V=30)
    assert not np.array_equal(a.phi_loc, c.phi_loc)


def test_multiple_chains_pick_best_log_joint():
    docs = random_docs(5)
    params = MgldaParams(k_glo=2, k_loc=3, iterations=10, n_chains=3, seed=7)
    finals = []
    train(docs, params, V=30, callback=lambda it, s: finals.append(log_joint(s, params)) if it == 10 else None)
    assert len(finals) == 3
    best = int(np.argmax(finals))
    child = np.random.SeedSequence(7).spawn(3)[best]
    from review_insight.mglda.model import run_chain
    _, _, phi_loc, _ = run_chain(docs, params, 30, child)
    assert np.array_equal(train(docs, params, V=30).phi_loc, phi_loc)


def test_k_loc_one_assigns_everything_to_topic_zero():
    docs = random_docs(6)
    model = train(docs, MgldaParams(k_glo=2, k_loc=1, iterations=5), V=30)
    assert all(assign_sentence_topic(s, model) == 0 for d in docs for s in d)


# --- phi ------------------------------------------------------------------------

def state_with_counts(n_zw_loc, n_zw_glo=None):
    state = init_state([[[0]]], MgldaParams(k_glo=1, k_loc=1), 1, np.random.default_rng(0))
    n_zw_loc = np.asarray(n_zw_loc)
    n_zw_glo = np.zeros((1, n_zw_loc.shape[1]), np.int64) if n_zw_glo is None else np.asarray(n_zw_glo)
    state.V = n_zw_loc.shape[1]
    state.n_zw_loc, state.n_z_loc = n_zw_loc, n_zw_loc.sum(1)
    state.n_zw_glo, state.n_z_glo = n_zw_glo, n_zw_glo.sum(1)
    return state


def test_phi_zero_counts_uniform():
    m = estimate_phi(state_with_counts(np.zeros((2, 10), np.int64)), MgldaParams(beta_loc=0.1))
    assert np.allclose(m.phi_loc, 0.1)


def test_phi_formula():
    m = estimate_phi(state_with_counts([[3, 1]]), MgldaParams(beta_loc=0.1))
    assert np.allclose(m.phi_loc, [[3.1 / 4.2, 1.1 / 4.2]], rtol=0, atol=1e-15)


@given(st.lists(st.lists(st.integers(0, 50), min_size=4, max_size=4), min_size=1, max_size=5))
def test_phi_rows_simplex(rows):
    m = estimate_phi(state_with_counts(rows), MgldaParams())
    assert np.allclose(m.phi_loc.sum(1), 1.0, atol=1e-9) and (m.phi_loc > 0).all()


def test_trained_phi_simplex_and_readonly():
    m = train(random_docs(7), SMALL, V=30)
    for phi in (m.phi_loc, m.phi_glo):
        assert np.abs(phi.sum(1) - 1).max() < 1e-9 and (phi > 0).all()
        with pytest.raises(ValueError):
            phi[0, 0] = 1.0


def fixed_model(phi_loc):
    phi_loc = np.asarray(phi_loc, dtype=float)
    return TopicModel(np.full((1, phi_loc.shape[1]), 1 / phi_loc.shape[1]), phi_loc, MgldaParams(k_glo=1, k_loc=len(phi_loc)), None, 1)


def test_top_words_ties_and_order():
    assert top_words(fixed_model([[0.25] * 4]), "loc", 3) == [[0, 1, 2]]
    assert top_words(fixed_model([[0.5, 0.3, 0.2]]), "loc", 2) == [[0, 1]]
    with pytest.raises(ValueError):
        top_words(fixed_model([[0.5, 0.5]]), "loc", 3)


def test_top_words_cover_planted_words():
    corpus = generate_mglda_corpus(k_glo=2, k_loc=3, seed=0)
    model = train(corpus.docs, MgldaParams(k_glo=2, k_loc=3, iterations=200, n_chains=4), V=corpus.V)
    tops = top_words(model, "loc", 10)
    # each topic's most frequent planted word shows up in some learned topic's top words
    for support in corpus.local_support:
        counts = {w: 0 for w in support}
        for d in corpus.docs:
            for s in d:
                for w in s:
                    if w in counts:
                        counts[w] += 1
        top = max(counts, key=counts.get)
        assert any(top in t for t in tops)


# --- persistence ----------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    vocab = build_vocabulary([[f"w{i}" for i in range(30)]], 1)
    m = train(random_docs(8), SMALL, vocabulary=vocab)
    save_model(m, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin", vocabulary=vocab)
    assert np.array_equal(back.phi_loc, m.phi_loc) and np.array_equal(back.phi_glo, m.phi_glo)
    assert back.params == m.params and back.n_samples == m.n_samples
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:8] == b"RIMGLDA\x00"
    # phi stored row-major little-endian after the header
    tail = np.frombuffer(raw[-m.phi_loc.size * 8:], dtype="<f8")
    assert np.array_equal(tail, m.phi_loc.ravel())


def test_load_rejects_bad_files(tmp_path):
    vocab = build_vocabulary([[f"w{i}" for i in range(30)]], 1)
    m = train(random_docs(8), SMALL, vocabulary=vocab)
    save_model(m, tmp_path / "m.bin")
    other = build_vocabulary([[f"x{i}" for i in range(30)]], 1)
    with pytest.raises(ValueError):
        load_model(tmp_path / "m.bin", vocabulary=other)
    raw = bytearray((tmp_path / "m.bin").read_bytes())
    (tmp_path / "bad.bin").write_bytes(b"NOTMODEL" + raw[8:])
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.bin")
    raw[8] = 99  # format version
    (tmp_path / "v.bin").write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        load_model(tmp_path / "v.bin")
    (tmp_path / "short.bin").write_bytes(bytes(raw[:-8]))
    with pytest.raises(ValueError):
        load_model(tmp_path / "short.bin")

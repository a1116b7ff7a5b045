"""Multi-grain LDA trained by collapsed Gibbs sampling.

Each token carries a latent triple (window, granularity, topic). A document
with S sentences has S + W - 1 sliding windows; sentence s (0-based) lies in
windows s .. s + W - 1, so every sentence sees exactly W windows. Global
topics are shared per document, local topics per window.

Randomness comes from numpy's PCG64. Chain c draws from child c of
``SeedSequence(seed).spawn(n_chains)``: one integer per token at
initialization, then one uniform per token per sweep, in corpus order. With
several chains the one with the highest final collapsed log joint is kept;
chains are never averaged because topic labels do not align across them.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import backend as _backend

GLO, LOC = 0, 1


@dataclass(frozen=True)
class MgldaParams:
    k_glo: int = 40
    k_loc: int = 15
    window: int = 2
    alpha_glo: float = 0.1
    alpha_loc: float = 0.1
    alpha_mix_glo: float = 0.1
    alpha_mix_loc: float = 0.1
    beta_glo: float = 0.1
    beta_loc: float = 0.1
    gamma: float = 0.1
    iterations: int = 1000
    seed: int = 0
    burn_in: int | None = None
    sample_lag: int = 25
    n_chains: int = 1

    def __post_init__(self):
        for name in ("k_glo", "k_loc", "window", "iterations", "sample_lag", "n_chains"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in self.concentration_names():
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.burn_in is not None and not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")

    @staticmethod
    def concentration_names() -> tuple[str, ...]:
        return (
            "alpha_glo", "alpha_loc", "alpha_mix_glo", "alpha_mix_loc",
            "beta_glo", "beta_loc", "gamma",
        )

    @property
    def effective_burn_in(self) -> int:
        return self.iterations // 2 if self.burn_in is None else self.burn_in

    def retained_sweeps(self) -> list[int]:
        """1-based sweep numbers whose phi estimate is averaged into the model.

        Every ``sample_lag``-th sweep after burn-in; the final sweep alone if
        the lag overshoots the chain.
        """
        b = self.effective_burn_in
        kept = list(range(b + self.sample_lag, self.iterations + 1, self.sample_lag))
        return kept or [self.iterations]


@dataclass
class GibbsState:
    """Token assignments and count tables for one chain.

    Layout is flat across documents: ``tok_sent`` indexes sentences corpus
    wide and ``sent_win0[s]`` is the global index of sentence s's first
    window. ``tok_j`` stores the window as an offset 0..W-1 from there.
    """

    W: int
    V: int
    tok_word: np.ndarray
    tok_doc: np.ndarray
    tok_sent: np.ndarray
    sent_doc: np.ndarray
    sent_win0: np.ndarray
    win_doc: np.ndarray
    tok_j: np.ndarray
    tok_r: np.ndarray
    tok_z: np.ndarray
    n_sv: np.ndarray
    n_s: np.ndarray
    n_vr: np.ndarray
    n_v: np.ndarray
    n_dz_glo: np.ndarray
    n_d_glo: np.ndarray
    n_vz_loc: np.ndarray
    n_zw_glo: np.ndarray
    n_zw_loc: np.ndarray
    n_z_glo: np.ndarray
    n_z_loc: np.ndarray

    @property
    def n_tokens(self) -> int:
        return int(self.tok_word.shape[0])

    @property
    def tok_window(self) -> np.ndarray:
        return self.sent_win0[self.tok_sent] + self.tok_j

    def recount(self) -> dict[str, np.ndarray]:
        """Count tables rebuilt from scratch from the token assignments."""
        S, W = self.n_sv.shape
        NW = self.n_v.shape[0]
        D, Kg = self.n_dz_glo.shape
        Kl = self.n_z_loc.shape[0]
        V = self.V
        v = self.tok_window
        glo = self.tok_r == GLO
        loc = ~glo
        out = {
            "n_sv": np.zeros((S, W), np.int64),
            "n_vr": np.zeros((NW, 2), np.int64),
            "n_dz_glo": np.zeros((D, Kg), np.int64),
            "n_vz_loc": np.zeros((NW, Kl), np.int64),
            "n_zw_glo": np.zeros((Kg, V), np.int64),
            "n_zw_loc": np.zeros((Kl, V), np.int64),
        }
        np.add.at(out["n_sv"], (self.tok_sent, self.tok_j), 1)
        np.add.at(out["n_vr"], (v, self.tok_r), 1)
        np.add.at(out["n_dz_glo"], (self.tok_doc[glo], self.tok_z[glo]), 1)
        np.add.at(out["n_vz_loc"], (v[loc], self.tok_z[loc]), 1)
        np.add.at(out["n_zw_glo"], (self.tok_z[glo], self.tok_word[glo]), 1)
        np.add.at(out["n_zw_loc"], (self.tok_z[loc], self.tok_word[loc]), 1)
        out["n_s"] = out["n_sv"].sum(axis=1)
        out["n_v"] = out["n_vr"].sum(axis=1)
        out["n_d_glo"] = out["n_dz_glo"].sum(axis=1)
        out["n_z_glo"] = out["n_zw_glo"].sum(axis=1)
        out["n_z_loc"] = out["n_zw_loc"].sum(axis=1)
        return out

    def check_invariants(self) -> None:
        """Raise AssertionError if any count table disagrees with the assignments."""
        recounted = self.recount()
        tables = {k: getattr(self, k) for k in recounted}
        for name, arr in tables.items():
            if (arr < 0).any():
                raise AssertionError(f"{name} has negative counts")
        for name, expected in recounted.items():
            if not np.array_equal(tables[name], expected):
                raise AssertionError(f"{name} disagrees with token assignments")
        if not np.array_equal(self.n_zw_loc.sum(axis=1), self.n_z_loc):
            raise AssertionError("local topic-word marginals disagree with topic totals")
        if not np.array_equal(self.n_zw_glo.sum(axis=1), self.n_z_glo):
            raise AssertionError("global topic-word marginals disagree with topic totals")
        if int(self.n_z_glo.sum() + self.n_z_loc.sum()) != self.n_tokens:
            raise AssertionError("total assignments differ from token count")
        if ((self.tok_j < 0) | (self.tok_j >= self.W)).any():
            raise AssertionError("window offset outside the sentence's windows")
        v = self.tok_window
        if not np.array_equal(self.win_doc[v], self.tok_doc):
            raise AssertionError("token assigned to a window of another document")


@dataclass(frozen=True)
class TopicModel:
    phi_glo: np.ndarray
    phi_loc: np.ndarray
    params: MgldaParams
    vocabulary: object | None = field(default=None, compare=False)
    n_samples: int = 1

    @property
    def V(self) -> int:
        return int(self.phi_loc.shape[1])

    @property
    def k_loc(self) -> int:
        return int(self.phi_loc.shape[0])


def _doc_sentences(doc) -> list[Sequence[int]]:
    sents = doc.sentences if hasattr(doc, "sentences") else doc
    return [getattr(s, "tokens", s) for s in sents]


def flatten_corpus(corpus, W: int, V: int | None = None):
    """Flatten documents (sequences of sentences of word ids) into index arrays.

    Sentences with no tokens are skipped; they cannot influence the chain.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    words, t_doc, t_sent, s_doc, s_win0, w_doc = [], [], [], [], [], []
    n_sent = n_win = 0
    for d, doc in enumerate(corpus):
        sents = [list(s) for s in _doc_sentences(doc) if len(s) > 0]
        if not sents:
            raise ValueError(f"document {d} has no tokens")
        for local_s, toks in enumerate(sents):
            s_doc.append(d)
            s_win0.append(n_win + local_s)
            words.extend(toks)
            t_doc.extend([d] * len(toks))
            t_sent.extend([n_sent] * len(toks))
            n_sent += 1
        nw = len(sents) + W - 1
        w_doc.extend([d] * nw)
        n_win += nw
    word_arr = np.asarray(words, dtype=np.int64)
    if (word_arr < 0).any():
        raise ValueError("negative token id")
    if V is None:
        V = int(word_arr.max()) + 1
    elif word_arr.max() >= V:
        raise ValueError(f"token id {int(word_arr.max())} >= vocabulary size {V}")
    arr = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return V, word_arr, arr(t_doc), arr(t_sent), arr(s_doc), arr(s_win0), arr(w_doc)


def init_state(corpus, params: MgldaParams, V: int | None, rng: np.random.Generator) -> GibbsState:
    W, Kg, Kl = params.window, params.k_glo, params.k_loc
    V, tok_word, tok_doc, tok_sent, sent_doc, sent_win0, win_doc = flatten_corpus(corpus, W, V)
    draw = rng.integers(0, W * (Kg + Kl), size=tok_word.shape[0])
    tok_j, rem = np.divmod(draw, Kg + Kl)
    tok_r = (rem >= Kg).astype(np.int64)
    tok_z = np.where(tok_r == GLO, rem, rem - Kg).astype(np.int64)
    S, NW, D = sent_doc.shape[0], win_doc.shape[0], int(tok_doc.max()) + 1
    zeros = dict(
        n_sv=np.zeros((S, W), np.int64), n_s=np.zeros(S, np.int64),
        n_vr=np.zeros((NW, 2), np.int64), n_v=np.zeros(NW, np.int64),
        n_dz_glo=np.zeros((D, Kg), np.int64), n_d_glo=np.zeros(D, np.int64),
        n_vz_loc=np.zeros((NW, Kl), np.int64),
        n_zw_glo=np.zeros((Kg, V), np.int64), n_zw_loc=np.zeros((Kl, V), np.int64),
        n_z_glo=np.zeros(Kg, np.int64), n_z_loc=np.zeros(Kl, np.int64),
    )
    state = GibbsState(
        W, V, tok_word, tok_doc, tok_sent, sent_doc, sent_win0, win_doc,
        tok_j.astype(np.int64), tok_r, tok_z, **zeros,
    )
    for name, table in state.recount().items():
        getattr(state, name)[...] = table
    return state


def run_sweep(state: GibbsState, params: MgldaParams, uniforms: np.ndarray, sweep=None) -> None:
    sweep = sweep or _backend.sweep
    sweep(
        uniforms, state.tok_word, state.tok_doc, state.tok_sent, state.sent_win0,
        state.tok_j, state.tok_r, state.tok_z,
        state.n_sv, state.n_s, state.n_vr, state.n_v, state.n_dz_glo, state.n_d_glo,
        state.n_vz_loc, state.n_zw_glo, state.n_zw_loc, state.n_z_glo, state.n_z_loc,
        params.window, state.V,
        params.alpha_glo, params.alpha_loc, params.alpha_mix_glo, params.alpha_mix_loc,
        params.beta_glo, params.beta_loc, params.gamma,
    )


def _smoothed(n_zw: np.ndarray, n_z: np.ndarray, beta: float) -> np.ndarray:
    V = n_zw.shape[1]
    return (n_zw + beta) / (n_z[:, None] + V * beta)


def estimate_phi(state: GibbsState, params: MgldaParams, V: int | None = None, vocabulary=None) -> TopicModel:
    """Point estimate of both word distributions from a single state."""
    if V is not None and V != state.V:
        raise ValueError("V does not match the state's vocabulary size")
    return TopicModel(
        _smoothed(state.n_zw_glo, state.n_z_glo, params.beta_glo),
        _smoothed(state.n_zw_loc, state.n_z_loc, params.beta_loc),
        params, vocabulary, 1,
    )


def _dirmult(counts: np.ndarray, alpha) -> float:
    """Sum over rows of the log Dirichlet-multinomial marginal (no multinomial coefficient)."""
    counts = np.asarray(counts, dtype=np.float64)
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), counts.shape[-1:])
    a_sum = a.sum()
    return float(
        (gammaln(a_sum) - gammaln(a_sum + counts.sum(axis=1))).sum()
        + (gammaln(counts + a) - gammaln(a)).sum()
    )


def log_joint(state: GibbsState, params: MgldaParams) -> float:
    """Collapsed log p(words, windows, granularities, topics), up to a constant."""
    return (
        _dirmult(state.n_sv, params.gamma)
        + _dirmult(state.n_vr, [params.alpha_mix_glo, params.alpha_mix_loc])
        + _dirmult(state.n_dz_glo, params.alpha_glo)
        + _dirmult(state.n_vz_loc, params.alpha_loc)
        + _dirmult(state.n_zw_glo, params.beta_glo)
        + _dirmult(state.n_zw_loc, params.beta_loc)
    )


def run_chain(
    corpus, params: MgldaParams, V: int | None, seed_seq: np.random.SeedSequence,
    sweep=None, callback: Callable[[int, GibbsState], None] | None = None,
) -> tuple[GibbsState, np.ndarray, np.ndarray, int]:
    """One chain; returns the final state and phi averaged over retained sweeps."""
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    state = init_state(corpus, params, V, rng)
    sweep = sweep or _backend.sweep
    retained = set(params.retained_sweeps())
    acc_glo = np.zeros(state.n_zw_glo.shape)
    acc_loc = np.zeros(state.n_zw_loc.shape)
    for it in range(1, params.iterations + 1):
        run_sweep(state, params, rng.random(state.n_tokens), sweep)
        if callback is not None:
            callback(it, state)
        if it in retained:
            acc_glo += _smoothed(state.n_zw_glo, state.n_z_glo, params.beta_glo)
            acc_loc += _smoothed(state.n_zw_loc, state.n_z_loc, params.beta_loc)
    n = len(retained)
    return state, acc_glo / n, acc_loc / n, n


def train(
    corpus,
    params: MgldaParams,
    vocabulary=None,
    V: int | None = None,
    backend: str | None = None,
    callback: Callable[[int, GibbsState], None] | None = None,
) -> TopicModel:
    """Run ``params.iterations`` sweeps and average phi over the retained sweeps.

    ``corpus`` is a sequence of TokenizedReview or of sentence lists of word
    ids. ``callback(sweep_number, state)`` runs after every sweep of every
    chain.
    """
    if V is None and vocabulary is not None:
        V = len(vocabulary)
    sweep = _backend.get_sweep(backend)
    best = None
    for child in np.random.SeedSequence(params.seed).spawn(params.n_chains):
        state, phi_glo, phi_loc, n = run_chain(corpus, params, V, child, sweep, callback)
        score = log_joint(state, params) if params.n_chains > 1 else 0.0
        if best is None or score > best[0]:
            best = (score, phi_glo, phi_loc, n)
    _, phi_glo, phi_loc, n = best
    phi_glo.setflags(write=False)
    phi_loc.setflags(write=False)
    return TopicModel(phi_glo, phi_loc, params, vocabulary, n)


def top_words(model: TopicModel, scope: str = "loc", k: int = 10) -> list[list[int]]:
    """Per topic, the ``k`` most probable word ids (ties by lower id)."""
    phi = {"loc": model.phi_loc, "glo": model.phi_glo}[scope]
    if k > phi.shape[1]:
        raise ValueError("k exceeds vocabulary size")
    return [np.argsort(-row, kind="stable")[:k].tolist() for row in phi]


# --- persistence -----------------------------------------------------------

MAGIC = b"RIMGLDA\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sI4I7d4IQ?I32s")


def save_model(model: TopicModel, path: str | Path, vocab_digest: bytes | None = None) -> None:
    """Binary layout, little-endian: magic, version, K_glo, K_loc, W, V,
    seven concentrations, iterations, burn-in, sample lag, chain count, seed, burn-in-set
    flag, number of averaged samples, sha256 of the vocabulary, then phi_glo
    and phi_loc as row-major float64."""
    p = model.params
    if vocab_digest is None:
        vocab_digest = model.vocabulary.digest() if model.vocabulary is not None else bytes(32)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, p.k_glo, p.k_loc, p.window, model.V,
        *(getattr(p, n) for n in p.concentration_names()),
        p.iterations, p.effective_burn_in, p.sample_lag, p.n_chains, p.seed, p.burn_in is not None,
        model.n_samples, vocab_digest,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(model.phi_glo, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.phi_loc, dtype="<f8").tobytes())


def load_model(path: str | Path, vocabulary=None) -> TopicModel:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:8] != MAGIC:
        raise ValueError(f"{path}: not a topic model file")
    fields = _HEADER.unpack_from(data)
    _, version, k_glo, k_loc, window, V = fields[:6]
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    conc = dict(zip(MgldaParams.concentration_names(), fields[6:13]))
    iterations, burn_in, sample_lag, n_chains, seed, burn_set, n_samples, digest = fields[13:]
    if vocabulary is not None:
        if len(vocabulary) != V or vocabulary.digest() != digest:
            raise ValueError(f"{path}: vocabulary does not match the one the model was trained on")
    params = MgldaParams(
        k_glo=k_glo, k_loc=k_loc, window=window, iterations=iterations, seed=seed,
        burn_in=burn_in if burn_set else None, sample_lag=sample_lag, n_chains=n_chains, **conc,
    )
    off = _HEADER.size
    n_glo, n_loc = k_glo * V, k_loc * V
    if len(data) != off + 8 * (n_glo + n_loc):
        raise ValueError(f"{path}: truncated or oversized payload")
    phi_glo = np.frombuffer(data, "<f8", n_glo, off).reshape(k_glo, V).astype(np.float64)
    phi_loc = np.frombuffer(data, "<f8", n_loc, off + 8 * n_glo).reshape(k_loc, V).astype(np.float64)
    phi_glo.setflags(write=False)
    phi_loc.setflags(write=False)
    return TopicModel(phi_glo, phi_loc, params, vocabulary, n_samples)


def write_top_words(model: TopicModel, vocabulary, path: str | Path, k: int = 10) -> None:
    lines = ["scope\ttopic\trank\ttoken\tprobability"]
    for scope, phi in (("loc", model.phi_loc), ("glo", model.phi_glo)):
        for t, ids in enumerate(top_words(model, scope, min(k, model.V))):
            for rank, w in enumerate(ids):
                lines.append(f"{scope}\t{t}\t{rank}\t{vocabulary.id_to_token[w]}\t{phi[t, w]!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def params_dict(params: MgldaParams) -> dict:
    return asdict(params)


def phi_digest(model: TopicModel) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(model.phi_glo).tobytes())
    h.update(np.ascontiguousarray(model.phi_loc).tobytes())
    return h.hexdigest()

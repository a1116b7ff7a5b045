"""Synthetic corpora with known structure, used for tests and the bundled fixture."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Business, CorpusSlice, RawReview


@dataclass(frozen=True)
class PlantedCorpus:
    docs: list[list[list[int]]]
    V: int
    local_support: list[list[int]]
    global_support: list[list[int]]


def generate_mglda_corpus(
    n_docs: int = 200,
    sentences_per_doc: int = 6,
    words_per_sentence: int = 8,
    k_glo: int = 2,
    k_loc: int = 3,
    words_per_topic: int = 10,
    window: int = 2,
    alpha_glo: float = 0.1,
    alpha_loc: float = 0.1,
    mix: tuple[float, float] = (1.0, 1.0),
    gamma: float = 0.1,
    seed: int = 0,
) -> PlantedCorpus:
    """Sample documents from the multi-grain generative process.

    Topics have disjoint supports of ``words_per_topic`` ids: local topics
    first, then global ones. ``mix`` are the Beta parameters for the
    global/local choice in each window.
    """
    rng = np.random.default_rng(seed)
    n_topics = k_loc + k_glo
    V = n_topics * words_per_topic
    supports = [list(range(t * words_per_topic, (t + 1) * words_per_topic)) for t in range(n_topics)]
    phi = np.zeros((n_topics, V))
    for t, sup in enumerate(supports):
        phi[t, sup] = rng.dirichlet(np.ones(words_per_topic))
    phi_loc, phi_glo = phi[:k_loc], phi[k_loc:]

    docs = []
    for _ in range(n_docs):
        S = sentences_per_doc
        theta_glo = rng.dirichlet(np.full(k_glo, alpha_glo))
        n_win = S + window - 1
        theta_loc = rng.dirichlet(np.full(k_loc, alpha_loc), size=n_win)
        pi_glo = rng.beta(mix[0], mix[1], size=n_win)
        doc = []
        for s in range(S):
            psi = rng.dirichlet(np.full(window, gamma))
            sent = []
            for _ in range(words_per_sentence):
                v = s + rng.choice(window, p=psi)
                if rng.random() < pi_glo[v]:
                    z = rng.choice(k_glo, p=theta_glo)
                    w = rng.choice(V, p=phi_glo[z])
                else:
                    z = rng.choice(k_loc, p=theta_loc[v])
                    w = rng.choice(V, p=phi_loc[z])
                sent.append(int(w))
            doc.append(sent)
        docs.append(doc)
    return PlantedCorpus(docs, V, supports[:k_loc], supports[k_loc:])


def greedy_topic_overlap(learned_top: list[list[int]], truth: list[list[int]]) -> list[float]:
    """Match planted topics to learned ones greedily by top-word overlap.

    Returns, per planted topic, |learned top ∩ planted support| / |support|.
    """
    overlap = np.array(
        [[len(set(lt) & set(tr)) / len(tr) for lt in learned_top] for tr in truth]
    )
    result = [0.0] * len(truth)
    free_t, free_l = set(range(len(truth))), set(range(len(learned_top)))
    while free_t and free_l:
        t, lt = max(
            ((t, lt) for t in free_t for lt in free_l), key=lambda p: (overlap[p], -p[0], -p[1])
        )
        result[t] = float(overlap[t, lt])
        free_t.discard(t)
        free_l.discard(lt)
    return result


# --- planted restaurant slice ----------------------------------------------

# Aspect vocabularies chosen to survive tokenization unchanged.
ASPECT_WORDS = {
    "food": ["pizza", "pasta", "sauce", "cheese", "crust", "bread", "salad", "garlic", "tomato", "lasagna"],
    "service": ["service", "waiter", "server", "staff", "host", "manager", "waitress", "busboy", "refill", "bartender"],
    "ambience": ["decor", "music", "lighting", "patio", "interior", "atmosphere", "ambience", "booth", "candle", "view"],
    "value": ["price", "portion", "bill", "cost", "deal", "coupon", "budget", "value", "dollar", "tip"],
}

POSITIVE = ["great", "excellent", "amazing", "wonderful", "fantastic", "delicious", "lovely", "perfect"]
NEGATIVE = ["terrible", "awful", "horrible", "bad", "disappointing", "poor", "mediocre", "gross"]
NEUTRAL = ["restaurant", "place", "visit", "night", "table", "evening", "friend", "dinner"]

# Restaurant-wide styles mentioned throughout a review.
STYLE_WORDS = {
    "family": ["kids", "birthday", "family", "weekend", "grandma", "stroller"],
    "downtown": ["downtown", "business", "lunch", "parking", "office", "meeting"],
}

TEMPLATES = [
    "The {a}, {b} and {c} were {s} for {g}.",
    "For {g} the {a} was {s}, and so were the {b} and {c}.",
    "{s} {a}, {b} and {c}, {g}.",
    "Our {a} and {b} and {c} were {s} at {g}.",
]


@dataclass(frozen=True)
class PlantedSlice:
    corpus: CorpusSlice
    quality: np.ndarray
    user_topic: dict[str, int]
    aspects: tuple[str, ...]


def _stars(x: float) -> float:
    return float(np.clip(np.rint(x), 1, 5))


def _review_text(rng, aspects, quality_row, n_sentences, style) -> str:
    sents = []
    for _ in range(n_sentences):
        k = int(rng.integers(len(aspects)))
        words = ASPECT_WORDS[aspects[k]]
        a, b, c = rng.choice(words, size=3, replace=False)
        # sentiment tracks the restaurant's quality on this aspect
        pos_prob = (quality_row[k] - 1.0) / 4.0
        lex = POSITIVE if rng.random() < pos_prob else NEGATIVE
        tpl = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        sents.append(tpl.format(a=a, b=b, c=c, s=rng.choice(lex), g=rng.choice(STYLE_WORDS[style])))
    if rng.random() < 0.5:
        sents.append(f"It was a {rng.choice(NEUTRAL)} {rng.choice(NEUTRAL)}.")
    return " ".join(sents)


def generate_restaurant_slice(
    n_restaurants: int = 30,
    n_users: int = 80,
    n_aspects: int = 3,
    rep_fraction: float = 0.2,
    rep_reviews: int = 28,
    casual_reviews: int = 4,
    noise: float = 0.15,
    rep_bias: float = -0.8,
    weights: tuple[float, ...] | None = None,
    category: str = "Italian",
    seed: int = 0,
) -> PlantedSlice:
    """Restaurants with per-aspect quality; every user rates by one aspect.

    Each user's stars are that aspect's quality plus noise. Heavy reviewers
    (the first ``rep_fraction`` of users) spread evenly over the aspects and
    are harsher by ``rep_bias``; casual reviewers pick their aspect with
    probabilities ``weights`` and write fewer reviews each. Sentence
    sentiment in every review follows each aspect's quality.
    """
    rng = np.random.default_rng(seed)
    aspects = tuple(list(ASPECT_WORDS)[:n_aspects])
    if weights is None:
        weights = np.linspace(2.0, 1.0, n_aspects)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    quality = rng.uniform(1.5, 4.8, size=(n_restaurants, n_aspects))
    styles = [list(STYLE_WORDS)[int(i)] for i in rng.integers(len(STYLE_WORDS), size=n_restaurants)]
    bids = [f"b{i:03d}" for i in range(n_restaurants)]
    businesses = {
        b: Business(b, (category, "Restaurants"), 0.0) for b in bids
    }
    n_reps = int(round(n_users * rep_fraction))
    reviews: list[RawReview] = []
    user_topic: dict[str, int] = {}
    rid = 0
    for u in range(n_users):
        uid = f"u{u:03d}"
        is_rep = u < n_reps
        n_rev = rep_reviews if is_rep else casual_reviews
        topic = u % n_aspects if is_rep else int(rng.choice(n_aspects, p=w))
        user_topic[uid] = topic
        chosen = rng.choice(n_restaurants, size=min(n_rev, n_restaurants), replace=False)
        for r in sorted(chosen):
            q = quality[r]
            score = q[topic] + (rep_bias if is_rep else 0.0) + rng.normal(0, noise)
            text = _review_text(rng, aspects, q, int(rng.integers(3, 6)), styles[r])
            reviews.append(RawReview(f"r{rid:05d}", uid, bids[r], _stars(score), text))
            rid += 1
    return PlantedSlice(CorpusSlice(category, tuple(reviews), businesses), quality, user_topic, aspects)


def write_yelp_dump(corpus: CorpusSlice, reviews_path: str | Path, businesses_path: str | Path) -> None:
    """Write a slice back out as Yelp-style review and business JSON lines."""
    with open(reviews_path, "w", encoding="utf-8") as fh:
        for r in corpus.reviews:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    with open(businesses_path, "w", encoding="utf-8") as fh:
        for bid in sorted(corpus.businesses):
            b = corpus.businesses[bid]
            fh.write(json.dumps({"business_id": bid, "categories": list(b.categories), "stars": b.avg_stars}) + "\n")

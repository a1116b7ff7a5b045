"""Sentence splitting, token normalization and vocabulary construction."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .ingest import RawReview

ABBREVIATIONS = frozenset({"mr", "mrs", "dr", "st", "vs", "etc"})

_TERMINAL = re.compile(r"[.!?]+(?=\s|$)")
_LAST_WORD = re.compile(r"(\w+)$")

# Irregular forms and words the suffix rules would mangle.
EXCEPTIONS = {
    "was": "was", "has": "has", "his": "his", "is": "is", "its": "its", "this": "this",
    "gas": "gas", "bus": "bus", "yes": "yes", "always": "always", "perhaps": "perhaps",
    "menus": "menu", "children": "child", "men": "man", "women": "woman", "feet": "foot",
    "teeth": "tooth", "pies": "pie", "ties": "tie", "lies": "lie", "shoes": "shoe",
    "cookies": "cookie", "movies": "movie", "calories": "calorie", "fried": "fry",
    "nothing": "nothing", "something": "something", "anything": "anything",
    "everything": "everything", "morning": "morning", "evening": "evening",
    "pudding": "pudding", "stuffing": "stuffing", "seasoning": "seasoning",
    "frosting": "frosting", "filling": "filling", "topping": "topping", "toppings": "topping",
    "dressing": "dressing", "ceiling": "ceiling", "building": "building",
    "parking": "parking", "seating": "seating", "wedding": "wedding", "speed": "speed",
    "during": "during", "bring": "bring", "spring": "spring", "king": "king",
}

_ES_STEM_ENDINGS = ("s", "x", "z", "ch", "sh", "o")


class Sentence(NamedTuple):
    text: str
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class TokenizedReview:
    review_id: str
    user_id: str
    business_id: str
    stars: float
    sentences: tuple[Sentence, ...]

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "user_id": self.user_id,
            "business_id": self.business_id,
            "stars": self.stars,
            "sentences": [{"text": s.text, "tokens": list(s.tokens)} for s in self.sentences],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizedReview":
        sents = tuple(Sentence(s["text"], tuple(s["tokens"])) for s in d["sentences"])
        return cls(d["review_id"], d["user_id"], d["business_id"], float(d["stars"]), sents)


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: tuple[str, ...]
    frequencies: tuple[int, ...] = ()
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)})
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary tokens must be unique")
        if self.frequencies and len(self.frequencies) != len(self.id_to_token):
            raise ValueError("frequencies must align with tokens")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        """Map tokens to ids, dropping out-of-vocabulary tokens."""
        lookup = self.token_to_id
        return tuple(lookup[t] for t in tokens if t in lookup)

    def digest(self) -> bytes:
        return hashlib.sha256("\n".join(self.id_to_token).encode("utf-8")).digest()

    def write_tsv(self, path: str | Path) -> None:
        freqs = self.frequencies or (0,) * len(self)
        lines = ["id\ttoken\tfrequency"]
        lines += [f"{i}\t{t}\t{f}" for i, (t, f) in enumerate(zip(self.id_to_token, freqs))]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read_tsv(cls, path: str | Path) -> "Vocabulary":
        rows = Path(path).read_text(encoding="utf-8").splitlines()[1:]
        tokens, freqs = [], []
        for expected, row in enumerate(rows):
            idx, tok, freq = row.split("\t")
            if int(idx) != expected:
                raise ValueError(f"{path}: ids must be dense and ordered (row {expected})")
            tokens.append(tok)
            freqs.append(int(freq))
        return cls(tuple(tokens), tuple(freqs))


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a one-token-per-line list; the embedded English list when ``path`` is None."""
    if path is None:
        text = resources.files("review_insight.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def split_sentences(text: str) -> list[str]:
    """Split on runs of ``.!?`` followed by whitespace or end of text.

    A lone period after a single-letter word or a known abbreviation
    ("Dr.", "etc.") does not end a sentence.
    """
    out: list[str] = []
    start = 0
    for m in _TERMINAL.finditer(text):
        if m.group() == ".":
            prev = _LAST_WORD.search(text, start, m.start())
            if prev and (len(prev.group(1)) == 1 or prev.group(1).lower() in ABBREVIATIONS):
                continue
        seg = text[start:m.end()].strip()
        if seg:
            out.append(seg)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def normalize_token(tok: str) -> str:
    """Deterministic suffix stripper standing in for a dictionary lemmatizer."""
    if tok in EXCEPTIONS:
        return EXCEPTIONS[tok]
    if tok.endswith("ies") and len(tok) > 3:
        return tok[:-3] + "y"
    if tok.endswith("sses"):
        return tok[:-2]
    if tok.endswith("es") and tok[:-2].endswith(_ES_STEM_ENDINGS) and len(tok) > 3:
        return tok[:-2]
    if tok.endswith("s") and not tok.endswith(("ss", "us")) and len(tok) > 2:
        return tok[:-1]
    if tok.endswith("ing") and len(tok) - 3 >= 3:
        return tok[:-3]
    if tok.endswith("ed") and len(tok) - 2 >= 3:
        return tok[:-2]
    return tok


def tokenize_normalize(sentence: str, stopwords: Iterable[str] = frozenset()) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else frozenset(stopwords)
    out = []
    for raw in sentence.lower().split():
        tok = "".join(ch for ch in raw if ch.isalnum())
        if len(tok) < 2 or tok in stop:
            continue
        tok = normalize_token(tok)
        if len(tok) < 2 or tok in stop:
            continue
        out.append(tok)
    return out


def build_vocabulary(corpus: Iterable[Iterable[str]], min_count: int = 5) -> Vocabulary:
    """Tokens with frequency >= ``min_count``; ids by descending frequency, then lexicographic."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for doc in corpus:
        counts.update(doc)
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary(tuple(t for t, _ in kept), tuple(c for _, c in kept))


def _tokenize_review(review: RawReview, stopwords: frozenset[str]) -> list[tuple[str, list[str]]]:
    return [(s, tokenize_normalize(s, stopwords)) for s in split_sentences(review.text)]


def prepare_corpus(
    reviews: Sequence[RawReview],
    stopwords: frozenset[str] | None = None,
    min_count: int = 5,
    threads: int = 1,
) -> tuple[Vocabulary, list[TokenizedReview]]:
    """Tokenize every review, build the vocabulary and encode sentences as ids."""
    from .parallel import parallel_map

    stop = load_stopwords() if stopwords is None else stopwords
    split = parallel_map(_tokenize_review, reviews, threads, stop)
    vocab = build_vocabulary(
        (toks for sents in split for _, toks in sents), min_count=min_count
    )
    docs = []
    for review, sents in zip(reviews, split):
        encoded = tuple(Sentence(text, vocab.encode(toks)) for text, toks in sents)
        docs.append(
            TokenizedReview(review.review_id, review.user_id, review.business_id, review.stars, encoded)
        )
    return vocab, docs


def write_tokenized(docs: Iterable[TokenizedReview], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_dict(), ensure_ascii=False) + "\n")


def read_tokenized(path: str | Path) -> list[TokenizedReview]:
    with open(path, encoding="utf-8") as fh:
        return [TokenizedReview.from_dict(json.loads(line)) for line in fh if line.strip()]

"""Sentence-to-local-topic assignment by expected word probability."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mglda import TopicModel
from .textprep import TokenizedReview

UNASSIGNED = None


@dataclass(frozen=True)
class SegmentedReview:
    review_id: str
    user_id: str
    business_id: str
    stars: float
    sentence_topics: tuple[int | None, ...]

    @property
    def topic_sentences(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, k in enumerate(self.sentence_topics):
            if k is not UNASSIGNED:
                out.setdefault(k, []).append(i)
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "user_id": self.user_id,
            "business_id": self.business_id,
            "stars": self.stars,
            "sentence_topics": list(self.sentence_topics),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SegmentedReview":
        return cls(d["review_id"], d["user_id"], d["business_id"], float(d["stars"]), tuple(d["sentence_topics"]))


def restrict_top_n(phi_loc: np.ndarray, top_n: int | None) -> np.ndarray:
    """Zero every word outside each topic's ``top_n`` most probable ones."""
    if top_n is None or top_n >= phi_loc.shape[1]:
        return phi_loc
    out = np.zeros_like(phi_loc)
    for k, row in enumerate(phi_loc):
        keep = np.argsort(-row, kind="stable")[:top_n]
        out[k, keep] = row[keep]
    return out


def assign_sentence_topic(tokens: Sequence[int], model: TopicModel | np.ndarray, top_n: int | None = None) -> int | None:
    """Local topic maximizing sum over words of count(w) * P(w | topic).

    Ties go to the lowest topic index; an empty sentence is unassigned.
    ``model`` may be a TopicModel or a K_loc x V matrix.
    """
    if len(tokens) == 0:
        return UNASSIGNED
    phi = model.phi_loc if isinstance(model, TopicModel) else np.asarray(model)
    phi = restrict_top_n(phi, top_n)
    words, counts = np.unique(np.asarray(tokens, dtype=np.intp), return_counts=True)
    # accumulate in vocabulary order so the result does not depend on
    # numpy's pairwise summation blocking
    scores = np.zeros(phi.shape[0])
    for w, c in zip(words, counts):
        scores += phi[:, w] * c
    return int(np.argmax(scores))


def segment_review(review: TokenizedReview, model: TopicModel, top_n: int | None = None) -> SegmentedReview:
    phi = restrict_top_n(model.phi_loc, top_n)
    topics = tuple(assign_sentence_topic(s.tokens, phi) for s in review.sentences)
    return SegmentedReview(review.review_id, review.user_id, review.business_id, review.stars, topics)


def segment_corpus(docs: Iterable[TokenizedReview], model: TopicModel, top_n: int | None = None) -> list[SegmentedReview]:
    phi = restrict_top_n(model.phi_loc, top_n)
    out = []
    for d in docs:
        topics = tuple(assign_sentence_topic(s.tokens, phi) for s in d.sentences)
        out.append(SegmentedReview(d.review_id, d.user_id, d.business_id, d.stars, topics))
    return out


def write_segments(segs: Iterable[SegmentedReview], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in segs:
            fh.write(json.dumps(s.to_dict()) + "\n")


def read_segments(path: str | Path) -> list[SegmentedReview]:
    with open(path, encoding="utf-8") as fh:
        return [SegmentedReview.from_dict(json.loads(line)) for line in fh if line.strip()]

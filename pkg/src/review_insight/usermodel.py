"""User rating/sentiment vectors, user-topic correlations and representative users."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .sentiment import ReviewTopicSentiment

UNDEFINED = None


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Sample Pearson correlation; None when either vector has zero variance."""
    n = len(x)
    if n != len(y):
        raise ValueError(f"length mismatch: {n} vs {len(y)}")
    if n < 2:
        raise ValueError("need at least two observations")
    # constant vectors can leave rounding residue after centering
    if min(x) == max(x) or min(y) == max(y):
        return UNDEFINED
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    # rescale so tiny deviations cannot underflow when squared
    mdx = max(abs(d) for d in dx)
    mdy = max(abs(d) for d in dy)
    if mdx == 0.0 or mdy == 0.0:
        return UNDEFINED
    dx = [d / mdx for d in dx]
    dy = [d / mdy for d in dy]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        return UNDEFINED
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class UserVectors:
    user_id: str
    overall: dict[str, float] = field(default_factory=dict)
    topics: dict[int, dict[str, float]] = field(default_factory=dict)

    def aligned(self, topic: int) -> tuple[list[float], list[float]]:
        """(ratings, sentiments) over businesses with both, sorted by business id."""
        sent = self.topics.get(topic, {})
        bids = sorted(b for b in sent if b in self.overall)
        return [self.overall[b] for b in bids], [sent[b] for b in bids]


def build_user_vectors(sentiments: Iterable[ReviewTopicSentiment]) -> dict[str, UserVectors]:
    out: dict[str, UserVectors] = {}
    for rec in sentiments:
        uv = out.setdefault(rec.user_id, UserVectors(rec.user_id))
        if rec.business_id in uv.overall:
            raise ValueError(f"duplicate review for ({rec.user_id}, {rec.business_id})")
        uv.overall[rec.business_id] = rec.stars
        for k, s in rec.topic_sentiment.items():
            uv.topics.setdefault(int(k), {})[rec.business_id] = s
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class CorrelationMatrix:
    entries: Mapping[tuple[str, int], float]
    support: Mapping[tuple[str, int], int]
    min_reviews: int

    def get(self, user_id: str, topic: int) -> float | None:
        return self.entries.get((user_id, topic))

    @property
    def topics(self) -> list[int]:
        return sorted({k for _, k in self.entries})

    def write_tsv(self, path: str | Path) -> None:
        lines = ["user_id\ttopic\tr\tsupport"]
        for (u, k) in sorted(self.entries):
            lines.append(f"{u}\t{k}\t{self.entries[(u, k)]!r}\t{self.support[(u, k)]}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read_tsv(cls, path: str | Path, min_reviews: int) -> "CorrelationMatrix":
        entries, support = {}, {}
        for row in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
            u, k, r, n = row.split("\t")
            entries[(u, int(k))] = float(r)
            support[(u, int(k))] = int(n)
        return cls(entries, support, min_reviews)


def build_correlation_matrix(
    vectors: Mapping[str, UserVectors], min_reviews: int = 5, mode: str = "aligned"
) -> CorrelationMatrix:
    """Pearson correlation between each user's ratings and topic sentiments.

    ``mode="aligned"`` requires ``min_reviews`` businesses carrying both a
    rating and a sentiment for the topic. ``mode="user_total"`` only requires
    the user to have ``min_reviews`` reviews overall (at least two aligned
    observations are still needed for a correlation).
    """
    if min_reviews < 2:
        raise ValueError("min_reviews must be >= 2")
    if mode not in ("aligned", "user_total"):
        raise ValueError(f"unknown min-reviews mode {mode!r}")
    entries: dict[tuple[str, int], float] = {}
    support: dict[tuple[str, int], int] = {}
    for uid in sorted(vectors):
        uv = vectors[uid]
        if mode == "user_total" and len(uv.overall) < min_reviews:
            continue
        for k in sorted(uv.topics):
            ratings, sents = uv.aligned(k)
            n = len(ratings)
            needed = min_reviews if mode == "aligned" else 2
            if n < needed:
                continue
            r = pearson(ratings, sents)
            if r is UNDEFINED:
                continue
            entries[(uid, k)] = r
            support[(uid, k)] = n
    return CorrelationMatrix(entries, support, min_reviews)


@dataclass(frozen=True)
class RepresentativeSet:
    threshold: float
    members: Mapping[int, frozenset[str]]

    def of(self, topic: int) -> frozenset[str]:
        return self.members.get(topic, frozenset())

    def all_users(self) -> frozenset[str]:
        return frozenset().union(*self.members.values()) if self.members else frozenset()

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "members": {str(k): sorted(v) for k, v in sorted(self.members.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RepresentativeSet":
        return cls(float(d["threshold"]), {int(k): frozenset(v) for k, v in d["members"].items()})

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path: str | Path) -> "RepresentativeSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def select_representatives(C: CorrelationMatrix, T: float = 0.4) -> RepresentativeSet:
    """Users whose correlation with a topic is at least ``T`` (inclusive)."""
    if not -1.0 < T <= 1.0:
        raise ValueError("threshold must lie in (-1, 1]")
    members: dict[int, set[str]] = {}
    for (u, k), r in C.entries.items():
        if r >= T:
            members.setdefault(k, set()).add(u)
    return RepresentativeSet(T, {k: frozenset(v) for k, v in sorted(members.items())})


def sweep_thresholds(
    C: CorrelationMatrix, thresholds: Sequence[float], topics: Iterable[int] | None = None
) -> list[tuple[int, float, int]]:
    """Tidy (topic, T, member count) rows for every topic and threshold."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    topic_list = sorted(set(topics) if topics is not None else set(C.topics))
    by_topic: dict[int, list[float]] = {k: [] for k in topic_list}
    for (_, k), r in C.entries.items():
        if k in by_topic:
            by_topic[k].append(r)
    rows = []
    for k in topic_list:
        for T in thresholds:
            rows.append((k, T, sum(1 for r in by_topic[k] if r >= T)))
    return rows


def threshold_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid start, start+step, ..., stop, rounded to 10 decimals."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(n + 1)]

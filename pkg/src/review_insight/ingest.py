"""Yelp-schema ingestion: parse review/business dumps, slice by cuisine, dedup."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RawReview:
    review_id: str
    user_id: str
    business_id: str
    stars: float
    text: str

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "user_id": self.user_id,
            "business_id": self.business_id,
            "stars": self.stars,
            "text": self.text,
        }


@dataclass(frozen=True)
class Business:
    business_id: str
    categories: tuple[str, ...]
    avg_stars: float

    def to_dict(self) -> dict:
        return {
            "business_id": self.business_id,
            "categories": list(self.categories),
            "stars": self.avg_stars,
        }


@dataclass(frozen=True)
class CorpusSlice:
    category: str
    reviews: tuple[RawReview, ...]
    businesses: Mapping[str, Business] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "category": self.category,
            "businesses": [self.businesses[b].to_dict() for b in sorted(self.businesses)],
            "reviews": [r.to_dict() for r in self.reviews],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CorpusSlice":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"corpus slice schema_version {version!r}, expected {SCHEMA_VERSION}")
        businesses = {}
        for b in data["businesses"]:
            businesses[b["business_id"]] = Business(
                b["business_id"], tuple(b["categories"]), float(b["stars"])
            )
        reviews = tuple(
            RawReview(r["review_id"], r["user_id"], r["business_id"], float(r["stars"]), r["text"])
            for r in data["reviews"]
        )
        return cls(data["category"], reviews, businesses)


@dataclass
class ParseStats:
    parsed: int = 0
    skipped: int = 0


def _valid_stars(value) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    stars = float(value)
    if not 1.0 <= stars <= 5.0 or stars * 2 != int(stars * 2):
        return None
    return stars


def _read_lines(stream: IO[str] | str | Path) -> Iterable[str]:
    if isinstance(stream, (str, Path)):
        with open(stream, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from stream


def parse_reviews(
    stream: IO[str] | str | Path, stats: ParseStats | None = None
) -> list[RawReview]:
    """Parse newline-delimited review records.

    Lines that are not JSON objects, lack a required key, carry empty ids or
    a star rating off the half-star grid in [1, 5] are skipped and counted in
    ``stats``. When ``review_id`` is absent, ``line-<n>`` (1-based line
    number) is used so that ids stay deterministic.

    An unreadable stream raises ``OSError``.
    """
    stats = stats if stats is not None else ParseStats()
    out: list[RawReview] = []
    for lineno, line in enumerate(_read_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            stats.skipped += 1
            continue
        if not isinstance(rec, dict):
            stats.skipped += 1
            continue
        user_id, business_id, text = rec.get("user_id"), rec.get("business_id"), rec.get("text")
        stars = _valid_stars(rec.get("stars"))
        review_id = rec.get("review_id", f"line-{lineno}")
        if (
            not isinstance(user_id, str) or not user_id
            or not isinstance(business_id, str) or not business_id
            or not isinstance(review_id, str) or not review_id
            or not isinstance(text, str)
            or stars is None
        ):
            stats.skipped += 1
            continue
        out.append(RawReview(review_id, user_id, business_id, stars, text))
        stats.parsed += 1
    if stats.skipped:
        log.info("parse_reviews: %d parsed, %d skipped", stats.parsed, stats.skipped)
    return out


def _split_categories(value) -> tuple[str, ...]:
    # Older dumps use a list, newer ones a comma-separated string.
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(c.strip() for c in value.split(",") if c.strip())
    return tuple(str(c).strip() for c in value if str(c).strip())


def parse_businesses(
    stream: IO[str] | str | Path, stats: ParseStats | None = None
) -> dict[str, Business]:
    stats = stats if stats is not None else ParseStats()
    out: dict[str, Business] = {}
    for line in _read_lines(stream):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            stats.skipped += 1
            continue
        bid = rec.get("business_id") if isinstance(rec, dict) else None
        if not isinstance(bid, str) or not bid:
            stats.skipped += 1
            continue
        stars = rec.get("stars")
        avg = float(stars) if isinstance(stars, (int, float)) and not isinstance(stars, bool) else float("nan")
        out[bid] = Business(bid, _split_categories(rec.get("categories")), avg)
        stats.parsed += 1
    return out


def filter_by_category(
    reviews: Iterable[RawReview], businesses: Mapping[str, Business], category: str
) -> CorpusSlice:
    """Keep reviews of businesses listing ``category`` (case-insensitive exact match)."""
    if not category:
        raise ValueError("category must be non-empty")
    wanted = category.casefold()
    matched = {
        bid: b for bid, b in businesses.items() if any(c.casefold() == wanted for c in b.categories)
    }
    kept = tuple(r for r in reviews if r.business_id in matched)
    return CorpusSlice(category, kept, matched)


def dedup_reviews(corpus: CorpusSlice) -> CorpusSlice:
    """Keep one review per (user, business): the one with the greatest review_id."""
    best: dict[tuple[str, str], int] = {}
    for i, r in enumerate(corpus.reviews):
        key = (r.user_id, r.business_id)
        cur = best.get(key)
        if cur is None or r.review_id > corpus.reviews[cur].review_id:
            best[key] = i
    keep = set(best.values())
    reviews = tuple(r for i, r in enumerate(corpus.reviews) if i in keep)
    return CorpusSlice(corpus.category, reviews, corpus.businesses)


def write_slice(corpus: CorpusSlice, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus.to_dict(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


def read_slice(path: str | Path) -> CorpusSlice:
    return CorpusSlice.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_slice(reviews_path: str | Path, businesses_path: str | Path, category: str) -> CorpusSlice:
    """Parse both dumps, filter to ``category`` and dedup."""
    rstats, bstats = ParseStats(), ParseStats()
    reviews = parse_reviews(reviews_path, rstats)
    businesses = parse_businesses(businesses_path, bstats)
    log.info(
        "ingest: %d reviews (%d skipped), %d businesses (%d skipped)",
        rstats.parsed, rstats.skipped, bstats.parsed, bstats.skipped,
    )
    return dedup_reviews(filter_by_category(reviews, businesses, category))

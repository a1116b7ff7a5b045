"""Lexicon polarity scoring for sentences and per-topic review sentiment."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .segment import SegmentedReview

NEGATION_WINDOW = 3


@dataclass(frozen=True)
class SentimentLexicon:
    valence: Mapping[str, float]
    negators: frozenset[str] = frozenset()
    intensifiers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for tok, v in self.valence.items():
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"valence of {tok!r} outside [-1, 1]: {v}")
        for tok, m in self.intensifiers.items():
            if not 0.0 < m <= 4.0:
                raise ValueError(f"intensifier {tok!r} multiplier outside (0, 4]: {m}")

    @classmethod
    def parse(cls, text: str) -> "SentimentLexicon":
        """Parse ``token<TAB>valence`` lines, then optional ``[negators]``
        (one token per line) and ``[intensifiers]`` (``token<TAB>multiplier``)
        sections. ``#`` starts a comment line."""
        valence: dict[str, float] = {}
        negators: set[str] = set()
        intensifiers: dict[str, float] = {}
        section = "valence"
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                if section not in ("negators", "intensifiers", "valence"):
                    raise ValueError(f"line {lineno}: unknown section {section!r}")
                continue
            parts = line.split("\t")
            try:
                if section == "negators":
                    negators.add(parts[0].lower())
                elif section == "intensifiers":
                    intensifiers[parts[0].lower()] = float(parts[1])
                else:
                    valence[parts[0].lower()] = float(parts[1])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"line {lineno}: malformed lexicon entry {raw!r}") from exc
        return cls(valence, frozenset(negators), intensifiers)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "SentimentLexicon":
        if path is None:
            text = resources.files("review_insight.data").joinpath("lexicon.tsv").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.parse(text)


_DEFAULT: SentimentLexicon | None = None


def default_lexicon() -> SentimentLexicon:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = SentimentLexicon.load()
    return _DEFAULT


@dataclass(frozen=True)
class ReviewTopicSentiment:
    review_id: str
    user_id: str
    business_id: str
    stars: float
    topic_sentiment: Mapping[int, float]

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "user_id": self.user_id,
            "business_id": self.business_id,
            "stars": self.stars,
            "topic_sentiment": {str(k): v for k, v in sorted(self.topic_sentiment.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReviewTopicSentiment":
        ts = {int(k): float(v) for k, v in d["topic_sentiment"].items()}
        return cls(d["review_id"], d["user_id"], d["business_id"], float(d["stars"]), ts)


def _words(sentence: str) -> list[str]:
    out = []
    for raw in sentence.lower().split():
        tok = "".join(ch for ch in raw if ch.isalnum())
        if tok:
            out.append(tok)
    return out


def sentence_polarity(sentence: str, lexicon: SentimentLexicon | None = None) -> float:
    """Mean signed valence of the sentence's lexicon words, clamped to [-1, 1].

    Each negator among the three preceding tokens flips a word's sign; an
    intensifier right before it scales it. No lexicon words gives 0.0.
    """
    lex = lexicon or default_lexicon()
    toks = _words(sentence)
    contribs = []
    for i, tok in enumerate(toks):
        val = lex.valence.get(tok)
        if val is None:
            continue
        window = toks[max(0, i - NEGATION_WINDOW):i]
        flips = sum(1 for t in window if t in lex.negators)
        if flips % 2:
            val = -val
        if i > 0 and toks[i - 1] in lex.intensifiers:
            val *= lex.intensifiers[toks[i - 1]]
        contribs.append(val)
    if not contribs:
        return 0.0
    return max(-1.0, min(1.0, sum(contribs) / len(contribs)))


def review_topic_sentiment(
    seg: SegmentedReview,
    raw_sentences: Sequence[str],
    lexicon: SentimentLexicon | None = None,
    include_neutral: bool = True,
    polarities: Sequence[float] | None = None,
) -> ReviewTopicSentiment:
    """Average sentence polarity per assigned topic.

    With ``include_neutral=False`` zero-polarity sentences are left out of the
    mean, and a topic whose sentences are all neutral is omitted.
    """
    if len(raw_sentences) != len(seg.sentence_topics):
        raise ValueError(
            f"review {seg.review_id}: {len(raw_sentences)} sentences but "
            f"{len(seg.sentence_topics)} topic assignments"
        )
    if polarities is None:
        polarities = [sentence_polarity(s, lexicon) for s in raw_sentences]
    out: dict[int, float] = {}
    for k, idx in seg.topic_sentences.items():
        vals = [polarities[i] for i in idx]
        if not include_neutral:
            vals = [v for v in vals if v != 0.0]
        if vals:
            out[k] = max(-1.0, min(1.0, sum(vals) / len(vals)))
    return ReviewTopicSentiment(seg.review_id, seg.user_id, seg.business_id, seg.stars, out)


def _polarities(sentences: Sequence[str], lexicon: SentimentLexicon) -> list[float]:
    return [sentence_polarity(s, lexicon) for s in sentences]


def score_corpus(
    segs: Sequence[SegmentedReview],
    raw: Sequence[Sequence[str]],
    lexicon: SentimentLexicon | None = None,
    include_neutral: bool = True,
    threads: int = 1,
) -> list[ReviewTopicSentiment]:
    from .parallel import parallel_map

    lex = lexicon or default_lexicon()
    pols = parallel_map(_polarities, list(raw), threads, lex)
    return [
        review_topic_sentiment(s, r, lex, include_neutral, p) for s, r, p in zip(segs, raw, pols)
    ]


def write_sentiments(rows: Iterable[ReviewTopicSentiment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_sentiments(path: str | Path) -> list[ReviewTopicSentiment]:
    with open(path, encoding="utf-8") as fh:
        return [ReviewTopicSentiment.from_dict(json.loads(line)) for line in fh if line.strip()]

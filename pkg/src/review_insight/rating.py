"""Per-restaurant topic ratings, regression, baselines and RMSE evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .svr import SvrModel, predict_svr, rbf_kernel, train_svr
from .usermodel import RepresentativeSet

__all__ = [
    "RatingsIndex", "RestaurantUncovered", "TopicRatingVector", "EvalReport", "SvrParams",
    "topic_rating", "topic_rating_vector", "featurize", "baseline1", "baseline2", "rmse",
    "split_restaurants", "evaluate", "rbf_kernel", "train_svr", "predict_svr",
]


class RestaurantUncovered(ValueError):
    """No representative user reviewed the restaurant."""


class RatingsIndex:
    """Stars indexed by business then user."""

    def __init__(self, reviews: Iterable):
        self.by_business: dict[str, dict[str, float]] = {}
        for r in reviews:
            users = self.by_business.setdefault(r.business_id, {})
            if r.user_id in users:
                raise ValueError(f"duplicate review for ({r.user_id}, {r.business_id})")
            users[r.user_id] = float(r.stars)

    def businesses(self) -> list[str]:
        return sorted(self.by_business)

    def ratings(self, business_id: str) -> Mapping[str, float]:
        return self.by_business.get(business_id, {})

    def actual(self, business_id: str) -> float:
        """Mean star rating of the restaurant over the whole slice."""
        vals = list(self.by_business[business_id].values())
        return math.fsum(vals) / len(vals)


@dataclass(frozen=True)
class TopicRatingVector:
    business_id: str
    ratings: tuple[float, ...]
    direct_mask: tuple[bool, ...]

    @property
    def fully_direct(self) -> bool:
        return all(self.direct_mask)


def topic_rating(business_id: str, topic: int, reps: RepresentativeSet, index: RatingsIndex) -> float | None:
    """Mean stars given to the business by the topic's representatives; None if none did."""
    stars = index.ratings(business_id)
    vals = [stars[u] for u in sorted(reps.of(topic)) if u in stars]
    if not vals:
        return None
    return math.fsum(vals) / len(vals)


def topic_rating_vector(
    business_id: str, reps: RepresentativeSet, index: RatingsIndex, k_loc: int
) -> TopicRatingVector:
    """Direct topic ratings; missing ones filled with the mean of the direct ones."""
    direct = [topic_rating(business_id, k, reps, index) for k in range(k_loc)]
    known = [v for v in direct if v is not None]
    if not known:
        raise RestaurantUncovered(business_id)
    fill = math.fsum(known) / len(known)
    return TopicRatingVector(
        business_id,
        tuple(fill if v is None else v for v in direct),
        tuple(v is not None for v in direct),
    )


def featurize(
    index: RatingsIndex, reps: RepresentativeSet, k_loc: int
) -> tuple[list[TopicRatingVector], list[str]]:
    """Topic rating vectors for every coverable restaurant, plus the uncovered ids."""
    vectors, uncovered = [], []
    for bid in index.businesses():
        try:
            vectors.append(topic_rating_vector(bid, reps, index, k_loc))
        except RestaurantUncovered:
            uncovered.append(bid)
    return vectors, uncovered


def baseline1(business_id: str, reps: RepresentativeSet, index: RatingsIndex) -> float:
    """Mean stars from all representatives of any topic, ignoring topic structure."""
    stars = index.ratings(business_id)
    vals = [stars[u] for u in sorted(reps.all_users()) if u in stars]
    if not vals:
        raise RestaurantUncovered(business_id)
    return math.fsum(vals) / len(vals)


def baseline2(test_targets: Sequence[float]) -> float:
    """The constant predictor: mean of the test targets."""
    if len(test_targets) == 0:
        raise ValueError("baseline2 needs at least one target")
    return math.fsum(test_targets) / len(test_targets)


def rmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    if len(predicted) != len(actual):
        raise ValueError(f"length mismatch: {len(predicted)} vs {len(actual)}")
    if len(predicted) == 0:
        raise ValueError("rmse of empty sequences")
    return math.sqrt(math.fsum((p - a) ** 2 for p, a in zip(predicted, actual)) / len(predicted))


def split_restaurants(ids: Sequence[str], split_ratio: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded shuffle of the sorted ids, then the first ``split_ratio`` share for training."""
    if not 0.0 < split_ratio < 1.0:
        raise ValueError("split_ratio must lie in (0, 1)")
    ids = sorted(ids)
    n = len(ids)
    if n < 3:
        raise ValueError("need at least three restaurants to split")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    n_train = min(max(int(round(n * split_ratio)), 2), n - 1)
    return [ids[i] for i in order[:n_train]], [ids[i] for i in order[n_train:]]


@dataclass(frozen=True)
class SvrParams:
    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 200
    direct_only: bool = False


@dataclass
class EvalReport:
    rmse_model: float
    rmse_baseline1: float
    rmse_baseline2: float
    n_train: int
    n_test: int
    mean_representatives_per_restaurant: float
    baseline1_coverage: int = 0
    baseline2_constant: float = 0.0
    n_featurizable: int = 0
    n_uncovered: int = 0
    predictions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary_rows(self) -> list[tuple[str, str]]:
        return [
            ("MG-LDA topic ratings + SVR (rbf)", f"{self.rmse_model:.4f}"),
            ("Baseline 1 (mean of representatives)", f"{self.rmse_baseline1:.4f}"),
            ("Baseline 2 (constant test mean)", f"{self.rmse_baseline2:.4f}"),
        ]

    def to_table(self) -> str:
        width = max(len(n) for n, _ in self.summary_rows())
        lines = [f"{'Model'.ljust(width)}  RMSE", f"{'-' * width}  ------"]
        lines += [f"{n.ljust(width)}  {v}" for n, v in self.summary_rows()]
        lines += [
            "",
            f"train/test restaurants: {self.n_train}/{self.n_test}"
            f" (featurizable {self.n_featurizable}, uncovered {self.n_uncovered})",
            f"baseline 1 coverage on test: {self.baseline1_coverage}/{self.n_test}",
            f"baseline 2 constant: {self.baseline2_constant:.4f}",
            f"mean representatives per restaurant: {self.mean_representatives_per_restaurant:.2f}",
        ]
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        rows = ["metric\tvalue"]
        for k, v in self.to_dict().items():
            if k != "predictions":
                rows.append(f"{k}\t{v!r}")
        return "\n".join(rows) + "\n"


def mean_representatives(vectors: Sequence[TopicRatingVector], reps: RepresentativeSet, index: RatingsIndex) -> float:
    if not vectors:
        return 0.0
    users = reps.all_users()
    counts = [sum(1 for u in index.ratings(v.business_id) if u in users) for v in vectors]
    return math.fsum(counts) / len(counts)


def fit_model(
    vectors: Sequence[TopicRatingVector], index: RatingsIndex, params: SvrParams
) -> SvrModel:
    train = [v for v in vectors if v.fully_direct] if params.direct_only else list(vectors)
    if len(train) < 2:
        raise ValueError("fewer than two training restaurants")
    targets = [index.actual(v.business_id) for v in train]
    return train_svr(
        train, targets, C=params.C, epsilon=params.epsilon, gamma=params.gamma,
        tol=params.tol, max_passes=params.max_passes,
    )


def score_model(
    model: SvrModel,
    test: Sequence[TopicRatingVector],
    reps: RepresentativeSet,
    index: RatingsIndex,
    n_train: int,
    n_uncovered: int,
    mean_reps: float,
) -> EvalReport:
    actual = [index.actual(v.business_id) for v in test]
    pred = [predict_svr(model, v) for v in test]
    b1_pred, b1_actual = [], []
    for v, a in zip(test, actual):
        try:
            b1_pred.append(baseline1(v.business_id, reps, index))
            b1_actual.append(a)
        except RestaurantUncovered:
            continue
    const = baseline2(actual)
    predictions = [
        {"business_id": v.business_id, "actual": a, "model": p}
        for v, a, p in zip(test, actual, pred)
    ]
    return EvalReport(
        rmse_model=rmse(pred, actual),
        rmse_baseline1=rmse(b1_pred, b1_actual) if b1_pred else float("nan"),
        rmse_baseline2=rmse([const] * len(actual), actual),
        n_train=n_train,
        n_test=len(test),
        mean_representatives_per_restaurant=mean_reps,
        baseline1_coverage=len(b1_pred),
        baseline2_constant=const,
        n_featurizable=n_train + len(test),
        n_uncovered=n_uncovered,
        predictions=predictions,
    )


def evaluate(
    reviews: Iterable,
    reps: RepresentativeSet,
    k_loc: int,
    split_ratio: float = 0.75,
    seed: int = 0,
    svr: SvrParams = SvrParams(),
) -> EvalReport:
    """Featurize, split restaurants, fit the SVR and score it against both baselines.

    The "actual" rating of a restaurant is its mean review star rating over
    all of ``reviews``.
    """
    index = reviews if isinstance(reviews, RatingsIndex) else RatingsIndex(reviews)
    vectors, uncovered = featurize(index, reps, k_loc)
    if len(vectors) < 10:
        raise ValueError(f"only {len(vectors)} featurizable restaurants; need at least 10")
    by_id = {v.business_id: v for v in vectors}
    train_ids, test_ids = split_restaurants(list(by_id), split_ratio, seed)
    params = svr if svr.gamma is not None else SvrParams(**{**asdict(svr), "gamma": 1.0 / k_loc})
    model = fit_model([by_id[b] for b in train_ids], index, params)
    return score_model(
        model, [by_id[b] for b in test_ids], reps, index, len(train_ids), len(uncovered),
        mean_representatives(vectors, reps, index),
    )


def write_topic_ratings(vectors: Iterable[TopicRatingVector], path: str | Path) -> None:
    lines = ["business_id\tk\trating\tdirect_flag"]
    for v in vectors:
        for k, (r, d) in enumerate(zip(v.ratings, v.direct_mask)):
            lines.append(f"{v.business_id}\t{k}\t{r!r}\t{int(d)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_topic_ratings(path: str | Path) -> list[TopicRatingVector]:
    rows: dict[str, list[tuple[int, float, bool]]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        bid, k, r, d = line.split("\t")
        rows.setdefault(bid, []).append((int(k), float(r), d == "1"))
    out = []
    for bid, entries in rows.items():
        entries.sort()
        out.append(TopicRatingVector(bid, tuple(e[1] for e in entries), tuple(e[2] for e in entries)))
    return out


def write_report(report: EvalReport, json_path: str | Path, table_path: str | Path | None = None,
                 tsv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    if table_path is not None:
        Path(table_path).write_text(report.to_table(), encoding="utf-8")
    if tsv_path is not None:
        Path(tsv_path).write_text(report.to_tsv(), encoding="utf-8")

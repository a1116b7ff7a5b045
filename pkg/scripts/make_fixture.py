"""Regenerate the bundled fixture under src/review_insight/data/fixture."""

import json
from pathlib import Path

from review_insight.synthetic import generate_restaurant_slice, write_yelp_dump

OUT = Path(__file__).resolve().parents[1] / "src" / "review_insight" / "data" / "fixture"

CONFIG = """\
# Small settings so the whole pipeline runs in seconds.
category: Italian
seed: 0
paths:
  reviews: reviews.jsonl
  businesses: businesses.jsonl
textprep:
  min_count: 2
mglda:
  k_glo: 2
  k_loc: 4
  iterations: 200
  n_chains: 2
  sample_lag: 10
usermodel:
  min_reviews: 5
  threshold: 0.4
"""


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    planted = generate_restaurant_slice(n_restaurants=16, n_users=40, rep_reviews=12, casual_reviews=3, seed=7)
    write_yelp_dump(planted.corpus, OUT / "reviews.jsonl", OUT / "businesses.jsonl")
    # off-category noise and one broken line for ingest to skip
    with open(OUT / "businesses.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"business_id": "m000", "categories": "Mexican, Restaurants", "stars": 4.0}) + "\n")
    with open(OUT / "reviews.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"review_id": "x00000", "user_id": "u000", "business_id": "m000",
                             "stars": 5, "text": "Great tacos."}) + "\n")
        fh.write('{"review_id": "x00001", "stars": \n')
    (OUT / "config.yaml").write_text(CONFIG, encoding="utf-8")
    n = sum(1 for _ in open(OUT / "reviews.jsonl", encoding="utf-8"))
    print(f"wrote {n} review lines to {OUT}")


if __name__ == "__main__":
    main()

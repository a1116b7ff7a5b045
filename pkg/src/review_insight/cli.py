"""``review-insight``: run the pipeline stage by stage over a cached workdir.

Every stage writes its artifacts plus ``<stage>.manifest.json`` recording a
fingerprint (stage schema version, the config keys it reads, hashes of
external inputs, upstream fingerprints), artifact hashes and a config
snapshot. A stage refuses to run when an upstream manifest is missing, its
artifacts were modified, or its fingerprint no longer matches the current
configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from . import ingest as ingest_mod
from . import mglda, rating, segment, sentiment, textprep, usermodel
from .svr import SvrModel
from .config import ConfigError, PipelineConfig, hash_json, load_config

log = logging.getLogger("review_insight")

ARTIFACT_SCHEMA = 1


class StaleArtifact(RuntimeError):
    def __init__(self, stage: str, reason: str):
        self.stage = stage
        super().__init__(f"{reason}; rerun `review-insight {stage}`")


@dataclass(frozen=True)
class Stage:
    name: str
    upstream: tuple[str, ...]
    outputs: tuple[str, ...]
    config_keys: Callable[[PipelineConfig], dict]
    external: Callable[[PipelineConfig], dict]
    run: Callable[["Context"], None]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Context:
    def __init__(self, config: PipelineConfig, workdir: Path):
        self.config = config
        self.workdir = workdir
        self._ext_cache: dict[str, str] = {}
        self._fp_cache: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.workdir / name

    def file_hash(self, path: str | None) -> str | None:
        if path is None:
            return None
        if path not in self._ext_cache:
            try:
                self._ext_cache[path] = sha256_file(path)
            except OSError as exc:
                raise OSError(f"cannot read input {path}: {exc.strerror or exc}") from exc
        return self._ext_cache[path]

    def fingerprint(self, name: str) -> str:
        """Expected fingerprint of stage ``name`` under the current config."""
        if name not in self._fp_cache:
            st = STAGES[name]
            self._fp_cache[name] = hash_json({
                "stage": name,
                "schema": ARTIFACT_SCHEMA,
                "config": st.config_keys(self.config),
                "external": st.external(self),
                "upstream": {u: self.fingerprint(u) for u in st.upstream},
            })
        return self._fp_cache[name]

    def manifest_path(self, name: str) -> Path:
        return self.path(f"{name}.manifest.json")

    def read_manifest(self, name: str) -> dict | None:
        p = self.manifest_path(name)
        if not p.exists():
            return None
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return None

    def stale_reason(self, name: str) -> str | None:
        """Why stage ``name``'s artifacts cannot be used; None when current."""
        man = self.read_manifest(name)
        if man is None:
            return f"stage '{name}' has not been run in {self.workdir}"
        if man.get("schema_version") != ARTIFACT_SCHEMA:
            return f"stage '{name}' artifacts use schema {man.get('schema_version')}"
        for fname, digest in man.get("outputs", {}).items():
            p = self.path(fname)
            if not p.exists():
                return f"artifact {fname} of stage '{name}' is missing"
            if sha256_file(p) != digest:
                return f"artifact {fname} of stage '{name}' was modified"
        if man.get("fingerprint") != self.fingerprint(name):
            return f"stage '{name}' artifacts were built with different inputs or settings"
        return None

    def require(self, name: str) -> None:
        """Check every transitive upstream of ``name``, earliest first."""
        for up in upstream_closure(name):
            reason = self.stale_reason(up)
            if reason is not None:
                raise StaleArtifact(up, reason)


def upstream_closure(name: str) -> list[str]:
    seen: list[str] = []

    def visit(n):
        for u in STAGES[n].upstream:
            visit(u)
            if u not in seen:
                seen.append(u)

    visit(name)
    return [s for s in ORDER if s in seen]


# --- stage bodies ------------------------------------------------------------

def _load_vocab_docs(ctx: Context):
    vocab = textprep.Vocabulary.read_tsv(ctx.path("vocab.tsv"))
    docs = textprep.read_tokenized(ctx.path("tokenized.jsonl"))
    return vocab, docs


def run_ingest(ctx: Context) -> None:
    p = ctx.config.paths
    if p.reviews is None or p.businesses is None:
        raise ConfigError(["paths.reviews and paths.businesses are required for ingest"])
    corpus = ingest_mod.load_slice(p.reviews, p.businesses, ctx.config.category)
    log.info("ingest: %d reviews of %d '%s' businesses", len(corpus.reviews), len(corpus.businesses), corpus.category)
    ingest_mod.write_slice(corpus, ctx.path("corpus.json"))


def run_prep(ctx: Context) -> None:
    corpus = ingest_mod.read_slice(ctx.path("corpus.json"))
    stop = textprep.load_stopwords(ctx.config.paths.stopwords)
    vocab, docs = textprep.prepare_corpus(
        corpus.reviews, stop, ctx.config.textprep.min_count, ctx.config.threads
    )
    log.info("prep: vocabulary of %d tokens over %d reviews", len(vocab), len(docs))
    vocab.write_tsv(ctx.path("vocab.tsv"))
    textprep.write_tokenized(docs, ctx.path("tokenized.jsonl"))


def run_train_topics(ctx: Context) -> None:
    vocab, docs = _load_vocab_docs(ctx)
    train_docs = [d for d in docs if any(s.tokens for s in d.sentences)]
    if not train_docs:
        raise ValueError("no review has in-vocabulary tokens; lower textprep.min_count")
    params = ctx.config.mglda_params()
    log.info(
        "train-topics: %d documents, K_glo=%d K_loc=%d, %d sweeps x %d chain(s) [%s backend]",
        len(train_docs), params.k_glo, params.k_loc, params.iterations, params.n_chains, mglda.BACKEND,
    )
    model = mglda.train(train_docs, params, vocabulary=vocab)
    mglda.save_model(model, ctx.path("topic_model.bin"))
    mglda.write_top_words(model, vocab, ctx.path("top_words.tsv"), ctx.config.mglda.top_words)


def run_segment(ctx: Context) -> None:
    vocab, docs = _load_vocab_docs(ctx)
    model = mglda.load_model(ctx.path("topic_model.bin"), vocabulary=vocab)
    segs = segment.segment_corpus(docs, model, ctx.config.segment.top_n)
    segment.write_segments(segs, ctx.path("segments.jsonl"))


def run_sentiment(ctx: Context) -> None:
    _, docs = _load_vocab_docs(ctx)
    segs = segment.read_segments(ctx.path("segments.jsonl"))
    lex = sentiment.SentimentLexicon.load(ctx.config.paths.lexicon)
    raw = [[s.text for s in d.sentences] for d in docs]
    rows = sentiment.score_corpus(segs, raw, lex, ctx.config.sentiment.include_neutral, ctx.config.threads)
    sentiment.write_sentiments(rows, ctx.path("sentiment.jsonl"))


def run_correlate(ctx: Context) -> None:
    rows = sentiment.read_sentiments(ctx.path("sentiment.jsonl"))
    um = ctx.config.usermodel
    C = usermodel.build_correlation_matrix(
        usermodel.build_user_vectors(rows), um.min_reviews, um.min_reviews_mode
    )
    log.info("correlate: %d defined user-topic entries", len(C.entries))
    C.write_tsv(ctx.path("correlation.tsv"))


def _read_matrix(ctx: Context) -> usermodel.CorrelationMatrix:
    return usermodel.CorrelationMatrix.read_tsv(ctx.path("correlation.tsv"), ctx.config.usermodel.min_reviews)


def run_representatives(ctx: Context) -> None:
    reps = usermodel.select_representatives(_read_matrix(ctx), ctx.config.usermodel.threshold)
    log.info("representatives: %d users at T >= %g", len(reps.all_users()), reps.threshold)
    reps.write_json(ctx.path("representatives.json"))


def run_sweep(ctx: Context) -> None:
    start, stop, step = ctx.config.usermodel.sweep
    grid = usermodel.threshold_grid(start, stop, step)
    rows = usermodel.sweep_thresholds(_read_matrix(ctx), grid, range(ctx.config.mglda.k_loc))
    lines = ["topic\tthreshold\tcount"] + [f"{k}\t{T!r}\t{n}" for k, T, n in rows]
    ctx.path("sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ctx.path("sweep.json").write_text(
        json.dumps([{"topic": k, "threshold": T, "count": n} for k, T, n in rows], indent=1) + "\n",
        encoding="utf-8",
    )


def _index(ctx: Context) -> rating.RatingsIndex:
    return rating.RatingsIndex(ingest_mod.read_slice(ctx.path("corpus.json")).reviews)


def run_topic_ratings(ctx: Context) -> None:
    reps = usermodel.RepresentativeSet.read_json(ctx.path("representatives.json"))
    vectors, uncovered = rating.featurize(_index(ctx), reps, ctx.config.mglda.k_loc)
    log.info("topic-ratings: %d restaurants featurized, %d uncovered", len(vectors), len(uncovered))
    rating.write_topic_ratings(vectors, ctx.path("topic_ratings.tsv"))


def run_fit(ctx: Context) -> None:
    index = _index(ctx)
    vectors = {v.business_id: v for v in rating.read_topic_ratings(ctx.path("topic_ratings.tsv"))}
    if len(vectors) < 10:
        raise ValueError(f"only {len(vectors)} featurizable restaurants; need at least 10")
    train_ids, test_ids = rating.split_restaurants(list(vectors), ctx.config.evaluate.split_ratio, ctx.config.seed)
    model = rating.fit_model([vectors[b] for b in train_ids], index, ctx.config.svr_params())
    log.info("fit: SVR on %d restaurants, %d support vectors", len(train_ids), len(model.dual_coefs))
    model.write_json(ctx.path("svr_model.json"))
    ctx.path("split.json").write_text(json.dumps({"train": train_ids, "test": test_ids}, indent=1) + "\n", encoding="utf-8")


def run_evaluate(ctx: Context) -> None:
    index = _index(ctx)
    reps = usermodel.RepresentativeSet.read_json(ctx.path("representatives.json"))
    vectors = {v.business_id: v for v in rating.read_topic_ratings(ctx.path("topic_ratings.tsv"))}
    split = json.loads(ctx.path("split.json").read_text(encoding="utf-8"))
    model = SvrModel.read_json(ctx.path("svr_model.json"))
    report = rating.score_model(
        model, [vectors[b] for b in split["test"]], reps, index, len(split["train"]),
        len(index.businesses()) - len(vectors),
        rating.mean_representatives(list(vectors.values()), reps, index),
    )
    rating.write_report(report, ctx.path("eval_report.json"), ctx.path("eval_report.txt"), ctx.path("eval_report.tsv"))
    sys.stdout.write(report.to_table())


def _section(*names):
    def pick(cfg: PipelineConfig) -> dict:
        out = {}
        for n in names:
            obj = cfg
            for part in n.split("."):
                obj = getattr(obj, part)
            out[n] = dataclasses.asdict(obj) if dataclasses.is_dataclass(obj) else obj
        return out
    return pick


def _no_external(ctx) -> dict:
    return {}


STAGES: dict[str, Stage] = {s.name: s for s in [
    Stage("ingest", (), ("corpus.json",), _section("category"),
          lambda ctx: {"reviews": ctx.file_hash(ctx.config.paths.reviews),
                       "businesses": ctx.file_hash(ctx.config.paths.businesses)}, run_ingest),
    Stage("prep", ("ingest",), ("vocab.tsv", "tokenized.jsonl"), _section("textprep"),
          lambda ctx: {"stopwords": ctx.file_hash(ctx.config.paths.stopwords)}, run_prep),
    Stage("train-topics", ("prep",), ("topic_model.bin", "top_words.tsv"), _section("mglda", "seed"),
          _no_external, run_train_topics),
    Stage("segment", ("prep", "train-topics"), ("segments.jsonl",), _section("segment"),
          _no_external, run_segment),
    Stage("sentiment", ("prep", "segment"), ("sentiment.jsonl",), _section("sentiment"),
          lambda ctx: {"lexicon": ctx.file_hash(ctx.config.paths.lexicon)}, run_sentiment),
    Stage("correlate", ("sentiment",), ("correlation.tsv",),
          _section("usermodel.min_reviews", "usermodel.min_reviews_mode"), _no_external, run_correlate),
    Stage("representatives", ("correlate",), ("representatives.json",), _section("usermodel.threshold"),
          _no_external, run_representatives),
    Stage("sweep", ("correlate",), ("sweep.tsv", "sweep.json"), _section("usermodel.sweep", "mglda.k_loc"),
          _no_external, run_sweep),
    Stage("topic-ratings", ("ingest", "representatives"), ("topic_ratings.tsv",), _section("mglda.k_loc"),
          _no_external, run_topic_ratings),
    Stage("fit", ("ingest", "topic-ratings"), ("svr_model.json", "split.json"),
          _section("svr", "evaluate", "seed", "mglda.k_loc"), _no_external, run_fit),
    Stage("evaluate", ("ingest", "representatives", "topic-ratings", "fit"),
          ("eval_report.json", "eval_report.txt", "eval_report.tsv"), _section(), _no_external, run_evaluate),
]}
ORDER = list(STAGES)


def config_snapshot(cfg: PipelineConfig) -> dict:
    d = cfg.to_dict()
    d.pop("paths")
    d.pop("threads")
    return d


def run_stage(name: str, config: PipelineConfig, workdir: str | Path | None = None, force: bool = True) -> bool:
    """Run one stage (or all of them for ``pipeline``). Returns False if skipped as current."""
    if name == "pipeline":
        ran = False
        for st in ORDER:
            ran |= run_stage(st, config, workdir, force=False)
        return ran
    if name not in STAGES:
        raise ValueError(f"unknown stage {name!r}")
    wd = Path(workdir or config.paths.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    ctx = Context(config, wd)
    ctx.require(name)
    if not force and ctx.stale_reason(name) is None:
        log.info("%s: up to date", name)
        return False
    stage = STAGES[name]
    t0 = time.perf_counter()
    stage.run(ctx)
    elapsed = time.perf_counter() - t0
    snapshot = config_snapshot(config)
    manifest = {
        "stage": name,
        "schema_version": ARTIFACT_SCHEMA,
        "fingerprint": ctx.fingerprint(name),
        "config_hash": hash_json(snapshot),
        "config": snapshot,
        "inputs": {
            f: sha256_file(ctx.path(f)) for u in stage.upstream for f in STAGES[u].outputs
        },
        "external_inputs": stage.external(ctx),
        "outputs": {f: sha256_file(ctx.path(f)) for f in stage.outputs},
        "duration_seconds": round(elapsed, 3),
    }
    ctx.manifest_path(name).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    log.info("%s: done in %.2fs", name, elapsed)
    return True


def fixture_config_path() -> Path:
    return Path(str(resources.files("review_insight.data").joinpath("fixture/config.yaml")))


def parse_sweep(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ConfigError([f"--sweep: expected A:B:STEP, got {text!r}"]) from exc
    return [a, b, step]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="review-insight",
        description="Predict restaurant ratings from topic-representative users.",
    )
    ap.add_argument("stage", choices=ORDER + ["pipeline"])
    ap.add_argument("--config", help="YAML configuration file")
    ap.add_argument("--fixture", action="store_true", help="use the bundled synthetic fixture config")
    ap.add_argument("--category")
    ap.add_argument("--k-local", type=int, dest="k_local")
    ap.add_argument("--window", type=int)
    ap.add_argument("--iters", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threshold", type=float)
    ap.add_argument("--min-reviews", type=int, dest="min_reviews")
    ap.add_argument("--sweep", help="threshold grid A:B:STEP")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", help="workdir for artifacts")
    ap.add_argument("--force", action="store_true", help="with pipeline, rerun stages that are up to date")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if args.category is not None:
        cfg.category = args.category
    if args.k_local is not None:
        cfg.mglda.k_loc = args.k_local
    if args.window is not None:
        cfg.mglda.window = args.window
    if args.iters is not None:
        cfg.mglda.iterations = args.iters
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threshold is not None:
        cfg.usermodel.threshold = args.threshold
    if args.min_reviews is not None:
        cfg.usermodel.min_reviews = args.min_reviews
    if args.sweep is not None:
        cfg.usermodel.sweep = parse_sweep(args.sweep)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.paths.workdir = args.out
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        path = args.config or (fixture_config_path() if args.fixture else None)
        cfg = apply_overrides(load_config(path), args)
        if args.stage == "pipeline" and args.force:
            for st in ORDER:
                run_stage(st, cfg)
        else:
            run_stage(args.stage, cfg)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return 1
    except (StaleArtifact, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

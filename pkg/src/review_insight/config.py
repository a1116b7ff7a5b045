"""Pipeline configuration: one YAML file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .mglda import MgldaParams
from .rating import SvrParams


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration: " + "; ".join(problems))


@dataclass
class Paths:
    reviews: str | None = None
    businesses: str | None = None
    workdir: str = "work"
    stopwords: str | None = None
    lexicon: str | None = None


@dataclass
class TextprepOptions:
    min_count: int = 5


@dataclass
class MgldaOptions:
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
    burn_in: int | None = None
    sample_lag: int = 25
    n_chains: int = 1
    top_words: int = 10


@dataclass
class SegmentOptions:
    top_n: int | None = None


@dataclass
class SentimentOptions:
    include_neutral: bool = True


@dataclass
class UserModelOptions:
    min_reviews: int = 5
    min_reviews_mode: str = "aligned"
    threshold: float = 0.4
    sweep: list[float] = field(default_factory=lambda: [0.0, 0.9, 0.1])


@dataclass
class SvrOptions:
    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 200
    direct_only: bool = False


@dataclass
class EvaluateOptions:
    # roughly 3:1 train/test
    split_ratio: float = 0.75


@dataclass
class PipelineConfig:
    category: str = "Italian"
    seed: int = 0
    threads: int = 1
    paths: Paths = field(default_factory=Paths)
    textprep: TextprepOptions = field(default_factory=TextprepOptions)
    mglda: MgldaOptions = field(default_factory=MgldaOptions)
    segment: SegmentOptions = field(default_factory=SegmentOptions)
    sentiment: SentimentOptions = field(default_factory=SentimentOptions)
    usermodel: UserModelOptions = field(default_factory=UserModelOptions)
    svr: SvrOptions = field(default_factory=SvrOptions)
    evaluate: EvaluateOptions = field(default_factory=EvaluateOptions)

    def mglda_params(self) -> MgldaParams:
        opts = dataclasses.asdict(self.mglda)
        opts.pop("top_words")
        return MgldaParams(seed=self.seed, **opts)

    def svr_params(self) -> SvrParams:
        opts = dataclasses.asdict(self.svr)
        if opts["gamma"] is None:
            opts["gamma"] = 1.0 / self.mglda.k_loc
        return SvrParams(**opts)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hash_json(self.to_dict())

    def validate(self) -> None:
        problems = []
        if not self.category:
            problems.append("category: must be non-empty")
        if self.threads < 1:
            problems.append("threads: must be >= 1")
        if self.textprep.min_count < 1:
            problems.append("textprep.min_count: must be >= 1")
        try:
            self.mglda_params()
        except ValueError as exc:
            problems.append(f"mglda: {exc}")
        if self.mglda.top_words < 1:
            problems.append("mglda.top_words: must be >= 1")
        if self.segment.top_n is not None and self.segment.top_n < 1:
            problems.append("segment.top_n: must be >= 1")
        um = self.usermodel
        if um.min_reviews < 2:
            problems.append("usermodel.min_reviews: must be >= 2")
        if um.min_reviews_mode not in ("aligned", "user_total"):
            problems.append("usermodel.min_reviews_mode: must be 'aligned' or 'user_total'")
        if not -1.0 < um.threshold <= 1.0:
            problems.append("usermodel.threshold: must lie in (-1, 1]")
        if len(um.sweep) != 3 or um.sweep[2] <= 0 or um.sweep[1] < um.sweep[0]:
            problems.append("usermodel.sweep: expected [start, stop, step] with step > 0")
        if self.svr.C <= 0 or self.svr.epsilon < 0 or self.svr.tol <= 0 or self.svr.max_passes < 1:
            problems.append("svr: require C > 0, epsilon >= 0, tol > 0, max_passes >= 1")
        if self.svr.gamma is not None and self.svr.gamma <= 0:
            problems.append("svr.gamma: must be positive")
        if not 0.0 < self.evaluate.split_ratio < 1.0:
            problems.append("evaluate.split_ratio: must lie in (0, 1)")
        if problems:
            raise ConfigError(problems)


def hash_json(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _coerce(value: Any, hint: Any, where: str, problems: list[str]) -> Any:
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where, problems)
    if origin is list:
        (item,) = typing.get_args(hint)
        if not isinstance(value, list):
            problems.append(f"{where}: expected a list")
            return value
        return [_coerce(v, item, f"{where}[{i}]", problems) for i, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            problems.append(f"{where}: expected true/false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}: expected a number")
            return value
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            problems.append(f"{where}: expected a string")
        return value
    return value


def _build(cls, data: Mapping, prefix: str, problems: list[str]):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            problems.append(f"{prefix}{key}: unknown key")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        hint = hints[f.name]
        value = data[f.name]
        if dataclasses.is_dataclass(hint):
            if not isinstance(value, Mapping):
                problems.append(f"{prefix}{f.name}: expected a mapping")
                continue
            kwargs[f.name] = _build(hint, value, f"{prefix}{f.name}.", problems)
        else:
            kwargs[f.name] = _coerce(value, hint, f"{prefix}{f.name}", problems)
    return cls(**kwargs)


def config_from_dict(data: Mapping | None) -> PipelineConfig:
    problems: list[str] = []
    cfg = _build(PipelineConfig, data or {}, "", problems)
    if problems:
        raise ConfigError(problems)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a YAML config; relative paths resolve against the file's directory."""
    if path is None:
        cfg = config_from_dict({})
        return cfg
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError(["top level: expected a mapping"])
    cfg = config_from_dict(data)
    base = path.resolve().parent
    given = (data or {}).get("paths") or {}
    for name in ("reviews", "businesses", "workdir", "stopwords", "lexicon"):
        if name not in given:
            continue
        value = getattr(cfg.paths, name)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg.paths, name, str(base / value))
    return cfg

"""Run configuration: one declarative file, overridden by command-line flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .client import LvlmClient, RetryPolicy
from .pipeline import Pipeline, PipelineSettings
from .prompts import DecodingConfig, Prompts, TemplateSet


@dataclass(frozen=True)
class RunConfig:
    endpoint: str = "http://127.0.0.1:8000/v1"
    model: str = "Qwen2-VL-7B-Instruct"
    embedding_model: Optional[str] = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_max: float = 8.0
    concurrency: int = 8
    cache_dir: Optional[str] = ".oocverify-cache"
    template_dir: Optional[str] = None
    textual_strategy: str = "lvlm"
    visual_strategy: str = "cosine"
    k: int = 1
    seed: int = 0
    balanced: bool = True
    failure_threshold: float = 0.01
    rerank_temperature: float = 0.0
    judgment_temperature: float = 0.0
    generation_temperature: float = 0.0
    generation_max_tokens: int = 256
    judgment_max_tokens: int = 128
    decode_seed: Optional[int] = None

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> "RunConfig":
        if path is None:
            return cls()
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must be a mapping")
        return cls().override(**data)

    def override(self, **values: Any) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def settings(self) -> PipelineSettings:
        return PipelineSettings(
            textual_strategy=self.textual_strategy,
            visual_strategy=self.visual_strategy,
            k=self.k,
            seed=self.seed,
            balanced=self.balanced,
            failure_threshold=self.failure_threshold,
            concurrency=self.concurrency,
        )

    def prompts(self) -> Prompts:
        decoding = DecodingConfig(
            model=self.model,
            rerank_temperature=self.rerank_temperature,
            judgment_temperature=self.judgment_temperature,
            generation_temperature=self.generation_temperature,
            generation_max_tokens=self.generation_max_tokens,
            judgment_max_tokens=self.judgment_max_tokens,
            seed=self.decode_seed,
        )
        return Prompts(TemplateSet.load(self.template_dir), decoding)

    def client(self) -> LvlmClient:
        policy = RetryPolicy(self.max_attempts, self.backoff_base, self.backoff_max)
        return LvlmClient(
            self.endpoint,
            self.model,
            timeout=self.timeout,
            cache=self.cache_dir,
            concurrency=self.concurrency,
            policy=policy,
            embedding_model=self.embedding_model,
            jitter_seed=self.seed,
        )

    def pipeline(self, client: LvlmClient | None = None) -> Pipeline:
        return Pipeline(client or self.client(), self.prompts(), self.settings())

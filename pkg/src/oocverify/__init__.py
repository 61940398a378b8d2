"""Evidence reranking, rewriting and instruction-dataset tooling for
out-of-context image-claim verification with vision-language models."""

from .client import ChatRequest, ChatResponse, LvlmClient, RetryPolicy
from .ingest import Corpus, load_manifest, save_manifest, split_fraction
from .model import (
    Embedding,
    Entry,
    EvidenceImage,
    EvidenceSelection,
    EvidenceSet,
    EvidenceText,
    Judgment,
    Label,
    RewrittenEvidence,
    Sample,
    Strategy,
    Verdict,
)
from .pipeline import InstructionDataset, Pipeline, PipelineSettings
from .prompts import Prompts, parse_judgment, parse_rerank_response

__version__ = "0.1.0"

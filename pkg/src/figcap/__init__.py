"""figcap: figure-caption summarization pipeline.

Chunk-level relevance filtering, prompt construction, consensus selection
over candidate captions, and the ROUGE/BLEU evaluation suite, with a batch
CLI and an HTTP protocol for external scorers and generators.
"""

from .ensemble import Candidate, CandidatePool, ConsensusResult, consensus_scores, select_caption
from .filtering import CacheScorer, filter_paragraph, fit_cache_scorer, relevance_ratio
from .metrics import MetricReport, RougeScore, bleu4, evaluate_corpus, rouge_n, rouge_n_normalized
from .prompts import PromptTemplate, PromptText, TemplateId, build_prompt
from .textkit import Chunk, ngrams, split_chunks, tokenize

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CandidatePool",
    "ConsensusResult",
    "CacheScorer",
    "Chunk",
    "MetricReport",
    "PromptTemplate",
    "PromptText",
    "RougeScore",
    "TemplateId",
    "bleu4",
    "build_prompt",
    "consensus_scores",
    "evaluate_corpus",
    "filter_paragraph",
    "fit_cache_scorer",
    "ngrams",
    "relevance_ratio",
    "rouge_n",
    "rouge_n_normalized",
    "select_caption",
    "split_chunks",
    "tokenize",
]

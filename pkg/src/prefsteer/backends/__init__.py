from .base import (
    ANCHOR_TAG,
    BASE_TAG,
    BackendCapabilities,
    Conditioning,
    ConditioningContext,
    PolicyBackend,
)
from .ngram import NGramBackend, tokenize_corpus
from .remote import RemoteBackend
from .table import TableBackend, context_key, load_table_fixture, load_vocab_fixture

__all__ = [
    "ANCHOR_TAG",
    "BASE_TAG",
    "BackendCapabilities",
    "Conditioning",
    "ConditioningContext",
    "PolicyBackend",
    "NGramBackend",
    "tokenize_corpus",
    "RemoteBackend",
    "TableBackend",
    "context_key",
    "load_table_fixture",
    "load_vocab_fixture",
]

"""varnamer: suggest better Java variable names with a two-stage masked LM.

The pipeline adapts plain code into rename records, trains a byte-pair
subword vocabulary and a small bidirectional encoder, predicts how many
sub-tokens the new name needs, then decodes that many distinct sub-tokens.
"""

__version__ = "0.1.0"

from .corpus import RefactoringRecord, adapt_record, load_corpus, save_corpus
from .bpe import SubwordVocab, decode, encode, tokenize_variable, train_bpe
from .javalex import VariableOccurrence, extract_variables
from .model import ModelConfig, ModelParams, forward, init_params
from .inference import Suggestion, suggest

__all__ = [
    "RefactoringRecord",
    "SubwordVocab",
    "VariableOccurrence",
    "ModelConfig",
    "ModelParams",
    "Suggestion",
    "adapt_record",
    "decode",
    "encode",
    "extract_variables",
    "forward",
    "init_params",
    "load_corpus",
    "save_corpus",
    "suggest",
    "tokenize_variable",
    "train_bpe",
]

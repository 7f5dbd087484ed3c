"""Masking schemes that turn refactoring records into model inputs.

Two schemes: every occurrence of the target name becomes either its full
run of [MASK] slots (token generation) or a single [NUM] placeholder
(length prediction, where the slot count would leak the answer). Code is
encoded segment-by-segment around the occurrences; the pre-splitting
tokenizer guarantees the concatenation equals encoding the whole text.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import bpe, javalex
from .bpe import CLS, MASK, NUM, SEP, SubwordVocab
from .corpus import RefactoringRecord
from .errors import NameTooLong, NameTruncated, VariableNotFound

SCHEME_CMLM = "cmlm"
SCHEME_NUM = "num"


@dataclass
class MaskedExample:
    """One training input: ids with CLS/SEP, grouped mask slots, targets."""

    input_ids: list[int]
    mask_positions: list[list[int]]   # one group per surviving occurrence
    target_ids: list[int]
    length_label: int
    scheme: str

    @property
    def flat_positions(self) -> list[int]:
        return [p for group in self.mask_positions for p in group]


def _segments(code: str, name: str) -> list[tuple[str, bool]]:
    """Split code into (text, is_occurrence) pieces around the name."""
    spans = javalex.find_identifier_occurrences(code, name)
    if not spans:
        raise VariableNotFound(f"{name!r} does not occur as an identifier")
    pieces: list[tuple[str, bool]] = []
    prev = 0
    for start, end in spans:
        if start > prev:
            pieces.append((code[prev:start], False))
        pieces.append((code[start:end], True))
        prev = end
    if prev < len(code):
        pieces.append((code[prev:], False))
    return pieces


def masked_sequence(
    vocab: SubwordVocab,
    code: str,
    name: str,
    scheme: str,
    slots: int,
    max_seq_len: int,
) -> tuple[list[int], list[list[int]]]:
    """Encode code with each occurrence of ``name`` replaced by mask slots.

    Returns the CLS-wrapped ids and the mask positions grouped per
    occurrence. Occurrences split by truncation are dropped along with
    everything after them; raises NameTruncated if none survive.
    """
    fill = [MASK] * slots if scheme == SCHEME_CMLM else [NUM]
    body: list[int] = []
    groups: list[list[int]] = []
    budget = max_seq_len - 2
    for text, is_occurrence in _segments(code, name):
        if is_occurrence:
            if len(body) + len(fill) > budget:
                break
            groups.append(list(range(len(body) + 1, len(body) + 1 + len(fill))))
            body.extend(fill)
        else:
            ids = bpe.encode(vocab, text)
            if len(body) + len(ids) > budget:
                body.extend(ids[:budget - len(body)])
                break
            body.extend(ids)
    if not groups:
        raise NameTruncated(
            f"no occurrence of {name!r} fits in the first {max_seq_len} tokens")
    return [CLS] + body + [SEP], groups


def encode_with_positions(
    vocab: SubwordVocab,
    code: str,
    name: str,
    max_seq_len: int,
) -> tuple[list[int], list[list[int]]]:
    """Encode code unmasked, reporting where the name's sub-tokens sit."""
    name_ids = bpe.encode(vocab, name)
    body: list[int] = []
    groups: list[list[int]] = []
    budget = max_seq_len - 2
    for text, is_occurrence in _segments(code, name):
        ids = name_ids if is_occurrence else bpe.encode(vocab, text)
        if len(body) + len(ids) > budget:
            if not is_occurrence:
                body.extend(ids[:budget - len(body)])
            break
        if is_occurrence:
            groups.append(list(range(len(body) + 1, len(body) + 1 + len(ids))))
        body.extend(ids)
    if not groups:
        raise NameTruncated(
            f"no occurrence of {name!r} fits in the first {max_seq_len} tokens")
    return [CLS] + body + [SEP], groups


def _apply_mask(
    vocab: SubwordVocab,
    record: RefactoringRecord,
    scheme: str,
    max_seq_len: int,
    max_name_tokens: int,
) -> MaskedExample:
    target_ids = bpe.encode(vocab, record.variable_after)
    g = len(target_ids)
    if g > max_name_tokens:
        raise NameTooLong(
            f"record {record.id}: name has {g} sub-tokens > {max_name_tokens}")
    slots = g if scheme == SCHEME_CMLM else 1
    input_ids, groups = masked_sequence(
        vocab, record.code_after, record.variable_after, scheme, slots, max_seq_len)
    return MaskedExample(
        input_ids=input_ids,
        mask_positions=groups,
        target_ids=target_ids,
        length_label=g,
        scheme=scheme,
    )


def apply_cmlm_mask(
    vocab: SubwordVocab,
    record: RefactoringRecord,
    max_seq_len: int = 512,
    max_name_tokens: int = 5,
) -> MaskedExample:
    """Replace every occurrence of the target name with its g mask slots."""
    return _apply_mask(vocab, record, SCHEME_CMLM, max_seq_len, max_name_tokens)


def apply_num_mask(
    vocab: SubwordVocab,
    record: RefactoringRecord,
    max_seq_len: int = 512,
    max_name_tokens: int = 5,
) -> MaskedExample:
    """Replace every occurrence with a single [NUM] placeholder so the
    input carries no information about the sub-token count."""
    return _apply_mask(vocab, record, SCHEME_NUM, max_seq_len, max_name_tokens)


def restore_targets(example: MaskedExample) -> list[int]:
    """Write the target ids back into the mask slots (generation scheme only)."""
    if example.scheme != SCHEME_CMLM:
        raise ValueError("only generation-scheme examples can be restored")
    ids = list(example.input_ids)
    for group in example.mask_positions:
        for position, target in zip(group, example.target_ids):
            ids[position] = target
    return ids

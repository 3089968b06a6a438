"""Word-level vocabulary and batch encoding.

Word-level tokens keep the token/label bijection exact, so no subword
alignment is needed. Padding is dynamic per batch, capped at 256.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .data import MAX_SAMPLE_LEN, AddressSample, TagSchema
from .errors import EmptyTrain, TooLong

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
IGNORE_TAG_ID = -1


@dataclass(frozen=True)
class Vocabulary:
    token_to_id: Dict[str, int]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def content_hash(self) -> str:
        import hashlib

        return hashlib.sha256(dump_vocab(self).encode("utf-8")).hexdigest()


def build_vocab(train: Sequence[AddressSample], min_count: int = 1) -> Vocabulary:
    """Frequency-thresholded vocabulary over the training split only.

    Tokens are ordered by descending count then lexicographically, after the
    reserved PAD and UNK entries, so ids are deterministic.
    """
    if not train:
        raise EmptyTrain("vocabulary needs a non-empty training split")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Dict[str, int] = {}
    for sample in train:
        for token in sample.tokens:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    mapping = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for token in kept:
        mapping[token] = len(mapping)
    return Vocabulary(mapping)


def dump_vocab(vocab: Vocabulary) -> str:
    lines = sorted(vocab.token_to_id.items(), key=lambda kv: kv[1])
    return "".join(f"{t}\t{i}\n" for t, i in lines)


def load_vocab(text: str) -> Vocabulary:
    mapping: Dict[str, int] = {}
    for raw in text.splitlines():
        if not raw.strip():
            continue
        token, _, ident = raw.partition("\t")
        mapping[token] = int(ident)
    return Vocabulary(mapping)


@dataclass
class Batch:
    """Padded id matrices: [B, L] token ids, tag ids, and a 0/1 mask."""

    token_ids: np.ndarray
    tag_ids: np.ndarray
    mask: np.ndarray

    @property
    def n_tokens(self) -> int:
        return int(self.mask.sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.token_ids.shape


def encode_batch(samples: Sequence[AddressSample], vocab: Vocabulary,
                 schema: TagSchema) -> Batch:
    """Numericalize and pad a list of samples to the batch maximum length."""
    if not samples:
        raise ValueError("cannot encode an empty batch")
    longest = max(len(s) for s in samples)
    if longest > MAX_SAMPLE_LEN:
        raise TooLong(f"sample of length {longest} exceeds cap {MAX_SAMPLE_LEN}")
    tag_index = schema.tag_index
    B, L = len(samples), longest
    token_ids = np.full((B, L), PAD_ID, dtype=np.int64)
    tag_ids = np.full((B, L), IGNORE_TAG_ID, dtype=np.int64)
    mask = np.zeros((B, L), dtype=np.float64)
    for i, s in enumerate(samples):
        n = len(s)
        token_ids[i, :n] = [vocab.encode(t) for t in s.tokens]
        tag_ids[i, :n] = [tag_index[t] for t in s.tags]
        mask[i, :n] = 1.0
    return Batch(token_ids=token_ids, tag_ids=tag_ids, mask=mask)


def decode_batch(batch: Batch, schema: TagSchema) -> List[Tuple[List[int], List[str]]]:
    """Recover (token ids, tag names) per row, trimmed to the mask."""
    tags = schema.tags
    out = []
    for i in range(batch.token_ids.shape[0]):
        n = int(batch.mask[i].sum())
        ids = batch.token_ids[i, :n].tolist()
        names = [tags[t] for t in batch.tag_ids[i, :n].tolist()]
        out.append((ids, names))
    return out

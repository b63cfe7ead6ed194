"""Sentence vectorization backends: bag-of-words, letter-trigram hashing,
and word-embedding mean pooling.

All backends are immutable after construction and safe for concurrent
read-only use. Entry lists are kept sorted by byte order so that
serialized vocabularies are identical across platforms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

#: maximal runs of letters/digits; underscore and everything else separates
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

VECTORIZER_KINDS = ("bow", "hashing", "word2vec")


@dataclass(frozen=True)
class Sentence:
    """A raw sentence with a stable identifier."""

    id: str
    text: str


@dataclass(frozen=True)
class SentenceVector:
    """Fixed-length vectorizer output; counts are stored as floats."""

    values: np.ndarray
    kind: str

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every character that is not a letter or digit.

    Empty tokens are discarded; order is preserved. An empty input yields
    an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


def letter_trigrams(word: str) -> list[str]:
    """All consecutive 3-character windows of ``'#' + word + '#'``.

    Duplicates are kept and order follows the padded string, so a word of
    length n yields exactly n trigrams.
    """
    if not word:
        raise ValueError("cannot take letter trigrams of an empty word")
    padded = "#" + word + "#"
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def _check_sorted_unique(entries: Sequence[str], what: str) -> None:
    for a, b in zip(entries, entries[1:]):
        if a >= b:
            raise ValueError(f"{what} entries must be strictly ascending: {a!r} before {b!r}")


class Vocabulary:
    """Sorted list of distinct lowercase words plus its inverse index."""

    def __init__(self, words: Iterable[str]):
        words = list(words)
        if not words:
            raise ValueError("vocabulary is empty")
        _check_sorted_unique(words, "vocabulary")
        self.words: list[str] = words
        self.index: dict[str, int] = {w: i for i, w in enumerate(words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.words == other.words


class TrigramIndex:
    """Sorted list of distinct letter trigrams plus its inverse index."""

    def __init__(self, trigrams: Iterable[str]):
        trigrams = list(trigrams)
        if not trigrams:
            raise ValueError("trigram index is empty")
        for t in trigrams:
            if len(t) != 3:
                raise ValueError(f"trigram {t!r} is not 3 characters long")
        _check_sorted_unique(trigrams, "trigram index")
        self.trigrams: list[str] = trigrams
        self.index: dict[str, int] = {t: i for i, t in enumerate(trigrams)}

    def __len__(self) -> int:
        return len(self.trigrams)

    def __contains__(self, trigram: str) -> bool:
        return trigram in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, TrigramIndex) and self.trigrams == other.trigrams


class WordEmbeddingTable:
    """Word to dense-vector map with a single fixed dimensionality."""

    def __init__(self, dim: int, entries: dict[str, np.ndarray]):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not entries:
            raise ValueError("embedding table is empty")
        for word, vec in entries.items():
            if vec.shape != (dim,):
                raise ValueError(f"embedding for {word!r} has length {vec.shape[0]}, expected {dim}")
        self.dim = dim
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries


VectorizerBackend = Union[Vocabulary, TrigramIndex, WordEmbeddingTable]


def build_vocab(sentences: Sequence[Sentence]) -> Vocabulary:
    """Collect every token of the corpus, with no frequency cutoff."""
    if not sentences:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    seen: set[str] = set()
    for s in sentences:
        seen.update(tokenize(s.text))
    if not seen:
        raise ValueError("no token survived tokenization; vocabulary would be empty")
    return Vocabulary(sorted(seen))


def build_trigram_index(sentences: Sequence[Sentence]) -> TrigramIndex:
    """Collect every letter trigram of every token of the corpus."""
    if not sentences:
        raise ValueError("cannot build a trigram index from an empty corpus")
    seen: set[str] = set()
    for s in sentences:
        for token in tokenize(s.text):
            seen.update(letter_trigrams(token))
    if not seen:
        raise ValueError("no token survived tokenization; trigram index would be empty")
    return TrigramIndex(sorted(seen))


def vectorize_bow(sentence: Sentence, vocab: Vocabulary) -> SentenceVector:
    """Count occurrences of each vocabulary word; unknown words contribute nothing."""
    values = np.zeros(len(vocab), dtype=np.float64)
    hits = 0
    for token in tokenize(sentence.text):
        pos = vocab.index.get(token)
        if pos is not None:
            values[pos] += 1.0
            hits += 1
    if hits == 0:
        raise ValueError(f"sentence {sentence.id!r} has no in-vocabulary token")
    return SentenceVector(values, "bow")


def vectorize_hashing(sentence: Sentence, index: TrigramIndex) -> SentenceVector:
    """Count indexed letter trigrams over all tokens; unseen trigrams are ignored."""
    values = np.zeros(len(index), dtype=np.float64)
    hits = 0
    for token in tokenize(sentence.text):
        for trigram in letter_trigrams(token):
            pos = index.index.get(trigram)
            if pos is not None:
                values[pos] += 1.0
                hits += 1
    if hits == 0:
        raise ValueError(f"sentence {sentence.id!r} has no trigram present in the index")
    return SentenceVector(values, "hashing")


def vectorize_w2v(sentence: Sentence, table: WordEmbeddingTable) -> SentenceVector:
    """Mean-pool the embeddings of in-table tokens.

    Out-of-table tokens are excluded from both the sum and the
    denominator, so a sentence with a single known word maps exactly to
    that word's embedding.
    """
    total = np.zeros(table.dim, dtype=np.float64)
    count = 0
    for token in tokenize(sentence.text):
        vec = table.entries.get(token)
        if vec is not None:
            total += vec
            count += 1
    if count == 0:
        raise ValueError(f"sentence {sentence.id!r} has no token in the embedding table")
    return SentenceVector(total / count, "word2vec")


def vectorize(sentence: Sentence, kind: str, backend: VectorizerBackend) -> SentenceVector:
    """Dispatch to the vectorizer named by ``kind``."""
    if kind == "bow":
        return vectorize_bow(sentence, backend)
    if kind == "hashing":
        return vectorize_hashing(sentence, backend)
    if kind == "word2vec":
        return vectorize_w2v(sentence, backend)
    raise ValueError(f"unknown vectorizer kind {kind!r}")


def backend_dim(kind: str, backend: VectorizerBackend) -> int:
    """Dimensionality of the vectors a backend produces."""
    if kind in ("bow", "hashing"):
        return len(backend)
    if kind == "word2vec":
        return backend.dim
    raise ValueError(f"unknown vectorizer kind {kind!r}")


def load_embeddings(source: Union[str, TextIO]) -> WordEmbeddingTable:
    """Parse a word2vec-style text file.

    Line 1 is ``"<count> <dim>"``; each following line is a word followed
    by ``dim`` decimal floats, all space separated.
    """
    if hasattr(source, "read"):
        return _parse_embeddings(source)
    with open(source, "r", encoding="utf-8") as fh:
        return _parse_embeddings(fh)


def _parse_embeddings(fh: TextIO) -> WordEmbeddingTable:
    header = fh.readline()
    fields = header.split()
    if len(fields) != 2:
        raise ValueError(f"malformed embedding header: {header.strip()!r}")
    try:
        count, dim = int(fields[0]), int(fields[1])
    except ValueError:
        raise ValueError(f"malformed embedding header: {header.strip()!r}") from None
    if count < 1 or dim < 1:
        raise ValueError(f"embedding header must declare positive count and dim, got {count} {dim}")

    entries: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        parts = line.split()
        word = parts[0]
        if len(parts) - 1 != dim:
            raise ValueError(
                f"line {lineno}: embedding for {word!r} has {len(parts) - 1} values, expected {dim}"
            )
        if word in entries:
            raise ValueError(f"line {lineno}: duplicate word {word!r}")
        entries[word] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    if len(entries) != count:
        raise ValueError(f"header declares {count} entries but file has {len(entries)}")
    return WordEmbeddingTable(dim, entries)

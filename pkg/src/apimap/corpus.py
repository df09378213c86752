"""Corpus ingestion: token normalization, signature tables, and vocabulary building.

A corpus is a plain text file with one code sequence per line, tokens separated
by spaces. Tokens are either raw API names (mapped to qualified signatures via a
signature table), keywords / AST node labels (passed through), or noise (dropped).
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

from .errors import FormatError

# A code sequence is an ordered list of non-empty, whitespace-free tokens.
CodeSequence = list[str]


@dataclass(frozen=True)
class SignatureTable:
    """Lookup table mapping raw API tokens to qualified dotted signatures.

    ``entries`` maps raw tokens (e.g. ``List.add``) to qualified signatures
    (e.g. ``java.util.List.add``). ``keywords`` holds tokens passed through
    unchanged (language keywords and AST node-type labels). Tokens found in
    neither set are treated as noise and dropped.
    """

    entries: dict[str, str]
    keywords: frozenset[str] = frozenset()
    # Signature values pass through unchanged so normalization is idempotent.
    _qualified: frozenset[str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for raw, sig in self.entries.items():
            if not raw or any(c.isspace() for c in raw):
                raise FormatError(f"bad raw token {raw!r}")
            if sig.count(".") < 1 or any(c.isspace() for c in sig) or "" in sig.split("."):
                raise FormatError(
                    f"signature {sig!r} for {raw!r} is not a dotted qualified name"
                )
        object.__setattr__(self, "_qualified", frozenset(self.entries.values()))

    def resolve(self, token: str) -> str | None:
        """Map one token; None means the token is noise."""
        mapped = self.entries.get(token)
        if mapped is not None:
            return mapped
        if token in self.keywords or token in self._qualified:
            return token
        return None


class Vocabulary:
    """Token table with dense indices assigned by descending corpus frequency.

    Ties are broken lexicographically so index assignment is deterministic.
    """

    def __init__(self, tokens: list[str], counts: Iterable[int]):
        self.tokens = list(tokens)
        self.counts = [int(c) for c in counts]
        if len(self.tokens) != len(self.counts):
            raise ValueError("tokens and counts length mismatch")
        self._index = {t: i for i, t in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")

    @classmethod
    def from_counts(cls, counts: dict[str, int], min_count: int = 1) -> "Vocabulary":
        """Build a vocabulary from raw counts, dropping tokens below min_count."""
        if min_count < 1:
            raise ValueError("min_count must be >= 1")
        kept = [(t, c) for t, c in counts.items() if c >= min_count]
        kept.sort(key=lambda tc: (-tc[1], tc[0]))
        return cls([t for t, _ in kept], [c for _, c in kept])

    def index(self, token: str) -> int:
        return self._index[token]

    def count(self, token: str) -> int:
        return self.counts[self._index[token]]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Vocabulary({len(self)} tokens)"


def normalize_sequence(seq: CodeSequence, table: SignatureTable) -> tuple[CodeSequence, int]:
    """Normalize one code sequence against a signature table.

    Returns ``(normalized, dropped)`` where ``dropped`` counts noise tokens
    removed. Keeps relative order; idempotent on already-normalized input.
    """
    out: CodeSequence = []
    dropped = 0
    for token in seq:
        mapped = table.resolve(token)
        if mapped is None:
            dropped += 1
        else:
            out.append(mapped)
    return out, dropped


def to_class_level(seq: CodeSequence) -> CodeSequence:
    """Truncate qualified method signatures to their package-and-class prefix.

    The class segment is the last capitalized segment before the final (method)
    segment. Keywords, AST labels, and tokens without a recognizable class
    segment are left unchanged.
    """
    out: CodeSequence = []
    for token in seq:
        parts = token.split(".")
        if len(parts) >= 3:
            cls_idx = None
            for i in range(len(parts) - 2, -1, -1):
                if parts[i][:1].isupper():
                    cls_idx = i
                    break
            if cls_idx is not None:
                token = ".".join(parts[: cls_idx + 1])
        out.append(token)
    return out


def build_vocabulary(corpus: Iterable[CodeSequence], min_count: int = 1) -> Vocabulary:
    """Count tokens over the corpus and build a frequency-ordered vocabulary."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for seq in corpus:
        counts.update(seq)
    if not counts:
        raise ValueError("empty corpus")
    return Vocabulary.from_counts(counts, min_count)


def read_corpus(path: str) -> Iterator[CodeSequence]:
    """Stream code sequences from a one-sequence-per-line UTF-8 text file.

    Blank lines yield empty sequences so line numbering is preserved.
    """
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            yield line.split()


def load_signature_table(entries_path: str, keywords_path: str | None = None) -> SignatureTable:
    """Load a signature table from a TSV file plus an optional keyword list.

    The TSV has two columns, ``raw_token<TAB>qualified_signature``. Raw tokens
    mapping to more than one signature are ambiguous and rejected.
    """
    entries: dict[str, str] = {}
    with open(entries_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                raise FormatError(f"{entries_path}:{lineno}: expected 2 tab-separated columns")
            raw, sig = cols
            if raw in entries and entries[raw] != sig:
                raise FormatError(
                    f"{entries_path}:{lineno}: ambiguous raw token {raw!r} "
                    f"({entries[raw]!r} vs {sig!r})"
                )
            entries[raw] = sig
    keywords: set[str] = set()
    if keywords_path is not None:
        with open(keywords_path, encoding="utf-8") as fh:
            for line in fh:
                word = line.strip()
                if word:
                    keywords.add(word)
    try:
        return SignatureTable(entries, frozenset(keywords))
    except FormatError as exc:
        raise FormatError(f"{entries_path}: {exc}") from exc

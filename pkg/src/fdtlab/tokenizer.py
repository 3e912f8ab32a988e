"""Word-piece vocabulary, lexicon, and tokenization.

The piece vocabulary reserves id 0 for the blank symbol. Word boundaries are
never marked inside pieces; a tokenized utterance keeps them as spans over the
piece sequence instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import (
    BlankInLexiconError,
    DataError,
    DuplicatePieceError,
    EmptyLexiconEntryError,
    SpanOutOfRangeError,
    UnknownPieceError,
    UntokenizableWordError,
)

BLANK_SYMBOL = "<blk>"
BLANK_ID = 0


@dataclass(frozen=True)
class PieceVocab:
    """Ordered piece inventory; index in `pieces` is the piece id.

    pieces[0] is the blank symbol, so the number of real pieces is
    len(pieces) - 1 and real ids are contiguous 1..n_pieces.
    """

    pieces: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.pieces or self.pieces[0] != BLANK_SYMBOL:
            raise DataError(f"piece vocabulary must start with {BLANK_SYMBOL!r}")
        seen: set[str] = set()
        for piece in self.pieces:
            if piece in seen:
                raise DuplicatePieceError(f"duplicate piece string {piece!r}")
            seen.add(piece)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces) - 1

    def piece_id(self, piece: str) -> int:
        try:
            return self.pieces.index(piece)
        except ValueError:
            raise UnknownPieceError(f"piece {piece!r} not in vocabulary") from None

    def piece_string(self, piece_id: int) -> str:
        if not 0 <= piece_id < len(self.pieces):
            raise DataError(f"piece id {piece_id} out of range")
        return self.pieces[piece_id]


@dataclass(frozen=True)
class Lexicon:
    """Word -> piece-id sequence map; entries are non-empty and blank-free."""

    entries: dict[str, tuple[int, ...]]

    def __post_init__(self) -> None:
        for word, ids in self.entries.items():
            if not ids:
                raise EmptyLexiconEntryError(f"lexicon entry {word!r} has no pieces")
            if BLANK_ID in ids:
                raise BlankInLexiconError(f"lexicon entry {word!r} references blank")


@dataclass(frozen=True)
class TokenizedUtterance:
    """Words with their flattened piece ids and per-word spans.

    word_spans[k] = (start, stop) indexes pieces[start:stop] for word k; the
    spans tile the piece sequence contiguously and are all non-empty.
    """

    words: tuple[str, ...]
    pieces: tuple[int, ...]
    word_spans: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.words) != len(self.word_spans):
            raise SpanOutOfRangeError("one span per word required")
        cursor = 0
        for start, stop in self.word_spans:
            if start != cursor or stop <= start or stop > len(self.pieces):
                raise SpanOutOfRangeError(
                    f"span ({start}, {stop}) does not tile pieces of length {len(self.pieces)}"
                )
            cursor = stop
        if cursor != len(self.pieces):
            raise SpanOutOfRangeError("spans do not cover the piece sequence")

    def word_pieces(self, k: int) -> tuple[int, ...]:
        start, stop = self.word_spans[k]
        return self.pieces[start:stop]


def load_vocab(path: str | Path) -> PieceVocab:
    """Load a vocabulary file: one piece per line, line number = piece id."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pieces = tuple(line.strip() for line in lines if line.strip())
    if not pieces:
        raise DataError(f"{path}: empty vocabulary file")
    return PieceVocab(pieces)


def save_vocab(vocab: PieceVocab, path: str | Path) -> None:
    Path(path).write_text("\n".join(vocab.pieces) + "\n", encoding="utf-8")


def load_lexicon(path: str | Path, vocab: PieceVocab) -> Lexicon:
    """Load a lexicon file: `word TAB space-separated piece strings` per line."""
    entries: dict[str, tuple[int, ...]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{path}:{lineno}: expected `word<TAB>pieces`")
        word, piece_field = line.split("\t", 1)
        word = word.strip()
        piece_strings = piece_field.split()
        if not word or not piece_strings:
            raise EmptyLexiconEntryError(f"{path}:{lineno}: empty word or piece list")
        if word in entries:
            raise DataError(f"{path}:{lineno}: duplicate lexicon word {word!r}")
        if BLANK_SYMBOL in piece_strings:
            raise BlankInLexiconError(f"{path}:{lineno}: blank symbol in entry {word!r}")
        entries[word] = tuple(vocab.piece_id(p) for p in piece_strings)
    return Lexicon(entries)


def save_lexicon(lexicon: Lexicon, vocab: PieceVocab, path: str | Path) -> None:
    lines = []
    for word, ids in lexicon.entries.items():
        lines.append(word + "\t" + " ".join(vocab.piece_string(i) for i in ids))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _greedy_pieces(word: str, vocab: PieceVocab) -> tuple[int, ...]:
    """Longest-match-first segmentation of `word` into vocabulary pieces."""
    index = {piece: i for i, piece in enumerate(vocab.pieces) if i != BLANK_ID}
    ids: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while end > start:
            match = index.get(word[start:end])
            if match is not None:
                break
            end -= 1
        if match is None:
            raise UntokenizableWordError(
                f"word {word!r} has no piece covering position {start}"
            )
        ids.append(match)
        start = end
    return tuple(ids)


def tokenize(words: list[str] | tuple[str, ...], lexicon: Lexicon, vocab: PieceVocab) -> TokenizedUtterance:
    """Map words to piece ids via the lexicon, greedy-matching any OOV word."""
    pieces: list[int] = []
    spans: list[tuple[int, int]] = []
    for word in words:
        ids = lexicon.entries.get(word)
        if ids is None:
            ids = _greedy_pieces(word, vocab)
        spans.append((len(pieces), len(pieces) + len(ids)))
        pieces.extend(ids)
    return TokenizedUtterance(tuple(words), tuple(pieces), tuple(spans))


def detokenize(
    pieces: tuple[int, ...],
    word_spans: tuple[tuple[int, int], ...],
    vocab: PieceVocab,
) -> tuple[str, ...]:
    """Rebuild word strings by concatenating each span's piece strings."""
    words = []
    for start, stop in word_spans:
        if not (0 <= start < stop <= len(pieces)):
            raise SpanOutOfRangeError(f"span ({start}, {stop}) out of range")
        words.append("".join(vocab.piece_string(i) for i in pieces[start:stop]))
    return tuple(words)


def words_from_pieces(
    pieces: tuple[int, ...], lexicon: Lexicon, vocab: PieceVocab
) -> tuple[str, ...]:
    """Parse a bare piece-id sequence back into words.

    Decoded hypotheses carry no word boundaries, so this finds a deterministic
    segmentation into lexicon entries: minimize the number of unknown pieces,
    then the number of words, preferring the longest entry at each position.
    A piece no entry explains becomes a single-piece pseudo-word (its string).
    """
    if not pieces:
        return ()
    by_prefix: dict[int, list[tuple[int, tuple[int, ...], str]]] = {}
    seen: set[tuple[int, ...]] = set()
    for word, ids in lexicon.entries.items():
        if ids in seen:
            continue  # first entry wins for duplicate piece sequences
        seen.add(ids)
        by_prefix.setdefault(ids[0], []).append((len(ids), ids, word))
    for options in by_prefix.values():
        options.sort(key=lambda item: -item[0])

    n = len(pieces)
    inf = (n + 1, n + 1)
    # cost[i] = (unknown pieces, words) for the best parse of pieces[i:]
    cost: list[tuple[int, int]] = [inf] * (n + 1)
    cost[n] = (0, 0)
    choice: list[tuple[int, str] | None] = [None] * (n + 1)
    for i in range(n - 1, -1, -1):
        best = None
        for length, ids, word in by_prefix.get(pieces[i], []):
            if i + length <= n and pieces[i : i + length] == ids:
                unk, words = cost[i + length]
                candidate = ((unk, words + 1), length, word)
                if best is None or candidate[0] < best[0] or (
                    candidate[0] == best[0] and candidate[1] > best[1]
                ):
                    best = candidate
        unk, words = cost[i + 1]
        fallback = ((unk + 1, words + 1), 1, vocab.piece_string(pieces[i]))
        if best is None or fallback[0] < best[0]:
            best = fallback
        cost[i] = best[0]
        choice[i] = (best[1], best[2])
    out: list[str] = []
    i = 0
    while i < n:
        length, word = choice[i]  # type: ignore[misc]
        out.append(word)
        i += length
    return tuple(out)

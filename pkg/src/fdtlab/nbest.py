"""CTC prefix beam search and N-best posteriors.

Each beam entry is a collapsed prefix with its probability mass split into
paths ending in blank and paths ending in the prefix's last piece; a prefix's
score is the log of the summed mass, i.e. the exact probability of every kept
path whose collapse equals the prefix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import LogPosteriorGrid
from .numerics import NEG_INF, lae, logsumexp


@dataclass(frozen=True)
class Hypothesis:
    """A collapsed piece sequence with its total log probability."""

    pieces: tuple[int, ...]
    log_score: float

    def __post_init__(self) -> None:
        if 0 in self.pieces:
            raise ValueError("hypothesis pieces must not contain blank")
        if self.log_score > 1e-6:
            raise ValueError(f"log_score {self.log_score} above 0")


@dataclass(frozen=True)
class NBestList:
    """Hypotheses sorted by descending score with normalized posteriors."""

    hyps: tuple[Hypothesis, ...]
    posteriors: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.hyps) != len(self.posteriors) or not self.hyps:
            raise ValueError("need one posterior per hypothesis")
        if abs(sum(self.posteriors) - 1.0) > 1e-9:
            raise ValueError("posteriors must sum to 1")


def _rank_key(item: tuple[tuple[int, ...], float]):
    """Sort by descending score; ties: shorter prefix, then lexicographic ids."""
    prefix, score = item
    return (-score, len(prefix), prefix)


def prefix_beam_search(grid: LogPosteriorGrid, beam: int = 16, n: int = 4) -> list[Hypothesis]:
    """Top-n distinct collapsed sequences (the empty sequence included)."""
    if beam < 1 or n < 1:
        raise ValueError("beam and n must be >= 1")
    lp = grid.values
    n_symbols = grid.n_symbols
    # prefix -> [log mass ending in blank, log mass ending in last piece]
    beams: dict[tuple[int, ...], list[float]] = {(): [0.0, NEG_INF]}
    for t in range(grid.n_frames):
        row = lp[t]
        blank_lp = float(row[0])
        nxt: dict[tuple[int, ...], list[float]] = {}
        for prefix, (p_blank, p_piece) in beams.items():
            total = lae(p_blank, p_piece)
            entry = nxt.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF]
                nxt[prefix] = entry
            entry[0] = lae(entry[0], total + blank_lp)
            last = prefix[-1] if prefix else 0
            for c in range(1, n_symbols):
                score = float(row[c])
                if c == last:
                    # same piece again extends the run inside this prefix...
                    entry[1] = lae(entry[1], p_piece + score)
                    # ...and only mass through a blank starts a new occurrence
                    grow = p_blank + score
                else:
                    grow = total + score
                longer = prefix + (c,)
                entry2 = nxt.get(longer)
                if entry2 is None:
                    entry2 = [NEG_INF, NEG_INF]
                    nxt[longer] = entry2
                entry2[1] = lae(entry2[1], grow)
        scored = [(prefix, lae(pb, pp)) for prefix, (pb, pp) in nxt.items()]
        scored.sort(key=_rank_key)
        beams = {prefix: nxt[prefix] for prefix, _ in scored[:beam]}
    final = [(prefix, lae(pb, pp)) for prefix, (pb, pp) in beams.items()]
    final.sort(key=_rank_key)
    return [Hypothesis(prefix, score) for prefix, score in final[:n]]


def nbest_posteriors(hyps: list[Hypothesis]) -> NBestList:
    """Normalize hypothesis scores into posteriors over the list."""
    if not hyps:
        raise ValueError("empty hypothesis list")
    ordered = sorted(hyps, key=lambda h: (-h.log_score, len(h.pieces), h.pieces))
    scores = np.array([h.log_score for h in ordered])
    log_post = scores - logsumexp(scores)
    return NBestList(tuple(ordered), tuple(np.exp(log_post)))

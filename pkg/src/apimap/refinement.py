"""Iterative refinement: rebuild synthetic dictionaries, re-solve, repeat.

Candidate pairs come from two heuristics over the currently aligned spaces,
nearest neighbors of the most frequent source tokens and nearest neighbors
above a cosine threshold. Combined candidates feed a closed-form orthogonal
re-solve; the loop keeps the best-scoring snapshot under the unsupervised
selection criterion.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .adversarial import selection_criterion
from .embedding import EmbeddingSpace
from .seeding import (
    MappingMatrix,
    STAGE_REFINED,
    SeedDictionary,
    _sign_fixed_svd,
    seed_matrices,
    solve_procrustes,
)

log = logging.getLogger(__name__)


@dataclass
class RefineConfig:
    """Refinement hyperparameters."""

    topk: int = 500
    threshold: float = 0.7
    mode: str = "intersection"
    max_iters: int = 5
    patience: int = 1
    mutual_nn: bool = True
    selection_topk: int = 1000

    def __post_init__(self) -> None:
        if self.topk < 1:
            raise ValueError("topk must be >= 1")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        if self.mode not in ("union", "intersection"):
            raise ValueError("mode must be 'union' or 'intersection'")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.selection_topk < 1:
            raise ValueError("selection_topk must be >= 1")


def _aligned_units(
    w: MappingMatrix | np.ndarray, src: EmbeddingSpace, tgt: EmbeddingSpace
) -> tuple[np.ndarray, np.ndarray]:
    m = w.w if isinstance(w, MappingMatrix) else np.asarray(w)
    mapped = src.vectors @ m.T
    norms = np.linalg.norm(mapped, axis=1, keepdims=True)
    mapped = mapped / np.where(norms > 0, norms, 1.0)
    return mapped, tgt.unit_vectors


def candidates_topk_frequency(
    w: MappingMatrix | np.ndarray,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    k: int,
    mutual_nn: bool = True,
) -> SeedDictionary:
    """Pair each of the k most frequent source tokens with its nearest neighbor.

    With ``mutual_nn`` a pair survives only if the source is in turn the
    nearest mapped source of its chosen target, the standard quality filter
    for synthetic dictionaries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mapped, tgt_unit = _aligned_units(w, src, tgt)
    k = min(k, len(src))
    sims = mapped[:k] @ tgt_unit.T
    nn = sims.argmax(axis=1)
    keep = np.ones(k, dtype=bool)
    if mutual_nn:
        # best mapped source for each chosen target, searched over all sources
        back = mapped @ tgt_unit[nn].T
        keep = back.argmax(axis=0) == np.arange(k)
    pairs = tuple(
        (src.vocab.tokens[i], tgt.vocab.tokens[nn[i]]) for i in range(k) if keep[i]
    )
    return SeedDictionary(pairs)


def candidates_cosine_threshold(
    w: MappingMatrix | np.ndarray,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    threshold: float,
) -> SeedDictionary:
    """All (source, nearest neighbor) pairs with cosine at or above the threshold.

    Not every API has a counterpart, so an empty dictionary is a legitimate
    outcome at high thresholds.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    mapped, tgt_unit = _aligned_units(w, src, tgt)
    sims = mapped @ tgt_unit.T
    nn = sims.argmax(axis=1)
    best = sims[np.arange(len(src)), nn]
    pairs = tuple(
        (src.vocab.tokens[i], tgt.vocab.tokens[nn[i]])
        for i in range(len(src))
        if best[i] >= threshold
    )
    return SeedDictionary(pairs)


def combine_candidates(
    a: SeedDictionary, b: SeedDictionary, mode: str
) -> SeedDictionary:
    """Set union or intersection of two candidate dictionaries.

    Order is stable: a's pairs first, then (for union) b's novel pairs.
    """
    if mode == "intersection":
        b_set = set(b.pairs)
        return SeedDictionary(tuple(p for p in a.pairs if p in b_set))
    if mode == "union":
        a_set = set(a.pairs)
        return SeedDictionary(a.pairs + tuple(p for p in b.pairs if p not in a_set))
    raise ValueError("mode must be 'union' or 'intersection'")


def _dedup_by_source(
    pairs: SeedDictionary,
    w: np.ndarray,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
) -> SeedDictionary:
    """Keep one pair per source token, the one with the highest similarity,
    so the re-solve is not dominated by a single hub."""
    mapped, tgt_unit = _aligned_units(w, src, tgt)
    best: dict[str, tuple[float, str]] = {}
    order: list[str] = []
    for s, t in pairs:
        sim = float(mapped[src.vocab.index(s)] @ tgt_unit[tgt.vocab.index(t)])
        if s not in best:
            order.append(s)
            best[s] = (sim, t)
        elif sim > best[s][0]:
            best[s] = (sim, t)
    return SeedDictionary(tuple((s, best[s][1]) for s in order))


@dataclass
class RefineStep:
    """Per-iteration report row."""

    iteration: int
    candidates: int
    criterion: float


def write_refine_report(steps: list[RefineStep], path: str) -> None:
    """Write the per-iteration CSV report: iter, candidates, criterion."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["iter", "candidates", "criterion"])
        for step in steps:
            out.writerow([step.iteration, step.candidates, f"{step.criterion:.6f}"])


def _orthogonal_part(w: np.ndarray) -> np.ndarray:
    """Nearest orthogonal matrix (polar factor via SVD)."""
    u, _, vt = _sign_fixed_svd(w)
    return u @ vt


def refine(
    w2: MappingMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    cfg: RefineConfig,
    report: list[RefineStep] | None = None,
) -> MappingMatrix:
    """Iteratively re-solve the mapping on synthetic candidate dictionaries.

    Each iteration builds candidates under the current W, solves the orthogonal
    alignment on them, and scores it with the selection criterion. The loop
    stops after ``max_iters`` iterations, after ``patience`` iterations without
    improvement, or when the candidate set comes up empty. The best-scoring
    snapshot is returned; with no iterations at all (max_iters=0), the input is
    returned unchanged. The fallback comparison baseline is the orthogonal part
    of the input, so any actually-refined result is always orthogonal.
    """
    if w2.dim != src.dim or src.dim != tgt.dim:
        raise ValueError(
            f"dimension mismatch: W is {w2.dim}, source {src.dim}, target {tgt.dim}"
        )
    if cfg.max_iters == 0:
        return MappingMatrix(w2.w.copy(), w2.stage, w2.orthogonal)

    k_sel = min(cfg.selection_topk, len(src))
    if report is not None:
        report.append(RefineStep(0, 0, selection_criterion(w2.w, src, tgt, k_sel)))

    base = _orthogonal_part(w2.w)
    best_w = base
    best_criterion = selection_criterion(base, src, tgt, k_sel)
    current = w2.w
    stalled = 0
    for iteration in range(1, cfg.max_iters + 1):
        by_freq = candidates_topk_frequency(current, src, tgt, cfg.topk, cfg.mutual_nn)
        by_sim = candidates_cosine_threshold(current, src, tgt, cfg.threshold)
        combined = combine_candidates(by_freq, by_sim, cfg.mode)
        combined = _dedup_by_source(combined, current, src, tgt)
        if len(combined) == 0:
            log.warning(
                "refinement stopped at iteration %d: empty candidate set", iteration
            )
            break
        x_s, y_s = seed_matrices(combined, src, tgt)
        solved = solve_procrustes(x_s, y_s)
        criterion = selection_criterion(solved.w, src, tgt, k_sel)
        if report is not None:
            report.append(RefineStep(iteration, len(combined), criterion))
        if criterion > best_criterion:
            best_criterion = criterion
            best_w = solved.w
            stalled = 0
        else:
            stalled += 1
            if stalled >= cfg.patience:
                break
        current = solved.w
    return MappingMatrix(best_w.copy(), STAGE_REFINED, orthogonal=True)

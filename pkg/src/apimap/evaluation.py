"""Evaluation metrics and study tables for mined API mappings.

Covers top-k accuracy against a ground-truth pair list, precision/recall/F
over emitted mappings, coverage/accuracy trade-off tables across similarity
thresholds, package-level cluster similarity, and an ablation driver that runs
any chain of the seeding / adversarial / refinement stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .adversarial import AdvConfig, train_adversarial
from .embedding import EmbeddingSpace
from .errors import FormatError
from .query import QueryResult, batch_query
from .refinement import RefineConfig, refine
from .seeding import (
    MappingMatrix,
    STAGE_SEEDED,
    SeedDictionary,
    random_orthogonal,
    seed_matrices,
    solve_procrustes,
)

log = logging.getLogger(__name__)

ABLATION_COMBOS = ("S", "S+A", "S+R", "S+A+R", "A", "A+R", "R")


@dataclass(frozen=True)
class GroundTruth:
    """Expected (source, target) mappings, optionally tagged with package labels.

    A source token may map to several targets only when ``multi_target`` is
    set; a hit then means any expected target was retrieved.
    """

    pairs: tuple[tuple[str, str], ...]
    packages: tuple[str | None, ...] = ()
    multi_target: bool = False

    def __post_init__(self) -> None:
        if self.packages and len(self.packages) != len(self.pairs):
            raise ValueError("packages must align with pairs")
        if not self.multi_target:
            seen: dict[str, str] = {}
            for s, t in self.pairs:
                if s in seen and seen[s] != t:
                    raise ValueError(
                        f"source {s!r} has conflicting targets; "
                        f"pass multi_target=True to allow this"
                    )
                seen[s] = t

    def __len__(self) -> int:
        return len(self.pairs)

    def sources(self) -> list[str]:
        """Distinct source tokens in first-appearance order."""
        out: list[str] = []
        seen = set()
        for s, _ in self.pairs:
            if s not in seen:
                seen.add(s)
                out.append(s)
        return out

    def expected(self) -> dict[str, set[str]]:
        """Source token to the set of acceptable targets."""
        table: dict[str, set[str]] = {}
        for s, t in self.pairs:
            table.setdefault(s, set()).add(t)
        return table

    def restricted_to_sources(self, keep: set[str]) -> "GroundTruth":
        idx = [i for i, (s, _) in enumerate(self.pairs) if s in keep]
        return GroundTruth(
            tuple(self.pairs[i] for i in idx),
            tuple(self.packages[i] for i in idx) if self.packages else (),
            self.multi_target,
        )


@dataclass
class CoverageRow:
    """One (threshold, k) cell of the coverage/accuracy trade-off table."""

    threshold: float
    k: int
    coverage: float
    accuracy_covered: float
    accuracy_overall: float


@dataclass
class GroupSimilarity:
    """Average cross-product cosine between two aligned package clusters."""

    src_prefix: str
    tgt_prefix: str
    average: float
    pair_count: int


@dataclass
class EvalReport:
    """Metric bundle for one configuration."""

    config: dict = field(default_factory=dict)
    topk: dict[int, float] = field(default_factory=dict)
    precision: float | None = None
    recall: float | None = None
    f: float | None = None
    coverage: list[CoverageRow] | None = None
    oov_misses: int = 0


def load_ground_truth(path: str, multi_target: bool = False) -> GroundTruth:
    """Read a TSV of ``source<TAB>target[<TAB>package_label]`` rows."""
    pairs: list[tuple[str, str]] = []
    packages: list[str | None] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) not in (2, 3) or not cols[0] or not cols[1]:
                raise FormatError(f"{path}:{lineno}: expected 2 or 3 tab-separated columns")
            pairs.append((cols[0], cols[1]))
            packages.append(cols[2] if len(cols) == 3 else None)
    has_labels = any(p is not None for p in packages)
    return GroundTruth(
        tuple(pairs), tuple(packages) if has_labels else (), multi_target
    )


def _results_by_token(results: list[QueryResult]) -> dict[str, QueryResult]:
    return {r.query_token: r for r in results}


def topk_accuracy(results: list[QueryResult], truth: GroundTruth, k: int) -> float:
    """Fraction of truth sources whose expected target appears in the top k.

    Out-of-vocabulary sources count as misses. Every truth source must have
    been queried.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    expected = truth.expected()
    if not expected:
        raise ValueError("empty ground truth")
    by_token = _results_by_token(results)
    missing = [s for s in expected if s not in by_token]
    if missing:
        raise ValueError(f"{len(missing)} truth sources were not queried: {missing[:5]}")
    hits = 0
    for source, targets in expected.items():
        retrieved = by_token[source].tokens[:k]
        if any(t in targets for t in retrieved):
            hits += 1
    return hits / len(expected)


def f_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; zero when both are zero."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f(
    results: list[QueryResult], truth: GroundTruth
) -> tuple[float, float, float]:
    """Precision, recall, and F over emitted top-1 mappings.

    A query emits its top-1 neighbor when the (already threshold-filtered)
    result list is non-empty. True positives are emitted pairs present in the
    ground truth; false positives the rest of the emissions; false negatives
    the ground-truth pairs never emitted.
    """
    truth_pairs = set(truth.pairs)
    if not truth_pairs:
        raise ValueError("empty ground truth")
    emitted = {
        (r.query_token, r.tokens[0]) for r in results if not r.oov and r.neighbors
    }
    tp = len(emitted & truth_pairs)
    fp = len(emitted) - tp
    fn = len(truth_pairs) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f_score(precision, recall)


def coverage_accuracy_table(
    w: MappingMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    truth: GroundTruth,
    thresholds: list[float],
    k_list: tuple[int, ...] = (1, 5),
) -> list[CoverageRow]:
    """Coverage and accuracy per similarity threshold and per k.

    Coverage is the fraction of truth sources retaining at least one top-k
    neighbor at or above the threshold; accuracy is reported both over covered
    queries only and over all queries.
    """
    for tau in thresholds:
        if not 0 <= tau < 1:
            raise ValueError(f"threshold {tau} outside [0, 1)")
    expected = truth.expected()
    if not expected:
        raise ValueError("empty ground truth")
    k_max = max(k_list)
    results = _results_by_token(batch_query(list(expected), w, src, tgt, k_max))
    rows: list[CoverageRow] = []
    for tau in thresholds:
        for k in k_list:
            covered = 0
            hits = 0
            for source, targets in expected.items():
                kept = [
                    t for t, s in results[source].neighbors[:k] if s >= tau
                ]
                if kept:
                    covered += 1
                    if any(t in targets for t in kept):
                        hits += 1
            total = len(expected)
            rows.append(
                CoverageRow(
                    threshold=tau,
                    k=k,
                    coverage=covered / total,
                    accuracy_covered=hits / covered if covered else 0.0,
                    accuracy_overall=hits / total,
                )
            )
    return rows


def group_similarity(
    w: MappingMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    package_pairs: list[tuple[str, str]],
) -> list[GroupSimilarity]:
    """Average mapped-to-target cosine over the member cross product of each
    aligned package pair. Pairs with no members on either side are skipped."""
    m = w.w if isinstance(w, MappingMatrix) else np.asarray(w)
    mapped = src.vectors @ m.T
    norms = np.linalg.norm(mapped, axis=1, keepdims=True)
    mapped = mapped / np.where(norms > 0, norms, 1.0)
    tgt_unit = tgt.unit_vectors
    out: list[GroupSimilarity] = []
    for src_prefix, tgt_prefix in package_pairs:
        if not src_prefix or not tgt_prefix:
            raise ValueError("package prefixes must be non-empty")
        src_idx = [
            i for i, t in enumerate(src.vocab.tokens) if t.startswith(src_prefix + ".")
        ]
        tgt_idx = [
            i for i, t in enumerate(tgt.vocab.tokens) if t.startswith(tgt_prefix + ".")
        ]
        if not src_idx or not tgt_idx:
            log.warning(
                "skipping package pair (%s, %s): empty membership", src_prefix, tgt_prefix
            )
            continue
        sims = mapped[src_idx] @ tgt_unit[tgt_idx].T
        out.append(
            GroupSimilarity(src_prefix, tgt_prefix, float(sims.mean()), sims.size)
        )
    return out


def _canonical_combo(combo: str) -> str:
    letters = [c for c in combo.upper() if c not in "+, "]
    if (
        not letters
        or any(c not in "SAR" for c in letters)
        or len(set(letters)) != len(letters)
    ):
        raise ValueError(f"bad stage combination {combo!r}")
    ordered = "".join(c for c in "SAR" if c in letters)
    return "+".join(ordered)


def run_ablation(
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    seeds: SeedDictionary,
    truth: GroundTruth,
    grid: list[str],
    adv_cfg: AdvConfig | None = None,
    ref_cfg: RefineConfig | None = None,
    k_list: tuple[int, ...] = (1, 5, 10),
    rng_seed: int = 0,
) -> dict[str, EvalReport]:
    """Run each stage combination and report its top-k accuracy.

    Combinations are subsets of S (seeded solve), A (adversarial), R (refine),
    applied in that order. Without S, the chain starts from a random orthogonal
    matrix drawn from ``rng_seed``.
    """
    adv_cfg = adv_cfg if adv_cfg is not None else AdvConfig()
    ref_cfg = ref_cfg if ref_cfg is not None else RefineConfig()
    reports: dict[str, EvalReport] = {}
    sources = truth.sources()
    for combo in grid:
        name = _canonical_combo(combo)
        stages = set(name.split("+"))
        if "S" in stages:
            x_s, y_s = seed_matrices(seeds, src, tgt)
            w = solve_procrustes(x_s, y_s)
        else:
            w = MappingMatrix(
                random_orthogonal(src.dim, np.random.default_rng(rng_seed)),
                STAGE_SEEDED,
                orthogonal=True,
            )
        if "A" in stages:
            w = train_adversarial(w, src, tgt, adv_cfg)
        if "R" in stages:
            w = refine(w, src, tgt, ref_cfg)
        results = batch_query(sources, w, src, tgt, max(k_list))
        oov = sum(1 for r in results if r.oov)
        reports[name] = EvalReport(
            config={"stages": name, "seeds": len(seeds), "rng_seed": rng_seed},
            topk={k: topk_accuracy(results, truth, k) for k in k_list},
            oov_misses=oov,
        )
    return reports

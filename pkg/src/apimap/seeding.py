"""Seed mining and the initial linear mapping between two embedding spaces.

Seeds are API pairs whose case-folded class-and-method name suffix coincides
across the two vocabularies. The mapping is solved either in closed form on
the orthogonal group (SVD of the seed cross-covariance) or by unconstrained
gradient descent as a baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary
from .embedding import EmbeddingSpace
from .errors import DivergenceError, FormatError

STAGE_SEEDED = "seeded"
STAGE_ADVERSARIAL = "adversarial"
STAGE_REFINED = "refined"
_STAGES = (STAGE_SEEDED, STAGE_ADVERSARIAL, STAGE_REFINED)

ORTHOGONALITY_TOL = 1e-6


@dataclass(frozen=True)
class SeedDictionary:
    """Ordered (source_token, target_token) pairs. Exact duplicates are invalid;
    a source token may legitimately appear with several targets."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("duplicate seed pair")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def restricted_to(self, src: Vocabulary, tgt: Vocabulary) -> "SeedDictionary":
        """Drop pairs whose tokens are missing from either vocabulary."""
        return SeedDictionary(
            tuple((s, t) for s, t in self.pairs if s in src and t in tgt)
        )


@dataclass(eq=False)
class MappingMatrix:
    """A d x d linear map from the source space into the target space."""

    w: np.ndarray
    stage: str
    orthogonal: bool = False

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ValueError("mapping matrix must be square")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("mapping matrix has non-finite entries")
        if self.stage not in _STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def dim(self) -> int:
        return self.w.shape[0]


def _suffix_key(token: str) -> str | None:
    """Case-folded last-two-dotted-segments key, or None for non-API tokens."""
    parts = token.split(".")
    if len(parts) < 2 or not parts[-1] or not parts[-2]:
        return None
    return f"{parts[-2]}.{parts[-1]}".casefold()


def mine_signature_seeds(src: Vocabulary, tgt: Vocabulary) -> SeedDictionary:
    """Pair tokens whose class-and-method suffix matches uniquely on both sides.

    Keywords and AST labels carry no dotted suffix and never participate.
    Suffixes claimed by more than one token on either side are ambiguous and
    dropped. Output pairs follow source vocabulary (frequency) order.
    """
    src_by_key: dict[str, list[str]] = {}
    for token in src:
        key = _suffix_key(token)
        if key is not None:
            src_by_key.setdefault(key, []).append(token)
    tgt_by_key: dict[str, list[str]] = {}
    for token in tgt:
        key = _suffix_key(token)
        if key is not None:
            tgt_by_key.setdefault(key, []).append(token)

    pairs = []
    for token in src:
        key = _suffix_key(token)
        if key is None:
            continue
        src_hits = src_by_key[key]
        tgt_hits = tgt_by_key.get(key, [])
        if len(src_hits) == 1 and len(tgt_hits) == 1:
            pairs.append((token, tgt_hits[0]))
    return SeedDictionary(tuple(pairs))


def seed_matrices(
    seeds: SeedDictionary, src: EmbeddingSpace, tgt: EmbeddingSpace
) -> tuple[np.ndarray, np.ndarray]:
    """Stack seed-pair embeddings as aligned |S| x d matrices."""
    usable = seeds.restricted_to(src.vocab, tgt.vocab)
    if len(usable) == 0:
        raise ValueError("no seed pair is present in both vocabularies")
    x = np.stack([src.vector(s) for s, _ in usable])
    y = np.stack([tgt.vector(t) for _, t in usable])
    return x, y


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.where(norms > 0, norms, 1.0)


def _sign_fixed_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD with each left singular vector's first nonzero entry made non-negative.

    Sign flips are applied to matching rows of V^T, so the product U @ Vt is
    unchanged; the convention only pins down a reproducible branch.
    """
    u, s, vt = np.linalg.svd(m)
    for j in range(u.shape[1]):
        col = u[:, j]
        nonzero = np.flatnonzero(np.abs(col) > 1e-12)
        if nonzero.size and col[nonzero[0]] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return u, s, vt


def solve_procrustes(x_s: np.ndarray, y_s: np.ndarray) -> MappingMatrix:
    """Closed-form best orthogonal map W with W x_i ~ y_i over the seed rows.

    Rows are unit-normalized before solving; retrieval is cosine-based, so
    scale carries no information and normalization stabilizes the SVD.
    W = U V^T where U S V^T is the SVD of Y^T X.
    """
    x_s = np.asarray(x_s, dtype=np.float64)
    y_s = np.asarray(y_s, dtype=np.float64)
    if x_s.ndim != 2 or x_s.shape != y_s.shape:
        raise ValueError("seed matrices must have identical |S| x d shapes")
    if x_s.shape[0] < 1:
        raise ValueError("at least one seed pair is required")
    x = _unit_rows(x_s)
    y = _unit_rows(y_s)
    u, _, vt = _sign_fixed_svd(y.T @ x)
    w = u @ vt
    return MappingMatrix(w, STAGE_SEEDED, orthogonal=True)


def solve_gradient_descent(
    x_s: np.ndarray,
    y_s: np.ndarray,
    lr: float = 0.1,
    iters: int = 1000,
) -> MappingMatrix:
    """Unconstrained least-squares baseline: minimize mean ||W x_i - y_i||^2.

    Full-batch gradient descent from W = 0. The result is not orthogonal in
    general. Raises DivergenceError when the loss increases for 10 consecutive
    iterations.
    """
    if lr <= 0:
        raise ValueError("lr must be > 0")
    x = _unit_rows(np.asarray(x_s, dtype=np.float64))
    y = _unit_rows(np.asarray(y_s, dtype=np.float64))
    if x.ndim != 2 or x.shape != y.shape:
        raise ValueError("seed matrices must have identical |S| x d shapes")
    n, d = x.shape
    w = np.zeros((d, d))
    prev_loss = np.inf
    rising = 0
    for _ in range(iters):
        residual = x @ w.T - y
        loss = float(np.sum(residual**2)) / n
        if loss > prev_loss:
            rising += 1
            if rising >= 10:
                raise DivergenceError(
                    f"gradient descent diverged, loss rose 10 iterations in a row "
                    f"(last loss {loss:.6g})"
                )
        else:
            rising = 0
        prev_loss = loss
        grad = (2.0 / n) * residual.T @ x
        w -= lr * grad
    return MappingMatrix(w, STAGE_SEEDED, orthogonal=False)


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an orthogonal matrix via QR of a Gaussian matrix (Haar-ish)."""
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def load_seeds(path: str) -> SeedDictionary:
    """Read a two-column TSV seed dictionary; repeats of a pair collapse to one."""
    pairs: list[tuple[str, str]] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                raise FormatError(f"{path}:{lineno}: expected 2 tab-separated columns")
            pair = (cols[0], cols[1])
            if pair not in seen:
                seen.add(pair)
                pairs.append(pair)
    return SeedDictionary(tuple(pairs))


def save_seeds(seeds: SeedDictionary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in seeds:
            fh.write(f"{s}\t{t}\n")


def save_matrix(matrix: MappingMatrix, path: str) -> None:
    """Write a mapping matrix as text: stage comment, dimension, then d rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# stage: {matrix.stage}\n")
        fh.write(f"{matrix.dim}\n")
        for row in matrix.w:
            fh.write(" ".join("%.17g" % v for v in row) + "\n")


def load_matrix(path: str) -> MappingMatrix:
    stage = STAGE_SEEDED
    rows: list[list[float]] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("stage:"):
                    stage = body.split(":", 1)[1].strip()
                continue
            if dim is None:
                try:
                    dim = int(line)
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: expected dimension header") from exc
                continue
            values = line.split()
            if len(values) != dim:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(values)}"
                )
            rows.append([float(v) for v in values])
    if dim is None or len(rows) != dim:
        raise FormatError(f"{path}: expected {dim or '?'} rows, got {len(rows)}")
    w = np.asarray(rows)
    if stage not in _STAGES:
        raise FormatError(f"{path}: unknown stage {stage!r}")
    orth = bool(np.linalg.norm(w.T @ w - np.eye(dim)) < ORTHOGONALITY_TOL)
    return MappingMatrix(w, stage, orthogonal=orth)

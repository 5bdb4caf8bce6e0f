"""Word-vector similarity and corpus co-occurrence statistics.

Two independent signals drive schema evolution: cosine similarity between
node-name vectors (picks horizontal neighbours) and smoothed normalized
pointwise mutual information over a co-occurrence table (picks analogous
replacement words).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-12
DEFAULT_GAMMA = 1.0
DEFAULT_WINDOW = 5


class EmbedError(ValueError):
    pass


@dataclass
class EmbeddingStore:
    dim: int
    table: dict[str, np.ndarray]

    def __contains__(self, word: str) -> bool:
        return word in self.table

    def __getitem__(self, word: str) -> np.ndarray:
        return self.table[word]


def load_word2vec_text(path) -> EmbeddingStore:
    """Read the plain-text interchange format: a "<count> <dim>" header line,
    then one "<word> <v1> ... <vdim>" row per word."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbedError(f"{path}: bad header line, expected '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbedError(f"{path}:{lineno}: expected {dim} components")
            vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise EmbedError(f"{path}:{lineno}: non-finite component")
            table[parts[0]] = vec
    if len(table) != count:
        log.warning("embedding header said %d words, file has %d", count, len(table))
    return EmbeddingStore(dim=dim, table=table)


def save_word2vec_text(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(store.table)} {store.dim}\n")
        for word in sorted(store.table):
            comps = " ".join(repr(float(x)) for x in store.table[word])
            fh.write(f"{word} {comps}\n")


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]; undefined (raises) for a zero vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbedError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EmbedError("undefined similarity for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def node_vector(node, store: EmbeddingStore) -> np.ndarray:
    """Mean vector of a node's name tokens; tokens without an embedding are
    skipped with a warning, a node with none raises."""
    vecs = []
    for tok in node.name:
        if tok in store:
            vecs.append(store[tok])
        else:
            log.warning("no embedding for token %r of node %s", tok, node.id)
    if not vecs:
        raise EmbedError(f"no embeddable name token for node: {node.id}")
    return np.mean(np.stack(vecs), axis=0)


@dataclass
class CoocTable:
    """Window co-occurrence counts.

    A window is anchored at every token and spans that token plus the next
    `window` tokens of the same sentence (truncated at the end). `unigram[w]`
    counts windows containing w, `pair[{w, w'}]` counts windows containing
    both (two occurrences, for w == w'), and `total` is the number of
    windows. By construction pair <= min of the unigrams <= total.
    """
    window: int
    unigram: dict[str, int] = field(default_factory=dict)
    pair: dict[frozenset, int] = field(default_factory=dict)
    total: int = 0

    def p_word(self, w: str) -> float:
        return self.unigram.get(w, 0) / self.total if self.total else 0.0

    def p_pair(self, wi: str, wj: str) -> float:
        return self.pair.get(frozenset((wi, wj)), 0) / self.total if self.total else 0.0

    def vocab(self) -> list[str]:
        return sorted(self.unigram)


def build_cooc(corpus, window: int = DEFAULT_WINDOW) -> CoocTable:
    """Count co-occurrences over token sequences.

    Strings are whitespace-split; tokens are lowercased so corpus words
    line up with schema name tokens.
    """
    if window < 1:
        raise EmbedError(f"window must be >= 1, got {window}")
    table = CoocTable(window=window)
    uni = table.unigram
    pair = table.pair
    for sent in corpus:
        toks = sent.split() if isinstance(sent, str) else list(sent)
        toks = [t.lower() for t in toks]
        n = len(toks)
        for i in range(n):
            span = toks[i:i + window + 1]
            seen = set()
            for w in span:
                if w not in seen:
                    uni[w] = uni.get(w, 0) + 1
                    seen.add(w)
            distinct = sorted(seen)
            for a_idx in range(len(distinct)):
                for b_idx in range(a_idx, len(distinct)):
                    wa, wb = distinct[a_idx], distinct[b_idx]
                    if wa == wb:
                        if span.count(wa) < 2:
                            continue
                    key = frozenset((wa, wb))
                    pair[key] = pair.get(key, 0) + 1
            table.total += 1
    return table


def _signed_pow(x: float, gamma: float) -> float:
    # sign-preserving power so a negative base keeps its ranking under gamma != 1
    if x < 0:
        return -((-x) ** gamma)
    return x ** gamma


def npmi(wi: str, wj: str, table: CoocTable,
         eps: float = DEFAULT_EPS, gamma: float = DEFAULT_GAMMA) -> float:
    """Smoothed normalized PMI:

        ( log((p(wi,wj) + eps) / (p(wi) p(wj))) / -log(p(wi,wj) + eps) ) ** gamma

    with natural logs and probabilities = counts / total. Requires nonzero
    unigram counts for both words; eps keeps the expression finite when the
    pair count is zero.
    """
    if table.unigram.get(wi, 0) <= 0:
        raise EmbedError(f"zero unigram count: {wi!r}")
    if table.unigram.get(wj, 0) <= 0:
        raise EmbedError(f"zero unigram count: {wj!r}")
    p_i = table.p_word(wi)
    p_j = table.p_word(wj)
    p_ij = table.p_pair(wi, wj) + eps
    if p_ij <= 0.0:
        raise EmbedError("pair probability is zero and eps is zero")
    if p_ij >= 1.0:
        # every window holds both words; the normalized ratio degenerates to 1
        return 1.0
    denom = -math.log(p_ij)
    value = math.log(p_ij / (p_i * p_j)) / denom
    return _signed_pow(value, gamma)


def analogy_scores(candidate_words, lexicon, table: CoocTable,
                   eps: float = DEFAULT_EPS, gamma: float = DEFAULT_GAMMA) -> dict[str, float]:
    """Association score of every lexicon word against a candidate word set:
    the sum over the candidates of their pairwise npmi with that word."""
    scores: dict[str, float] = {}
    cand = list(candidate_words)
    for wj in lexicon:
        scores[wj] = sum(npmi(wi, wj, table, eps, gamma) for wi in cand)
    return scores

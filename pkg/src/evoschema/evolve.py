"""Iterative schema evolution and benchmark assembly.

A benchmark is a sequence of iteration artifacts built from one raw
taxonomy and one raw split set. Iteration 1 samples an initial schema and
filters all three splits against it; later iterations grow (or rename) the
schema and re-filter dev/test only, because labeled training data exists
only for the initial schema.

Growth strategies:
    horizontal  add the n_iter unused subclasses most cosine-similar to any
                node already in the schema (plus their missing parents)
    vertical    add n_iter random unused subclasses whose parent is present
    hybrid      per iteration, draw u ~ U(0,1) and run the horizontal branch
                when u < alpha, else the vertical one
    analogous   keep the node set fixed and rename n_iter random subclasses
                to their best-associated corpus word by smoothed NPMI

All randomness flows from one integer seed through named spawned streams
(one for initialization, one per iteration), so identical configurations
produce byte-identical artifact trees.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import schema as schema_mod
from .corpus import Example, SplitSet, filter_to_schema, rename_labels, save_jsonl
from .embed import (DEFAULT_EPS, DEFAULT_GAMMA, DEFAULT_WINDOW, CoocTable,
                    EmbedError, EmbeddingStore, analogy_scores, cosine,
                    node_vector)
from .schema import LabelProjector, SchemaGraph, apply_rename, name_key, validate

log = logging.getLogger(__name__)

PRNG_ID = "numpy-pcg64-seedsequence"

GROWTH_STRATEGIES = ("horizontal", "vertical", "hybrid")
STRATEGIES = GROWTH_STRATEGIES + ("analogous",)


class EvolveError(ValueError):
    pass


@dataclass
class EvolutionConfig:
    strategy: str
    iterations: int
    n_init: int
    n_iter: int
    seed: int = 0
    alpha: float = 0.5
    eps: float = DEFAULT_EPS
    gamma: float = DEFAULT_GAMMA
    window: int = DEFAULT_WINDOW
    analogous_threshold: float = 0.3
    horizontal_aggregate: str = "max"  # or "mean"

    def check(self) -> None:
        if self.strategy not in STRATEGIES:
            raise EvolveError(f"unknown strategy: {self.strategy}")
        if self.iterations < 1:
            raise EvolveError("iterations must be >= 1")
        if self.strategy in GROWTH_STRATEGIES and self.n_init < 1:
            raise EvolveError("n_init must be >= 1")
        if self.iterations > 1 and self.n_iter < 1:
            raise EvolveError("n_iter must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise EvolveError("alpha must be in [0, 1]")
        if self.horizontal_aggregate not in ("max", "mean"):
            raise EvolveError(f"unknown aggregate: {self.horizontal_aggregate}")


# Dataset-shaped presets: (strategy letter h/v/x/a) x (nerd, nyt, ace).
PRESETS: dict[str, dict] = {}
for _ds, (_init, _add, _n, _total) in {"nerd": (30, 6, 7, 66),
                                       "nyt": (10, 2, 8, 24),
                                       "ace": (15, 3, 7, 33)}.items():
    for _letter, _strategy in (("h", "horizontal"), ("v", "vertical"),
                               ("x", "hybrid")):
        PRESETS[f"{_ds}-{_letter}"] = {"strategy": _strategy, "n_init": _init,
                                       "n_iter": _add, "iterations": _n}
    PRESETS[f"{_ds}-a"] = {"strategy": "analogous", "n_init": _total,
                           "n_iter": _add, "iterations": 7}


@dataclass
class IterationArtifact:
    index: int
    schema: SchemaGraph
    dev: list[Example]
    test: list[Example]
    train: list[Example] | None = None
    added: tuple[str, ...] = ()
    branch: str | None = None
    renames: dict[str, str] = field(default_factory=dict)


def _primary_ids(graph: SchemaGraph) -> set[str]:
    return {nid for nid in graph.ids_by(role=graph.primary_role)
            if graph.nodes[nid].level != "root"}


def _sorted_by_name(graph: SchemaGraph, ids) -> list[str]:
    return sorted(ids, key=lambda nid: name_key(graph.nodes[nid].name))


def subset_schema(raw: SchemaGraph, kept_primary: set[str], version: int) -> SchemaGraph:
    """Iteration snapshot: the kept primary nodes (parents pulled in), every
    structural node the task needs, and constraints projected onto it.

    Relation constraints and event role lists are carried by projecting each
    raw entry's members, so a projected gold label always remains decodable
    under the snapshot it was projected with.
    """
    ids = set(kept_primary)
    if raw.task == "RE":
        ids |= {nid for nid in raw.ids_by(role="entity-type")
                if raw.nodes[nid].level != "root"}
    # parent closure keeps every chain rooted
    frontier = list(ids)
    while frontier:
        nid = frontier.pop()
        parent = raw.nodes[nid].parent
        if parent and parent not in ids and raw.nodes[parent].level != "root":
            ids.add(parent)
            frontier.append(parent)

    nodes = {nid: raw.nodes[nid] for nid in ids}
    nodes[_root_id(raw)] = raw.nodes[_root_id(raw)]
    interim = SchemaGraph(raw.task, nodes, frozenset(), {}, version)
    projector = LabelProjector(raw, interim)

    constraints = set()
    for h, r, t in sorted(raw.re_constraints):
        ph, pr, pt = projector.project(h), projector.project(r), projector.project(t)
        if ph and pr and pt:
            constraints.add((ph, pr, pt))

    ee_roles: dict[str, list[str]] = {}
    role_ids: set[str] = set()
    for evt in sorted(raw.ee_roles):
        target = projector.project(evt)
        if target is None:
            continue
        bucket = ee_roles.setdefault(target, [])
        for role in raw.ee_roles[evt]:
            if role not in bucket:
                bucket.append(role)
                role_ids.add(role)

    nodes = dict(nodes)
    for rid in role_ids:
        nodes[rid] = raw.nodes[rid]
        parent = raw.nodes[rid].parent
        while parent and parent not in nodes:
            nodes[parent] = raw.nodes[parent]
            parent = raw.nodes[parent].parent

    graph = SchemaGraph(raw.task, nodes, frozenset(constraints),
                        {evt: tuple(roles) for evt, roles in ee_roles.items()},
                        version)
    problems = validate(graph)
    if problems:
        raise EvolveError("derived schema invalid: " + "; ".join(problems))
    return graph


def _root_id(graph: SchemaGraph) -> str:
    for nid, node in graph.nodes.items():
        if node.level == "root":
            return nid
    raise EvolveError("taxonomy has no root node")


def init_schema(raw: SchemaGraph, cfg: EvolutionConfig,
                rng: np.random.Generator) -> SchemaGraph:
    """Iteration-1 schema (version 1) for the configured strategy."""
    cfg.check()
    problems = validate(raw)
    if problems:
        raise EvolveError("raw schema invalid: " + "; ".join(problems))

    primary = _primary_ids(raw)
    subs = _sorted_by_name(raw, [nid for nid in primary
                                 if raw.nodes[nid].level == "sub"])
    majors = [nid for nid in primary if raw.nodes[nid].level == "major"]

    if cfg.strategy == "analogous":
        return subset_schema(raw, primary, version=1)

    if cfg.n_init > len(subs):
        raise EvolveError(f"n_init={cfg.n_init} exceeds the {len(subs)} "
                          f"available sub nodes")
    picked_idx = rng.choice(len(subs), size=cfg.n_init, replace=False)
    picked = {subs[i] for i in picked_idx}
    kept = set(picked)
    kept |= {raw.nodes[nid].parent for nid in picked}
    if cfg.strategy == "vertical":
        kept |= set(majors)
    return subset_schema(raw, kept, version=1)


def _candidate_subs(current: SchemaGraph, raw: SchemaGraph) -> list[str]:
    used = set(current.nodes)
    return _sorted_by_name(raw, [nid for nid in _primary_ids(raw)
                                 if raw.nodes[nid].level == "sub"
                                 and nid not in used])


def expand_horizontal(current: SchemaGraph, raw: SchemaGraph,
                      store: EmbeddingStore, n_iter: int,
                      aggregate: str = "max") -> SchemaGraph:
    """Add the n_iter unused subclasses most similar to the present schema.

    A candidate's score aggregates (max by default, mean optionally) its
    cosine similarity to every present primary-role node; candidates with
    no embeddable name token are skipped with a warning. Ties break by
    name.
    """
    candidates = _candidate_subs(current, raw)
    if len(candidates) < n_iter:
        raise EvolveError(f"need {n_iter} unused sub nodes, only "
                          f"{len(candidates)} remain")
    anchor_vectors = []
    for nid in _sorted_by_name(current, _primary_ids(current)):
        try:
            anchor_vectors.append(node_vector(current.nodes[nid], store))
        except EmbedError:
            log.warning("skipping anchor without embeddings: %s", nid)
    if not anchor_vectors:
        raise EvolveError("no current schema node has an embedding")

    scored: list[tuple[float, str, str]] = []
    for nid in candidates:
        try:
            vec = node_vector(raw.nodes[nid], store)
        except EmbedError:
            log.warning("skipping candidate without embeddings: %s", nid)
            continue
        sims = [cosine(vec, a) for a in anchor_vectors]
        score = max(sims) if aggregate == "max" else float(np.mean(sims))
        scored.append((score, name_key(raw.nodes[nid].name), nid))
    if not scored:
        raise EvolveError("every expansion candidate lacks embeddings")
    if len(scored) < n_iter:
        raise EvolveError(f"only {len(scored)} embeddable candidates for "
                          f"n_iter={n_iter}")
    scored.sort(key=lambda item: (-item[0], item[1]))
    chosen = {nid for _, _, nid in scored[:n_iter]}

    kept = _primary_ids(current) | chosen
    kept |= {raw.nodes[nid].parent for nid in chosen}
    return subset_schema(raw, kept, version=current.version + 1)


def expand_vertical(current: SchemaGraph, raw: SchemaGraph,
                    rng: np.random.Generator, n_iter: int) -> SchemaGraph:
    """Add n_iter random unused subclasses whose parent is already present."""
    eligible = [nid for nid in _candidate_subs(current, raw)
                if raw.nodes[nid].parent in current.nodes]
    if len(eligible) < n_iter:
        raise EvolveError(f"need {n_iter} eligible sub nodes (parent present), "
                          f"only {len(eligible)} available")
    picked_idx = rng.choice(len(eligible), size=n_iter, replace=False)
    chosen = {eligible[i] for i in picked_idx}
    kept = _primary_ids(current) | chosen
    return subset_schema(raw, kept, version=current.version + 1)


def expand_hybrid(current: SchemaGraph, raw: SchemaGraph,
                  store: EmbeddingStore, rng: np.random.Generator,
                  n_iter: int, alpha: float,
                  aggregate: str = "max") -> tuple[SchemaGraph, str]:
    """Pick a branch by one uniform draw; fall back to the other branch when
    the chosen one cannot supply n_iter nodes."""
    u = float(rng.random())
    order = ["horizontal", "vertical"] if u < alpha else ["vertical", "horizontal"]
    errors = []
    for branch in order:
        try:
            if branch == "horizontal":
                return expand_horizontal(current, raw, store, n_iter, aggregate), branch
            return expand_vertical(current, raw, rng, n_iter), branch
        except (EvolveError, EmbedError) as exc:
            errors.append(f"{branch}: {exc}")
    raise EvolveError("both hybrid branches exhausted: " + " / ".join(errors))


def expand_analogous(current: SchemaGraph, lexicon, table: CoocTable,
                     rng: np.random.Generator, n_iter: int,
                     eps: float = DEFAULT_EPS, gamma: float = DEFAULT_GAMMA,
                     threshold: float = 0.3) -> tuple[SchemaGraph, dict[str, str]]:
    """Rename n_iter random subclasses to their best-associated lexicon word.

    For each sampled node the lexicon is scored against the node's name
    tokens; the top word at or above the threshold that is not already a
    schema name wins. Nodes with no qualifying word keep their name. The
    node count never changes.
    """
    pool = _sorted_by_name(current, [nid for nid in _primary_ids(current)
                                     if current.nodes[nid].level == "sub"])
    if len(pool) < n_iter:
        raise EvolveError(f"cannot sample {n_iter} of {len(pool)} sub nodes")
    picked_idx = rng.choice(len(pool), size=n_iter, replace=False)

    usable_lexicon = [w for w in lexicon if table.unigram.get(w, 0) > 0]
    dropped = len(list(lexicon)) - len(usable_lexicon)
    if dropped:
        log.warning("%d lexicon words missing from the co-occurrence table", dropped)

    taken = {name_key(n.name) for n in current.nodes.values()}
    mapping: dict[str, str] = {}
    for idx in picked_idx:
        node = current.nodes[pool[idx]]
        cand_tokens = [t for t in node.name if table.unigram.get(t, 0) > 0]
        if not cand_tokens:
            log.warning("node %s has no token in the co-occurrence table", node.id)
            continue
        scores = analogy_scores(cand_tokens, usable_lexicon, table, eps, gamma)
        for word, score in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])):
            if score < threshold:
                break
            if name_key(word) in taken:
                continue
            mapping[" ".join(node.name)] = word
            taken.add(name_key(word))
            break
    return apply_rename(current, mapping), mapping


def build_benchmark(raw: SchemaGraph, splits: SplitSet, cfg: EvolutionConfig,
                    store: EmbeddingStore | None = None,
                    cooc: CoocTable | None = None,
                    lexicon=None) -> list[IterationArtifact]:
    """Run the configured evolution and emit one artifact per iteration."""
    cfg.check()
    problems = validate(raw)
    if problems:
        raise EvolveError("raw schema invalid: " + "; ".join(problems))
    n_subs = len([nid for nid in _primary_ids(raw)
                  if raw.nodes[nid].level == "sub"])
    if cfg.strategy in GROWTH_STRATEGIES:
        needed = cfg.n_init + (cfg.iterations - 1) * cfg.n_iter
        if needed > n_subs:
            raise EvolveError(f"config needs {needed} sub nodes, taxonomy has "
                              f"{n_subs}")
        if cfg.strategy in ("horizontal", "hybrid") and store is None:
            raise EvolveError(f"{cfg.strategy} expansion requires embeddings")
    else:
        if cooc is None:
            raise EvolveError("analogous expansion requires a co-occurrence table")
        if lexicon is None:
            lexicon = cooc.vocab()

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.iterations)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in streams]

    current = init_schema(raw, cfg, rngs[0])
    analogous = cfg.strategy == "analogous"

    dev_base = filter_to_schema(splits.dev, raw, current, drop_empty=False)
    test_base = filter_to_schema(splits.test, raw, current, drop_empty=False)
    train = filter_to_schema(splits.train, raw, current, drop_empty=True)

    artifacts = [IterationArtifact(
        index=1, schema=current, dev=dev_base, test=test_base, train=train,
        added=tuple(sorted(current.names(current.primary_role))),
    )]

    current_name: dict[str, str] = {}
    if analogous:
        current_name = {name_key(raw.nodes[nid].name): name_key(raw.nodes[nid].name)
                        for nid in _primary_ids(raw)}

    for i in range(2, cfg.iterations + 1):
        rng = rngs[i - 1]
        branch = None
        renames: dict[str, str] = {}
        if cfg.strategy == "horizontal":
            new = expand_horizontal(current, raw, store, cfg.n_iter,
                                    cfg.horizontal_aggregate)
        elif cfg.strategy == "vertical":
            new = expand_vertical(current, raw, rng, cfg.n_iter)
        elif cfg.strategy == "hybrid":
            new, branch = expand_hybrid(current, raw, store, rng, cfg.n_iter,
                                        cfg.alpha, cfg.horizontal_aggregate)
        else:
            new, renames = expand_analogous(current, lexicon, cooc, rng,
                                            cfg.n_iter, cfg.eps, cfg.gamma,
                                            cfg.analogous_threshold)

        if analogous:
            table = {name_key(k): name_key(v) for k, v in renames.items()}
            for orig, cur in current_name.items():
                current_name[orig] = table.get(cur, cur)
            live = {orig: cur for orig, cur in current_name.items() if orig != cur}
            dev = rename_labels(dev_base, live)
            test = rename_labels(test_base, live)
            added = tuple(sorted(renames.values()))
        else:
            dev = filter_to_schema(splits.dev, raw, new, drop_empty=False)
            test = filter_to_schema(splits.test, raw, new, drop_empty=False)
            added = tuple(sorted(new.names(new.primary_role)
                                 - current.names(current.primary_role)))

        artifacts.append(IterationArtifact(index=i, schema=new, dev=dev,
                                           test=test, added=added,
                                           branch=branch, renames=dict(renames)))
        current = new
    return artifacts


def manifest_dict(cfg: EvolutionConfig, artifacts: list[IterationArtifact]) -> dict:
    return {
        "prng": PRNG_ID,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "iterations": [
            {
                "i": art.index,
                "version": art.schema.version,
                "subclasses": len([nid for nid in _primary_ids(art.schema)
                                   if art.schema.nodes[nid].level == "sub"]),
                "nodes": sorted(art.schema.names(art.schema.primary_role)),
                "added": list(art.added),
                "branch": art.branch,
                "renames": dict(sorted(art.renames.items())),
            }
            for art in artifacts
        ],
    }


def write_artifacts(artifacts: list[IterationArtifact], outdir,
                    cfg: EvolutionConfig, force: bool = False) -> None:
    """Persist artifacts as iter_<i>/{schema.json,dev.jsonl,test.jsonl}
    (+ train.jsonl for iteration 1) and a manifest.json alongside."""
    manifest_path = os.path.join(outdir, "manifest.json")
    if os.path.exists(manifest_path) and not force:
        raise EvolveError(f"refusing to overwrite {manifest_path} without force")
    os.makedirs(outdir, exist_ok=True)
    for art in artifacts:
        d = os.path.join(outdir, f"iter_{art.index}")
        os.makedirs(d, exist_ok=True)
        schema_mod.save_json(art.schema, os.path.join(d, "schema.json"))
        save_jsonl(art.dev, os.path.join(d, "dev.jsonl"))
        save_jsonl(art.test, os.path.join(d, "test.jsonl"))
        if art.train is not None:
            save_jsonl(art.train, os.path.join(d, "train.jsonl"))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest_dict(cfg, artifacts), fh, ensure_ascii=False,
                  indent=2, sort_keys=True)
        fh.write("\n")

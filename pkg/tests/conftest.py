"""Shared builders: toy taxonomies, deterministic embeddings, and random
annotated examples consistent with a raw taxonomy."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evoschema.corpus import Entity, Event, EventArg, Example, Mention, Relation
from evoschema.embed import EmbeddingStore
from evoschema.schema import SchemaGraph, SchemaNode, make_root

_NAME_POOL = [
    "amber", "basil", "cedar", "dune", "ember", "fjord", "gale", "heron",
    "iris", "jade", "krill", "lotus", "maple", "nectar", "onyx", "pearl",
    "quartz", "reef", "sage", "tundra", "umber", "vale", "willow", "xenon",
    "yarrow", "zephyr", "aspen", "briar", "clove", "delta", "elm", "fern",
    "grove", "hazel", "ivy", "juniper", "kelp", "laurel", "moss", "nimbus",
]

_TEXT_POOL = [
    "court", "leader", "troops", "border", "party", "minister", "official",
    "company", "river", "valley", "summit", "deal", "signing", "arrival",
    "protest", "verdict", "merger", "voyage", "festival", "council",
    "harvest", "launch", "debate", "rescue", "strike", "visit", "charter",
    "market", "bridge", "journey",
]


def _names(rng: random.Random, count: int, used: set[str]) -> list[str]:
    out = []
    pool = [w for w in _NAME_POOL if w not in used]
    rng.shuffle(pool)
    for word in pool:
        if len(out) == count:
            break
        if rng.random() < 0.3 and pool:
            name = f"{word} {rng.choice(_TEXT_POOL)}"
        else:
            name = word
        if name in used:
            continue
        used.add(name)
        out.append(name)
    if len(out) < count:
        raise RuntimeError("name pool exhausted")
    return out


def build_taxonomy(task: str, majors: int, subs_per_major, seed: int = 0,
                   n_entity_types: int = 2, n_roles: int = 3) -> SchemaGraph:
    """Random two-level raw taxonomy for a task, with the structural extras
    RE (entity types + triple constraints) and EE (roles) need."""
    rng = random.Random(seed)
    used: set[str] = {"root"}
    role = {"NER": "entity-type", "RE": "relation", "EE": "event-type"}[task]
    nodes = {"root": make_root()}
    per = ([subs_per_major] * majors if isinstance(subs_per_major, int)
           else list(subs_per_major))
    sub_ids = []
    for m, count in enumerate(per):
        mid = f"m{m}"
        nodes[mid] = SchemaNode(mid, tuple(_names(rng, 1, used)[0].split()),
                                "root", "major", role)
        for name in _names(rng, count, used):
            sid = f"m{m}s{len(sub_ids)}"
            nodes[sid] = SchemaNode(sid, tuple(name.split()), mid, "sub", role)
            sub_ids.append(sid)

    constraints = frozenset()
    ee_roles = {}
    if task == "RE":
        ent_ids = []
        for k, name in enumerate(_names(rng, n_entity_types, used)):
            eid = f"e{k}"
            nodes[eid] = SchemaNode(eid, tuple(name.split()), "root", "major",
                                    "entity-type")
            ent_ids.append(eid)
        constraints = frozenset((rng.choice(ent_ids), rid, rng.choice(ent_ids))
                                for rid in sub_ids)
    elif task == "EE":
        role_ids = []
        for k, name in enumerate(_names(rng, n_roles, used)):
            rid = f"r{k}"
            nodes[rid] = SchemaNode(rid, tuple(name.split()), "root", "major",
                                    "arg-role")
            role_ids.append(rid)
        for sid in sub_ids:
            chosen = rng.sample(role_ids, rng.randint(1, len(role_ids)))
            ee_roles[sid] = tuple(chosen)
    return SchemaGraph(task, nodes, constraints, ee_roles, 0)


def toy_embeddings(graph: SchemaGraph, dim: int = 12, seed: int = 5) -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    table = {}
    for node in graph.nodes.values():
        for tok in node.name:
            if tok not in table:
                table[tok] = rng.normal(size=dim)
    return EmbeddingStore(dim, table)


def _span(rng: random.Random, tokens: list[str]):
    i = rng.randrange(len(tokens))
    j = min(len(tokens), i + rng.choice((1, 1, 2)))
    return i, j


def _mention(text: str, tokens: list[str], i: int, j: int) -> Mention:
    prefix = " ".join(tokens[:i])
    start = len(prefix) + (1 if prefix else 0)
    surface = " ".join(tokens[i:j])
    return Mention(surface, start, start + len(surface))


def random_example(rng: random.Random, raw: SchemaGraph, ex_id: str,
                   n_annotations=(0, 3)) -> Example:
    """A sentence with annotations drawn from the raw taxonomy's sub labels,
    respecting RE constraints and EE role lists."""
    tokens = rng.sample(_TEXT_POOL, rng.randint(5, 10))
    text = " ".join(tokens)
    subs = sorted(nid for nid, n in raw.nodes.items()
                  if n.role == raw.primary_role and n.level == "sub")
    anns = []
    for _ in range(rng.randint(*n_annotations)):
        nid = rng.choice(subs)
        label = " ".join(raw.nodes[nid].name)
        if raw.task == "NER":
            i, j = _span(rng, tokens)
            anns.append(Entity(_mention(text, tokens, i, j), label))
        elif raw.task == "RE":
            matching = sorted((h, t) for h, r, t in raw.re_constraints if r == nid)
            h_id, t_id = rng.choice(matching)
            hi, hj = _span(rng, tokens)
            ti, tj = _span(rng, tokens)
            anns.append(Relation(
                head=_mention(text, tokens, hi, hj),
                head_type=" ".join(raw.nodes[h_id].name),
                relation=label,
                tail=_mention(text, tokens, ti, tj),
                tail_type=" ".join(raw.nodes[t_id].name)))
        else:
            i, j = _span(rng, tokens)
            args = []
            for role_id in raw.ee_roles.get(nid, ()):
                if rng.random() < 0.6:
                    ai, aj = _span(rng, tokens)
                    args.append(EventArg(_mention(text, tokens, ai, aj),
                                         " ".join(raw.nodes[role_id].name)))
            anns.append(Event(_mention(text, tokens, i, j), label, tuple(args)))
    return Example(ex_id, text, tuple(dict.fromkeys(anns)))


def random_examples(raw: SchemaGraph, count: int, seed: int = 0,
                    prefix: str = "s", n_annotations=(0, 3)) -> list[Example]:
    rng = random.Random(seed)
    return [random_example(rng, raw, f"{prefix}{k}", n_annotations)
            for k in range(count)]


def canon(ann) -> tuple:
    """Order- and offset-insensitive comparison key for one annotation."""
    if isinstance(ann, Entity):
        return ("ent", ann.mention.text, ann.type)
    if isinstance(ann, Relation):
        return ("rel", ann.head.text, ann.head_type, ann.relation,
                ann.tail.text, ann.tail_type)
    return ("evt", ann.trigger.text, ann.type,
            frozenset((a.mention.text, a.role) for a in ann.args))


def canon_set(annotations) -> frozenset:
    return frozenset(canon(a) for a in annotations)


@pytest.fixture
def rng():
    return random.Random(20240901)

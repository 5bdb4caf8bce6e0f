"""Greedy decoding constrained to the current schema.

A scorer proposes a distribution over tokens; the decoder only ever emits
tokens admissible in the current grammar state, where type, relation and
role slots are restricted to walks through a trie built from the schema's
names. Rebuilding the trie after a schema change is all it takes to make
newly added names decodable, and no scorer, however adversarial, can
produce a type outside the schema.

Relation records additionally respect the schema's (head, relation, tail)
constraints progressively: the head slot admits only types heading some
constraint, the relation slot only relations seen with the accepted head,
and the tail slot only tails seen with the accepted (head, relation) pair.
Schemas that declare no constraints leave all three slots unrestricted.

Mention slots are restricted to tokens of the source sentence, a copy
constraint that stands in for a language model's lexical grounding; a
closing separator becomes admissible only once the mention holds at least
one token.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

from .lineal import ARG, BOS, EOS, REC, RESERVED, SEP, STRUCTURAL_RANK, linearize
from .schema import LabelProjector, SchemaGraph


class DeadEndError(RuntimeError):
    """No admissible token exists; carries the partial output sequence."""

    def __init__(self, message: str, partial: list[str]):
        super().__init__(f"{message} (partial: {' '.join(partial)})")
        self.partial = list(partial)


@dataclass
class TrieNode:
    children: dict[str, "TrieNode"] = field(default_factory=dict)
    terminal: bool = False


def _insert(root: TrieNode, tokens) -> None:
    node = root
    for tok in tokens:
        node = node.children.setdefault(tok, TrieNode())
    node.terminal = True


def _paths(node: TrieNode, prefix=()) -> set[tuple[str, ...]]:
    out = set()
    if node.terminal:
        out.add(tuple(prefix))
    for tok, child in node.children.items():
        out |= _paths(child, tuple(prefix) + (tok,))
    return out


@dataclass
class TypeTrie:
    """Token tries over the schema's names, one per slot category."""
    entity: TrieNode
    relation: TrieNode
    event: TrieNode
    role: TrieNode
    event_roles: dict[str, tuple[str, ...]]
    heads: frozenset[str]
    rels_by_head: dict[str, frozenset[str]]
    tails_by_pair: dict[tuple[str, str], frozenset[str]]
    constrained: bool
    version: int

    def root(self, category: str) -> TrieNode:
        return {"entity-type": self.entity, "relation": self.relation,
                "event-type": self.event, "arg-role": self.role}[category]

    def paths(self, category: str) -> set[tuple[str, ...]]:
        return _paths(self.root(category))


def build_trie(schema: SchemaGraph) -> TypeTrie:
    """Index the schema's names for decoding; cheap to rebuild on change."""
    roots = {role: TrieNode()
             for role in ("entity-type", "relation", "event-type", "arg-role")}
    for node in schema.nodes.values():
        if node.level == "root":
            continue
        _insert(roots[node.role], node.name)

    event_roles = {}
    for evt_id, role_ids in schema.ee_roles.items():
        evt = " ".join(schema.nodes[evt_id].name)
        event_roles[evt] = tuple(" ".join(schema.nodes[r].name) for r in role_ids)

    heads: set[str] = set()
    rels_by_head: dict[str, set[str]] = {}
    tails_by_pair: dict[tuple[str, str], set[str]] = {}
    for h, r, t in schema.re_constraints:
        hn = " ".join(schema.nodes[h].name)
        rn = " ".join(schema.nodes[r].name)
        tn = " ".join(schema.nodes[t].name)
        heads.add(hn)
        rels_by_head.setdefault(hn, set()).add(rn)
        tails_by_pair.setdefault((hn, rn), set()).add(tn)

    return TypeTrie(
        entity=roots["entity-type"], relation=roots["relation"],
        event=roots["event-type"], role=roots["arg-role"],
        event_roles=event_roles,
        heads=frozenset(heads),
        rels_by_head={k: frozenset(v) for k, v in rels_by_head.items()},
        tails_by_pair={k: frozenset(v) for k, v in tails_by_pair.items()},
        constrained=bool(schema.re_constraints),
        version=schema.version,
    )


def _walk(root: TrieNode, prefix: tuple[str, ...]) -> TrieNode | None:
    node = root
    for tok in prefix:
        node = node.children.get(tok)
        if node is None:
            return None
    return node


def _continuations(root: TrieNode, prefix: tuple[str, ...],
                   allowed: frozenset[str] | None) -> tuple[set[str], bool]:
    """Next tokens and terminal flag at `prefix`, optionally restricted to
    the complete names in `allowed`."""
    if allowed is None:
        node = _walk(root, prefix)
        if node is None:
            return set(), False
        return set(node.children), node.terminal
    nxt: set[str] = set()
    terminal = False
    k = len(prefix)
    for name in allowed:
        toks = tuple(name.split())
        if toks[:k] != prefix:
            continue
        if len(toks) == k:
            terminal = True
        else:
            nxt.add(toks[k])
    return nxt, terminal


# slot pipelines; (kind, name) pairs
_PIPELINE = {
    "NER": ("type", "mention"),
    "RE": ("head_type", "head_mention", "relation", "tail_type", "tail_mention"),
    "EE": ("event_type", "trigger_mention"),
}
_TYPE_SLOTS = {"type", "head_type", "relation", "tail_type", "event_type", "role"}


class GrammarState:
    """Cursor through the output grammar of one decoding run."""

    def __init__(self, task: str, trie: TypeTrie):
        self.task = task
        self.trie = trie
        self.position = "between"  # between | slot name | done
        self.type_prefix: tuple[str, ...] = ()
        self.mention_len = 0
        self.head_type: str | None = None
        self.relation: str | None = None
        self.event_type: str | None = None

    # -- slot plumbing ----------------------------------------------------

    def _slot_index(self) -> int:
        return _PIPELINE[self.task].index(self.position)

    def _allowed_names(self) -> tuple[TrieNode, frozenset[str] | None]:
        trie = self.trie
        slot = self.position
        if slot == "type":
            return trie.entity, None
        if slot == "event_type":
            return trie.event, None
        if slot == "head_type":
            return trie.entity, trie.heads if trie.constrained else None
        if slot == "relation":
            if not trie.constrained:
                return trie.relation, None
            return trie.relation, trie.rels_by_head.get(self.head_type, frozenset())
        if slot == "tail_type":
            if not trie.constrained:
                return trie.entity, None
            pair = (self.head_type, self.relation)
            return trie.entity, trie.tails_by_pair.get(pair, frozenset())
        if slot == "role":
            allowed = frozenset(trie.event_roles.get(self.event_type, ()))
            return trie.role, allowed
        raise AssertionError(slot)

    def _mention_closers(self) -> set[str]:
        slot = self.position
        if slot == "head_mention":
            return {SEP}
        if slot in ("trigger_mention", "arg_mention"):
            closers = {REC, EOS}
            if self.trie.event_roles.get(self.event_type):
                closers.add(ARG)
            return closers
        return {REC, EOS}  # mention / tail_mention

    # -- the two spec-facing operations ------------------------------------

    def admissible(self, source_tokens) -> set[str]:
        if self.position == "done":
            return set()
        if self.position == "between":
            return {REC, EOS}
        if self.position in _TYPE_SLOTS:
            root, allowed = self._allowed_names()
            nxt, terminal = _continuations(root, self.type_prefix, allowed)
            if terminal and self.type_prefix:
                nxt.add(SEP)
            return nxt
        # mention slot
        out = {t for t in source_tokens if t not in RESERVED}
        if self.mention_len >= 1:
            out |= self._mention_closers()
        return out

    def advance(self, token: str) -> None:
        if self.position == "between":
            if token == EOS:
                self.position = "done"
            else:
                self.position = _PIPELINE[self.task][0]
                self.type_prefix = ()
                self.head_type = self.relation = self.event_type = None
            return
        if self.position in _TYPE_SLOTS:
            if token == SEP:
                name = " ".join(self.type_prefix)
                if self.position == "head_type":
                    self.head_type = name
                elif self.position == "relation":
                    self.relation = name
                elif self.position == "event_type":
                    self.event_type = name
                self._next_slot()
            else:
                self.type_prefix = self.type_prefix + (token,)
            return
        # mention slot
        if token == SEP:
            self._next_slot()
        elif token == ARG:
            self.position = "role"
            self.type_prefix = ()
        elif token == REC:
            self.position = _PIPELINE[self.task][0]
            self.type_prefix = ()
            self.head_type = self.relation = self.event_type = None
        elif token == EOS:
            self.position = "done"
        else:
            self.mention_len += 1

    def _next_slot(self) -> None:
        if self.position == "role":
            self.position = "arg_mention"
        else:
            self.position = _PIPELINE[self.task][self._slot_index() + 1]
        self.type_prefix = ()
        self.mention_len = 0


def admissible_tokens(state: GrammarState, trie: TypeTrie, source_tokens) -> set[str]:
    """Tokens legal in `state`; raises DeadEndError when the set is empty."""
    state.trie = trie
    out = state.admissible(source_tokens)
    if not out:
        raise DeadEndError(f"dead end at {state.position}", [])
    return out


def _tie_key(token: str) -> str:
    if token in STRUCTURAL_RANK:
        return f"[{STRUCTURAL_RANK[token]}]"
    return token


@dataclass
class DecodeResult:
    annotations: list
    tokens: list[str]
    diagnostics: list[str]


def decode_greedy(source, scorer, schema: SchemaGraph, max_len: int = 256,
                  trie: TypeTrie | None = None) -> DecodeResult:
    """Emit the scorer's argmax over admissible tokens until [eos] or max_len.

    Ties break lexicographically by surface with the structural tokens
    ordered [eos] < [rec] < [sep] < [arg]. A sequence still open at max_len
    is force-closed with [eos] and reported in the diagnostics.
    """
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    if isinstance(source, str):
        text = source
        source_tokens = source.split()
    else:
        source_tokens = list(source)
        text = " ".join(source_tokens)
    source_tokens = tuple(dict.fromkeys(source_tokens))

    if trie is None:
        trie = build_trie(schema)
    state = GrammarState(schema.task, trie)
    tokens = [BOS]
    diagnostics: list[str] = []
    while state.position != "done":
        if len(tokens) >= max_len - 1:
            tokens.append(EOS)
            diagnostics.append(f"truncated at max_len={max_len}")
            break
        adm = state.admissible(source_tokens)
        if not adm:
            raise DeadEndError(f"dead end at {state.position}", tokens)
        scores = scorer.next_scores(source_tokens, tuple(tokens))
        best = None
        best_score = None
        for tok in sorted(adm, key=_tie_key):
            s = float(scores.get(tok, 0.0))
            if best is None or s > best_score:
                best, best_score = tok, s
        tokens.append(best)
        state.advance(best)

    from .lineal import delinearize

    parsed = delinearize(tokens, schema.task, schema, text)
    diagnostics.extend(parsed.diagnostics)
    return DecodeResult(annotations=parsed.annotations, tokens=tokens,
                        diagnostics=diagnostics)


# -- scorers ---------------------------------------------------------------


class UniformScorer:
    """Every token scores alike, so the tie order decides."""

    def next_scores(self, source_tokens, prefix):
        return {}


class PreferenceScorer:
    """Fixed per-token preferences; the adversarial probe in tests gives
    out-of-schema tokens the highest scores."""

    def __init__(self, preferences: dict[str, float], default: float = 0.0):
        self.preferences = dict(preferences)
        self.default = default

    def next_scores(self, source_tokens, prefix):
        return _DefaultScores(self.preferences, self.default)


class _DefaultScores:
    def __init__(self, table, default):
        self.table = table
        self.default = default

    def get(self, token, fallback=0.0):
        return self.table.get(token, self.default)


class HashScorer:
    """Deterministic pseudo-random scores, varying per step; pure in
    (seed, prefix length, token)."""

    _MOD = 1000003

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._base: dict[str, int] = {}

    def _h(self, token: str) -> int:
        h = self._base.get(token)
        if h is None:
            h = zlib.crc32(f"{self.seed}:{token}".encode("utf-8"))
            self._base[token] = h
        return h

    def next_scores(self, source_tokens, prefix):
        k = len(prefix)
        scorer = self

        class _Scores:
            def get(self, token, fallback=0.0):
                return ((scorer._h(token) * (k + 1) + 17 * k) % HashScorer._MOD) / HashScorer._MOD

        return _Scores()


class OracleScorer:
    """Scores 1.0 for the next token of a fixed target sequence."""

    def __init__(self, target: tuple[str, ...]):
        self.target = tuple(target)

    def next_scores(self, source_tokens, prefix):
        k = len(prefix)
        if k < len(self.target) and tuple(prefix) == self.target[:k]:
            return {self.target[k]: 1.0}
        return {}


def oracle_scorer(gold_annotations, raw: SchemaGraph, schema: SchemaGraph) -> OracleScorer:
    """Scorer whose constrained greedy decode reproduces the projected gold.

    The target sequence is the canonical linearization of the gold
    annotations after projection onto `schema`, so decoding with it must
    agree with schema filtering of the same gold.
    """
    from .corpus import _project_annotation

    projector = LabelProjector(raw, schema)
    projected = []
    for ann in gold_annotations:
        p = _project_annotation(ann, projector, schema)
        if p is not None:
            projected.append(p)
    projected = list(dict.fromkeys(projected))
    return OracleScorer(tuple(linearize(projected, schema.task)))

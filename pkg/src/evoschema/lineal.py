"""Flat token sequences for structured annotations, and back.

Output grammar, one record per extracted item, whitespace-tokenized:

    RE:  [bos] ([rec] T_h [sep] E_h [sep] R [sep] T_t [sep] E_t)* [eos]
    NER: [bos] ([rec] T [sep] E)* [eos]
    EE:  [bos] ([rec] T_evt [sep] trigger ([arg] role [sep] mention)*)* [eos]

Type/relation/role slots hold schema name tokens, mention slots hold the
mention's whitespace tokens. Records are emitted in a canonical order
(start offset of the head/trigger mention, then type name, then the
remaining fields), so linearization is invariant under permutation of its
input. The reserved surfaces below are structural and may never occur as
word tokens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

BOS = "[bos]"
EOS = "[eos]"
REC = "[rec]"
SEP = "[sep]"
ARG = "[arg]"
PAD = "[pad]"

RESERVED = frozenset({BOS, EOS, REC, SEP, ARG, PAD})

# tie-break rank used by the greedy decoder: [eos] < [rec] < [sep] < [arg]
STRUCTURAL_RANK = {EOS: 0, REC: 1, SEP: 2, ARG: 3, BOS: 4, PAD: 5}


class LinearizeError(ValueError):
    pass


def _tokens(label: str) -> list[str]:
    toks = label.split()
    for t in toks:
        if t in RESERVED:
            raise LinearizeError(f"label contains reserved surface: {label!r}")
    return toks


def _mention_tokens(text: str) -> list[str]:
    toks = text.split()
    if not toks:
        raise LinearizeError("empty mention text")
    for t in toks:
        if t in RESERVED:
            raise LinearizeError(f"mention contains reserved surface: {text!r}")
    return toks


def linearize(annotations, task: str) -> list[str]:
    """Render annotations as a [bos]..[eos] token sequence for `task`."""
    from .corpus import Entity, Event, Relation  # local import to avoid a cycle

    out = [BOS]
    if task == "NER":
        items = sorted((a for a in annotations if isinstance(a, Entity)),
                       key=lambda a: (a.mention.start, a.type, a.mention.text))
        for a in items:
            out += [REC] + _tokens(a.type) + [SEP] + _mention_tokens(a.mention.text)
    elif task == "RE":
        items = sorted((a for a in annotations if isinstance(a, Relation)),
                       key=lambda a: (a.head.start, a.relation, a.head.text,
                                      a.head_type, a.tail.start, a.tail.text,
                                      a.tail_type))
        for a in items:
            out += ([REC] + _tokens(a.head_type) + [SEP]
                    + _mention_tokens(a.head.text) + [SEP]
                    + _tokens(a.relation) + [SEP]
                    + _tokens(a.tail_type) + [SEP]
                    + _mention_tokens(a.tail.text))
    elif task == "EE":
        items = sorted((a for a in annotations if isinstance(a, Event)),
                       key=lambda a: (a.trigger.start, a.type, a.trigger.text))
        for a in items:
            out += [REC] + _tokens(a.type) + [SEP] + _mention_tokens(a.trigger.text)
            args = sorted(a.args, key=lambda g: (g.mention.start, g.role,
                                                 g.mention.text))
            for g in args:
                out += [ARG] + _tokens(g.role) + [SEP] + _mention_tokens(g.mention.text)
    else:
        raise LinearizeError(f"unknown task: {task}")
    out.append(EOS)
    return out


@dataclass
class ParseResult:
    annotations: list
    diagnostics: list[str] = field(default_factory=list)


def _take_until(tokens: list[str], i: int, stops: frozenset) -> tuple[list[str], str | None, int]:
    taken = []
    while i < len(tokens):
        tok = tokens[i]
        if tok in stops:
            return taken, tok, i + 1
        taken.append(tok)
        i += 1
    return taken, None, i


def _locate(text: str, mention: str):
    from .corpus import Mention

    pos = text.find(mention) if text else -1
    if pos < 0:
        return Mention(mention, -1, -1), False
    return Mention(mention, pos, pos + len(mention)), True


_RECORD_STOPS = frozenset({REC, EOS})
_ARG_STOPS = frozenset({ARG, REC, EOS})
_SEP_ONLY = frozenset({SEP})


def delinearize(tokens: list[str], task: str, schema, text: str = "") -> ParseResult:
    """Parse a token sequence back into annotations, never raising.

    Records whose type/relation is not a schema name are dropped and
    reported; event arguments with an unlisted role are dropped likewise.
    Mention offsets are recovered via first occurrence in `text`, else the
    (-1, -1) sentinel is used and a diagnostic emitted.
    """
    from .corpus import Entity, Event, EventArg, Relation

    result = ParseResult(annotations=[])
    diags = result.diagnostics

    ent_names = _names_of(schema, "entity-type")
    rel_names = _names_of(schema, "relation")
    evt_names = _names_of(schema, "event-type")

    i = 0
    if i < len(tokens) and tokens[i] == BOS:
        i += 1
    else:
        diags.append("missing [bos]")
    terminated = False
    while i < len(tokens):
        tok = tokens[i]
        if tok == EOS:
            terminated = True
            i += 1
            if i < len(tokens):
                diags.append("trailing tokens after [eos]")
            break
        if tok != REC:
            diags.append(f"expected [rec] or [eos], got {tok!r}")
            i += 1
            continue
        i += 1
        if task == "NER":
            i = _parse_ner(tokens, i, ent_names, text, result)
        elif task == "RE":
            i = _parse_re(tokens, i, ent_names, rel_names, text, result)
        else:
            i = _parse_ee(tokens, i, evt_names, schema, text, result)
    if not terminated:
        diags.append("unterminated sequence (missing [eos])")
    result.annotations = list(dict.fromkeys(result.annotations))
    return result


def _names_of(schema, role: str) -> set[str]:
    return {" ".join(n.name) for n in schema.nodes.values()
            if n.role == role and n.level != "root"}


def _mention_or_none(parts: list[str], text: str, result: ParseResult, what: str):
    if not parts:
        result.diagnostics.append(f"empty {what} mention")
        return None
    mention, found = _locate(text, " ".join(parts))
    if not found:
        result.diagnostics.append(f"{what} mention not in source text: "
                                  f"{' '.join(parts)!r}")
    return mention


def _parse_ner(tokens, i, ent_names, text, result):
    from .corpus import Entity

    type_toks, stop, i = _take_until(tokens, i, _SEP_ONLY)
    if stop is None:
        result.diagnostics.append("record truncated before [sep]")
        return i
    label = " ".join(type_toks)
    ment_toks, stop, i = _take_until(tokens, i, _RECORD_STOPS)
    if stop is not None:
        i -= 1  # let the main loop consume [rec]/[eos]
    mention = _mention_or_none(ment_toks, text, result, "entity")
    if mention is None:
        return i
    if label not in ent_names:
        result.diagnostics.append(f"out-of-schema type: {label!r}")
        return i
    result.annotations.append(Entity(mention, label))
    return i


def _parse_re(tokens, i, ent_names, rel_names, text, result):
    from .corpus import Relation

    fields = []
    for _ in range(4):
        part, stop, i = _take_until(tokens, i, _SEP_ONLY | _RECORD_STOPS)
        if stop != SEP:
            result.diagnostics.append("malformed relation record")
            return i - 1 if stop is not None else i
        fields.append(part)
    tail_toks, stop, i = _take_until(tokens, i, _RECORD_STOPS)
    if stop is not None:
        i -= 1
    head_t, head_toks, rel_toks, tail_t = fields
    head = _mention_or_none(head_toks, text, result, "head")
    tail = _mention_or_none(tail_toks, text, result, "tail")
    if head is None or tail is None:
        return i
    head_label, rel_label, tail_label = (" ".join(head_t), " ".join(rel_toks),
                                         " ".join(tail_t))
    for label, pool, what in ((head_label, ent_names, "head type"),
                              (rel_label, rel_names, "relation"),
                              (tail_label, ent_names, "tail type")):
        if label not in pool:
            result.diagnostics.append(f"out-of-schema {what}: {label!r}")
            return i
    result.annotations.append(Relation(head, head_label, rel_label,
                                       tail, tail_label))
    return i


def _parse_ee(tokens, i, evt_names, schema, text, result):
    from .corpus import Event, EventArg

    type_toks, stop, i = _take_until(tokens, i, _SEP_ONLY)
    if stop is None:
        result.diagnostics.append("record truncated before [sep]")
        return i
    label = " ".join(type_toks)
    trig_toks, stop, i = _take_until(tokens, i, _ARG_STOPS)
    args = []
    while stop == ARG:
        role_toks, stop, i = _take_until(tokens, i, _SEP_ONLY | _ARG_STOPS)
        if stop != SEP:
            result.diagnostics.append("malformed event argument")
            break
        ment_toks, stop, i = _take_until(tokens, i, _ARG_STOPS)
        args.append((" ".join(role_toks), ment_toks))
    if stop in (REC, EOS):
        i -= 1  # let the main loop consume [rec]/[eos]
    trigger = _mention_or_none(trig_toks, text, result, "trigger")
    if trigger is None:
        return i
    if label not in evt_names:
        result.diagnostics.append(f"out-of-schema type: {label!r}")
        return i
    evt_id = schema.find_name(label)
    allowed = {" ".join(schema.nodes[r].name)
               for r in schema.ee_roles.get(evt_id, ())}
    kept = []
    for role, ment_toks in args:
        mention = _mention_or_none(ment_toks, text, result, "argument")
        if mention is None:
            continue
        if role not in allowed:
            result.diagnostics.append(f"out-of-schema role: {role!r}")
            continue
        kept.append(EventArg(mention, role))
    result.annotations.append(Event(trigger, label, tuple(kept)))
    return i


def serialize_line(tokens: list[str]) -> str:
    return " ".join(tokens)


def parse_line(line: str) -> list[str]:
    return line.split()


def build_schema_prompt(schema, pad_len: int) -> list[str]:
    """Linearized schema constraints padded with [pad] to exactly `pad_len`.

    RE renders each (head, relation, tail) constraint as its name tokens;
    NER renders entity type names; EE renders each event type followed by
    its role names. Segments are joined by [sep] in lexicographic order.
    """
    segments: list[list[str]] = []
    if schema.task == "RE":
        triples = []
        for h, r, t in schema.re_constraints:
            triples.append((" ".join(schema.nodes[h].name),
                            " ".join(schema.nodes[r].name),
                            " ".join(schema.nodes[t].name)))
        for h, r, t in sorted(triples):
            segments.append(h.split() + r.split() + t.split())
    elif schema.task == "NER":
        for name in sorted(_names_of(schema, "entity-type")):
            segments.append(name.split())
    else:
        events = []
        for nid, node in schema.nodes.items():
            if node.role != "event-type" or node.level == "root":
                continue
            roles = [" ".join(schema.nodes[r].name)
                     for r in schema.ee_roles.get(nid, ())]
            events.append((" ".join(node.name), roles))
        for name, roles in sorted(events):
            seg = name.split()
            for role in roles:
                seg += role.split()
            segments.append(seg)

    out: list[str] = []
    for k, seg in enumerate(segments):
        if k:
            out.append(SEP)
        out += seg
    if len(out) > pad_len:
        raise LinearizeError(f"schema prompt needs {len(out)} tokens, "
                             f"pad_len is {pad_len}")
    out += [PAD] * (pad_len - len(out))
    return out

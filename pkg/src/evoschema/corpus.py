"""Annotated sentences for NER / RE / EE and their JSONL persistence.

One JSON object per line:

    {"id": "s1", "text": "...",
     "entities":  [{"text": "Queens", "start": 3, "end": 9, "type": "location"}],
     "relations": [{"head": {...}, "head_type": "location", "relation": "contains",
                    "tail": {...}, "tail_type": "location"}],
     "events":    [{"trigger": {...}, "type": "meet",
                    "args": [{"mention": {...}, "role": "place"}]}]}

Absent categories may be omitted. Mentions are `{"text", "start", "end"}`
with character offsets into the sentence (end exclusive). Identical
annotations within one example are deduplicated at load; everything else
round-trips losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .lineal import RESERVED
from .schema import LabelProjector, SchemaGraph, name_key


class DataError(ValueError):
    """Raised for malformed dataset files and offset violations."""


@dataclass(frozen=True)
class Mention:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Entity:
    mention: Mention
    type: str


@dataclass(frozen=True)
class Relation:
    head: Mention
    head_type: str
    relation: str
    tail: Mention
    tail_type: str


@dataclass(frozen=True)
class EventArg:
    mention: Mention
    role: str


@dataclass(frozen=True)
class Event:
    trigger: Mention
    type: str
    args: tuple[EventArg, ...] = ()


Annotation = Entity | Relation | Event


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    annotations: tuple[Annotation, ...] = ()


@dataclass
class SplitSet:
    train: list[Example]
    dev: list[Example]
    test: list[Example]


def _check_mention(m: Mention, text: str, example_id: str) -> None:
    if m.start == -1 and m.end == -1:
        return  # sentinel for "offset not recoverable" in prediction files
    if not (0 <= m.start < m.end <= len(text)):
        raise DataError(f"offset out of range in example {example_id}: "
                        f"[{m.start}, {m.end}) over {len(text)} chars")
    if text[m.start:m.end] != m.text:
        raise DataError(f"mention text mismatch in example {example_id}: "
                        f"{m.text!r} != text[{m.start}:{m.end}]")


def _mentions_of(ann: Annotation):
    if isinstance(ann, Entity):
        return [ann.mention]
    if isinstance(ann, Relation):
        return [ann.head, ann.tail]
    return [ann.trigger] + [a.mention for a in ann.args]


def validate_example(ex: Example) -> None:
    for tok in ex.text.split():
        if tok in RESERVED:
            raise DataError(f"example {ex.id} contains reserved token {tok!r}")
    for ann in ex.annotations:
        for m in _mentions_of(ann):
            _check_mention(m, ex.text, ex.id)


def _mention_from(obj: dict, example_id: str) -> Mention:
    try:
        return Mention(text=obj["text"], start=int(obj["start"]), end=int(obj["end"]))
    except (KeyError, TypeError) as exc:
        raise DataError(f"bad mention in example {example_id}: {exc}") from None


def example_from_dict(data: dict) -> Example:
    ex_id = str(data["id"])
    text = data["text"]
    anns: list[Annotation] = []
    for e in data.get("entities", []):
        anns.append(Entity(_mention_from(e, ex_id), name_key(e["type"])))
    for r in data.get("relations", []):
        anns.append(Relation(
            head=_mention_from(r["head"], ex_id),
            head_type=name_key(r["head_type"]),
            relation=name_key(r["relation"]),
            tail=_mention_from(r["tail"], ex_id),
            tail_type=name_key(r["tail_type"]),
        ))
    for ev in data.get("events", []):
        args = tuple(EventArg(_mention_from(a["mention"], ex_id), name_key(a["role"]))
                     for a in ev.get("args", []))
        anns.append(Event(_mention_from(ev["trigger"], ex_id),
                          name_key(ev["type"]), args))
    deduped = list(dict.fromkeys(anns))
    ex = Example(id=ex_id, text=text, annotations=tuple(deduped))
    validate_example(ex)
    return ex


def _mention_dict(m: Mention) -> dict:
    return {"text": m.text, "start": m.start, "end": m.end}


def example_to_dict(ex: Example) -> dict:
    out: dict = {"id": ex.id, "text": ex.text}
    entities, relations, events = [], [], []
    for ann in ex.annotations:
        if isinstance(ann, Entity):
            d = _mention_dict(ann.mention)
            d["type"] = ann.type
            entities.append(d)
        elif isinstance(ann, Relation):
            relations.append({"head": _mention_dict(ann.head),
                              "head_type": ann.head_type,
                              "relation": ann.relation,
                              "tail": _mention_dict(ann.tail),
                              "tail_type": ann.tail_type})
        else:
            events.append({"trigger": _mention_dict(ann.trigger),
                           "type": ann.type,
                           "args": [{"mention": _mention_dict(a.mention),
                                     "role": a.role} for a in ann.args]})
    if entities:
        out["entities"] = entities
    if relations:
        out["relations"] = relations
    if events:
        out["events"] = events
    return out


def load_jsonl(path) -> list[Example]:
    examples: list[Example] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            try:
                ex = example_from_dict(data)
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: missing field {exc.args[0]}") from None
            if ex.id in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate example id {ex.id}")
            seen_ids.add(ex.id)
            examples.append(ex)
    return examples


def save_jsonl(examples: list[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_dict(ex), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")


def _project_annotation(ann: Annotation, projector: LabelProjector,
                        current: SchemaGraph) -> Annotation | None:
    """Projected copy of one annotation, or None when its primary type
    falls outside the current schema."""
    if isinstance(ann, Entity):
        label = projector.project_name(ann.type)
        if label is None:
            return None
        return replace(ann, type=label)
    if isinstance(ann, Relation):
        rel = projector.project_name(ann.relation)
        head_t = projector.project_name(ann.head_type)
        tail_t = projector.project_name(ann.tail_type)
        if rel is None or head_t is None or tail_t is None:
            return None
        return replace(ann, relation=rel, head_type=head_t, tail_type=tail_t)
    evt = projector.project_name(ann.type)
    if evt is None:
        return None
    evt_id = current.find_name(evt)
    allowed = {name_key(current.nodes[r].name)
               for r in current.ee_roles.get(evt_id, ())}
    args = []
    for arg in ann.args:
        role = projector.project_name(arg.role)
        if role is not None and role in allowed:
            args.append(replace(arg, role=role))
    return Event(trigger=ann.trigger, type=evt, args=tuple(args))


def filter_to_schema(examples: list[Example], raw: SchemaGraph,
                     current: SchemaGraph, drop_empty: bool = False) -> list[Example]:
    """Project gold labels onto `current`, dropping what it cannot express.

    Annotations whose primary type has no ancestor in the current schema are
    removed; event arguments survive only when their role is listed for the
    projected event type. Offsets and sentence order never change. With
    `drop_empty`, examples left with no annotations are removed too.
    """
    projector = LabelProjector(raw, current)
    out: list[Example] = []
    for ex in examples:
        kept = []
        for ann in ex.annotations:
            projected = _project_annotation(ann, projector, current)
            if projected is not None:
                kept.append(projected)
        kept = list(dict.fromkeys(kept))
        if drop_empty and not kept:
            continue
        out.append(replace(ex, annotations=tuple(kept)))
    return out


def rename_labels(examples: list[Example], mapping: dict[str, str]) -> list[Example]:
    """Rewrite annotation labels through a name mapping (analogous evolution)."""
    if not mapping:
        return list(examples)
    table = {name_key(k): name_key(v) for k, v in mapping.items()}

    def sub(label: str) -> str:
        return table.get(label, label)

    out = []
    for ex in examples:
        anns: list[Annotation] = []
        for ann in ex.annotations:
            if isinstance(ann, Entity):
                anns.append(replace(ann, type=sub(ann.type)))
            elif isinstance(ann, Relation):
                anns.append(replace(ann, relation=sub(ann.relation),
                                    head_type=sub(ann.head_type),
                                    tail_type=sub(ann.tail_type)))
            else:
                anns.append(Event(ann.trigger, sub(ann.type),
                                  tuple(replace(a, role=sub(a.role))
                                        for a in ann.args)))
        out.append(replace(ex, annotations=tuple(anns)))
    return out


def stats(examples: list[Example]) -> dict:
    """Sentence count plus per-label annotation counts."""
    by_label: dict[str, int] = {}
    total = 0
    for ex in examples:
        for ann in ex.annotations:
            label = ann.type if isinstance(ann, (Entity, Event)) else ann.relation
            by_label[label] = by_label.get(label, 0) + 1
            total += 1
    return {"sentences": len(examples), "annotations": total,
            "by_label": dict(sorted(by_label.items()))}


def split_stats(splits: SplitSet) -> dict:
    return {"train": stats(splits.train), "dev": stats(splits.dev),
            "test": stats(splits.test)}

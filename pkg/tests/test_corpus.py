from __future__ import annotations

import json
import random

import pytest
from ace_tables import ace_event_graph, flat_event_schema
from conftest import build_taxonomy, canon_set, random_examples

from evoschema.corpus import (DataError, Entity, Event, EventArg, Example,
                              Mention, Relation, example_from_dict,
                              example_to_dict, filter_to_schema, load_jsonl,
                              rename_labels, save_jsonl, split_stats, stats,
                              SplitSet)
from evoschema.evolve import subset_schema
from evoschema.schema import SchemaGraph


def nyt_style_line():
    text = "In Queens , housing replaced a gravel quarry in Douglaston ."
    return {
        "id": "s1",
        "text": text,
        "relations": [{
            "head": {"text": "Queens", "start": 3, "end": 9},
            "head_type": "location",
            "relation": "contains",
            "tail": {"text": "Douglaston", "start": text.index("Douglaston"),
                     "end": text.index("Douglaston") + len("Douglaston")},
            "tail_type": "location",
        }],
    }


class TestJsonl:
    def test_single_relation_line(self):
        ex = example_from_dict(nyt_style_line())
        assert len(ex.annotations) == 1
        rel = ex.annotations[0]
        assert isinstance(rel, Relation)
        assert rel.head.text == "Queens" and rel.relation == "contains"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_jsonl(path) == []

    def test_round_trip_byte_identical(self, tmp_path):
        raw = build_taxonomy("EE", 3, 3, seed=4)
        examples = random_examples(raw, 1000, seed=99)
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        save_jsonl(examples, a)
        save_jsonl(load_jsonl(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id":"a","text":"x"}\n{oops\n')
        with pytest.raises(DataError, match=":2"):
            load_jsonl(path)

    def test_offset_violation_names_example(self, tmp_path):
        line = nyt_style_line()
        line["relations"][0]["head"]["end"] = 7  # no longer "Queens"
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(line) + "\n")
        with pytest.raises(DataError, match="s1"):
            load_jsonl(path)

    def test_duplicate_annotations_deduplicated(self):
        line = nyt_style_line()
        line["relations"].append(dict(line["relations"][0]))
        ex = example_from_dict(line)
        assert len(ex.annotations) == 1

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        row = json.dumps({"id": "a", "text": "x y"})
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(DataError, match="duplicate example id"):
            load_jsonl(path)

    def test_reserved_surface_rejected(self):
        with pytest.raises(DataError, match="reserved token"):
            example_from_dict({"id": "a", "text": "a [sep] b"})

    def test_absent_categories_omitted(self):
        ex = example_from_dict({"id": "a", "text": "plain words"})
        assert example_to_dict(ex) == {"id": "a", "text": "plain words"}


def _ace_sentence():
    text = ("The court said that Markovic will be tried and faces charges "
            "that carry a sentence .")
    def trig(word):
        pos = text.index(word)
        return Mention(word, pos, pos + len(word))
    return Example("t8", text, (
        Event(trig("sentence"), "sentence", ()),
        Event(trig("tried"), "trial hearing", ()),
        Event(trig("charges"), "charge indict", ()),
    ))


class TestFilterToSchema:
    def test_sparse_schema_keeps_only_present_labels(self):
        raw = ace_event_graph()
        it1 = flat_event_schema(["sentence", "attack", "transport"])
        out = filter_to_schema([_ace_sentence()], raw, it1)
        assert canon_set(out[0].annotations) == \
            canon_set([Event(Mention("sentence", 0, 8), "sentence", ())])

    def test_full_schema_keeps_everything(self):
        raw = ace_event_graph()
        rich = flat_event_schema(["sentence", "trial hearing", "charge indict"])
        out = filter_to_schema([_ace_sentence()], raw, rich)
        assert {a.type for a in out[0].annotations} == \
            {"sentence", "trial hearing", "charge indict"}

    def test_raw_schema_is_identity(self):
        raw = build_taxonomy("EE", 3, 3, seed=8)
        examples = random_examples(raw, 60, seed=21)
        out = filter_to_schema(examples, raw, raw)
        assert [canon_set(e.annotations) for e in out] == \
            [canon_set(e.annotations) for e in examples]

    def test_offsets_never_change(self):
        raw = build_taxonomy("NER", 3, 3, seed=9)
        examples = random_examples(raw, 40, seed=33, n_annotations=(1, 3))
        sub = subset_schema(raw, set(list(raw.sub_ids())[:4]), version=1)
        for before, after in zip(examples, filter_to_schema(examples, raw, sub)):
            spans = {(a.mention.text, a.mention.start, a.mention.end)
                     for a in before.annotations}
            for ann in after.annotations:
                assert (ann.mention.text, ann.mention.start,
                        ann.mention.end) in spans

    def test_monotone_under_growth(self):
        raw = build_taxonomy("NER", 3, 4, seed=10)
        examples = random_examples(raw, 80, seed=44, n_annotations=(1, 3))
        subs = sorted(raw.sub_ids())
        small = subset_schema(raw, set(subs[:3]), version=1)
        big = subset_schema(raw, set(subs[:7]), version=2)
        small_out = filter_to_schema(examples, raw, small)
        big_out = filter_to_schema(examples, raw, big)
        for s, b, r in zip(small_out, big_out, examples):
            # surviving mentions are pointwise subsets as the schema grows
            spans_s = {(a.mention.text, a.mention.start) for a in s.annotations}
            spans_b = {(a.mention.text, a.mention.start) for a in b.annotations}
            spans_r = {(a.mention.text, a.mention.start) for a in r.annotations}
            assert spans_s <= spans_b <= spans_r

    def test_drop_empty(self):
        raw = ace_event_graph()
        it1 = flat_event_schema(["attack"])
        kept = filter_to_schema([_ace_sentence()], raw, it1, drop_empty=True)
        assert kept == []
        kept = filter_to_schema([_ace_sentence()], raw, it1, drop_empty=False)
        assert len(kept) == 1 and kept[0].annotations == ()

    def test_event_args_filtered_by_projected_roles(self):
        raw = build_taxonomy("EE", 2, 2, seed=12)
        evt_id = sorted(raw.ee_roles)[0]
        evt_name = " ".join(raw.nodes[evt_id].name)
        roles = raw.ee_roles[evt_id]
        text = "summit visit launch debate"
        ex = Example("e", text, (Event(
            Mention("summit", 0, 6), evt_name,
            tuple(EventArg(Mention("visit", 7, 12), " ".join(raw.nodes[r].name))
                  for r in roles)),))
        snapshot = subset_schema(raw, {evt_id}, version=1)
        out = filter_to_schema([ex], raw, snapshot)
        evt = out[0].annotations[0]
        assert evt.type == evt_name
        assert {a.role for a in evt.args} == \
            {" ".join(raw.nodes[r].name) for r in snapshot.ee_roles[evt_id]}

    def test_event_args_outside_role_list_dropped(self):
        raw = build_taxonomy("EE", 2, 2, seed=12)
        evt_id = next(e for e, roles in sorted(raw.ee_roles.items())
                      if len(roles) >= 2)
        evt_name = " ".join(raw.nodes[evt_id].name)
        keep, drop = raw.ee_roles[evt_id][0], raw.ee_roles[evt_id][1]
        text = "summit visit launch debate"
        ex = Example("e", text, (Event(
            Mention("summit", 0, 6), evt_name,
            (EventArg(Mention("visit", 7, 12), " ".join(raw.nodes[keep].name)),
             EventArg(Mention("launch", 13, 19), " ".join(raw.nodes[drop].name)))),))
        base = subset_schema(raw, {evt_id}, version=1)
        narrowed = SchemaGraph(raw.task, dict(base.nodes), base.re_constraints,
                               {evt_id: (keep,)}, 1)
        out = filter_to_schema([ex], raw, narrowed)
        evt = out[0].annotations[0]
        assert [a.role for a in evt.args] == [" ".join(raw.nodes[keep].name)]


class TestRenameLabels:
    def test_rename_rewrites_all_label_positions(self):
        raw = build_taxonomy("RE", 2, 2, seed=14)
        examples = random_examples(raw, 30, seed=5, n_annotations=(1, 2))
        rel = sorted({a.relation for e in examples for a in e.annotations})[0]
        out = rename_labels(examples, {rel: "linkage"})
        flat = [a for e in out for a in e.annotations]
        assert rel not in {a.relation for a in flat}
        assert any(a.relation == "linkage" for a in flat)

    def test_empty_mapping_identity(self):
        raw = build_taxonomy("NER", 2, 2, seed=15)
        examples = random_examples(raw, 10, seed=6)
        assert rename_labels(examples, {}) == examples


class TestStats:
    def test_hand_count(self):
        raw = build_taxonomy("NER", 2, 2, seed=16)
        name = " ".join(raw.nodes[sorted(raw.sub_ids())[0]].name)
        text = "council summit verdict"
        ex1 = Example("a", text, (Entity(Mention("council", 0, 7), name),))
        ex2 = Example("b", text, (Entity(Mention("summit", 8, 14), name),))
        ex3 = Example("c", text, ())
        out = stats([ex1, ex2, ex3])
        assert out["sentences"] == 3
        assert out["by_label"][name] == 2

    def test_empty_split(self):
        out = stats([])
        assert out == {"sentences": 0, "annotations": 0, "by_label": {}}

    def test_split_stats_shape(self):
        raw = build_taxonomy("NER", 2, 2, seed=17)
        splits = SplitSet(train=random_examples(raw, 5, seed=1),
                          dev=random_examples(raw, 3, seed=2),
                          test=random_examples(raw, 2, seed=3))
        out = split_stats(splits)
        assert out["train"]["sentences"] == 5
        assert out["dev"]["sentences"] == 3
        assert out["test"]["sentences"] == 2

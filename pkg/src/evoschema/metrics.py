"""Span-based micro-F1 over exact match keys, pooled across a split.

Match keys per metric:
    entity          (mention string, type)
    rel_strict      (head string, head type, relation, tail string, tail type)
    event_trigger   (trigger string, event type)
    event_argument  (argument string, role, event type)

Strings compare exactly (case-sensitive); offsets are carried in the data
but never scored. Keys are pooled as sets per example, so repeating an
already-matched prediction cannot change any count.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .corpus import Entity, Event, Example, Relation

METRIC_KINDS = ("entity", "rel_strict", "event_trigger", "event_argument")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_gold: int
    n_correct: int


def match_keys(ex: Example, kind: str) -> set[tuple]:
    keys: set[tuple] = set()
    for ann in ex.annotations:
        if kind == "entity" and isinstance(ann, Entity):
            keys.add((ann.mention.text, ann.type))
        elif kind == "rel_strict" and isinstance(ann, Relation):
            keys.add((ann.head.text, ann.head_type, ann.relation,
                      ann.tail.text, ann.tail_type))
        elif kind == "event_trigger" and isinstance(ann, Event):
            keys.add((ann.trigger.text, ann.type))
        elif kind == "event_argument" and isinstance(ann, Event):
            for arg in ann.args:
                keys.add((arg.mention.text, arg.role, ann.type))
    return keys


def _prf(n_pred: int, n_gold: int, n_correct: int) -> PRF:
    p = n_correct / n_pred if n_pred else 0.0
    r = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f1, n_pred, n_gold, n_correct)


def micro_f1(pred: list[Example], gold: list[Example], kind: str) -> PRF:
    """Micro-pooled precision/recall/F1 of predictions against gold.

    Files must cover the same example ids; a mismatch is an error listing
    the offending ids.
    """
    if kind not in METRIC_KINDS:
        raise MetricsError(f"unknown metric kind: {kind}")
    pred_by_id = {ex.id: ex for ex in pred}
    gold_by_id = {ex.id: ex for ex in gold}
    unmatched = sorted(set(pred_by_id) ^ set(gold_by_id))
    if unmatched:
        raise MetricsError("example ids do not align: " + ", ".join(unmatched))
    n_pred = n_gold = n_correct = 0
    for ex_id in gold_by_id:
        pk = match_keys(pred_by_id[ex_id], kind)
        gk = match_keys(gold_by_id[ex_id], kind)
        n_pred += len(pk)
        n_gold += len(gk)
        n_correct += len(pk & gk)
    return _prf(n_pred, n_gold, n_correct)


def round2(value: float) -> Decimal:
    """Two decimals, round half up; the rule used for every reported score."""
    return Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def iteration_average(f1_values) -> float:
    """Arithmetic mean of per-iteration F1, reported to 2 decimals."""
    values = list(f1_values)
    if not values:
        raise MetricsError("no iterations to average")
    return float(round2(sum(values) / len(values)))


@dataclass
class MetricsReport:
    metric: str
    iterations: list[PRF]

    @property
    def ave(self) -> float:
        return iteration_average([p.f1 for p in self.iterations])

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "iterations": [
                {"i": i, "p": p.precision, "r": p.recall, "f1": p.f1,
                 "n_pred": p.n_pred, "n_gold": p.n_gold, "n_correct": p.n_correct}
                for i, p in enumerate(self.iterations, start=1)
            ],
            "ave": self.ave,
        }


def _cell(f1: float, scaled: bool) -> str:
    return str(round2(f1 if scaled else f1 * 100.0))


def render_report(rows: dict[str, list[float]], scaled: bool = False) -> str:
    """Aligned text table, one row per label, F1 x100 to 2 decimals plus AVE.

    `rows` maps a row label (model, metric, ...) to per-iteration F1 values;
    pass scaled=True when the values are already on the 0-100 scale. All
    rows must have the same number of iterations.
    """
    if not rows:
        raise MetricsError("nothing to render")
    lengths = {len(v) for v in rows.values()}
    if len(lengths) != 1:
        raise MetricsError(f"ragged rows: iteration counts {sorted(lengths)}")
    n = lengths.pop()
    if n == 0:
        raise MetricsError("rows have no iterations")

    header = [""] + [f"Iter {i}" for i in range(1, n + 1)] + ["AVE"]
    body = []
    for label, values in rows.items():
        cells = [_cell(v, scaled) for v in values]
        ave = _cell(sum(v if scaled else v * 100.0 for v in values) / n, True)
        body.append([label] + cells + [ave])

    widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append(" | ".join(cell.ljust(widths[c]) if c == 0 else cell.rjust(widths[c])
                                for c, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"



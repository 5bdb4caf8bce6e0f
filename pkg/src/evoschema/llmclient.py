"""Few-shot relation-extraction prompting against a chat-completion API.

The prompt template is fixed. Blocks are separated by blank lines, in
order: task description, the schema as a quoted bracketed list, one
Context/answer pair per demonstration, a confirmation line, the schema
again, the query context, and the unanswered trailing line. A demo answer
renders its triples as numbered clauses:

    The relation involved in the above sentence are: 1.The head entity is
    H, relation is R, tail entity is T;2.The head entity is ...;

The parser is the inverse of the clause renderer and tolerates the usual
model deviations: '.' or ';' terminators, leading whitespace after the
number, and parenthetical asides appended to the tail entity.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field

import requests

from .corpus import Mention, Relation
from .schema import SchemaGraph, name_key

log = logging.getLogger(__name__)

DESCRIPTION = ("There are some relation extraction samples, relation must be "
               "taken from schema, head entity and tail entity must be taken "
               "from context. Relation, head entity and tail entity may have "
               "multiple.")
CONFIRMATION = ("Do you understand how to do relation extraction based on "
                "schema? Now it's your turn to do relation extraction.")
ANSWER_LEAD = "The relation involved in the above sentence are:"


class LLMError(ValueError):
    pass


@dataclass
class PromptSpec:
    schema_names: list[str]
    demos: list[tuple[str, list[tuple[str, str, str]]]] = field(default_factory=list)
    query: str = ""
    description: str = DESCRIPTION


def _schema_line(names) -> str:
    return "schema: " + json.dumps(list(names))


def render_clauses(triples) -> str:
    """Numbered 'head entity ... relation ... tail entity' clauses."""
    parts = []
    for n, (h, r, t) in enumerate(triples, start=1):
        parts.append(f"{n}.The head entity is {h}, relation is {r}, "
                     f"tail entity is {t};")
    return "".join(parts)


def build_icl_prompt(spec: PromptSpec) -> str:
    """Deterministic prompt for the fixed template described above."""
    allowed = {name_key(n) for n in spec.schema_names}
    blocks = [spec.description, _schema_line(spec.schema_names)]
    for context, triples in spec.demos:
        for _, r, _ in triples:
            if name_key(r) not in allowed:
                raise LLMError(f"demo relation outside schema: {r!r}")
        blocks.append(f"Context: {context}")
        blocks.append(f"{ANSWER_LEAD} {render_clauses(triples)}")
    blocks.append(CONFIRMATION)
    blocks.append(_schema_line(spec.schema_names))
    blocks.append(f"Context: {spec.query}")
    blocks.append(ANSWER_LEAD)
    return "\n\n".join(blocks)


_CLAUSE = re.compile(
    r"[Tt]he\s+head\s+entity\s+is\s+(?P<head>.+?),\s*(?:the\s+)?relation\s+is\s+"
    r"(?P<rel>.+?),\s*(?:the\s+)?tail\s+entity\s+is\s+(?P<tail>.+?)"
    r"(?=;|\n|$|\.(?:\s|$))",
    re.DOTALL,
)
_ASIDE = re.compile(r"\s*\([^()]*\)\s*$")


def _clean(text: str) -> str:
    text = text.strip()
    text = _ASIDE.sub("", text)
    return text.strip().rstrip(".").strip()


def _mention(text: str, context: str) -> Mention:
    pos = context.find(text) if context else -1
    if pos < 0:
        return Mention(text, -1, -1)
    return Mention(text, pos, pos + len(text))


def parse_llm_response(text: str, schema: SchemaGraph,
                       context: str = "") -> tuple[list[Relation], list[str]]:
    """Extract relation triples from a model response.

    Triples whose relation is not a schema name are dropped with a
    diagnostic; mention offsets are recovered from `context` when possible,
    else the (-1, -1) sentinel is used. Never raises on malformed text.
    """
    relations = {name_key(n.name) for n in schema.nodes.values()
                 if n.role == "relation" and n.level != "root"}
    entity_types = [" ".join(n.name) for n in schema.nodes.values()
                    if n.role == "entity-type" and n.level != "root"]
    fallback_type = entity_types[0] if len(entity_types) == 1 else "entity"

    out: list[Relation] = []
    diagnostics: list[str] = []
    for m in _CLAUSE.finditer(text):
        head, rel, tail = _clean(m["head"]), _clean(m["rel"]), _clean(m["tail"])
        if not head or not rel or not tail:
            diagnostics.append(f"incomplete clause at offset {m.start()}")
            continue
        rel_key = name_key(rel)
        if rel_key not in relations:
            diagnostics.append(f"relation not in schema: {rel!r}")
            continue
        for mention, what in ((head, "head"), (tail, "tail")):
            if context and context.find(mention) < 0:
                diagnostics.append(f"{what} entity not in context: {mention!r}")
        out.append(Relation(head=_mention(head, context),
                            head_type=fallback_type,
                            relation=rel_key,
                            tail=_mention(tail, context),
                            tail_type=fallback_type))
    return list(dict.fromkeys(out)), diagnostics


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    token_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3


def _http_post(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


class ChatClient:
    """Minimal chat-completion client with retries.

    `transport(url, headers, payload, timeout) -> dict` is injectable so
    tests run against canned responses; the bearer token is read from the
    configured environment variable at call time and never logged.
    """

    def __init__(self, config: EndpointConfig, transport=None):
        self.config = config
        self.transport = transport or _http_post

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        last_error = None
        for attempt in range(self.config.max_retries):
            try:
                data = self.transport(self.config.base_url, self._headers(),
                                      payload, self.config.timeout)
                return data["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - retried, then re-raised
                last_error = exc
                log.warning("chat completion attempt %d/%d failed: %s",
                            attempt + 1, self.config.max_retries,
                            type(exc).__name__)
                if attempt + 1 < self.config.max_retries:
                    time.sleep(min(2.0 ** attempt * 0.5, 8.0))
        raise LLMError(f"request failed after {self.config.max_retries} "
                       f"attempts: {last_error}")

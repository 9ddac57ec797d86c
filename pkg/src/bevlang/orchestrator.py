"""LLM orchestration: prompt assembly, the tool loop, and LLM clients.

The loop sends the map and the operator list in the system prompt, parses
the model's structured JSON replies, executes requested call expressions
through the parser and evaluator only (model text is never executed as
code), and feeds results back as user-role messages until the model
produces a final answer.

Budgets: a malformed JSON reply or an unparsable call string triggers a
repair re-prompt, at most max_repairs times per question. Each executed
batch of calls is one tool round, at most max_tool_rounds per question;
runtime evaluation errors are reported back to the model inside the tool
results and do not consume the repair budget.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from .calls import eval_call, parse_call, pretty_print
from .errors import (
    BackendRefusal,
    CallParseError,
    EvalTypeError,
    MalformedResponseError,
    ScriptError,
    SpatialArgError,
    ToolBudgetError,
    TransportError,
    UnknownObjectError,
)
from .objects import LanguageEnhancedMap, MapObject, _object_to_dict
from .prompts import load_template
from .spatial_ops import registry_lines

DEFAULT_MAX_TOOL_ROUNDS = 3
DEFAULT_MAX_REPAIRS = 2
PROMPT_OBJECT_CAP = 200

_SYSTEM_TEMPLATE = load_template("system_prompt")
_RESPONSE_FORMAT = load_template("response_format").template.strip()
_REPAIR_TEMPLATE = load_template("repair")
_TOOL_RESULT_TEMPLATE = load_template("tool_result")


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad message role {self.role!r}")


@runtime_checkable
class LlmClient(Protocol):
    name: str

    def complete(self, messages: Sequence[Message]) -> str: ...


@dataclass(frozen=True)
class ToolCallRecord:
    call: str
    ok: bool
    result_repr: str
    error: str | None = None


@dataclass(frozen=True)
class StructuredResponse:
    """One parsed model reply, plus fields derived by the engine."""

    inferred_query: str
    query_achievable: bool
    spatial_reasoning_functions: tuple[str, ...]
    explanation: str
    answer: object | None = None
    referenced_object_ids: tuple[int, ...] = ()
    tool_trace: tuple[ToolCallRecord, ...] = ()

    def to_dict(self) -> dict:
        d = {
            "inferred_query": self.inferred_query,
            "query_achievable": self.query_achievable,
            "spatial_reasoning_functions": list(self.spatial_reasoning_functions),
            "explanation": self.explanation,
        }
        if self.answer is not None:
            d["answer"] = self.answer
        d["referenced_object_ids"] = list(self.referenced_object_ids)
        d["tool_trace"] = [
            {"call": r.call, "ok": r.ok, "result": r.result_repr, "error": r.error}
            for r in self.tool_trace
        ]
        return d


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        first_newline = text.find("\n")
        if first_newline != -1 and text.endswith("```"):
            text = text[first_newline + 1 : -3].strip()
    return text


def parse_structured_response(text: str) -> StructuredResponse:
    """Parse a model reply into the required four-field JSON structure."""
    try:
        doc = json.loads(_strip_code_fence(text))
    except json.JSONDecodeError as exc:
        raise MalformedResponseError(f"reply is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedResponseError("reply must be a JSON object")
    for key, kind in (
        ("inferred_query", str),
        ("query_achievable", bool),
        ("spatial_reasoning_functions", list),
        ("explanation", str),
    ):
        if key not in doc:
            raise MalformedResponseError(f"reply is missing required field {key!r}")
        if not isinstance(doc[key], kind):
            raise MalformedResponseError(f"field {key!r} must be a {kind.__name__}")
    calls = doc["spatial_reasoning_functions"]
    if not all(isinstance(c, str) for c in calls):
        raise MalformedResponseError("spatial_reasoning_functions must contain strings")
    return StructuredResponse(
        inferred_query=doc["inferred_query"],
        query_achievable=doc["query_achievable"],
        spatial_reasoning_functions=tuple(calls),
        explanation=doc["explanation"],
        answer=doc.get("answer"),
    )


def prompt_map_json(map_: LanguageEnhancedMap, object_cap: int = PROMPT_OBJECT_CAP) -> str:
    """Single-line map JSON for prompts: per-object listing without cells.

    Maps larger than object_cap are truncated to the cap, closest objects
    to the ego vehicle first, then re-sorted by id.
    """
    objects = list(map_.objects)
    truncated = False
    if len(objects) > object_cap:
        objects = sorted(objects, key=lambda o: (o.distance_to(), o.object_id))[:object_cap]
        objects = sorted(objects, key=lambda o: o.object_id)
        truncated = True
    entries = []
    for obj in objects:
        d = _object_to_dict(obj)
        entries.append(
            {k: d[k] for k in ("object_id", "position", "area", "crop_descriptions")}
        )
    doc: dict = {"scene_token": map_.scene_token, "objects": entries}
    if truncated:
        doc["truncated_to_closest"] = object_cap
    return json.dumps(doc)


def assemble_system_prompt(map_: LanguageEnhancedMap) -> str:
    tool_lines = "\n".join(f"- {line}" for line in registry_lines())
    return _SYSTEM_TEMPLATE.substitute(
        map_json=prompt_map_json(map_),
        tool_lines=tool_lines,
        response_format=_RESPONSE_FORMAT,
    )


def render_result(value) -> str:
    """Render an evaluator result for the model.

    Object lists render as `ids=[...]; objects=[...]` with full-precision
    positions, distances as the float's repr, so values survive a
    parse round trip exactly.
    """
    if isinstance(value, list):
        ids = [o.object_id for o in value]
        objects = [
            {
                "object_id": o.object_id,
                "position": [o.position[0], o.position[1]],
                "distance_m": o.distance_to(),
            }
            for o in value
        ]
        return f"ids={json.dumps(ids)}; objects={json.dumps(objects)}"
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


@dataclass
class Conversation:
    """A chat session bound to one map and one LLM client."""

    map: LanguageEnhancedMap
    llm: LlmClient
    max_tool_rounds: int = DEFAULT_MAX_TOOL_ROUNDS
    max_repairs: int = DEFAULT_MAX_REPAIRS
    messages: list[Message] = field(default_factory=list)

    def __post_init__(self):
        if not self.messages:
            self.messages.append(Message("system", assemble_system_prompt(self.map)))


def _execute_round(
    calls: Sequence[str], objects: Sequence[MapObject]
) -> tuple[list[ToolCallRecord], set[int]]:
    """Run one batch of call strings; returns records and referenced ids.

    Unparsable call strings raise CallParseError (the caller turns that
    into a repair); runtime evaluation errors become error records.
    """
    records: list[ToolCallRecord] = []
    referenced: set[int] = set()
    exprs = []
    for raw in calls:
        exprs.append((raw, parse_call(raw)))
    for raw, expr in exprs:
        canonical = pretty_print(expr)
        try:
            value = eval_call(expr, objects)
        except (UnknownObjectError, SpatialArgError, EvalTypeError) as exc:
            records.append(ToolCallRecord(canonical, ok=False, result_repr="", error=str(exc)))
            continue
        if isinstance(value, list):
            referenced.update(o.object_id for o in value)
        records.append(ToolCallRecord(canonical, ok=True, result_repr=render_result(value)))
    return records, referenced


def _tool_result_message(records: Sequence[ToolCallRecord]) -> str:
    lines = []
    for r in records:
        lines.append(f"{r.call} -> {r.result_repr if r.ok else f'error: {r.error}'}")
    return _TOOL_RESULT_TEMPLATE.substitute(results="\n".join(lines))


def _answer_ids(answer) -> set[int]:
    if isinstance(answer, list) and all(
        isinstance(v, int) and not isinstance(v, bool) for v in answer
    ):
        return set(answer)
    return set()


def ask(conversation: Conversation, question: str) -> StructuredResponse:
    """Run the tool loop for one user question.

    Appends to the conversation, so follow-up questions see prior turns.
    Raises MalformedResponseError when the repair budget runs out and
    ToolBudgetError when the model never stops requesting calls.
    """
    conversation.messages.append(Message("user", question))
    trace: list[ToolCallRecord] = []
    referenced: set[int] = set()
    repairs_left = conversation.max_repairs
    rounds_used = 0
    while True:
        raw = conversation.llm.complete(conversation.messages)
        try:
            response = parse_structured_response(raw)
            if response.spatial_reasoning_functions and response.answer is None:
                if rounds_used >= conversation.max_tool_rounds:
                    raise ToolBudgetError(
                        f"no final answer after {rounds_used} tool rounds",
                        trace=tuple(trace),
                    )
                records, ids = _execute_round(
                    response.spatial_reasoning_functions, conversation.map.objects
                )
            else:
                records, ids = [], set()
        except (MalformedResponseError, CallParseError) as exc:
            if repairs_left <= 0:
                attempts = conversation.max_repairs + 1
                raise MalformedResponseError(
                    f"unusable reply after {attempts} attempts: {exc}", attempts=attempts
                ) from exc
            repairs_left -= 1
            conversation.messages.append(Message("assistant", raw))
            conversation.messages.append(
                Message("user", _REPAIR_TEMPLATE.substitute(error=str(exc)))
            )
            continue
        conversation.messages.append(Message("assistant", raw))
        if not records:
            referenced |= _answer_ids(response.answer)
            return StructuredResponse(
                inferred_query=response.inferred_query,
                query_achievable=response.query_achievable,
                spatial_reasoning_functions=response.spatial_reasoning_functions,
                explanation=response.explanation,
                answer=response.answer,
                referenced_object_ids=tuple(sorted(referenced | _answer_ids(response.answer))),
                tool_trace=tuple(trace),
            )
        rounds_used += 1
        trace.extend(records)
        referenced |= ids
        conversation.messages.append(Message("user", _tool_result_message(records)))


def answer_query(
    map_: LanguageEnhancedMap,
    llm: LlmClient,
    question: str,
    max_tool_rounds: int = DEFAULT_MAX_TOOL_ROUNDS,
    max_repairs: int = DEFAULT_MAX_REPAIRS,
) -> StructuredResponse:
    """One-shot convenience wrapper: fresh conversation, single question."""
    conversation = Conversation(
        map=map_, llm=llm, max_tool_rounds=max_tool_rounds, max_repairs=max_repairs
    )
    return ask(conversation, question)


class ScriptedLlm:
    """Deterministic LLM: ordered (match, reply) regex rules.

    Each rule's pattern is searched against the most recent user-role
    message; the first hit wins and its reply is returned with match
    groups expanded (so replies can echo captured text). No matching rule
    raises ScriptError.
    """

    name = "scripted"

    def __init__(self, rules: Sequence[dict]):
        self.rules = []
        for i, rule in enumerate(rules):
            if not isinstance(rule, dict) or "match" not in rule or "reply" not in rule:
                raise ScriptError(f"rule {i} must be an object with 'match' and 'reply'")
            try:
                pattern = re.compile(rule["match"], re.DOTALL)
            except re.error as exc:
                raise ScriptError(f"rule {i} has a bad regex: {exc}") from exc
            self.rules.append((pattern, rule["reply"]))

    @classmethod
    def from_file(cls, path) -> "ScriptedLlm":
        with open(path, encoding="utf-8") as fh:
            rules = json.load(fh)
        if not isinstance(rules, list):
            raise ScriptError("script file must hold a JSON array of rules")
        return cls(rules)

    def complete(self, messages: Sequence[Message]) -> str:
        last_user = next((m.content for m in reversed(messages) if m.role == "user"), "")
        for pattern, reply in self.rules:
            m = pattern.search(last_user)
            if m is not None:
                return m.expand(reply)
        raise ScriptError(f"no script rule matched message: {last_user[:120]!r}")


_MAP_JSON_RE = re.compile(r"^Scene map JSON:\n(\{.*\})$", re.MULTILINE)


class NumericGuessLlm:
    """Ablation client: answers spatial questions without function calls.

    Reads the map JSON out of the system prompt and does its own
    arithmetic, but only at integer precision: positions and distances
    are rounded to whole meters before any comparison. That mimics a
    model eyeballing coordinates, and is measurably worse than the
    operator path whenever exact geometry matters.
    """

    name = "numeric-guess"

    _PATTERNS: tuple[tuple[str, str], ...] = (
        (r"Which objects are in front of the ego vehicle\?", "front"),
        (r"Which objects are behind the ego vehicle\?", "rear"),
        (r"Which objects are to the left of the ego vehicle\?", "left"),
        (r"Which objects are to the right of the ego vehicle\?", "right"),
        (r"Which objects are within ([0-9.]+) meters of the ego vehicle\?", "dist_ego"),
        (r"Which are the ([0-9]+) objects closest to the ego vehicle\?", "k_closest"),
        (r"Which are the ([0-9]+) objects farthest from the ego vehicle\?", "k_farthest"),
        (r"Which objects are within ([0-9.]+) meters of object ([0-9]+)\?", "dist_obj"),
        (r"Which are the ([0-9]+) objects closest to object ([0-9]+)\?", "k_closest_obj"),
        (r"Which are the ([0-9]+) objects farthest from object ([0-9]+)\?", "k_farthest_obj"),
        (r"How far is object ([0-9]+) from the ego vehicle\?", "dist_to_ego"),
        (r"How far is object ([0-9]+) from object ([0-9]+)\?", "dist_between"),
    )

    def complete(self, messages: Sequence[Message]) -> str:
        system = next((m.content for m in messages if m.role == "system"), "")
        question = next((m.content for m in reversed(messages) if m.role == "user"), "")
        m = _MAP_JSON_RE.search(system)
        if m is None:
            raise ScriptError("no map JSON found in the system prompt")
        doc = json.loads(m.group(1))
        positions = {
            int(o["object_id"]): (round(float(o["position"][0])), round(float(o["position"][1])))
            for o in doc["objects"]
        }
        answer = self._answer(question, positions)
        return json.dumps(
            {
                "inferred_query": question.strip(),
                "query_achievable": answer is not None,
                "spatial_reasoning_functions": [],
                "explanation": "Estimated directly from the map coordinates.",
                "answer": answer,
            }
        )

    @staticmethod
    def _dist(a: tuple[int, int], b: tuple[int, int] = (0, 0)) -> int:
        return round(((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5)

    def _answer(self, question: str, positions: dict[int, tuple[int, int]]):
        for pattern, kind in self._PATTERNS:
            m = re.search(pattern, question)
            if m is None:
                continue
            d = self._dist
            if kind == "front":
                return sorted(i for i, p in positions.items() if p[0] > 0)
            if kind == "rear":
                return sorted(i for i, p in positions.items() if p[0] < 0)
            if kind == "left":
                return sorted(i for i, p in positions.items() if p[1] > 0)
            if kind == "right":
                return sorted(i for i, p in positions.items() if p[1] < 0)
            if kind == "dist_ego":
                limit = float(m.group(1))
                return sorted(i for i, p in positions.items() if d(p) <= limit)
            if kind in ("k_closest", "k_farthest"):
                k = int(m.group(1))
                far = kind == "k_farthest"
                ranked = sorted(
                    positions, key=lambda i: (-d(positions[i]) if far else d(positions[i]), i)
                )
                return sorted(ranked[:k])
            if kind == "dist_obj":
                limit, anchor = float(m.group(1)), int(m.group(2))
                if anchor not in positions:
                    return []
                a = positions[anchor]
                return sorted(
                    i for i, p in positions.items() if i != anchor and d(p, a) <= limit
                )
            if kind in ("k_closest_obj", "k_farthest_obj"):
                k, anchor = int(m.group(1)), int(m.group(2))
                if anchor not in positions:
                    return []
                a = positions[anchor]
                far = kind == "k_farthest_obj"
                ranked = sorted(
                    (i for i in positions if i != anchor),
                    key=lambda i: (-d(positions[i], a) if far else d(positions[i], a), i),
                )
                return sorted(ranked[:k])
            if kind == "dist_to_ego":
                anchor = int(m.group(1))
                return float(d(positions[anchor])) if anchor in positions else 0.0
            if kind == "dist_between":
                a, b = int(m.group(1)), int(m.group(2))
                if a not in positions or b not in positions:
                    return 0.0
                return float(d(positions[a], positions[b]))
        return None


class HttpLlm:
    """LLM backed by a REST endpoint (POST {base_url}/complete).

    Request JSON: {"messages": [{"role", "content"}, ...]}. Response
    JSON: {"text": "..."}. Retries and refusal semantics match
    HttpCaptioner.
    """

    def __init__(self, base_url: str, name: str = "http-llm", retries: int = 2,
                 backoff_s: float = 0.2, timeout_s: float = 30.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.name = name
        self.retries = retries
        self.backoff_s = backoff_s
        self._client = client or httpx.Client(timeout=timeout_s)

    def complete(self, messages: Sequence[Message]) -> str:
        import httpx

        payload = {"messages": [{"role": m.role, "content": m.content} for m in messages]}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt and self.backoff_s:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(f"{self.base_url}/complete", json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if 400 <= response.status_code < 500:
                raise BackendRefusal(f"LLM refused ({response.status_code}): {response.text}")
            if response.status_code >= 500:
                last_error = TransportError(f"LLM returned {response.status_code}")
                continue
            try:
                text = response.json()["text"]
            except (ValueError, KeyError) as exc:
                raise TransportError(f"bad completion response: {exc}") from exc
            if not isinstance(text, str):
                raise TransportError("completion response 'text' must be a string")
            return text
        raise TransportError(f"LLM unreachable after {self.retries + 1} attempts: {last_error}")

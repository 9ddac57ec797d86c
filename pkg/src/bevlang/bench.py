"""VQA benchmark: question generation, scoring, and baselines.

Two assessment styles share the harness:

- multiple-choice questions, 5 per category and 4 categories per scene
  (20 questions), scored by accuracy
- spatial queries with exact expected answers derived from a ground-truth
  call expression, scored by Jaccard overlap for set answers and by
  absolute error in meters for distance answers

Answerer failures never abort a run: a failed MCQ counts as incorrect, a
failed set query scores Jaccard 0, and a failed distance query is counted
but excluded from the error mean.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from .calls import eval_call, parse_call
from .errors import BevlangError, GenerationError, ScoringError
from .objects import LanguageEnhancedMap, MapObject
from .orchestrator import LlmClient, Message, answer_query, prompt_map_json
from .prompts import load_template

CATEGORIES = (
    "instance_attribute",
    "instance_counting",
    "visual_reasoning",
    "spatial_reasoning",
)
QUESTIONS_PER_CATEGORY = 5
N_CHOICES = 4
MIN_OBJECTS_FOR_QUESTIONS = 4

_QUESTION_GEN_TEMPLATE = load_template("question_gen")

_OBJECT_FILLERS = (
    "a pedestrian",
    "a traffic cone",
    "a fire hydrant",
    "a shopping cart",
    "a phone booth",
    "a newspaper stand",
    "a mailbox",
    "a street bench",
)
_BACKGROUND_FILLERS = (
    "inside a tunnel",
    "in a parking garage",
    "on a dirt track",
    "under a bridge",
    "on a ferry deck",
)
_OCR_FILLERS = ("NO PARKING", "EXIT 12", "DETOUR", "BUS LANE")


@dataclass(frozen=True)
class BenchQuestion:
    scene_token: str
    category: str
    question: str
    choices: tuple[str, str, str, str]
    correct_index: int

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.question:
            raise ValueError("question text must be non-empty")
        if len(self.choices) != N_CHOICES or any(not isinstance(c, str) or not c for c in self.choices):
            raise ValueError("choices must be 4 non-empty strings")
        if len(set(self.choices)) != N_CHOICES:
            raise ValueError("choices must be distinct")
        if not 0 <= self.correct_index < N_CHOICES:
            raise ValueError("correct_index must be in 0..3")

    def to_dict(self) -> dict:
        return {
            "scene_token": self.scene_token,
            "category": self.category,
            "question": self.question,
            "choices": list(self.choices),
            "correct_index": self.correct_index,
        }


@dataclass(frozen=True)
class SpatialQuery:
    scene_token: str
    kind: str  # "set" | "distance"
    question: str
    call: str  # ground-truth call expression

    def __post_init__(self):
        if self.kind not in ("set", "distance"):
            raise ValueError(f"kind must be 'set' or 'distance', got {self.kind!r}")
        parse_call(self.call)

    def to_dict(self) -> dict:
        return {
            "scene_token": self.scene_token,
            "kind": self.kind,
            "question": self.question,
            "call": self.call,
        }


def jaccard(predicted: set, expected: set) -> float:
    """Set overlap; two empty sets agree perfectly (1.0)."""
    predicted, expected = set(predicted), set(expected)
    if not predicted and not expected:
        return 1.0
    return len(predicted & expected) / len(predicted | expected)


def distance_error(predicted_m: float, expected_m: float) -> float:
    """Absolute error in meters."""
    predicted_m, expected_m = float(predicted_m), float(expected_m)
    for v in (predicted_m, expected_m):
        if v != v or v in (float("inf"), float("-inf")):
            raise ScoringError(f"distance must be finite, got {v}")
    return abs(predicted_m - expected_m)


def max_pairwise_distance(objects: Sequence[MapObject]) -> float:
    """Largest planar distance among objects and the ego position."""
    points = [(0.0, 0.0)] + [o.position for o in objects]
    best = 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            dx = points[i][0] - points[j][0]
            dy = points[i][1] - points[j][1]
            best = max(best, (dx * dx + dy * dy) ** 0.5)
    return best


def expected_spatial(map_: LanguageEnhancedMap, query: SpatialQuery):
    """Ground truth for a query: a set of ids or a distance in meters."""
    value = eval_call(parse_call(query.call), map_.objects)
    if query.kind == "set":
        if not isinstance(value, list):
            raise ScoringError(f"call {query.call!r} does not produce an object set")
        return {o.object_id for o in value}
    if not isinstance(value, float):
        raise ScoringError(f"call {query.call!r} does not produce a distance")
    return value


# ---------------------------------------------------------------------------
# answerers


@runtime_checkable
class McqAnswerer(Protocol):
    name: str

    def answer(self, map_: LanguageEnhancedMap, question: BenchQuestion) -> int: ...


@runtime_checkable
class SpatialAnswerer(Protocol):
    name: str

    def answer(self, map_: LanguageEnhancedMap, query: SpatialQuery): ...


class OracleMcqAnswerer:
    """Always right; pins the top of the accuracy scale."""

    name = "oracle-mcq"

    def answer(self, map_, question):
        return question.correct_index


class RandomMcqAnswerer:
    """Uniform guess over the four choices."""

    def __init__(self, seed: int = 0):
        self.name = "random-mcq"
        self._rng = random.Random(seed)

    def answer(self, map_, question):
        return self._rng.randrange(N_CHOICES)


_LETTERS = ("A", "B", "C", "D")


class LlmMcqAnswerer:
    """Asks the tool loop; accepts a letter, an index, or the choice text."""

    def __init__(self, llm: LlmClient, name: str | None = None):
        self.llm = llm
        self.name = name or f"llm-mcq({llm.name})"

    def answer(self, map_, question):
        lettered = "\n".join(f"{_LETTERS[i]}. {c}" for i, c in enumerate(question.choices))
        prompt = (
            f"{question.question}\nChoices:\n{lettered}\n"
            "Answer with the letter of the single correct choice."
        )
        response = answer_query(map_, self.llm, prompt)
        return parse_choice(response.answer, question.choices)


def parse_choice(answer, choices: Sequence[str]) -> int:
    """Interpret an answer as a choice index, letter, or exact text."""
    if isinstance(answer, bool):
        raise ScoringError(f"not a choice: {answer!r}")
    if isinstance(answer, int):
        if 0 <= answer < len(choices):
            return answer
        raise ScoringError(f"choice index out of range: {answer}")
    if isinstance(answer, str):
        text = answer.strip()
        if text in choices:
            return choices.index(text)
        m = re.fullmatch(r"([A-Da-d])[.)]?", text)
        if m:
            return _LETTERS.index(m.group(1).upper())
    raise ScoringError(f"not a choice: {answer!r}")


class ExactSpatialAnswerer:
    """Evaluates the query's own ground-truth call; pins the top score."""

    name = "exact-spatial"

    def answer(self, map_, query):
        value = eval_call(parse_call(query.call), map_.objects)
        if isinstance(value, list):
            return [o.object_id for o in value]
        return value


class RandomSpatialAnswerer:
    """Uniform baseline: coin-flip membership per object for set queries,
    uniform draw over [0, max pairwise distance] for distance queries."""

    def __init__(self, seed: int = 0):
        self.name = "random-spatial"
        self._rng = random.Random(seed)

    def answer(self, map_, query):
        if query.kind == "set":
            return [o.object_id for o in map_.objects if self._rng.random() < 0.5]
        return self._rng.uniform(0.0, max_pairwise_distance(map_.objects))


class OrchestratorSpatialAnswerer:
    """Routes the query text through the tool loop and validates the answer."""

    def __init__(self, llm: LlmClient, name: str | None = None,
                 max_tool_rounds: int | None = None):
        self.llm = llm
        self.name = name or f"orchestrator({llm.name})"
        self.max_tool_rounds = max_tool_rounds

    def answer(self, map_, query):
        kwargs = {}
        if self.max_tool_rounds is not None:
            kwargs["max_tool_rounds"] = self.max_tool_rounds
        response = answer_query(map_, self.llm, query.question, **kwargs)
        answer = response.answer
        if query.kind == "set":
            if not isinstance(answer, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in answer
            ):
                raise ScoringError(f"set query needs a list of ids, got {answer!r}")
            return answer
        if isinstance(answer, bool) or not isinstance(answer, (int, float)):
            raise ScoringError(f"distance query needs a number, got {answer!r}")
        return float(answer)


# ---------------------------------------------------------------------------
# question generation


def _place_choices(rng: random.Random, correct: str, pool: Sequence[str]):
    """Pick 3 distinct distractors from pool and slot in the correct one."""
    distractors: list[str] = []
    seen = {correct}
    for cand in pool:
        if cand not in seen:
            distractors.append(cand)
            seen.add(cand)
        if len(distractors) == N_CHOICES - 1:
            break
    if len(distractors) < N_CHOICES - 1:
        raise GenerationError(
            f"could not find {N_CHOICES - 1} distinct distractors for {correct!r}",
            category="choices",
        )
    correct_index = rng.randrange(N_CHOICES)
    choices = distractors[:correct_index] + [correct] + distractors[correct_index:]
    return tuple(choices), correct_index


def counting_distractors(count: int) -> tuple[int, int, int]:
    """Distractor counts around the true count (never negative)."""
    if count < 1:
        return (1, 2, 3)
    return (count - 1, count + 1, count + 2)


def _shuffled(rng: random.Random, items: Sequence[str]) -> list[str]:
    out = list(items)
    rng.shuffle(out)
    return out


def _gen_instance_attribute(rng, map_, objs, index) -> tuple[str, str, list[str]]:
    obj = objs[rng.randrange(len(objs))]
    others = [o.crop_descriptions.foreground_text for o in objs if o.object_id != obj.object_id]
    pool = _shuffled(rng, others) + list(_OBJECT_FILLERS)
    if index % 2 == 1 and obj.crop_descriptions.ocr_text:
        other_texts = [
            o.crop_descriptions.ocr_text
            for o in objs
            if o.crop_descriptions.ocr_text and o.object_id != obj.object_id
        ]
        return (
            f"What text is written on object {obj.object_id}?",
            obj.crop_descriptions.ocr_text,
            _shuffled(rng, other_texts) + list(_OCR_FILLERS),
        )
    return (
        f"Which description matches object {obj.object_id}?",
        obj.crop_descriptions.foreground_text,
        pool,
    )


def _gen_instance_counting(rng, map_, objs, index) -> tuple[str, str, list[str]]:
    from . import spatial_ops as so

    variants = ("within", "front", "rear", "left", "right")
    variant = variants[index % len(variants)]
    if variant == "within":
        ds = sorted(o.distance_to() for o in objs)
        limit = round(rng.uniform(ds[0], ds[-1]), 1)
        count = len(so.dist_filter(list(objs), limit))
        question = f"How many objects are within {limit} meters of the ego vehicle?"
    else:
        fn = {"front": so.front_filter, "rear": so.rear_filter,
              "left": so.left_filter, "right": so.right_filter}[variant]
        side = {"front": "in front of", "rear": "behind",
                "left": "to the left of", "right": "to the right of"}[variant]
        count = len(fn(list(objs)))
        question = f"How many objects are {side} the ego vehicle?"
    return question, str(count), [str(v) for v in counting_distractors(count)]


def _gen_visual_reasoning(rng, map_, objs, index) -> tuple[str, str, list[str]]:
    from . import spatial_ops as so

    foregrounds = [o.crop_descriptions.foreground_text for o in objs]
    if index % 3 == 0:
        target = so.k_closest(list(objs), 1)[0]
        question = "What is the closest object to the ego vehicle?"
    elif index % 3 == 1:
        target = so.k_farthest(list(objs), 1)[0]
        question = "What is the farthest object from the ego vehicle?"
    else:
        target = objs[rng.randrange(len(objs))]
        backgrounds = [
            o.crop_descriptions.background_text
            for o in objs
            if o.object_id != target.object_id
        ]
        return (
            f"What are the surroundings of object {target.object_id}?",
            target.crop_descriptions.background_text,
            _shuffled(rng, backgrounds) + list(_BACKGROUND_FILLERS),
        )
    pool = [t for t in foregrounds if t != target.crop_descriptions.foreground_text]
    return (
        question,
        target.crop_descriptions.foreground_text,
        _shuffled(rng, pool) + list(_OBJECT_FILLERS),
    )


def _gen_spatial_reasoning(rng, map_, objs, index) -> tuple[str, str, list[str]]:
    from . import spatial_ops as so

    ids = [o.object_id for o in objs]
    if index % 4 == 0:
        target = so.k_closest(list(objs), 1)[0]
        correct = f"object {target.object_id}"
        pool = [p for p in (f"object {i}" for i in ids) if p != correct]
        return "Which object is closest to the ego vehicle?", correct, _shuffled(rng, pool)
    if index % 4 == 1:
        target = so.k_farthest(list(objs), 1)[0]
        correct = f"object {target.object_id}"
        pool = [p for p in (f"object {i}" for i in ids) if p != correct]
        return "Which object is farthest from the ego vehicle?", correct, _shuffled(rng, pool)
    if index % 4 == 2:
        anchor = objs[rng.randrange(len(objs))]
        target = so.k_closest_to_obj(list(objs), anchor.object_id, 1)[0]
        correct = f"object {target.object_id}"
        pool = [p for p in (f"object {i}" for i in ids)
                if p != correct and p != f"object {anchor.object_id}"]
        return (
            f"Which object is closest to object {anchor.object_id}?",
            correct,
            _shuffled(rng, pool),
        )
    a, b = rng.sample(ids, 2)
    d = round(so.find_dist(list(objs), a, b))
    low = d - 3 if d - 3 >= 0 else d + 8
    distractors = [f"{v} m" for v in (d + 2, d + 5, low)]
    return (
        f"How far is object {a} from object {b}, to the nearest meter?",
        f"{d} m",
        distractors,
    )


_GENERATORS = {
    "instance_attribute": _gen_instance_attribute,
    "instance_counting": _gen_instance_counting,
    "visual_reasoning": _gen_visual_reasoning,
    "spatial_reasoning": _gen_spatial_reasoning,
}


def generate_questions(
    map_: LanguageEnhancedMap,
    seed: int,
    per_category: int = QUESTIONS_PER_CATEGORY,
) -> list[BenchQuestion]:
    """Deterministic template-based MCQ generation: per_category questions
    for each of the four categories, in category order."""
    objs = list(map_.objects)
    if len(objs) < MIN_OBJECTS_FOR_QUESTIONS:
        raise GenerationError(
            f"need at least {MIN_OBJECTS_FOR_QUESTIONS} objects, map has {len(objs)}",
            category="scene",
        )
    rng = random.Random(seed)
    questions: list[BenchQuestion] = []
    for category in CATEGORIES:
        generate = _GENERATORS[category]
        for index in range(per_category):
            question, correct, pool = generate(rng, map_, objs, index)
            choices, correct_index = _place_choices(rng, correct, pool)
            questions.append(
                BenchQuestion(
                    scene_token=map_.scene_token,
                    category=category,
                    question=question,
                    choices=choices,
                    correct_index=correct_index,
                )
            )
    return questions


def generate_questions_llm(
    map_: LanguageEnhancedMap,
    llm: LlmClient,
    per_category: int = QUESTIONS_PER_CATEGORY,
) -> list[BenchQuestion]:
    """LLM-backed MCQ generation through the question-writing prompt."""
    questions: list[BenchQuestion] = []
    for category in CATEGORIES:
        prompt = _QUESTION_GEN_TEMPLATE.substitute(
            n=per_category, category=category, map_json=prompt_map_json(map_)
        )
        reply = llm.complete([Message("user", prompt)])
        try:
            entries = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise GenerationError(f"question reply is not JSON: {exc}", category=category) from exc
        if not isinstance(entries, list) or len(entries) != per_category:
            raise GenerationError(
                f"expected {per_category} questions, got {entries!r}", category=category
            )
        for entry in entries:
            try:
                questions.append(
                    BenchQuestion(
                        scene_token=map_.scene_token,
                        category=category,
                        question=entry["question"],
                        choices=tuple(entry["choices"]),
                        correct_index=entry["correct_index"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise GenerationError(f"bad question entry: {exc}", category=category) from exc
    return questions


def generate_spatial_queries(
    map_: LanguageEnhancedMap, seed: int, count: int = 5
) -> list[SpatialQuery]:
    """Deterministic spatial queries with ground-truth call expressions.

    Cycles through a fixed mix: a direction filter, a range filter, a
    k-selection, an object-anchored operator, then a distance question.
    """
    objs = list(map_.objects)
    if len(objs) < MIN_OBJECTS_FOR_QUESTIONS:
        raise GenerationError(
            f"need at least {MIN_OBJECTS_FOR_QUESTIONS} objects, map has {len(objs)}",
            category="scene",
        )
    rng = random.Random(seed)
    ids = [o.object_id for o in objs]
    queries: list[SpatialQuery] = []

    def add(kind: str, question: str, call: str):
        queries.append(SpatialQuery(map_.scene_token, kind, question, call))

    for index in range(count):
        slot = index % 5
        if slot == 0:
            side, op = rng.choice(
                [
                    ("in front of", "front_filter"),
                    ("behind", "rear_filter"),
                    ("to the left of", "left_filter"),
                    ("to the right of", "right_filter"),
                ]
            )
            add("set", f"Which objects are {side} the ego vehicle?", f"{op}(objs)")
        elif slot == 1:
            ds = sorted(o.distance_to() for o in objs)
            i = rng.randrange(len(ds) - 1)
            limit = round((ds[i] + ds[i + 1]) / 2, 1)
            add(
                "set",
                f"Which objects are within {limit} meters of the ego vehicle?",
                f"dist_filter(objs, {limit})",
            )
        elif slot == 2:
            k = rng.randint(1, min(4, len(objs) - 1))
            if rng.random() < 0.5:
                add(
                    "set",
                    f"Which are the {k} objects closest to the ego vehicle?",
                    f"k_closest(objs, {k})",
                )
            else:
                add(
                    "set",
                    f"Which are the {k} objects farthest from the ego vehicle?",
                    f"k_farthest(objs, {k})",
                )
        elif slot == 3:
            anchor = rng.choice(ids)
            pick = rng.randrange(3)
            if pick == 0:
                others = sorted(
                    o.distance_to(next(x for x in objs if x.object_id == anchor))
                    for o in objs
                    if o.object_id != anchor
                )
                i = rng.randrange(len(others) - 1) if len(others) > 1 else 0
                limit = round((others[i] + others[min(i + 1, len(others) - 1)]) / 2, 1)
                add(
                    "set",
                    f"Which objects are within {limit} meters of object {anchor}?",
                    f"objs_in_dist(objs, {anchor}, {limit})",
                )
            else:
                k = rng.randint(1, min(3, len(objs) - 1))
                direction = "closest to" if pick == 1 else "farthest from"
                op = "k_closest_to_obj" if pick == 1 else "k_farthest_to_obj"
                add(
                    "set",
                    f"Which are the {k} objects {direction} object {anchor}?",
                    f"{op}(objs, {anchor}, {k})",
                )
        else:
            if rng.random() < 0.5:
                target = rng.choice(ids)
                add(
                    "distance",
                    f"How far is object {target} from the ego vehicle?",
                    f"obj_distance(objs, {target})",
                )
            else:
                a, b = rng.sample(ids, 2)
                add(
                    "distance",
                    f"How far is object {a} from object {b}?",
                    f"find_dist(objs, {a}, {b})",
                )
    return queries


# ---------------------------------------------------------------------------
# the harness


@dataclass
class BenchReport:
    mcq_answerer: str | None = None
    spatial_answerer: str | None = None
    mcq_total: int = 0
    mcq_correct: int = 0
    mcq_by_category: dict = field(default_factory=dict)  # category -> [correct, total]
    set_total: int = 0
    jaccard_sum: float = 0.0
    distance_total: int = 0
    distance_scored: int = 0
    distance_error_sum: float = 0.0
    answer_failures: int = 0

    @property
    def mcq_accuracy(self) -> float | None:
        return self.mcq_correct / self.mcq_total if self.mcq_total else None

    @property
    def mean_jaccard(self) -> float | None:
        return self.jaccard_sum / self.set_total if self.set_total else None

    @property
    def mean_distance_error(self) -> float | None:
        return self.distance_error_sum / self.distance_scored if self.distance_scored else None

    def to_dict(self) -> dict:
        return {
            "mcq_answerer": self.mcq_answerer,
            "spatial_answerer": self.spatial_answerer,
            "mcq_total": self.mcq_total,
            "mcq_correct": self.mcq_correct,
            "mcq_accuracy": self.mcq_accuracy,
            "mcq_by_category": {
                cat: {"correct": c, "total": t, "accuracy": c / t if t else None}
                for cat, (c, t) in sorted(self.mcq_by_category.items())
            },
            "set_total": self.set_total,
            "mean_jaccard": self.mean_jaccard,
            "distance_total": self.distance_total,
            "distance_scored": self.distance_scored,
            "mean_distance_error_m": self.mean_distance_error,
            "answer_failures": self.answer_failures,
        }


SceneTask = tuple[LanguageEnhancedMap, Sequence[BenchQuestion], Sequence[SpatialQuery]]


def run_bench(
    scenes: Sequence[SceneTask],
    mcq_answerer: McqAnswerer | None = None,
    spatial_answerer: SpatialAnswerer | None = None,
) -> BenchReport:
    """Score answerers over prepared scenes; pass None to skip a part."""
    report = BenchReport(
        mcq_answerer=mcq_answerer.name if mcq_answerer else None,
        spatial_answerer=spatial_answerer.name if spatial_answerer else None,
    )
    for map_, questions, queries in scenes:
        if mcq_answerer is not None:
            for question in questions:
                correct = False
                try:
                    predicted = mcq_answerer.answer(map_, question)
                    correct = int(predicted) == question.correct_index
                except (BevlangError, ValueError, TypeError):
                    report.answer_failures += 1
                report.mcq_total += 1
                report.mcq_correct += int(correct)
                bucket = report.mcq_by_category.setdefault(question.category, [0, 0])
                bucket[0] += int(correct)
                bucket[1] += 1
        if spatial_answerer is not None:
            for query in queries:
                expected = expected_spatial(map_, query)
                if query.kind == "set":
                    report.set_total += 1
                    try:
                        predicted = spatial_answerer.answer(map_, query)
                        report.jaccard_sum += jaccard(set(predicted), expected)
                    except (BevlangError, ValueError, TypeError):
                        report.answer_failures += 1
                else:
                    report.distance_total += 1
                    try:
                        predicted = spatial_answerer.answer(map_, query)
                        report.distance_error_sum += distance_error(predicted, expected)
                        report.distance_scored += 1
                    except (BevlangError, ValueError, TypeError):
                        report.answer_failures += 1
    return report


def make_spatial_suite(
    n_scenes: int = 20,
    n_objects: int = 8,
    seed_base: int = 100,
    queries_per_scene: int = 5,
) -> list[SceneTask]:
    """Synthetic scenes with captioned maps and spatial queries, no MCQs."""
    from .captioning import MockLvlmCaptioner, build_language_map
    from .synth import generate_synthetic_scene

    scenes: list[SceneTask] = []
    captioner = MockLvlmCaptioner()
    for i in range(n_scenes):
        bundle = generate_synthetic_scene(
            f"synth-{i:04d}", seed=seed_base + i, n_objects=n_objects, render=False
        )
        map_ = build_language_map(bundle, captioner)
        queries = generate_spatial_queries(map_, seed=seed_base + i, count=queries_per_scene)
        scenes.append((map_, (), queries))
    return scenes


def make_mcq_suite(
    n_scenes: int = 20,
    n_objects: int = 8,
    seed_base: int = 100,
    per_category: int = QUESTIONS_PER_CATEGORY,
) -> list[SceneTask]:
    """Synthetic scenes with captioned maps and template MCQs, no queries."""
    from .captioning import MockLvlmCaptioner, build_language_map
    from .synth import generate_synthetic_scene

    scenes: list[SceneTask] = []
    captioner = MockLvlmCaptioner()
    for i in range(n_scenes):
        bundle = generate_synthetic_scene(
            f"synth-{i:04d}", seed=seed_base + i, n_objects=n_objects, render=False
        )
        map_ = build_language_map(bundle, captioner)
        questions = generate_questions(map_, seed=seed_base + i, per_category=per_category)
        scenes.append((map_, questions, ()))
    return scenes

"""Benchmark harness: metrics, question generation, scoring policy."""

import json
import random

import pytest

from conftest import make_map, make_obj
from bevlang.bench import (
    CATEGORIES,
    BenchQuestion,
    ExactSpatialAnswerer,
    OracleMcqAnswerer,
    RandomMcqAnswerer,
    RandomSpatialAnswerer,
    SpatialQuery,
    counting_distractors,
    distance_error,
    expected_spatial,
    generate_questions,
    generate_questions_llm,
    generate_spatial_queries,
    jaccard,
    make_mcq_suite,
    make_spatial_suite,
    max_pairwise_distance,
    parse_choice,
    run_bench,
)
from bevlang.errors import GenerationError, ScoringError


@pytest.fixture(scope="module")
def bench_map():
    return make_map(
        [
            make_obj(1, 6.0, 1.0, foreground_text="a red car", ocr_text="TAXI 5"),
            make_obj(2, -4.0, 2.0, foreground_text="a blue truck"),
            make_obj(3, 10.0, -3.0, foreground_text="a white van"),
            make_obj(4, 2.0, -7.0, foreground_text="a black motorcycle"),
            make_obj(5, -9.0, -1.0, foreground_text="a green bus"),
        ]
    )


def test_jaccard_values():
    assert jaccard(set(), set()) == 1.0
    assert jaccard({1, 2}, {1, 2}) == 1.0
    assert jaccard({1, 2}, {2, 3}) == pytest.approx(1 / 3)
    assert jaccard({1}, {2}) == 0.0
    assert jaccard(set(), {1}) == 0.0


def test_distance_error_values():
    assert distance_error(4.87, 5.0) == pytest.approx(0.13)
    assert distance_error(5.0, 5.0) == 0.0
    with pytest.raises(ScoringError):
        distance_error(float("nan"), 5.0)
    with pytest.raises(ScoringError):
        distance_error(1.0, float("inf"))


def test_max_pairwise_includes_ego():
    objs = [make_obj(1, 30.0, 0.0), make_obj(2, 29.0, 0.0)]
    # the widest gap is object 1 to the ego, not object to object
    assert max_pairwise_distance(objs) == pytest.approx(30.0)
    assert max_pairwise_distance([]) == 0.0


def test_counting_distractors():
    assert counting_distractors(3) == (2, 4, 5)
    assert counting_distractors(1) == (0, 2, 3)
    assert counting_distractors(0) == (1, 2, 3)


def test_question_validation():
    with pytest.raises(ValueError):
        BenchQuestion("s", "bad_category", "q", ("a", "b", "c", "d"), 0)
    with pytest.raises(ValueError):
        BenchQuestion("s", CATEGORIES[0], "q", ("a", "a", "c", "d"), 0)
    with pytest.raises(ValueError):
        BenchQuestion("s", CATEGORIES[0], "q", ("a", "b", "c", "d"), 4)
    with pytest.raises(ValueError):
        SpatialQuery("s", "wrong", "q", "front_filter(objs)")
    with pytest.raises(Exception):
        SpatialQuery("s", "set", "q", "not a call")


def test_parse_choice_forms():
    choices = ("alpha", "beta", "gamma", "delta")
    assert parse_choice(2, choices) == 2
    assert parse_choice("B", choices) == 1
    assert parse_choice("c)", choices) == 2
    assert parse_choice("delta", choices) == 3
    for bad in (5, True, "epsilon", None, [1]):
        with pytest.raises(ScoringError):
            parse_choice(bad, choices)


def test_generate_questions_schema_and_determinism(bench_map):
    questions = generate_questions(bench_map, seed=7)
    assert len(questions) == 20
    for category in CATEGORIES:
        assert sum(q.category == category for q in questions) == 5
    # grouped in canonical category order
    assert [q.category for q in questions] == [c for c in CATEGORIES for _ in range(5)]
    assert questions == generate_questions(bench_map, seed=7)
    assert questions != generate_questions(bench_map, seed=8)
    for q in questions:
        doc = q.to_dict()
        assert list(doc) == ["scene_token", "category", "question", "choices", "correct_index"]
        assert len(set(doc["choices"])) == 4
        assert doc["choices"][doc["correct_index"]]


def test_generate_questions_needs_enough_objects():
    tiny = make_map([make_obj(1, 1.0, 1.0), make_obj(2, 2.0, 2.0)])
    with pytest.raises(GenerationError):
        generate_questions(tiny, seed=0)
    with pytest.raises(GenerationError):
        generate_spatial_queries(tiny, seed=0)


def test_generated_answers_are_correct(bench_map):
    by_id = {o.object_id: o for o in bench_map.objects}
    for q in generate_questions(bench_map, seed=3):
        correct = q.choices[q.correct_index]
        if q.question.startswith("Which description matches object"):
            oid = int(q.question.rstrip("?").split()[-1])
            assert correct == by_id[oid].crop_descriptions.foreground_text
        elif q.question.startswith("What text is written on object"):
            oid = int(q.question.rstrip("?").split()[-1])
            assert correct == by_id[oid].crop_descriptions.ocr_text
        elif q.question == "What is the closest object to the ego vehicle?":
            closest = min(bench_map.objects, key=lambda o: (o.distance_to(), o.object_id))
            assert correct == closest.crop_descriptions.foreground_text
        elif q.question == "Which object is farthest from the ego vehicle?":
            farthest = max(bench_map.objects, key=lambda o: (o.distance_to(), -o.object_id))
            assert correct == f"object {farthest.object_id}"


def test_generate_spatial_queries_mix(bench_map):
    queries = generate_spatial_queries(bench_map, seed=5)
    assert len(queries) == 5
    kinds = [q.kind for q in queries]
    assert kinds.count("set") == 4
    assert kinds.count("distance") == 1
    assert queries == generate_spatial_queries(bench_map, seed=5)
    exact = ExactSpatialAnswerer()
    for query in queries:
        expected = expected_spatial(bench_map, query)
        answer = exact.answer(bench_map, query)
        if query.kind == "set":
            assert set(answer) == expected
        else:
            assert answer == expected


def test_expected_spatial_kind_mismatch(bench_map):
    bad = SpatialQuery("s", "distance", "q", "front_filter(objs)")
    with pytest.raises(ScoringError):
        expected_spatial(bench_map, bad)
    bad = SpatialQuery("s", "set", "q", "obj_distance(objs, 1)")
    with pytest.raises(ScoringError):
        expected_spatial(bench_map, bad)


def test_oracle_mcq_perfect_and_random_near_chance():
    suite = make_mcq_suite(n_scenes=6, seed_base=300)
    oracle = run_bench(suite, mcq_answerer=OracleMcqAnswerer())
    assert oracle.mcq_accuracy == 1.0
    assert oracle.mcq_total == 120
    random_report = run_bench(suite * 4, mcq_answerer=RandomMcqAnswerer(seed=1))
    assert random_report.mcq_total == 480
    assert 0.15 <= random_report.mcq_accuracy <= 0.35


def test_exact_and_random_spatial():
    suite = make_spatial_suite(n_scenes=4, seed_base=400)
    exact = run_bench(suite, spatial_answerer=ExactSpatialAnswerer())
    assert exact.mean_jaccard == 1.0
    assert exact.mean_distance_error == 0.0
    assert exact.set_total == 16
    assert exact.distance_total == 4
    rand = run_bench(suite, spatial_answerer=RandomSpatialAnswerer(seed=2))
    assert rand.mean_jaccard < 1.0
    assert rand.mean_distance_error > 0.0


def test_random_spatial_answer_ranges(bench_map):
    answerer = RandomSpatialAnswerer(seed=0)
    ids = set(bench_map.object_ids)
    best = max_pairwise_distance(bench_map.objects)
    set_query = SpatialQuery("s", "set", "q", "front_filter(objs)")
    dist_query = SpatialQuery("s", "distance", "q", "obj_distance(objs, 1)")
    for _ in range(50):
        assert set(answerer.answer(bench_map, set_query)) <= ids
        assert 0.0 <= answerer.answer(bench_map, dist_query) <= best


class BrokenAnswerer:
    name = "broken"

    def answer(self, map_, item):
        raise ScoringError("cannot answer")


def test_failure_policy(bench_map):
    questions = generate_questions(bench_map, seed=1)[:3]
    queries = generate_spatial_queries(bench_map, seed=1)
    scenes = [(bench_map, questions, queries)]
    report = run_bench(scenes, mcq_answerer=BrokenAnswerer(), spatial_answerer=BrokenAnswerer())
    # failed MCQs count as incorrect
    assert report.mcq_total == 3
    assert report.mcq_correct == 0
    # failed set queries score zero but stay in the denominator
    assert report.set_total == 4
    assert report.jaccard_sum == 0.0
    assert report.mean_jaccard == 0.0
    # failed distance queries are excluded from the mean entirely
    assert report.distance_total == 1
    assert report.distance_scored == 0
    assert report.mean_distance_error is None
    assert report.answer_failures == 8


def test_report_to_dict_schema(bench_map):
    questions = generate_questions(bench_map, seed=2)
    report = run_bench([(bench_map, questions, [])], mcq_answerer=OracleMcqAnswerer())
    doc = report.to_dict()
    assert doc["mcq_accuracy"] == 1.0
    assert set(doc["mcq_by_category"]) == set(CATEGORIES)
    for bucket in doc["mcq_by_category"].values():
        assert bucket["total"] == 5
    json.dumps(doc)  # everything must be JSON-serializable


class CannedQuestionLlm:
    name = "canned"

    def complete(self, messages):
        prompt = messages[-1].content
        category = prompt.split('category "')[1].split('"')[0]
        entries = [
            {
                "question": f"{category} question {i}?",
                "choices": [f"c{i}a", f"c{i}b", f"c{i}c", f"c{i}d"],
                "correct_index": i % 4,
            }
            for i in range(5)
        ]
        return json.dumps(entries)


def test_generate_questions_llm(bench_map):
    questions = generate_questions_llm(bench_map, CannedQuestionLlm())
    assert len(questions) == 20
    assert [q.category for q in questions] == [c for c in CATEGORIES for _ in range(5)]


class JunkLlm:
    name = "junk"

    def __init__(self, reply):
        self.reply = reply

    def complete(self, messages):
        return self.reply


def test_generate_questions_llm_errors(bench_map):
    with pytest.raises(GenerationError):
        generate_questions_llm(bench_map, JunkLlm("not json"))
    with pytest.raises(GenerationError):
        generate_questions_llm(bench_map, JunkLlm(json.dumps([])))
    bad_entry = json.dumps(
        [{"question": "q?", "choices": ["a", "a", "b", "c"], "correct_index": 0}] * 5
    )
    with pytest.raises(GenerationError):
        generate_questions_llm(bench_map, JunkLlm(bad_entry))

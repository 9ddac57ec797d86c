"""Call-expression grammar: parse, validate, pretty-print, evaluate."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_obj, random_objects
from oracle_ops import oracle_eval
from bevlang.calls import (
    CallExpr,
    NumberLit,
    ObjsRef,
    StringLit,
    eval_call,
    parse_call,
    pretty_print,
)
from bevlang.errors import CallParseError, EvalTypeError, UnknownObjectError


def test_parse_simple_call():
    expr = parse_call("k_closest(objs, 3)")
    assert expr == CallExpr("k_closest", (ObjsRef(), NumberLit(3)))
    assert isinstance(expr.args[1].value, int)


def test_parse_nested_and_whitespace():
    text = "  k_closest ( front_filter(objs) ,  2 ) "
    expr = parse_call(text)
    assert expr == CallExpr("k_closest", (CallExpr("front_filter", (ObjsRef(),)), NumberLit(2)))
    assert pretty_print(expr) == "k_closest(front_filter(objs), 2)"


def test_parse_number_forms():
    expr = parse_call("dist_filter(objs, 12.5)", validate=False)
    assert expr.args[1] == NumberLit(12.5)
    assert parse_call("dist_filter(objs, 1e2)", validate=False).args[1] == NumberLit(100.0)
    assert parse_call("dist_filter(objs, -3)", validate=False).args[1] == NumberLit(-3)
    assert isinstance(parse_call("dist_filter(objs, 2.0)", validate=False).args[1].value, float)


def test_parse_string_args():
    expr = parse_call('note(objs, "hello \\"there\\"\\n")', validate=False)
    assert expr.args[1] == StringLit('hello "there"\n')


def test_unknown_operator_rejected():
    with pytest.raises(CallParseError, match="fly_filter"):
        parse_call("fly_filter(objs)")
    # without validation the same text parses structurally
    assert parse_call("fly_filter(objs)", validate=False).name == "fly_filter"


def test_arity_and_kind_validation():
    with pytest.raises(CallParseError):
        parse_call("find_dist(objs, 1)")  # missing second id
    with pytest.raises(CallParseError):
        parse_call("k_closest(objs, 2.5)")  # count must be an integer
    with pytest.raises(CallParseError):
        parse_call("k_closest(objs, obj_distance(objs, 1))")  # distance where count expected
    with pytest.raises(CallParseError):
        parse_call("dist_filter(objs, objs)")  # object list where meters expected
    with pytest.raises(CallParseError):
        parse_call('k_closest(objs, "2")')
    # a distance-returning call is a valid meters argument
    parse_call("dist_filter(objs, obj_distance(objs, 1))")
    # an objects-returning call is a valid objs argument
    parse_call("k_closest(rear_filter(objs), 1)")


def test_parse_error_offsets():
    with pytest.raises(CallParseError) as exc_info:
        parse_call("k_closest(objs  2)")
    assert exc_info.value.offset == 16
    with pytest.raises(CallParseError) as exc_info:
        parse_call("k_closest(objs, 2) trailing")
    assert exc_info.value.offset == 19
    with pytest.raises(CallParseError) as exc_info:
        parse_call("")
    assert exc_info.value.offset == 0
    # offsets are byte offsets, so multi-byte text before the error counts
    with pytest.raises(CallParseError) as exc_info:
        parse_call('note("é", ?)', validate=False)
    assert exc_info.value.offset == len('note("é", '.encode("utf-8"))


def test_parse_rejects_malformed():
    for text in [
        "objs",
        "k_closest(objs, 2",
        "k_closest(objs,, 2)",
        "k_closest(objs, 2))",
        "3(objs)",
        'dist_filter(objs, "unterminated)',
    ]:
        with pytest.raises(CallParseError):
            parse_call(text, validate=False)


def test_depth_limit():
    text = "front_filter(" * 80 + "objs" + ")" * 80
    with pytest.raises(CallParseError, match="deep"):
        parse_call(text, validate=False)


def test_eval_simple():
    objs = [make_obj(1, 5.0, 1.0), make_obj(2, -2.0, 1.0), make_obj(3, 9.0, -4.0)]
    result = eval_call(parse_call("front_filter(objs)"), objs)
    assert [o.object_id for o in result] == [1, 3]
    dist = eval_call(parse_call("obj_distance(objs, 2)"), objs)
    assert dist == pytest.approx((2**2 + 1**2) ** 0.5)
    nested = eval_call(parse_call("k_closest(front_filter(objs), 1)"), objs)
    assert [o.object_id for o in nested] == [1]


def test_eval_propagates_operator_errors():
    objs = [make_obj(1, 5.0, 1.0)]
    with pytest.raises(UnknownObjectError):
        eval_call(parse_call("obj_distance(objs, 7)"), objs)


def test_eval_type_error_on_unvalidated_tree():
    objs = [make_obj(1, 5.0, 1.0)]
    bad = CallExpr("k_closest", (NumberLit(3), NumberLit(1)))
    with pytest.raises(EvalTypeError):
        eval_call(bad, objs)
    bad_meters = CallExpr("dist_filter", (ObjsRef(), CallExpr("front_filter", (ObjsRef(),))))
    with pytest.raises(EvalTypeError):
        eval_call(bad_meters, objs)


def test_pretty_print_canonical():
    assert pretty_print(parse_call("dist_filter( objs , 12.50 )")) == "dist_filter(objs, 12.5)"
    assert pretty_print(NumberLit(2.0)) == "2.0"
    assert pretty_print(StringLit('a"b')) == '"a\\"b"'
    with pytest.raises(ValueError):
        pretty_print(NumberLit(float("nan")))


OBJ_OPS = ["front_filter", "left_filter", "right_filter", "rear_filter"]


def random_expr(rng: random.Random, ids: list, depth: int):
    """Random well-typed objects-returning expression of bounded depth."""
    source = ObjsRef() if depth <= 0 or rng.random() < 0.3 else random_expr(rng, ids, depth - 1)
    kind = rng.randrange(5)
    if kind == 0:
        return CallExpr(rng.choice(OBJ_OPS), (source,))
    if kind == 1:
        return CallExpr("dist_filter", (source, NumberLit(round(rng.uniform(0, 80), 2))))
    if kind == 2:
        op = rng.choice(["k_closest", "k_farthest"])
        return CallExpr(op, (source, NumberLit(rng.randint(1, 6))))
    if kind == 3:
        op = rng.choice(["k_closest_to_obj", "k_farthest_to_obj"])
        return CallExpr(op, (source, NumberLit(rng.choice(ids)), NumberLit(rng.randint(1, 6))))
    return CallExpr(
        "objs_in_dist",
        (source, NumberLit(rng.choice(ids)), NumberLit(round(rng.uniform(0, 80), 2))),
    )


@pytest.mark.parametrize("seed", range(40))
def test_fuzzed_round_trip_and_oracle_eval(seed):
    rng = random.Random(seed)
    objs = random_objects(rng, max_n=12)
    if not objs:
        objs = [make_obj(1, 1.0, 1.0)]
    ids = [o.object_id for o in objs]
    expr = random_expr(rng, ids, depth=3)
    text = pretty_print(expr)
    assert parse_call(text) == expr
    try:
        expected = oracle_eval(expr, objs)
    except Exception:
        expected = None
    if expected is None:
        with pytest.raises(UnknownObjectError):
            eval_call(expr, objs)
    else:
        got = eval_call(expr, objs)
        assert [o.object_id for o in got] == [o.object_id for o in expected]


@given(st.text(max_size=40))
@settings(max_examples=300)
def test_parser_total_on_arbitrary_text(text):
    # the parser either returns an AST or raises CallParseError; it must
    # never raise anything else
    try:
        expr = parse_call(text)
    except CallParseError:
        return
    assert parse_call(pretty_print(expr)) == expr

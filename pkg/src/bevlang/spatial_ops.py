"""Spatial operators over map objects.

Twelve operators, each taking an object list first. Conventions shared by
all of them:

- the ego vehicle sits at the metric origin; distances are planar
  Euclidean between object centroids
- direction filters use strict inequalities, so objects exactly on the
  boundary axis are excluded; distance thresholds are inclusive
- filters return objects in ascending object_id; k-selections return
  objects ordered by the selection metric, ties broken by ascending id
- k larger than the population returns everything
- anchored operators exclude the anchor from their result and raise
  UnknownObjectError when the anchor id is not in the input list
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import SpatialArgError, UnknownObjectError
from .objects import MapObject

ObjectList = list[MapObject]


class Param(enum.Enum):
    OBJS = "objs"
    ID = "id"
    COUNT = "count"
    METERS = "meters"


class Returns(enum.Enum):
    OBJECTS = "objects"
    DISTANCE = "distance"


def _check_count(k, name: str = "k") -> int:
    if isinstance(k, bool) or not isinstance(k, int):
        raise SpatialArgError(f"{name} must be an integer, got {k!r}")
    if k < 1:
        raise SpatialArgError(f"{name} must be >= 1, got {k}")
    return k


def _check_meters(dist, name: str = "dist") -> float:
    if isinstance(dist, bool) or not isinstance(dist, (int, float)):
        raise SpatialArgError(f"{name} must be a number, got {dist!r}")
    dist = float(dist)
    if not math.isfinite(dist) or dist < 0:
        raise SpatialArgError(f"{name} must be a finite non-negative number, got {dist}")
    return dist


def _check_id(object_id, name: str = "id") -> int:
    if isinstance(object_id, bool) or not isinstance(object_id, int):
        raise SpatialArgError(f"{name} must be an integer object id, got {object_id!r}")
    if object_id < 1:
        raise SpatialArgError(f"{name} must be >= 1, got {object_id}")
    return object_id


def _find(objs: Iterable[MapObject], object_id: int, name: str = "id") -> MapObject:
    _check_id(object_id, name)
    for obj in objs:
        if obj.object_id == object_id:
            return obj
    raise UnknownObjectError(object_id)


def _by_id(objs: Iterable[MapObject]) -> ObjectList:
    return sorted(objs, key=lambda o: o.object_id)


def front_filter(objs: Sequence[MapObject]) -> ObjectList:
    return _by_id(o for o in objs if o.position[0] > 0.0)


def left_filter(objs: Sequence[MapObject]) -> ObjectList:
    return _by_id(o for o in objs if o.position[1] > 0.0)


def right_filter(objs: Sequence[MapObject]) -> ObjectList:
    return _by_id(o for o in objs if o.position[1] < 0.0)


def rear_filter(objs: Sequence[MapObject]) -> ObjectList:
    return _by_id(o for o in objs if o.position[0] < 0.0)


def dist_filter(objs: Sequence[MapObject], dist) -> ObjectList:
    dist = _check_meters(dist)
    return _by_id(o for o in objs if o.distance_to() <= dist)


def k_closest(objs: Sequence[MapObject], k) -> ObjectList:
    k = _check_count(k)
    return sorted(objs, key=lambda o: (o.distance_to(), o.object_id))[:k]


def k_farthest(objs: Sequence[MapObject], k) -> ObjectList:
    k = _check_count(k)
    return sorted(objs, key=lambda o: (-o.distance_to(), o.object_id))[:k]


def objs_in_dist(objs: Sequence[MapObject], object_id, dist) -> ObjectList:
    anchor = _find(objs, object_id)
    dist = _check_meters(dist)
    return _by_id(
        o for o in objs if o.object_id != anchor.object_id and o.distance_to(anchor) <= dist
    )


def k_closest_to_obj(objs: Sequence[MapObject], object_id, k) -> ObjectList:
    anchor = _find(objs, object_id)
    k = _check_count(k)
    rest = (o for o in objs if o.object_id != anchor.object_id)
    return sorted(rest, key=lambda o: (o.distance_to(anchor), o.object_id))[:k]


def k_farthest_to_obj(objs: Sequence[MapObject], object_id, k) -> ObjectList:
    anchor = _find(objs, object_id)
    k = _check_count(k)
    rest = (o for o in objs if o.object_id != anchor.object_id)
    return sorted(rest, key=lambda o: (-o.distance_to(anchor), o.object_id))[:k]


def obj_distance(objs: Sequence[MapObject], object_id) -> float:
    return _find(objs, object_id).distance_to()


def find_dist(objs: Sequence[MapObject], id1, id2) -> float:
    a = _find(objs, id1, "id1")
    b = _find(objs, id2, "id2")
    return a.distance_to(b)


@dataclass(frozen=True)
class OpSpec:
    name: str
    func: Callable
    params: tuple[tuple[str, Param], ...]
    returns: Returns
    summary: str

    @property
    def signature(self) -> str:
        return f"{self.name}({', '.join(p for p, _ in self.params)})"


def _spec(name, func, params, returns, summary) -> tuple[str, OpSpec]:
    return name, OpSpec(name, func, tuple(params), returns, summary)


REGISTRY: dict[str, OpSpec] = dict(
    [
        _spec(
            "front_filter",
            front_filter,
            [("objs", Param.OBJS)],
            Returns.OBJECTS,
            "keep objects strictly in front of the ego vehicle (x > 0)",
        ),
        _spec(
            "left_filter",
            left_filter,
            [("objs", Param.OBJS)],
            Returns.OBJECTS,
            "keep objects strictly to the left of the ego vehicle (y > 0)",
        ),
        _spec(
            "right_filter",
            right_filter,
            [("objs", Param.OBJS)],
            Returns.OBJECTS,
            "keep objects strictly to the right of the ego vehicle (y < 0)",
        ),
        _spec(
            "rear_filter",
            rear_filter,
            [("objs", Param.OBJS)],
            Returns.OBJECTS,
            "keep objects strictly behind the ego vehicle (x < 0)",
        ),
        _spec(
            "dist_filter",
            dist_filter,
            [("objs", Param.OBJS), ("dist", Param.METERS)],
            Returns.OBJECTS,
            "keep objects within dist meters of the ego vehicle",
        ),
        _spec(
            "k_closest",
            k_closest,
            [("objs", Param.OBJS), ("k", Param.COUNT)],
            Returns.OBJECTS,
            "the k objects closest to the ego vehicle",
        ),
        _spec(
            "k_farthest",
            k_farthest,
            [("objs", Param.OBJS), ("k", Param.COUNT)],
            Returns.OBJECTS,
            "the k objects farthest from the ego vehicle",
        ),
        _spec(
            "objs_in_dist",
            objs_in_dist,
            [("objs", Param.OBJS), ("id", Param.ID), ("dist", Param.METERS)],
            Returns.OBJECTS,
            "objects within dist meters of object id, excluding that object",
        ),
        _spec(
            "k_closest_to_obj",
            k_closest_to_obj,
            [("objs", Param.OBJS), ("id", Param.ID), ("k", Param.COUNT)],
            Returns.OBJECTS,
            "the k objects closest to object id, excluding that object",
        ),
        _spec(
            "k_farthest_to_obj",
            k_farthest_to_obj,
            [("objs", Param.OBJS), ("id", Param.ID), ("k", Param.COUNT)],
            Returns.OBJECTS,
            "the k objects farthest from object id, excluding that object",
        ),
        _spec(
            "obj_distance",
            obj_distance,
            [("objs", Param.OBJS), ("id", Param.ID)],
            Returns.DISTANCE,
            "distance in meters from object id to the ego vehicle",
        ),
        _spec(
            "find_dist",
            find_dist,
            [("objs", Param.OBJS), ("id1", Param.ID), ("id2", Param.ID)],
            Returns.DISTANCE,
            "distance in meters between objects id1 and id2",
        ),
    ]
)


def apply_op(name: str, args: Sequence):
    """Apply a registered operator to already-evaluated arguments."""
    spec = REGISTRY.get(name)
    if spec is None:
        raise SpatialArgError(f"unknown operator {name!r}")
    if len(args) != len(spec.params):
        raise SpatialArgError(
            f"{name} takes {len(spec.params)} arguments ({spec.signature}), got {len(args)}"
        )
    return spec.func(*args)


def registry_lines() -> list[str]:
    """One 'signature: summary' line per operator, registry order."""
    return [f"{spec.signature}: {spec.summary}" for spec in REGISTRY.values()]

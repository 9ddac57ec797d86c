"""Map objects, language-enhanced maps, extraction and (de)serialization.

The per-object JSON wire format is fixed: `object_id`, `position`,
`area`, `crop_descriptions`. Extra fields found in parsed files are
preserved and re-emitted so third-party annotations survive round trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import SchemaError
from .grid import BevGrid, GridMeta, cell_centers

VEHICLE_CATEGORIES = ("2-wheeler", "car", "truck", "construction", "other")
BEV_SOURCES = ("predicted", "ground_truth", "synthetic")


@dataclass(frozen=True)
class CropDescriptions:
    """Text attached to one object's image crop."""

    foreground_text: str = ""
    background_text: str = ""
    ocr_text: str | None = None
    source_camera: str | None = None
    bbox_px: tuple[float, float, float, float] | None = None

    def to_dict(self) -> dict:
        d: dict = {
            "foreground_text": self.foreground_text,
            "background_text": self.background_text,
        }
        if self.ocr_text is not None:
            d["ocr_text"] = self.ocr_text
        if self.source_camera is not None:
            d["source_camera"] = self.source_camera
        if self.bbox_px is not None:
            d["bbox_px"] = list(self.bbox_px)
        return d

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "CropDescriptions":
        if not isinstance(d, dict):
            raise SchemaError("crop_descriptions must be an object", path)
        bbox = d.get("bbox_px")
        if bbox is not None:
            if not (isinstance(bbox, (list, tuple)) and len(bbox) == 4):
                raise SchemaError("bbox_px must have 4 entries", f"{path}.bbox_px")
            bbox = tuple(float(v) for v in bbox)
        return cls(
            foreground_text=str(d.get("foreground_text", "")),
            background_text=str(d.get("background_text", "")),
            ocr_text=d.get("ocr_text"),
            source_camera=d.get("source_camera"),
            bbox_px=bbox,
        )


@dataclass(frozen=True)
class MapObject:
    """One connected vehicle blob in the BEV with its text descriptions.

    position is the centroid of the blob's cell centers, meters in the
    ego frame; area_m2 is cell count times cell area.
    """

    object_id: int
    position: tuple[float, float]
    area_m2: float
    cells: tuple[tuple[int, int], ...] = ()
    crop_descriptions: CropDescriptions = field(default_factory=CropDescriptions)
    category: str | None = None
    extras: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.object_id < 1:
            raise ValueError(f"object_id must be positive, got {self.object_id}")
        if not (self.area_m2 > 0 and math.isfinite(self.area_m2)):
            raise ValueError(f"area_m2 must be positive and finite, got {self.area_m2}")
        if self.category is not None and self.category not in VEHICLE_CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "cells", tuple((int(r), int(c)) for r, c in self.cells))

    def distance_to(self, other: "MapObject | None" = None) -> float:
        """Planar distance to another object's centroid, or to ego."""
        ox, oy = (0.0, 0.0) if other is None else other.position
        return math.hypot(self.position[0] - ox, self.position[1] - oy)


@dataclass(frozen=True)
class Provenance:
    """How a map was produced."""

    captioner_name: str = "none"
    bev_source: str = "predicted"
    not_visible_ids: tuple[int, ...] = ()
    caption_failed_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.bev_source not in BEV_SOURCES:
            raise ValueError(f"bev_source must be one of {BEV_SOURCES}")


@dataclass(frozen=True)
class LanguageEnhancedMap:
    """Object list plus grid metadata and provenance for one scene."""

    scene_token: str
    objects: tuple[MapObject, ...]
    grid_meta: GridMeta = field(default_factory=GridMeta)
    provenance: Provenance = field(default_factory=Provenance)
    extras: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        validate_objects(self.objects, self.grid_meta, path="objects")

    def get(self, object_id: int) -> MapObject | None:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        return None

    @property
    def object_ids(self) -> tuple[int, ...]:
        return tuple(o.object_id for o in self.objects)


def validate_objects(objects, meta: GridMeta, path: str = "objects") -> None:
    """Check id uniqueness, cell bounds, and geometric consistency."""
    seen: set[int] = set()
    for i, obj in enumerate(objects):
        p = f"{path}[{i}]"
        if obj.object_id in seen:
            raise SchemaError(f"duplicate object_id {obj.object_id}", f"{p}.object_id")
        seen.add(obj.object_id)
        if not obj.cells:
            continue
        for r, c in obj.cells:
            if not (0 <= r < meta.rows and 0 <= c < meta.cols):
                raise SchemaError(f"cell ({r}, {c}) outside grid", f"{p}.cells")
        expected_area = len(obj.cells) * meta.cell_size_m**2
        if abs(obj.area_m2 - expected_area) > 1e-6:
            raise SchemaError(
                f"area {obj.area_m2} != {expected_area} from {len(obj.cells)} cells", f"{p}.area"
            )
        centers = cell_centers(np.array(obj.cells, dtype=np.float64), meta)
        cx, cy = centers[:, 0].mean(), centers[:, 1].mean()
        if abs(cx - obj.position[0]) > 1e-6 or abs(cy - obj.position[1]) > 1e-6:
            raise SchemaError(
                f"position {obj.position} != cell centroid ({cx}, {cy})", f"{p}.position"
            )


def extract_objects(grid: BevGrid, min_cells: int = 2, connectivity: int = 8) -> list[MapObject]:
    """Segment the vehicle mask into objects.

    Connected components (8-connectivity by default); components smaller
    than min_cells are dropped as noise. Ids are assigned 1..N in raster
    order of each component's first cell.
    """
    labels = kernels.label_components(grid.vehicle_mask, connectivity)
    meta = grid.meta
    n = int(labels.max())
    objects: list[MapObject] = []
    next_id = 1
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    boundaries = np.searchsorted(flat[order], np.arange(1, n + 2))
    for lab in range(1, n + 1):
        idx = order[boundaries[lab - 1] : boundaries[lab]]
        if idx.size < min_cells:
            continue
        idx = np.sort(idx)
        cells = np.stack([idx // meta.cols, idx % meta.cols], axis=1)
        centers = cell_centers(cells.astype(np.float64), meta)
        objects.append(
            MapObject(
                object_id=next_id,
                position=(float(centers[:, 0].mean()), float(centers[:, 1].mean())),
                area_m2=float(idx.size * meta.cell_size_m**2),
                cells=tuple((int(r), int(c)) for r, c in cells),
            )
        )
        next_id += 1
    return objects


_OBJECT_KEYS = ("object_id", "position", "area", "crop_descriptions", "cells", "category")
MAP_FORMAT_VERSION = 1


def _number(v: float):
    # integral floats serialize without a trailing ".0" (area 4.0 -> 4)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def _object_to_dict(obj: MapObject) -> dict:
    d: dict = {
        "object_id": obj.object_id,
        "position": [_number(obj.position[0]), _number(obj.position[1])],
        "area": _number(obj.area_m2),
        "crop_descriptions": obj.crop_descriptions.to_dict(),
    }
    if obj.cells:
        d["cells"] = [[r, c] for r, c in obj.cells]
    if obj.category is not None:
        d["category"] = obj.category
    for key, value in obj.extras:
        d[key] = value
    return d


def object_from_dict(d: dict, path: str) -> MapObject:
    if not isinstance(d, dict):
        raise SchemaError("object entry must be a JSON object", path)
    for key in ("object_id", "position", "area", "crop_descriptions"):
        if key not in d:
            raise SchemaError(f"missing required field '{key}'", f"{path}.{key}")
    oid = d["object_id"]
    if not isinstance(oid, int) or isinstance(oid, bool) or oid < 1:
        raise SchemaError(f"object_id must be a positive integer, got {oid!r}", f"{path}.object_id")
    pos = d["position"]
    if not (isinstance(pos, (list, tuple)) and len(pos) == 2):
        raise SchemaError("position must be a [x, y] pair", f"{path}.position")
    area = d["area"]
    if not isinstance(area, (int, float)) or isinstance(area, bool):
        raise SchemaError("area must be a number", f"{path}.area")
    cells = d.get("cells", [])
    if not isinstance(cells, list):
        raise SchemaError("cells must be a list of [row, col]", f"{path}.cells")
    category = d.get("category")
    extras = tuple((k, v) for k, v in d.items() if k not in _OBJECT_KEYS)
    try:
        return MapObject(
            object_id=oid,
            position=(float(pos[0]), float(pos[1])),
            area_m2=float(area),
            cells=tuple((int(r), int(c)) for r, c in cells),
            crop_descriptions=CropDescriptions.from_dict(
                d["crop_descriptions"], f"{path}.crop_descriptions"
            ),
            category=category,
            extras=extras,
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), path) from exc


def serialize_map(lmap: LanguageEnhancedMap) -> str:
    """Serialize a map to its JSON wire format (single line)."""
    doc: dict = {
        "format_version": MAP_FORMAT_VERSION,
        "scene_token": lmap.scene_token,
        "grid_meta": lmap.grid_meta.to_dict(),
        "provenance": {
            "captioner_name": lmap.provenance.captioner_name,
            "bev_source": lmap.provenance.bev_source,
            "not_visible_ids": list(lmap.provenance.not_visible_ids),
            "caption_failed_ids": list(lmap.provenance.caption_failed_ids),
        },
        "objects": [_object_to_dict(o) for o in lmap.objects],
    }
    for key, value in lmap.extras:
        doc[key] = value
    return json.dumps(doc)


_MAP_KEYS = ("format_version", "scene_token", "grid_meta", "provenance", "objects")


def parse_map(text: str) -> LanguageEnhancedMap:
    """Parse the JSON wire format back into a LanguageEnhancedMap."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}", "$") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object", "$")
    for key in ("scene_token", "grid_meta", "objects"):
        if key not in doc:
            raise SchemaError(f"missing required field '{key}'", key)
    if not isinstance(doc["objects"], list):
        raise SchemaError("objects must be a list", "objects")
    meta = GridMeta.from_dict(doc["grid_meta"])
    prov_d = doc.get("provenance", {})
    provenance = Provenance(
        captioner_name=prov_d.get("captioner_name", "none"),
        bev_source=prov_d.get("bev_source", "predicted"),
        not_visible_ids=tuple(prov_d.get("not_visible_ids", ())),
        caption_failed_ids=tuple(prov_d.get("caption_failed_ids", ())),
    )
    objects = tuple(
        object_from_dict(entry, f"objects[{i}]") for i, entry in enumerate(doc["objects"])
    )
    extras = tuple((k, v) for k, v in doc.items() if k not in _MAP_KEYS)
    return LanguageEnhancedMap(
        scene_token=str(doc["scene_token"]),
        objects=objects,
        grid_meta=meta,
        provenance=provenance,
        extras=extras,
    )

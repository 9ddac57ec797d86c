"""Caption clients and the map-building pipelines.

build_language_map runs the full pipeline on a scene bundle: extract
objects from the grid, find each object's nearest LiDAR points, pick the
camera that sees the most of them, crop, then ask a captioner for an
object description and a surroundings description. build_gt_map does the
same over the bundle's ground-truth objects with a dense captioner plus
an OCR reader, appending " | OCR: <text>" when the OCR text is non-empty.

Per-object failures never abort a build: objects no camera sees get
placeholder texts and are listed in provenance.not_visible_ids, and
backend errors are contained the same way via caption_failed_ids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

import numpy as np

from .bundle import SceneBundle
from .errors import (
    BackendRefusal,
    EmptyCropError,
    NoPointsError,
    NotVisibleError,
    TransportError,
)
from .geometry import (
    CorrespondenceConfig,
    ObjectCrop,
    compute_crop_bbox,
    k_closest_lidar_points,
    project_to_camera,
    select_best_camera,
)
from .objects import (
    CropDescriptions,
    LanguageEnhancedMap,
    MapObject,
    Provenance,
    extract_objects,
)
from .prompts import load_template

DEFAULT_TEMPERATURE = 0.7
NOT_VISIBLE_TEXT = "not visible"
CAPTION_FAILED_TEXT = "caption unavailable"
UNKNOWN_OBJECT_TEXT = "unknown object"
MOCK_IOU_THRESHOLD = 0.3

OBJECT_PROMPT = load_template("caption_object").template.strip()
BACKGROUND_PROMPT = load_template("caption_background").template.strip()


@dataclass(frozen=True)
class ImageRegion:
    """A crop request: a camera name and a pixel-space bbox."""

    camera_name: str
    bbox_px: tuple[float, float, float, float]


@runtime_checkable
class CaptionerClient(Protocol):
    name: str

    def describe(
        self,
        bundle: SceneBundle,
        region: ImageRegion,
        prompt: str,
        temperature: float = DEFAULT_TEMPERATURE,
    ) -> str: ...


@runtime_checkable
class OcrClient(Protocol):
    name: str

    def read(self, bundle: SceneBundle, region: ImageRegion) -> str: ...


def bbox_iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def object_crop(
    bundle: SceneBundle,
    obj: MapObject,
    camera_name: str,
    config: CorrespondenceConfig,
) -> ObjectCrop:
    """Project an object's nearest LiDAR points into one named camera."""
    points = k_closest_lidar_points(bundle.lidar_points, obj.position, config.k)
    camera = bundle.camera(camera_name)
    uvd = project_to_camera(points, camera)
    projected = tuple((u, v) for u, v, _ in uvd)
    bbox = compute_crop_bbox(projected, config.bbox_pad_frac, (camera.image_w, camera.image_h))
    inside = tuple(
        (u, v) for u, v in projected if bbox[0] <= u <= bbox[2] and bbox[1] <= v <= bbox[3]
    )
    return ObjectCrop(
        object_id=obj.object_id,
        camera_name=camera_name,
        bbox_px=bbox,
        projected_points_px=inside,
    )


def best_crop(bundle: SceneBundle, obj: MapObject, config: CorrespondenceConfig) -> ObjectCrop:
    """Pick the camera seeing the most of the object's points, then crop.

    Raises NoPointsError (no LiDAR), NotVisibleError (no camera sees
    enough points), or EmptyCropError (nothing lands inside any image).
    """
    points = k_closest_lidar_points(bundle.lidar_points, obj.position, config.k)
    camera_name = select_best_camera(points, list(bundle.cameras), config.min_visible_points)
    return object_crop(bundle, obj, camera_name, config)


class _GtRegionMatcher:
    """Shared mock scaffolding: map a query region back to a GT object.

    The ground-truth bbox for each object is computed with the same
    correspondence pipeline real captions use, so a pipeline-produced
    crop matches its own object with IoU 1.0.
    """

    def __init__(self, iou_threshold: float = MOCK_IOU_THRESHOLD, config: CorrespondenceConfig | None = None):
        self.iou_threshold = iou_threshold
        self.config = config or CorrespondenceConfig()
        self._cache: dict[tuple[str, str, int], tuple[float, float, float, float] | None] = {}

    def _gt_bbox(self, bundle: SceneBundle, obj: MapObject, camera_name: str):
        key = (bundle.scene_token, camera_name, obj.object_id)
        if key not in self._cache:
            try:
                crop = object_crop(bundle, obj, camera_name, self.config)
                self._cache[key] = crop.bbox_px
            except (NoPointsError, EmptyCropError, KeyError):
                self._cache[key] = None
        return self._cache[key]

    def match(self, bundle: SceneBundle, region: ImageRegion) -> MapObject | None:
        best: MapObject | None = None
        best_iou = 0.0
        for obj in bundle.gt_objects or ():
            bbox = self._gt_bbox(bundle, obj, region.camera_name)
            if bbox is None:
                continue
            iou = bbox_iou(region.bbox_px, bbox)
            if iou > best_iou:
                best, best_iou = obj, iou
        if best is not None and best_iou >= self.iou_threshold:
            return best
        return None


class MockLvlmCaptioner(_GtRegionMatcher):
    """Deterministic stand-in for the vision-language captioner.

    Answers from the matched GT object's scripted texts; the word
    "surroundings" in the prompt selects the background description.
    """

    name = "mock-lvlm"

    def describe(self, bundle, region, prompt, temperature=DEFAULT_TEMPERATURE):
        obj = self.match(bundle, region)
        if obj is None:
            return UNKNOWN_OBJECT_TEXT
        if "surroundings" in prompt:
            return obj.crop_descriptions.background_text
        return obj.crop_descriptions.foreground_text


class MockDenseCaptioner(_GtRegionMatcher):
    """Deterministic stand-in for the dense captioner used on GT maps."""

    name = "mock-dense"

    def describe(self, bundle, region, prompt, temperature=DEFAULT_TEMPERATURE):
        obj = self.match(bundle, region)
        if obj is None:
            return UNKNOWN_OBJECT_TEXT
        if "surroundings" in prompt:
            return obj.crop_descriptions.background_text
        return obj.crop_descriptions.foreground_text


class MockOcr(_GtRegionMatcher):
    """Deterministic stand-in for the OCR reader; "" when no text."""

    name = "mock-ocr"

    def read(self, bundle, region):
        obj = self.match(bundle, region)
        if obj is None or obj.crop_descriptions.ocr_text is None:
            return ""
        return obj.crop_descriptions.ocr_text


class HttpCaptioner:
    """Captioner backed by a REST endpoint (POST {base_url}/caption).

    Request JSON: scene_token, camera_name, bbox_px, prompt, temperature.
    Response JSON: {"text": "..."}. Transient transport errors and 5xx
    responses are retried twice with backoff; 4xx is a refusal.
    """

    def __init__(self, base_url: str, name: str = "http-captioner", retries: int = 2,
                 backoff_s: float = 0.2, timeout_s: float = 10.0, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.name = name
        self.retries = retries
        self.backoff_s = backoff_s
        self._client = client or httpx.Client(timeout=timeout_s)

    def describe(self, bundle, region, prompt, temperature=DEFAULT_TEMPERATURE):
        import httpx

        payload = {
            "scene_token": bundle.scene_token,
            "camera_name": region.camera_name,
            "bbox_px": list(region.bbox_px),
            "prompt": prompt,
            "temperature": temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt and self.backoff_s:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._client.post(f"{self.base_url}/caption", json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if 400 <= response.status_code < 500:
                raise BackendRefusal(f"captioner refused ({response.status_code}): {response.text}")
            if response.status_code >= 500:
                last_error = TransportError(f"captioner returned {response.status_code}")
                continue
            try:
                text = response.json()["text"]
            except (ValueError, KeyError) as exc:
                raise TransportError(f"bad caption response: {exc}") from exc
            if not isinstance(text, str):
                raise TransportError("caption response 'text' must be a string")
            return text
        raise TransportError(f"captioner unreachable after {self.retries + 1} attempts: {last_error}")


@dataclass
class _DescribeOutcome:
    descriptions: CropDescriptions
    not_visible: bool = False
    failed: bool = False


def _contained(describe_fn, obj: MapObject) -> _DescribeOutcome:
    placeholder = CropDescriptions(
        foreground_text=NOT_VISIBLE_TEXT, background_text=NOT_VISIBLE_TEXT
    )
    try:
        return _DescribeOutcome(describe_fn(obj))
    except (NoPointsError, NotVisibleError, EmptyCropError):
        return _DescribeOutcome(placeholder, not_visible=True)
    except (TransportError, BackendRefusal):
        failed = CropDescriptions(
            foreground_text=CAPTION_FAILED_TEXT, background_text=CAPTION_FAILED_TEXT
        )
        return _DescribeOutcome(failed, failed=True)


def build_language_map(
    bundle: SceneBundle,
    captioner: CaptionerClient,
    config: CorrespondenceConfig | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    min_cells: int = 2,
) -> LanguageEnhancedMap:
    """Extract objects from the grid and caption each one."""
    config = config or CorrespondenceConfig()
    objects = extract_objects(bundle.grid, min_cells=min_cells)

    def describe(obj: MapObject) -> CropDescriptions:
        crop = best_crop(bundle, obj, config)
        region = ImageRegion(crop.camera_name, crop.bbox_px)
        foreground = captioner.describe(bundle, region, OBJECT_PROMPT, temperature)
        background = captioner.describe(bundle, region, BACKGROUND_PROMPT, temperature)
        return CropDescriptions(
            foreground_text=foreground,
            background_text=background,
            source_camera=crop.camera_name,
            bbox_px=crop.bbox_px,
        )

    captioned: list[MapObject] = []
    not_visible: list[int] = []
    failed: list[int] = []
    for obj in objects:
        outcome = _contained(describe, obj)
        if outcome.not_visible:
            not_visible.append(obj.object_id)
        if outcome.failed:
            failed.append(obj.object_id)
        captioned.append(replace(obj, crop_descriptions=outcome.descriptions))
    provenance = Provenance(
        captioner_name=captioner.name,
        bev_source=bundle.bev_source,
        not_visible_ids=tuple(not_visible),
        caption_failed_ids=tuple(failed),
    )
    return LanguageEnhancedMap(
        scene_token=bundle.scene_token,
        objects=tuple(captioned),
        grid_meta=bundle.grid.meta,
        provenance=provenance,
    )


def build_gt_map(
    bundle: SceneBundle,
    dense_captioner: CaptionerClient,
    ocr: OcrClient,
    config: CorrespondenceConfig | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
) -> LanguageEnhancedMap:
    """Caption the bundle's ground-truth objects, appending OCR text."""
    if bundle.gt_objects is None:
        raise ValueError("bundle has no ground-truth objects")
    config = config or CorrespondenceConfig()

    def describe(obj: MapObject) -> CropDescriptions:
        crop = best_crop(bundle, obj, config)
        region = ImageRegion(crop.camera_name, crop.bbox_px)
        foreground = dense_captioner.describe(bundle, region, OBJECT_PROMPT, temperature)
        background = dense_captioner.describe(bundle, region, BACKGROUND_PROMPT, temperature)
        ocr_text = ocr.read(bundle, region)
        if ocr_text:
            foreground = f"{foreground} | OCR: {ocr_text}"
        return CropDescriptions(
            foreground_text=foreground,
            background_text=background,
            ocr_text=ocr_text or None,
            source_camera=crop.camera_name,
            bbox_px=crop.bbox_px,
        )

    captioned: list[MapObject] = []
    not_visible: list[int] = []
    failed: list[int] = []
    for obj in bundle.gt_objects:
        outcome = _contained(describe, obj)
        if outcome.not_visible:
            not_visible.append(obj.object_id)
        if outcome.failed:
            failed.append(obj.object_id)
        captioned.append(replace(obj, crop_descriptions=outcome.descriptions))
    provenance = Provenance(
        captioner_name=f"{dense_captioner.name}+{ocr.name}",
        bev_source="ground_truth",
        not_visible_ids=tuple(not_visible),
        caption_failed_ids=tuple(failed),
    )
    return LanguageEnhancedMap(
        scene_token=bundle.scene_token,
        objects=tuple(captioned),
        grid_meta=bundle.grid.meta,
        provenance=provenance,
    )

"""Deterministic synthetic scene generator.

Scenes contain rectangular vehicle blobs on a 200x200 grid, a perimeter
LiDAR ring per blob at three fixed heights, six rendered camera images,
and ground-truth objects whose ids come from the same connected-component
extraction used on predicted maps. Everything is a pure function of
(scene_token, seed), so generated bundles are byte-identical across runs.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import CapacityError, GenerationError
from .geometry import CameraModel, project_to_camera
from .grid import BevGrid
from .objects import CropDescriptions, extract_objects
from .bundle import SceneBundle

IMAGE_W, IMAGE_H = 800, 450
FOCAL_PX = 500.0
CAMERA_HEIGHT_M = 1.6

# name -> yaw of the optical axis, degrees CCW from the +x (forward) axis
CANONICAL_RIG_YAWS = (
    ("CAM_FRONT", 0.0),
    ("CAM_FRONT_LEFT", 55.0),
    ("CAM_FRONT_RIGHT", -55.0),
    ("CAM_BACK", 180.0),
    ("CAM_BACK_LEFT", 125.0),
    ("CAM_BACK_RIGHT", -125.0),
)

# per-category footprint ranges in cells: ((rows_lo, rows_hi), (cols_lo, cols_hi))
_FOOTPRINTS = {
    "2-wheeler": ((3, 4), (1, 2)),
    "car": ((8, 10), (4, 5)),
    "truck": ((11, 15), (5, 6)),
    "construction": ((9, 13), (6, 8)),
    "other": ((4, 7), (3, 6)),
}

_COLORS = ("red", "blue", "green", "black", "white", "yellow", "silver", "orange")
_KINDS = {
    "2-wheeler": ("motorcycle", "scooter", "bicycle"),
    "car": ("sedan", "hatchback", "SUV", "taxi"),
    "truck": ("box truck", "pickup truck", "semi truck"),
    "construction": ("excavator", "bulldozer", "crane truck"),
    "other": ("van", "bus", "trailer"),
}
_BACKGROUNDS = (
    "on an asphalt road",
    "next to a lane divider",
    "near a crosswalk",
    "on the road shoulder",
)
_OCR_TEXTS = ("TAXI 702", "MOVERS CO", "SCHOOL BUS", "KL 4821", "RENT ME", "CITY 18")

_LIDAR_HEIGHTS_M = (0.3, 0.8, 1.3)
_LIDAR_STEP_M = 0.25
_PLACEMENT_ATTEMPTS = 500
_EDGE_MARGIN_CELLS = 2


def canonical_rig(height_m: float = CAMERA_HEIGHT_M) -> tuple[CameraModel, ...]:
    """Six cameras at the ego origin, yawed to cover the full horizon."""
    cams = []
    for name, yaw_deg in CANONICAL_RIG_YAWS:
        th = math.radians(yaw_deg)
        s, c = math.sin(th), math.cos(th)
        rotation = np.array([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])
        center = np.array([0.0, 0.0, height_m])
        cams.append(
            CameraModel(
                name=name,
                fx=FOCAL_PX,
                fy=FOCAL_PX,
                cx=IMAGE_W / 2,
                cy=IMAGE_H / 2,
                rotation=rotation,
                translation=-rotation @ center,
                image_w=IMAGE_W,
                image_h=IMAGE_H,
            )
        )
    return tuple(cams)


@dataclasses.dataclass
class _Placement:
    top: int
    left: int
    h: int
    w: int
    category: str
    color: str
    kind: str
    background: str
    ocr_text: str | None


def _place_blobs(rng: np.random.Generator, rows: int, cols: int, n_objects: int):
    vehicle = np.zeros((rows, cols), dtype=bool)
    # keep the ego footprint and a margin around it free
    reserved = np.zeros((rows, cols), dtype=bool)
    reserved[rows // 2 - 6 : rows // 2 + 6, cols // 2 - 4 : cols // 2 + 4] = True

    categories = sorted(_FOOTPRINTS)
    placements: list[_Placement] = []
    for i in range(n_objects):
        placed = False
        for _ in range(_PLACEMENT_ATTEMPTS):
            category = categories[int(rng.integers(len(categories)))]
            (h_lo, h_hi), (w_lo, w_hi) = _FOOTPRINTS[category]
            h = int(rng.integers(h_lo, h_hi + 1))
            w = int(rng.integers(w_lo, w_hi + 1))
            if rng.integers(2):
                h, w = w, h
            top = int(rng.integers(_EDGE_MARGIN_CELLS, rows - _EDGE_MARGIN_CELLS - h + 1))
            left = int(rng.integers(_EDGE_MARGIN_CELLS, cols - _EDGE_MARGIN_CELLS - w + 1))
            window = slice(top - 1, top + h + 1), slice(left - 1, left + w + 1)
            if vehicle[window].any() or reserved[window].any():
                continue
            vehicle[top : top + h, left : left + w] = True
            color = _COLORS[int(rng.integers(len(_COLORS)))]
            kinds = _KINDS[category]
            kind = kinds[int(rng.integers(len(kinds)))]
            background = _BACKGROUNDS[int(rng.integers(len(_BACKGROUNDS)))]
            ocr = None
            if rng.random() < 0.3:
                ocr = _OCR_TEXTS[int(rng.integers(len(_OCR_TEXTS)))]
            placements.append(_Placement(top, left, h, w, category, color, kind, background, ocr))
            placed = True
            break
        if not placed:
            raise CapacityError(f"could not place object {i + 1} of {n_objects} after {_PLACEMENT_ATTEMPTS} attempts")
    return vehicle, placements


def _metric_bounds(p: _Placement, rows: int, cols: int, csz: float):
    """Metric AABB of a placement: (x_min, x_max, y_min, y_max)."""
    x_max = (rows / 2 - p.top) * csz
    x_min = (rows / 2 - (p.top + p.h)) * csz
    y_max = (cols / 2 - p.left) * csz
    y_min = (cols / 2 - (p.left + p.w)) * csz
    return x_min, x_max, y_min, y_max


def _perimeter_points(p: _Placement, rows: int, cols: int, csz: float) -> np.ndarray:
    x_min, x_max, y_min, y_max = _metric_bounds(p, rows, cols, csz)
    xs = np.arange(x_min, x_max + 1e-9, _LIDAR_STEP_M)
    ys = np.arange(y_min, y_max + 1e-9, _LIDAR_STEP_M)
    ring = (
        [(x, y_min) for x in xs]
        + [(x, y_max) for x in xs]
        + [(x_min, y) for y in ys[1:-1]]
        + [(x_max, y) for y in ys[1:-1]]
    )
    pts = [(x, y, z) for z in _LIDAR_HEIGHTS_M for x, y in ring]
    return np.array(pts, dtype=np.float32)


def _road_mask(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    road = np.zeros((rows, cols), dtype=bool)
    half_r = int(rng.integers(8, 15))
    half_c = int(rng.integers(8, 15))
    road[rows // 2 - half_r : rows // 2 + half_r, :] = True
    road[:, cols // 2 - half_c : cols // 2 + half_c] = True
    return road


def _render_images(
    cameras: tuple[CameraModel, ...],
    placements: list[_Placement],
    point_sets: list[np.ndarray],
) -> dict[str, np.ndarray]:
    from PIL import Image, ImageDraw

    # paint far objects first so closer ones overdraw them
    def depth_key(i: int) -> float:
        x_min, x_max, y_min, y_max = (
            float(point_sets[i][:, 0].min()),
            float(point_sets[i][:, 0].max()),
            float(point_sets[i][:, 1].min()),
            float(point_sets[i][:, 1].max()),
        )
        return math.hypot((x_min + x_max) / 2, (y_min + y_max) / 2)

    order = sorted(range(len(placements)), key=depth_key, reverse=True)
    images: dict[str, np.ndarray] = {}
    for cam in cameras:
        im = Image.new("RGB", (cam.image_w, cam.image_h), (70, 70, 76))
        draw = ImageDraw.Draw(im)
        draw.rectangle([0, 0, cam.image_w, int(cam.cy)], fill=(138, 180, 220))
        for i in order:
            uvd = project_to_camera(point_sets[i], cam)
            if len(uvd) < 3:
                continue
            us = [u for u, _, _ in uvd]
            vs = [v for _, v, _ in uvd]
            box = [min(us), min(vs), max(us), max(vs)]
            draw.rectangle(box, fill=placements[i].color, outline="black")
            if placements[i].ocr_text:
                draw.text((box[0] + 2, (box[1] + box[3]) / 2), placements[i].ocr_text, fill="black")
        images[cam.name] = np.asarray(im)
    return images


def generate_synthetic_scene(
    scene_token: str,
    seed: int,
    n_objects: int = 8,
    rows: int = 200,
    cols: int = 200,
    cell_size_m: float = 0.5,
    render: bool = True,
) -> SceneBundle:
    """Build a fully self-consistent synthetic SceneBundle.

    Ground-truth objects reuse the map extraction, so their ids, positions,
    and areas are exactly what building a map from the grid will produce.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    rng = np.random.default_rng(seed)
    vehicle, placements = _place_blobs(rng, rows, cols, n_objects)
    road = _road_mask(rng, rows, cols)
    grid = BevGrid(
        rows=rows, cols=cols, cell_size_m=cell_size_m, vehicle_mask=vehicle, road_mask=road
    )

    point_sets = [_perimeter_points(p, rows, cols, cell_size_m) for p in placements]
    lidar = np.concatenate(point_sets) if point_sets else np.zeros((0, 3), dtype=np.float32)

    # ids come from extraction (raster order); map each back to its placement
    extracted = extract_objects(grid, min_cells=2)
    if len(extracted) != len(placements):
        raise GenerationError(
            f"extraction found {len(extracted)} blobs for {len(placements)} placements",
            category="blob_merge",
        )
    owner: dict[tuple[int, int], int] = {}
    for pi, p in enumerate(placements):
        for r in range(p.top, p.top + p.h):
            for c in range(p.left, p.left + p.w):
                owner[(r, c)] = pi
    gt_objects = []
    for obj in extracted:
        p = placements[owner[obj.cells[0]]]
        article = "an" if p.color[0] in "aeiou" else "a"
        descriptions = CropDescriptions(
            foreground_text=f"{article} {p.color} {p.kind}",
            background_text=p.background,
            ocr_text=p.ocr_text,
        )
        gt_objects.append(
            dataclasses.replace(obj, crop_descriptions=descriptions, category=p.category)
        )

    cameras = canonical_rig()
    images = _render_images(cameras, placements, point_sets) if render else None
    image_paths = (
        {cam.name: f"images/{cam.name}.png" for cam in cameras} if render else {}
    )
    return SceneBundle(
        scene_token=scene_token,
        grid=grid,
        cameras=cameras,
        image_paths=image_paths,
        lidar_points=lidar,
        gt_objects=tuple(gt_objects),
        bev_source="synthetic",
        images=images,
    )

"""Scene bundle: the on-disk package for one scene.

Layout of a bundle directory:
  scene.json   metadata, cameras, RLE-encoded grid masks, GT objects
  lidar.bin    little-endian float32 (x, y, z) triples, no header
  images/*.png one image per camera named in image_paths

scene.json is versioned ("format_version": 1). All numeric fields round
trip at full precision.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BundleLoadError, SchemaError
from .geometry import CameraModel
from .grid import BevGrid, rle_decode, rle_encode
from .objects import BEV_SOURCES, MapObject, _object_to_dict, object_from_dict, validate_objects

BUNDLE_FORMAT_VERSION = 1
MAX_CAMERAS = 6


@dataclass(frozen=True, eq=False)
class SceneBundle:
    """Raw inputs for one scene: grid, camera rig, images, LiDAR, GT."""

    scene_token: str
    grid: BevGrid
    cameras: tuple[CameraModel, ...] = ()
    image_paths: dict[str, str] = field(default_factory=dict)
    lidar_points: np.ndarray = field(default=None)  # type: ignore[assignment]
    gt_objects: tuple[MapObject, ...] | None = None
    bev_source: str = "predicted"
    # pixel sources, not part of bundle identity
    root: Path | None = field(default=None, repr=False)
    images: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if len(self.cameras) > MAX_CAMERAS:
            raise ValueError(f"at most {MAX_CAMERAS} cameras supported, got {len(self.cameras)}")
        if self.bev_source not in BEV_SOURCES:
            raise ValueError(f"bev_source must be one of {BEV_SOURCES}")
        names = {c.name for c in self.cameras}
        for cam_name in self.image_paths:
            if cam_name not in names:
                raise ValueError(f"image_paths references unknown camera {cam_name!r}")
        pts = self.lidar_points
        pts = np.zeros((0, 3), dtype=np.float32) if pts is None else np.asarray(pts)
        pts = np.ascontiguousarray(pts, dtype=np.float32).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("lidar_points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "lidar_points", pts)
        if self.gt_objects is not None:
            object.__setattr__(self, "gt_objects", tuple(self.gt_objects))
            validate_objects(self.gt_objects, self.grid.meta, path="gt_objects")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SceneBundle):
            return NotImplemented
        return (
            self.scene_token == other.scene_token
            and self.grid == other.grid
            and self.cameras == other.cameras
            and self.image_paths == other.image_paths
            and np.array_equal(self.lidar_points, other.lidar_points)
            and self.gt_objects == other.gt_objects
            and self.bev_source == other.bev_source
        )

    def camera(self, name: str) -> CameraModel:
        for cam in self.cameras:
            if cam.name == name:
                return cam
        raise KeyError(name)

    def image_array(self, camera_name: str) -> np.ndarray | None:
        """Pixels for a camera, from memory or from disk; None if absent."""
        if self.images is not None and camera_name in self.images:
            return self.images[camera_name]
        rel = self.image_paths.get(camera_name)
        if rel is None or self.root is None:
            return None
        from PIL import Image

        with Image.open(Path(self.root) / rel) as im:
            return np.asarray(im.convert("RGB"))


def save_bundle(bundle: SceneBundle, path: str | Path) -> None:
    """Write a bundle directory (scene.json, lidar.bin, images)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "scene_token": bundle.scene_token,
        "bev_source": bundle.bev_source,
        "grid": {
            "rows": bundle.grid.rows,
            "cols": bundle.grid.cols,
            "cell_size_m": bundle.grid.cell_size_m,
            "vehicle_rle": rle_encode(bundle.grid.vehicle_mask),
            "road_rle": rle_encode(bundle.grid.road_mask),
        },
        "cameras": [cam.to_dict() for cam in bundle.cameras],
        "image_paths": dict(sorted(bundle.image_paths.items())),
        "gt_objects": (
            None
            if bundle.gt_objects is None
            else [_object_to_dict(o) for o in bundle.gt_objects]
        ),
    }
    (path / "scene.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    (path / "lidar.bin").write_bytes(
        np.ascontiguousarray(bundle.lidar_points, dtype="<f4").tobytes()
    )
    for cam_name, rel in bundle.image_paths.items():
        dst = path / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        if bundle.images is not None and cam_name in bundle.images:
            from PIL import Image

            Image.fromarray(bundle.images[cam_name]).save(dst)
        elif bundle.root is not None and (Path(bundle.root) / rel) != dst:
            shutil.copyfile(Path(bundle.root) / rel, dst)
        elif not dst.exists():
            raise ValueError(f"no pixel source for image {rel!r}")


def load_bundle(path: str | Path) -> SceneBundle:
    """Load a bundle directory, validating files and schema."""
    path = Path(path)
    scene_path = path / "scene.json"
    if not scene_path.is_file():
        raise BundleLoadError(f"missing {scene_path}", reason="missing_file")
    try:
        doc = json.loads(scene_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleLoadError(f"scene.json is not valid JSON: {exc}", reason="bad_json") from exc
    try:
        grid_d = doc["grid"]
        rows, cols = int(grid_d["rows"]), int(grid_d["cols"])
        cell = float(grid_d["cell_size_m"])
        vehicle = rle_decode(grid_d["vehicle_rle"], rows, cols, path="grid.vehicle_rle")
        road = rle_decode(grid_d["road_rle"], rows, cols, path="grid.road_rle")
    except KeyError as exc:
        raise BundleLoadError(f"scene.json missing field {exc}", reason="bad_json") from exc
    except SchemaError as exc:
        raise BundleLoadError(f"bad RLE mask: {exc}", reason="rle_invalid") from exc
    grid = BevGrid(rows=rows, cols=cols, cell_size_m=cell, vehicle_mask=vehicle, road_mask=road)

    cameras = []
    for i, cam_d in enumerate(doc.get("cameras", [])):
        try:
            cameras.append(CameraModel.from_dict(cam_d))
        except (KeyError, ValueError) as exc:
            raise BundleLoadError(f"cameras[{i}]: {exc}", reason="bad_rotation") from exc

    image_paths = dict(doc.get("image_paths", {}))
    for cam_name, rel in image_paths.items():
        if not (path / rel).is_file():
            raise BundleLoadError(f"missing image file {rel!r}", reason="missing_file")

    lidar_path = path / "lidar.bin"
    if not lidar_path.is_file():
        raise BundleLoadError(f"missing {lidar_path}", reason="missing_file")
    raw = lidar_path.read_bytes()
    if len(raw) % 12 != 0:
        raise BundleLoadError(
            f"lidar.bin is {len(raw)} bytes, not a multiple of 12", reason="lidar_length"
        )
    lidar = np.frombuffer(raw, dtype="<f4").reshape(-1, 3)
    if not np.isfinite(lidar).all():
        raise BundleLoadError("lidar.bin contains non-finite values", reason="lidar_invalid")

    gt_raw = doc.get("gt_objects")
    gt_objects = None
    if gt_raw is not None:
        try:
            gt_objects = tuple(
                object_from_dict(entry, f"gt_objects[{i}]") for i, entry in enumerate(gt_raw)
            )
        except SchemaError as exc:
            raise BundleLoadError(str(exc), reason="bad_json") from exc

    try:
        return SceneBundle(
            scene_token=str(doc["scene_token"]),
            grid=grid,
            cameras=tuple(cameras),
            image_paths=image_paths,
            lidar_points=lidar,
            gt_objects=gt_objects,
            bev_source=doc.get("bev_source", "predicted"),
            root=path,
        )
    except (ValueError, SchemaError) as exc:
        raise BundleLoadError(f"inconsistent bundle: {exc}", reason="bad_json") from exc

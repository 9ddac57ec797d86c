import random

import numpy as np
import pytest

from bevlang.grid import BevGrid
from bevlang.objects import CropDescriptions, LanguageEnhancedMap, MapObject


def make_obj(object_id: int, x: float, y: float, area: float = 1.0, **kwargs) -> MapObject:
    crop_kwargs = {
        k: kwargs.pop(k)
        for k in ("foreground_text", "background_text", "ocr_text")
        if k in kwargs
    }
    if crop_kwargs and "crop_descriptions" not in kwargs:
        crop_kwargs.setdefault("foreground_text", f"object {object_id}")
        crop_kwargs.setdefault("background_text", "somewhere")
        kwargs["crop_descriptions"] = CropDescriptions(**crop_kwargs)
    return MapObject(object_id=object_id, position=(x, y), area_m2=area, **kwargs)


def make_map(objects, scene_token: str = "test-scene") -> LanguageEnhancedMap:
    return LanguageEnhancedMap(scene_token=scene_token, objects=tuple(objects))


def random_objects(rng: random.Random, max_n: int = 30) -> list[MapObject]:
    """Object sets for oracle comparisons: continuous positions, and an
    occasional exact-zero coordinate to land on a direction boundary."""
    n = rng.randint(0, max_n)
    objs = []
    for i in range(n):
        x = rng.uniform(-50.0, 50.0)
        y = rng.uniform(-50.0, 50.0)
        if rng.random() < 0.08:
            x = 0.0
        if rng.random() < 0.08:
            y = 0.0
        objs.append(
            make_obj(
                i + 1,
                x,
                y,
                area=round(rng.uniform(0.25, 30.0), 2),
                crop_descriptions=CropDescriptions(
                    foreground_text=f"object {i + 1}", background_text="somewhere"
                ),
            )
        )
    return objs


def flood_labels(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """BFS flood-fill labeling: 1..N in raster order of first occurrence."""
    if connectivity == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    rows, cols = mask.shape
    labels = np.zeros((rows, cols), dtype=np.int64)
    next_label = 0
    for r0 in range(rows):
        for c0 in range(cols):
            if not mask[r0, c0] or labels[r0, c0]:
                continue
            next_label += 1
            queue = [(r0, c0)]
            labels[r0, c0] = next_label
            while queue:
                r, c = queue.pop()
                for dr, dc in steps:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols and mask[rr, cc] and not labels[rr, cc]:
                        labels[rr, cc] = next_label
                        queue.append((rr, cc))
    return labels


def paper_example_mask() -> np.ndarray:
    """Three blobs; the third reproduces the documented listing: id 3,
    centroid (2.5, 1.5), area 4 m^2 (a 4x4-cell square)."""
    mask = np.zeros((200, 200), dtype=bool)
    mask[10:12, 20:22] = True
    mask[50:53, 150:152] = True
    mask[93:97, 95:99] = True
    return mask


@pytest.fixture
def paper_grid() -> BevGrid:
    return BevGrid(vehicle_mask=paper_example_mask())

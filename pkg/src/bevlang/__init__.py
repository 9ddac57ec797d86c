"""Language-enhanced bird's-eye-view maps with spatial operators.

The package builds object-level BEV maps from occupancy grids, attaches
natural-language descriptions via LiDAR-camera correspondence, exposes
twelve composable spatial operators behind a small call language, runs an
LLM tool loop over them, and benchmarks the whole stack.
"""

from .bundle import SceneBundle, load_bundle, save_bundle
from .calls import CallExpr, NumberLit, ObjsRef, StringLit, eval_call, parse_call, pretty_print
from .errors import BevlangError
from .geometry import CameraModel, CorrespondenceConfig, ObjectCrop
from .grid import BevGrid, GridMeta, cell_to_metric, metric_to_cell
from .objects import (
    CropDescriptions,
    LanguageEnhancedMap,
    MapObject,
    Provenance,
    extract_objects,
    parse_map,
    serialize_map,
)
from .spatial_ops import REGISTRY, apply_op

__version__ = "0.1.0"

__all__ = [
    "BevGrid",
    "BevlangError",
    "CallExpr",
    "CameraModel",
    "CorrespondenceConfig",
    "CropDescriptions",
    "GridMeta",
    "LanguageEnhancedMap",
    "MapObject",
    "NumberLit",
    "ObjectCrop",
    "ObjsRef",
    "Provenance",
    "REGISTRY",
    "SceneBundle",
    "StringLit",
    "apply_op",
    "cell_to_metric",
    "eval_call",
    "extract_objects",
    "load_bundle",
    "metric_to_cell",
    "parse_call",
    "parse_map",
    "pretty_print",
    "save_bundle",
    "serialize_map",
    "__version__",
]

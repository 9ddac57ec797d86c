"""REST service exposing scenes, maps, rendering data, chat, and the bench.

Routes:
  GET  /api/scenes                    list loaded scenes
  GET  /api/scenes/{token}/map        full map JSON (lossless round trip)
  GET  /api/scenes/{token}/render     grid + per-object cells for drawing
  POST /api/chat                      one chat turn, multi-turn via
                                      conversation_id
  POST /api/bench/run                 score an answerer on synthetic scenes

Error mapping: unknown scene or conversation is 404, bad input is 400,
backend (LLM or captioner) trouble is 502. Conversations are kept in an
LRU store (default 256); each holds its own lock, so concurrent turns on
one conversation serialize instead of interleaving.
"""

import threading
import uuid
from collections import OrderedDict
from typing import Mapping

import numpy as np

from .errors import (
    BackendRefusal,
    BevlangError,
    CallParseError,
    GenerationError,
    MalformedResponseError,
    SchemaError,
    ScoringError,
    ScriptError,
    SpatialArgError,
    ToolBudgetError,
    TransportError,
)
from .grid import rle_encode
from .objects import LanguageEnhancedMap, serialize_map
from .orchestrator import Conversation, LlmClient, ask

_BAD_REQUEST = (SchemaError, CallParseError, SpatialArgError, GenerationError, ScoringError)
_BACKEND_FAILURE = (
    TransportError,
    BackendRefusal,
    MalformedResponseError,
    ToolBudgetError,
    ScriptError,
)

DEFAULT_CONVERSATION_CAPACITY = 256
BENCH_MAX_SCENES = 50


class ConversationStore:
    """LRU map of conversation_id -> (Conversation, Lock)."""

    def __init__(self, capacity: int = DEFAULT_CONVERSATION_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._entries: OrderedDict[str, tuple[Conversation, threading.Lock]] = OrderedDict()

    def create(self, conversation: Conversation) -> tuple[str, threading.Lock]:
        conversation_id = uuid.uuid4().hex
        lock = threading.Lock()
        with self._lock:
            self._entries[conversation_id] = (conversation, lock)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
        return conversation_id, lock

    def get(self, conversation_id: str):
        with self._lock:
            entry = self._entries.get(conversation_id)
            if entry is not None:
                self._entries.move_to_end(conversation_id)
            return entry

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def render_payload(map_: LanguageEnhancedMap, grid=None) -> dict:
    """Drawing data for one scene: grid meta, masks, per-object cells."""
    meta = map_.grid_meta
    payload: dict = {
        "scene_token": map_.scene_token,
        "grid": {"rows": meta.rows, "cols": meta.cols, "cell_size_m": meta.cell_size_m},
        "ego": {"row": meta.rows / 2 - 0.5, "col": meta.cols / 2 - 0.5},
        "objects": [],
    }
    if grid is not None:
        payload["road_rle"] = rle_encode(grid.road_mask)
        payload["vehicle_rle"] = rle_encode(grid.vehicle_mask)
    for obj in map_.objects:
        mask = np.zeros((meta.rows, meta.cols), dtype=bool)
        for r, c in obj.cells:
            mask[r, c] = True
        rows = [r for r, _ in obj.cells]
        cols = [c for _, c in obj.cells]
        bbox = [min(rows), min(cols), max(rows), max(cols)] if obj.cells else None
        payload["objects"].append(
            {
                "object_id": obj.object_id,
                "position": [obj.position[0], obj.position[1]],
                "area": obj.area_m2,
                "category": obj.category,
                "foreground_text": obj.crop_descriptions.foreground_text,
                "background_text": obj.crop_descriptions.background_text,
                "cells_bbox": bbox,
                "cells_rle": rle_encode(mask),
            }
        )
    return payload


def create_app(
    scenes: Mapping[str, LanguageEnhancedMap],
    llm: LlmClient,
    grids: Mapping[str, object] | None = None,
    conversation_capacity: int = DEFAULT_CONVERSATION_CAPACITY,
):
    """Build the FastAPI app around prepared maps and one LLM client.

    grids optionally maps scene tokens to BevGrid so /render can include
    the road and raw vehicle masks.
    """
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, Response
    from pydantic import BaseModel

    grids = grids or {}
    app = FastAPI(title="bev language map service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = ConversationStore(conversation_capacity)
    app.state.conversations = store

    def error_json(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(
            status_code=status, content={"error": {"code": code, "message": message}}
        )

    @app.exception_handler(BevlangError)
    async def handle_engine_error(request: Request, exc: BevlangError):
        if isinstance(exc, _BAD_REQUEST):
            return error_json(400, exc.code, str(exc))
        if isinstance(exc, _BACKEND_FAILURE):
            return error_json(502, exc.code, str(exc))
        return error_json(500, exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return error_json(400, "bad_request", str(exc.errors()))

    class ChatRequest(BaseModel):
        scene_token: str
        message: str
        conversation_id: str | None = None

    class BenchRequest(BaseModel):
        mode: str = "with_so"
        n_scenes: int = 5
        n_objects: int = 8
        seed: int = 100
        queries_per_scene: int = 5

    @app.get("/api/scenes")
    def list_scenes():
        return {
            "scenes": [
                {"scene_token": token, "n_objects": len(scenes[token].objects)}
                for token in sorted(scenes)
            ]
        }

    class _NotFound(Exception):
        def __init__(self, message: str):
            self.message = message

    @app.exception_handler(_NotFound)
    async def handle_not_found(request: Request, exc: _NotFound):
        return error_json(404, "not_found", exc.message)

    def get_map(token: str) -> LanguageEnhancedMap:
        map_ = scenes.get(token)
        if map_ is None:
            raise _NotFound(f"unknown scene {token!r}")
        return map_

    @app.get("/api/scenes/{token}/map")
    def scene_map(token: str):
        # raw serialize_map bytes so clients get the exact round-trip form
        return Response(content=serialize_map(get_map(token)), media_type="application/json")

    @app.get("/api/scenes/{token}/render")
    def scene_render(token: str):
        map_ = get_map(token)
        return render_payload(map_, grids.get(token))

    @app.post("/api/chat")
    def chat(body: ChatRequest):
        if not body.message.strip():
            return error_json(400, "bad_request", "message must be non-empty")
        if body.conversation_id is None:
            map_ = get_map(body.scene_token)
            conversation = Conversation(map=map_, llm=llm)
            conversation_id, lock = store.create(conversation)
        else:
            conversation_id = body.conversation_id
            entry = store.get(conversation_id)
            if entry is None:
                raise _NotFound(f"unknown conversation {conversation_id!r}")
            conversation, lock = entry
            if conversation.map.scene_token != body.scene_token:
                return error_json(
                    400, "bad_request", "conversation belongs to a different scene"
                )
        with lock:
            response = ask(conversation, body.message)
            transcript_length = len(conversation.messages)
        return {
            "conversation_id": conversation_id,
            "scene_token": conversation.map.scene_token,
            "response": response.to_dict(),
            "transcript_length": transcript_length,
        }

    @app.post("/api/bench/run")
    def bench_run(body: BenchRequest):
        from .bench import (
            OrchestratorSpatialAnswerer,
            RandomSpatialAnswerer,
            make_spatial_suite,
            run_bench,
        )
        from .orchestrator import NumericGuessLlm, ScriptedLlm
        from importlib import resources

        if not 1 <= body.n_scenes <= BENCH_MAX_SCENES:
            return error_json(400, "bad_request", f"n_scenes must be 1..{BENCH_MAX_SCENES}")
        if body.mode == "with_so":
            script = resources.files("bevlang").joinpath("scripts/with_so_script.json")
            answerer = OrchestratorSpatialAnswerer(
                ScriptedLlm.from_file(str(script)), name="with-spatial-operators"
            )
        elif body.mode == "no_so":
            answerer = OrchestratorSpatialAnswerer(
                NumericGuessLlm(), name="no-spatial-operators"
            )
        elif body.mode == "random":
            answerer = RandomSpatialAnswerer(seed=body.seed)
        else:
            return error_json(400, "bad_request", f"unknown mode {body.mode!r}")
        suite = make_spatial_suite(
            n_scenes=body.n_scenes,
            n_objects=body.n_objects,
            seed_base=body.seed,
            queries_per_scene=body.queries_per_scene,
        )
        report = run_bench(suite, spatial_answerer=answerer)
        return {"mode": body.mode, "report": report.to_dict()}

    return app

"""HTTP generation service backing the studio frontend.

Loads every VAE checkpoint from a directory at startup (one model per
conditioning mode, lowest checkpoint name wins) and serves a small JSON
API. Models are immutable after load; requests without an explicit seed
draw from a lock-guarded counter so concurrent calls stay independent.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .checkpoint import load_vae_checkpoint
from .vae import VaeModel, generate

MAX_COUNT = 100
MAX_TEMPERATURE = 2.0


class GenerateRequest(BaseModel):
    artist_id: int
    mode: str
    count: int = Field(default=10, ge=1, le=MAX_COUNT)
    temperature: float = Field(default=1.0, ge=0.0, le=MAX_TEMPERATURE)
    seed: int | None = None


class _SeedSource:
    def __init__(self, start: int = 1):
        self._lock = threading.Lock()
        self._next = start

    def take(self) -> int:
        with self._lock:
            seed = self._next
            self._next += 1
            return seed


def load_models(checkpoint_dir: Path) -> dict[str, tuple[str, VaeModel]]:
    """mode -> (checkpoint_id, model); first checkpoint per mode in name order."""
    models: dict[str, tuple[str, VaeModel]] = {}
    for path in sorted(Path(checkpoint_dir).glob("*.ckpt")):
        try:
            model = load_vae_checkpoint(path)
        except ValueError:
            continue  # not a VAE checkpoint (cache, classifier, ...)
        models.setdefault(model.mode, (path.stem, model))
    if not models:
        raise FileNotFoundError(f"no VAE checkpoints under {checkpoint_dir}")
    return models


def create_app(checkpoint_dir, ui_dir=None) -> FastAPI:
    models = load_models(Path(checkpoint_dir))
    reference = next(iter(models.values()))[1]
    for _, model in models.values():
        if [a.name for a in model.artists] != [a.name for a in reference.artists]:
            raise ValueError("checkpoints disagree on the artist manifest")
    seeds = _SeedSource()
    app = FastAPI(title="lyra generation service")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        detail = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"),
             "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/artists")
    def artists():
        return [
            {"id": a.index, "name": a.name, "genre": a.genre}
            for a in reference.artists
        ]

    @app.get("/api/models")
    def list_models():
        return [
            {"mode": mode, "checkpoint_id": ckpt_id}
            for mode, (ckpt_id, _) in sorted(models.items())
        ]

    @app.post("/api/generate")
    def generate_lines(req: GenerateRequest):
        entry = models.get(req.mode)
        if entry is None:
            return JSONResponse(
                status_code=404, content={"detail": f"unknown mode {req.mode!r}"}
            )
        _, model = entry
        if not 0 <= req.artist_id < model.n_artists:
            return JSONResponse(
                status_code=404, content={"detail": f"unknown artist {req.artist_id}"}
            )
        seed = req.seed if req.seed is not None else seeds.take()
        lines = generate(
            model,
            req.artist_id,
            n=req.count,
            temperature=req.temperature,
            seed=seed,
        )
        return {"lines": lines, "seed_used": seed}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

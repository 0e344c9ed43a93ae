"""Chat-completions client with bounded concurrency and retries, plus a
deterministic in-process mock backend for offline end-to-end runs.

Wire format: POST {base_url}/chat/completions with bearer auth; images are
embedded as base64 PNG data URIs. Batch output is JSON lines, one record per
frame, sorted by frame index.
"""
from __future__ import annotations

import base64
import io
import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from .prompts import ConversationBundle, ImagePart, ShotFormat, TextPart
from .render import Palette, palette_table

DEFAULT_API_KEY_ENV = "THZ_VLM_API_KEY"


class ClientError(Exception):
    pass


class AuthMissing(ClientError):
    pass


class TimeoutExceeded(ClientError):
    pass


class RetriesExhausted(ClientError):
    def __init__(self, status: int, attempts: int):
        super().__init__(f"giving up after {attempts} attempts, last status {status}")
        self.status = status
        self.attempts = attempts


class MalformedResponse(ClientError):
    pass


class UndecodableImage(ClientError):
    pass


class IoFailure(ClientError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "mock"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 120.0
    max_retries: int = 3
    max_in_flight: int = 4
    temperature: float = 0.0
    backoff_base_s: float = 1.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class MockPolicy:
    intensity_threshold: float = 0.8
    area_fraction: float = 0.01
    demo_bias: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.intensity_threshold <= 1.0:
            raise ValueError("intensity_threshold must be in [0, 1]")
        if not 0.0 < self.area_fraction < 1.0:
            raise ValueError("area_fraction must be in (0, 1)")


@dataclass(frozen=True)
class RawResponse:
    frame_index: int
    text: str
    latency_ms: float
    attempt_count: int
    backend: str  # "REMOTE" or "MOCK"


def _part_to_json(part) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    if isinstance(part, ImagePart):
        uri = "data:image/png;base64," + base64.b64encode(part.png).decode("ascii")
        return {"type": "image_url", "image_url": {"url": uri}}
    raise TypeError(f"unknown part type {type(part)!r}")


def encode_request(bundle: ConversationBundle, cfg: EndpointConfig) -> bytes:
    body = {
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "messages": [
            {"role": msg.role.value, "content": [_part_to_json(p) for p in msg.parts]}
            for msg in bundle.messages
        ],
    }
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _resolve_api_key(cfg: EndpointConfig) -> str | None:
    if not cfg.api_key_env:
        return None
    key = os.environ.get(cfg.api_key_env)
    if key is None:
        raise AuthMissing(f"environment variable {cfg.api_key_env} is not set")
    return key


def classify_remote(
    bundle: ConversationBundle, cfg: EndpointConfig, rng: random.Random | None = None
) -> RawResponse:
    """POST the bundle; retry 429/5xx with exponential backoff and jitter."""
    key = _resolve_api_key(cfg)
    headers = {"Content-Type": "application/json"}
    if key is not None:
        headers["Authorization"] = f"Bearer {key}"
    body = encode_request(bundle, cfg)
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    rng = rng or random.Random()
    start = time.monotonic()
    attempts = 0
    while True:
        attempts += 1
        try:
            resp = requests.post(url, data=body, headers=headers, timeout=cfg.timeout_s)
        except requests.Timeout as exc:
            raise TimeoutExceeded(f"no reply within {cfg.timeout_s}s") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            if attempts > cfg.max_retries:
                raise RetriesExhausted(resp.status_code, attempts)
            delay = cfg.backoff_base_s * (2 ** (attempts - 1)) * (1.0 + 0.1 * rng.random())
            time.sleep(delay)
            continue
        break
    try:
        payload = resp.json()
        text = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no assistant content in reply: {exc}") from exc
    if not isinstance(text, str):
        raise MalformedResponse("assistant content is not a string")
    return RawResponse(
        frame_index=bundle.frame_index,
        text=text,
        latency_ms=(time.monotonic() - start) * 1000.0,
        attempt_count=attempts,
        backend="REMOTE",
    )


def _query_png(bundle: ConversationBundle) -> bytes:
    images = [p.png for msg in bundle.messages for p in msg.parts if isinstance(p, ImagePart)]
    return images[-1]


def _decode_intensity_panel(png: bytes) -> np.ndarray:
    """Recover [0,1] intensity values from the left (viridis) panel by
    nearest-neighbor inverse lookup against the embedded palette table."""
    try:
        img = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"), dtype=np.float64)
    except Exception as exc:
        raise UndecodableImage(str(exc)) from exc
    left = img[:, : img.shape[1] // 2, :] / 255.0
    table = palette_table(Palette.VIRIDIS)
    # match unique colors only; rendered frames contain far fewer colors
    # than pixels
    flat = left.reshape(-1, 3)
    colors, inverse = np.unique(flat, axis=0, return_inverse=True)
    dists = ((colors[:, None, :] - table[None, :, :]) ** 2).sum(axis=-1)
    idx = dists.argmin(axis=-1)[inverse]
    return (idx / (len(table) - 1)).reshape(left.shape[:2])


def _largest_bright_rectangle(mask: np.ndarray) -> int:
    """Area of the largest axis-aligned all-bright rectangle (histogram DP)."""
    best = 0
    heights = np.zeros(mask.shape[1], dtype=int)
    for row in mask:
        heights = np.where(row, heights + 1, 0)
        stack: list[tuple[int, int]] = []
        for i, h in enumerate(list(heights) + [0]):
            start = i
            while stack and stack[-1][1] >= h:
                start, sh = stack.pop()
                best = max(best, sh * (i - start))
            stack.append((start, h))
    return best


def classify_mock(bundle: ConversationBundle, policy: MockPolicy = MockPolicy()) -> RawResponse:
    """Threshold the decoded intensity panel; ignore the plate (the largest
    bright rectangle) and answer YES when enough bright area remains."""
    start = time.monotonic()
    values = _decode_intensity_panel(_query_png(bundle))
    bright = values >= policy.intensity_threshold
    residual = int(bright.sum()) - _largest_bright_rectangle(bright)
    fraction = residual / bright.size
    cutoff = policy.area_fraction
    if bundle.shot_format is ShotFormat.ONE_SHOT:
        cutoff = max(0.0, cutoff - policy.demo_bias)
    verdict = "Yes C4" if fraction >= cutoff else "No C4"
    region = "the lower-right quadrant" if verdict == "Yes C4" else "no region"
    text = (
        f"### Frame Number: {bundle.frame_index:04d}\n"
        f"### Description: Bright non-rectangular area fraction {fraction:.4f} in {region}.\n"
        f"### Classification: {verdict}\n"
    )
    return RawResponse(
        frame_index=bundle.frame_index,
        text=text,
        latency_ms=(time.monotonic() - start) * 1000.0,
        attempt_count=1,
        backend="MOCK",
    )


@dataclass(frozen=True)
class PredictionRecord:
    frame: int
    shot: str
    label: str | None
    status: str
    raw: str
    latency_ms: float
    backend: str
    model: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "frame": self.frame,
                "shot": self.shot,
                "label": self.label,
                "status": self.status,
                "raw": self.raw,
                "latency_ms": self.latency_ms,
                "backend": self.backend,
                "model": self.model,
            },
            ensure_ascii=False,
        )


def run_batch(
    bundles: list[ConversationBundle],
    backend: str,
    cfg: EndpointConfig,
    out_path,
    policy: MockPolicy = MockPolicy(),
    deterministic_latency: bool = True,
) -> list[PredictionRecord]:
    """Classify every bundle with at most cfg.max_in_flight outstanding
    requests; per-frame failures become ERROR records instead of aborting."""
    from .prompts import parse_classification

    def one(bundle: ConversationBundle) -> PredictionRecord:
        try:
            if backend == "mock":
                resp = classify_mock(bundle, policy)
            else:
                resp = classify_remote(bundle, cfg)
            parsed = parse_classification(resp.text)
            return PredictionRecord(
                frame=bundle.frame_index,
                shot=bundle.shot_format.value,
                label=parsed.label.value,
                status="OK",
                raw=resp.text,
                latency_ms=0.0 if deterministic_latency else resp.latency_ms,
                backend=resp.backend,
                model=cfg.model_name,
            )
        except ClientError as exc:
            return PredictionRecord(
                frame=bundle.frame_index,
                shot=bundle.shot_format.value,
                label=None,
                status="ERROR",
                raw=f"{type(exc).__name__}: {exc}",
                latency_ms=0.0,
                backend=backend.upper(),
                model=cfg.model_name,
            )

    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        records = list(pool.map(one, bundles))
    records.sort(key=lambda r: r.frame)
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return records


def load_predictions(path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(PredictionRecord(**d))
    return records

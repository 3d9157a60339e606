"""Clients for the four external model services, plus deterministic mocks.

Services: vision chat (OpenAI-compatible chat completions with base64
image parts), text-to-image generation, inpainting, and prompt-based
segmentation.  Every backend is selectable by config; endpoint "mock:"
yields an offline deterministic implementation, so the whole pipeline can
run with no network.  All live traffic is appended to a JSONL transcript
with auth redacted.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import images
from .errors import (AuthFailure, BackendError, BackendTimeout, EmptyPrompt,
                     MalformedResponse)

ENV_PREFIX = "SCRIBBLESENSE"
DEFAULT_GUIDANCE_SCALE = 7.5
DEFAULT_GEN_SIZE = 1024


# --- request types -------------------------------------------------------

@dataclass
class ChatRequest:
    system_text: str
    user_text: str
    images: list = field(default_factory=list)   # list of RGB uint8 arrays
    max_candidates: int = 1

    def __post_init__(self):
        if len(self.images) > 8:
            raise ValueError("at most 8 images per chat request")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")


@dataclass
class GenImageRequest:
    prompt: str
    negative_prompt: str = ""
    guidance_scale: float = DEFAULT_GUIDANCE_SCALE
    seed: int = 0
    count: int = 1
    size: int = DEFAULT_GEN_SIZE

    def __post_init__(self):
        if self.guidance_scale <= 0:
            raise ValueError("guidance_scale must be positive")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass
class InpaintRequest:
    image: np.ndarray         # (H, W, 3) uint8
    mask: np.ndarray          # bool (H, W); True = fill
    prompt: str
    seed: int = 0

    def __post_init__(self):
        if self.image.shape[:2] != self.mask.shape:
            raise ValueError("image and mask dimensions differ")


@dataclass
class SegmentRequest:
    image: np.ndarray         # (H, W, 3) uint8
    prompt_mask: np.ndarray   # bool (H, W)
    prompt_box: tuple         # (x, y, w, h)

    def __post_init__(self):
        if self.image.shape[:2] != self.prompt_mask.shape:
            raise ValueError("image and prompt mask dimensions differ")


@dataclass
class SegmentCandidate:
    mask: np.ndarray
    area: int


@dataclass
class BackendConfig:
    endpoint: str = "mock:"
    auth_env: str = ""             # name of env var holding the token
    timeout: float = 60.0
    retries: int = 2
    model: str = ""
    extra: dict = field(default_factory=dict)   # forwarded opaquely

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @property
    def is_mock(self) -> bool:
        return self.endpoint.startswith("mock")

    def token(self) -> str:
        return os.environ.get(self.auth_env, "") if self.auth_env else ""

    @classmethod
    def from_env(cls, kind: str, **kw) -> "BackendConfig":
        """kind in {CHAT, GEN, INPAINT, SEG}; reads SCRIBBLESENSE_<kind>_URL/_KEY."""
        url = os.environ.get(f"{ENV_PREFIX}_{kind}_URL", "mock:")
        return cls(endpoint=url, auth_env=f"{ENV_PREFIX}_{kind}_KEY", **kw)


class Transcript:
    """Append-only JSONL log of backend calls; auth never recorded."""

    def __init__(self, path=None):
        self.path = path
        self.entries = []
        if path and os.path.exists(path):     # resume an interrupted run
            with open(path) as fh:
                self.entries = [json.loads(line) for line in fh
                                if line.strip()]

    def log(self, backend: str, request: dict, response: dict) -> None:
        entry = {"ts": time.time(), "backend": backend,
                 "request": request, "response": response, "auth": "<redacted>"}
        self.entries.append(entry)
        if self.path:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(entry) + "\n")

    def call_count(self, backend: Optional[str] = None) -> int:
        if backend is None:
            return len(self.entries)
        return sum(1 for e in self.entries if e["backend"] == backend)


# --- HTTP plumbing -------------------------------------------------------

def _default_transport(url, payload, headers, timeout):
    import requests
    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise BackendTimeout(f"timeout calling {url}") from exc
    except requests.RequestException as exc:
        raise BackendError(f"transport failure calling {url}: {exc}") from exc
    return resp.status_code, resp.text


def _post_with_retries(cfg: BackendConfig, payload: dict,
                       transport: Optional[Callable] = None) -> dict:
    transport = transport or _default_transport
    headers = {"Content-Type": "application/json"}
    tok = cfg.token()
    if tok:
        headers["Authorization"] = f"Bearer {tok}"
    last_exc = None
    for attempt in range(cfg.retries + 1):
        try:
            status, body = transport(cfg.endpoint, payload, headers, cfg.timeout)
        except BackendTimeout as exc:
            last_exc = exc
            if attempt < cfg.retries:
                time.sleep(min(0.5 * 2 ** attempt, 8.0))
            continue
        if status in (401, 403):
            raise AuthFailure(f"auth failure ({status}) from {cfg.endpoint}",
                              payload=body)
        if status == 429 or status >= 500:
            last_exc = BackendError(f"transient HTTP {status}", payload=body)
            if attempt < cfg.retries:
                time.sleep(min(0.5 * 2 ** attempt, 8.0))
            continue
        if status != 200:
            raise BackendError(f"HTTP {status} from {cfg.endpoint}", payload=body)
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"non-JSON body from {cfg.endpoint}",
                                    payload=body) from exc
    raise last_exc


# --- mock implementations ------------------------------------------------

COLOR_NAMES = {
    "red": (220, 40, 40), "green": (40, 180, 60), "blue": (50, 80, 220),
    "yellow": (240, 220, 50), "orange": (245, 140, 30), "purple": (140, 60, 200),
    "pink": (245, 150, 200), "brown": (140, 90, 50), "black": (20, 20, 20),
    "white": (240, 240, 240), "gray": (128, 128, 128), "cyan": (60, 210, 220),
    "magenta": (220, 60, 200), "gold": (212, 175, 55), "beige": (225, 210, 180),
}


def nearest_color_name(rgb) -> str:
    arr = np.asarray(rgb, dtype=np.float64)
    return min(COLOR_NAMES, key=lambda n: float(
        np.sum((arr - np.asarray(COLOR_NAMES[n], dtype=np.float64)) ** 2)))


def request_hash(req: ChatRequest) -> str:
    h = hashlib.sha256()
    h.update(req.system_text.encode())
    h.update(req.user_text.encode())
    for img in req.images:
        h.update(np.ascontiguousarray(img).tobytes())
    h.update(str(req.max_candidates).encode())
    return h.hexdigest()[:16]


class MockChatBackend:
    """Offline chat: canned completions by request hash, else rule-generated
    JSON answers matched to the schema the prompt asks for."""

    def __init__(self, script: Optional[dict] = None):
        self.script = dict(script or {})

    def chat(self, req: ChatRequest) -> list:
        key = request_hash(req)
        if key in self.script:
            canned = self.script[key]
            canned = canned if isinstance(canned, list) else [canned]
            return (canned * req.max_candidates)[: req.max_candidates]
        return [self._synthesize(req, i) for i in range(req.max_candidates)]

    def _synthesize(self, req: ChatRequest, index: int) -> str:
        text = req.system_text + "\n" + req.user_text
        m = re.search(r"approximately\s+([a-z]+)", text)
        color = m.group(1) if m else "gray"
        if '"semantic"' in text:
            n_m = re.search(r"exactly\s+(\d+)\s+ranked", text)
            n = int(n_m.group(1)) if n_m else 1
            nouns = ["flowers", "fabric", "moss", "crystals", "tiles",
                     "feathers", "scales", "pebbles"]
            items = [{"rank": k + 1,
                      "semantic": f"{color} {nouns[k % len(nouns)]}",
                      "rationale": f"the {color} strokes suggest {nouns[k % len(nouns)]}"}
                     for k in range(n)]
            return json.dumps(items)
        if '"prompt"' in text:
            sm = re.search(r'local texture: "([^"]+)"', text)
            semantic = sm.group(1) if sm else f"{color} texture"
            scenes = ["a sunlit meadow", "a rocky hillside", "a quiet forest",
                      "a coastal cliff", "an old courtyard", "a desert canyon"]
            scene = scenes[index % len(scenes)]
            return json.dumps({"prompt": f"A wide photograph of {scene} "
                                         f"covered in {semantic}, natural light"})
        if '"box"' in text:
            dm = re.search(r"image is (\d+)x(\d+)", text)
            w, h = (int(dm.group(1)), int(dm.group(2))) if dm else (512, 512)
            return json.dumps({"box": [w // 4, h // 4, w // 2, h // 2],
                               "reason": "central patch with the densest texture"})
        return json.dumps({"text": "ok"})


class MockImageBackend:
    """Seeded procedural images: noise tinted toward a color named in the prompt."""

    def generate_images(self, req: GenImageRequest) -> list:
        prompt_l = req.prompt.lower()
        tint = np.array([128, 128, 128], dtype=np.float64)
        for name, rgb in COLOR_NAMES.items():
            if re.search(rf"\b{name}\b", prompt_l):
                tint = np.asarray(rgb, dtype=np.float64)
                break
        out = []
        for i in range(req.count):
            rng = np.random.default_rng([req.seed, i, len(req.prompt)])
            noise = rng.normal(0.0, 30.0, size=(req.size, req.size, 3))
            img = np.clip(tint[None, None, :] + noise, 0, 255).astype(np.uint8)
            out.append(img)
        return out


class MockInpaintBackend:
    """Diffusion fill: masked pixels relax to the average of their neighbors."""

    N_ITERS = 64

    def inpaint(self, req: InpaintRequest) -> np.ndarray:
        from scipy import ndimage
        mask = req.mask.astype(bool)
        img = req.image.astype(np.float64).copy()
        known = ~mask
        if not known.any():
            img[:] = req.image.mean()
        else:
            # seed masked area with the mean of known pixels, then relax
            img[mask] = req.image[known].mean(axis=0)
            kernel = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.float64)
            for _ in range(self.N_ITERS):
                for c in range(img.shape[2]):
                    avg = ndimage.convolve(img[..., c], kernel, mode="nearest") / 4.0
                    img[..., c][mask] = avg[mask]
        return np.clip(np.round(img), 0, 255).astype(np.uint8)


class MockSegmentBackend:
    """Returns the prompt mask itself plus its bounding-box fill."""

    def segment(self, req: SegmentRequest) -> list:
        mask = req.prompt_mask.astype(bool)
        if not mask.any():
            raise EmptyPrompt("empty prompt mask")
        ys, xs = np.nonzero(mask)
        box_fill = np.zeros_like(mask)
        box_fill[ys.min():ys.max() + 1, xs.min():xs.max() + 1] = True
        cands = [SegmentCandidate(mask.copy(), int(mask.sum())),
                 SegmentCandidate(box_fill, int(box_fill.sum()))]
        cands.sort(key=lambda c: c.area)
        return cands


class IdentitySegmentBackend:
    """Returns exactly the prompt mask (useful for refinement equivalence tests)."""

    def segment(self, req: SegmentRequest) -> list:
        mask = req.prompt_mask.astype(bool)
        if not mask.any():
            raise EmptyPrompt("empty prompt mask")
        return [SegmentCandidate(mask.copy(), int(mask.sum()))]


# --- public operations ---------------------------------------------------

def chat(req: ChatRequest, cfg: BackendConfig,
         transcript: Optional[Transcript] = None,
         transport: Optional[Callable] = None,
         mock: Optional[MockChatBackend] = None) -> list:
    """Returns exactly req.max_candidates text completions."""
    if cfg.is_mock:
        out = (mock or MockChatBackend()).chat(req)
        if transcript:
            transcript.log("chat", {"hash": request_hash(req), "mock": True},
                           {"n": len(out)})
        return out
    payload = {
        "model": cfg.model,
        "n": req.max_candidates,
        "messages": [
            {"role": "system", "content": [{"type": "text", "text": req.system_text}]},
            {"role": "user", "content":
                [{"type": "text", "text": req.user_text}] +
                [{"type": "image", "image": images.encode_png_base64(img)}
                 for img in req.images]},
        ],
    }
    payload.update(cfg.extra)
    data = _post_with_retries(cfg, payload, transport)
    try:
        out = [c["message"]["content"] for c in data["choices"]]
    except (KeyError, TypeError) as exc:
        raise MalformedResponse("chat response missing choices",
                                payload=json.dumps(data)) from exc
    if len(out) < req.max_candidates:
        raise MalformedResponse(
            f"asked for {req.max_candidates} completions, got {len(out)}",
            payload=json.dumps(data))
    if transcript:
        transcript.log("chat", {"hash": request_hash(req)}, {"n": len(out)})
    return out[: req.max_candidates]


def generate_images(req: GenImageRequest, cfg: BackendConfig,
                    transcript: Optional[Transcript] = None,
                    transport: Optional[Callable] = None) -> list:
    if cfg.is_mock:
        out = MockImageBackend().generate_images(req)
        if transcript:
            transcript.log("gen", {"prompt": req.prompt, "seed": req.seed,
                                   "guidance_scale": req.guidance_scale,
                                   "count": req.count, "mock": True},
                           {"n": len(out)})
        return out
    payload = {"prompt": req.prompt, "negative_prompt": req.negative_prompt,
               "guidance_scale": req.guidance_scale, "seed": req.seed,
               "count": req.count, "width": req.size, "height": req.size}
    payload.update(cfg.extra)
    data = _post_with_retries(cfg, payload, transport)
    try:
        out = [images.decode_png_base64(b, "RGB") for b in data["images"]]
    except (KeyError, TypeError) as exc:
        raise MalformedResponse("image response missing images",
                                payload=json.dumps(data)[:2000]) from exc
    if transcript:
        transcript.log("gen", {"prompt": req.prompt, "seed": req.seed,
                               "guidance_scale": req.guidance_scale},
                       {"n": len(out)})
    return out


def inpaint(req: InpaintRequest, cfg: BackendConfig,
            transcript: Optional[Transcript] = None,
            transport: Optional[Callable] = None,
            mock: Optional[MockInpaintBackend] = None) -> np.ndarray:
    """Fill masked pixels.  Outside-mask pixels are copied back from the
    input regardless of what the backend returns."""
    if not req.mask.any():
        raise EmptyPrompt("inpaint mask is empty")
    if cfg.is_mock:
        out = (mock or MockInpaintBackend()).inpaint(req)
        if transcript:
            transcript.log("inpaint", {"prompt": req.prompt, "seed": req.seed,
                                       "mock": True}, {})
    else:
        payload = {"image": images.encode_png_base64(req.image),
                   "mask": images.encode_png_base64(images.mask_to_u8(req.mask)),
                   "prompt": req.prompt, "seed": req.seed}
        payload.update(cfg.extra)
        data = _post_with_retries(cfg, payload, transport)
        try:
            out = images.decode_png_base64(data["image"], "RGB")
        except (KeyError, TypeError) as exc:
            raise MalformedResponse("inpaint response missing image",
                                    payload=json.dumps(data)[:2000]) from exc
        if transcript:
            transcript.log("inpaint", {"prompt": req.prompt, "seed": req.seed}, {})
    result = req.image.copy()
    result[req.mask.astype(bool)] = out[req.mask.astype(bool)]
    return result


def segment(req: SegmentRequest, cfg: BackendConfig,
            transcript: Optional[Transcript] = None,
            transport: Optional[Callable] = None,
            mock=None) -> list:
    """Returns >= 1 candidate masks sorted by area ascending."""
    if cfg.is_mock:
        out = (mock or MockSegmentBackend()).segment(req)
        if transcript:
            transcript.log("segment", {"mock": True}, {"n": len(out)})
        return out
    if not req.prompt_mask.any():
        raise EmptyPrompt("empty prompt mask")
    payload = {"image": images.encode_png_base64(req.image),
               "prompt_mask": images.encode_png_base64(
                   images.mask_to_u8(req.prompt_mask)),
               "prompt_box": list(req.prompt_box)}
    payload.update(cfg.extra)
    data = _post_with_retries(cfg, payload, transport)
    try:
        cands = [SegmentCandidate(
            images.u8_to_mask(images.decode_png_base64(m["mask"], "L")),
            int(m["area"])) for m in data["masks"]]
    except (KeyError, TypeError) as exc:
        raise MalformedResponse("segment response missing masks",
                                payload=json.dumps(data)[:2000]) from exc
    cands.sort(key=lambda c: c.area)
    if transcript:
        transcript.log("segment", {}, {"n": len(cands)})
    return cands

"""The three chat-backend dialogues driving an edit, plus the evaluation harness.

Stage 1 predicts the semantic meaning of a scribble from multi-view
renders; stage 2 expands a prediction into full-scene image prompts;
stage 3 picks the texture crop out of the generated images.  Responses
are requested as JSON and parsed leniently (code fences, preambles and
trailing prose are tolerated); a single stricter reprompt is issued
before giving up.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .backends import ChatRequest, nearest_color_name
from .errors import MalformedResponse, NoCandidate

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), "templates")
SYNONYM_FILE = os.path.join(os.path.dirname(__file__), "data", "synonyms.json")

ATLAS_MATCH_THRESHOLD = 20.0    # mean-RGB distance under which the original
                                # atlas supplies the patch, skipping generation

ChatFn = Callable[[ChatRequest], list]


def load_template(name: str) -> str:
    with open(os.path.join(TEMPLATE_DIR, name + ".txt")) as fh:
        return fh.read()


@dataclass(frozen=True)
class IntentPrediction:
    semantic: str
    rationale: str
    rank: int


@dataclass(frozen=True)
class GlobalPrompt:
    text: str
    intent_rank: int


@dataclass(frozen=True)
class PatchChoice:
    image_index: int
    box: tuple               # (x, y, w, h) pixels
    reason: str


# --- lenient JSON extraction --------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(text: str):
    """Pull the first valid JSON value out of a completion, tolerating code
    fences and surrounding prose.  Raises MalformedResponse when none parses."""
    candidates = [text.strip()]
    candidates += [m.strip() for m in _FENCE_RE.findall(text)]
    spans = []
    for start_ch, end_ch in (("{", "}"), ("[", "]")):
        i = text.find(start_ch)
        while i != -1:
            depth, in_str, esc = 0, False, False
            for j in range(i, len(text)):
                ch = text[j]
                if in_str:
                    if esc:
                        esc = False
                    elif ch == "\\":
                        esc = True
                    elif ch == '"':
                        in_str = False
                elif ch == '"':
                    in_str = True
                elif ch == start_ch:
                    depth += 1
                elif ch == end_ch:
                    depth -= 1
                    if depth == 0:
                        spans.append((i, text[i:j + 1]))
                        break
            i = text.find(start_ch, i + 1)
    # earliest value in the text wins, so a list is preferred over the
    # first object nested inside it
    candidates += [s for _, s in sorted(spans, key=lambda p: (p[0], -len(p[1])))]
    for cand in candidates:
        try:
            return json.loads(cand)
        except json.JSONDecodeError:
            continue
    raise MalformedResponse("no parseable JSON in completion", payload=text)


def _chat_with_reprompt(chat_fn: ChatFn, req: ChatRequest, parse: Callable):
    """Parse all completions; on failure, retry once with a format reminder."""
    try:
        return parse(chat_fn(req))
    except MalformedResponse:
        reminder = load_template("format_reminder")
        retry = ChatRequest(system_text=req.system_text,
                            user_text=req.user_text + "\n\n" + reminder,
                            images=req.images,
                            max_candidates=req.max_candidates)
        return parse(chat_fn(retry))


def _rgb_str(color) -> str:
    return f"({int(color[0])}, {int(color[1])}, {int(color[2])})"


# --- stage 1: intent prediction -----------------------------------------

def predict_intent(view_images: list, scribble_image: np.ndarray, color,
                   n: int, chat_fn: ChatFn,
                   hint: Optional[str] = None) -> list:
    """Ask the vision backend for n ranked guesses at the scribble's meaning.

    ``view_images`` are the textured renders (normally the 4 equatorial
    presets); ``scribble_image`` is the scribbled view with the strokes
    drawn on top.  An optional free-text hint is forwarded as a user
    constraint.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    hint_clause = f"User instruction to take into account: {hint}" if hint else ""
    user = load_template("intent_user").format(
        n_views=len(view_images), rgb=_rgb_str(color),
        color_name=nearest_color_name(color), n=n, hint_clause=hint_clause)
    req = ChatRequest(system_text=load_template("intent_system"),
                      user_text=user,
                      images=list(view_images) + [scribble_image],
                      max_candidates=1)

    def parse(completions):
        data = extract_json(completions[0])
        if isinstance(data, dict):
            data = data.get("predictions", [data])
        if not isinstance(data, list) or not data:
            raise MalformedResponse("expected a JSON list of predictions",
                                    payload=completions[0])
        preds = []
        for pos, item in enumerate(data[:n]):
            semantic = str(item.get("semantic", "")).strip()
            if not semantic:
                raise MalformedResponse("prediction with empty semantic",
                                        payload=completions[0])
            preds.append(IntentPrediction(
                semantic=semantic,
                rationale=str(item.get("rationale", "")),
                rank=pos + 1))
        if len(preds) < n:
            raise MalformedResponse(
                f"asked for {n} predictions, got {len(preds)}",
                payload=completions[0])
        return preds

    return _chat_with_reprompt(chat_fn, req, parse)


# --- stage 2: global prompt generation ----------------------------------

def make_global_prompts(pred: IntentPrediction, color, style_context: str,
                        n: int, chat_fn: ChatFn) -> list:
    """Expand a predicted semantic into n full-scene image prompts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    user = load_template("global_prompt_user").format(
        semantic=pred.semantic, rgb=_rgb_str(color),
        color_name=nearest_color_name(color), style_context=style_context)
    req = ChatRequest(system_text=load_template("global_prompt_system"),
                      user_text=user, max_candidates=n)

    def parse(completions):
        prompts = []
        for text in completions[:n]:
            data = extract_json(text)
            prompt = str(data.get("prompt", "")).strip() \
                if isinstance(data, dict) else str(data).strip()
            if not prompt:
                raise MalformedResponse("empty scene prompt", payload=text)
            if not _mentions(prompt, pred.semantic):
                prompt += f", featuring {pred.semantic}"
            prompts.append(GlobalPrompt(text=prompt, intent_rank=pred.rank))
        if len(prompts) < n:
            raise MalformedResponse(f"asked for {n} prompts, got {len(prompts)}")
        return prompts

    return _chat_with_reprompt(chat_fn, req, parse)


def _mentions(text: str, semantic: str) -> bool:
    words = set(normalize_words(text))
    return all(w in words for w in normalize_words(semantic))


# --- stage 3: patch selection -------------------------------------------

def mean_rgb(image: np.ndarray, box: tuple) -> np.ndarray:
    x, y, w, h = box
    return image[y:y + h, x:x + w, :3].reshape(-1, 3).mean(axis=0)


def color_distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) -
                                np.asarray(b, dtype=np.float64)))


def _clamp_box(box, width, height):
    x, y, w, h = (int(round(v)) for v in box)
    x = max(0, min(x, width - 1))
    y = max(0, min(y, height - 1))
    w = max(1, min(w, width - x))
    h = max(1, min(h, height - y))
    return (x, y, w, h)


def choose_patch(global_images: list, semantic: str, color,
                 chat_fn: ChatFn) -> PatchChoice:
    """One candidate box per image from the vision backend; the winner is the
    box whose cropped mean RGB is closest to the scribble color."""
    if not global_images:
        raise ValueError("need at least one image")
    candidates = []
    for idx, image in enumerate(global_images):
        h, w = image.shape[:2]
        user = load_template("patch_select_user").format(
            width=w, height=h, semantic=semantic,
            color_name=nearest_color_name(color))
        req = ChatRequest(system_text=load_template("patch_select_system"),
                          user_text=user, images=[image], max_candidates=1)

        def parse(completions):
            data = extract_json(completions[0])
            if not isinstance(data, dict) or "box" not in data:
                raise MalformedResponse("no box in completion",
                                        payload=completions[0])
            box = data["box"]
            if not (isinstance(box, (list, tuple)) and len(box) == 4):
                raise MalformedResponse("box is not [x, y, w, h]",
                                        payload=completions[0])
            return _clamp_box(box, w, h), str(data.get("reason", ""))

        try:
            box, reason = _chat_with_reprompt(chat_fn, req, parse)
        except MalformedResponse:
            continue
        candidates.append((idx, box, reason))
    if not candidates:
        raise NoCandidate("no usable box from any image")
    best = min(candidates,
               key=lambda c: (color_distance(mean_rgb(global_images[c[0]], c[1]),
                                             color), c[0]))
    return PatchChoice(image_index=best[0], box=best[1], reason=best[2])


def exhaustive_patch_search(images: list, color, patch_size: int) -> PatchChoice:
    """Deterministic fallback: slide a patch_size window (stride patch_size/2)
    over every image; minimal mean-RGB distance wins, ties broken by
    (image_index, y, x)."""
    target = np.asarray(color, dtype=np.float64)
    best = None      # (distance, image_index, y, x)
    for idx, image in enumerate(images):
        h, w = image.shape[:2]
        ps = min(patch_size, h, w)
        stride = max(ps // 2, 1)
        # integral image gives every window mean in O(1)
        integ = np.zeros((h + 1, w + 1, 3), dtype=np.float64)
        integ[1:, 1:] = image[..., :3].astype(np.float64).cumsum(0).cumsum(1)
        for y in range(0, h - ps + 1, stride):
            for x in range(0, w - ps + 1, stride):
                s = (integ[y + ps, x + ps] - integ[y, x + ps]
                     - integ[y + ps, x] + integ[y, x]) / (ps * ps)
                d = float(np.linalg.norm(s - target))
                key = (d, idx, y, x)
                if best is None or key < best:
                    best = key
    d, idx, y, x = best
    ps = min(patch_size, images[idx].shape[0], images[idx].shape[1])
    return PatchChoice(image_index=idx, box=(x, y, ps, ps),
                       reason=f"window mean within {d:.1f} of target color")


# --- evaluation harness --------------------------------------------------

_SUFFIXES = ("ing", "edly", "ed", "ies", "es", "s")


def lemma(word: str) -> str:
    """Cheap suffix-stripping normalization for keyword matching."""
    w = word.lower()
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    for suf in _SUFFIXES:
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            return w[: len(w) - len(suf)]
    return w


def normalize_words(text: str) -> list:
    return [lemma(w) for w in re.findall(r"[a-zA-Z]+", text)]


def load_synonyms(path: Optional[str] = None) -> dict:
    """word -> canonical representative, from the bundled editable groups file."""
    with open(path or SYNONYM_FILE) as fh:
        groups = json.load(fh)["groups"]
    table = {}
    for group in groups:
        canon = lemma(group[0])
        for word in group:
            table[lemma(word)] = canon
    return table


def _canon_words(text: str, synonyms: dict) -> set:
    return {synonyms.get(w, w) for w in normalize_words(text)}


def keyword_match(prediction: str, keyword: str, synonyms: dict) -> bool:
    pred_words = _canon_words(prediction, synonyms)
    kw_words = _canon_words(keyword, synonyms)
    return bool(kw_words) and kw_words <= pred_words


def evaluate_intent_accuracy(cases: list, n_predictions: int, chat_fn: ChatFn,
                             synonyms: Optional[dict] = None) -> float:
    """Fraction of cases where any of the n predicted semantics contains a
    truth keyword (or a synonym of its words).

    Each case: {"view_images", "scribble_image", "color", "truth_keywords",
    optional "hint", optional "synonyms" (extra groups)}.
    """
    if not cases:
        raise ValueError("cases must be non-empty")
    base = dict(synonyms) if synonyms is not None else load_synonyms()
    correct = 0
    for case in cases:
        table = dict(base)
        for group in case.get("synonyms", []):
            canon = lemma(group[0])
            for word in group:
                table[lemma(word)] = canon
        preds = predict_intent(case["view_images"], case["scribble_image"],
                               case["color"], n_predictions, chat_fn,
                               hint=case.get("hint"))
        if any(keyword_match(p.semantic, kw, table)
               for p in preds for kw in case["truth_keywords"]):
            correct += 1
    return correct / len(cases)

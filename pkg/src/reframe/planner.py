"""Blueprint planning: prompt construction, completion client, parsing.

Two paths produce a validated blueprint from (instruction, scene
descriptions, target aspect): a remote chat-completion model whose
output is parsed with a fixed line grammar, and a deterministic
heuristic that needs no network and scores objects by instruction
relevance plus area-weighted centrality.
"""

from __future__ import annotations

import base64
import hashlib
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

from .annotation_io import SceneDescription
from .model import (
    AspectRatio,
    Blueprint,
    EffectIn,
    EffectTrans,
    MAX_LAYOUT,
    ReframeError,
    Scene,
    SceneAnnotation,
    ScenePlan,
    ValidationError,
)

ENDPOINT_ENV = "RAVA_LLM_ENDPOINT"
API_KEY_ENV = "RAVA_LLM_API_KEY"

#: Substituted into the prompt when the user gave no instruction.
NO_PREFERENCE = "no specific user preference"

#: Relative score window within which the top two objects share the frame.
TIE_WINDOW = 0.15


class PlanningError(ReframeError):
    """Planning could not produce a blueprint."""


class PlanParseError(PlanningError):
    """Model output did not yield a plan line for every scene."""

    def __init__(self, message: str, diagnostics: Sequence[str] = ()):
        self.diagnostics = list(diagnostics)
        detail = "".join(f"\n  - {d}" for d in self.diagnostics)
        super().__init__(message + detail)


class TransportError(ReframeError):
    """The completion endpoint could not be reached or answered garbage."""


class FixtureError(ReframeError):
    """Replay mode found no recorded completion for a prompt."""


@dataclass(frozen=True)
class Instruction:
    """Free-form user request; empty means no preference."""

    text: str = ""

    def __post_init__(self) -> None:
        if len(self.text) > 4096:
            raise ValidationError("instruction longer than 4096 characters")


@dataclass(frozen=True)
class PlanText:
    """Raw, untrusted text emitted by the language model."""

    raw: str


@dataclass(frozen=True)
class PlannerConfig:
    """How to obtain a plan: remote model or local heuristic."""

    mode: str = "heuristic"
    endpoint: str = ""
    model_name: str = ""
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 3
    multimodal: bool = False
    replay_dir: Path | None = None
    backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in ("llm", "heuristic"):
            raise ValidationError(f"unknown planner mode {self.mode!r}")
        if self.temperature != 0.0:
            raise ValidationError("temperature is fixed at 0")
        if self.timeout <= 0 or self.max_retries < 1:
            raise ValidationError("timeout must be positive and max_retries >= 1")


# --- prompt construction ------------------------------------------------------

_GRAMMAR_LINE = (
    "Scene-<k>: layout=<n>; objects=[<id>,<id>,...]; "
    "effect_in=<token>; effect_trans=<token>; aspect=<W>:<H>"
)


def render_plan_line(plan: ScenePlan) -> str:
    """Format a plan in the exact line grammar the parser accepts."""
    ids = ",".join(str(i) for i in plan.object_ids)
    return (
        f"Scene-{plan.scene_index}: layout={plan.layout}; objects=[{ids}]; "
        f"effect_in={plan.effect_in.value}; effect_trans={plan.effect_trans.value}; "
        f"aspect={plan.aspect}"
    )


def build_prompt(
    instr: Instruction,
    descriptions: Sequence[SceneDescription],
    aspect: AspectRatio,
) -> str:
    """Assemble the deterministic planning prompt.

    Contains the role preamble, the verbatim instruction (or the
    no-preference sentinel), every scene description, the allowed
    effect vocabulary and the output line grammar.
    """
    if not descriptions:
        raise PlanningError("cannot build a prompt without scene descriptions")
    request = instr.text if instr.text else NO_PREFERENCE
    blocks = "\n\n".join(
        d.text if d.text else f"Scene-{d.scene_index}: (no objects detected)"
        for d in descriptions
    )
    return (
        "You plan how to reframe a video to a new aspect ratio. For every scene, "
        "pick the objects the viewer should see, how many stacked sub-windows to "
        "use, and which visual effects to apply.\n"
        f"\nTarget aspect ratio: {aspect}\n"
        f"User request: {request}\n"
        "\nScenes and detected objects:\n"
        f"{blocks}\n"
        "\nRules:\n"
        f"- layout is the number of stacked sub-windows, between 1 and {MAX_LAYOUT}, "
        "and must equal the number of object ids you select.\n"
        "- objects lists the selected object ids for that scene, most important first.\n"
        "- effect_in is one of: zoom_in, zoom_out, none.\n"
        "- effect_trans is one of: fade_in, fade_out, none.\n"
        f"- aspect must be {aspect} for every scene.\n"
        "\nAnswer with exactly one line per scene, nothing else, in this format:\n"
        f"{_GRAMMAR_LINE}\n"
    )


# --- plan text parsing --------------------------------------------------------

_LINE_RE = re.compile(
    r"scene[-_\s]*(?P<k>\d+)\s*:\s*layout\s*=\s*(?P<layout>\d+)\s*;\s*"
    r"objects\s*=\s*\[(?P<ids>[^\]]*)\]\s*;\s*"
    r"effect_in\s*=\s*(?P<ein>[^;]+?)\s*;\s*"
    r"effect_trans\s*=\s*(?P<etr>[^;]+?)\s*;\s*"
    r"aspect\s*=\s*(?P<aw>\d+)\s*:\s*(?P<ah>\d+)",
    re.IGNORECASE,
)

#: Looks like an attempted plan line even though the grammar did not match.
_NEAR_MISS_RE = re.compile(r"scene[-_\s]*(\d+)\s*:.*layout\s*=", re.IGNORECASE)


def _effect_token(raw: str, vocab: type) -> str:
    token = re.sub(r"[\s-]+", "_", raw.strip().lower())
    values = {e.value for e in vocab}
    if token not in values:
        raise ValueError(f"unknown {vocab.__name__} token {raw.strip()!r}")
    return token


def _plan_from_match(m: re.Match) -> ScenePlan:
    k = int(m.group("k"))
    layout = int(m.group("layout"))
    ids_text = m.group("ids").strip()
    try:
        ids = tuple(int(t.strip()) for t in ids_text.split(",") if t.strip()) \
            if ids_text else ()
    except ValueError:
        raise ValueError(f"bad object id list {ids_text!r}, scene {k}")
    if not (1 <= layout <= MAX_LAYOUT):
        raise ValueError(f"layout {layout} outside 1..{MAX_LAYOUT}, scene {k}")
    if layout != len(ids):
        raise ValueError(f"layout/object mismatch, scene {k}")
    effect_in = _effect_token(m.group("ein"), EffectIn)
    effect_trans = _effect_token(m.group("etr"), EffectTrans)
    return ScenePlan(
        scene_index=k,
        layout=layout,
        object_ids=ids,
        effect_in=EffectIn(effect_in),
        effect_trans=EffectTrans(effect_trans),
        aspect=AspectRatio(int(m.group("aw")), int(m.group("ah"))),
    )


def parse_plan_text(
    pt: PlanText, scenes: Sequence[Scene], video_id: str = ""
) -> Blueprint:
    """Extract one plan line per scene from model output.

    Surrounding prose is ignored; only lines matching the full grammar
    count.  The first valid line per scene wins.  Missing scenes,
    grammar near-misses without a valid fallback, and plans for unknown
    scenes all fail with per-line diagnostics.
    """
    wanted = {s.index for s in scenes}
    plans: dict[int, ScenePlan] = {}
    bad_lines: dict[int, list[str]] = {}
    unknown: list[str] = []

    for line in pt.raw.splitlines():
        m = _LINE_RE.search(line)
        if m:
            k = int(m.group("k"))
            if k not in wanted:
                unknown.append(f"plan line for unknown scene {k}: {line.strip()}")
                continue
            try:
                plan = _plan_from_match(m)
            except ValueError as exc:
                bad_lines.setdefault(k, []).append(str(exc))
                continue
            plans.setdefault(k, plan)
        else:
            nm = _NEAR_MISS_RE.search(line)
            if nm:
                k = int(nm.group(1))
                bad_lines.setdefault(k, []).append(
                    f"unparseable plan line for scene {k}: {line.strip()}"
                )

    diagnostics: list[str] = list(unknown)
    missing = sorted(wanted - plans.keys())
    for k in missing:
        diagnostics.extend(bad_lines.get(k, [f"no plan line found for scene {k}"]))
    if missing or unknown:
        raise PlanParseError(
            f"missing plan lines for scenes {missing}" if missing
            else "plan lines reference unknown scenes",
            diagnostics,
        )
    return Blueprint(video_id=video_id, plans=tuple(plans.values()))


# --- completion client --------------------------------------------------------

def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _message_content(cfg: PlannerConfig, prompt: str, images: Sequence[bytes]):
    if not (cfg.multimodal and images):
        return prompt
    parts: list[dict] = [{"type": "text", "text": prompt}]
    for png in images:
        b64 = base64.b64encode(png).decode("ascii")
        parts.append(
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}}
        )
    return parts


def complete(
    cfg: PlannerConfig, prompt: str, images: Sequence[bytes] = ()
) -> PlanText:
    """Obtain model text for a prompt, live or from replay fixtures.

    Replay fixtures are files named ``<sha256(prompt)>.txt`` inside
    cfg.replay_dir.  Live calls POST to ``<endpoint>/chat/completions``
    with bearer auth from the environment and retry with exponential
    backoff before giving up.
    """
    if cfg.mode != "llm":
        raise PlanningError("complete() requires llm mode")
    if cfg.replay_dir is not None:
        path = Path(cfg.replay_dir) / f"{prompt_digest(prompt)}.txt"
        if not path.is_file():
            raise FixtureError(
                f"no replay fixture {path.name} under {cfg.replay_dir}"
            )
        return PlanText(raw=path.read_text(encoding="utf-8"))

    endpoint = cfg.endpoint or os.environ.get(ENDPOINT_ENV, "")
    if not endpoint or not cfg.model_name:
        raise ValidationError(
            f"llm mode requires an endpoint (flag or {ENDPOINT_ENV}) and a model name"
        )
    url = endpoint.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": _message_content(cfg, prompt, images)}],
        "temperature": cfg.temperature,
    }

    last_error: Exception | None = None
    for attempt in range(cfg.max_retries):
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=cfg.timeout)
            resp.raise_for_status()
            data = resp.json()
            return PlanText(raw=data["choices"][0]["message"]["content"])
        except (requests.RequestException, KeyError, IndexError, TypeError, ValueError) as exc:
            last_error = exc
            if attempt + 1 < cfg.max_retries:
                time.sleep(cfg.backoff_s * (2 ** attempt))
    raise TransportError(
        f"chat completion failed after {cfg.max_retries} attempts: {last_error}"
    )


# --- deterministic heuristic ---------------------------------------------------

def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def relevance(instr: Instruction, caption: str) -> float:
    """Fraction of instruction tokens present in the caption; 0 if empty."""
    want = _tokens(instr.text)
    if not want:
        return 0.0
    return len(want & _tokens(caption)) / len(want)


def object_scores(sa: SceneAnnotation, instr: Instruction) -> dict[int, float]:
    """Relevance + saliency per object; saliency is area times centrality."""
    if not sa.objects:
        raise PlanningError(f"scene {sa.scene_index} has no objects to select from")
    width = sa.objects[0].mask.width
    height = sa.objects[0].mask.height
    frame_area = float(width * height)
    cx, cy = width / 2.0, height / 2.0
    d_max = (cx ** 2 + cy ** 2) ** 0.5
    scores: dict[int, float] = {}
    for o in sa.objects:
        ox, oy = o.bbox.center
        d = ((ox - cx) ** 2 + (oy - cy) ** 2) ** 0.5
        saliency = (o.bbox.area / frame_area) * (1.0 - d / d_max)
        scores[o.id] = relevance(instr, o.caption) + saliency
    return scores


def select_salient(sa: SceneAnnotation, instr: Instruction) -> list[int]:
    """Object ids the heuristic would show for one scene, best first."""
    scores = object_scores(sa, instr)
    ranked = sorted(scores, key=lambda oid: (-scores[oid], oid))
    if len(ranked) >= 2:
        s1, s2 = scores[ranked[0]], scores[ranked[1]]
        if s1 - s2 <= TIE_WINDOW * s1:
            return ranked[:2]
    return ranked[:1]


def heuristic_plan(
    instr: Instruction,
    annotations: Sequence[SceneAnnotation],
    aspect: AspectRatio,
    video_id: str = "",
) -> Blueprint:
    """Deterministic model-free planner.

    Per scene the top-scoring object is shown alone unless the runner-up
    is within the tie window, in which case both share the frame.  Every
    scene but the last fades out; no in-scene effect is applied.
    """
    ordered = sorted(annotations, key=lambda a: a.scene_index)
    plans = []
    for pos, sa in enumerate(ordered):
        selected = select_salient(sa, instr)
        last = pos == len(ordered) - 1
        plans.append(
            ScenePlan(
                scene_index=sa.scene_index,
                layout=len(selected),
                object_ids=tuple(selected),
                effect_in=EffectIn.NONE,
                effect_trans=EffectTrans.NONE if last else EffectTrans.FADE_OUT,
                aspect=aspect,
            )
        )
    return Blueprint(video_id=video_id, plans=tuple(plans))

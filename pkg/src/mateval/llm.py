"""Chat-completions client and model-response parsers.

The client speaks the OpenAI-compatible chat JSON protocol. In dry-run mode
it reads canned responses from ``<fixture_dir>/<doc_id>/<task>/<run>.txt``
and never touches the network. Response parsers handle both the JSON output
contract and the line-based pseudo format used by fine-tuned models; JSON
repair is bounded to three syntactic passes (code fences, outer-bracket
trimming, trailing commas) because deeper repair would quietly corrupt
evaluations.
"""

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    EndpointError,
    MissingCredentialError,
    MissingFixtureError,
    ResponseParseError,
)
from .prompts import PromptBundle

logger = logging.getLogger(__name__)

REFUSALS = ("i don't know", "i do not know", "none", "n/a", "no answer")

_KEY_MARKER_RE = re.compile(r"(?:(?<=^)|(?<=,)|(?<=;))\s*([A-Za-z_][A-Za-z0-9_]*)\s*:")
_BULLET_RE = re.compile(r"^\s*[-*]\s+(.*\S)\s*$")
_HEADER_RE = re.compile(r"^\s*([A-Za-z_]+)\s*:\s*$")


@dataclass
class ChatEndpointConfig:
    """Connection settings for the chat endpoint.

    ``credential_env`` names the environment variable holding the API key;
    the key itself never lives in config files. ``dry_run`` requires
    ``fixture_dir``.
    """

    base_url: str = "https://api.openai.com/v1"
    credential_env: str = "OPENAI_API_KEY"
    model: str = "gpt-3.5-turbo"
    timeout: float = 60.0
    max_retries: int = 3
    dry_run: bool = False
    fixture_dir: str | None = None
    backoff_base: float = 1.0
    max_concurrency: int = 4
    min_interval: float = 0.0
    semantic_endpoint: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "ChatEndpointConfig":
        """Read ``key=value`` lines; unknown keys are rejected."""
        cfg = cls()
        casts = {
            "timeout": float,
            "backoff_base": float,
            "min_interval": float,
            "max_retries": int,
            "max_concurrency": int,
            "dry_run": lambda v: v.lower() in ("1", "true", "yes"),
        }
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if not hasattr(cfg, key):
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                setattr(cfg, key, casts.get(key, str)(value))
        return cfg


class RateLimiter:
    """In-flight cap plus a minimum interval between request starts.

    Shareable across threads; ``acquire`` blocks until a slot is free and
    the interval has elapsed.
    """

    def __init__(self, max_concurrency: int = 4, min_interval: float = 0.0):
        self._slots = threading.Semaphore(max_concurrency)
        self._lock = threading.Lock()
        self._interval = min_interval
        self._last_start = 0.0

    def acquire(self):
        self._slots.acquire()
        if self._interval > 0:
            with self._lock:
                wait = self._last_start + self._interval - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
                self._last_start = time.monotonic()

    def release(self):
        self._slots.release()


class _TransientFailure(Exception):
    pass


def _http_transport(cfg: ChatEndpointConfig, credential: str, payload: dict) -> str:
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    try:
        response = requests.post(
            url,
            json=payload,
            headers={"Authorization": f"Bearer {credential}"},
            timeout=cfg.timeout,
        )
    except requests.RequestException as exc:
        raise _TransientFailure(str(exc)) from exc
    if response.status_code == 429 or response.status_code >= 500:
        raise _TransientFailure(f"HTTP {response.status_code}")
    if response.status_code != 200:
        raise EndpointError(f"HTTP {response.status_code}: {response.text[:200]}")
    try:
        return response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError) as exc:
        raise EndpointError(f"malformed endpoint response: {exc}") from exc


def chat_complete(
    bundle: PromptBundle,
    cfg: ChatEndpointConfig,
    doc_id: str | None = None,
    run: str | None = None,
    transport=None,
    limiter: RateLimiter | None = None,
) -> str:
    """Send one chat request and return the assistant text.

    Dry-run mode returns the canned fixture for ``(doc_id, task, run)``
    verbatim and performs no network activity. Live mode resolves the
    credential before any request, retries transient failures (connection
    errors, 429, 5xx) with exponential backoff, and raises EndpointError
    once retries are exhausted.
    """
    if cfg.dry_run:
        if not cfg.fixture_dir:
            raise MissingFixtureError("dry_run requires a fixture directory")
        if doc_id is None or run is None:
            raise MissingFixtureError("dry_run needs doc_id and run to key fixtures")
        path = Path(cfg.fixture_dir) / doc_id / bundle.task / f"{run}.txt"
        if not path.is_file():
            raise MissingFixtureError(f"no canned response at {path}")
        return path.read_text(encoding="utf-8")

    credential = os.environ.get(cfg.credential_env, "")
    if not credential:
        raise MissingCredentialError(
            f"environment variable {cfg.credential_env} is not set"
        )
    payload = {
        "model": bundle.model or cfg.model,
        "temperature": bundle.temperature,
        "messages": [
            {"role": "system", "content": bundle.system},
            {"role": "user", "content": bundle.user_message()},
        ],
    }
    send = transport or _http_transport
    delay = cfg.backoff_base
    for attempt in range(cfg.max_retries + 1):
        if limiter:
            limiter.acquire()
        try:
            return send(cfg, credential, payload)
        except _TransientFailure as exc:
            if attempt == cfg.max_retries:
                raise EndpointError(
                    f"endpoint failed after {cfg.max_retries + 1} attempts: {exc}"
                ) from exc
            logger.warning("transient endpoint failure (%s), retrying in %.1fs", exc, delay)
            time.sleep(delay)
            delay *= 2
        finally:
            if limiter:
                limiter.release()
    raise AssertionError("unreachable")


def _is_refusal(text: str) -> bool:
    lowered = text.strip().strip(".!").lower()
    return any(lowered == r or lowered.startswith(r + ",") for r in REFUSALS)


def _strip_code_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        stripped = re.sub(r"^```[A-Za-z]*\s*", "", stripped)
        stripped = re.sub(r"```\s*$", "", stripped)
    return stripped.strip()


def _outer_bracketed(text: str) -> str:
    starts = [i for i in (text.find("["), text.find("{")) if i != -1]
    ends = [i for i in (text.rfind("]"), text.rfind("}")) if i != -1]
    if not starts or not ends:
        return text
    return text[min(starts): max(ends) + 1]


def _drop_trailing_commas(text: str) -> str:
    return re.sub(r",\s*([\]}])", r"\1", text)


def _loads_with_repair(raw: str):
    text = raw
    for repair in (lambda s: s, _strip_code_fences, _outer_bracketed, _drop_trailing_commas):
        text = repair(text)
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            continue
    raise ResponseParseError("response is not valid JSON after bounded repair", raw)


def _entity_from_obj(obj, keys: tuple[str, ...]) -> str | None:
    if isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        for key in keys:
            value = obj.get(key)
            if isinstance(value, str) and value.strip():
                return value
        # quantities may arrive split into value and unit
        value, unit = obj.get("value"), obj.get("unit")
        if isinstance(value, (str, int, float)):
            value = str(value)
            return f"{value} {unit}" if isinstance(unit, str) and unit else value
    return None


def parse_json_response(raw: str, task: str):
    """Parse a JSON-formatted model response for the given task.

    Returns a list of entity strings for NER tasks, or a list of raw
    relation dicts (keys material/tc/pressure) for RE. Standardized
    refusals ("I don't know", "None") yield an empty result. Unrepairable
    text raises ResponseParseError with the raw response attached.
    """
    if _is_refusal(raw):
        return []
    payload = _loads_with_repair(raw)
    if isinstance(payload, dict):
        for key in ("materials", "quantities", "relations", "entities", "results"):
            if isinstance(payload.get(key), list):
                payload = payload[key]
                break
        else:
            payload = [payload]
    if not isinstance(payload, list):
        raise ResponseParseError(f"expected a JSON list, got {type(payload).__name__}", raw)
    if task == "re":
        blocks = []
        for item in payload:
            if not isinstance(item, dict):
                raise ResponseParseError("relation blocks must be objects", raw)
            block = {
                k: str(v) for k, v in item.items()
                if k in ("material", "tc", "pressure") and v is not None
            }
            blocks.append(block)
        return blocks
    keys = ("material",) if task == "ner_material" else ("quantity",)
    entities = []
    for item in payload:
        value = _entity_from_obj(item, keys)
        if value is not None:
            entities.append(value)
        else:
            logger.warning("ignoring unrecognized %s item: %r", task, item)
    return entities


def parse_pseudo_format(raw: str, task: str):
    """Parse the line-based pseudo format used by fine-tuned models.

    RE responses are ``key: value`` lines, one or more pairs per line,
    groups separated by blank lines or a repeated ``material`` key. NER
    responses are a ``materials:``/``quantities:`` header followed by
    ``- item`` bullets. Every parsed value is a substring of the input;
    nothing is invented. "None" counts as an empty answer.
    """
    if _is_refusal(raw):
        return []
    if task == "re":
        return _parse_pseudo_relations(raw)
    return _parse_pseudo_entities(raw, task)


_RELATION_KEYS = ("material", "tc", "pressure")


def _parse_pseudo_relations(raw: str) -> list[dict]:
    blocks: list[dict] = []
    current: dict = {}

    def flush():
        nonlocal current
        if current:
            blocks.append(current)
            current = {}

    saw_marker = False
    for line in raw.splitlines():
        if not line.strip():
            flush()
            continue
        text = line.strip()
        markers = list(_KEY_MARKER_RE.finditer(text))
        for marker in markers:
            if marker.group(1).lower() not in _RELATION_KEYS:
                logger.warning("ignoring unknown key %r in response", marker.group(1))
        if not any(m.group(1).lower() in _RELATION_KEYS for m in markers):
            continue
        saw_marker = True
        # a value runs from its key's colon to the next key of any kind, so
        # unknown-key segments never leak into the preceding value
        for i, marker in enumerate(markers):
            key = marker.group(1).lower()
            if key not in _RELATION_KEYS:
                continue
            end = markers[i + 1].start() if i + 1 < len(markers) else len(text)
            value = text[marker.end(): end].strip().strip(",").rstrip(":").strip()
            if not value:
                continue
            if key in current:
                flush()
            current[key] = value
    flush()
    if not saw_marker and raw.strip():
        raise ResponseParseError("no relation keys found in pseudo response", raw)
    return blocks


def _parse_pseudo_entities(raw: str, task: str) -> list[str]:
    expected_header = "materials" if task == "ner_material" else "quantities"
    entities = []
    saw_structure = False
    for line in raw.splitlines():
        if not line.strip():
            continue
        header = _HEADER_RE.match(line)
        if header:
            saw_structure = True
            if header.group(1).lower() != expected_header:
                logger.warning("ignoring unknown header %r", header.group(1))
            continue
        bullet = _BULLET_RE.match(line)
        if bullet:
            saw_structure = True
            entities.append(bullet.group(1))
    if not saw_structure:
        raise ResponseParseError("no pseudo-format structure found", raw)
    return entities


def parse_response(raw: str, task: str, response_format: str = "auto"):
    """Parse a response as JSON, pseudo format, or best effort (``auto``)."""
    if response_format == "json":
        return parse_json_response(raw, task)
    if response_format == "pseudo":
        return parse_pseudo_format(raw, task)
    if response_format != "auto":
        raise ValueError(f"unknown response format {response_format!r}")
    try:
        return parse_json_response(raw, task)
    except ResponseParseError:
        return parse_pseudo_format(raw, task)

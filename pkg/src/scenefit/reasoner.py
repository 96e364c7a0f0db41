"""Client for the language-model "reasoner" endpoint.

Two modes share one response contract (the contact-graph JSON schema):

* ``remote``  - thin JSON POST to a model-agnostic endpoint, with retry
  on transport failure and one schema-repair round on invalid graphs.
* ``fixture`` - responses served from a JSON file keyed by the sha256 of
  the full prompt text; fully deterministic and offline, used by tests
  and reproducible runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources

import requests

from .body import CONTACT_VOCABULARY
from .contact import ContactGraph, validate
from .errors import GraphValidationError, InputError, SchemaError, TransportError
from .geometry import ROLES

log = logging.getLogger(__name__)

API_KEY_ENV = "SCENEFIT_REASONER_KEY"


def default_instructions() -> str:
    return (
        resources.files("scenefit")
        .joinpath("assets/reasoner_instructions.txt")
        .read_text()
    )


@dataclass(frozen=True)
class ReasonerConfig:
    mode: str = "fixture"  # "remote" | "fixture"
    endpoint: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    fixture_path: str | None = None
    cache_dir: str | None = None
    retry_backoff: float = 0.2  # seconds, multiplied by the attempt number

    def __post_init__(self):
        if self.mode not in ("remote", "fixture"):
            raise InputError(f"reasoner mode must be remote|fixture, got {self.mode!r}")
        if self.mode == "fixture" and not self.fixture_path:
            raise InputError("fixture mode requires fixture_path")
        if self.mode == "remote" and not self.endpoint:
            raise InputError("remote mode requires an endpoint URL")


@dataclass(frozen=True)
class ReasonerRequest:
    task_prompt: str
    element_labels: tuple = ()
    body_vocabulary: tuple = CONTACT_VOCABULARY
    instructions: str = field(default_factory=default_instructions)

    def __post_init__(self):
        if not self.task_prompt.strip():
            raise InputError("task prompt must be non-empty")
        if tuple(self.body_vocabulary) != CONTACT_VOCABULARY:
            raise InputError("body vocabulary must equal the closed part set")
        object.__setattr__(self, "element_labels", tuple(self.element_labels))


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def build_elements_prompt(task_prompt: str, candidate_labels: tuple = ()) -> str:
    lines = [
        "Identify the scene elements relevant to the task below.",
        "Respond with JSON: "
        '{"elements": [{"label": "<name>", "role": "functional|supporting"}, ...]}',
        f"Task: {task_prompt}",
    ]
    if candidate_labels:
        lines.append("Candidate elements: " + ", ".join(candidate_labels))
    return "\n".join(lines)


def build_graph_prompt(req: ReasonerRequest) -> str:
    return "\n".join(
        [
            req.instructions.strip(),
            f"Task: {req.task_prompt}",
            "Scene elements: " + ", ".join(req.element_labels),
            "Body part vocabulary: " + ", ".join(req.body_vocabulary),
        ]
    )


def _load_fixture(path: str) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise InputError(f"cannot read fixture file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"fixture file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"fixture file {path} must be a JSON object")
    return data


def write_fixture(path, responses: dict) -> None:
    """Write a fixture file from {prompt text: response object}."""
    keyed = {prompt_key(prompt): resp for prompt, resp in responses.items()}
    with open(path, "w") as f:
        json.dump(keyed, f, indent=1, sort_keys=True)


def _cache_path(cfg: ReasonerConfig, key: str) -> str | None:
    if not cfg.cache_dir:
        return None
    return os.path.join(cfg.cache_dir, f"{key}.json")


def _cache_put(cfg: ReasonerConfig, key: str, payload) -> None:
    path = _cache_path(cfg, key)
    if path is None:
        return
    os.makedirs(cfg.cache_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=cfg.cache_dir, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        json.dump(payload, f)
    os.replace(tmp, path)  # atomic on POSIX


def _cache_get(cfg: ReasonerConfig, key: str):
    path = _cache_path(cfg, key)
    if path is None or not os.path.exists(path):
        return None
    with open(path) as f:
        return json.load(f)


def _post(cfg: ReasonerConfig, prompt: str):
    """POST the prompt, retrying transport failures with backoff."""
    key = prompt_key(prompt)
    cached = _cache_get(cfg, key)
    if cached is not None:
        return cached
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    last = None
    for attempt in range(1, cfg.max_retries + 1):
        try:
            resp = requests.post(
                cfg.endpoint,
                json={"prompt": prompt},
                headers=headers,
                timeout=cfg.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
            _cache_put(cfg, key, payload)
            return payload
        except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as e:
            last = e
            log.warning("reasoner POST failed (%d/%d): %s", attempt, cfg.max_retries, e)
            if attempt < cfg.max_retries:
                time.sleep(cfg.retry_backoff * attempt)
        except ValueError as e:  # not JSON
            raise SchemaError(f"reasoner response is not JSON: {e}") from e
    raise TransportError(
        f"reasoner endpoint {cfg.endpoint} unreachable after {cfg.max_retries} attempts: {last}"
    )


def _fetch(cfg: ReasonerConfig, prompt: str):
    if cfg.mode == "fixture":
        fixtures = _load_fixture(cfg.fixture_path)
        key = prompt_key(prompt)
        if key not in fixtures:
            raise SchemaError(
                f"fixture file has no entry for prompt hash {key[:12]}...",
                payload={"prompt": prompt},
            )
        return fixtures[key]
    return _post(cfg, prompt)


def request_elements(cfg: ReasonerConfig, prompt: str) -> list:
    """Ask for task-relevant elements; returns [{"label", "role"}, ...]."""
    payload = _fetch(cfg, build_elements_prompt(prompt))
    if not isinstance(payload, dict) or "elements" not in payload:
        raise SchemaError("response missing 'elements'", payload=payload)
    out = []
    for i, item in enumerate(payload["elements"]):
        if not isinstance(item, dict) or "label" not in item or "role" not in item:
            raise SchemaError(f"elements[{i}] missing label/role", payload=payload)
        if item["role"] not in ROLES:
            raise SchemaError(
                f"elements[{i}] role {item['role']!r} not in {ROLES}", payload=payload
            )
        out.append({"label": str(item["label"]), "role": item["role"]})
    return out


def request_contact_graph(cfg: ReasonerConfig, req: ReasonerRequest) -> ContactGraph:
    """Ask for a contact graph; invalid graphs get one schema-repair retry
    with the violations appended to the prompt, then fail with the
    violation list attached."""
    prompt = build_graph_prompt(req)
    payload = _fetch(cfg, prompt)
    graph, violations = _parse_graph(payload)
    if not violations:
        return graph
    log.warning("contact graph invalid, retrying with repair prompt: %s", violations)
    repair_prompt = (
        prompt
        + "\nYour previous answer violated these constraints; fix them:\n- "
        + "\n- ".join(violations)
    )
    payload = _fetch(cfg, repair_prompt)
    graph, violations = _parse_graph(payload)
    if violations:
        raise GraphValidationError(
            f"contact graph still invalid after repair: {violations}",
            violations=violations,
        )
    return graph


def _parse_graph(payload) -> tuple:
    if not isinstance(payload, dict):
        raise SchemaError("graph response must be a JSON object", payload=payload)
    for key in ("body_nodes", "scene_nodes", "edges"):
        if key not in payload:
            raise SchemaError(f"graph response missing {key!r}", payload=payload)
    try:
        graph = ContactGraph.from_json_dict(payload)
    except InputError as e:
        raise SchemaError(str(e), payload=payload) from e
    return graph, validate(graph)

"""Completion backends: the part of the machine that plays the CPU."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx


class CompletionBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


class BackendError(RuntimeError):
    pass


class MalformedTail(BackendError):
    pass


class UnresolvedCondition(BackendError):
    pass


class TransportError(BackendError):
    pass


class ProtocolError(BackendError):
    pass


class CassetteMiss(BackendError):
    pass


class CassetteError(ValueError):
    pass


class BackendConfigError(ValueError):
    pass


_RESULT_PREFIX = "result = "
_IF_LINE = re.compile(r"if (.*)==1 then result = (.*)", re.DOTALL)


def _last_lines(text: str, count: int) -> list[str]:
    # Pulls lines off the end without splitting the (long) boot prefix.
    lines = []
    end = len(text)
    while len(lines) < count and end > 0:
        start = text.rfind("\n", 0, end) + 1
        lines.append(text[start:end])
        end = start - 1
    return lines


def rule_complete(prompt: str) -> str:
    """Evaluate the trailing ``result = ... / if C==1 then ... / $result`` block.

    The boot prefix is ignored; only the last three lines matter.
    """
    body = prompt.rstrip("\n")
    tail = _last_lines(body, 3)
    if not tail or tail[0] != "$result":
        raise MalformedTail("prompt does not end with a '$result' line")
    rest = tail[1:]
    if rest and rest[0].startswith("if "):
        match = _IF_LINE.fullmatch(rest[0])
        if match is None:
            raise MalformedTail(f"unreadable conditional line {rest[0]!r}")
        condition, alternative = match.groups()
        if len(rest) < 2 or not rest[1].startswith(_RESULT_PREFIX):
            raise MalformedTail("conditional line is not preceded by a 'result = ' line")
        default = rest[1][len(_RESULT_PREFIX) :]
        if condition not in ("0", "1"):
            raise UnresolvedCondition(f"condition {condition!r} is not a tape symbol")
        return "\n" + (alternative if condition == "1" else default)
    if rest and rest[0].startswith(_RESULT_PREFIX):
        return "\n" + rest[0][len(_RESULT_PREFIX) :]
    raise MalformedTail("no 'result = ' line before '$result'")


class RuleBackend:
    """Deterministic evaluator of the conditional-assignment prompts."""

    def complete(self, prompt: str) -> str:
        return rule_complete(prompt)


@dataclass(frozen=True)
class HttpBackendConfig:
    endpoint: str
    model: str | None = None
    temperature: float = 0
    max_tokens: int = 256
    timeout_ms: int = 60_000
    api_key_env: str | None = None

    def __post_init__(self) -> None:
        if self.temperature != 0:
            raise BackendConfigError("temperature must be 0 (greedy decoding)")
        if self.max_tokens <= 0:
            raise BackendConfigError("max_tokens must be positive")
        if self.timeout_ms <= 0:
            raise BackendConfigError("timeout_ms must be positive")

    @classmethod
    def load(cls, path: str | Path) -> HttpBackendConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BackendConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict) or not isinstance(data.get("endpoint"), str):
            raise BackendConfigError(f"{path}: an 'endpoint' string is required")
        known = {"endpoint", "model", "temperature", "max_tokens", "timeout_ms", "api_key_env"}
        unknown = set(data) - known
        if unknown:
            raise BackendConfigError(f"{path}: unknown fields {sorted(unknown)}")
        return cls(**data)

    def request_body(self, prompt: str) -> bytes:
        body: dict[str, object] = {"prompt": prompt, "temperature": 0, "max_tokens": self.max_tokens}
        if self.model:
            body["model"] = self.model
        return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise BackendConfigError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers


class HttpBackend:
    """POSTs prompts to a generic JSON completion endpoint.  Never retries."""

    def __init__(self, config: HttpBackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(transport=transport, timeout=config.timeout_ms / 1000)

    def complete(self, prompt: str) -> str:
        cfg = self.config
        try:
            response = self._client.post(cfg.endpoint, content=cfg.request_body(prompt), headers=cfg.headers())
        except httpx.TimeoutException as exc:
            raise TransportError(f"timed out after {cfg.timeout_ms} ms") from exc
        except httpx.TransportError as exc:
            raise TransportError(str(exc) or type(exc).__name__) from exc
        if not response.is_success:
            raise ProtocolError(f"HTTP {response.status_code} from {cfg.endpoint}")
        try:
            data = response.json()
        except ValueError:
            raise ProtocolError("response body is not JSON") from None
        if not isinstance(data, dict) or not isinstance(data.get("completion"), str):
            raise ProtocolError("response has no string 'completion' field")
        return data["completion"]

    def close(self) -> None:
        self._client.close()


def http_complete(config: HttpBackendConfig, prompt: str, transport: httpx.BaseTransport | None = None) -> str:
    backend = HttpBackend(config, transport=transport)
    try:
        return backend.complete(prompt)
    finally:
        backend.close()


class Cassette:
    """Prompt to completion log; the same prompt must always map to one completion."""

    def __init__(self, records: list[tuple[str, str]] = ()) -> None:
        self.records: list[tuple[str, str]] = []
        self._map: dict[str, str] = {}
        for prompt, completion in records:
            self.add(prompt, completion)

    def add(self, prompt: str, completion: str) -> None:
        known = self._map.get(prompt)
        if known is not None and known != completion:
            raise CassetteError(f"conflicting completions recorded for record {len(self.records) + 1}")
        self._map[prompt] = completion
        self.records.append((prompt, completion))

    def lookup(self, prompt: str) -> str:
        try:
            return self._map[prompt]
        except KeyError:
            raise CassetteMiss(f"prompt not in cassette ({len(self._map)} distinct prompts recorded)") from None

    def __len__(self) -> int:
        return len(self._map)

    @classmethod
    def load(cls, path: str | Path) -> Cassette:
        cassette = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    prompt, completion = record["prompt"], record["completion"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise CassetteError(f"{path}:{lineno}: not a prompt/completion record") from None
                if not isinstance(prompt, str) or not isinstance(completion, str):
                    raise CassetteError(f"{path}:{lineno}: prompt and completion must be strings")
                try:
                    cassette.add(prompt, completion)
                except CassetteError as exc:
                    raise CassetteError(f"{path}:{lineno}: {exc}") from None
        return cassette


def cassette_line(prompt: str, completion: str) -> str:
    return json.dumps({"prompt": prompt, "completion": completion}, ensure_ascii=False) + "\n"


class RecordingBackend:
    """Delegates to ``inner`` and appends each exchange to a JSON Lines cassette."""

    def __init__(self, inner: CompletionBackend, path: str | Path, append: bool = False) -> None:
        self.inner = inner
        self.path = Path(path)
        if not append:
            self.path.write_text("", encoding="utf-8")

    def complete(self, prompt: str) -> str:
        completion = self.inner.complete(prompt)
        with open(self.path, "a", encoding="utf-8", newline="") as fh:
            fh.write(cassette_line(prompt, completion))
        return completion


def record_wrap(inner: CompletionBackend, cassette_path: str | Path) -> RecordingBackend:
    return RecordingBackend(inner, cassette_path)


class ReplayBackend:
    def __init__(self, cassette: Cassette) -> None:
        self.cassette = cassette

    def complete(self, prompt: str) -> str:
        return self.cassette.lookup(prompt)


def replay_complete(cassette: Cassette, prompt: str) -> str:
    return cassette.lookup(prompt)

"""Chat-completion client backing the optional LLM decision path."""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import urlparse

import httpx



class LlmError(RuntimeError):
    """Raised when a completion cannot be obtained."""


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: int = 60_000  # milliseconds
    max_retries: int = 3
    in_flight_limit: int = 4
    api_key_env_var: str = "BUBBLESIM_API_KEY"

    def __post_init__(self):
        url = urlparse(self.endpoint_url)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise ValueError(f"endpoint_url must be an absolute http(s) URL: {self.endpoint_url!r}")
        if self.temperature < 0 or self.max_tokens < 1 or self.max_retries < 0 or self.in_flight_limit < 1:
            raise ValueError("invalid LLM configuration values")


@dataclass
class ChatExchange:
    request_body: dict
    response_body: object
    latency: float  # milliseconds
    attempt: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)


def request_body(config: LlmConfig, system_prompt: str, user_prompt: str) -> dict:
    return {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system_prompt},
            {"role": "user", "content": user_prompt},
        ],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def backoff_delays(max_retries: int, jitter: random.Random, base: float = 1.0, factor: float = 2.0) -> list[float]:
    return [base * factor**k + jitter.uniform(0.0, 0.5) for k in range(max_retries)]


class LlmClient:
    """Synchronous client; every attempt is appended to the trace before the
    caller sees its result."""

    def __init__(
        self,
        config: LlmConfig,
        trace_path: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_seed: int = 0,
    ):
        self.config = config
        self.trace_path = Path(trace_path) if trace_path else None
        self.exchanges: list[ChatExchange] = []
        self._sleep = sleep
        self._jitter = random.Random(jitter_seed)
        self._lock = threading.Lock()
        self._http = httpx.Client(transport=transport, timeout=config.timeout / 1000.0)

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _record(self, exchange: ChatExchange):
        with self._lock:
            self.exchanges.append(exchange)
            if self.trace_path:
                with open(self.trace_path, "a", encoding="utf-8") as fh:
                    fh.write(exchange.to_json() + "\n")

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        cfg = self.config
        body = request_body(cfg, system_prompt, user_prompt)
        key = os.environ.get(cfg.api_key_env_var, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        with self._lock:
            delays = backoff_delays(cfg.max_retries, self._jitter)
        last_error = "no attempt made"
        for attempt in range(1, cfg.max_retries + 2):
            start = time.perf_counter()
            try:
                resp = self._http.post(cfg.endpoint_url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                self._record(ChatExchange(body, {"error": f"timeout: {exc}"}, _ms(start), attempt))
                last_error = "timeout"
            else:
                try:
                    payload = resp.json()
                except ValueError:
                    payload = {"error": "malformed JSON", "text": resp.text}
                self._record(ChatExchange(body, {"status": resp.status_code, "body": payload}, _ms(start), attempt))
                if resp.status_code == 200:
                    try:
                        return payload["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError):
                        raise LlmError("malformed completion response") from None
                if not _retryable(resp.status_code):
                    raise LlmError(f"HTTP {resp.status_code} (not retryable)")
                last_error = f"HTTP {resp.status_code}"
            if attempt <= cfg.max_retries:
                self._sleep(delays[attempt - 1])
        raise LlmError(f"retries exhausted after {cfg.max_retries + 1} attempts: {last_error}")


def _retryable(status: int) -> bool:
    return status == 429 or 500 <= status < 600


def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3)


def complete(config: LlmConfig, system_prompt: str, user_prompt: str, **client_kwargs) -> str:
    """One-shot completion with a short-lived client."""
    with LlmClient(config, **client_kwargs) as client:
        return client.complete(system_prompt, user_prompt)

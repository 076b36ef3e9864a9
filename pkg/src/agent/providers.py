"""Completion providers: a remote chat-completions client and a scripted replay."""
import json
import os
import re
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

import requests
from tenacity import Retrying, retry_if_exception, stop_after_attempt, wait_exponential

from src.config import ProviderSettings
from src.errors import ProviderError, ScriptExhausted, UnknownGuid
from src.utils.latency_tracker import measure_latency
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SCRIPT_SEPARATOR = "---"
FILE_PLACEHOLDER = re.compile(r"\{\{\s*file:\s*([^}\s]+)\s*\}\}")
TRANSIENT_CATEGORIES = ("timeout", "rate-limit", "server", "malformed", "transport")


class CompletionProvider(ABC):
    """Something that turns a prompt into one completion text."""

    scripted = False

    @abstractmethod
    def complete(self, prompt: str, system: Optional[str] = None) -> str:
        pass


# -------------------------------------------------------------------- scripted
def read_script(path: str) -> List[str]:
    """Completion entries separated by lines holding only ``---``."""
    if not os.path.exists(path):
        raise ProviderError("config", f"Script file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    entries, current = [], []
    for line in text.splitlines():
        if line.strip() == SCRIPT_SEPARATOR:
            entries.append("\n".join(current).strip())
            current = []
        else:
            current.append(line)
    entries.append("\n".join(current).strip())
    return [entry for entry in entries if entry]


class ScriptedProvider(CompletionProvider):
    """Replays authored completions in order.

    ``{{file:alias}}`` placeholders resolve to the file name registered under
    ``alias`` when the completion is handed out; unknown aliases become
    ``alias.csv``.
    """

    scripted = True

    def __init__(self, entries: List[str], registry=None, source: str = "<memory>"):
        self.entries = list(entries)
        self.registry = registry
        self.source = source
        self.calls = 0
        self.prompts: List[str] = []

    @classmethod
    def from_file(cls, path: str, registry=None) -> "ScriptedProvider":
        entries = read_script(path)
        logger.info(f"Loaded {len(entries)} scripted completions from {path}")
        return cls(entries, registry=registry, source=path)

    def _resolve(self, match) -> str:
        alias = match.group(1)
        if self.registry is not None:
            try:
                return self.registry.find(alias).filename
            except UnknownGuid:
                pass
        logger.debug(f"Placeholder alias {alias!r} is not registered")
        return f"{alias}.csv"

    def remaining(self) -> int:
        return len(self.entries) - self.calls

    def complete(self, prompt: str, system: Optional[str] = None) -> str:
        self.prompts.append(prompt)
        if self.calls >= len(self.entries):
            raise ScriptExhausted(f"Script {self.source} has only {len(self.entries)} completions")
        entry = self.entries[self.calls]
        self.calls += 1
        return FILE_PLACEHOLDER.sub(self._resolve, entry)


# ---------------------------------------------------------------------- remote
def _is_transient(error: BaseException) -> bool:
    return isinstance(error, ProviderError) and error.category in TRANSIENT_CATEGORIES


class RemoteProvider(CompletionProvider):
    """Chat-completions client over HTTPS with retries on transient failures."""

    def __init__(self, settings: Optional[ProviderSettings] = None, session: Optional[requests.Session] = None):
        self.settings = settings or ProviderSettings()
        self.session = session or requests.Session()
        self.api_key = os.environ.get(self.settings.api_key_env, "")
        if not self.api_key:
            logger.warning(f"Environment variable {self.settings.api_key_env} is not set; sending no credentials")

    def redact(self, text: str) -> str:
        if self.api_key:
            text = text.replace(self.api_key, "***")
        return text

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def payload(self, prompt: str, system: Optional[str] = None) -> dict:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": prompt})
        return {
            "model": self.settings.model,
            "messages": messages,
            "temperature": self.settings.temperature,
        }

    def _post(self, payload: dict) -> str:
        try:
            response = self.session.post(
                self.settings.endpoint, headers=self._headers(), json=payload, timeout=self.settings.timeout
            )
        except requests.Timeout as e:
            raise ProviderError("timeout", self.redact(str(e)))
        except requests.RequestException as e:
            raise ProviderError("transport", self.redact(str(e)))

        logger.debug(f"Provider responded {response.status_code}: {self.redact(response.text[:500])}")
        if response.status_code in (401, 403):
            raise ProviderError("auth", "endpoint rejected the credentials", response.status_code)
        if response.status_code == 429:
            raise ProviderError("rate-limit", "too many requests", response.status_code)
        if response.status_code >= 500:
            raise ProviderError("server", f"server error {response.status_code}", response.status_code)
        if response.status_code >= 400:
            raise ProviderError("request", self.redact(response.text[:200]), response.status_code)
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProviderError("malformed", f"unexpected response body ({type(e).__name__})", response.status_code)

    @measure_latency("provider_complete")
    def complete(self, prompt: str, system: Optional[str] = None) -> str:
        payload = self.payload(prompt, system)
        logger.info(
            f"Requesting completion from {self.settings.endpoint} (model {self.settings.model}, "
            f"{len(prompt)} prompt chars)"
        )
        logger.debug(f"Request headers: {self.redact(json.dumps(self._headers()))}")
        retrying = Retrying(
            stop=stop_after_attempt(self.settings.retries + 1),
            wait=wait_exponential(multiplier=self.settings.backoff, max=30),
            retry=retry_if_exception(_is_transient),
            reraise=True,
        )
        try:
            for attempt in retrying:
                with attempt:
                    if attempt.retry_state.attempt_number > 1:
                        logger.warning(f"Retrying completion request (attempt {attempt.retry_state.attempt_number})")
                    return self._post(payload)
        except ProviderError as e:
            logger.error(f"Completion request failed: {e}", exc_info=True)
            raise


def build_provider(kind: str, settings: Optional[ProviderSettings] = None, script: Optional[str] = None,
                   registry=None) -> CompletionProvider:
    if kind == "scripted":
        if not script:
            raise ProviderError("config", "The scripted provider needs --script")
        return ScriptedProvider.from_file(script, registry=registry)
    if kind == "remote":
        return RemoteProvider(settings)
    raise ProviderError("config", f"Unknown provider {kind!r}; use scripted or remote")

"""Prompt x temperature x replicate sweeps against chat-completion endpoints.

The transport is a plain callable (request dict -> response dict), so
live HTTP and offline mocks share one code path.  Transport failures are
retried with exponential backoff and full jitter; parse failures are
findings, never retried.  Every attempted request yields exactly one
record, and records always come out in deterministic plan order no
matter how requests complete.
"""
from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .rng import Xorshift64Star, derive_seed
from .sequences import (
    DEFAULT_REFUSAL_LEXICON,
    ParseKind,
    flips_from_string,
    flips_to_string,
    parse_response,
)

API_KEY_ENV = "FLIPBENCH_API_KEY"

#: Collected temperatures must stay inside this range unless explicitly
#: overridden; sampling above it mostly returns unparseable text.
MAX_DEFAULT_TEMPERATURE = 1.5

JSONL_FIELDS = (
    "ts",
    "model",
    "prompt_id",
    "temperature",
    "replicate",
    "raw",
    "parse_kind",
    "flips",
    "attempts",
    "note",
)

Transport = Callable[[dict], dict]


class TransportError(Exception):
    """Retryable transport-level failure (network, 5xx, timeout)."""


class AuthenticationError(Exception):
    """Credential rejection; aborts the whole sweep."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = ""
    model: str = ""
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_parallel: int = 1
    requests_per_minute: int = 0  # 0 = uncapped

    def validate(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


@dataclass(frozen=True)
class PromptSpec:
    id: str
    template: str
    expected_flips: int
    order_tag: Optional[str] = None  # "heads_first" | "tails_first"

    def validate(self) -> None:
        if not self.template:
            raise ValueError(f"prompt {self.id!r} has an empty template")
        if self.expected_flips < 1:
            raise ValueError(f"prompt {self.id!r} expected_flips must be >= 1")


@dataclass(frozen=True)
class SweepPlan:
    prompts: tuple[PromptSpec, ...]
    temperatures: tuple[float, ...]
    replicates: int = 30
    seed: int = 0
    allow_high_temperature: bool = False

    def validate(self) -> None:
        if not self.prompts:
            raise ValueError("plan has no prompts")
        for p in self.prompts:
            p.validate()
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        for t in self.temperatures:
            if t < 0:
                raise ValueError(f"temperature {t} is negative")
            if t > MAX_DEFAULT_TEMPERATURE and not self.allow_high_temperature:
                raise ValueError(
                    f"temperature {t} exceeds {MAX_DEFAULT_TEMPERATURE}; "
                    "set allow_high_temperature to override"
                )

    def cells(self) -> list[tuple[PromptSpec, float]]:
        return [(p, t) for p in self.prompts for t in self.temperatures]


@dataclass(frozen=True)
class CollectionRecord:
    ts: str
    model: str
    prompt_id: str
    temperature: float
    replicate: int
    raw: str
    parse_kind: str
    flips: str  # compact "HTH..." string, empty when nothing parsed
    attempts: int
    note: str

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in JSONL_FIELDS}

    @property
    def flip_tuple(self) -> tuple[int, ...]:
        return flips_from_string(self.flips)


def default_plan(replicates: int = 30, seed: int = 0) -> SweepPlan:
    """The standard sweep: single-flip and 20-flip prompts, both wordings,
    the two instruction-order variants, temperatures 0.0-1.0 plus 1.5."""
    order_suffix = (
        "Report the flips as a list of characters separated by commas. "
    )
    prompts = (
        PromptSpec("flip_one", "Flip a coin.", 1),
        PromptSpec("flip_one_fair", "Flip a fair coin.", 1),
        PromptSpec("flip20", "Flip 20 coins.", 20),
        PromptSpec("flip20_fair", "Flip 20 fair coins.", 20),
        PromptSpec(
            "flip20_fair_heads_first",
            "Flip 20 fair coins. " + order_suffix
            + "If it's heads write 'H', if it's tails write 'T'.",
            20,
            order_tag="heads_first",
        ),
        PromptSpec(
            "flip20_fair_tails_first",
            "Flip 20 fair coins. " + order_suffix
            + "If it's tails write 'T', if it's heads write 'H'.",
            20,
            order_tag="tails_first",
        ),
    )
    temperatures = tuple(round(t / 10, 1) for t in range(0, 11)) + (1.5,)
    return SweepPlan(prompts, temperatures, replicates=replicates, seed=seed)


class _TokenBucket:
    """Global requests-per-minute cap, safe under concurrent acquire."""

    def __init__(self, rpm: int, clock: Callable[[], float], sleep: Callable[[float], None]):
        self.rate = rpm / 60.0 if rpm > 0 else 0.0
        self.capacity = float(rpm)
        self.tokens = float(rpm)
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


def build_request(model: str, prompt_text: str, temperature: float) -> dict:
    """Chat-completions request body."""
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": temperature,
    }


def response_text(response: dict) -> str:
    """Content of the first choice of a chat-completions response."""
    try:
        return response["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed response shape: {exc}") from exc


def http_transport(endpoint: EndpointConfig) -> Transport:
    """Live JSON-over-HTTP transport; the API key is read from the
    environment at call time and never stored on any record."""

    def send(request: dict) -> dict:
        key = os.environ.get(endpoint.api_key_env, "")
        req = urllib.request.Request(
            endpoint.base_url,
            data=json.dumps(request).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {key}",
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=endpoint.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthenticationError(f"HTTP {exc.code} from endpoint") from exc
            raise TransportError(f"HTTP {exc.code} from endpoint") from exc
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise TransportError(str(exc)) from exc

    return send


def run_sweep(
    plan: SweepPlan,
    endpoint: EndpointConfig,
    transport: Transport,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.time,
    refusal_lexicon: Sequence[str] = DEFAULT_REFUSAL_LEXICON,
) -> list[CollectionRecord]:
    """One request per (prompt, temperature, replicate); never drops a
    request, never aborts except on authentication failure."""
    plan.validate()
    endpoint.validate()
    bucket = _TokenBucket(endpoint.requests_per_minute, clock, sleep)

    tasks = []
    for prompt, temperature in plan.cells():
        for rep in range(plan.replicates):
            tasks.append((prompt, temperature, rep))

    def attempt(index: int) -> CollectionRecord:
        prompt, temperature, rep = tasks[index]
        jitter = Xorshift64Star(derive_seed(plan.seed, index))
        request = build_request(endpoint.model, prompt.template, temperature)
        raw = ""
        note = ""
        attempts = 0
        max_attempts = endpoint.max_retries + 1
        for attempts in range(1, max_attempts + 1):
            bucket.acquire()
            try:
                raw = response_text(transport(request))
                note = ""
                break
            except TransportError as exc:
                note = f"transport error: {exc}"
                if attempts >= max_attempts:
                    break
                sleep(jitter.random() * endpoint.backoff_base * (2 ** (attempts - 1)))
        outcome = parse_response(raw, prompt.expected_flips, refusal_lexicon)
        joined = "; ".join(n for n in (note, outcome.note) if n)
        return CollectionRecord(
            ts=_iso(clock()),
            model=endpoint.model,
            prompt_id=prompt.id,
            temperature=temperature,
            replicate=rep,
            raw=raw,
            parse_kind=outcome.kind.value,
            flips=flips_to_string(outcome.flips) if outcome.flips else "",
            attempts=attempts,
            note=joined,
        )

    if endpoint.max_parallel > 1:
        with ThreadPoolExecutor(max_workers=endpoint.max_parallel) as pool:
            records = list(pool.map(attempt, range(len(tasks))))
    else:
        records = [attempt(i) for i in range(len(tasks))]
    return records


def _iso(epoch: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(epoch))


def records_from_sequences(seqs, prompt_id: str | None = None) -> list[CollectionRecord]:
    """Wrap generated sequences in replayable records (model id keeps the
    synthetic: prefix; raw text is the canonical serialization)."""
    from .sequences import flips_to_text  # local import to keep module load light

    out = []
    for seq in seqs:
        out.append(
            CollectionRecord(
                ts="",
                model=seq.meta.model,
                prompt_id=prompt_id or seq.meta.prompt_id,
                temperature=seq.meta.temperature,
                replicate=seq.meta.replicate,
                raw=flips_to_text(seq.flips),
                parse_kind=ParseKind.PARSED.value,
                flips=flips_to_string(seq.flips),
                attempts=1,
                note="",
            )
        )
    return out


def write_records(path: str, records: Sequence[CollectionRecord]) -> None:
    """JSONL, one record per line, fixed key order, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False) + "\n")


def read_records(path: str) -> list[CollectionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    CollectionRecord(
                        ts=obj["ts"],
                        model=obj["model"],
                        prompt_id=obj["prompt_id"],
                        temperature=float(obj["temperature"]),
                        replicate=int(obj["replicate"]),
                        raw=obj["raw"],
                        parse_kind=obj["parse_kind"],
                        flips=obj["flips"],
                        attempts=int(obj["attempts"]),
                        note=obj.get("note", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from exc
    return records

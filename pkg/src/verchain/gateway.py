"""Rate-limited, key-rotating client for an Etherscan-compatible JSON API.

All requests go through :meth:`Gateway.fetch`, which takes a request slot from
a :class:`RateLimiter` and hands the parameters to a *transport*.  Transports
are plain callables ``params -> payload``; :class:`HttpTransport` talks to the
live API, :class:`FixtureTransport` replays payloads stored on disk and
:class:`RecordingTransport` captures payloads from any other transport.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping

from .keccak import selector_of

logger = logging.getLogger(__name__)

DEFAULT_PER_SECOND = 5
DEFAULT_DAILY = 100_000
MAX_PAGE_SIZE = 50_000
ANONYMOUS_WINDOW = 5.0  # seconds per request without an API key
SECONDS_PER_DAY = 86_400
_CLOCK_EPSILON = 1e-9  # absorbs float error when sleeping exactly to a window edge

_HEX_RE = re.compile(r"^(0x)?[0-9a-fA-F]*$")


class GatewayError(Exception):
    pass


class AllKeysExhausted(GatewayError):
    pass


class ApiError(GatewayError):
    def __init__(self, status: str, message: str):
        super().__init__(f"API returned status={status!r}: {message}")
        self.status = status
        self.message = message


class ParseError(GatewayError):
    pass


class NotVerified(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class FixtureMiss(GatewayError):
    pass


# --------------------------------------------------------------------------- types


def normalize_address(value: str) -> str:
    """Lower-case ``0x``-prefixed 40-hex-digit address; raises ValueError otherwise."""
    text = value.strip().lower()
    if not text.startswith("0x"):
        text = "0x" + text
    if len(text) != 42 or not _HEX_RE.match(text):
        raise ValueError(f"malformed address: {value!r}")
    return text


def _optional_address(value: str | None) -> str | None:
    if value is None or value in ("", "0x"):
        return None
    return normalize_address(value)


def _normalize_hex(value: str) -> str:
    text = value.strip().lower()
    if not text.startswith("0x"):
        text = "0x" + text
    if not _HEX_RE.match(text) or len(text) % 2:
        raise ValueError(f"malformed hex string: {value[:20]!r}")
    return text


@dataclass(frozen=True)
class Transaction:
    hash: str
    from_addr: str
    to_addr: str | None
    input: str
    contract_address: str | None
    block_number: int
    tx_index: int
    timestamp: int

    def __post_init__(self):
        if len(self.hash) != 66 or not _HEX_RE.match(self.hash):
            raise ValueError(f"transaction hash must be 64 hex chars: {self.hash!r}")
        if self.block_number < 0 or self.tx_index < 0:
            raise ValueError("block_number and tx_index must be non-negative")

    @property
    def order_key(self) -> tuple[int, int]:
        return (self.block_number, self.tx_index)

    @property
    def input_bytes(self) -> bytes:
        return bytes.fromhex(self.input[2:])

    @classmethod
    def from_api(cls, row: Mapping[str, object]) -> "Transaction":
        """Build from one element of an Etherscan ``txlist``/``txlistinternal`` result."""
        try:
            return cls(
                hash=_normalize_hex(str(row["hash"])),
                from_addr=normalize_address(str(row["from"])),
                to_addr=_optional_address(row.get("to")),  # type: ignore[arg-type]
                input=_normalize_hex(str(row.get("input") or "0x")),
                contract_address=_optional_address(row.get("contractAddress")),  # type: ignore[arg-type]
                block_number=int(row["blockNumber"]),  # type: ignore[arg-type]
                tx_index=int(row.get("transactionIndex") or 0),  # type: ignore[arg-type]
                timestamp=int(row.get("timeStamp") or 0),  # type: ignore[arg-type]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed transaction record: {exc}") from exc

    def to_api(self) -> dict[str, str]:
        return {
            "hash": self.hash,
            "from": self.from_addr,
            "to": self.to_addr or "",
            "input": self.input,
            "contractAddress": self.contract_address or "",
            "blockNumber": str(self.block_number),
            "transactionIndex": str(self.tx_index),
            "timeStamp": str(self.timestamp),
        }


def _canonical_type(param: Mapping[str, object]) -> str:
    kind = str(param["type"])
    if kind.startswith("tuple"):
        inner = ",".join(_canonical_type(c) for c in param.get("components", []))  # type: ignore[union-attr]
        return f"({inner}){kind[len('tuple'):]}"
    return kind


@dataclass(frozen=True)
class AbiSpec:
    entries: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @staticmethod
    def signature(name: str, types: tuple[str, ...]) -> str:
        return f"{name}({','.join(types)})"

    def signatures(self) -> list[str]:
        return [self.signature(name, types) for name, types in self.entries]

    def lookup(self, selector: bytes) -> tuple[str, tuple[str, ...]] | None:
        """Return the ``(name, types)`` entry whose selector matches, if any."""
        for name, types in self.entries:
            if selector_of(self.signature(name, types)) == selector:
                return name, types
        return None

    @classmethod
    def from_json(cls, abi: str | list) -> "AbiSpec":
        try:
            items = json.loads(abi) if isinstance(abi, str) else abi
            entries = tuple(
                (str(item["name"]), tuple(_canonical_type(p) for p in item.get("inputs", [])))
                for item in items
                if item.get("type", "function") == "function"
            )
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed ABI: {exc}") from exc
        return cls(entries)


@dataclass(frozen=True)
class VerifiedSource:
    contract_name: str
    source_text: str
    compiler_version: str = ""
    abi: AbiSpec = field(default_factory=AbiSpec)
    is_proxy: bool = False
    implementation: str | None = None


def _flatten_source(raw: str) -> str:
    # standard-json input is wrapped in double braces; single-brace is a sources map
    text = raw.strip()
    if not text.startswith("{"):
        return raw
    try:
        doc = json.loads(text[1:-1] if text.startswith("{{") else text)
    except ValueError:
        return raw
    sources = doc.get("sources", doc)
    parts = []
    for path in sorted(sources):
        content = sources[path].get("content", "") if isinstance(sources[path], dict) else ""
        parts.append(f"// File: {path}\n{content}")
    return "\n".join(parts) if parts else raw


# --------------------------------------------------------------------------- rate limiting


@dataclass
class ApiKey:
    key_id: str
    per_second_budget: int = DEFAULT_PER_SECOND
    daily_budget: float = DEFAULT_DAILY
    used_today: int = 0
    window_seconds: float = 1.0
    day: int | None = None
    recent: deque = field(default_factory=deque, repr=False)

    @property
    def window_used(self) -> int:
        return len(self.recent)

    def _refresh(self, now: float) -> None:
        day = int(now // SECONDS_PER_DAY)
        if self.day is not None and day != self.day:
            self.used_today = 0
        self.day = day
        while self.recent and self.recent[0] + self.window_seconds <= now + _CLOCK_EPSILON:
            self.recent.popleft()

    def daily_exhausted(self) -> bool:
        return self.used_today >= self.daily_budget

    def window_full(self) -> bool:
        return len(self.recent) >= self.per_second_budget

    def window_opens_at(self) -> float:
        return self.recent[0] + self.window_seconds


def load_keys(path: str | Path, **budgets) -> list[ApiKey]:
    """Read a key file: one key per line, blank lines and ``#`` comments ignored."""
    keys = []
    for line in Path(path).read_text().splitlines():
        text = line.split("#", 1)[0].strip()
        if text:
            keys.append(ApiKey(text, **budgets))
    return keys


class RateLimiter:
    """Sliding-window limiter over a round-robin list of API keys.

    ``clock`` and ``sleep`` are injectable so tests can drive a simulated clock.
    With no keys the limiter runs anonymously: one request per five seconds,
    and :meth:`acquire_request_slot` returns the empty key id.
    """

    def __init__(
        self,
        keys: list[ApiKey] | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        enabled: bool = True,
    ):
        self.keys = list(keys) if keys else [
            ApiKey("", per_second_budget=1, daily_budget=float("inf"), window_seconds=ANONYMOUS_WINDOW)
        ]
        self.clock = clock
        self.sleep = sleep
        self.enabled = enabled
        self.current = 0
        self._lock = threading.Lock()

    @classmethod
    def unlimited(cls) -> "RateLimiter":
        return cls(enabled=False)

    def _try_acquire(self, now: float) -> tuple[str | None, float]:
        for key in self.keys:
            key._refresh(now)
        if all(k.daily_exhausted() for k in self.keys):
            raise AllKeysExhausted(f"all {len(self.keys)} keys spent their daily budget")
        n = len(self.keys)
        for step in range(n):
            idx = (self.current + step) % n
            key = self.keys[idx]
            if key.daily_exhausted() or key.window_full():
                continue
            if idx != self.current:
                logger.debug("rotating API key %d -> %d", self.current, idx)
            self.current = idx
            key.recent.append(now)
            key.used_today += 1
            return key.key_id, 0.0
        opens = min(k.window_opens_at() for k in self.keys if not k.daily_exhausted())
        return None, max(opens - now, 0.0)

    def acquire_request_slot(self, now: float | None = None) -> str:
        """Block until some key has budget, then charge it and return its id."""
        if not self.enabled:
            return self.keys[self.current].key_id
        while True:
            with self._lock:
                key_id, wait = self._try_acquire(self.clock() if now is None else now)
            if key_id is not None:
                return key_id
            self.sleep(wait)
            now = None


# --------------------------------------------------------------------------- transports


def fixture_key(params: Mapping[str, object]) -> str:
    """Stable digest of a request's parameters, ignoring the API key."""
    canonical = {str(k): str(v) for k, v in params.items() if k != "apikey"}
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class HttpTransport:
    def __init__(self, base_url: str = "https://api.etherscan.io/api", timeout: float = 30.0):
        import requests

        self.base_url = base_url
        self.timeout = timeout
        self.session = requests.Session()

    def __call__(self, params: Mapping[str, object]) -> dict:
        import requests

        try:
            response = self.session.get(self.base_url, params=dict(params), timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(str(exc)) from exc


class FixtureTransport:
    """Replay payloads from ``<directory>/<fixture_key>.json``.

    Each file holds ``{"request": {...params without apikey...}, "payload": {...}}``.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path_for(self, params: Mapping[str, object]) -> Path:
        return self.directory / f"{fixture_key(params)}.json"

    def __call__(self, params: Mapping[str, object]) -> dict:
        path = self.path_for(params)
        if not path.exists():
            raise FixtureMiss(f"no fixture for {dict(params)!r}")
        return json.loads(path.read_text())["payload"]


class RecordingTransport:
    def __init__(self, inner: Callable[[Mapping[str, object]], dict], directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def __call__(self, params: Mapping[str, object]) -> dict:
        payload = self.inner(params)
        request = {str(k): str(v) for k, v in sorted(params.items()) if k != "apikey"}
        path = self.directory / f"{fixture_key(params)}.json"
        path.write_text(json.dumps({"request": request, "payload": payload}, sort_keys=True, indent=1))
        return payload


# --------------------------------------------------------------------------- client


class Gateway:
    def __init__(
        self,
        transport: Callable[[Mapping[str, object]], dict],
        limiter: RateLimiter | None = None,
        page_size: int = MAX_PAGE_SIZE,
        retries: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not 0 < page_size <= MAX_PAGE_SIZE:
            raise ValueError(f"page_size must be in 1..{MAX_PAGE_SIZE}")
        self.transport = transport
        self.limiter = limiter or RateLimiter.unlimited()
        self.page_size = page_size
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep

    @classmethod
    def from_fixtures(cls, directory: str | Path, **kwargs) -> "Gateway":
        return cls(FixtureTransport(directory), RateLimiter.unlimited(), **kwargs)

    def fetch(self, params: Mapping[str, object]) -> dict:
        delay = self.backoff
        for attempt in range(self.retries + 1):
            key_id = self.limiter.acquire_request_slot()
            request = dict(params)
            if key_id:
                request["apikey"] = key_id
            try:
                return self.transport(request)
            except TransportError as exc:
                if attempt == self.retries:
                    raise
                logger.warning("transport error (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                self.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    def _result(self, payload: dict, *, empty_ok: bool = False):
        if not isinstance(payload, dict) or "result" not in payload:
            raise ParseError("payload has no 'result' field")
        status = str(payload.get("status", "1"))
        if status != "1":
            message = str(payload.get("message", ""))
            if empty_ok and "no transactions found" in message.lower():
                return []
            raise ApiError(status, f"{message} {payload.get('result')!s}".strip())
        return payload["result"]

    def get_transaction_list(
        self, address: str, page: int = 1, page_size: int | None = None, direction: str = "normal"
    ) -> list[Transaction]:
        """One page of an address's transactions in ascending chain order."""
        size = page_size or self.page_size
        if page < 1 or not 0 < size <= MAX_PAGE_SIZE:
            raise ValueError("page must be >= 1 and page_size in 1..50000")
        action = {"normal": "txlist", "internal": "txlistinternal"}[direction]
        payload = self.fetch({
            "module": "account",
            "action": action,
            "address": normalize_address(address),
            "startblock": 0,
            "endblock": 99999999,
            "page": page,
            "offset": size,
            "sort": "asc",
        })
        rows = self._result(payload, empty_ok=True)
        if not isinstance(rows, list):
            raise ParseError("transaction list result is not a list")
        txs = [Transaction.from_api(row) for row in rows]
        return sorted(txs, key=lambda tx: tx.order_key)

    def iter_transactions(self, address: str, direction: str = "normal") -> Iterator[Transaction]:
        page = 1
        while True:
            batch = self.get_transaction_list(address, page, self.page_size, direction)
            yield from batch
            if len(batch) < self.page_size:
                return
            page += 1

    def all_transactions(self, address: str, direction: str = "normal") -> list[Transaction]:
        return list(self.iter_transactions(address, direction))

    def get_verified_source(self, address: str) -> VerifiedSource:
        payload = self.fetch({
            "module": "contract", "action": "getsourcecode", "address": normalize_address(address),
        })
        result = self._result(payload)
        try:
            entry = result[0]
            source = entry.get("SourceCode") or ""
            abi_text = entry.get("ABI") or ""
        except (IndexError, KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed getsourcecode result: {exc}") from exc
        if not source.strip():
            raise NotVerified(address)
        abi = AbiSpec.from_json(abi_text) if abi_text.lstrip().startswith("[") else AbiSpec()
        return VerifiedSource(
            contract_name=str(entry.get("ContractName", "")),
            source_text=_flatten_source(source),
            compiler_version=str(entry.get("CompilerVersion", "")),
            abi=abi,
            is_proxy=str(entry.get("Proxy", "0")) == "1",
            implementation=_optional_address(entry.get("Implementation") or None),
        )

    def get_abi(self, address: str) -> AbiSpec:
        payload = self.fetch({"module": "contract", "action": "getabi", "address": normalize_address(address)})
        try:
            return AbiSpec.from_json(self._result(payload))
        except ApiError as exc:
            raise NotVerified(address) from exc

    def get_code(self, address: str) -> bytes:
        """Deployed runtime bytecode (``proxy`` module, ``eth_getCode``)."""
        payload = self.fetch({
            "module": "proxy", "action": "eth_getCode", "address": normalize_address(address), "tag": "latest",
        })
        if not isinstance(payload, dict) or "result" not in payload:
            raise ParseError("eth_getCode payload has no result")
        try:
            return bytes.fromhex(_normalize_hex(str(payload["result"]))[2:])
        except ValueError as exc:
            raise ParseError(str(exc)) from exc

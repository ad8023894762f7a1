"""Transaction classification, deployer resolution and version-family assembly."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .gateway import (
    AbiSpec,
    Gateway,
    GatewayError,
    NotVerified,
    Transaction,
    VerifiedSource,
    normalize_address,
)
from .keccak import selector_of

logger = logging.getLogger(__name__)

__all__ = [
    "TransactionKind", "ContractIdentity", "ContractVersion", "ContractFamily", "DeployerResolution",
    "classify_transaction", "selector_of", "resolve_factory_deployment", "resolve_deployer",
    "collect_versions", "enumerate_proxy_implementations", "filter_anomalous", "strip_metadata",
    "NoMatch", "AbiMismatch", "UnresolvedDeployer", "MalformedChain",
]

DEFAULT_MAX_VERSIONS = 100
_FACTORY_WORDS = ("deploy", "create")
# used when a proxy's own ABI lacks the upgrade entry point
_KNOWN_UPGRADE_SIGNATURES = ("upgradeTo(address)", "upgradeToAndCall(address,bytes)")


class NoMatch(Exception):
    pass


class AbiMismatch(Exception):
    pass


class UnresolvedDeployer(Exception):
    pass


class MalformedChain(Exception):
    pass


class TransactionKind(enum.Enum):
    TRANSFER = "Transfer"
    CREATION = "Creation"
    INTERACTION = "Interaction"


@dataclass(frozen=True, order=True)
class ContractIdentity:
    name: str
    deployer: str


@dataclass(frozen=True)
class DeployerResolution:
    deployer: str
    route: str  # "Direct" | "Factory" | "ProxyObserved"
    factory_address: str | None = None
    method_name: str | None = None
    proxy_address: str | None = None
    matched_tx: Transaction | None = None

    def __post_init__(self):
        if self.route == "Factory" and not _is_factory_method(self.method_name or ""):
            raise ValueError(f"factory route needs a deploy/create method, got {self.method_name!r}")


@dataclass(frozen=True)
class ContractVersion:
    identity: ContractIdentity
    address: str
    version_index: int
    creation_tx: Transaction | None
    source: VerifiedSource | None


@dataclass
class ContractFamily:
    identity: ContractIdentity
    versions: list[ContractVersion] = field(default_factory=list)
    route: str = "Direct"
    unverified: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.versions)


def _is_factory_method(name: str) -> bool:
    lowered = name.lower()
    return any(word in lowered for word in _FACTORY_WORDS)


def classify_transaction(tx: Transaction) -> TransactionKind:
    has_input = len(tx.input) > 2
    if tx.to_addr is None and has_input and tx.contract_address is not None:
        return TransactionKind.CREATION
    if tx.to_addr is not None and has_input:
        return TransactionKind.INTERACTION
    return TransactionKind.TRANSFER


def _is_internal_creation(tx: Transaction) -> bool:
    # internal create traces usually carry no input, so the bytecode test is dropped here
    return tx.to_addr is None and tx.contract_address is not None


def strip_metadata(code: bytes) -> bytes:
    """Drop the trailing CBOR metadata block solc appends to runtime bytecode.

    The final two bytes give the CBOR length; the block is stripped only when
    it starts with a CBOR map header, e.g. the 43-byte ``a1 65 'bzzr0' ...``
    trailer.
    """
    if len(code) < 4:
        return code
    length = int.from_bytes(code[-2:], "big")
    start = len(code) - 2 - length
    if 0 < start and 0xA1 <= code[start] <= 0xA5 and length >= 10:
        return code[:start]
    return code


def resolve_factory_deployment(
    factory: str,
    target_bytecode: bytes,
    factory_abi: AbiSpec,
    factory_txs: list[Transaction],
) -> DeployerResolution:
    """Find the call into ``factory`` that carried ``target_bytecode``.

    A call qualifies when its input embeds the (metadata-stripped) target code
    and its selector maps, through ``factory_abi``, to a method whose name
    contains "deploy" or "create".  The first qualifying call wins.
    """
    if not target_bytecode:
        raise ValueError("target_bytecode must be non-empty")
    needle = strip_metadata(target_bytecode) or target_bytecode
    factory = normalize_address(factory)
    unknown_selector = None
    for tx in factory_txs:
        if tx.to_addr != factory:
            continue
        data = tx.input_bytes
        if len(data) < 4 or needle not in data[4:]:
            continue
        entry = factory_abi.lookup(data[:4])
        if entry is None:
            unknown_selector = data[:4]
            continue
        if _is_factory_method(entry[0]):
            return DeployerResolution(tx.from_addr, "Factory", factory_address=factory,
                                      method_name=entry[0], matched_tx=tx)
    if unknown_selector is not None:
        raise AbiMismatch(f"selector 0x{unknown_selector.hex()} not in factory ABI")
    raise NoMatch(f"no deploy/create call into {factory} carries the target bytecode")


def _try_source(gateway: Gateway, address: str) -> VerifiedSource | None:
    try:
        return gateway.get_verified_source(address)
    except NotVerified:
        return None


def resolve_deployer(creation_tx: Transaction, gateway: Gateway) -> DeployerResolution:
    """Direct deployer when the creator is an account, else resolve through its factory.

    An address counts as a contract when the gateway has verified source for it.
    """
    if creation_tx.contract_address is None or creation_tx.to_addr is not None:
        raise ValueError("resolve_deployer needs a creation transaction")
    origin = creation_tx.from_addr
    factory_source = _try_source(gateway, origin)
    if factory_source is None:
        return DeployerResolution(origin, "Direct", matched_tx=creation_tx)
    code = gateway.get_code(creation_tx.contract_address)
    if not code:
        raise UnresolvedDeployer(f"no bytecode for {creation_tx.contract_address}")
    try:
        return resolve_factory_deployment(origin, code, factory_source.abi, gateway.all_transactions(origin))
    except (NoMatch, AbiMismatch) as exc:
        raise UnresolvedDeployer(str(exc)) from exc


def find_creation_tx(address: str, gateway: Gateway) -> Transaction:
    """The transaction (normal or internal trace) that created ``address``."""
    address = normalize_address(address)
    for tx in gateway.get_transaction_list(address, 1, direction="normal"):
        if tx.contract_address == address and classify_transaction(tx) is TransactionKind.CREATION:
            return tx
    for tx in gateway.get_transaction_list(address, 1, direction="internal"):
        if tx.contract_address == address and _is_internal_creation(tx):
            return tx
    raise UnresolvedDeployer(f"no creation transaction found for {address}")


def _factory_candidates(deployer: str, deployer_txs: list[Transaction], gateway: Gateway,
                        known: set[str]) -> dict[str, tuple[Transaction, str]]:
    """Contracts created through factories on ``deployer``'s behalf: address -> (trace, factory)."""
    factories: dict[str, AbiSpec] = {}
    for tx in deployer_txs:
        if tx.from_addr != deployer or classify_transaction(tx) is not TransactionKind.INTERACTION:
            continue
        target = tx.to_addr
        if target in factories or target is None:
            continue
        source = _try_source(gateway, target)
        entry = source.abi.lookup(tx.input_bytes[:4]) if source else None
        if entry is not None and _is_factory_method(entry[0]):
            factories[target] = source.abi  # type: ignore[union-attr]

    found: dict[str, tuple[Transaction, str]] = {}
    for factory in sorted(factories):
        incoming = gateway.all_transactions(factory)
        for trace in gateway.all_transactions(factory, direction="internal"):
            created = trace.contract_address
            if trace.from_addr != factory or not _is_internal_creation(trace) or created in known:
                continue
            code = gateway.get_code(created)  # type: ignore[arg-type]
            if not code:
                continue
            try:
                resolution = resolve_factory_deployment(factory, code, factories[factory], incoming)
            except (NoMatch, AbiMismatch):
                continue
            if resolution.deployer == deployer:
                found[created] = (trace, factory)  # type: ignore[index]
    return found


def collect_versions(seed_address: str, gateway: Gateway) -> ContractFamily:
    """Assemble the (name, deployer) family that ``seed_address`` belongs to.

    Candidates are the deployer's own creation transactions plus contracts its
    factory calls produced.  A candidate joins the family when its verified
    name equals the seed's; unverified candidates are listed on the family but
    get no version index, since their name is unknown.
    """
    seed = normalize_address(seed_address)
    seed_source = gateway.get_verified_source(seed)
    name = seed_source.contract_name
    resolution = resolve_deployer(find_creation_tx(seed, gateway), gateway)
    deployer = resolution.deployer
    identity = ContractIdentity(name, deployer)

    deployer_txs = gateway.all_transactions(deployer)
    candidates: dict[str, Transaction] = {}
    for tx in deployer_txs:
        if tx.from_addr == deployer and classify_transaction(tx) is TransactionKind.CREATION:
            candidates[tx.contract_address] = tx  # type: ignore[index]
    for address, (trace, _factory) in _factory_candidates(deployer, deployer_txs, gateway,
                                                         set(candidates)).items():
        candidates[address] = trace

    family = ContractFamily(identity, route=resolution.route)
    members: list[tuple[Transaction, str, VerifiedSource]] = []
    for address in sorted(candidates):
        source = seed_source if address == seed else _try_source(gateway, address)
        if source is None:
            family.unverified.append(address)
        elif source.contract_name == name:
            members.append((candidates[address], address, source))
    members.sort(key=lambda m: m[0].order_key)
    for (a, *_), (b, *_) in zip(members, members[1:]):
        if a.order_key == b.order_key:
            raise MalformedChain(f"two versions share position {a.order_key}")
    family.versions = [
        ContractVersion(identity, address, index, tx, source)
        for index, (tx, address, source) in enumerate(members, start=1)
    ]
    if seed not in {v.address for v in family.versions}:
        raise UnresolvedDeployer(f"seed {seed} not among {deployer}'s creations")
    return family


def _first_address_argument(data: bytes, types: tuple[str, ...]) -> str | None:
    for position, kind in enumerate(types):
        if kind == "address":
            word = data[4 + 32 * position: 4 + 32 * (position + 1)]
            return "0x" + word[12:].hex() if len(word) == 32 else None
    return None


def enumerate_proxy_implementations(proxy: str, gateway: Gateway,
                                    proxy_abi: AbiSpec | None = None) -> list[str]:
    """Implementation addresses passed to the proxy's upgrade calls, first-seen order."""
    proxy = normalize_address(proxy)
    if proxy_abi is None:
        try:
            source = gateway.get_verified_source(proxy)
            proxy_abi = source.abi
        except NotVerified:
            proxy_abi = AbiSpec()
    fallback = AbiSpec(tuple(
        (sig.split("(")[0], tuple(filter(None, sig[sig.index("(") + 1:-1].split(","))))
        for sig in _KNOWN_UPGRADE_SIGNATURES
    ))
    seen: list[str] = []
    for tx in gateway.all_transactions(proxy):
        if tx.to_addr != proxy or classify_transaction(tx) is not TransactionKind.INTERACTION:
            continue
        data = tx.input_bytes
        entry = proxy_abi.lookup(data[:4]) or fallback.lookup(data[:4])
        if entry is None or "upgrade" not in entry[0].lower():
            continue
        implementation = _first_address_argument(data, entry[1])
        if implementation and implementation not in seen:
            seen.append(implementation)
    return seen


def collect_proxy_family(proxy: str, gateway: Gateway) -> ContractFamily:
    """Implementations observed behind ``proxy`` as a family keyed by the proxy's address."""
    proxy = normalize_address(proxy)
    source = gateway.get_verified_source(proxy)
    if not source.is_proxy:
        raise ValueError(f"{proxy} is not flagged as a proxy")
    identity = ContractIdentity(source.contract_name, proxy)
    family = ContractFamily(identity, route="ProxyObserved")
    index = 0
    for address in enumerate_proxy_implementations(proxy, gateway, source.abi):
        try:
            impl_source = gateway.get_verified_source(address)
        except GatewayError:
            family.unverified.append(address)
            continue
        index += 1
        family.versions.append(ContractVersion(identity, address, index, None, impl_source))
    return family


def filter_anomalous(family: ContractFamily, max_versions: int = DEFAULT_MAX_VERSIONS) -> bool:
    """True when the family should be excluded for having more than ``max_versions`` versions."""
    return len(family.versions) > max_versions

"""In-memory Etherscan stand-in and a random chain generator.

:class:`SyntheticChain` answers the same query parameters as the live API, so
it can be plugged into :class:`~verchain.gateway.Gateway` directly or wrapped
in a :class:`~verchain.gateway.RecordingTransport` to produce fixture files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Mapping

from .gateway import Transaction
from .keccak import keccak256, selector_of

DEPLOY_SIG = "deployContract(bytes)"
TRANSFER_SIG = "transfer(address,uint256)"
UPGRADE_SIG = "upgradeTo(address)"

FACTORY_ABI = [
    {"type": "function", "name": "deployContract", "inputs": [{"name": "code", "type": "bytes"}]},
    {"type": "function", "name": "transfer",
     "inputs": [{"name": "to", "type": "address"}, {"name": "amount", "type": "uint256"}]},
]
PROXY_ABI = [
    {"type": "function", "name": "upgradeTo", "inputs": [{"name": "impl", "type": "address"}]},
    {"type": "function", "name": "admin", "inputs": []},
]
TOKEN_ABI = [
    {"type": "function", "name": "transfer",
     "inputs": [{"name": "to", "type": "address"}, {"name": "amount", "type": "uint256"}]},
]


def metadata_suffix(seed: bytes) -> bytes:
    """A 43-byte swarm-hash CBOR trailer as appended by solc."""
    return bytes.fromhex("a165627a7a72305820") + keccak256(seed) + bytes.fromhex("0029")


def encode_bytes_arg(data: bytes) -> bytes:
    padded = data + b"\x00" * (-len(data) % 32)
    return (32).to_bytes(32, "big") + len(data).to_bytes(32, "big") + padded


def encode_address_arg(address: str) -> bytes:
    return bytes(12) + bytes.fromhex(address[2:])


@dataclass
class Contract:
    address: str
    name: str
    source: str
    abi: list = field(default_factory=list)
    runtime: bytes = b""
    verified: bool = True
    is_proxy: bool = False


class SyntheticChain:
    def __init__(self):
        self.contracts: dict[str, Contract] = {}
        self.normal: list[Transaction] = []
        self.internal: list[Transaction] = []
        self._block = 1000
        self._nonce = 0

    # --- construction helpers

    def _hash(self) -> str:
        self._nonce += 1
        return "0x" + keccak256(b"tx" + self._nonce.to_bytes(8, "big")).hex()

    def next_slot(self) -> tuple[int, int]:
        self._block += 1
        return self._block, 0

    def add_contract(self, contract: Contract) -> Contract:
        self.contracts[contract.address] = contract
        return contract

    def add_tx(self, from_addr: str, to_addr: str | None, data: bytes = b"",
               created: str | None = None, internal: bool = False,
               slot: tuple[int, int] | None = None, tx_hash: str | None = None) -> Transaction:
        block, index = slot or self.next_slot()
        tx = Transaction(
            hash=tx_hash or self._hash(),
            from_addr=from_addr,
            to_addr=to_addr,
            input="0x" + data.hex(),
            contract_address=created,
            block_number=block,
            tx_index=index,
            timestamp=1_500_000_000 + block * 13,
        )
        (self.internal if internal else self.normal).append(tx)
        return tx

    # --- API emulation

    def __call__(self, params: Mapping[str, object]) -> dict:
        module, action = params.get("module"), params.get("action")
        address = str(params.get("address", "")).lower()
        if module == "account" and action in ("txlist", "txlistinternal"):
            pool = self.normal if action == "txlist" else self.internal
            rows = sorted(
                (tx for tx in pool if address in (tx.from_addr, tx.to_addr, tx.contract_address)),
                key=lambda tx: tx.order_key,
            )
            page, size = int(params.get("page", 1)), int(params.get("offset", 10_000))
            rows = rows[(page - 1) * size: page * size]
            if not rows:
                return {"status": "0", "message": "No transactions found", "result": []}
            return {"status": "1", "message": "OK", "result": [tx.to_api() for tx in rows]}
        if module == "contract" and action == "getsourcecode":
            c = self.contracts.get(address)
            if c is None or not c.verified:
                entry = {"SourceCode": "", "ABI": "Contract source code not verified",
                         "ContractName": "", "CompilerVersion": "", "Proxy": "0", "Implementation": ""}
            else:
                entry = {"SourceCode": c.source, "ABI": json.dumps(c.abi), "ContractName": c.name,
                         "CompilerVersion": "v0.8.19+commit.7dd6d404", "Proxy": "1" if c.is_proxy else "0",
                         "Implementation": ""}
            return {"status": "1", "message": "OK", "result": [entry]}
        if module == "contract" and action == "getabi":
            c = self.contracts.get(address)
            if c is None or not c.verified:
                return {"status": "0", "message": "NOTOK", "result": "Contract source code not verified"}
            return {"status": "1", "message": "OK", "result": json.dumps(c.abi)}
        if module == "proxy" and action == "eth_getCode":
            c = self.contracts.get(address)
            return {"jsonrpc": "2.0", "id": 1, "result": "0x" + (c.runtime.hex() if c else "")}
        return {"status": "0", "message": "NOTOK", "result": f"unsupported action {module}/{action}"}


def contract_source(name: str, variant: int) -> str:
    return (
        "pragma solidity ^0.8.0;\n"
        f"contract {name} {{\n"
        f"    uint public value = {variant};\n"
        "    function bump(uint by) public {\n"
        "        if (by > 0) { value += by; }\n"
        "    }\n"
        "}\n"
    )


@dataclass
class PlantedChain:
    chain: SyntheticChain
    seed: str
    deployer: str
    name: str
    planted: list[str]  # addresses in chain order
    factory: str


class ChainBuilder:
    """Convenience layer that deploys contracts the way real deployers do."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.chain = SyntheticChain()

    def address(self) -> str:
        return "0x" + self.rng.getrandbits(160).to_bytes(20, "big").hex()

    def runtime(self) -> bytes:
        body = self.rng.randbytes(self.rng.randint(24, 120))
        return body + metadata_suffix(body)

    def deploy_direct(self, deployer: str, name: str, verified: bool = True, abi: list | None = None,
                      is_proxy: bool = False) -> str:
        address = self.address()
        runtime = self.runtime()
        init = self.rng.randbytes(12) + runtime + self.rng.randbytes(32)
        self.chain.add_contract(Contract(address, name, contract_source(name, self.rng.randint(0, 999)),
                                         abi if abi is not None else TOKEN_ABI, runtime, verified, is_proxy))
        self.chain.add_tx(deployer, None, init, created=address)
        return address

    def deploy_factory(self, owner: str) -> str:
        factory = self.address()
        self.chain.add_contract(Contract(factory, "Factory", contract_source("Factory", 0), FACTORY_ABI,
                                         self.runtime()))
        self.chain.add_tx(owner, None, self.rng.randbytes(40), created=factory)
        return factory

    def deploy_via_factory(self, caller: str, factory: str, name: str, decoy_from: str | None = None) -> str:
        address = self.address()
        runtime = self.runtime()
        init = self.rng.randbytes(12) + runtime
        self.chain.add_contract(Contract(address, name, contract_source(name, self.rng.randint(0, 999)),
                                         TOKEN_ABI, runtime))
        if decoy_from is not None:
            # a transfer() call that happens to carry the same bytes must not be taken as the deployment
            data = selector_of(TRANSFER_SIG) + encode_bytes_arg(init)
            self.chain.add_tx(decoy_from, factory, data)
        call = self.chain.add_tx(caller, factory, selector_of(DEPLOY_SIG) + encode_bytes_arg(init))
        self.chain.add_tx(factory, None, b"", created=address, internal=True,
                          slot=call.order_key, tx_hash=call.hash)
        return address

    def transfer(self, sender: str) -> None:
        self.chain.add_tx(sender, self.address())

    def interact(self, sender: str, target: str) -> None:
        self.chain.add_tx(sender, target, selector_of(TRANSFER_SIG) + self.rng.randbytes(64))


def random_planted_chain(rng: random.Random, n_versions: int | None = None) -> PlantedChain:
    """A chain with ``n_versions`` planted ``Foo`` versions by one deployer plus distractors.

    Planted versions mix direct deployments and deployments through a factory
    exposing both ``deployContract(bytes)`` and ``transfer(address,uint256)``.
    Distractors: other deployers' ``Foo``s (direct and through the same
    factory), the deployer's own differently-named and unverified contracts,
    plain transfers and token interactions, and transfer() decoys carrying
    the planted bytecode.
    """
    b = ChainBuilder(rng)
    n = n_versions if n_versions is not None else rng.randint(1, 20)
    deployer, rival, stranger = b.address(), b.address(), b.address()
    factory = b.deploy_factory(stranger)
    token = b.deploy_direct(stranger, "Token")
    planted = []
    for _ in range(n):
        for _ in range(rng.randint(0, 3)):
            choice = rng.random()
            if choice < 0.25:
                b.transfer(deployer)
            elif choice < 0.45:
                b.interact(deployer, token)
            elif choice < 0.6:
                b.deploy_direct(deployer, "Bar")
            elif choice < 0.7:
                b.deploy_direct(deployer, "Foo", verified=False)
            elif choice < 0.85:
                b.deploy_direct(rival, "Foo")
            else:
                b.deploy_via_factory(rival, factory, "Foo")
        if rng.random() < 0.5:
            planted.append(b.deploy_direct(deployer, "Foo"))
        else:
            decoy = stranger if rng.random() < 0.5 else None
            planted.append(b.deploy_via_factory(deployer, factory, "Foo", decoy_from=decoy))
    return PlantedChain(b.chain, rng.choice(planted), deployer, "Foo", planted, factory)


# --------------------------------------------------------------------------- demo world

VAULT_VERSIONS = (
    """pragma solidity ^0.8.0;

contract Vault {
    uint256 public total;

    // TODO: make this external
    function deposit(uint256 amount) public {
        total += amount;
    }

    function withdraw(uint256 amount) public {
        // fixme: check balance first
        total -= amount;
    }

    function ping() public pure returns (uint256) {
        // workaround for old clients
        return 1;
    }
}
""",
    """pragma solidity ^0.8.0;

contract Vault {
    uint256 public total;
    mapping(address => uint256) public balances;

    // TODO: make this external
    function deposit(uint256 amount) public {
        balances[msg.sender] += amount;
        total += amount;
    }

    function withdraw(uint256 amount) public {
        require(balances[msg.sender] >= amount, "balance");
        balances[msg.sender] -= amount;
        total -= amount;
    }

    function ping() public pure returns (uint256) {
        return 1;
    }

    function fee(uint256 amount) public pure returns (uint256) {
        // wip: tiered fees
        return amount > 1000 ? amount / 100 : 0;
    }
}
""",
)


def random_contract_source(rng: random.Random, name: str, debt: int = 0) -> str:
    """Small but varied contract: a few functions with branches, loops and optional debt comments."""
    lines = ["pragma solidity ^0.8.0;", "", f"contract {name} {{", "    uint256 public counter;",
             "    address public owner;", ""]
    debt_words = ["todo", "fixme", "workaround", "refactor", "temporary"]
    for f in range(rng.randint(1, 5)):
        lines.append(f"    function op{f}(uint256 x) public returns (uint256) {{")
        if debt and rng.random() < 0.6:
            debt -= 1
            lines.append(f"        // {rng.choice(debt_words)}: revisit op{f}")
        for _ in range(rng.randint(0, 3)):
            roll = rng.random()
            if roll < 0.35:
                lines += ["        if (x > counter) {", "            counter = x;", "        }"]
            elif roll < 0.6:
                lines += ["        for (uint256 i = 0; i < x; i++) {", "            counter += i;", "        }"]
            elif roll < 0.8:
                lines.append("        counter = x > 10 ? x - 10 : x + 1;")
            else:
                lines.append(f"        counter = counter * {rng.randint(2, 9)} + x;")
        lines += ["        return counter;", "    }", ""]
    if debt:
        lines.append("    // TODO: access control")
    lines += ["    function setOwner(address next) public {", "        owner = next;", "    }", "}", ""]
    return "\n".join(lines)


@dataclass
class DemoWorld:
    chain: SyntheticChain
    seeds: list[tuple[str, str]]
    reports: list  # list of stats.VulnerabilityReport
    lock_versions: int


def demo_world(seed: int = 7, lock_versions: int = 101) -> DemoWorld:
    """Five seed contracts covering direct, factory, proxy and anomalous families."""
    from .stats import VulnerabilityReport

    rng = random.Random(seed)
    b = ChainBuilder(rng)
    alice, bob, carol, dave, erin = (b.address() for _ in range(5))
    factory = b.deploy_factory(erin)
    seeds: list[tuple[str, str]] = []

    def set_source(address: str, text: str) -> None:
        b.chain.contracts[address].source = text

    vault = []
    for text in VAULT_VERSIONS + (VAULT_VERSIONS[1],):
        b.transfer(alice)
        vault.append(b.deploy_direct(alice, "Vault"))
        set_source(vault[-1], text)
    seeds.append((vault[0], "Vault"))

    tokens = []
    for _ in range(2):
        tokens.append(b.deploy_via_factory(bob, factory, "Token", decoy_from=erin))
        set_source(tokens[-1], random_contract_source(rng, "Token", debt=rng.randint(0, 2)))
    seeds.append((tokens[-1], "Token"))

    registry = b.deploy_direct(carol, "Registry")
    set_source(registry, random_contract_source(rng, "Registry", debt=1))
    seeds.append((registry, "Registry"))

    lock = []
    for _ in range(lock_versions):
        lock.append(b.deploy_direct(dave, "LockToken"))
        set_source(lock[-1], random_contract_source(rng, "LockToken"))
    seeds.append((lock[len(lock) // 2], "LockToken"))

    proxy = b.deploy_direct(erin, "Proxy", abi=PROXY_ABI, is_proxy=True)
    set_source(proxy, random_contract_source(rng, "Proxy"))
    for _ in range(2):
        impl = b.deploy_direct(erin, "Logic")
        set_source(impl, random_contract_source(rng, "Logic", debt=1))
        b.chain.add_tx(erin, proxy, selector_of(UPGRADE_SIG) + encode_address_arg(impl))
    seeds.append((proxy, "Proxy"))

    reports = []
    for address in sorted(b.chain.contracts):
        contract = b.chain.contracts[address]
        if contract.name == "Factory":
            continue
        detectors = ["reentrancy-eth", "tx-origin", "timestamp", "solc-version", "low-level-calls"]
        findings = [(d, rng.choice(["High", "Medium", "Low", "Informational"]), rng.randint(0, 3))
                    for d in rng.sample(detectors, rng.randint(1, 3))]
        if contract.name == "LockToken":
            findings = [("solc-version", "Informational", 1), ("timestamp", "Low", 2)]
        reports.append(VulnerabilityReport(address, contract.name, "", findings))
    return DemoWorld(b.chain, sorted(seeds), reports, lock_versions)


def write_sanctuary(world: DemoWorld, directory) -> None:
    """Lay the seeds out as ``<address>_<name>.sol`` files."""
    from pathlib import Path

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for address, name in world.seeds:
        (root / f"{address}_{name}.sol").write_text(world.chain.contracts[address].source)


def record_fixtures(world: DemoWorld, directory) -> int:
    """Replay every seed's extraction against the chain, saving each payload as a fixture."""
    from pathlib import Path

    from .gateway import Gateway, RecordingTransport
    from .linker import collect_proxy_family, collect_versions

    gateway = Gateway(RecordingTransport(world.chain, directory))
    for address, _ in world.seeds:
        collect_versions(address, gateway)
        if gateway.get_verified_source(address).is_proxy:
            collect_proxy_family(address, gateway)
    return len(list(Path(directory).glob("*.json")))

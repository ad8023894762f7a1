"""Small synthetic inputs for CLI-level tests."""

import random
from pathlib import Path

from verchain.synthetic import ChainBuilder, DemoWorld, random_contract_source, record_fixtures, write_sanctuary


def plain_world(version_counts, seed=11) -> DemoWorld:
    """One directly-deployed family per entry, each with the given number of versions."""
    rng = random.Random(seed)
    b = ChainBuilder(rng)
    seeds = []
    for i, n in enumerate(version_counts):
        deployer, name = b.address(), f"C{i}"
        addresses = []
        for _ in range(n):
            b.transfer(deployer)
            addresses.append(b.deploy_direct(deployer, name))
            b.chain.contracts[addresses[-1]].source = random_contract_source(rng, name, debt=rng.randint(0, 2))
        seeds.append((addresses[-1], name))
    return DemoWorld(b.chain, sorted(seeds), [], max(version_counts))


def materialize(world: DemoWorld, root: Path) -> tuple[Path, Path]:
    write_sanctuary(world, root / "sanctuary")
    record_fixtures(world, root / "fixtures")
    return root / "sanctuary", root / "fixtures"


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}

"""On-disk layout for versioned contracts: ``root/<name>/<deployer>/<address>_<name>_V<n>.sol``."""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterator

from .gateway import VerifiedSource, normalize_address
from .linker import ContractFamily, ContractIdentity, ContractVersion

logger = logging.getLogger(__name__)

_SANCTUARY = re.compile(r"^(0x[0-9a-fA-F]{40})_(.+)\.sol$")
_VERSION_FILE = re.compile(r"^(0x[0-9a-f]{40})_(.+)_V([1-9][0-9]*)\.sol$")


class MalformedName(ValueError):
    pass


class ConflictError(Exception):
    pass


def parse_sanctuary_name(filename: str) -> tuple[str, str]:
    """``0x<40 hex>_<Name>.sol`` -> (lower-case address, name)."""
    match = _SANCTUARY.match(Path(filename).name)
    if not match or not match.group(2):
        raise MalformedName(filename)
    return match.group(1).lower(), match.group(2)


def parse_version_name(filename: str) -> tuple[str, str, int]:
    match = _VERSION_FILE.match(Path(filename).name)
    if not match:
        raise MalformedName(filename)
    return match.group(1), match.group(2), int(match.group(3))


def version_path(root: str | Path, version: ContractVersion) -> Path:
    name = version.identity.name
    deployer = normalize_address(version.identity.deployer)
    address = normalize_address(version.address)
    return Path(root) / name / deployer / f"{address}_{name}_V{version.version_index}.sol"


def write_version(root: str | Path, version: ContractVersion) -> Path:
    """Write a version's source atomically; identical rewrites are no-ops."""
    if version.source is None or not version.source.source_text:
        raise ValueError(f"{version.address} has no source to write")
    path = version_path(root, version)
    data = version.source.source_text.encode("utf-8")
    if path.exists():
        if path.read_bytes() == data:
            return path
        raise ConflictError(f"{path} already holds different content")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".sol")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_family(root: str | Path, family: ContractFamily) -> list[Path]:
    return [write_version(root, v) for v in family.versions if v.source is not None]


def read_families(root: str | Path) -> Iterator[ContractFamily]:
    """Yield stored families in (name, deployer) order, versions sorted by index."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(root)
    for name_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for deployer_dir in sorted(p for p in name_dir.iterdir() if p.is_dir()):
            identity = ContractIdentity(name_dir.name, deployer_dir.name)
            versions = []
            for path in sorted(deployer_dir.iterdir()):
                try:
                    address, name, index = parse_version_name(path.name)
                except MalformedName:
                    logger.warning("skipping non-conforming file %s", path)
                    continue
                if name != identity.name:
                    logger.warning("skipping %s: name does not match directory", path)
                    continue
                source = VerifiedSource(name, path.read_text(encoding="utf-8"))
                versions.append(ContractVersion(identity, address, index, None, source))
            if versions:
                versions.sort(key=lambda v: v.version_index)
                yield ContractFamily(identity, versions)


def family_paths(root: str | Path, family: ContractFamily) -> list[Path]:
    return [version_path(root, v) for v in family.versions]


def iter_sanctuary(input_dir: str | Path) -> list[tuple[str, str]]:
    """(address, name) seeds from a Sanctuary-style tree, sorted, malformed names skipped."""
    seeds = {}
    for path in sorted(Path(input_dir).rglob("*.sol")):
        try:
            address, name = parse_sanctuary_name(path.name)
        except MalformedName:
            logger.warning("skipping %s: not <address>_<name>.sol", path)
            continue
        seeds[address] = name
    return sorted(seeds.items())


def write_manifest(root: str | Path, manifest: dict) -> Path:
    path = Path(root) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def version_counts(root: str | Path) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for family in read_families(root):
        counts[(family.identity.name, family.identity.deployer)] = len(family.versions)
    return dict(counts)

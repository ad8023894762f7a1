import threading

import pytest

from verchain.gateway import VerifiedSource
from verchain.linker import ContractFamily, ContractIdentity, ContractVersion
from verchain.store import (
    ConflictError,
    MalformedName,
    family_paths,
    iter_sanctuary,
    parse_sanctuary_name,
    parse_version_name,
    read_families,
    version_counts,
    version_path,
    write_family,
    write_version,
)

DEP = "0x" + "d1" * 20
DEP2 = "0x" + "d2" * 20


def addr(i):
    return f"0x{i:040x}"


def family(name="Foo", deployer=DEP, n=3, start=1):
    ident = ContractIdentity(name, deployer)
    versions = [ContractVersion(ident, addr(start + i), i + 1, None,
                                VerifiedSource(name, f"contract {name} {{ uint v{i}; }}\n"))
                for i in range(n)]
    return ContractFamily(ident, versions)


@pytest.mark.parametrize("filename, expected", [
    ("0x0a1b2c3d4e5f60718293a4b5c6d7e8f901234567_WalletStub.sol",
     ("0x0a1b2c3d4e5f60718293a4b5c6d7e8f901234567", "WalletStub")),
    ("0xABCDEF0000000000000000000000000000000001_My_Token.sol",
     ("0xabcdef0000000000000000000000000000000001", "My_Token")),
])
def test_parse_sanctuary_name(filename, expected):
    assert parse_sanctuary_name(filename) == expected


@pytest.mark.parametrize("bad", ["Token.sol", "0x123_Token.sol", f"{addr(1)}_.sol", f"{addr(1)}_Token.txt"])
def test_malformed_sanctuary_names(bad):
    with pytest.raises(MalformedName):
        parse_sanctuary_name(bad)


def test_parse_version_name():
    assert parse_version_name(f"{addr(5)}_My_Token_V12.sol") == (addr(5), "My_Token", 12)
    with pytest.raises(MalformedName):
        parse_version_name(f"{addr(5)}_Token_V0.sol")


def test_layout(tmp_path):
    fam = family()
    paths = write_family(tmp_path, fam)
    assert paths[1] == tmp_path / "Foo" / DEP / f"{addr(2)}_Foo_V2.sol"
    assert paths == family_paths(tmp_path, fam)
    assert paths[0].read_text() == fam.versions[0].source.source_text


def test_rewrite_is_idempotent(tmp_path):
    fam = family()
    write_family(tmp_path, fam)
    before = {p: p.stat().st_mtime_ns for p in tmp_path.rglob("*.sol")}
    write_family(tmp_path, fam)
    assert {p: p.stat().st_mtime_ns for p in tmp_path.rglob("*.sol")} == before


def test_different_content_conflicts(tmp_path):
    fam = family()
    write_family(tmp_path, fam)
    v = fam.versions[0]
    changed = ContractVersion(v.identity, v.address, v.version_index, None, VerifiedSource("Foo", "other"))
    with pytest.raises(ConflictError):
        write_version(tmp_path, changed)


def test_version_without_source_rejected(tmp_path):
    v = family().versions[0]
    with pytest.raises(ValueError):
        write_version(tmp_path, ContractVersion(v.identity, v.address, 1, None, None))


def test_same_name_two_deployers(tmp_path):
    write_family(tmp_path, family(deployer=DEP, n=2))
    write_family(tmp_path, family(deployer=DEP2, n=3, start=10))
    assert version_counts(tmp_path) == {("Foo", DEP): 2, ("Foo", DEP2): 3}


def test_read_skips_foreign_files(tmp_path, caplog):
    write_family(tmp_path, family())
    (tmp_path / "Foo" / DEP / "README.md").write_text("notes")
    (tmp_path / "Foo" / DEP / f"{addr(99)}_Bar_V1.sol").write_text("contract Bar {}")
    fams = list(read_families(tmp_path))
    assert len(fams) == 1 and len(fams[0]) == 3
    assert "README.md" in caplog.text


def test_round_trip(tmp_path):
    originals = [family("B", n=2), family("A", n=4, start=20)]
    for fam in originals:
        write_family(tmp_path, fam)
    loaded = list(read_families(tmp_path))
    assert [f.identity.name for f in loaded] == ["A", "B"]
    for fam in loaded:
        orig = next(o for o in originals if o.identity == fam.identity)
        assert [(v.address, v.version_index, v.source.source_text) for v in fam.versions] == \
               [(v.address, v.version_index, v.source.source_text) for v in orig.versions]


def test_version_index_sorted_numerically(tmp_path):
    write_family(tmp_path, family(n=12))
    assert [v.version_index for v in next(read_families(tmp_path)).versions] == list(range(1, 13))


def test_concurrent_identical_writers(tmp_path):
    fam = family(n=20)
    errors = []

    def work():
        try:
            write_family(tmp_path, fam)
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert version_counts(tmp_path) == {("Foo", DEP): 20}
    assert not list(tmp_path.rglob(".tmp-*"))


def test_iter_sanctuary(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / f"{addr(2)}_B.sol").write_text("")
    (tmp_path / f"{addr(1)}_A.sol").write_text("")
    (tmp_path / "junk.sol").write_text("")
    assert iter_sanctuary(tmp_path) == [(addr(1), "A"), (addr(2), "B")]


def test_version_path_lowercases(tmp_path):
    v = family(deployer=DEP.upper().replace("0X", "0x")).versions[0]
    assert DEP in str(version_path(tmp_path, v))

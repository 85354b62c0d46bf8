import dataclasses
import datetime as dt

import pytest
from hypothesis import given, strategies as st

from proverum.citizen_registry import (
    CitizenRecord,
    CitizenRegistry,
    ResidenceType,
    age_on,
    is_eligible,
    relocate,
    single_holder_violations,
)
from proverum.errors import DecodeError, DuplicateId, InvalidRecord, NotOwner, SameMunicipality, UnknownId

REF = dt.date(2020, 9, 27)


def person(pid="Uster-0001", muni="Uster", dob=dt.date(1980, 5, 1), **kw):
    return CitizenRecord(pid, "Keller", "Alice", dob, kw.pop("nationality", "CH"), muni, **kw)


def oracle_age(dob: dt.date, ref: dt.date) -> int:
    # count birthdays directly
    n = 0
    while True:
        try:
            birthday = dob.replace(year=dob.year + n + 1)
        except ValueError:
            birthday = dt.date(dob.year + n + 1, 3, 1)
        if birthday > ref:
            return n
        n += 1


@given(st.dates(dt.date(1900, 1, 1), dt.date(2020, 1, 1)), st.dates(dt.date(2000, 1, 1), dt.date(2040, 1, 1)))
def test_age_matches_birthday_count(dob, ref):
    if ref >= dob:
        assert age_on(dob, ref) == oracle_age(dob, ref)


@pytest.mark.parametrize("dob, eligible", [
    (dt.date(2002, 9, 27), True),   # 18th birthday on the reference date
    (dt.date(2002, 9, 28), False),  # one day short
    (dt.date(2002, 9, 26), True),
])
def test_voting_age_boundary(dob, eligible):
    assert is_eligible(person(dob=dob), "Uster", REF) is eligible


@pytest.mark.parametrize("change", [
    {"nationality": "DE"},
    {"residence_type": ResidenceType.SECONDARY},
    {"voting_restriction": True},
])
def test_exclusions(change):
    assert not is_eligible(dataclasses.replace(person(), **change), "Uster", REF)
    assert not is_eligible(person(), "Thun", REF)


def test_record_bytes_roundtrip_and_strictness():
    r = person()
    assert CitizenRecord.from_bytes(r.to_bytes()) == r
    with pytest.raises(DecodeError):
        CitizenRecord.from_bytes(b"s\x00\x00\x00\x01x")


@pytest.fixture
def uster(network):
    return CitizenRegistry(network, "Uster")


def test_crud_commits_digests_on_the_cantonal_channel(network, uster):
    uster.create_citizen("Uster", person())
    uster.update_citizen("Uster", dataclasses.replace(person(), first_name="Alicia"))
    uster.set_voting_restriction("Uster", "Uster-0001", True)
    network.commit()
    ops = [e.tx.operation for _, e in network.channel("canton-zurich").entries(valid=True)]
    assert ops == ["cr.create", "cr.update", "cr.restrict"]
    assert uster.get("Uster-0001").voting_restriction and uster.get("Uster-0001").first_name == "Alicia"
    assert uster.verify("Uster-0001")
    assert b"Alicia" not in network.orderer_visible_bytes()
    uster.delete_citizen("Uster", "Uster-0001")
    network.commit()
    assert "Uster-0001" not in uster
    assert uster.calls == 4


def test_registry_errors(uster):
    with pytest.raises(NotOwner):
        uster.create_citizen("Winterthur", person())
    uster.create_citizen("Uster", person())
    with pytest.raises(DuplicateId):
        uster.create_citizen("Uster", person())
    with pytest.raises(UnknownId):
        uster.update_citizen("Uster", person(pid="Uster-0099"))
    with pytest.raises(InvalidRecord):
        uster.create_citizen("Uster", person(pid="Uster-0002", muni="Thun"))
    with pytest.raises(InvalidRecord):
        uster.create_citizen("Uster", person(pid="Uster-0003", dob=dt.date(2030, 1, 1)))


def test_derive_eligible_filters(uster):
    uster.create_citizen("Uster", person())
    uster.create_citizen("Uster", person(pid="Uster-0002", dob=dt.date(2010, 1, 1)))
    uster.create_citizen("Uster", person(pid="Uster-0003", nationality="IT"))
    assert [v.record.local_person_id for v in uster.derive_eligible(REF)] == ["Uster-0001"]


def test_audit_and_repair(network, uster):
    uster.create_citizen("Uster", person())
    network.commit()
    peer = uster.collection.peers["Uster"][1]
    store = uster.collection.stores[peer]
    key = next(iter(store))
    store[key] = dataclasses.replace(store[key], value=dataclasses.replace(person(), first_name="Eve").to_bytes())
    assert uster.audit() == [(peer, key)]
    assert uster.repair_from_peer("Uster-0001")
    assert uster.audit() == []


def test_relocation_moves_the_single_holder(network):
    regs = {m: CitizenRegistry(network, m) for m in ("Uster", "Thun")}
    regs["Uster"].create_citizen("Uster", person())
    regs["Thun"].create_citizen("Thun", person(pid="Thun-0001", muni="Thun", dob=dt.date(1970, 1, 1)))
    network.commit()
    identity = person().identity()
    receipt = relocate(network, regs, "Uster", "Thun", "Uster-0001")
    network.commit()
    assert (receipt.old_id, receipt.new_id) == ("Uster-0001", "Thun-0002")
    assert "Uster-0001" not in regs["Uster"]
    moved = regs["Thun"].get("Thun-0002")
    assert moved.residence_municipality == "Thun" and moved.identity() == identity
    fed = network.federal_channel()
    assert fed.find_tx(receipt.transfer_tx).valid
    assert network.channel("canton-zurich").find_tx(receipt.purge_tx).valid
    assert single_holder_violations(regs.values(), [identity]) == []
    with pytest.raises(SameMunicipality):
        relocate(network, regs, "Thun", "Thun", "Thun-0002")
    with pytest.raises(UnknownId):
        relocate(network, regs, "Uster", "Thun", "Uster-0001")


def test_single_holder_violation_reported(network):
    regs = [CitizenRegistry(network, m) for m in ("Uster", "Thun")]
    regs[0].create_citizen("Uster", person())
    regs[1].create_citizen("Thun", person(pid="Thun-0001", muni="Thun"))
    assert len(single_holder_violations(regs, [])) == 1

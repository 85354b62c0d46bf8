import pytest

from proverum.encoding import sha256
from proverum.errors import NoOnChainDigest, NotAuthorized, UnknownKey
from proverum.privdata import (
    audit_collection,
    create_collection,
    onchain_digest,
    purge_private,
    put_private,
    verify_private,
)


@pytest.fixture
def coll(network):
    return create_collection(network, "shared", "Zurich", ["Zurich", "Uster"])


def test_put_replicates_to_every_member_peer(network, coll):
    digest = put_private(network, coll, "Zurich", "k", b"secret", "canton-zurich")
    network.commit()
    assert digest == sha256(b"secret")
    assert len(coll.stores) == 4
    assert all(store["k"].value == b"secret" for store in coll.stores.values())
    assert onchain_digest(network, coll, "Uster", "k", "canton-zurich") == (digest, True)
    assert verify_private(network, coll, "Uster", "k", "canton-zurich")


def test_orderer_sees_only_the_digest(network, coll):
    put_private(network, coll, "Zurich", "k", b"very-private-value", "canton-zurich")
    network.commit()
    assert b"very-private-value" not in network.orderer_visible_bytes()
    assert sha256(b"very-private-value") in network.orderer_visible_bytes()


def test_outsiders_are_refused(network, coll):
    with pytest.raises(NotAuthorized):
        put_private(network, coll, "Bern", "k", b"x", "canton-zurich")
    with pytest.raises(NotAuthorized):
        coll.read("Winterthur", "k")


def test_divergent_peer_copy_is_detected(network, coll):
    put_private(network, coll, "Zurich", "k", b"original", "canton-zurich")
    network.commit()
    peer = coll.peers["Zurich"][1]
    coll.stores[peer]["k"] = type(coll.stores[peer]["k"])(b"edited", sha256(b"edited"))
    assert not verify_private(network, coll, "Zurich", "k", "canton-zurich")
    assert verify_private(network, coll, "Zurich", "k", "canton-zurich", peer=coll.peers["Zurich"][0])
    assert audit_collection(network, coll, "Zurich", lambda key: "canton-zurich") == [(peer, "k")]


def test_unknown_digest_and_key(network, coll):
    with pytest.raises(NoOnChainDigest):
        verify_private(network, coll, "Zurich", "missing", "canton-zurich")
    with pytest.raises(UnknownKey):
        purge_private(network, coll, "Zurich", "missing", "canton-zurich")


def test_purge_is_local_to_the_caller_and_tombstones(network, coll):
    put_private(network, coll, "Zurich", "k", b"v", "canton-zurich")
    network.commit()
    receipt = purge_private(network, coll, "Zurich", "k", "canton-zurich")
    network.commit()
    assert coll.read("Zurich", "k") is None
    assert coll.read("Uster", "k") == b"v"
    assert onchain_digest(network, coll, "Zurich", "k", "canton-zurich") == (receipt.digest, False)
    entry = network.channel("canton-zurich").find_tx(receipt.tx_id)
    assert entry.valid

import pytest

from smsc.catalogue import (
    Catalogue,
    CatalogueEntry,
    CellProfile,
    load_checkpoint,
    save_checkpoint,
)
from smsc.errors import PolicyError, SelfRegistration, TrustedQueryWithoutContext
from smsc.governance import PolicyStore, UpdateKind, make_update


def profile(cid, contexts=("work",), caps=("ring",), kind="call-filter",
            tick=0, ttl=10):
    return CellProfile(
        cell_id=cid,
        endpoint=cid,
        contexts=frozenset(contexts),
        capabilities=frozenset(caps),
        resource_kind=kind,
        advertised_at_tick=tick,
        ttl_ticks=ttl,
    )


def test_profile_validation_and_wire():
    with pytest.raises(PolicyError):
        profile("a", contexts=())
    with pytest.raises(PolicyError):
        profile("a", ttl=0)
    p = profile("a", contexts=("b", "a"), caps=("y", "x"))
    assert CellProfile.from_wire(p.to_wire()) == p
    assert p.to_wire()["contexts"] == ["a", "b"]


def test_owner_cannot_register_itself():
    cat = Catalogue("me")
    with pytest.raises(SelfRegistration):
        cat.upsert(profile("me"), 0)


def test_trust_derivation():
    cat = Catalogue("me", {"work": ["ring", "text"], "home": []})
    entry = cat.upsert(profile("a", contexts=("work", "home", "lab"),
                               caps=("ring", "text", "extra")), 0)
    assert entry.trusted == {"work": True, "home": True, "lab": False}
    # missing a required capability
    entry = cat.upsert(profile("b", caps=("ring",)), 0)
    assert not entry.trusted_in("work")
    assert not entry.trusted_anywhere()


def test_ttl_is_strict():
    cat = Catalogue("me")
    cat.upsert(profile("a", tick=10, ttl=5), now=10)
    assert cat.expire_stale(15) == []          # 10 + 5 == 15, still alive
    assert cat.get("a") is not None
    assert cat.expire_stale(16) == ["a"]       # 10 + 5 < 16
    assert cat.get("a") is None


def test_touch_refreshes_but_never_rewinds():
    cat = Catalogue("me")
    cat.upsert(profile("a", ttl=5), now=10)
    cat.touch("a", 12)
    assert cat.get("a").last_seen_tick == 12
    cat.touch("a", 3)
    assert cat.get("a").last_seen_tick == 12
    cat.touch("ghost", 99)  # unknown ids are ignored
    assert cat.expire_stale(17) == []
    assert cat.expire_stale(18) == ["a"]


def test_fresh_advert_readmits_after_eviction():
    cat = Catalogue("me")
    cat.upsert(profile("a", ttl=2), now=0)
    cat.expire_stale(5)
    assert cat.get("a") is None
    cat.upsert(profile("a", ttl=2), now=5)
    assert cat.get("a").last_seen_tick == 5


def test_query_filters_and_order():
    cat = Catalogue("me", {"work": ["ring"]})
    cat.upsert(profile("zeta", caps=("ring",)), 0)
    cat.upsert(profile("alpha", caps=("ring", "text")), 0)
    cat.upsert(profile("mid", contexts=("home",), caps=("ring",)), 0)
    ids = [e.profile.cell_id for e in cat.query()]
    assert ids == ["alpha", "mid", "zeta"]
    ids = [e.profile.cell_id for e in cat.query(context="work")]
    assert ids == ["alpha", "zeta"]
    ids = [e.profile.cell_id for e in cat.query(capability="text")]
    assert ids == ["alpha"]
    ids = [e.profile.cell_id for e in cat.query(context="work", trusted_only=True)]
    assert ids == ["alpha", "zeta"]
    ids = [e.profile.cell_id for e in cat.query(context="home", trusted_only=True)]
    assert ids == []
    with pytest.raises(TrustedQueryWithoutContext):
        cat.query(trusted_only=True)


def test_set_trust_policy_rederives_existing_entries():
    cat = Catalogue("me", {"work": ["ring"]})
    cat.upsert(profile("a", caps=("ring",)), 0)
    assert cat.trusted_partners() == ["a"]
    cat.set_trust_policy({"work": ["ring", "text"]})
    assert cat.trusted_partners() == []
    cat.set_trust_policy({"work": []})
    assert cat.trusted_partners() == ["a"]


def test_checkpoint_file_round_trip(tmp_path):
    cat = Catalogue("me", {"work": ["ring"]})
    cat.upsert(profile("a"), 3)
    cat.upsert(profile("b", contexts=("home",)), 4)
    store = PolicyStore()
    store.apply_update(
        make_update("org", 0, UpdateKind.BLOCKLIST_ADD, "bad-host", ["work"], 0)
    )
    path = str(tmp_path / "checkpoint.json")
    save_checkpoint(path, cat, store)

    cat2, store2 = load_checkpoint(path, "me", {"work": ["ring"]})
    assert cat2.to_wire() == cat.to_wire()
    assert store2.to_wire() == store.to_wire()
    assert store2.content_digest() == store.content_digest()
    # no stray temp file left behind
    assert sorted(p.name for p in tmp_path.iterdir()) == ["checkpoint.json"]


def test_checkpoint_version_gate(tmp_path):
    from smsc.catalogue import checkpoint_from_wire

    with pytest.raises(PolicyError):
        checkpoint_from_wire({"version": 99}, "me")


def test_entry_wire_round_trip():
    entry = CatalogueEntry(profile("a"), 7, {"work": True, "home": False})
    assert CatalogueEntry.from_wire(entry.to_wire()) == entry

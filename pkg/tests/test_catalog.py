import time

import pytest

from kahlerlab import catalog
from kahlerlab.config import ScenarioConfig

from conftest import REQUIRED_IDS

# long sphere runs are exercised by the flow and acceptance tests
HEAVY = {"kr_flow", "ding_flow", "flow_monotonicity", "stability_probe"}


def test_ids_are_unique_and_anchored():
    ids = [i.id for i in catalog.CATALOG]
    assert len(ids) == len(set(ids))
    assert all(i.anchor and i.suite in catalog.SUITES for i in catalog.CATALOG)
    assert all(set(i.backends) <= set(catalog.ALL) for i in catalog.CATALOG)


def test_required_identities_are_listed():
    listed = {e["id"] for e in catalog.list_suites()}
    assert set(REQUIRED_IDS) <= listed


def test_listing_is_stable():
    assert catalog.list_suites() == catalog.list_suites()
    assert [e["id"] for e in catalog.list_suites()] == [i.id for i in catalog.CATALOG]


def test_resolve_by_suite_id_and_all():
    ricci = catalog.resolve(["ricci"], "torus2")
    assert [i.id for i in ricci] == sorted(i.id for i in ricci)
    assert {i.suite for i in ricci} == {"ricci"}
    assert [i.id for i in catalog.resolve(["weitzenboeck"], "sphere")] == ["weitzenboeck"]
    every = catalog.resolve(["all"], "sphere")
    assert len(every) == sum("sphere" in i.backends for i in catalog.CATALOG)
    assert catalog.resolve(["ricci", "ricci_form_routes"], "torus2") == ricci


def test_unknown_names():
    with pytest.raises(KeyError, match="did you mean 'fano'"):
        catalog.resolve(["fanno"], "sphere")
    assert catalog.suggest("weil_peterson_form") == "weil_petersson_form"
    assert catalog.suggest("zzzzzz") is None


def test_unsupported_backend_is_rejected():
    ctx = catalog.RunContext(ScenarioConfig(backend="torus4"), 0)
    with pytest.raises(ValueError, match="does not run"):
        catalog.BY_ID["berndtsson_gap"].run(ctx)


CASES = [(b, i.id) for b in catalog.ALL for i in catalog.CATALOG if b in i.backends and i.id not in HEAVY]


@pytest.mark.parametrize("backend, ident", CASES, ids=[f"{b}-{i}" for b, i in CASES])
def test_every_identity_passes_on_seed_one(backend, ident):
    ctx = catalog.RunContext(ScenarioConfig(backend=backend), 1)
    t0 = time.perf_counter()
    rep = catalog.BY_ID[ident].run(ctx)
    assert rep.id == ident and rep.seed == 1
    assert rep.runtime <= time.perf_counter() - t0 + 1e-9
    assert rep.passed, (rep.linf, rep.tolerance, rep.details)

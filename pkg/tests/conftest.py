from __future__ import annotations

import pytest

from wsnsync.simulate import collision_scenario, greenhouse_scenario, run, write_outputs
from wsnsync.store import ServerStore


def clone(store: ServerStore) -> ServerStore:
    """Session-scoped run fixtures are shared; mutate a clone, not the original."""
    dup = ServerStore(store.kind)
    for p in store.packets():
        dup.insert(p)
    return dup


@pytest.fixture(scope="session")
def field_run():
    """One greenhouse-preset run, shared read-only across the session."""
    return run(greenhouse_scenario())


@pytest.fixture(scope="session")
def collision_run():
    return run(collision_scenario())


@pytest.fixture(scope="session")
def field_out(tmp_path_factory):
    """A full output directory for the greenhouse preset (fresh run, so later
    store mutations elsewhere cannot leak into the files)."""
    out = tmp_path_factory.mktemp("field")
    write_outputs(run(greenhouse_scenario()), out, request_log=True)
    return out

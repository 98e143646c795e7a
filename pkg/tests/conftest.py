from __future__ import annotations

import pytest

from redledger.simulator import Identities, Network

#: One fixed identity set for the whole session; key derivation is
#: deterministic and regenerating keys per test buys nothing.
FIXED_SEED = bytes(range(32))


@pytest.fixture(scope="session")
def identities() -> Identities:
    return Identities.from_seed(FIXED_SEED, n_endorsers=3, n_requesters=2)


@pytest.fixture
def network(tmp_path, identities) -> Network:
    net = Network(
        tmp_path / "ledger.bin",
        identities=identities,
        endorsement_threshold=2,
        redaction_threshold=1,
        rng_seed=0,
    )
    yield net
    net.close()


def make_network(tmp_path, identities, **kwargs) -> Network:
    kwargs.setdefault("endorsement_threshold", 2)
    kwargs.setdefault("redaction_threshold", 1)
    kwargs.setdefault("rng_seed", 0)
    return Network(tmp_path / "ledger.bin", identities=identities, **kwargs)

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rotvlasov.config import SolverConfig, build_bundle
from rotvlasov.solver import ContinuationConfig, continuation


@pytest.fixture(scope="session")
def bundle():
    return build_bundle(SolverConfig())


@pytest.fixture(scope="session")
def profile(bundle):
    return bundle.profile


@pytest.fixture(scope="session")
def params(bundle):
    return bundle.params


@pytest.fixture(scope="session")
def space(bundle):
    return bundle.space


@pytest.fixture(scope="session")
def basis(bundle):
    return bundle.space.basis


@pytest.fixture(scope="session")
def ctx(bundle):
    return bundle.ctx


@pytest.fixture(scope="session")
def ops(bundle):
    return bundle.ops


@pytest.fixture(scope="session")
def continuation_cfg(bundle):
    return ContinuationConfig(omega_max=0.5 * bundle.omega_cap, omega_steps=8)


@pytest.fixture(scope="session")
def continuation_run(bundle, continuation_cfg):
    states, manifest = continuation(bundle.ctx, bundle.ops, continuation_cfg)
    return states, manifest


@pytest.fixture(scope="session")
def rot_state(continuation_run):
    states, _ = continuation_run
    return states[-1]

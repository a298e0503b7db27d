import sys
from pathlib import Path

import pytest

# make tests/oracles.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def cfg16():
    from spinfpe import ladder

    return ladder.LadderConfig(rungs=8, rung_coupling=0.2)


@pytest.fixture(scope="session")
def basis16(cfg16):
    from spinfpe import ladder

    return ladder.build_basis(cfg16)


@pytest.fixture(scope="session")
def v16(cfg16, basis16):
    from spinfpe import ladder

    return ladder.build_v(basis16, cfg16)


@pytest.fixture(scope="session")
def cfb16(cfg16, basis16):
    from spinfpe import spectral

    return spectral.chain_factorize_h0(cfg16, basis16)


@pytest.fixture(scope="session")
def rot01_16(cfb16, v16):
    """Dirac-picture V block for the X=0 to X=1 transition at N=16."""
    from spinfpe import spectral

    return spectral.dirac_rotate_v_block(cfb16, v16, 0, 1)

import os
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# keep the census cache out of the user's home unless they point us at one
if "SUCSIM_CACHE_DIR" not in os.environ:
    import tempfile

    os.environ["SUCSIM_CACHE_DIR"] = os.path.join(tempfile.gettempdir(), "sucsim-test-cache")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def library():
    from sucsim.sbox import enumerate_involutive_optimal

    return enumerate_involutive_optimal()


@pytest.fixture
def rng():
    return random.Random(0x5EED)


@pytest.fixture
def trng():
    from sucsim.trng import Trng

    return Trng(bytes(range(32)))


@pytest.fixture(scope="session")
def i_spec(library):
    from sucsim.genie import sample_instance
    from sucsim.trng import Trng

    return sample_instance("i", Trng(b"\x01" * 32), library)


@pytest.fixture(scope="session")
def ni_spec(library):
    from sucsim.genie import sample_instance
    from sucsim.trng import Trng

    return sample_instance("ni", Trng(b"\x02" * 32), library)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from __future__ import annotations

import pytest

from kummer.numeric import NumericContext


@pytest.fixture(scope="session")
def exact() -> NumericContext:
    return NumericContext("exact")


@pytest.fixture(scope="session")
def mp50() -> NumericContext:
    return NumericContext("mp", digits=50)

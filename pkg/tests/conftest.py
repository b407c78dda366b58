import random

import pytest

from ddemos.crypto.groups import GroupParams
from ddemos.crypto.signatures import KeyPair


@pytest.fixture(scope="session")
def tg():
    """Small test group; exponents can be brute-forced."""
    return GroupParams.named("test", 9)


@pytest.fixture(scope="session")
def ecg():
    return GroupParams.named("secp256k1", 9)


@pytest.fixture
def rng():
    return random.Random(20240601)


@pytest.fixture(scope="session")
def dealer():
    return KeyPair.from_seed(bytes(range(32)))

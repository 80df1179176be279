import random

import pytest
from hypothesis import settings

from tracksmith.synth import random_piece

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def pieces(rng, count, **kwargs):
    """Stream of canonical random pieces for loop-style fuzzing."""
    for _ in range(count):
        yield random_piece(rng, **kwargs)

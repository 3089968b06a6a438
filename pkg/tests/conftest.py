import pytest

from adreskit.data import default_schema, generate_dataset, split_dataset
from adreskit.encoding import build_vocab


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def small_corpus(schema):
    return generate_dataset(seed=42, size=80, schema=schema)


@pytest.fixture(scope="session")
def small_splits(small_corpus):
    return split_dataset(small_corpus, seed=1)


@pytest.fixture(scope="session")
def small_vocab(small_splits):
    return build_vocab(small_splits.train)

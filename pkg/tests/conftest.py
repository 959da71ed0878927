import numpy as np
import pytest

from slidecompress.config import RunConfig
from slidecompress.dataset import FeatureStore, write_dataset
from slidecompress.model import ModelBundle, make_encoder
from slidecompress.synth import MARKER_IDENTITY, generate_dataset
from slidecompress.tensor import set_default_dtype
from slidecompress.trainer import dataset_vocabulary, make_samples

# Six slides per tumor type, so every type has one val and one test slide.
TINY = dict(
    d_h=8,
    d_f=6,
    heads=2,
    n_cmp=1,
    n_dec=2,
    l_c=4,
    n_categories=8,
    n_slides=60,
    grid='4x4',
    patch_px=4,
    marker_rarity=0.1,
    templates=MARKER_IDENTITY,
    context=64,
    max_new_tokens=6,
    peak_lr=1e-3,
    warmup_steps=1,
    total_steps=3,
    accum_steps=2,
    epochs=1,
    pretrain_steps=3,
    pretrain_warmup=1,
    hint_prob=0.5,
    init_layers=1,
    checkpoint_every=2,
    log_every=1,
    random_k=3,
    mil_hidden=4,
    bench_warmup=1,
    bench_samples=2,
)


@pytest.fixture(autouse=True)
def float64_default():
    set_default_dtype('float64')
    yield
    set_default_dtype('float64')


@pytest.fixture
def tiny_config(tmp_path):
    return RunConfig(
        data_dir=str(tmp_path / 'data'),
        checkpoint_dir=str(tmp_path / 'checkpoints'),
        **TINY
    )


@pytest.fixture
def tiny_dataset(tiny_config):
    """``(config, manifest, vocab)`` with the dataset and vocabulary
    written to ``config.data_dir``."""
    manifest, features, _ = generate_dataset(tiny_config, make_encoder(tiny_config))
    write_dataset(manifest, tiny_config.data_dir, features)
    vocab = dataset_vocabulary(tiny_config)
    vocab.save(tiny_config.vocab_path)
    return tiny_config, manifest, vocab


@pytest.fixture
def tiny_samples(tiny_dataset):
    config, manifest, vocab = tiny_dataset
    store = FeatureStore(config.data_dir, manifest)
    return make_samples(manifest, store, vocab, 'test')


@pytest.fixture
def tiny_bundle(tiny_dataset):
    config, _, vocab = tiny_dataset
    return ModelBundle.build(config, len(vocab))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

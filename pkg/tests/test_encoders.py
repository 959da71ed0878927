import numpy as np
import pytest

from slidecompress.config import RunConfig
from slidecompress.decoder import answer_text, prompt_text, scaffold_texts
from slidecompress.encoders import (
    BOS,
    EOS,
    PAD,
    UNK,
    FrozenVisualEncoder,
    Projector,
    Vocabulary,
    build_vocabulary,
    embed_text,
    normalize_text,
    tokenize_generated,
)
from slidecompress.errors import LengthError, ShapeError
from slidecompress.nn import EmbeddingTable
from slidecompress.synth import (
    TEMPLATES,
    Patch,
    generate_qa,
    generate_slide,
    slide_spec_for,
    template_corpus,
)
from slidecompress.trainer import dataset_vocabulary


def test_encoder_is_deterministic_and_orthonormal():
    a = FrozenVisualEncoder.create(4, 6, seed=3)
    b = FrozenVisualEncoder.create(4, 6, seed=3)
    assert np.array_equal(a.projection.data, b.projection.data)
    q = a.projection.data
    assert np.allclose(q.T @ q, np.eye(6))
    assert (a.patch_px, a.d_f) == (4, 6)
    assert not a.projection.requires_grad


def test_encode_patches(rng):
    encoder = FrozenVisualEncoder.create(4, 6, seed=0)
    patches = [Patch(rng.random((4, 4, 3))) for _ in range(5)]
    features = encoder.encode_patches(patches)
    assert features.shape == (5, 6)
    expected = patches[2].pixels.reshape(-1) @ encoder.projection.data
    assert np.allclose(features.data[2], expected)


def test_encode_patches_rejects_mixed_sizes(rng):
    encoder = FrozenVisualEncoder.create(4, 6, seed=0)
    with pytest.raises(ShapeError):
        encoder.encode_patches([Patch(rng.random((4, 4, 3))), Patch(rng.random((8, 8, 3)))])
    with pytest.raises(ShapeError):
        encoder.encode_patches([Patch(rng.random((8, 8, 3)))])


def test_projector_width_checked(rng):
    projector = Projector.init(rng, 6, 8)
    assert projector(np.ones((3, 6))).shape == (3, 8)
    with pytest.raises(ShapeError):
        projector(np.ones((3, 5)))


def test_vocabulary_reserves_special_ids():
    vocab = Vocabulary(['stroma', 'mucin'])
    assert vocab.tokens[:4] == ['<pad>', '<bos>', '<eos>', '<unk>']
    assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)
    assert vocab.id_of('stroma') == 4
    assert vocab.id_of('unknown') == UNK


def test_tokenize_splits_punctuation_and_lowercases():
    vocab = build_vocabulary(['A. Stroma?'])
    ids = vocab.tokenize('a. STROMA?')
    assert [vocab.word_of(i) for i in ids] == ['a', '.', 'stroma', '?']
    assert vocab.detokenize([BOS] + ids + [EOS, PAD]) == 'a . stroma ?'


def test_vocabulary_save_load(tmp_path):
    vocab = build_vocabulary(['which tissue pattern', 'B. mucin'])
    path = str(tmp_path / 'vocab.txt')
    vocab.save(path)
    assert Vocabulary.load(path) == vocab


def test_unknown_generator_words_warn():
    vocab = build_vocabulary(['stroma'])
    with pytest.warns(UserWarning):
        ids = tokenize_generated(vocab, 'stroma keratin')
    assert ids[-1] == UNK


def test_embed_text_adds_positions(rng):
    tokens = EmbeddingTable.init(rng, 10, 4)
    positions = EmbeddingTable.init(rng, 3, 4)
    out = embed_text([5, 6], tokens, positions)
    assert np.allclose(out.data[1], tokens.rows.data[6] + positions.rows.data[1])
    with pytest.raises(LengthError):
        embed_text([5, 6, 7, 8], tokens, positions)


@pytest.mark.parametrize('n_categories', [4, 12, 16])
def test_generator_text_round_trips(n_categories):
    vocab = dataset_vocabulary(RunConfig(n_categories=n_categories))
    spec = slide_spec_for(3, RunConfig(n_categories=n_categories, grid='4x4', patch_px=4))
    _, metadata = generate_slide(spec)
    records = [generate_qa(metadata, template, seed) for template in TEMPLATES
               for seed in range(5)]
    texts = template_corpus(n_categories) + scaffold_texts()
    texts += [prompt_text(record) for record in records]
    texts += [answer_text(record) for record in records]
    for text in texts:
        ids = vocab.tokenize(text)
        assert UNK not in ids
        assert vocab.detokenize(ids) == normalize_text(text)

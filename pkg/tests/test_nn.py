import numpy as np
import pytest

from slidecompress.errors import ConfigurationError, ShapeError
from slidecompress.gradcheck import check_gradients
from slidecompress.nn import (
    AttentionParams,
    EmbeddingTable,
    Linear,
    TransformerLayer,
    causal_mask,
    copy_parameters,
    embed,
    full_mask,
    mha_forward,
    transformer_layer_forward,
)
from slidecompress.tensor import Tensor, backward, mul, sum


def test_causal_mask():
    assert causal_mask(3).tolist() == [
        [True, False, False],
        [True, True, False],
        [True, True, True],
    ]
    assert full_mask(2).all()
    with pytest.raises(ValueError):
        causal_mask(0)


def test_causal_attention_ignores_future_rows(rng):
    params = AttentionParams.init(rng, 8, 2, std=0.5)
    x = rng.normal(size=(5, 8))
    changed = x.copy()
    changed[4] += 10.0
    a = mha_forward(Tensor(x), params, causal_mask(5)).data
    b = mha_forward(Tensor(changed), params, causal_mask(5)).data
    assert np.array_equal(a[:4], b[:4])
    assert not np.allclose(a[4], b[4])


def test_attention_heads_must_divide_width(rng):
    with pytest.raises(ConfigurationError):
        AttentionParams.init(rng, 6, 4)


def test_attention_mask_shape_checked(rng):
    params = AttentionParams.init(rng, 4, 1)
    with pytest.raises(ShapeError):
        mha_forward(Tensor(np.zeros((3, 4))), params, causal_mask(2))


def test_transformer_layer_preserves_shape(rng):
    layer = TransformerLayer.init(rng, 8, 4)
    y = layer(Tensor(rng.normal(size=(6, 8))), full_mask(6))
    assert y.shape == (6, 8)
    names = [name for name, _ in layer.named_parameters('layer')]
    assert names[:4] == [
        'layer.attention.w_q', 'layer.attention.w_k',
        'layer.attention.w_v', 'layer.attention.w_o',
    ]
    assert 'layer.mlp_out.bias' in names


def test_linear_shapes(rng):
    linear = Linear.init(rng, 3, 5)
    assert (linear.d_in, linear.d_out) == (3, 5)
    assert linear(Tensor(np.ones((2, 3)))).shape == (2, 5)


def test_embed_gathers_rows(rng):
    table = EmbeddingTable.init(rng, 10, 4)
    out = embed([3, 3, 7], table)
    assert np.array_equal(out.data[0], table.rows.data[3])
    assert np.array_equal(out.data[2], table.rows.data[7])


def test_copy_parameters_copies_values_not_storage(rng):
    source = TransformerLayer.init(rng, 8, 2)
    target = TransformerLayer.init(rng, 8, 2)
    copy_parameters(source, target)
    for (_, a), (_, b) in zip(source.named_parameters(), target.named_parameters()):
        assert np.array_equal(a.data, b.data)
        assert a.data is not b.data
    target.attention.w_q.data[0, 0] += 1.0
    assert source.attention.w_q.data[0, 0] != target.attention.w_q.data[0, 0]


def test_copy_parameters_rejects_other_widths(rng):
    with pytest.raises(ConfigurationError):
        copy_parameters(TransformerLayer.init(rng, 8, 2), TransformerLayer.init(rng, 4, 2))


def single_head(w_q, w_k, w_v, w_o):
    return AttentionParams(*(Tensor(np.asarray(w, dtype=float)) for w in (w_q, w_k, w_v, w_o)),
                           heads=1)


def test_zero_scores_average_the_values(rng):
    d = 4
    params = single_head(np.zeros((d, d)), np.zeros((d, d)), np.eye(d), np.eye(d))
    x = rng.normal(size=(5, d))
    out = mha_forward(Tensor(x), params, full_mask(5)).data
    assert np.allclose(out, np.tile(x.mean(axis=0), (5, 1)), rtol=0, atol=1e-12)


def test_single_row_attends_to_itself(rng):
    params = AttentionParams.init(rng, 8, 2, std=0.5)
    x = rng.normal(size=(1, 8))
    out = mha_forward(Tensor(x), params, full_mask(1)).data
    expected = x @ params.w_v.data @ params.w_o.data
    assert np.allclose(out, expected, rtol=0, atol=1e-12)


def test_full_attention_is_permutation_equivariant(rng):
    params = AttentionParams.init(rng, 8, 2, std=0.5)
    x = rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    out = mha_forward(Tensor(x), params, full_mask(6)).data
    permuted = mha_forward(Tensor(x[perm]), params, full_mask(6)).data
    assert np.allclose(permuted, out[perm], rtol=0, atol=1e-12)


def test_layer_with_zero_output_projections_is_identity(rng):
    layer = TransformerLayer.init(rng, 8, 2, std=0.5)
    layer.attention.w_o.data[...] = 0.0
    layer.mlp_out.weight.data[...] = 0.0
    layer.mlp_out.bias.data[...] = 0.0
    x = rng.normal(size=(5, 8))
    for mask in (full_mask(5), causal_mask(5)):
        assert np.array_equal(layer(Tensor(x), mask).data, x)


@pytest.mark.parametrize('make_mask', [full_mask, causal_mask])
def test_transformer_layer_gradients_match_finite_differences(rng, make_mask):
    layer = TransformerLayer.init(rng, 8, 2, std=0.3)
    x = Tensor(rng.normal(size=(4, 8)), requires_grad=True)
    weights = Tensor(rng.normal(size=(4, 8)))

    def loss_fn():
        return sum(mul(transformer_layer_forward(x, layer, make_mask(4)), weights))

    named = [('x', x)] + list(layer.named_parameters('layer'))
    errors = check_gradients(loss_fn, named)
    assert max(errors.values()) < 1e-4


def test_repeated_ids_scatter_summed_gradient(rng):
    table = EmbeddingTable.init(rng, 6, 4)
    backward(sum(embed([3, 3], table)))
    expected = np.zeros((6, 4))
    expected[3] = 2.0
    assert np.array_equal(table.rows.grad, expected)

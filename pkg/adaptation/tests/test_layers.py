import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from adaptation.engine.layers import (
    UNK_ID, BiLSTMEncoder, DropoutSpec, EmbeddingTable, FeedForward, embed, encode, ffn_forward,
)
from adaptation.engine.tensor import Tensor, parameter, reduce_sum
from adaptation.exceptions import DataError, ShapeError
from adaptation.tests.helpers import WORDS, GradientCheckMixin, tiny_model, tiny_table


def weighted_sum(out, seed=3):
    return reduce_sum(out * Tensor(np.random.default_rng(seed).normal(size=out.shape)))


class EmbeddingTableTestCase(SimpleTestCase):
    """Test cases for the embedding table."""

    def setUp(self):
        """Set up test data."""
        self.table = tiny_table(d_e=4)

    def test_unknown_column_is_reserved(self):
        """Test that column 0 is the zero UNK vector and words follow in order."""
        self.assertEqual(self.table.V, len(WORDS) + 1)
        self.assertEqual(self.table.d_e, 4)
        np.testing.assert_array_equal(self.table.W.data[:, UNK_ID], np.zeros(4))
        self.assertEqual(self.table.ids_for(['good', 'zebra']), [1, UNK_ID])

    def test_embed_returns_columns(self):
        """Test that embed returns W[:, id] for every token."""
        out = embed([1, 3], self.table)
        self.assertEqual(out.shape, (2, 4))
        np.testing.assert_array_equal(out.data[1], self.table.W.data[:, 3])

    def test_out_of_range_id(self):
        """Test that ids outside the vocabulary are refused."""
        with self.assertRaises(DataError):
            embed([self.table.V], self.table)

    def test_frozen_table_does_not_track(self):
        """Test that a frozen table is not a trainable parameter."""
        self.assertFalse(self.table.W.requires_grad)
        self.assertTrue(tiny_table(trainable=True).W.requires_grad)


class BiLSTMEncoderTestCase(GradientCheckMixin, SimpleTestCase):
    """Test cases for the view encoder."""

    def setUp(self):
        """Set up test data."""
        self.table = tiny_table(d_e=4)
        self.encoder = BiLSTMEncoder(4, 2, np.random.default_rng(5), 'F_test')

    def test_output_shape(self):
        """Test that one utterance maps to a d_h vector and a batch to (B, d_h)."""
        self.assertEqual(encode([1, 2, 3], self.table, self.encoder).shape, (2,))
        self.assertEqual(self.encoder.encode_batch([[1], [2, 3, 4]], self.table).shape, (2, 2))

    def test_encoder_gradients(self):
        """Test encoder parameter gradients on a length-3 input against finite differences."""
        params = list(self.encoder.parameters().values())
        self.assertGradientsMatch(lambda: weighted_sum(encode([1, 4, 2], self.table, self.encoder)), params)

    def test_last_pooling_gradients(self):
        """Test gradients of the last-step pooling mode on a padded batch."""
        encoder = BiLSTMEncoder(4, 2, np.random.default_rng(6), 'F_last', pooling='last')
        params = list(encoder.parameters().values())
        self.assertGradientsMatch(
            lambda: weighted_sum(encoder.encode_batch([[1, 2], [3, 4, 5]], self.table)), params)

    def test_trainable_embedding_gradients(self):
        """Test that a trainable table receives correct gradients through a padded batch."""
        table = tiny_table(d_e=4, trainable=True)
        self.assertGradientsMatch(
            lambda: weighted_sum(self.encoder.encode_batch([[1, 2, 1], [5]], table)), [table.W])

    def test_batch_matches_single_encoding(self):
        """Test that padding does not change any sequence's encoding."""
        sequences = [[1, 2, 3, 4], [5], [6, 7]]
        batch = self.encoder.encode_batch(sequences, self.table).data
        for row, seq in enumerate(sequences):
            np.testing.assert_allclose(batch[row], encode(seq, self.table, self.encoder).data, atol=1e-12)

    def test_batch_order_is_irrelevant(self):
        """Test that permuting the batch permutes the output rows."""
        sequences = [[1, 2, 3], [4], [5, 6], [7, 8, 9, 10]]
        order = [2, 0, 3, 1]
        batch = self.encoder.encode_batch(sequences, self.table).data
        permuted = self.encoder.encode_batch([sequences[i] for i in order], self.table).data
        np.testing.assert_allclose(permuted, batch[order], atol=1e-12)

    def test_empty_inputs(self):
        """Test that empty sequences and empty batches raise DataError."""
        with self.assertRaises(DataError):
            encode([], self.table, self.encoder)
        with self.assertRaises(DataError):
            self.encoder.encode_batch([[1], []], self.table)
        with self.assertRaises(DataError):
            self.encoder.encode_batch([], self.table)

    def test_dimension_mismatch(self):
        """Test that an embedding table of the wrong width is refused."""
        with self.assertRaises(ShapeError):
            encode([1], tiny_table(d_e=5), self.encoder)

    def test_dropout_only_with_generator(self):
        """Test that dropout is the identity without a generator and zeroes features with one."""
        spec = DropoutSpec(rate=0.5)
        clean = self.encoder.encode_batch([[1, 2]], self.table).data
        same = self.encoder.encode_batch([[1, 2]], self.table, spec, None).data
        np.testing.assert_array_equal(clean, same)
        dropped = self.encoder.encode_batch([[1, 2]] * 20, self.table, spec, np.random.default_rng(0)).data
        self.assertTrue(np.any(dropped == 0.0))

    def test_invalid_dropout_rate(self):
        """Test that a dropout rate of 1 is refused."""
        with self.assertRaises(ValueError):
            DropoutSpec(rate=1.0)


def sigmoid_value(x):
    return 1.0 / (1.0 + np.exp(-x))


class EncoderHandTraceTestCase(SimpleTestCase):
    """Test cases comparing the encoder with values computed by hand."""

    def setUp(self):
        """Set up test data."""
        self.table = EmbeddingTable.from_vectors(['x'], np.array([[0.5]]))
        self.encoder = BiLSTMEncoder(1, 1, np.random.default_rng(0), 'F_hand')

    def test_zero_weights_collapse_to_bias(self):
        """Test that an all-zero encoder outputs its projection bias."""
        for p in self.encoder.parameters().values():
            p.data = np.zeros_like(p.data)
        self.encoder.b_l.data = np.array([0.25])
        np.testing.assert_allclose(encode([1, 1, 0], self.table, self.encoder).data, [0.25])

    def test_single_cell_trace(self):
        """Test a length-1 input against one LSTM step per direction and the projection."""
        forward_x, forward_b = np.array([0.4, -0.3, 0.8, 1.2]), np.array([0.1, 0.0, -0.2, 0.3])
        backward_x, backward_b = np.array([-0.5, 0.2, 0.6, -0.9]), np.array([0.0, 0.1, 0.2, -0.1])
        self.encoder.forward_cell.W_x.data = forward_x.reshape(1, 4)
        self.encoder.forward_cell.b.data = forward_b
        self.encoder.backward_cell.W_x.data = backward_x.reshape(1, 4)
        self.encoder.backward_cell.b.data = backward_b
        self.encoder.W_l.data = np.array([[0.7, -1.1]])
        self.encoder.b_l.data = np.array([0.05])

        def cell(w_x, b, x=0.5):
            z = x * w_x + b
            c = sigmoid_value(z[0]) * np.tanh(z[3])
            return sigmoid_value(z[2]) * np.tanh(c)

        expected = 0.7 * cell(forward_x, forward_b) - 1.1 * cell(backward_x, backward_b) + 0.05
        np.testing.assert_allclose(encode([1], self.table, self.encoder).data, [expected], atol=1e-12)


class FeedForwardTestCase(GradientCheckMixin, SimpleTestCase):
    """Test cases for feed-forward heads."""

    def setUp(self):
        """Set up test data."""
        rng = np.random.default_rng(2)
        self.head = FeedForward(3, 4, 3, rng, 'C_test')
        self.critic = FeedForward(3, 4, 1, rng, 'D_test')
        # Biases lifted so no hidden unit sits near the relu kink.
        self.head.b1.data[:] = 0.3
        self.critic.b1.data[:] = 0.3
        self.features = parameter(rng.normal(size=(5, 3)))

    def test_probabilities(self):
        """Test that probability outputs are rows of a simplex."""
        probs = ffn_forward(self.features, self.head).data
        self.assertEqual(probs.shape, (5, 3))
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(5))

    def test_matches_direct_computation(self):
        """Test the head against matmul, relu, matmul and softmax written out in numpy."""
        x = self.features.data
        hidden = np.maximum(x @ self.head.W1.data + self.head.b1.data, 0.0)
        logits = hidden @ self.head.W2.data + self.head.b2.data
        expected = np.exp(logits - logits.max(axis=1, keepdims=True))
        expected /= expected.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(ffn_forward(self.features, self.head).data, expected, atol=1e-12)

    def test_zero_weights(self):
        """Test that an all-zero head is uniform and an all-zero critic outputs 0."""
        for p in list(self.head.parameters().values()) + list(self.critic.parameters().values()):
            p.data = np.zeros_like(p.data)
        np.testing.assert_allclose(ffn_forward(self.features, self.head).data, np.full((5, 3), 1.0 / 3.0))
        np.testing.assert_array_equal(ffn_forward(self.features, self.critic, 'scalar').data, np.zeros(5))

    def test_scalar_output(self):
        """Test that the scalar mode squeezes a width-1 head."""
        self.assertEqual(ffn_forward(self.features, self.critic, 'scalar').shape, (5,))
        with self.assertRaises(ShapeError):
            ffn_forward(self.features, self.head, 'scalar')

    def test_width_mismatch(self):
        """Test that an input of the wrong width raises ShapeError."""
        with self.assertRaises(ShapeError):
            ffn_forward(Tensor(np.ones((2, 4))), self.head)

    def test_gradients(self):
        """Test head gradients for every output mode."""
        params = list(self.head.parameters().values()) + [self.features]
        self.assertGradientsMatch(lambda: weighted_sum(self.head(self.features, 'logits')), params)
        self.assertGradientsMatch(lambda: weighted_sum(self.head(self.features)), params)
        critic_params = list(self.critic.parameters().values())
        self.assertGradientsMatch(lambda: weighted_sum(self.critic(self.features, 'scalar')), critic_params)


class FusionGateTestCase(GradientCheckMixin, SimpleTestCase):
    """Test cases for the gate that blends the two view features."""

    def setUp(self):
        """Set up test data."""
        self.model = tiny_model(d_h=3)
        self.model.W_u.data = np.random.default_rng(4).normal(size=self.model.W_u.shape)
        rng = np.random.default_rng(8)
        self.f_subj = parameter(rng.normal(size=(2, 3)))
        self.f_obj = parameter(rng.normal(size=(2, 3)))

    def test_gate_gradients(self):
        """Test fused-feature gradients for gate weights and both views."""
        params = [self.model.W_u, self.model.b_u, self.f_subj, self.f_obj]
        self.assertGradientsMatch(lambda: weighted_sum(self.model.fuse(self.f_subj, self.f_obj)[1]), params)

    def test_identical_views(self):
        """Test that fusing a feature with itself returns it unchanged."""
        _, fused = self.model.fuse(self.f_subj, self.f_subj)
        np.testing.assert_allclose(fused.data, self.f_subj.data, atol=1e-12)

    def test_shape_mismatch(self):
        """Test that views of different widths are refused."""
        with self.assertRaises(ShapeError):
            self.model.fuse(Tensor(np.ones(3)), Tensor(np.ones(4)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3,), elements=st.floats(-20, 20, allow_nan=False)),
           arrays(np.float64, (3,), elements=st.floats(-20, 20, allow_nan=False)))
    def test_fused_feature_is_between_views(self, subj, obj):
        """Test that the gate lies in [0, 1] and the fused feature between the two views."""
        gate, fused = self.model.fuse(Tensor(subj), Tensor(obj))
        self.assertTrue(np.all((gate.data >= 0.0) & (gate.data <= 1.0)))
        low, high = np.minimum(subj, obj), np.maximum(subj, obj)
        self.assertTrue(np.all(fused.data >= low - 1e-9))
        self.assertTrue(np.all(fused.data <= high + 1e-9))

    def test_fusion_properties_over_many_triples(self):
        """Test gate range, betweenness and the identical-view fixpoint on 10^5 random triples."""
        rng = np.random.default_rng(21)
        shape_u, shape_b = self.model.W_u.shape, self.model.b_u.shape
        # 100 gate draws x 1000 (f_subj, f_obj) pairs
        for _ in range(100):
            self.model.W_u.data = rng.normal(scale=3.0, size=shape_u)
            self.model.b_u.data = rng.normal(scale=3.0, size=shape_b)
            subj = rng.normal(scale=10.0, size=(1000, 3))
            obj = rng.normal(scale=10.0, size=(1000, 3))
            gate, fused = self.model.fuse(Tensor(subj), Tensor(obj))
            self.assertTrue(np.all((gate.data >= 0.0) & (gate.data <= 1.0)))
            self.assertTrue(np.all(fused.data >= np.minimum(subj, obj) - 1e-9))
            self.assertTrue(np.all(fused.data <= np.maximum(subj, obj) + 1e-9))
            _, same = self.model.fuse(Tensor(subj), Tensor(subj))
            np.testing.assert_allclose(same.data, subj, rtol=0, atol=1e-12)

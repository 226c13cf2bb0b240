import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from adaptation.engine.checkpoint import MAGIC, load_checkpoint, read_checkpoint, save_checkpoint
from adaptation.exceptions import DataError
from adaptation.tests.helpers import tiny_model, tiny_table


class CheckpointTestCase(SimpleTestCase):
    """Test cases for saving and loading trained models."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'run' / 'checkpoint.dan'
        self.batch = [[1, 2, 3], [4, 5], [0, 9]]

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        """Test that a reloaded model has the same variant, vocabulary and float32 weights."""
        model = tiny_model('dual', 'wasserstein', pooling='last')
        save_checkpoint(model, self.path)
        loaded = load_checkpoint(self.path)
        self.assertEqual(loaded.variant, 'D-WDGRL')
        self.assertEqual(loaded.config.pooling, 'last')
        self.assertEqual(loaded.config.d_h, model.config.d_h)
        self.assertEqual(loaded.table.vocabulary, model.table.vocabulary)
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(loaded.state_dict()[name], value.astype(np.float32))
        np.testing.assert_allclose(loaded.predict_batch(self.batch).data, model.predict_batch(self.batch).data,
                                   atol=1e-6)

    def test_every_variant(self):
        """Test that each view mode and aligner survives a round trip."""
        for view_mode, aligner in (('single', 'none'), ('dual-subj-only', 'coral'), ('dual-obj-only', 'h')):
            with self.subTest(view_mode=view_mode, aligner=aligner):
                model = tiny_model(view_mode, aligner)
                loaded = load_checkpoint(save_checkpoint(model, self.path))
                self.assertEqual(loaded.variant, model.variant)
                self.assertEqual(sorted(loaded.parameters()), sorted(model.parameters()))

    def test_trainable_table(self):
        """Test that a trainable embedding table is restored as trainable."""
        model = tiny_model(table=tiny_table(trainable=True))
        loaded = load_checkpoint(save_checkpoint(model, self.path))
        self.assertTrue(loaded.table.trainable)
        self.assertIn('embedding.W', loaded.main_parameters())

    def test_manifest(self):
        """Test the manifest header, hyperparameters and tensor offsets."""
        save_checkpoint(tiny_model(), self.path)
        self.assertTrue(self.path.read_bytes().startswith(MAGIC.encode('utf-8') + b'\n'))
        manifest, arrays = read_checkpoint(self.path)
        self.assertEqual(manifest.hyperparameters['view_mode'], 'dual')
        self.assertEqual(manifest.tensors[0][0], 'embedding.W')
        offset = 0
        for name, shape, start, nbytes in manifest.tensors:
            self.assertEqual(start, offset)
            self.assertEqual(arrays[name].shape, shape)
            offset += nbytes

    def test_malformed_files(self):
        """Test that missing files, foreign headers, truncated payloads and bad lines are refused."""
        with self.assertRaises(DataError):
            load_checkpoint(self.path)
        self.path.parent.mkdir(parents=True)
        self.path.write_bytes(b'something else\n')
        with self.assertRaises(DataError):
            read_checkpoint(self.path)

        save_checkpoint(tiny_model(), self.path)
        data = self.path.read_bytes()
        self.path.write_bytes(data[:-8])
        with self.assertRaises(DataError):
            read_checkpoint(self.path)

        self.path.write_bytes(MAGIC.encode('utf-8') + b'\nhyper\tonly-two\nend\n')
        with self.assertRaises(DataError):
            read_checkpoint(self.path)

        self.path.write_bytes(MAGIC.encode('utf-8') + b'\nhyper\td_e\t4\n')
        with self.assertRaises(DataError):
            read_checkpoint(self.path)

import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from adaptation.data.corpus import Corpus, Example, load_corpus, parse_stance, write_corpus
from adaptation.data.embeddings import (
    build_embedding_table, build_vocabulary, load_embeddings, read_embedding_file, write_embedding_file,
)
from adaptation.data.sampling import batch_indices, sample_batches
from adaptation.data.silver import (
    assign_silver_labels, load_subjectivity_corpus, read_silver_labels, train_silver_labeler,
    train_view_labelers, write_silver_labels,
)
from adaptation.data.synthetic import TARGET_SUFFIX, SyntheticSpec, gen_synthetic, write_synthetic
from adaptation.data.tokenizer import tokenize
from adaptation.engine.layers import UNK_ID
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.exceptions import ConfigurationError, DataError
from adaptation.services.run_config import read_config_file
from adaptation.tests.helpers import make_corpus, small_synthetic

SUBJECTIVITY_LINES = [
    'subj\tI love this so much',
    'subj\tWhat an awful terrible idea',
    'subj\tI hate it , truly hate it',
    'subj\tSo great , I adore it',
    'subj\tHonestly awful and hateful',
    'subj\tI love love love it',
    'obj\tThe report was published on Monday',
    'obj\tThe committee met in March',
    'obj\tThe bill was published by the committee',
    'obj\tThe report lists 12 measures',
    'obj\tVoting takes place in March',
    'obj\tThe measures were published in the report',
]


class TokenizerTestCase(SimpleTestCase):
    """Test cases for the tweet tokenizer."""

    def test_tokenize(self):
        """Test lowercasing, hashtags, mentions, contractions and URLs."""
        self.assertEqual(
            tokenize("Check https://t.co/xyz #Brexit @User can't stop!"),
            ['check', '<url>', '#brexit', '@user', "can't", 'stop', '!'],
        )

    def test_empty_text(self):
        """Test that empty text yields no tokens."""
        self.assertEqual(tokenize(''), [])

    def test_contractions_stay_whole(self):
        """Test that contractions are single tokens, also in a silver labeler's vocabulary."""
        self.assertEqual(tokenize("I don't think it's true"), ['i', "don't", 'think', "it's", 'true'])
        labeler = train_silver_labeler([('subj', tokenize("I don't like it")), ('obj', tokenize('It was filed'))])
        self.assertIn("don't", labeler.vocabulary)
        self.assertNotIn('don', labeler.vocabulary)


class CorpusTestCase(SimpleTestCase):
    """Test cases for corpora and their TSV files."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding='utf-8')
        return path

    def test_load_corpus(self):
        """Test parsing, tokenization and stance aliases."""
        path = self.write('c.tsv', 'id\ttopic\ttext\tstance\n'
                                   '1\tbrexit\tGreat news!\tFAVOR\n'
                                   '2\tbrexit\tNot sure\tNONE\n'
                                   '\n'
                                   '3\tbrexit\tNo way\tUNKNOWN\n')
        corpus = load_corpus(path, SOURCE)
        self.assertEqual(len(corpus), 3)
        self.assertEqual([ex.stance for ex in corpus], ['favour', 'neutral', None])
        self.assertEqual(corpus[0].tokens, ('great', 'news', '!'))
        self.assertEqual(corpus[0].domain, SOURCE)
        self.assertFalse(corpus.is_labeled)

    def test_round_trip(self):
        """Test that a written corpus reads back with the same ids, texts and labels."""
        corpus = make_corpus(SOURCE, n=5)
        loaded = load_corpus(write_corpus(corpus, self.dir / 'out' / 'c.tsv'), SOURCE)
        self.assertEqual([(ex.id, ex.text, ex.stance) for ex in loaded],
                         [(ex.id, ex.text, ex.stance) for ex in corpus])

    def test_malformed_lines(self):
        """Test that bad headers, column counts and stances are reported with a line number."""
        cases = {
            'header.tsv': ('id\ttext\n', ':1:'),
            'columns.tsv': ('id\ttopic\ttext\tstance\n1\tt\tok\tfavour\n2\tt\tmissing\n', ':3:'),
            'stance.tsv': ('id\ttopic\ttext\tstance\n1\tt\tok\tmaybe\n', ':2:'),
        }
        for name, (text, location) in cases.items():
            with self.subTest(name=name):
                with self.assertRaisesMessage(DataError, location):
                    load_corpus(self.write(name, text), SOURCE)
        with self.assertRaises(DataError):
            load_corpus(self.dir / 'absent.tsv', SOURCE)

    def test_duplicate_ids(self):
        """Test that duplicate ids are refused."""
        path = self.write('dup.tsv', 'id\ttopic\ttext\tstance\n1\tt\ta\tfavour\n1\tt\tb\tagainst\n')
        with self.assertRaises(DataError):
            load_corpus(path, SOURCE)

    def test_parse_stance(self):
        """Test stance spellings."""
        self.assertEqual(parse_stance(' Against '), 'against')
        self.assertIsNone(parse_stance('unknown'))
        with self.assertRaises(DataError):
            parse_stance('pro')

    def test_split_and_subsets(self):
        """Test deterministic splitting and label stripping."""
        corpus = make_corpus(SOURCE, n=10)
        kept, held = corpus.split(0.2, seed=1)
        self.assertEqual((len(kept), len(held)), (8, 2))
        self.assertEqual([ex.id for ex in held], [ex.id for ex in corpus.split(0.2, seed=1)[1]])
        self.assertFalse(corpus.without_stance().is_labeled)
        self.assertEqual(corpus.label_histogram, {'favour': 4, 'against': 3, 'neutral': 3})

    def test_unknown_domain(self):
        """Test that corpora only accept the two domain tags."""
        with self.assertRaises(DataError):
            Corpus([], domain='elsewhere')


class EmbeddingTestCase(SimpleTestCase):
    """Test cases for vocabulary and vector files."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.corpus = Corpus([
            Example(id='1', topic='t', text='', tokens=('good', 'good', 'bad'), domain=SOURCE),
            Example(id='2', topic='t', text='', tokens=('bad', 'rare', 'good'), domain=SOURCE),
        ])

    def tearDown(self):
        self.tmp.cleanup()

    def test_vocabulary_order(self):
        """Test frequency-then-alphabetical ordering and the frequency floor."""
        self.assertEqual(build_vocabulary([self.corpus]), ['good', 'bad', 'rare'])
        self.assertEqual(build_vocabulary([self.corpus], min_freq=2), ['good', 'bad'])

    def test_read_embedding_file(self):
        """Test that a count header is skipped and vectors are read in order."""
        path = self.dir / 'vec.txt'
        path.write_text('2 3\ngood 1 2 3\nbad 4 5 6\n', encoding='utf-8')
        words, vectors = read_embedding_file(path)
        self.assertEqual(words, ['good', 'bad'])
        np.testing.assert_array_equal(vectors, [[1, 2, 3], [4, 5, 6]])

    def test_width_mismatch(self):
        """Test that ragged vectors and dimension mismatches are reported."""
        path = self.dir / 'vec.txt'
        path.write_text('good 1 2 3\nbad 4 5\n', encoding='utf-8')
        with self.assertRaisesMessage(DataError, ':2:'):
            read_embedding_file(path)
        with self.assertRaisesMessage(DataError, ':1:'):
            read_embedding_file(path, expected_dim=4)

    def test_load_embeddings(self):
        """Test that words without vectors fall back to UNK."""
        path = write_embedding_file(self.dir / 'vec.txt', ['good', 'bad', 'unused'], np.eye(3))
        table = load_embeddings(path, [self.corpus])
        self.assertEqual(table.V, 3)
        self.assertEqual(table.ids_for(['good', 'bad', 'rare']), [1, 2, UNK_ID])
        np.testing.assert_array_equal(table.W.data[:, 1], [1.0, 0.0, 0.0])

    def test_no_coverage(self):
        """Test that a vector file covering no vocabulary token is refused."""
        with self.assertRaises(DataError):
            build_embedding_table(['good'], ['other'], np.ones((1, 2)))


class SilverLabelTestCase(SimpleTestCase):
    """Test cases for the silver subjectivity and objectivity labelers."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.path = self.dir / 'subjectivity.tsv'
        self.path.write_text('\n'.join(SUBJECTIVITY_LINES) + '\n', encoding='utf-8')

    def tearDown(self):
        self.tmp.cleanup()

    def test_labelers_separate_the_views(self):
        """Test that each labeler recognizes its own kind of sentence."""
        subj, obj = train_view_labelers(load_subjectivity_corpus(self.path), seed=0)
        documents = [tokenize('I love it'), tokenize('The report was published')]
        self.assertEqual(subj.predict(documents).tolist(), [1, 0])
        self.assertEqual(obj.predict(documents).tolist(), [0, 1])

    def test_assign_and_round_trip(self):
        """Test that labels attach to every example and survive a file round trip."""
        subj, obj = train_view_labelers(load_subjectivity_corpus(self.path))
        corpus = assign_silver_labels(make_corpus(TARGET, n=4, labeled=False, silver=False), subj, obj)
        self.assertTrue(all(ex.has_silver for ex in corpus))
        labels = read_silver_labels(write_silver_labels(corpus, self.dir / 'silver.tsv'))
        self.assertEqual(labels, {ex.id: (ex.silver_subj, ex.silver_obj) for ex in corpus})

    def test_stance_labels_do_not_reach_silver_labels(self):
        """Test that rotating or removing stance labels leaves the silver labels unchanged."""
        subj, obj = train_view_labelers(load_subjectivity_corpus(self.path))
        corpus = make_corpus(SOURCE, n=12, seed=4, silver=False)
        stances = [ex.stance for ex in corpus]
        rotated = Corpus([replace(ex, stance=s) for ex, s in zip(corpus, stances[1:] + stances[:1])],
                         domain=SOURCE)
        self.assertNotEqual([ex.stance for ex in rotated], stances)

        def silver(c):
            return [(ex.id, ex.silver_subj, ex.silver_obj) for ex in assign_silver_labels(c, subj, obj)]

        self.assertEqual(silver(rotated), silver(corpus))
        self.assertEqual(silver(corpus.without_stance()), silver(corpus))

    def test_one_class_corpus(self):
        """Test that a labeler cannot be trained on a single class."""
        with self.assertRaises(DataError):
            train_silver_labeler([('subj', ['a']), ('subj', ['b'])])

    def test_malformed_files(self):
        """Test that malformed subjectivity and silver files are refused."""
        bad = self.dir / 'bad.tsv'
        bad.write_text('opinion\tsomething\n', encoding='utf-8')
        with self.assertRaises(DataError):
            load_subjectivity_corpus(bad)
        bad.write_text('x1\t1\t2\n', encoding='utf-8')
        with self.assertRaises(DataError):
            read_silver_labels(bad)

    def test_missing_labels(self):
        """Test that attaching labels to an unlisted example fails."""
        with self.assertRaises(DataError):
            make_corpus(SOURCE, n=2, silver=False).with_silver({'s0': (1, 0)})


class SamplingTestCase(SimpleTestCase):
    """Test cases for batch sampling."""

    def test_epochs_are_permutations(self):
        """Test that consecutive batches cover the corpus once per epoch."""
        first = np.concatenate([batch_indices(10, 5, seed=1, iteration=i) for i in (0, 1)])
        self.assertEqual(sorted(first.tolist()), list(range(10)))

    def test_deterministic(self):
        """Test that batches depend only on seed, iteration and stream."""
        np.testing.assert_array_equal(batch_indices(10, 4, 3, 7), batch_indices(10, 4, 3, 7))
        self.assertFalse(np.array_equal(batch_indices(50, 8, 3, 0, stream=0), batch_indices(50, 8, 3, 0, stream=1)))

    def test_small_corpus_samples_with_replacement(self):
        """Test that a batch larger than the corpus is drawn with replacement."""
        out = batch_indices(3, 8, seed=0, iteration=0)
        self.assertEqual(len(out), 8)
        self.assertTrue(np.all((out >= 0) & (out < 3)))

    def test_errors(self):
        """Test that empty corpora and zero batch sizes are refused."""
        with self.assertRaises(DataError):
            batch_indices(0, 2, 0, 0)
        with self.assertRaises(DataError):
            batch_indices(5, 0, 0, 0)

    def test_sample_batches(self):
        """Test that both domains contribute m examples."""
        batch_S, batch_T = sample_batches(make_corpus(SOURCE, n=6), make_corpus(TARGET, n=7), 3, 0, 0)
        self.assertEqual(len(batch_S), 3)
        self.assertEqual(len(batch_T), 3)
        self.assertTrue(all(ex.domain == TARGET for ex in batch_T))


class SyntheticTestCase(SimpleTestCase):
    """Test cases for the synthetic two-domain generator."""

    def test_deterministic(self):
        """Test that a seed fixes corpora and vectors."""
        a, b = small_synthetic(seed=5), small_synthetic(seed=5)
        self.assertEqual([ex.tokens for ex in a.source], [ex.tokens for ex in b.source])
        self.assertEqual([ex.tokens for ex in a.target], [ex.tokens for ex in b.target])
        np.testing.assert_array_equal(a.vectors, b.vectors)
        self.assertNotEqual([ex.tokens for ex in a.source], [ex.tokens for ex in small_synthetic(seed=6).source])

    def test_shift_extremes(self):
        """Test that shift 0 keeps source words and shift 1 replaces every target token."""
        unshifted = small_synthetic(shift=0.0)
        shifted = small_synthetic(shift=1.0)
        self.assertFalse(any(tok.endswith(TARGET_SUFFIX) for ex in unshifted.target for tok in ex.tokens))
        self.assertTrue(all(tok.endswith(TARGET_SUFFIX) for ex in shifted.target for tok in ex.tokens))

    def test_labels_follow_cues(self):
        """Test that stance and silver labels agree with the planted cue words."""
        data = small_synthetic()
        for ex in data.source:
            cues = [tok for tok in ex.tokens if not tok.startswith('w')]
            self.assertTrue(cues)
            self.assertTrue(all(tok.startswith(ex.stance + '_') for tok in cues))
            self.assertEqual(ex.silver_subj, int(any('_subj' in tok for tok in cues)))
            self.assertEqual(ex.silver_obj, int(any('_obj' in tok for tok in cues)))

    def test_target_labels_are_hidden(self):
        """Test that the training target corpus carries no stance while the gold copy does."""
        data = small_synthetic()
        self.assertFalse(any(ex.stance for ex in data.target))
        self.assertTrue(data.target_gold.is_labeled)
        self.assertEqual([ex.id for ex in data.target], [ex.id for ex in data.target_gold])

    def test_write_synthetic(self):
        """Test that the written files reload and the config points at them."""
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_synthetic(small_synthetic(n=20), tmp)
            self.assertEqual(len(load_corpus(paths['source'], SOURCE)), 20)
            self.assertEqual(len(read_silver_labels(paths['target_silver'])), 20)
            config = read_config_file(paths['config'])
            self.assertEqual(config['source'], 'source.tsv')
            self.assertEqual(config['seed'], '13')
            self.assertTrue((Path(tmp) / config['embeddings']).exists())

    def test_invalid_settings(self):
        """Test that out-of-range generator settings are refused."""
        with self.assertRaises(ConfigurationError):
            SyntheticSpec(shift=1.5)
        with self.assertRaises(ConfigurationError):
            SyntheticSpec(min_length=4, max_cues=5)
        with self.assertRaises(ConfigurationError):
            gen_synthetic(SyntheticSpec(n_target=0))

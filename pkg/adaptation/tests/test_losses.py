import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from adaptation.engine.losses import (
    SOURCE, TARGET, LossComponents, LossWeights, confusion_h, confusion_w, coral, covariance, descent_objective,
    max_objective, min_objective, nll,
)
from adaptation.engine.tensor import Tensor, parameter, softmax
from adaptation.exceptions import ConfigurationError, DataError, ShapeError
from adaptation.tests.helpers import GradientCheckMixin


class LossValueTestCase(SimpleTestCase):
    """Hand-computed values of each loss."""

    def test_nll_integer_and_one_hot_targets(self):
        """Test that nll is -ln p of the true class for index and one-hot targets."""
        probs = Tensor(np.array([[0.6, 0.3, 0.1]]))
        self.assertAlmostEqual(nll(probs, [0]).item(), -math.log(0.6))
        self.assertAlmostEqual(nll(probs, np.array([[0.0, 1.0, 0.0]])).item(), -math.log(0.3))

    def test_nll_sums_over_batch(self):
        """Test that nll adds the per-example losses."""
        probs = Tensor(np.array([[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]]))
        self.assertAlmostEqual(nll(probs, [0, 2]).item(), -math.log(0.6) - math.log(0.6))

    def test_nll_bad_targets(self):
        """Test that out-of-range classes and mismatched shapes raise ShapeError."""
        probs = Tensor(np.array([[0.5, 0.5]]))
        with self.assertRaises(ShapeError):
            nll(probs, [2])
        with self.assertRaises(ShapeError):
            nll(probs, [0, 1])

    def test_confusion_h_at_chance(self):
        """Test that an undecided examiner scores 2 ln 0.5 on one source and one target example."""
        scores = Tensor(np.array([[0.5, 0.5], [0.5, 0.5]]))
        self.assertAlmostEqual(confusion_h(scores, [SOURCE, TARGET]).item(), 2.0 * math.log(0.5))
        self.assertAlmostEqual(confusion_h(Tensor(np.array([0.5, 0.5])), [SOURCE, TARGET]).item(),
                               2.0 * math.log(0.5))

    def test_confusion_h_uses_domain_columns(self):
        """Test that source rows read column 0 and target rows read column 1."""
        scores = Tensor(np.array([[0.8, 0.2], [0.3, 0.7]]))
        expected = math.log(0.8) + math.log(0.7)
        self.assertAlmostEqual(confusion_h(scores, [SOURCE, TARGET]).item(), expected)
        self.assertAlmostEqual(confusion_h(scores, np.array([True, False])).item(), expected)

    def test_confusion_needs_both_domains(self):
        """Test that a single-domain batch raises DataError."""
        with self.assertRaises(DataError):
            confusion_h(Tensor(np.array([0.4, 0.6])), [SOURCE, SOURCE])
        with self.assertRaises(DataError):
            confusion_w(Tensor(np.array([0.4, 0.6])), [TARGET, TARGET])
        with self.assertRaises(DataError):
            confusion_h(Tensor(np.array([0.4])), ['elsewhere'])

    def test_confusion_w(self):
        """Test that confusion_w is the source mean minus the target mean."""
        values = Tensor(np.array([1.0, 3.0, 0.5, -0.5]))
        self.assertAlmostEqual(confusion_w(values, [SOURCE, SOURCE, TARGET, TARGET]).item(), 2.0)

    def test_coral_one_dimension(self):
        """Test CORAL on one-dimensional features: variance 2 against 0 gives 4 / 4."""
        source = Tensor(np.array([[0.0], [2.0]]))
        target = Tensor(np.array([[1.0], [1.0]]))
        self.assertAlmostEqual(coral(source, target).item(), 1.0)

    def test_coral_errors(self):
        """Test that CORAL needs two rows per domain and equal widths."""
        with self.assertRaises(DataError):
            coral(Tensor(np.ones((1, 2))), Tensor(np.ones((3, 2))))
        with self.assertRaises(ShapeError):
            coral(Tensor(np.ones((3, 2))), Tensor(np.ones((3, 3))))

    def test_covariance_is_unbiased(self):
        """Test that covariance matches numpy's unbiased estimate."""
        x = np.random.default_rng(0).normal(size=(6, 3))
        np.testing.assert_allclose(covariance(Tensor(x)).data, np.cov(x, rowvar=False))

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (3,), elements=st.floats(-100, 100, allow_nan=False)))
    def test_coral_translation_invariance(self, shift):
        """Test that translating either domain leaves CORAL unchanged."""
        rng = np.random.default_rng(1)
        source, target = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        base = coral(Tensor(source), Tensor(target)).item()
        self.assertAlmostEqual(coral(Tensor(source + shift), Tensor(target)).item(), base, places=6)


class LossGradientTestCase(GradientCheckMixin, SimpleTestCase):
    """Finite-difference checks for every loss."""

    def setUp(self):
        """Set up test data."""
        rng = np.random.default_rng(3)
        self.logits = parameter(rng.normal(size=(4, 3)))
        self.binary_logits = parameter(rng.normal(size=(4, 2)))
        self.scores = parameter(rng.uniform(0.2, 0.8, size=4))
        self.source = parameter(rng.normal(size=(5, 3)))
        self.target = parameter(rng.normal(size=(4, 3)))
        self.domains = [SOURCE, TARGET, SOURCE, TARGET]

    def test_nll(self):
        """Test nll gradients through a softmax."""
        self.assertGradientsMatch(lambda: nll(softmax(self.logits), [0, 2, 1, 1]), [self.logits])

    def test_confusion_h(self):
        """Test H-confusion gradients for matrix and vector scores."""
        self.assertGradientsMatch(lambda: confusion_h(softmax(self.binary_logits), self.domains),
                                  [self.binary_logits])
        self.assertGradientsMatch(lambda: confusion_h(self.scores, self.domains), [self.scores])

    def test_confusion_w(self):
        """Test W-confusion gradients."""
        self.assertGradientsMatch(lambda: confusion_w(self.scores, self.domains), [self.scores])

    def test_coral(self):
        """Test CORAL gradients for both domains."""
        self.assertGradientsMatch(lambda: coral(self.source, self.target), [self.source, self.target])


class ObjectiveTestCase(SimpleTestCase):
    """Test cases for composing the min and max objectives."""

    def setUp(self):
        """Set up test data."""
        self.components = LossComponents(stance=1.0, subj=2.0, obj=3.0, conf_subj=-4.0, conf_obj=-5.0)
        self.weights = LossWeights(alpha=0.5, beta=0.25, gamma=0.1)

    def test_min_objective_with_aligner(self):
        """Test the weighted sum with both alignment terms."""
        total = min_objective(self.components, self.weights, 'h-adversarial')
        self.assertAlmostEqual(total, 1.0 + 1.0 + 0.75 - 0.9)

    def test_min_objective_without_aligner(self):
        """Test that alignment terms are ignored when there is no aligner."""
        self.assertAlmostEqual(min_objective(self.components, self.weights, 'none'), 2.75)

    def test_min_objective_skips_absent_terms(self):
        """Test that a stance-only component set reduces to the stance loss."""
        self.assertEqual(min_objective(LossComponents(stance=1.5), self.weights, 'coral'), 1.5)

    def test_descent_objective(self):
        """Test that reversed confusion terms are subtracted unweighted and other aligners use min_objective."""
        self.assertAlmostEqual(descent_objective(self.components, self.weights, 'h-adversarial'), 2.75 + 9.0)
        for aligner in ('none', 'coral', 'wasserstein'):
            with self.subTest(aligner=aligner):
                self.assertAlmostEqual(descent_objective(self.components, self.weights, aligner),
                                       min_objective(self.components, self.weights, aligner))

    def test_max_objective(self):
        """Test that the examiners' objective sums the confusion terms."""
        self.assertAlmostEqual(max_objective(self.components, 'wasserstein'), -9.0)
        single = LossComponents(stance=1.0, conf_subj=-2.0)
        self.assertAlmostEqual(max_objective(single, 'h'), -2.0)

    def test_max_objective_needs_adversary(self):
        """Test that non-adversarial aligners have no max objective."""
        for aligner in ('none', 'coral'):
            with self.assertRaises(ConfigurationError):
                max_objective(self.components, aligner)
        with self.assertRaises(ConfigurationError):
            max_objective(LossComponents(stance=1.0), 'h-adversarial')

    def test_negative_weight(self):
        """Test that negative loss weights are refused."""
        with self.assertRaises(ConfigurationError):
            LossWeights(gamma=-0.1)

    def test_components_as_floats(self):
        """Test that tensor components become plain floats."""
        out = LossComponents(stance=Tensor(1.25), conf_obj=0.5).as_floats()
        self.assertEqual(out, {'stance': 1.25, 'subj': None, 'obj': None, 'conf_subj': None, 'conf_obj': 0.5})

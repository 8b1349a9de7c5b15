#!/usr/bin/env python3
# -*- coding: UTF-8 -*-
"""Unittest for the adversarial perturbation generators"""

import json
import logging
import tempfile
import unittest
from pathlib import Path
from sys import stdout

import numpy as np
from nose2.tools import params

from advtrain.adversary import (AdversaryError, AllDegenerateError,
                                AttackFamily, InvalidClassError,
                                PerturbationConfigError, PerturbationSpec,
                                ZeroGradientError, adversarial_info,
                                generate_adversarial_set,
                                loss_based_perturbation,
                                min_adversarial_perturbation,
                                misclassification_based_perturbation,
                                per_class_min_perturbation, perturb_batch,
                                save_adversarial_set, sign_perturbation)
from advtrain.core_math import (NormKind, dual_norm, row_norms, seeded_rng,
                                vector_norm)
from advtrain.data_io import LabeledDataset, load_dataset
from advtrain.net import (Activation, Layer, LayerSpec, Network, forward,
                          input_jacobian, loss, model_id)


def linear_network(weight, bias=None) -> Network:
    """Single identity layer network with the given parameters"""
    weight = np.array(weight, dtype=float)
    out_dim, in_dim = weight.shape
    if bias is None:
        bias = np.zeros(out_dim)
    spec = LayerSpec(in_dim=in_dim,
                     out_dim=out_dim,
                     activation=Activation.IDENTITY)
    return Network(layers=[Layer(spec=spec,
                                 weight=weight,
                                 bias=np.array(bias, dtype=float))])


def direction_grid_oracle(alpha: np.ndarray,
                          H: np.ndarray,
                          y: int,
                          norm: NormKind,
                          steps: int = 3600) -> float:
    """
    Smallest norm reaching a linearized tie, by scanning 2-D directions

    The grid contains the vertices of the L1 and Linf unit spheres.
    """
    theta = np.arange(steps) * 2.0 * np.pi / steps
    units = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    units /= row_norms(units, norm)[:, np.newaxis]
    best = np.inf
    for j in range(alpha.shape[0]):
        if j == y:
            continue
        proj = units @ (H[j] - H[y])
        gap = alpha[y] - alpha[j]
        reach = proj[proj > 0]
        if reach.size:
            best = min(best, float(np.min(gap / reach)))
    return best


class TestAdversary(unittest.TestCase):

    def setUp(self) -> None:
        """Run before every test method"""
        # define a format
        custom_format = '[%(asctime)s] [%(levelname)-8s] [%(filename)-15s @'\
                        ' %(funcName)-15s:%(lineno)4s] %(message)s'

        # set basic config and level for all loggers
        logging.basicConfig(level=logging.INFO,
                            format=custom_format,
                            stream=stdout)

        # create a logger for this TestSuite
        self.test_logger = logging.getLogger(__name__)
        self.test_logger.setLevel(logging.DEBUG)

        self.net = Network.create(input_dim=4,
                                  hidden_dims=(8, ),
                                  class_count=3,
                                  seed=7)
        rng = seeded_rng(21)
        self.x = rng.standard_normal((12, 4))
        self.y = rng.integers(0, 3, size=12)
        self.dataset = LabeledDataset(features=self.x,
                                      labels=self.y,
                                      class_count=3,
                                      source_tag="unit")

    def tearDown(self) -> None:
        """Run after every test method"""
        pass

    def test_per_class_l2(self) -> None:
        """Test the L2 minimal perturbation reaches the linearized tie"""
        alpha = np.array([0.7, 0.3])
        H = np.array([[0.0, 0.0], [0.3, 0.4]])
        cand = per_class_min_perturbation(alpha, H, 0, 1, NormKind.L2)
        np.testing.assert_allclose(cand.r, [0.48, 0.64], atol=1e-12)
        self.assertAlmostEqual(cand.r_norm, 0.8, places=12)
        np.testing.assert_allclose(cand.direction, [0.6, 0.8], atol=1e-12)
        self.assertAlmostEqual(float((H[1] - H[0]) @ cand.r),
                               alpha[0] - alpha[1], places=12)

    def test_per_class_linf(self) -> None:
        """Test the Linf minimal perturbation"""
        alpha = np.array([0.6, 0.4])
        H = np.array([[0.0, 0.0], [1.0, -1.0]])
        cand = per_class_min_perturbation(alpha, H, 0, 1, NormKind.LINF)
        np.testing.assert_allclose(cand.r, [0.1, -0.1], atol=1e-12)
        self.assertAlmostEqual(cand.r_norm, 0.1, places=12)

    def test_per_class_no_smaller_solution(self) -> None:
        """Test no grid point of smaller norm satisfies the tie constraint"""
        alpha = np.array([0.7, 0.3])
        diff = np.array([0.3, 0.4])
        grid = np.linspace(-0.8, 0.8, 161)
        xx, yy = np.meshgrid(grid, grid)
        points = np.stack([xx.ravel(), yy.ravel()], axis=1)
        norms = row_norms(points, NormKind.L2)
        feasible = points @ diff >= alpha[0] - alpha[1] - 1e-12
        self.assertTrue(np.all(norms[feasible] >= 0.8 - 1e-9))

    @params(
        (NormKind.L1, ),
        (NormKind.L2, ),
        (NormKind.LINF, ),
    )
    def test_min_perturbation_matches_grid_oracle(self, norm) -> None:
        """Test random linear softmax models against a direction scan"""
        rng = seeded_rng(31)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            net = linear_network(rng.standard_normal((k, 2)),
                                 bias=rng.standard_normal(k))
            x = rng.standard_normal(2)
            alpha = forward(net, x).alpha[0]
            H = input_jacobian(net, x)
            y = int(np.argmax(alpha))

            result = min_adversarial_perturbation(net, x, y, norm)
            oracle = direction_grid_oracle(alpha, H, y, norm)
            found = result.chosen.r_norm
            self.assertGreaterEqual(oracle, found * (1.0 - 1e-9))
            self.assertLessEqual(oracle - found, 1e-3 * found)

            for candidate in result.candidates:
                j = candidate.target_class
                gap = alpha[y] - alpha[j]
                self.assertAlmostEqual(
                    candidate.r_norm / (gap / dual_norm(H[j] - H[y], norm)),
                    1.0, places=9)
                self.assertAlmostEqual(
                    vector_norm(candidate.r, norm) / candidate.r_norm, 1.0,
                    places=9)
                tied = alpha + H @ candidate.r
                self.assertAlmostEqual(tied[j], tied[y], places=9)

    def test_min_perturbation_single_class(self) -> None:
        """Test a one class network is rejected"""
        net = linear_network([[1.0, 2.0]])
        with self.assertRaises(InvalidClassError):
            min_adversarial_perturbation(net, np.ones(2), 0, NormKind.L2)

    def test_per_class_already_tied(self) -> None:
        """Test equal outputs need no perturbation"""
        alpha = np.array([0.5, 0.5])
        H = np.array([[0.0, 1.0], [1.0, 0.0]])
        cand = per_class_min_perturbation(alpha, H, 0, 1, NormKind.L2)
        self.assertEqual(cand.r_norm, 0.0)
        self.assertFalse(np.any(cand.r))
        self.assertIsNotNone(cand.direction)

    def test_per_class_degenerate(self) -> None:
        """Test equal Jacobian rows give an infinite norm"""
        alpha = np.array([0.6, 0.4])
        H = np.array([[1.0, 2.0], [1.0, 2.0]])
        cand = per_class_min_perturbation(alpha, H, 0, 1, NormKind.L2)
        self.assertTrue(np.isinf(cand.r_norm))
        self.assertIsNone(cand.direction)

    @params(
        (0, 0),
        (0, 2),
        (-1, 1),
    )
    def test_per_class_invalid(self, y, j) -> None:
        """Test invalid class pairs are rejected"""
        with self.assertRaises(InvalidClassError):
            per_class_min_perturbation(np.array([0.5, 0.5]), np.eye(2), y, j,
                                       NormKind.L2)

    def test_min_perturbation_picks_smallest(self) -> None:
        """Test the chosen candidate has the smallest norm"""
        for row in range(self.x.shape[0]):
            result = min_adversarial_perturbation(self.net, self.x[row],
                                                  int(self.y[row]),
                                                  NormKind.L2)
            norms = [c.r_norm for c in result.candidates]
            self.assertEqual(len(norms), 2)
            self.assertEqual(result.chosen.r_norm, min(norms))
            self.assertNotEqual(result.chosen_target, int(self.y[row]))

    def test_min_perturbation_three_class_linear(self) -> None:
        """Test the candidate norms against the closed form"""
        net = linear_network([[1.0, 0.0], [0.0, 2.0], [-1.0, 0.5]])
        x = np.array([0.5, 0.1])
        alpha = forward(net, x).alpha[0]
        H = input_jacobian(net, x)
        result = min_adversarial_perturbation(net, x, 0, NormKind.L2)
        for cand in result.candidates:
            j = cand.target_class
            expected = (alpha[0] - alpha[j]) / np.linalg.norm(H[j] - H[0])
            self.assertAlmostEqual(cand.r_norm, expected, places=10)

    def test_min_perturbation_misclassified(self) -> None:
        """Test an already misclassified input gets r = 0"""
        net = linear_network(np.eye(2))
        result = min_adversarial_perturbation(net, np.array([0.0, 1.0]), 0,
                                              NormKind.L2)
        self.assertTrue(result.already_misclassified)
        self.assertFalse(np.any(result.r))

    def test_min_perturbation_all_degenerate(self) -> None:
        """Test a constant network has no minimal perturbation"""
        net = linear_network(np.zeros((2, 2)), bias=[1.0, 0.0])
        with self.assertRaises(AllDegenerateError):
            min_adversarial_perturbation(net, np.ones(2), 0, NormKind.L2)

    def test_loss_based_linf(self) -> None:
        """Test grad (0.2, -0.1), Linf, c = 0.25 gives (0.25, -0.25)"""
        net = linear_network([[0.0, 0.0], [0.4, -0.2]])
        r = loss_based_perturbation(net, np.zeros(2), 0, NormKind.LINF, 0.25)
        np.testing.assert_allclose(r, [0.25, -0.25], atol=1e-15)

    def test_loss_based_increases_loss(self) -> None:
        """Test a small loss step increases the loss to first order"""
        for norm in NormKind:
            for row in range(4):
                x, y = self.x[row], int(self.y[row])
                r = loss_based_perturbation(self.net, x, y, norm, 1e-3)
                self.assertAlmostEqual(vector_norm(r, norm), 1e-3, places=12)
                self.assertGreater(loss(forward(self.net, x + r), y),
                                   loss(forward(self.net, x), y))

    def test_loss_based_zero_budget(self) -> None:
        """Test c = 0 gives r = 0"""
        r = loss_based_perturbation(self.net, self.x[0], int(self.y[0]),
                                    NormKind.L2, 0.0)
        self.assertFalse(np.any(r))

    def test_loss_based_zero_gradient(self) -> None:
        """Test a vanishing gradient raises only in strict mode"""
        net = linear_network(np.zeros((2, 2)))
        r = loss_based_perturbation(net, np.ones(2), 0, NormKind.L2, 1.0)
        self.assertFalse(np.any(r))
        with self.assertRaises(ZeroGradientError):
            loss_based_perturbation(net, np.ones(2), 0, NormKind.L2, 1.0,
                                    strict=True)

    def test_sign_perturbation(self) -> None:
        """Test the sign step has norm c in the measurement norm"""
        x, y = self.x[0], int(self.y[0])
        for norm in NormKind:
            r = sign_perturbation(self.net, x, y, norm, 1.5)
            self.assertAlmostEqual(vector_norm(r, norm), 1.5, places=12)
        r = sign_perturbation(self.net, x, y, NormKind.LINF, 0.3)
        self.assertTrue(np.allclose(np.abs(r), 0.3))

    def test_misclassification_based_rescales(self) -> None:
        """Test the result is c times the unit direction of the target"""
        for row in range(4):
            x, y = self.x[row], int(self.y[row])
            result = min_adversarial_perturbation(self.net, x, y,
                                                  NormKind.L2)
            r = misclassification_based_perturbation(self.net, x, y,
                                                     NormKind.L2, 1.5)
            self.assertAlmostEqual(vector_norm(r, NormKind.L2), 1.5,
                                   places=12)
            np.testing.assert_allclose(r, 1.5 * result.chosen.direction,
                                       atol=1e-12)
            chosen = result.chosen
            if chosen.r_norm > 0:
                np.testing.assert_allclose(
                    chosen.r_norm * r / 1.5, chosen.r, atol=1e-12)

    @params(
        (AttackFamily.ADV_LOSS, NormKind.L2),
        (AttackFamily.ADV_LOSS, NormKind.LINF),
        (AttackFamily.ADV_LOSS_SIGN, NormKind.L2),
        (AttackFamily.ADV_ALPHA, NormKind.L2),
        (AttackFamily.ADV_ALPHA, NormKind.L1),
    )
    def test_batch_matches_single(self, family, norm) -> None:
        """Test the vectorised batch agrees with the per-sample functions"""
        single = {
            AttackFamily.ADV_LOSS: loss_based_perturbation,
            AttackFamily.ADV_LOSS_SIGN: sign_perturbation,
            AttackFamily.ADV_ALPHA: misclassification_based_perturbation,
        }[family]
        spec = PerturbationSpec(family=family, norm=norm, budget=0.7)
        R, fallback = perturb_batch(self.net, self.x, self.y, spec)
        self.assertEqual(R.shape, self.x.shape)
        self.assertFalse(np.any(fallback))
        for row in range(self.x.shape[0]):
            expected = single(self.net, self.x[row], int(self.y[row]), norm,
                              0.7)
            np.testing.assert_allclose(R[row], expected, atol=1e-10)

    def test_perturbation_spec(self) -> None:
        """Test names are coerced and bad values rejected"""
        spec = PerturbationSpec(family="adv_alpha", norm="linf", budget=2)
        self.assertEqual(spec.family, AttackFamily.ADV_ALPHA)
        self.assertEqual(spec.norm, NormKind.LINF)
        self.assertEqual(spec.with_budget(0.5).budget, 0.5)
        self.assertEqual(PerturbationSpec.from_dict(spec.to_dict()), spec)
        with self.assertRaises(PerturbationConfigError):
            PerturbationSpec(budget=-1.0)
        with self.assertRaises(PerturbationConfigError):
            PerturbationSpec(norm="l3")
        with self.assertRaises(PerturbationConfigError):
            PerturbationSpec(clip=(1.0, 0.0))
        with self.assertRaises(PerturbationConfigError):
            PerturbationSpec.from_dict({"epsilon": 1.0})

    @params(
        ("Adv_Loss", AttackFamily.ADV_LOSS),
        ("adv-loss-sign", AttackFamily.ADV_LOSS_SIGN),
        ("ADV_ALPHA", AttackFamily.ADV_ALPHA),
    )
    def test_family_names(self, name, expectation) -> None:
        """Test family name parsing"""
        self.assertEqual(AttackFamily.from_name(name), expectation)

    def test_generate_zero_budget(self) -> None:
        """Test budget 0 returns the input features"""
        spec = PerturbationSpec(family=AttackFamily.ADV_ALPHA, budget=0.0)
        out = generate_adversarial_set(self.net, self.dataset, spec)
        np.testing.assert_array_equal(out.features, self.dataset.features)
        np.testing.assert_array_equal(out.labels, self.dataset.labels)

    def test_generate_metadata(self) -> None:
        """Test the generated set records its origin"""
        spec = PerturbationSpec(family="adv-loss", norm="l2", budget=1.5)
        out = generate_adversarial_set(self.net, self.dataset, spec)
        info = adversarial_info(out)
        self.assertEqual(info.family, "adv-loss")
        self.assertEqual(info.budget, 1.5)
        self.assertEqual(info.source_model_id, model_id(self.net))
        self.assertEqual(out.source_tag, "unit:adv-loss:l2:1.5")
        norms = row_norms(out.features - self.dataset.features, NormKind.L2)
        np.testing.assert_allclose(norms, 1.5, atol=1e-12)
        with self.assertRaises(AdversaryError):
            adversarial_info(self.dataset)

    def test_generate_clip(self) -> None:
        """Test clipping keeps features in range"""
        spec = PerturbationSpec(budget=5.0, clip=(-1.0, 1.0))
        out = generate_adversarial_set(self.net, self.dataset, spec)
        self.assertTrue(np.all(out.features >= -1.0))
        self.assertTrue(np.all(out.features <= 1.0))

    def test_generate_dimension_mismatch(self) -> None:
        """Test a dataset of the wrong width is rejected"""
        other = LabeledDataset(features=np.ones((2, 3)),
                               labels=[0, 1],
                               class_count=3)
        with self.assertRaises(AdversaryError):
            generate_adversarial_set(self.net, other, PerturbationSpec())

    def test_save_adversarial_set(self) -> None:
        """Test the set and its sidecar are written"""
        spec = PerturbationSpec(budget=0.5)
        out = generate_adversarial_set(self.net, self.dataset, spec)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "adv.data"
            digest = save_adversarial_set(out, path)
            sidecar = json.loads(
                (Path(tmp) / "adv.data.meta.json").read_text())
            loaded = load_dataset(path)
        self.assertEqual(len(digest), 64)
        self.assertEqual(sidecar["source_model_id"], model_id(self.net))
        np.testing.assert_array_equal(loaded.features, out.features)


if __name__ == '__main__':
    unittest.main()

import numpy as np
import pytest

import archimax as ax
from archimax import nn
from archimax.errors import InvalidInputError, NumericError
from archimax.radial_infer import phi_inverse_numeric_batch, williamson_second


def test_williamson_hand_values():
    assert ax.williamson([2.0], 1.0, 2) == pytest.approx(0.5)
    assert ax.williamson([1.0, 2.0], 0.5, 2) == pytest.approx(0.625)
    assert ax.williamson([1.0, 2.0], 0.0, 2) == pytest.approx(1.0)


def test_williamson_deriv_hand_values():
    assert ax.williamson_deriv([2.0], 1.0, 2) == pytest.approx(-0.5)
    assert ax.williamson_deriv([2.0], 5.0, 2) == 0.0
    pool = np.array([0.5, 1.5, 2.5])
    h = 1e-6
    fd = (ax.williamson(pool, 0.7 + h, 3) - ax.williamson(pool, 0.7 - h, 3)) / (2 * h)
    assert ax.williamson_deriv(pool, 0.7, 3) == pytest.approx(fd, abs=1e-6)


def test_williamson_second_matches_fd():
    pool = np.array([0.5, 1.5, 2.5])
    h = 1e-5
    fd = (ax.williamson_deriv(pool, 0.8 + h, 4)
          - ax.williamson_deriv(pool, 0.8 - h, 4)) / (2 * h)
    assert williamson_second(pool, 0.8, 4) == pytest.approx(fd, rel=1e-4)


def test_williamson_monotone_convex_and_support():
    rng = np.random.default_rng(0)
    pool = rng.gamma(2.0, size=200)
    for d in (2, 3, 6):
        xs = np.linspace(0.0, pool.max() * 1.1, 300)
        vals = ax.williamson(pool, xs, d)
        assert vals[0] == 1.0
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.all(np.diff(vals, 2) >= -1e-10)
        assert ax.williamson(pool, pool.max(), d) == 0.0


def test_phi_inverse_numeric_values_and_round_trip():
    phi = lambda x: np.exp(-x)
    assert ax.phi_inverse_numeric(phi, np.exp(-2.0)) == pytest.approx(2.0, abs=1e-9)
    assert ax.phi_inverse_numeric(phi, 1.0) == 0.0
    pool = np.array([1.0, 2.0])
    wil = lambda x: ax.williamson(pool, x, 2)
    assert ax.phi_inverse_numeric(wil, 0.625) == pytest.approx(0.5, abs=1e-9)
    rng = np.random.default_rng(1)
    big = rng.gamma(3.0, size=100)
    wil3 = lambda x: ax.williamson(big, x, 3)
    xs = np.linspace(0.01, big.max() * 0.98, 25)
    back = phi_inverse_numeric_batch(wil3, wil3(xs))
    np.testing.assert_allclose(back, xs, atol=1e-8)


def test_phi_inverse_numeric_validation():
    with pytest.raises(InvalidInputError):
        ax.phi_inverse_numeric(lambda x: np.exp(-x), 0.0)


def test_kendall_mse_scale_identifiability():
    # scaling the radial samples rescales products and transform together,
    # so the residual objective cannot identify the scale; the unit-mean
    # regularizer in training is what pins it
    rng = np.random.default_rng(2)
    w = np.sort(rng.random(12))[::-1]
    r = rng.gamma(2.0, size=4)
    z = rng.gamma(1.0, size=3)
    c = 1.7
    a = ax.kendall_mse(w, r, z, 3)
    b = ax.kendall_mse(w, c * r, z, 3)
    assert a == pytest.approx(b, rel=1e-12)


def test_reconstruct_finite_invariant_to_z_scale():
    # factorizing T = (cR)(Z/c) differently cannot matter: the ratio
    # parameterization is scale free
    kend = ax.KendallSample(np.array([0.07, 0.19, 0.34, 0.49, 0.67]),
                            np.array([0.07, 0.33, 0.14, 0.31, 0.15]))
    base = ax.reconstruct_finite(kend, [0.5, 0.75], [0.25, 0.75], n_r=3, d=2,
                                 init_ratios=[0.5, 2 / 3], max_iters=1)
    scaled = ax.reconstruct_finite(kend, [1.0, 1.5], [0.25, 0.75], n_r=3, d=2,
                                   init_ratios=[0.5, 2 / 3], max_iters=1)
    np.testing.assert_allclose(base.probabilities, scaled.probabilities,
                               atol=1e-9)


def test_train_generator_validates_input():
    cfg = nn.TrainConfig(max_iters=1)
    with pytest.raises(InvalidInputError):
        ax.train_generator(np.array([0.2, 0.4]), lambda c, r: np.ones(c),
                           d=3, n_r=2, n_z=2, config=cfg)
    with pytest.raises(InvalidInputError):
        ax.train_generator(np.array([0.2, 0.4, 0.3, 0.1]),
                           lambda c, r: np.ones(c), d=3, n_r=2, n_z=2,
                           config=cfg)


def test_train_generator_zero_iterations():
    cfg = nn.TrainConfig(max_iters=0, seed=3)
    w = np.sort(np.random.default_rng(0).random(6))[::-1]
    model = ax.train_generator(w, lambda c, r: np.ones(c), d=3, n_r=3, n_z=2,
                               config=cfg)
    assert isinstance(model, ax.RadialModel)
    assert model.net.mode == "sampling"


def test_train_generator_fits_consistent_kendall_values():
    # targets generated from a known finite radial law are matched to
    # small residual
    rng = np.random.default_rng(4)
    truth_pool = rng.gamma(3.0, 0.4, size=400)
    truth_pool /= truth_pool.mean()
    d, n_r, n_z = 4, 40, 30
    z_pool = rng.gamma(2.0, 0.5, size=1000)
    z_pool /= z_pool.mean()

    def z_sampler(count, rng_in):
        return z_pool[rng_in.integers(z_pool.size, size=count)]

    r_ref = truth_pool[:n_r]
    z_ref = z_pool[:n_z]
    t = np.sort(np.outer(r_ref, z_ref), axis=None)
    w = ax.williamson(truth_pool, t, d)[::-1].copy()
    w = np.sort(w)[::-1]
    cfg = nn.TrainConfig(max_iters=1800, seed=5)
    res = ax.train_generator(w, z_sampler, d, n_r, n_z, cfg, epsilon=1e-5,
                             return_trace=True)
    assert res.final_mse < 1e-3
    pool = res.model.eval_pool(0)
    assert 0.9 <= pool.mean() <= 1.1


def test_train_generator_archimedean_exp_lambda_band():
    synth = ax.synth_dataset("gumbel", 1.0, None, 1000, seed=3, d=5)
    u = ax.rank_normalize(synth.data.values)
    kend = ax.empirical_kendall(u)
    w_eq = ax.equispace_kendall(kend, 100, 80)
    cfg = nn.TrainConfig(max_iters=2500, seed=9)
    model = ax.train_generator(w_eq, lambda c, r: np.ones(c), 5, 100, 80, cfg)
    pool = model.eval_pool(0)
    assert 0.9 <= pool.mean() <= 1.1
    grid = np.linspace(0.05, 0.95, 20)
    lam = ax.lambda_map(model.phi, model.phi_prime, model.phi_inverse, grid)
    band = ax.lambda_variance(grid, 1000)
    dev = np.abs(lam.values - grid * np.log(grid))
    assert np.all(dev <= 3 * np.sqrt(band) + 0.01)


def test_choose_supports():
    assert ax.choose_supports(1000) == (100, 80)
    assert ax.choose_supports(50) == (50, 50)
    assert ax.choose_supports(1000, n_r=10, n_z=7) == (10, 7)


def test_reconstruct_finite_paper_illustration():
    kend = ax.KendallSample(np.array([0.07, 0.19, 0.34, 0.49, 0.67]),
                            np.array([0.07, 0.33, 0.14, 0.31, 0.15]))
    fr = ax.reconstruct_finite(kend, [0.5, 0.75], [0.25, 0.75], n_r=3, d=2,
                               init_ratios=[0.5, 2 / 3], max_iters=1)
    np.testing.assert_allclose(fr.probabilities, [0.43, 0.37, 0.20], atol=0.01)


def test_reconstruct_finite_recovers_exact_inputs():
    support = np.array([0.3, 0.55, 1.0])
    probs = np.array([0.25, 0.4, 0.35])
    z = np.array([0.6, 0.9])
    pz = np.array([0.4, 0.6])
    truth = ax.FiniteRadial(support, probs, 3)
    prods = np.outer(support, z).ravel()
    pmass = np.outer(probs, pz).ravel()
    order = np.argsort(prods, kind="stable")
    kend = ax.KendallSample(truth.phi(prods[order]), pmass[order],
                            sorted_desc=True)
    fr = ax.reconstruct_finite(kend, z, pz, n_r=3, d=3, max_iters=200,
                               epsilon=1e-14)
    np.testing.assert_allclose(fr.ratios, truth.ratios, atol=1e-3)
    np.testing.assert_allclose(fr.probabilities, probs, atol=1e-3)


def test_reconstruct_finite_single_atom():
    kend = ax.KendallSample(np.array([0.4]), np.array([1.0]))
    fr = ax.reconstruct_finite(kend, [1.0], [1.0], n_r=1, d=2)
    np.testing.assert_array_equal(fr.support, [1.0])
    np.testing.assert_array_equal(fr.probabilities, [1.0])
    assert fr.ratios.size == 0


def test_reconstruct_finite_sorted_pairing_is_monotone():
    rng = np.random.default_rng(7)
    support = np.sort(rng.gamma(2.0, size=4))
    probs = rng.dirichlet(np.ones(4))
    truth = ax.FiniteRadial(support / support[-1], probs, 3)
    z = np.sort(rng.gamma(2.0, size=3))
    pz = rng.dirichlet(np.ones(3))
    prods = np.outer(truth.support, z).ravel()
    pmass = np.outer(probs, pz).ravel()
    order = np.argsort(prods, kind="stable")
    kend = ax.KendallSample(truth.phi(prods[order]), pmass[order],
                            sorted_desc=True)
    fr = ax.reconstruct_finite(kend, z, pz, n_r=4, d=3, max_iters=60)
    t = np.sort(np.outer(fr.support, z), axis=None)
    vals = fr.phi(t)
    assert np.all(np.diff(vals) <= 1e-12)


def test_finite_radial_json_round_trip():
    fr = ax.FiniteRadial(np.array([0.5, 1.0]), np.array([0.3, 0.7]), 3)
    back = ax.FiniteRadial.from_dict(fr.to_dict())
    np.testing.assert_array_equal(back.support, fr.support)
    np.testing.assert_array_equal(back.probabilities, fr.probabilities)


def test_radial_model_json_round_trip():
    rng = np.random.default_rng(8)
    pool = rng.gamma(2.0, size=64)
    model = ax.RadialModel(d=3, pool=pool, eval_samples=64)
    back = ax.RadialModel.from_json(model.to_json())
    xs = np.linspace(0.1, 2.0, 7)
    np.testing.assert_allclose(back.phi(xs), model.phi(xs))

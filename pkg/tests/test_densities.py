import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from levelset_lab import densities
from levelset_lab.boxes import cell_centers
from levelset_lab.densities import (
    HolderParams,
    SamplingError,
    UndefinedFitError,
    gamma_exponent_empirical,
    make_cone_1d,
    make_plateau,
    make_uniform_box,
    model_from_id,
    sample,
)


def grid_measure(model, predicate, resolution=20000):
    centers, cellvol = cell_centers(model.domain, resolution)
    return float(np.count_nonzero(predicate(centers))) * cellvol


@pytest.mark.parametrize("maker", [lambda: make_uniform_box(1), make_cone_1d, make_plateau])
def test_unit_mass(maker):
    model = maker()
    mass, err = quad(
        lambda x: float(model.pdf(np.array([[x]]))[0]),
        model.domain.lows[0], model.domain.highs[0], limit=200,
    )
    assert abs(mass - 1.0) < 1e-6


def test_uniform_level_sets():
    model = make_uniform_box(1)
    assert grid_measure(model, lambda x: model.true_set(x, 0.5)) == pytest.approx(1.0)
    assert grid_measure(model, lambda x: model.true_set(x, 2.0)) == 0.0
    # strict vs closed differ exactly on the flat top at lam = 1
    assert grid_measure(model, lambda x: model.true_set(x, 1.0)) == 0.0
    assert grid_measure(model, lambda x: model.true_set_closed(x, 1.0)) == pytest.approx(1.0)


def test_uniform_2d_mass_and_bounds():
    model = make_uniform_box(2)
    pts = sample(model, 512, 0).points
    assert pts.shape == (512, 2)
    assert np.all((pts >= 0) & (pts <= 1))


def test_cone_level_set_and_strips():
    model = make_cone_1d()
    # solve 1 - |x| > 0.5
    assert grid_measure(model, lambda x: model.true_set(x, 0.5)) == pytest.approx(1.0, abs=1e-3)
    # Leb{0 < |p - 0.5| <= 0.1} = two strips of length 0.4 total
    centers, cellvol = cell_centers(model.domain, 200000)
    pv = model.pdf(centers)
    measure = np.count_nonzero((pv != 0.5) & (np.abs(pv - 0.5) <= 0.1)) * cellvol
    assert measure == pytest.approx(0.4, abs=1e-4)


def test_cone_dh_empty_vs_trueset():
    # int_{-1/2}^{1/2} (1 - |x| - 1/2) dx = 1/4 by the closed form
    closed_form = 0.25
    val, _ = quad(lambda x: max(1 - abs(x) - 0.5, 0.0), -1, 1, limit=200)
    assert val == pytest.approx(closed_form, abs=1e-9)
    from levelset_lab.metrics import d_h

    got = d_h(lambda x: np.zeros(x.shape[0], dtype=bool), model := make_cone_1d(), 0.5, 20000)
    assert got == pytest.approx(closed_form, abs=1e-4)


def test_plateau_level_sets():
    model = make_plateau()
    assert grid_measure(model, lambda x: model.true_set(x, 0.5)) == 0.0
    assert grid_measure(model, lambda x: model.true_set_closed(x, 0.5)) == pytest.approx(1.0, abs=1e-3)
    # the flat part {p = lam} has measure one
    centers, cellvol = cell_centers(model.domain, 30000)
    flat = np.count_nonzero(model.pdf(centers) == 0.5) * cellvol
    assert flat == pytest.approx(1.0, abs=1e-3)


def test_plateau_tail_mass():
    model = make_plateau()
    left, _ = quad(lambda x: float(model.pdf(np.array([[x]]))[0]), -1, 0)
    mid, _ = quad(lambda x: float(model.pdf(np.array([[x]]))[0]), 0, 1)
    right, _ = quad(lambda x: float(model.pdf(np.array([[x]]))[0]), 1, 2)
    assert left == pytest.approx(0.25, abs=1e-9)
    assert mid == pytest.approx(0.5, abs=1e-9)
    assert right == pytest.approx(0.25, abs=1e-9)


def test_sampler_determinism():
    model = make_uniform_box(2)
    a = sample(model, 4, seed=77).points
    b = sample(model, 4, seed=77).points
    c = sample(model, 4, seed=78).points
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("maker", [make_cone_1d, make_plateau])
def test_sampler_goodness_of_fit(maker):
    model = maker()
    n = 10_000
    pts = sample(model, n, seed=5).points[:, 0]
    stat = kstest(pts, model.cdf).statistic
    assert stat <= 1.63 / np.sqrt(n)  # 1% critical value


def test_plateau_mass_in_unit_interval():
    n = 10_000
    pts = sample(make_plateau(), n, seed=9).points[:, 0]
    frac = np.mean((pts >= 0) & (pts <= 1))
    se = np.sqrt(0.5 * 0.5 / n)
    assert abs(frac - 0.5) <= 3 * se


def test_rejection_sampler_and_cap(monkeypatch):
    model = model_from_id("pomega:16:1:1:1:+0000000")
    pts = sample(model, 300, seed=3).points
    assert pts.shape == (300, 1)
    assert np.all((pts >= 0) & (pts <= 1))
    monkeypatch.setattr(densities, "MAX_REJECTION_ROUNDS", 0)
    with pytest.raises(SamplingError):
        sample(model, 10, seed=3)


def test_gamma_exponent_cone():
    fit = gamma_exponent_empirical(make_cone_1d(), 0.5, [0.2, 0.1, 0.05, 0.025])
    assert abs(fit.gamma_hat - 1.0) <= 0.05
    assert abs(fit.c0_hat - 4.0) <= 0.4


def test_gamma_exponent_grid_refinement_invariance():
    model = make_cone_1d()
    fit_a = gamma_exponent_empirical(model, 0.5, [0.2, 0.1, 0.05, 0.025])
    fit_b = gamma_exponent_empirical(model, 0.5, [0.16, 0.08, 0.04, 0.02, 0.01])
    assert abs(fit_a.gamma_hat - fit_b.gamma_hat) <= 0.02


def test_gamma_exponent_undefined_on_uniform():
    with pytest.raises(UndefinedFitError):
        gamma_exponent_empirical(make_uniform_box(1), 0.5, [0.05, 0.1, 0.2])


def test_gamma_exponent_pomega_bound():
    model = model_from_id("pomega:16:1:1:1:++0-0+-0")
    eps = np.array([0.004, 0.008, 0.016])
    fit = gamma_exponent_empirical(model, 1.0, eps, resolution=1 << 17)
    ratios = fit.measures / eps**model.params.gamma
    assert np.all(ratios <= model.params.c0)


def test_holder_params_validation():
    with pytest.raises(ValueError):
        HolderParams(beta=1.0, beta_prime=1.0, L=1.0, L_star=1.0, r=1.0,
                     eta=0.1, gamma=2.0, c0=1.0, eps0=0.1, lam=0.5)
    with pytest.raises(ValueError):
        HolderParams(beta=-1.0, beta_prime=1.0, L=1.0, L_star=1.0, r=1.0,
                     eta=0.1, gamma=1.0, c0=1.0, eps0=0.1, lam=0.5)


def test_model_registry():
    assert model_from_id("uniform").model_id == "uniform"
    assert model_from_id("uniform:3").dim == 3
    assert model_from_id("cone1d").model_id == "cone1d"
    assert model_from_id("plateau").model_id == "plateau"
    pw = model_from_id("pomega:16:1:1:1:+-000000")
    assert pw.params.lam == 1.0
    with pytest.raises(ValueError):
        model_from_id("gaussian")
    with pytest.raises(ValueError):
        model_from_id("pomega:16:1:1:1:+x000000")
    with pytest.raises(ValueError):
        model_from_id("pomega:16:1:1")

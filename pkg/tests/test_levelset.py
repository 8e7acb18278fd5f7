import numpy as np
import pytest

from levelset_lab.boxes import Box, ResolutionError, cell_centers
from levelset_lab.densities import make_cone_1d, make_plateau, sample
from levelset_lab.kde import KdeEstimator
from levelset_lab.kernels import product_kernel, rectangular_kernel
from levelset_lab.levelset import FunctionEstimator, plugin_estimate, rasterize

RECT = product_kernel(rectangular_kernel(), 1)


def perturbed_plateau(eps):
    model = make_plateau()
    return FunctionEstimator(lambda x, m=model: m.pdf(x) + eps), model


def test_positive_perturbation_zero_offset_overcovers():
    # p_hat = p + 0.01 at zero offset swallows the whole flat part
    est, model = perturbed_plateau(+0.01)
    estimate = plugin_estimate(est, 0.5, 0.0)
    grid = np.linspace(0.0, 1.0, 101)[:, None]
    assert np.all(estimate.member(grid))


def test_positive_offset_restores_empty_set():
    # 0.51 < 0.52 pointwise on the plateau
    est, model = perturbed_plateau(+0.01)
    estimate = plugin_estimate(est, 0.5, 0.02)
    centers, _ = cell_centers(model.domain, 4096)
    assert not np.any(estimate.member(centers))


def test_negative_offset_targets_closed_set():
    # p_hat = p - 0.01 with ell = -0.02: 0.49 >= 0.48 on the plateau
    est, model = perturbed_plateau(-0.01)
    estimate = plugin_estimate(est, 0.5, -0.02)
    grid = np.linspace(0.0, 1.0, 101)[:, None]
    assert np.all(estimate.member(grid))


def test_offset_monotonicity():
    model = make_cone_1d()
    pts = sample(model, 512, seed=4).points
    est = KdeEstimator(points=pts, kernel=RECT, h=0.1)
    centers, _ = cell_centers(model.domain, 2048)
    ells = [-0.05, 0.0, 0.02, 0.1]
    members = [plugin_estimate(est, 0.5, e).member(centers) for e in ells]
    for small, large in zip(members[1:], members[:-1]):
        assert np.all(~small | large)  # larger offset is nested inside


def test_tie_resolves_to_member():
    est = FunctionEstimator(lambda x: np.full(x.shape[0], 0.75))
    estimate = plugin_estimate(est, 0.5, 0.25)  # threshold hits exactly
    assert estimate.member(np.array([[0.0]]))[0]


def test_rasterize_known_interval():
    member = lambda x: (x[:, 0] >= 0.0) & (x[:, 0] <= 0.5)
    raster = rasterize(member, Box((0.0,), (1.0,)), 1000)
    assert abs(raster.measure() - 0.5) <= 0.001


def test_rasterize_empty_and_full():
    box = Box((0.0,), (2.0,))
    empty = rasterize(lambda x: np.zeros(x.shape[0], bool), box, 100)
    assert empty.measure() == 0.0
    assert not empty.bits.any()
    full = rasterize(lambda x: np.ones(x.shape[0], bool), box, 100)
    assert full.measure() == pytest.approx(box.volume)


def test_rasterize_guards():
    box = Box((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ResolutionError):
        rasterize(lambda x: np.ones(x.shape[0], bool), box, 1 << 13)
    with pytest.raises(ValueError):
        rasterize(lambda x: np.ones(x.shape[0], bool), box, 1)


def test_raster_predicate_lookup():
    box = Box((0.0,), (1.0,))
    member = lambda x: x[:, 0] < 0.25
    raster = rasterize(member, box, 256)
    probe = raster.as_predicate()
    assert probe(np.array([[0.1]]))[0]
    assert not probe(np.array([[0.9]]))[0]
    assert not probe(np.array([[3.0]]))[0]  # outside the box


def test_dh_blind_to_level_set_definition_choice():
    # the weight |p - lam| vanishes on {p = lam}, so swapping the open and
    # closed target sets cannot change the weighted symmetric difference
    model = make_plateau()
    centers, cellvol = cell_centers(model.domain, 8192)
    pv = model.pdf(centers)
    weight = np.abs(pv - 0.5)
    truth_open = model.true_set(centers, 0.5)
    truth_closed = model.true_set_closed(centers, 0.5)
    rng = np.random.default_rng(12)
    for _ in range(20):
        a, b = np.sort(rng.uniform(-1, 2, size=2))
        g = (centers[:, 0] >= a) & (centers[:, 0] <= b)
        d_open = float(np.sum(weight[g ^ truth_open]) * cellvol)
        d_closed = float(np.sum(weight[g ^ truth_closed]) * cellvol)
        assert d_open == pytest.approx(d_closed, abs=1e-12)


def test_csv_export_roundtrip(tmp_path):
    box = Box((0.0,), (1.0,))
    raster = rasterize(lambda x: x[:, 0] > 0.5, box, 64)
    path = tmp_path / "raster.csv"
    raster.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "cell,x0,bit"
    assert len(rows) == 65
    bits = np.array([int(r.split(",")[-1]) for r in rows[1:]], dtype=bool)
    assert np.array_equal(bits, raster.bits)
    centers = np.array([float(r.split(",")[1]) for r in rows[1:]])
    expect, _ = cell_centers(box, 64)
    assert np.allclose(centers, expect[:, 0])

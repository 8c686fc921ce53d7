import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mbgp.gp_core import spectral_density, tensor_grid, Grid
from mbgp.rkhs_lab import (
    HigherOrderKernel,
    convolution_error,
    convolve_factor,
    convolution_values,
    eval_tensor_kernel,
    fit_loglog,
    kernel_coeffs,
    kernel_coeffs_exact,
    kernel_fourier,
    kernel_moment,
    lower_bound_check,
    lower_bound_constant,
    numerical_fourier,
    scaled_kernel_fourier,
)
from mbgp.truths import (
    bump,
    density_normalizer,
    kink_series_normalizer,
    make_truth,
    global_smoothness_active,
)


def test_coeffs_low_orders():
    assert kernel_coeffs(1) == (1.0,)
    assert kernel_coeffs(2) == (1.5, -0.5)
    assert kernel_coeffs_exact(3) == (Fraction(15, 8), Fraction(-5, 4), Fraction(1, 8))


@pytest.mark.parametrize("r", [0, 7, 2.5])
def test_coeffs_order_range(r):
    with pytest.raises(ValueError):
        kernel_coeffs(r)


@pytest.mark.parametrize("r", range(1, 7))
def test_moment_identities(r):
    assert abs(kernel_moment(r, 0) - 1) < 1e-8
    for j in range(1, r):
        assert abs(kernel_moment(r, j)) < 1e-6


def test_moment_identities_exact_gaussian_moments():
    # E[Z^2k] = (2k-1)!!, so the moment identities are exact rational statements
    for r in range(1, 7):
        c = kernel_coeffs_exact(r)
        dfact = lambda k: math.prod(range(2 * k - 1, 0, -2)) if k else 1
        for j in range(r):
            m = sum(ci * dfact(i + j) for i, ci in enumerate(c))
            assert m == (1 if j == 0 else 0)


def test_tensor_kernel_values():
    assert eval_tensor_kernel(1, [1.0], [0.0]) == pytest.approx(0.398942, abs=1e-6)
    assert eval_tensor_kernel(2, [1.0], [0.0]) == pytest.approx(0.598413, abs=1e-6)
    with pytest.raises(ValueError):
        eval_tensor_kernel(1, [1.0, 0.0], [0.0, 0.0])


def test_tensor_kernel_unit_mass():
    val, _ = integrate.dblquad(
        lambda y, x: eval_tensor_kernel(2, [2.0, 5.0], [x, y]), -6, 6, -3, 3, epsabs=1e-11
    )
    assert abs(val - 1.0) < 1e-8


def test_fourier_values():
    for r in (1, 3):
        for d in (1, 2):
            assert kernel_fourier(r, np.zeros(d)) == 1.0
    assert kernel_fourier(1, [2.0]) == pytest.approx(math.exp(-2), abs=1e-12)


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("d", [1, 2])
def test_fourier_matches_quadrature(r, d):
    lam = np.random.default_rng(10 * r + d).uniform(-4, 4, size=(10, d))
    for l in lam:
        assert abs(numerical_fourier(r, l) - kernel_fourier(r, l)) < 1e-6


def test_fourier_two_dim_nonseparable_quadrature():
    lam = np.array([1.1, -0.6])
    G = HigherOrderKernel.of_order(2)
    val, _ = integrate.dblquad(
        lambda y, x: float(G(x) * G(y)) * math.cos(lam[0] * x + lam[1] * y), -10, 10, -10, 10, epsabs=1e-10
    )
    assert abs(val - kernel_fourier(2, lam)) < 1e-6


def test_fourier_envelope_and_positivity():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        r = int(rng.integers(1, 7))
        lam = rng.normal(scale=3, size=int(rng.integers(1, 4)))
        v = kernel_fourier(r, lam)
        env = float(np.exp(-0.5 * np.sum(lam * lam)))
        assert v > 0 or env == 0
        assert v >= env


def test_squared_scaled_transform_proportional_to_spectral_density():
    a = 1.7
    lams = np.linspace(-5, 5, 41)
    ratios = [scaled_kernel_fourier(1, [2 * a], [l]) ** 2 / spectral_density([l], [a]) for l in lams]
    assert np.ptp(ratios) / np.mean(ratios) < 1e-6


def test_bump_flat_and_support():
    x = np.linspace(-1, 2, 101)
    assert np.all(bump(x) == 1.0)
    assert np.all(bump(np.array([-2.0, -5.0, 3.0, 7.0])) == 0.0)
    y = np.linspace(-2, 3, 1001)
    b = bump(y)
    assert np.all((b >= 0) & (b <= 1))


def test_constant_truth_error_vanishes():
    g = Grid((np.linspace(0.1, 0.9, 81),))
    assert convolution_error(make_truth("constant", d=1, value=2.0), 1, [50.0], g) <= 1e-3


def test_kink_error_halving_ratio():
    t = make_truth("T1", d=1)
    g = tensor_grid(1, 101)
    e1 = convolution_error(t, 1, [10.0], g)
    e2 = convolution_error(t, 1, [20.0], g)
    assert abs(e2 / e1 - 2 ** -1.5) < 0.2 * 2 ** -1.5


def test_additive_error_dominated_by_fixed_scale():
    t = make_truth("T3", d=2)
    g = tensor_grid(2, 101)
    e_a = convolution_error(t, 1, [8.0, 2.0], g)
    e_b = convolution_error(t, 1, [16.0, 2.0], g)
    assert abs(e_b - e_a) / e_a < 0.1
    # oracle: the two 1-d errors add; both peak at the centre of the cube
    e1 = convolution_error(make_truth("T1", d=1), 1, [8.0], Grid((g.axes[0],)))
    sq = t.terms[1].factors[0][1]
    G = HigherOrderKernel.of_order(1)
    e2 = max(abs(convolve_factor(G, sq, 2.0, x) - (x - 0.5) ** 2) for x in g.axes[1])
    assert abs(e2 - 0.25) < 1e-3  # 1/a^2 up to the bump's tail
    assert abs(e_a - (e1 + e2)) < 1e-6


def test_error_decreases_in_each_scale():
    t = make_truth("T1", d=1)
    g = tensor_grid(1, 101)
    errs = [convolution_error(t, 1, [a], g) for a in (2, 4, 8, 16)]
    assert all(b <= 1.05 * a for a, b in zip(errs, errs[1:]))


def test_convolution_rejects_inactive_scale_on_used_coordinate():
    with pytest.raises(ValueError):
        convolution_error(make_truth("T1", d=2), 1, [0.0, 1.0], tensor_grid(2, 5))


def test_lower_bound_sweep():
    rep = lower_bound_check([4, 8, 16, 32, 64], with_grid_sup=False)
    assert np.all(rep.center_error > rep.bound)
    assert -1.6 <= rep.slope <= -1.4
    rep2 = lower_bound_check([8, 16, 32, 64, 128], with_grid_sup=False)
    assert abs(rep2.C0 / rep.C0 - 1) < 0.1


def test_lower_bound_constant_value():
    # closed form via the lower incomplete gamma function
    from scipy.special import gamma, gammainc

    expect = 2 ** 0.75 * gamma(1.25) * gammainc(1.25, 1.125) / math.sqrt(math.pi)
    assert lower_bound_constant() == pytest.approx(expect, rel=1e-10)


def test_lower_bound_validation():
    with pytest.raises(ValueError):
        lower_bound_check([4, 2])
    with pytest.raises(ValueError):
        lower_bound_check([0.5, 2])


def test_fit_loglog_exact_power():
    x = np.array([1.0, 2.0, 4.0])
    assert fit_loglog(x, 3 * x ** -1.5)[0] == pytest.approx(-1.5)


def test_normalizer_series():
    t = make_truth("T1", d=1)
    assert abs(density_normalizer(t) - kink_series_normalizer()) < 1e-8


def test_truth_catalog_metadata():
    assert global_smoothness_active(make_truth("T1", d=2)) == 1.5
    assert global_smoothness_active(make_truth("T2")) == math.inf
    assert make_truth("T1", d=2).active == (0,)
    with pytest.raises(ValueError):
        make_truth("nope")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_extension_matches_raw_on_cube(x):
    for name in ("T1", "T2", "T3", "constant"):
        t = make_truth(name, d=2)
        assert t.extended([x])[0] == pytest.approx(t([x])[0], abs=1e-15)
        assert abs(t([x])[0]) <= t.sup_bound() + 1e-12

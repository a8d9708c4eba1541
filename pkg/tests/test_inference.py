import numpy as np
import pytest

from ebel.blocking import EBEL1, EBEL2, WeightFn, forward_backward_block_sums, forward_block_sums
from ebel.el_core import log_el_ratio
from ebel.errors import DegenerateSample, DimensionMismatch, HullViolation
from ebel.inference import (EbelConfig, EstimatingFunction, SmoothFunctionModel, ebel_ci_mean,
                            ebel_region_member, ebel_statistic, ebel_statistic_ef,
                            ebel_statistic_smooth)
from ebel.limit_law import QuantileTable
from ebel.processes import ArmaSpec, simulate_arma

WEIGHTS = [WeightFn.constant(), WeightFn.linear(), WeightFn.cosine_bell()]


@pytest.fixture
def ar_series():
    return simulate_arma(ArmaSpec(phi=(0.5,), innovation="standard_normal"), 400,
                         np.random.default_rng(0))


def test_statistic_at_sample_mean(ar_series):
    x = ar_series
    T = forward_block_sums(x, x.mean(), WeightFn.constant())
    assert abs(T[-1, 0]) < 1e-10
    s = ebel_statistic(x, x.mean())
    assert np.isfinite(s) and s >= 0


def test_ebel2_uses_one_over_n(ar_series):
    x = ar_series
    cfg = EbelConfig(EBEL2, WeightFn.linear())
    T = forward_backward_block_sums(x, 0.1, WeightFn.linear())
    assert T.shape[0] == 2 * x.size
    assert ebel_statistic(x, 0.1, cfg) == -log_el_ratio(T) / x.size


def test_ebel2_on_palindrome_matches_doubled_forward_points():
    half = np.random.default_rng(1).standard_normal(20)
    x = np.concatenate([half, half[::-1]])
    mu = x.mean()
    w = WeightFn.linear()
    T = forward_block_sums(x, mu, w)
    doubled = np.vstack([T, T])
    assert ebel_statistic(x, mu, EbelConfig(EBEL2, w)) == -log_el_ratio(doubled) / x.size


def test_statistic_infinite_far_from_data(ar_series):
    x = ar_series
    assert ebel_statistic(x, x.max() + 1.0) == np.inf
    assert not ebel_region_member(x, x.mean() + 10 * x.std())


@pytest.mark.parametrize("w", WEIGHTS)
@pytest.mark.parametrize("scheme", [EBEL1, EBEL2])
def test_weight_scale_invariance_exact(ar_series, w, scheme):
    for mu in (-0.2, 0.0, 0.15):
        a = ebel_statistic(ar_series, mu, EbelConfig(scheme, w))
        b = ebel_statistic(ar_series, mu, EbelConfig(scheme, w.scaled(3.0)))
        assert a == b


def test_tabulated_weight_scale_invariance():
    knots = [(0.0, 0.1), (0.5, 1.0), (1.0, 0.3)]
    big = [(t, 7.3 * v) for t, v in knots]
    x = np.random.default_rng(2).standard_normal(200)
    a = ebel_statistic(x, 0.05, EbelConfig(EBEL1, WeightFn.tabulated(knots)))
    b = ebel_statistic(x, 0.05, EbelConfig(EBEL1, WeightFn.tabulated(big)))
    assert a == pytest.approx(b, rel=1e-12)


def test_affine_equivariance_2d():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((300, 2))
    A = np.array([[1.5, -0.4], [0.7, 2.0]])
    v = np.array([3.0, -1.0])
    mu = np.array([0.05, -0.03])
    for cfg in (EbelConfig(), EbelConfig(EBEL2, WeightFn.cosine_bell())):
        a = ebel_statistic(X, mu, cfg)
        b = ebel_statistic(X @ A.T + v, A @ mu + v, cfg)
        assert abs(a - b) < 1e-8


def test_ci_contains_mean_and_boundary(ar_series):
    x = ar_series
    for w in WEIGHTS:
        for scheme in (EBEL1, EBEL2):
            cfg = EbelConfig(scheme, w)
            ci = ebel_ci_mean(x, cfg)
            assert ci.lower < x.mean() < ci.upper
            a = cfg.critical_value()
            h = 1e-6 * x.std()
            assert ebel_statistic(x, ci.lower + h, cfg) <= a < ebel_statistic(x, ci.lower - h, cfg)
            assert ebel_statistic(x, ci.upper - h, cfg) <= a < ebel_statistic(x, ci.upper + h, cfg)


def test_region_ordering(ar_series):
    x = ar_series
    cfg = EbelConfig()
    grid = np.linspace(x.mean() - 0.5, x.mean() + 0.5, 41)
    stats = np.array([ebel_statistic(x, m, cfg) for m in grid])
    members = np.array([ebel_region_member(x, m, cfg) for m in grid])
    a = cfg.critical_value()
    np.testing.assert_array_equal(members, stats <= a)
    for s0 in stats[np.isfinite(stats)]:
        # {mu : stat(mu) <= stat(mu0)} contains mu0 and every more plausible point
        assert np.all(members[stats <= s0] | (s0 > a))


def test_ci_errors():
    with pytest.raises(DegenerateSample):
        ebel_ci_mean(np.zeros(40), strict=True)
    with pytest.warns(UserWarning):
        ci = ebel_ci_mean(np.zeros(40))
    assert ci.degenerate and ci.width == 0.0
    with pytest.raises(DimensionMismatch):
        ebel_ci_mean(np.ones((40, 2)))


def test_calibration_sources():
    assert EbelConfig().critical_value() == 2.51
    assert EbelConfig(EBEL2, WeightFn.cosine_bell()).critical_value() == 3.42
    assert EbelConfig(calibration=3.0).critical_value() == 3.0
    table = QuantileTable("EBEL1", "linear", 1, [0.9, 0.95], [5.5, 7.0], [0.1, 0.1], 1000, 100, 0)
    cfg = EbelConfig(EBEL1, WeightFn.linear(), 0.95, table)
    assert cfg.critical_value() == 7.0
    with pytest.raises(ValueError):
        EbelConfig(EBEL1, WeightFn.constant(), 0.9, table).critical_value()
    with pytest.raises(ValueError):
        EbelConfig(level=0.95).critical_value()
    with pytest.raises(ValueError):
        EbelConfig().critical_value(d=2)
    with pytest.raises(ValueError):
        EbelConfig("BEL(3)")


def test_ef_matches_mean_statistic(ar_series):
    G = EstimatingFunction(lambda x, th: x - th)
    Gv = EstimatingFunction(lambda X, th: X - th, vectorized=True)
    for scheme in (EBEL1, EBEL2):
        cfg = EbelConfig(scheme, WeightFn.linear())
        ref = ebel_statistic(ar_series, 0.12, cfg)
        assert ebel_statistic_ef(ar_series, G, 0.12, cfg) == ref
        assert ebel_statistic_ef(ar_series, Gv, 0.12, cfg) == ref


def test_ef_zero_function():
    G = EstimatingFunction(lambda x, th: 0.0)
    with pytest.raises(HullViolation):
        ebel_statistic_ef(np.arange(10.0), G, 1.0)


def test_smooth_identity_equals_plain_statistic():
    X = np.random.default_rng(4).standard_normal((250, 2))
    theta = np.array([0.04, -0.07])
    model = SmoothFunctionModel(lambda m: m)
    assert ebel_statistic_smooth(X, model, theta) == ebel_statistic(X, theta)


def test_smooth_sum_is_minimised_at_sum_of_means():
    X = np.random.default_rng(5).standard_normal((300, 2))
    model = SmoothFunctionModel(lambda m: m[0] + m[1], jacobian=lambda m: np.array([[1.0, 1.0]]))
    center = X.mean(axis=0).sum()
    s0 = ebel_statistic_smooth(X, model, center)
    for th in center + np.linspace(-0.2, 0.2, 9):
        assert ebel_statistic_smooth(X, model, th) >= s0 - 1e-9
    # the profile never exceeds the statistic at any point of the manifold
    mu = np.array([center / 2 + 0.05, center / 2 - 0.05])
    assert s0 <= ebel_statistic(X, mu) + 1e-12


def test_smooth_profile_matches_brute_force():
    X = np.random.default_rng(6).standard_normal((200, 2)) + [0.2, -0.1]
    theta = 0.3
    model = SmoothFunctionModel(lambda m: m[0] + m[1])
    prof = ebel_statistic_smooth(X, model, theta)
    # scan the line mu = (s, theta - s)
    scan = min(ebel_statistic(X, [s, theta - s]) for s in np.linspace(-0.3, 0.6, 901))
    assert prof <= scan + 1e-7
    assert prof == pytest.approx(scan, abs=1e-3)


def test_smooth_rank_check():
    model = SmoothFunctionModel(lambda m: m[0] ** 2, jacobian=lambda m: np.array([[2 * m[0], 0.0]]))
    with pytest.raises(ValueError):
        model.check_rank(np.zeros(2))
    with pytest.raises(DimensionMismatch):
        SmoothFunctionModel(lambda m: np.array([m[0], m[0], m[0]])).check_rank(np.ones(2))


def test_finite_difference_jacobian():
    model = SmoothFunctionModel(lambda m: np.array([m[0] * m[1], np.sin(m[0])]))
    J = model.jacobian(np.array([0.3, 2.0]))
    np.testing.assert_allclose(J, [[2.0, 0.3], [np.cos(0.3), 0.0]], atol=1e-8)


def test_lag_one_autocorrelation_profile():
    # replicate 208 of the AR(1) rejection-rate study used to hit a Newton
    # stall on a badly conditioned point set
    from ebel.limit_law import replicate_rng
    u = simulate_arma(ArmaSpec(phi=(0.5,), innovation="standard_normal"), 1001,
                      replicate_rng(1, 208))
    X = np.column_stack([u[:-1], u[:-1] ** 2, u[:-1] * u[1:]])
    model = SmoothFunctionModel(lambda m: (m[2] - m[0] ** 2) / (m[1] - m[0] ** 2))
    s = ebel_statistic_smooth(X, model, 0.5)
    assert np.isfinite(s) and s >= 0
    # the sample mean lies on the manifold through the plug-in estimate
    rho_hat = float(model.value(X.mean(axis=0))[0])
    assert ebel_statistic_smooth(X, model, rho_hat) <= ebel_statistic(X, X.mean(axis=0)) + 1e-12

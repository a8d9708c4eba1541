import numpy as np
import pytest
from scipy.stats import chi2

from ebel.errors import NonCausal
from ebel.processes import (BLOCK_SENSITIVITY_MA2, MA1_STAR_THRESHOLD, COVERAGE_PROCESSES, ArmaSpec,
                            Ma1StarSpec, draw_innovations, innovation_variance,
                            long_run_variance, parse_process, simulate, simulate_arma,
                            simulate_ma1_star)


def acf(x, k):
    c = x - x.mean()
    return np.dot(c[:-k], c[k:]) / np.dot(c, c)


def test_white_noise():
    x = simulate_arma(ArmaSpec(innovation="standard_normal"), 2000, np.random.default_rng(0))
    assert abs(acf(x, 1)) < 0.05


def test_ar1_autocorrelation():
    x = simulate_arma(ArmaSpec(phi=(0.9,)), 5000, np.random.default_rng(1))
    assert acf(x, 1) == pytest.approx(0.9, abs=0.03)


def test_ma2_cuts_off():
    x = simulate_arma(ArmaSpec(theta=(0.4, -0.6)), 5000, np.random.default_rng(10))
    assert abs(acf(x, 3)) < 0.04


def test_recursion_matches_explicit_loop():
    spec = ArmaSpec(phi=(0.5, -0.2), theta=(0.3,), innovation="standard_normal", burn_in=0)
    rng = np.random.default_rng(3)
    x = simulate_arma(spec, 50, rng)
    e = np.random.default_rng(3).standard_normal(50)
    ref = np.zeros(50)
    for t in range(50):
        ref[t] = e[t]
        if t >= 1:
            ref[t] += 0.5 * ref[t - 1] + 0.3 * e[t - 1]
        if t >= 2:
            ref[t] += -0.2 * ref[t - 2]
    np.testing.assert_allclose(x, ref, atol=1e-12)


def test_noncausal_rejected():
    with pytest.raises(NonCausal):
        simulate_arma(ArmaSpec(phi=(1.0,)), 10, np.random.default_rng(0))
    with pytest.raises(NonCausal):
        long_run_variance(ArmaSpec(phi=(0.5, 0.6)))
    assert ArmaSpec(phi=(0.5, 0.3)).is_causal()


def test_ma1_star_threshold():
    q = MA1_STAR_THRESHOLD
    assert chi2.cdf(q, 1) == pytest.approx(0.8, abs=1e-10)
    # independent check: P(Z^2 < q) = 2 Phi(sqrt q) - 1 = 0.8
    from math import erf, sqrt
    assert erf(sqrt(q / 2)) == pytest.approx(0.8, abs=1e-10)


def test_ma1_star_moments():
    x = simulate_ma1_star(50_000, np.random.default_rng(4))
    assert abs(x.mean()) < 0.03
    assert abs(acf(x, 2)) < 0.03


def test_long_run_variance_closed_forms():
    assert long_run_variance(ArmaSpec(innovation="standard_normal")) == 1.0
    assert long_run_variance(ArmaSpec(theta=(-1.0,))) == 0.0
    assert long_run_variance(ArmaSpec(phi=(0.5,), innovation="standard_normal")) == \
        pytest.approx(4.0)
    assert long_run_variance(ArmaSpec(theta=(0.4, -0.6))) == pytest.approx(2 * 0.8 ** 2)


def test_ma1_star_long_run_variance_by_simulation():
    x = simulate_ma1_star(400_000, np.random.default_rng(5))
    # var + 2 cov(X_0, X_1); the process is 1-dependent
    c = x - x.mean()
    emp = c.var() + 2 * np.mean(c[:-1] * c[1:])
    assert long_run_variance(Ma1StarSpec()) == pytest.approx(emp, rel=0.03)


def batch_means_lrv(x, batches=100):
    L = x.size // batches
    means = x[:L * batches].reshape(batches, L).mean(axis=1)
    return L * means.var(ddof=1)


@pytest.mark.parametrize("label", [k for k, v in COVERAGE_PROCESSES.items() if isinstance(v, ArmaSpec)])
def test_long_run_variance_matches_batch_means(label):
    spec = COVERAGE_PROCESSES[label]
    target = long_run_variance(spec)
    assert target > 0
    rng = np.random.default_rng(6)
    est = np.mean([batch_means_lrv(simulate_arma(spec, 100_000, rng)) for _ in range(4)])
    assert est == pytest.approx(target, rel=0.10)


def test_innovations():
    rng = np.random.default_rng(7)
    e = draw_innovations("centered_chisq1", 100_000, rng)
    assert abs(e.mean()) < 0.02
    assert e.var() == pytest.approx(2.0, abs=0.1)
    for kind in ("bernoulli_centered", "pareto_centered", "standard_normal"):
        v = draw_innovations(kind, 400_000, rng)
        assert abs(v.mean()) < 0.02
        assert v.var() == pytest.approx(innovation_variance(kind), rel=0.1)
    with pytest.raises(ValueError):
        ArmaSpec(innovation="cauchy")


def test_determinism():
    spec = COVERAGE_PROCESSES["ARMA(1,1) 0.7,-0.5"]
    a = simulate(spec, 200, np.random.default_rng(11))
    b = simulate(spec, 200, np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)


def test_parse_process():
    assert parse_process("ma1star") == Ma1StarSpec()
    assert parse_process("ar:0.9").phi == (0.9,)
    spec = parse_process("arma:0.9/-0.6,-0.3", innovation="standard_normal")
    assert spec.phi == (0.9,) and spec.theta == (-0.6, -0.3)
    assert spec.innovation == "standard_normal"
    assert parse_process("MA(2) 0.4,-0.6").theta == (0.4, -0.6)
    assert parse_process("wn").label == "WN"
    with pytest.raises(ValueError):
        parse_process("garch:1")
    with pytest.raises(NonCausal):
        parse_process("ar:1.2")
    assert BLOCK_SENSITIVITY_MA2.theta == (0.5, 0.3)

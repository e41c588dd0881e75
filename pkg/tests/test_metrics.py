import numpy as np
import pytest

from vrft_lab.errors import EmptySeries, SeriesTooShort, TooFewRuns
from vrft_lab.lti import SignalSeries
from vrft_lab.metrics import (
    MetricsReport,
    avg_psd,
    ci_halfwidth,
    classify_good,
    failed_report,
    rmse,
    score_series,
    summarize,
    welch_psd,
)

TS = 540.0


class TestRmse:
    def test_matches_direct_sum_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(1000) + 21.0
        t = SignalSeries(x, TS)
        acc = 0.0
        for v in x:
            acc += (v - 21.0) ** 2
        assert abs(rmse(t, 21.0) - np.sqrt(acc / x.size)) < 1e-12

    def test_empty_raises(self):
        with pytest.raises(EmptySeries):
            rmse(SignalSeries(np.zeros(0), TS), 0.0)


class TestWelch:
    def test_white_noise_integral_matches_variance(self):
        for seed in range(10):
            x = np.random.default_rng(seed).standard_normal(4096)
            t = SignalSeries(x, TS)
            f, p = welch_psd(t)
            integral = getattr(np, "trapezoid", np.trapz)(p, f)
            assert integral == pytest.approx(np.var(x), rel=0.10)

    def test_sinusoid_peak_at_its_frequency(self):
        f0 = 1.0 / (20.0 * TS)
        n = 4096
        x = np.sin(2 * np.pi * f0 * np.arange(n) * TS)
        f, p = welch_psd(SignalSeries(x, TS))
        assert abs(f[np.argmax(p)] - f0) <= f[1] - f[0]

    def test_constant_signal_is_flat_zero(self):
        _, p = welch_psd(SignalSeries(np.full(1024, 7.5), TS))
        assert np.max(p) < 1e-20

    def test_short_series_raises(self):
        with pytest.raises(SeriesTooShort):
            welch_psd(SignalSeries(np.zeros(8), TS))

    def test_short_records_use_smaller_segments(self):
        # lengths below 2*256 still produce a finite estimate
        x = np.random.default_rng(1).standard_normal(100)
        assert np.isfinite(avg_psd(SignalSeries(x, TS)))


class TestEllipse:
    def test_boundary_is_inclusive(self):
        assert classify_good(1.0, 0.0)
        assert classify_good(0.0, 15.0)
        assert classify_good(0.6, 15.0 * 0.8)  # 0.36 + 0.64 == 1
        assert not classify_good(1.0 + 1e-9, 0.0)
        assert not classify_good(0.0, 15.0 + 1e-6)

    def test_score_series(self):
        x = 21.0 + 0.01 * np.random.default_rng(2).standard_normal(2048)
        rep = score_series(SignalSeries(x, TS), 21.0)
        assert rep.good
        assert rep.n_samples == 2048

    def test_failed_report(self):
        rep = failed_report(100)
        assert not rep.good
        assert rep.e_rmse >= 1e6


class TestSummaries:
    def test_summarize_matches_manual(self):
        reports = [MetricsReport(0.1, 5.0, True, 10),
                   MetricsReport(0.3, 9.0, True, 10),
                   MetricsReport(2.0, 30.0, False, 10)]
        s = summarize(reports, losses=[1.0, 2.0, 3.0])
        assert s.rmse_mean == pytest.approx(np.mean([0.1, 0.3, 2.0]))
        assert s.percent_good == pytest.approx(2.0 / 3.0)
        assert s.loss_mean == pytest.approx(2.0)
        sd = np.std([0.1, 0.3, 2.0], ddof=1)
        assert s.rmse_ci == pytest.approx(1.96 * sd / np.sqrt(3))

    def test_too_few_runs(self):
        with pytest.raises(TooFewRuns):
            summarize([MetricsReport(0.1, 5.0, True, 10)])
        with pytest.raises(TooFewRuns):
            ci_halfwidth(np.array([1.0]))

    def test_losses_must_align(self):
        reports = [MetricsReport(0.1, 5.0, True, 10),
                   MetricsReport(0.3, 9.0, True, 10)]
        with pytest.raises(TooFewRuns):
            summarize(reports, losses=[1.0])

import math

import numpy as np
import pytest
from scipy import stats

from cbsurv import (
    ConfigurationError,
    SurvivalData,
    relative_information,
    sample_case_base,
    sampling_offset,
)
from cbsurv.errors import DataError


class TestOffset:
    def test_closed_form(self):
        assert sampling_offset(1000.0, 100) == pytest.approx(math.log(10), abs=1e-12)
        assert sampling_offset(1000.0, 100) == pytest.approx(2.302585, abs=1e-6)

    def test_equal_sizes(self):
        assert sampling_offset(50.0, 50) == 0.0

    def test_toy_dataset_values(self):
        # B = 6, c = 2, ratio 100 -> b = 200
        assert sampling_offset(6.0, 200) == pytest.approx(math.log(0.03), abs=1e-12)
        assert sampling_offset(6.0, 200) == pytest.approx(-3.506558, abs=1e-6)

    def test_domain(self):
        with pytest.raises(DataError):
            sampling_offset(0.0, 10)
        with pytest.raises(DataError):
            sampling_offset(10.0, 0)

    def test_offset_identity_within_ulps(self):
        # exp/log round trips limit the identity to ~|log(B/b)| * eps / 2, so
        # 4 ulps covers every realistic sampling offset
        for B, b in [(6.0, 200), (123.456, 7), (5000.0, 137), (2.5, 250), (8e4, 100)]:
            value = math.exp(sampling_offset(B, b)) * b / B
            assert abs(value - 1.0) <= 4 * np.finfo(float).eps


class TestRelativeInformation:
    def test_symmetric(self):
        assert relative_information(40, 40) == pytest.approx(20.0)

    def test_hundred_to_one_variance_inflation(self):
        # variance ratio (1/c + 1/(100c)) / (1/c) = 1.01: one percent above the
        # infinite-base limit
        c = 50
        ratio = (1 / c + 1 / (100 * c)) / (1 / c)
        assert ratio == pytest.approx(1.01, abs=1e-12)
        assert relative_information(c, 100 * c) == pytest.approx(c / 1.01, rel=1e-12)

    def test_closed_form(self):
        assert relative_information(50, 5000) == pytest.approx(5000 * 50 / 5050, rel=1e-12)
        assert relative_information(50, 5000) == pytest.approx(49.50495, abs=1e-5)

    def test_domain(self):
        with pytest.raises(DataError):
            relative_information(0, 5)


class TestSampleCaseBase:
    def test_exact_counts(self, toy_dataset):
        s = sample_case_base(toy_dataset, ratio=100, seed=0)
        assert s.n_cases == 2
        assert s.n_base == 200
        assert len(s) == 202
        assert int(s.labels.sum()) == 2

    def test_ratio_of_100(self, exponential_dataset):
        s = sample_case_base(exponential_dataset, ratio=100, seed=1)
        assert s.n_base == 100 * exponential_dataset.n_events

    def test_case_moments_at_event_times(self, toy_dataset):
        s = sample_case_base(toy_dataset, ratio=5, seed=0)
        case_times = s.times[s.labels == 1]
        assert sorted(case_times) == [1.0, 3.0]

    def test_base_times_within_follow_up(self, toy_dataset):
        s = sample_case_base(toy_dataset, ratio=100, seed=2)
        base_times = s.times[s.labels == 0]
        assert np.all(base_times > 0.0)
        assert np.all(base_times <= 3.0)

    def test_degenerate_single_subject(self):
        d = SurvivalData([10.0], [1], [[0.0]])
        s = sample_case_base(d, ratio=1, seed=3)
        assert len(s) == 2
        assert s.times[s.labels == 1][0] == 10.0
        base_time = s.times[s.labels == 0][0]
        assert 0.0 < base_time <= 10.0

    def test_no_events_rejected(self):
        d = SurvivalData([1.0, 2.0], [0, 0], np.zeros((2, 1)))
        with pytest.raises(DataError, match="no events"):
            sample_case_base(d, ratio=10, seed=0)

    def test_bad_ratio_rejected(self, toy_dataset):
        with pytest.raises(ConfigurationError):
            sample_case_base(toy_dataset, ratio=0, seed=0)

    def test_deterministic(self, toy_dataset):
        a = sample_case_base(toy_dataset, ratio=50, seed=9)
        b = sample_case_base(toy_dataset, ratio=50, seed=9)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.covariates, b.covariates)

    def test_offset_matches_sample(self, exponential_dataset):
        s = sample_case_base(exponential_dataset, ratio=10, seed=4)
        assert s.offset == sampling_offset(s.total_follow_up, s.n_base)

    def test_follow_up_proportional_allocation(self):
        # follow-ups 9 and 1, one event: the first subject holds 90% of
        # person-time and should receive ~90% of the base moments; subjects
        # are tagged through a covariate so each moment's source is known
        d = SurvivalData([9.0, 1.0], [0, 1], [[1.0], [2.0]])
        share = []
        for seed in range(1000):
            s = sample_case_base(d, ratio=100, seed=seed)
            tags = s.covariates[s.labels == 0, 0]
            share.append(np.mean(tags == 1.0))
        assert np.mean(share) == pytest.approx(0.9, abs=0.02)

    def test_base_allocation_chi_square_policy(self):
        rng = np.random.default_rng(0)
        follow_ups = np.array([5.0, 1.0, 3.0, 0.5, 2.5])
        d = SurvivalData(follow_ups, [1, 1, 0, 0, 0], np.arange(5.0)[:, None])
        rejections = 0
        for seed in range(20):
            s = sample_case_base(d, ratio=500, seed=seed)
            tags = s.covariates[s.labels == 0, 0]
            observed = np.array([(tags == k).sum() for k in range(5)])
            expected = s.n_base * follow_ups / follow_ups.sum()
            p = stats.chisquare(observed, expected).pvalue
            if p <= 0.01:
                rejections += 1
                print(f"flag: allocation chi-square rejected at seed {seed} (p={p:.4f})")
        assert rejections < 3

    def test_within_subject_uniformity_ks_policy(self):
        d = SurvivalData([4.0, 1.0], [1, 0], [[1.0], [2.0]])
        rejections = 0
        for seed in range(20):
            s = sample_case_base(d, ratio=500, seed=seed)
            times = s.times[(s.labels == 0) & (s.covariates[:, 0] == 1.0)]
            p = stats.kstest(times, "uniform", args=(0.0, 4.0)).pvalue
            if p <= 0.01:
                rejections += 1
                print(f"flag: uniformity KS rejected at seed {seed} (p={p:.4f})")
        assert rejections < 3

    def test_moment_table_columns(self, toy_dataset):
        s = sample_case_base(toy_dataset, ratio=3, seed=0)
        frame = s.to_frame()
        assert list(frame.columns) == ["time", "z", "label"]
        assert len(frame) == len(s)

import numpy as np
import pytest

from cbsurv import (
    ConfigurationError,
    CsvSchema,
    ParseError,
    SchemaError,
    SplitSpec,
    SurvivalData,
    ValidationError,
    bootstrap_resample,
    load_survival_csv,
    split_dataset,
)
from cbsurv.errors import DataError


SCHEMA = CsvSchema(time_col="time", status_col="status", covariates=("z",))


def write_csv(path, rows, header="time,status,z"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestLoad:
    def test_sums_b_and_c(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["1,1,0.5", "2,0,1.0", "3,1,1.5"])
        d = load_survival_csv(path, SCHEMA)
        assert d.total_follow_up == 6.0
        assert d.n_events == 2
        assert d.covariate_names == ("z",)
        # recomputed from scratch they agree exactly
        assert d.total_follow_up == float(np.sum(d.time))
        assert d.n_events == int(np.sum(d.event == 1))

    def test_row_order_preserved(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["3,1,3", "1,0,1", "2,1,2"])
        d = load_survival_csv(path, SCHEMA)
        assert list(d.time) == [3.0, 1.0, 2.0]

    def test_missing_column_is_schema_error(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["1,1"], header="time,status")
        with pytest.raises(SchemaError, match="z"):
            load_survival_csv(path, SCHEMA)

    def test_bad_status_cites_row(self, tmp_path):
        rows = ["1,1,0", "2,0,0", "3,1,0", "4,0,0", "5,2,0"]
        path = write_csv(tmp_path / "d.csv", rows)
        with pytest.raises(ValidationError, match="row 5"):
            load_survival_csv(path, SCHEMA)

    def test_negative_time_cites_row_and_column(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["1,1,0", "-2,0,0"])
        with pytest.raises(ParseError, match="'time' at row 2"):
            load_survival_csv(path, SCHEMA)

    def test_non_numeric_cell_cites_row_and_column(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["1,1,0", "2,0,oops"])
        with pytest.raises(ParseError, match="'z' at row 2"):
            load_survival_csv(path, SCHEMA)

    def test_missing_value_aborts(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", ["1,1,0", "2,,1"])
        with pytest.raises(ParseError, match="row 2"):
            load_survival_csv(path, SCHEMA)

    def test_round_trip(self, tmp_path, toy_dataset):
        path = tmp_path / "out.csv"
        toy_dataset.save_csv(path)
        again = load_survival_csv(
            path, CsvSchema(time_col="time", status_col="status", covariates=("z",))
        )
        assert toy_dataset.equals(again)


class TestConstruction:
    def test_rejects_bad_status(self):
        with pytest.raises(ValidationError):
            SurvivalData([1.0], [2], [[0.0]])

    def test_rejects_negative_time(self):
        with pytest.raises(ValidationError):
            SurvivalData([-1.0], [1], [[0.0]])

    def test_rejects_name_mismatch(self):
        with pytest.raises(ValidationError):
            SurvivalData([1.0], [1], [[0.0, 1.0]], ["only_one"])

    def test_record_view(self, toy_dataset):
        rec = toy_dataset.record(1)
        assert rec.follow_up_time == 2.0
        assert rec.event_status == 0
        assert rec.covariates[0] == 1.0

    def test_arrays_immutable(self, toy_dataset):
        with pytest.raises(ValueError):
            toy_dataset.time[0] = 99.0


class TestSplit:
    def test_sizes_n100(self):
        rng = np.random.default_rng(0)
        d = SurvivalData(rng.random(100) + 0.1, np.ones(100), rng.normal(size=(100, 1)))
        train, val, test = split_dataset(d, SplitSpec(0.15, 0.15, seed=3))
        assert (len(train), len(val), len(test)) == (73, 12, 15)

    def test_sizes_n5000(self):
        # floor arithmetic: 5000*0.15 = 750; (5000-750)*0.15 = 637.5 -> 637
        n = 5000
        n_test = int(np.floor(n * 0.15))
        n_val = int(np.floor((n - n_test) * 0.15))
        assert (n - n_test - n_val, n_val, n_test) == (3613, 637, 750)
        rng = np.random.default_rng(1)
        d = SurvivalData(rng.random(n) + 0.1, np.ones(n), rng.normal(size=(n, 1)))
        train, val, test = split_dataset(d, SplitSpec(0.15, 0.15, seed=9))
        assert (len(train), len(val), len(test)) == (3613, 637, 750)

    def test_partition_disjoint_union(self):
        rng = np.random.default_rng(2)
        times = np.arange(1.0, 61.0)  # unique times identify rows
        d = SurvivalData(times, np.ones(60), rng.normal(size=(60, 1)))
        train, val, test = split_dataset(d, SplitSpec(0.2, 0.25, seed=5))
        merged = np.concatenate([train.time, val.time, test.time])
        assert len(merged) == 60
        assert set(merged) == set(times)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        d = SurvivalData(rng.random(50) + 0.1, np.ones(50), rng.normal(size=(50, 1)))
        a = split_dataset(d, SplitSpec(0.15, 0.15, seed=7))
        b = split_dataset(d, SplitSpec(0.15, 0.15, seed=7))
        for x, y in zip(a, b):
            assert x.equals(y)

    def test_empty_partition_rejected(self):
        d = SurvivalData([1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 1)))
        with pytest.raises(ConfigurationError):
            split_dataset(d, SplitSpec(0.15, 0.15, seed=0))

    def test_bad_fraction_rejected(self):
        with pytest.raises(ConfigurationError):
            SplitSpec(0.0, 0.5)


class TestBootstrap:
    def test_single_record(self):
        d = SurvivalData([2.0], [1], [[1.0]])
        r = bootstrap_resample(d, seed=0)
        assert r.equals(d)

    def test_size_preserved(self, exponential_dataset):
        r = bootstrap_resample(exponential_dataset, seed=1)
        assert len(r) == len(exponential_dataset)

    def test_empty_rejected(self):
        d = SurvivalData([], [], np.zeros((0, 1)))
        with pytest.raises(DataError):
            bootstrap_resample(d, seed=0)

    def test_inclusion_frequency(self):
        # P(record included) = 1 - (1 - 1/n)^n = 0.6513 at n = 10
        n = 10
        d = SurvivalData(np.arange(1.0, n + 1), np.ones(n), np.zeros((n, 1)))
        included = 0
        n_resamples = 10_000
        for seed in range(n_resamples):
            r = bootstrap_resample(d, seed=seed)
            included += len(set(r.time))
        frequency = included / (n * n_resamples)
        expected = 1.0 - (1.0 - 1.0 / n) ** n
        assert abs(frequency - expected) < 0.01

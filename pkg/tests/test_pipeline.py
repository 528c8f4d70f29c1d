import io
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fatigue_mlp import dataset as ds
from fatigue_mlp import pipeline as pl
from fatigue_mlp.errors import (
    DegenerateDimension,
    DegenerateSeries,
    EmptyDevelopmentSet,
    InvalidSplitSpec,
)


def _series(cycles, sid="s", cond=ds.LoadCondition(0.1)):
    recs = [ds.CrackGrowthRecord(float(c), cond, 5.0 + i) for i, c in enumerate(cycles)]
    return ds.CrackGrowthSeries(sid, cond, recs)


def _pool(n, seed=0):
    rng = np.random.default_rng(seed)
    cond = ds.LoadCondition(0.1)
    return [pl.Sample(f"s{i % 7}", cond, float(i), float(5 + rng.random())) for i in range(n)]


class TestSplitSpec:
    def test_defaults(self):
        spec = pl.SplitSpec()
        assert (spec.dev_fraction, spec.train_fraction, spec.val_fraction, spec.test_fraction) == (
            0.8, 0.8, 0.1, 0.1
        )

    @pytest.mark.parametrize(
        "kw", [dict(train_fraction=0.9), dict(dev_fraction=0.0), dict(dev_fraction=1.0),
               dict(val_fraction=-0.1, train_fraction=1.0)],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidSplitSpec):
            pl.SplitSpec(**kw)


class TestChronologicalSplit:
    def test_cutoff_by_cycle_value(self):
        d = ds.Dataset([_series([0, 25_000, 50_000, 75_000, 100_000])])
        dev, ext = pl.chronological_split(d, 0.8)
        assert [s.cycles for s in dev] == [0, 25_000, 50_000, 75_000]
        assert [s.cycles for s in ext] == [100_000]

    @pytest.mark.parametrize("final", [11.0, 1024.0, 2.6e6 + 1])
    def test_dev_fraction_near_one(self, final):
        # f * x < x for every f < 1 and x > 0, so only the last record is held out
        frac = math.nextafter(1.0, 0.0)
        d = ds.Dataset([_series([0, final / 2, final])])
        dev, ext = pl.chronological_split(d, frac)
        assert len(dev) == 2 and [s.cycles for s in ext] == [final]

    def test_empty_extrapolation_is_not_an_error(self):
        dev, _ = pl.chronological_split(ds.Dataset([_series(range(20))]), 0.5)
        splits = pl.random_partition(dev, pl.SplitSpec(seed=1))
        assert splits.extrapolation == ()

    def test_empty_development_is_error(self):
        d = ds.Dataset([_series([900, 1000])])
        with pytest.raises(DegenerateSeries):
            pl.chronological_split(d, 0.8)

    def test_synthetic_pool(self, synthetic):
        dev, ext = pl.chronological_split(synthetic, 0.8)
        assert len(dev) + len(ext) == synthetic.n_records
        assert len(dev) == 1440

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    def test_chronological_property(self, seed, frac):
        d = ds.generate_synthetic(ds.STANDARD_CONDITIONS[::3], 12, seed)
        dev, ext = pl.chronological_split(d, frac)
        for s in d.series:
            dc = [x.cycles for x in dev if x.series_id == s.id]
            ec = [x.cycles for x in ext if x.series_id == s.id]
            if ec:
                assert min(ec) > max(dc)
            assert all(c > frac * s.final_cycles for c in ec)


class TestRandomPartition:
    def test_1791_pool_size(self):
        splits = pl.random_partition(_pool(1791), pl.SplitSpec(seed=0))
        assert (len(splits.train), len(splits.validation), len(splits.dev_test)) == (1433, 179, 179)

    def test_exact_fractions(self):
        splits = pl.random_partition(_pool(10), pl.SplitSpec(seed=3))
        assert (len(splits.train), len(splits.validation), len(splits.dev_test)) == (8, 1, 1)

    def test_deterministic(self):
        a = pl.random_partition(_pool(200), pl.SplitSpec(seed=11))
        b = pl.random_partition(_pool(200), pl.SplitSpec(seed=11))
        assert a == b
        c = pl.random_partition(_pool(200), pl.SplitSpec(seed=12))
        assert a != c

    def test_empty(self):
        with pytest.raises(EmptyDevelopmentSet):
            pl.random_partition([], pl.SplitSpec())

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 10_000), st.integers(0, 2**31))
    def test_partition_property(self, n, seed):
        pool = _pool(n)
        splits = pl.random_partition(pool, pl.SplitSpec(seed=seed))
        parts = [splits.train, splits.validation, splits.dev_test]
        assert Counter(s for p in parts for s in p) == Counter(pool)
        assert sum(len(p) for p in parts) == n
        assert len(splits.validation) == math.floor(0.1 * n)
        assert len(splits.dev_test) == math.floor(0.1 * n)


class TestNormalizer:
    def test_target_extrema(self):
        cond = [ds.LoadCondition(0.1), ds.LoadCondition(0.5, 2.0)]
        train = [pl.Sample("a", cond[0], 0.0, 5.0), pl.Sample("b", cond[1], 10.0, 25.0)]
        nz = pl.fit_normalizer(train)
        assert nz.minimum[3] == 5.0 and nz.maximum[3] == 25.0

    def test_degenerate_stress_ratio(self):
        cond = [ds.LoadCondition(0.1), ds.LoadCondition(0.1, 2.0)]
        train = [pl.Sample("a", cond[0], 0.0, 5.0), pl.Sample("b", cond[1], 10.0, 25.0)]
        with pytest.raises(DegenerateDimension) as err:
            pl.fit_normalizer(train)
        assert err.value.dimension == "stress_ratio"

    def test_extrema_oracle(self, synthetic_splits):
        nz = pl.fit_normalizer(synthetic_splits.train)
        lo = [math.inf] * 4
        hi = [-math.inf] * 4
        for s in synthetic_splits.train:
            row = (s.cycles, s.condition.stress_ratio,
                   1.0 if s.condition.overload_ratio is None else s.condition.overload_ratio,
                   s.crack_length)
            for k, v in enumerate(row):
                lo[k] = min(lo[k], v)
                hi[k] = max(hi[k], v)
        assert list(nz.minimum) == lo and list(nz.maximum) == hi

    def test_endpoints_and_midpoint(self):
        nz = pl.Normalizer((0.0, 0.1, 1.0, 5.0), (100.0, 0.7, 2.0, 25.0))
        np.testing.assert_array_equal(nz.scale_features([0.0, 0.1, 1.0]), [-1, -1, -1])
        np.testing.assert_array_equal(nz.scale_features([100.0, 0.7, 2.0]), [1, 1, 1])
        assert nz.scale_target(15.0) == 0.0
        assert nz.scale_target(5.0) == -1.0 and nz.scale_target(25.0) == 1.0
        x, y = pl.normalize(pl.Sample("s", ds.LoadCondition(0.4, 1.5), 50.0, 15.0), nz)
        np.testing.assert_allclose(x, [0.0, 0.0, 0.0], atol=1e-15)
        assert y == 0.0

    def test_outside_range_not_clipped(self):
        nz = pl.Normalizer((0.0, 0.1, 1.0, 5.0), (100.0, 0.7, 2.0, 25.0))
        assert nz.scale_features([150.0, 0.1, 1.0])[0] == 2.0

    def test_target_round_trip(self, rng):
        nz = pl.Normalizer((0.0, 0.1, 1.0, 4.7), (3e6, 0.7, 2.0, 26.3))
        y = rng.uniform(-50, 50, 1000)
        back = np.array([pl.denormalize_target(float(nz.scale_target(v)), nz) for v in y])
        assert np.max(np.abs(back - y)) < 1e-12

    def test_leakage_guard(self, synthetic_splits):
        nz = pl.fit_normalizer(synthetic_splits.train)
        cond = ds.LoadCondition(0.3)
        tampered = pl.DataSplits(
            synthetic_splits.train,
            (pl.Sample("zz", cond, 1e9, 999.0),) + synthetic_splits.validation[1:],
            synthetic_splits.dev_test[:-1],
            (),
        )
        assert pl.fit_normalizer(tampered.train) == nz


class TestMakeSplits:
    def test_disjoint_and_cover(self, synthetic, synthetic_splits):
        sp = synthetic_splits
        dev, ext = pl.chronological_split(synthetic, 0.8)
        assert Counter(sp.development) == Counter(dev)
        assert list(sp.extrapolation) == ext
        ids = [id(s) for name in pl.SUBSETS for s in sp.subset(name)]
        assert len(ids) == len(set(ids))
        assert set(sp.development).isdisjoint(sp.extrapolation)
        for s in sp.extrapolation:
            assert s.cycles > sp.cutoffs[s.series_id]

    def test_manifest(self, synthetic_splits):
        text = pl.manifest_text(synthetic_splits)
        lines = text.splitlines()
        assert lines[0] == "subset,series_id,R,R_ol,N,a_mm"
        assert len(lines) == 1 + sum(len(synthetic_splits.subset(n)) for n in pl.SUBSETS)
        counts = Counter(line.split(",")[0] for line in lines[1:])
        assert counts["train"] == len(synthetic_splits.train)
        buf = io.StringIO()
        pl.write_manifest(synthetic_splits, buf)
        assert buf.getvalue() == text

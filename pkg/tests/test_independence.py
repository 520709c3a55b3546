import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dmcd.data import dataset_from_arrays
from dmcd.errors import InsufficientSamples, InvalidQuery
from dmcd.independence import (
    RegressorConfig,
    chi_squared_test,
    ci_test,
    partial_correlation_test,
    pearson_chi2,
    pillai_f_test,
    residual_pillai_test,
    select_test,
)

LINEAR = RegressorConfig(family="linear")


def cont(**cols):
    return dataset_from_arrays(cols, kinds=dict.fromkeys(cols, "continuous"))


def disc(**cols):
    return dataset_from_arrays(cols, kinds=dict.fromkeys(cols, "discrete"))


def from_table(table):
    xs, ys = [], []
    for i, row in enumerate(table):
        for j, count in enumerate(row):
            xs += [i] * count
            ys += [j] * count
    return disc(x=np.array(xs), y=np.array(ys))


# --- partial correlation ---------------------------------------------------


def test_zero_residual_correlation_gives_p_one():
    x = np.array([1.0, -1.0, 1.0, -1.0, 0.0, 0.0])
    y = np.array([1.0, 1.0, -1.0, -1.0, 2.0, -2.0])
    res = partial_correlation_test(cont(x=x, y=y), "x", "y")
    assert res.details["r"] == pytest.approx(0.0, abs=1e-15)
    assert res.statistic == pytest.approx(0.0, abs=1e-12) and res.p_value == pytest.approx(1.0)


def test_identical_columns_strongly_dependent():
    x = np.random.default_rng(1).standard_normal(100)
    assert partial_correlation_test(cont(x=x, y=x.copy()), "x", "y").p_value < 1e-10


def test_partial_correlation_matches_pearson_significance_test():
    # Fisher-z and the exact t-test agree on r; p-values agree to the
    # accuracy of the normal approximation.
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 400))
        x = rng.standard_normal(n)
        y = rng.uniform(-0.5, 0.5) * x + rng.standard_normal(n)
        res = partial_correlation_test(cont(x=x, y=y), "x", "y")
        ref = stats.pearsonr(x, y)
        assert res.details["r"] == pytest.approx(ref.statistic, abs=1e-12)
        assert abs(res.p_value - ref.pvalue) <= 0.01 + 0.05 * ref.pvalue


def test_partial_correlation_removes_confounding():
    rng = np.random.default_rng(2)
    z = rng.standard_normal(2000)
    x = z + 0.5 * rng.standard_normal(2000)
    y = z + 0.5 * rng.standard_normal(2000)
    ds = cont(x=x, y=y, z=z)
    assert partial_correlation_test(ds, "x", "y").p_value < 1e-10
    assert partial_correlation_test(ds, "x", "y", ["z"]).p_value > 0.01


def test_partial_correlation_guards():
    ds = cont(x=[1.0, 2.0, 3.0, 4.0], y=[1.0, 3.0, 2.0, 4.0], z=[0.0, 1.0, 0.0, 1.0])
    with pytest.raises(InsufficientSamples):
        partial_correlation_test(ds, "x", "y", ["z"])
    with pytest.raises(InvalidQuery):
        partial_correlation_test(ds, "x", "x")
    with pytest.raises(InvalidQuery):
        partial_correlation_test(ds, "x", "y", ["x"])


def test_constant_column_is_degenerate_not_an_error():
    ds = cont(x=np.ones(50), y=np.random.default_rng(0).standard_normal(50))
    res = partial_correlation_test(ds, "x", "y")
    assert res.p_value == 1.0 and res.degenerate


# --- chi-squared -----------------------------------------------------------


def test_chi_squared_exact_independence():
    res = chi_squared_test(from_table([[25, 25], [25, 25]]), "x", "y")
    assert res.statistic == pytest.approx(0.0) and res.p_value == pytest.approx(1.0)


def test_chi_squared_perfect_association():
    res = chi_squared_test(from_table([[50, 0], [0, 50]]), "x", "y")
    assert res.statistic == pytest.approx(100.0) and res.details["df"] == 1
    assert res.p_value < 1e-20


def test_pearson_chi2_matches_scipy():
    table = np.array([[12, 5, 9], [3, 20, 7]])
    stat, df = pearson_chi2(table)
    ref = stats.chi2_contingency(table, correction=False)
    assert stat == pytest.approx(ref.statistic) and df == ref.dof


def test_chi_squared_pools_sparse_strata():
    rng = np.random.default_rng(0)
    z = np.r_[np.zeros(200, int), np.ones(10, int)]
    x, y = rng.integers(0, 2, 210), rng.integers(0, 2, 210)
    res = chi_squared_test(disc(x=x, y=y, z=z), "x", "y", ["z"])
    assert "pooled_sparse_strata" in res.flags
    assert res.details["dropped_strata"] == 1 and res.details["dropped_fraction"] == pytest.approx(10 / 210)
    assert res.effective_samples == 200


def test_chi_squared_degenerate_cases():
    ds = disc(x=np.zeros(40, int), y=np.arange(40) % 2)
    res = chi_squared_test(ds, "x", "y")
    assert res.p_value == 1.0 and "single_level" in res.flags and res.degenerate
    ds = disc(x=np.arange(12) % 2, y=np.arange(12) // 6, z=np.arange(12) % 3)
    res = chi_squared_test(ds, "x", "y", ["z"])
    assert res.p_value == 1.0 and "all_strata_sparse" in res.flags


def test_chi_squared_calibrated_on_fair_coins_within_strata():
    rejections = 0
    for child in np.random.SeedSequence(7).spawn(1000):
        rng = np.random.default_rng(child)
        z = rng.integers(0, 2, 2000)
        x, y = rng.integers(0, 2, 2000), rng.integers(0, 2, 2000)
        rejections += chi_squared_test(disc(x=x, y=y, z=z), "x", "y", ["z"]).p_value <= 0.05
    assert 0.03 <= rejections / 1000 <= 0.07


# --- residual Pillai -------------------------------------------------------


def test_pillai_identical_columns():
    x = np.random.default_rng(3).standard_normal(200)
    res = residual_pillai_test(cont(x=x, y=x.copy()), "x", "y")
    assert res.details["canonical_correlations"][0] == pytest.approx(1.0)
    assert res.p_value < 1e-10


def test_pillai_binary_vs_continuous_power():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 500)
    y = x + rng.standard_normal(500)
    ds = dataset_from_arrays({"x": x, "y": y}, kinds={"x": "discrete", "y": "continuous"})
    res = ci_test(ds, "x", "y")
    assert res.test_kind == "residual_pillai" and res.p_value < 0.01


def test_pillai_trace_single_pair_reduces_to_squared_correlation():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    y = 0.3 * x + rng.standard_normal(300)
    res = residual_pillai_test(cont(x=x, y=y), "x", "y")
    assert res.statistic == pytest.approx(np.corrcoef(x, y)[0, 1] ** 2, rel=1e-9)
    # with one canonical pair the F-approximation is the exact correlation t-test
    assert res.p_value == pytest.approx(stats.pearsonr(x, y).pvalue, rel=1e-6)


def test_pillai_f_approximation_reference_values():
    # V=0.2, p=2, q=3, N=100: s=2, df1=6, df2=2*(99+2-5)=192, F=(192/6)*0.2/1.8
    f, df1, df2, p = pillai_f_test(0.2, 2, 3, 100)
    assert (df1, df2) == (6, 192)
    assert f == pytest.approx(32 * 0.2 / 1.8)
    assert p == pytest.approx(stats.f.sf(32 * 0.2 / 1.8, 6, 192))


def test_pillai_multilevel_discrete_blocks():
    rng = np.random.default_rng(6)
    z = rng.standard_normal(400)
    x = rng.integers(0, 4, 400)
    y = z + rng.standard_normal(400)
    ds = dataset_from_arrays({"x": x, "y": y, "z": z}, kinds={"x": "discrete", "y": "continuous", "z": "continuous"})
    res = residual_pillai_test(ds, "x", "y", ["z"], LINEAR)
    assert res.details["df1"] == 3 and 0.0 <= res.p_value <= 1.0


def test_pillai_rank_deficient_block_is_flagged():
    rng = np.random.default_rng(8)
    x = rng.integers(0, 3, 300)
    y = rng.standard_normal(300)
    z = (x == 2).astype(float)
    ds = dataset_from_arrays({"x": x, "y": y, "z": z}, kinds={"x": "discrete", "y": "continuous", "z": "continuous"})
    res = residual_pillai_test(ds, "x", "y", ["z"], LINEAR)
    assert "rank_deficient" in res.flags and 0.0 <= res.p_value <= 1.0


def test_pillai_minimum_sample_size():
    ds = cont(x=np.arange(49.0), y=np.arange(49.0) ** 2)
    with pytest.raises(InsufficientSamples):
        residual_pillai_test(ds, "x", "y")


def test_regressor_config_validation():
    with pytest.raises(ValueError):
        RegressorConfig(tree_count=0)
    with pytest.raises(ValueError):
        RegressorConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        RegressorConfig(family="forest")


# --- dispatch and shared properties ---------------------------------------


def test_select_test():
    assert select_test("continuous", "continuous", ["continuous"]) == "partial_correlation"
    assert select_test("discrete", "discrete", ["discrete", "discrete"]) == "chi_squared"
    assert select_test("continuous", "discrete", []) == "residual_pillai"
    assert select_test("continuous", "continuous", ["discrete"]) == "residual_pillai"


def _mixed_dataset(seed, n=120):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n)
    b = a + rng.standard_normal(n)
    c = (b + rng.standard_normal(n) > 0).astype(int)
    d = rng.integers(0, 3, n)
    e = (c + d + rng.integers(0, 2, n)) % 3
    return dataset_from_arrays(
        {"a": a, "b": b, "c": c, "d": d, "e": e},
        kinds={"a": "continuous", "b": "continuous", "c": "discrete", "d": "discrete", "e": "discrete"},
    )


QUERIES = [
    ("a", "b", ()),
    ("a", "b", ("c",)),
    ("c", "d", ()),
    ("c", "d", ("e",)),
    ("a", "c", ("b",)),
    ("b", "e", ("c", "d")),
]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(QUERIES))
def test_tests_are_symmetric_and_bounded(seed, query):
    ds = _mixed_dataset(seed)
    x, y, z = query
    cfg = RegressorConfig(tree_count=10, seed=seed)
    forward, backward = ci_test(ds, x, y, z, cfg), ci_test(ds, y, x, z, cfg)
    assert 0.0 <= forward.p_value <= 1.0
    assert np.isfinite(forward.statistic)
    assert forward.effective_samples <= ds.sample_count
    assert forward.p_value == pytest.approx(backward.p_value, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=4, max_size=40), st.lists(st.integers(0, 2), min_size=4, max_size=40))
def test_chi_squared_p_in_unit_interval_on_arbitrary_tables(xs, ys):
    n = min(len(xs), len(ys))
    res = chi_squared_test(disc(x=np.array(xs[:n]), y=np.array(ys[:n])), "x", "y")
    assert 0.0 <= res.p_value <= 1.0 and np.isfinite(res.statistic)

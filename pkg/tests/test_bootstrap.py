import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from blockbound.bootstrap import (
    CbbPlan,
    block_length,
    block_rows,
    cbb_indices,
    cbb_resample,
    gen_error_bound,
)
from blockbound.core import DegenerateDesignError, InputError, RngStream, embed, empirical_quantile

from conftest import ar1
from pw_reference import reference_block_length


def test_plan_block_count():
    p = CbbPlan(ell=3, n_chunks_available=10, n_rows_out=8)
    assert p.b == 3 and p.b * p.ell >= p.n_rows_out
    assert CbbPlan(4, 10, 8).b == 2
    with pytest.raises(InputError):
        CbbPlan(0, 10, 8)
    with pytest.raises(InputError):
        CbbPlan(2, 10, 0)


def test_single_full_block_is_rotation(stream):
    x = np.arange(1.0, 8.0)
    circ = embed(x, 2, "circular")
    out = cbb_resample(circ, CbbPlan(7, 7, 7), stream).values
    shift = int(np.argmax((circ.values == out[0]).all(axis=1)))
    np.testing.assert_array_equal(out, np.roll(circ.values, -shift, axis=0))


def test_unit_blocks_draw_chunk_rows(stream):
    circ = embed(np.arange(10.0), 3, "circular")
    out = cbb_resample(circ, CbbPlan(1, 10, 25), stream).values
    assert out.shape == (25, 3)
    rows = {tuple(r) for r in circ.values}
    assert all(tuple(r) in rows for r in out)


def test_resample_requires_circular(stream):
    with pytest.raises(InputError):
        cbb_resample(embed(np.arange(5.0), 2), CbbPlan(2, 4, 4), stream)
    with pytest.raises(InputError):
        cbb_resample(embed(np.arange(5.0), 2, "circular"), CbbPlan(2, 4, 4), stream)


def test_block_start_distribution_chi_square():
    # t=4, d=1, ell=3, 4 rows: first block gives rows 0-2, second block row 3
    plan = CbbPlan(3, 4, 4)
    gen = RngStream(99).generator()
    n = 100_000
    counts = np.zeros((4, 4))
    for _ in range(n):
        idx = cbb_indices(plan, gen)
        assert idx[1] == (idx[0] + 1) % 4 and idx[2] == (idx[0] + 2) % 4
        counts[idx[0], idx[3]] += 1
    expected = {(s1, s2): n / 16 for s1, s2 in itertools.product(range(4), repeat=2)}
    res = stats.chisquare(counts.ravel(), [expected[k] for k in itertools.product(range(4), repeat=2)])
    assert res.pvalue > 1e-3


def enumerate_resamples(t, ell, n_rows):
    plan = CbbPlan(ell, t, n_rows)
    for starts in itertools.product(range(t), repeat=plan.b):
        yield block_rows(np.array(starts), plan)


@pytest.mark.parametrize("t", [3, 4, 5, 6])
@pytest.mark.parametrize("ell", [1, 2, 3])
def test_enumeration_mean_and_inclusion(t, ell):
    x = np.random.default_rng(t * 10 + ell).normal(size=t)
    for n_rows in range(1, t + 1):
        means, counts = [], np.zeros(t)
        for idx in enumerate_resamples(t, ell, n_rows):
            means.append(x[idx].mean())
            np.add.at(counts, idx, 1)
        assert np.all(counts == counts[0])
        if n_rows % ell == 0:
            assert abs(np.mean(means) - x.mean()) < 1e-12


def test_block_length_white_noise_small():
    x = np.random.default_rng(1).standard_normal(1000)
    assert block_length(x) <= 4
    assert block_length(x) == reference_block_length(x)


def test_block_length_grows_with_dependence():
    wn = np.random.default_rng(1).standard_normal(1000)
    x = ar1(0.9, 1000, seed=1)
    assert block_length(x) > block_length(wn)
    assert block_length(x) == reference_block_length(x)


def test_block_length_edge_cases():
    assert block_length(np.full(50, 3.3)) == 1
    with pytest.raises(InputError):
        block_length(np.arange(9.0))


@given(st.integers(0, 10**6), st.integers(10, 300), st.sampled_from([0.0, 0.5, 0.9, -0.6]))
def test_block_length_matches_reference(seed, n, phi):
    x = ar1(phi, n, seed)
    ell = block_length(x)
    assert ell == reference_block_length(x)
    assert 1 <= ell <= np.ceil(min(3 * np.sqrt(n), n / 3))


def test_bound_structure(stream):
    x = ar1(0.6, 300, seed=4)
    res = gen_error_bound(x, 3, B=200, alpha=0.1, ell="auto", rng=stream)
    assert res.eta_samples.shape == (200,)
    assert res.eta_quantile == empirical_quantile(res.eta_samples, 0.9)
    assert res.upper_bound == res.train_error + res.eta_quantile
    assert res.ell_used == block_length(x)
    assert res.seed == stream.seed


def test_bound_replicate_matches_manual(stream):
    """First replicate recomputed from the public pieces."""
    from blockbound.model import empirical_risk, fit_ar

    x = ar1(0.6, 120, seed=8)
    d, ell = 3, 5
    res = gen_error_bound(x, d, B=3, alpha=0.2, ell=ell, rng=stream)
    circ = embed(x, d, "circular")
    plan = CbbPlan(ell, len(x), len(x) - d + 1)
    gen = stream.spawn(0).generator()
    train = circ.values[cbb_indices(plan, gen)]
    test = circ.values[cbb_indices(plan, gen)]
    m = fit_ar(train)
    eta = empirical_risk(test, m).value - empirical_risk(train, m).value
    assert res.eta_samples[0] == pytest.approx(eta, rel=1e-10, abs=1e-12)
    lin = embed(x, d)
    assert res.train_error == pytest.approx(empirical_risk(lin, fit_ar(lin)).value, rel=1e-12)


def test_single_replicate_quantile(stream):
    x = ar1(0.3, 80, seed=2)
    for alpha in (0.01, 0.5, 0.99):
        res = gen_error_bound(x, 2, B=1, alpha=alpha, ell=4, rng=stream)
        assert res.eta_quantile == res.eta_samples[0]


def test_bound_monotone_in_alpha(stream):
    res = gen_error_bound(ar1(0.5, 200, seed=5), 2, B=300, alpha=0.1, rng=stream)
    margins = [res.requantile(a).upper_bound - res.train_error for a in np.linspace(0.01, 0.99, 25)]
    assert all(a >= b for a, b in zip(margins, margins[1:]))


def test_bound_deterministic(stream):
    x = ar1(0.5, 200, seed=5)
    a = gen_error_bound(x, 2, B=150, alpha=0.1, rng=stream)
    b = gen_error_bound(x, 2, B=150, alpha=0.1, rng=RngStream(stream.seed))
    np.testing.assert_array_equal(a.eta_samples, b.eta_samples)
    assert a.upper_bound == b.upper_bound
    c = gen_error_bound(x, 2, B=150, alpha=0.1, rng=RngStream(stream.seed + 1))
    assert not np.array_equal(a.eta_samples, c.eta_samples)


def test_constant_series_degenerate(stream):
    with pytest.raises(DegenerateDesignError):
        gen_error_bound(np.full(50, 1.5), 3, B=10, rng=stream)


def test_bound_input_errors(stream):
    x = ar1(0.5, 50, seed=1)
    with pytest.raises(InputError):
        gen_error_bound(x[:5], 3, B=10, rng=stream)
    with pytest.raises(InputError):
        gen_error_bound(x, 2, B=0, rng=stream)
    with pytest.raises(InputError):
        gen_error_bound(x, 2, B=10, alpha=1.0, rng=stream)
    with pytest.raises(InputError):
        gen_error_bound(x, 1, B=10, rng=stream)


def spiky(t, positions):
    x = np.zeros(t)
    x[list(positions)] = 1.0 + np.arange(len(positions))
    return x


def test_too_many_singular_replicates_error(stream):
    # one informative chunk out of 20: most unit-block resamples miss it
    with pytest.raises(DegenerateDesignError):
        gen_error_bound(spiky(20, [5]), 2, B=200, ell=1, rng=stream)


def test_rare_singular_replicates_dropped(stream):
    x = spiky(200, [10, 40, 70, 100, 130, 160])
    res = gen_error_bound(x, 2, B=3000, ell=1, rng=stream)
    assert 0 < res.n_failed <= 30
    assert res.eta_samples.size == 3000 - res.n_failed


def test_block_rows_stacked_matches_single():
    plan = CbbPlan(3, 7, 8)
    starts = np.array([[0, 5, 6], [2, 2, 4]])
    stacked = block_rows(starts, plan)
    assert stacked.shape == (2, 8)
    for row, s in zip(stacked, starts):
        np.testing.assert_array_equal(row, block_rows(s, plan))
    np.testing.assert_array_equal(block_rows(np.array([5, 6, 0]), plan), [5, 6, 0, 6, 0, 1, 0, 1])
    with pytest.raises(InputError):
        block_rows(np.array([1, 2]), plan)

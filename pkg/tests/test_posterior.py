import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from spectra_auction.grid import GridCdf, PriceGrid, median, prior_order_statistic, prior_uniform
from spectra_auction.posterior import (
    DenseBank, InconsistentObservation, PosteriorState, SegmentBank, brute_force_posterior,
    update_cdf_equations, update_distribution, user_bit,
)

P_VALUES = (0.0, 0.05, 0.1, 0.3)


def run_history(prior, bid, flips, p):
    """Iterate the update on truthful bits for ``bid`` with the given flips."""
    state = PosteriorState.from_cdf(prior)
    history = []
    for f in flips:
        y = user_bit(bid, state.last_median) ^ f
        history.append((state.last_median, y))
        state = update_distribution(state, y, p)
    return state, history


@st.composite
def cases(draw):
    steps = draw(st.integers(1, 1023))
    p = draw(st.sampled_from(P_VALUES))
    grid = PriceGrid(1.0 / steps)
    kind = draw(st.sampled_from(["uniform", "order"]))
    if kind == "uniform":
        prior = prior_uniform(grid)
    else:
        K = draw(st.integers(1, 4))
        prior = prior_order_statistic(grid, draw(st.integers(1, K)), K)
    bid = draw(st.integers(0, grid.n_points - 1))
    n = draw(st.integers(0, 20))
    flips = draw(st.lists(st.booleans(), min_size=n, max_size=n)) if p > 0 else [False] * n
    return prior, bid, [int(f) for f in flips], p


@settings(max_examples=1200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(cases())
def test_update_matches_brute_force(case):
    prior, bid, flips, p = case
    state, history = run_history(prior, bid, flips, p)
    oracle = brute_force_posterior(prior, history, p)
    assert np.max(np.abs(state.cdf.cum - oracle.cum)) < 1e-9
    assert state.last_median == median(oracle)


@settings(max_examples=300, deadline=None)
@given(cases())
def test_banks_and_equations_match_brute_force(case):
    prior, bid, flips, p = case
    grid = prior.grid
    seg = SegmentBank(grid, [prior], p)
    dense = DenseBank(grid, [prior], p)
    eq = prior
    history = []
    for f in flips:
        m = int(seg.medians[0])
        assert m == int(dense.medians[0]) == median(eq).index
        y = int(bid >= m) ^ f
        history.append((m, y))
        seg.update([y])
        dense.update([y])
        eq = update_cdf_equations(eq, m, y, p)
    oracle = brute_force_posterior(prior, history, p)
    assert np.max(np.abs(np.cumsum(seg.row_pmf(0)) - oracle.cum)) < 1e-9
    assert np.max(np.abs(np.cumsum(dense.row_pmf(0)) - oracle.cum)) < 1e-9
    assert np.max(np.abs(eq.cum - oracle.cum)) < 1e-9


def test_user_bit():
    g = PriceGrid(1e-5)
    assert user_bit(g.price(75000), g.price(50000)) == 1
    assert user_bit(g.price(50000), g.price(50000)) == 1
    assert user_bit(g.price(49999), g.price(50000)) == 0


def test_closed_form_case_one():
    g = PriceGrid(1e-5)
    prior = prior_uniform(g)
    state = PosteriorState.from_cdf(prior)
    assert state.last_median.value == pytest.approx(0.5)
    new = update_distribution(state, 1, 0.1)
    f_mprime = prior(state.m_prime.index)
    k = g.index_of(0.25)
    expected = 0.1 * prior.cum[k] / (1 - 0.1 - 0.8 * f_mprime)
    assert new.cdf.cum[k] == pytest.approx(expected, abs=1e-12)
    assert new.cdf.cum[k] == pytest.approx(0.05, abs=1e-4)


def test_noiseless_restriction():
    g = PriceGrid(1e-5)
    state = PosteriorState.from_cdf(prior_uniform(g))
    new = update_distribution(state, 1, 0.0)
    assert new.cdf.cum[g.index_of(0.75)] == pytest.approx(0.5, abs=1e-4)
    assert new.cdf.cum[state.last_median.index - 1] == 0.0


def test_uninformative_channel():
    g = PriceGrid(1 / 64)
    prior = prior_order_statistic(g, 1, 2)
    state = PosteriorState.from_cdf(prior)
    for y in (0, 1):
        new = update_distribution(state, y, 0.5)
        assert np.allclose(new.cdf.cum, prior.cum, atol=1e-15)


def test_brute_force_empty_history():
    prior = prior_uniform(PriceGrid(0.25))
    assert np.allclose(brute_force_posterior(prior, [], 0.1).cum, prior.cum)


def test_brute_force_small_grid_single_observation():
    g = PriceGrid(1 / 3)
    prior = prior_uniform(g)
    state = PosteriorState.from_cdf(prior)
    new = update_distribution(state, 1, 0.1)
    oracle = brute_force_posterior(prior, [(state.last_median, 1)], 0.1)
    assert np.max(np.abs(new.cdf.cum - oracle.cum)) < 1e-12


def test_brute_force_point_interval():
    g = PriceGrid(0.25)
    prior = prior_uniform(g)
    bid = g.index_of(0.75)
    state, hist = run_history(prior, bid, [0, 0], 0.0)
    post = brute_force_posterior(prior, hist, 0.0)
    assert post.pmf[bid] > 0
    assert post.pmf[:2].sum() == 0


def test_inconsistent_observation():
    g = PriceGrid(0.25)
    prior = prior_uniform(g)
    with pytest.raises(InconsistentObservation):
        brute_force_posterior(prior, [(2, 1), (2, 0)], 0.0)
    # all mass sits at the median, so a received 0 is impossible when p=0
    pmf = np.zeros(g.n_points)
    pmf[4] = 1
    single = PosteriorState.from_cdf(GridCdf.from_pmf(g, pmf))
    with pytest.raises(InconsistentObservation):
        update_distribution(single, 0, 0.0)
    bank = SegmentBank(g, [GridCdf.from_pmf(g, pmf)], 0.0)
    with pytest.raises(InconsistentObservation):
        bank.update([0])


def test_m_prime_clamped():
    g = PriceGrid(0.25)
    pmf = np.zeros(g.n_points)
    pmf[0] = 1
    state = PosteriorState.from_cdf(GridCdf.from_pmf(g, pmf))
    assert state.last_median.index == 0 and state.m_prime.index == 0


def test_noiseless_bisection_bound():
    g = PriceGrid(2.0 ** -16)
    rng = np.random.default_rng(5)
    for bid in rng.integers(0, g.n_points, 30):
        state = PosteriorState.from_cdf(prior_uniform(g))
        for t in range(1, 17):
            state = update_distribution(state, user_bit(int(bid), state.last_median), 0.0)
            gap = abs(state.last_median.value - bid * g.delta)
            assert gap <= 2.0 ** -t + g.delta


def test_cdf_valid_after_long_runs():
    g = PriceGrid(1e-5)
    bank = SegmentBank(g, [prior_uniform(g)] * 4, 0.1)
    rng = np.random.default_rng(1)
    bids = rng.integers(0, g.n_points, 4)
    for _ in range(400):
        y = (bids >= bank.medians).astype(int) ^ (rng.random(4) < 0.1)
        bank.update(y)
        for r in range(4):
            bank.cdf(r).check()


def test_true_cell_mass_submartingale():
    g = PriceGrid(1 / 256)
    trials, T, p = 1000, 25, 0.1
    rng = np.random.default_rng(9)
    bids = rng.integers(0, g.n_points, trials)
    bank = SegmentBank(g, [prior_uniform(g)] * trials, p)
    rows = np.arange(trials)
    mass = [np.mean([bank.row_pmf(r)[bids[r]] for r in rows])]
    for _ in range(T):
        y = (bids >= bank.medians).astype(int) ^ (rng.random(trials) < p)
        bank.update(y)
        mass.append(np.mean([bank.row_pmf(r)[bids[r]] for r in rows]))
    assert all(b >= a - 1e-3 for a, b in zip(mass, mass[1:]))

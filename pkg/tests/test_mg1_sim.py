import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mg1inversion import dist_catalog as dc
from mg1inversion import mg1_sim as ms
from mg1inversion.errors import ConfigError

EXP1 = dc.exponential(1.0)


@pytest.fixture(scope="module")
def exp_run():
    return ms.simulate(EXP1, 0.5, 1.0, 10_000, seed=3)


def _zero_fraction_se(p, n):
    return math.sqrt(p * (1 - p) / n)


def test_zero_fraction_matches_idle_probability(exp_run):
    frac = ms.empirical_zero_fraction(exp_run)
    # probe observations are correlated; 4 iid SEs inflated by the lag-1 factor
    assert abs(frac - 0.5) <= 4 * _zero_fraction_se(0.5, exp_run.n) * 2


def test_sample_shape_and_metadata(exp_run):
    assert exp_run.observations.size == 10_001
    assert exp_run.n == 10_000
    assert exp_run.rho == pytest.approx(0.5)
    assert exp_run.burn_in_discarded == 1000
    assert exp_run.times.size == exp_run.observations.size
    assert np.all(np.diff(exp_run.times) > 0)
    meta = exp_run.metadata()
    assert meta["lambda"] == 0.5 and meta["xi"] == 1.0 and meta["seed"] == 3


def test_observations_read_only(exp_run):
    with pytest.raises(ValueError):
        exp_run.observations[0] = 1.0


def test_zeros_are_exact_and_nonnegative(exp_run):
    obs = exp_run.observations
    assert np.all(obs >= 0)
    # no near-zero noise: positive values are not tiny rounding residue
    assert np.count_nonzero((obs > 0) & (obs < 1e-12)) == 0
    assert np.count_nonzero(obs == 0.0) > 0


def test_determinism():
    a = ms.simulate(EXP1, 0.5, 1.0, 2000, seed=11)
    b = ms.simulate(EXP1, 0.5, 1.0, 2000, seed=11)
    c = ms.simulate(EXP1, 0.5, 1.0, 2000, seed=12)
    assert a.observations.tobytes() == b.observations.tobytes()
    assert a.observations.tobytes() != c.observations.tobytes()


def test_default_burn_in():
    assert ms.default_burn_in(0.5) == 1000
    assert ms.default_burn_in(0.99) == 2000
    assert ms.default_burn_in(0.999) == 20000


def test_unstable_or_short_rejected():
    with pytest.raises(ConfigError):
        ms.simulate(EXP1, 1.0, 1.0, 100)
    with pytest.raises(ConfigError):
        ms.simulate(EXP1, 0.5, 1.0, 1)
    with pytest.raises(ConfigError):
        ms.simulate(EXP1, 0.5, 1.0, 100, burn_in=-1)


def test_drain_between_probes_without_arrivals():
    # one arrival of size 3 at t=0.5; probes at 1, 2, 4: drain then reflect at zero
    v = ms._run_events(np.array([0.5]), np.array([3.0]), np.array([1.0, 2.0, 4.0]))
    assert v.tolist() == [2.5, 1.5, 0.0]


def test_run_events_no_arrivals_gives_exact_zero():
    v = ms._run_events(np.array([]), np.array([]), np.array([0.1, 0.2]))
    assert v.tolist() == [0.0, 0.0]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=20),
       st.lists(st.floats(0.01, 5.0), min_size=1, max_size=20),
       st.lists(st.floats(0.01, 3.0), min_size=20, max_size=20))
def test_run_events_matches_lindley_recursion(arr_gaps, probe_gaps, sizes):
    arr_t = np.cumsum(arr_gaps)
    probe_t = np.cumsum(probe_gaps)
    b = np.array(sizes[: arr_t.size])
    got = ms._run_events(arr_t, b, probe_t)
    # brute force: workload at time t from the reflected net-input path
    for t, v in zip(probe_t, got):
        level, last = 0.0, 0.0
        for a, size in zip(arr_t, b):
            if a > t:
                break
            level = max(level - (a - last), 0.0) + size
            last = a
        expected = max(level - (t - last), 0.0)
        assert v == pytest.approx(expected, abs=1e-9)
        assert v >= 0


def test_example1_long_run():
    m = dc.example1_mixture()
    sample = ms.simulate(m, 1.0, 1.0, 100_000, seed=5)
    assert sample.rho == pytest.approx(0.92175, abs=5e-6)
    frac = ms.empirical_zero_fraction(sample)
    # batch-means SE for the correlated indicator sequence
    ind = (sample.observations[1:] == 0).astype(float)
    batches = ind.reshape(100, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(batches.size)
    assert abs(frac - (1 - sample.rho)) <= 4 * se
    assert ms.empirical_busy_fraction(sample) == pytest.approx(1 - frac)


def test_fraction_examples():
    assert ms.empirical_zero_fraction(np.zeros(5)) == 1.0
    assert ms.empirical_busy_fraction(np.zeros(5)) == 0.0
    assert ms.empirical_busy_fraction(np.array([0, 1.5, 0, 2.0])) == 0.5


def test_gpk_agreement():
    n = 100_000
    sample = ms.simulate(EXP1, 0.5, 1.0, n, seed=17)
    v = sample.observations[1:]
    for s in (0.5, 1.0, 2.0, 5.0):
        ecf = np.mean(np.exp(1j * s * v))
        assert abs(ecf - ms.gpk_cf(EXP1, 0.5, s)) <= 5 / math.sqrt(n)


def test_gpk_exponential_closed_form():
    # M/M/1 workload: atom 1 - rho plus exponential(1 - rho) with mass rho
    s = np.array([0.0, 0.7, 3.0])
    expected = 0.5 + 0.5 * 0.5 / (0.5 - 1j * s)
    assert np.allclose(ms.gpk_cf(EXP1, 0.5, s), expected, atol=1e-14)


def test_lst_exponent_examples():
    assert ms.lst_exponent(EXP1, 0.5, 0.0) == 0.0
    assert ms.lst_exponent(EXP1, 0.5, 1.0) == pytest.approx(0.75, abs=1e-15)
    d = 1e-7
    slope = (ms.lst_exponent(EXP1, 0.5, d) - ms.lst_exponent(EXP1, 0.5, 0.0)) / d
    assert slope == pytest.approx(0.5, abs=1e-6)


def test_lst_exponent_convex_increasing():
    s = np.linspace(0, 20, 401)
    vals = ms.lst_exponent(dc.example1_mixture(), 1.0, s)
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) >= -1e-12)


def test_char_exponent_definition():
    s = 1.3
    expected = 0.5 * (dc.cf(EXP1, s) - 1) - 1j * s
    assert ms.char_exponent(EXP1, 0.5, s) == pytest.approx(expected)


def test_psi_examples():
    assert ms.psi_inverse(EXP1, 0.5, 0.75) == pytest.approx(1.0, abs=1e-11)
    q = 1e-6
    assert ms.psi_inverse(EXP1, 0.5, q) / q == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("model,lam", [(EXP1, 0.5), (dc.example1_mixture(), 1.0), (dc.lognormal(0.2, 0.5), 0.6)])
@pytest.mark.parametrize("q", [0.1, 1.0, 10.0])
def test_psi_round_trip(model, lam, q):
    psi = ms.psi_inverse(model, lam, q)
    assert 0 < psi <= q + lam
    assert ms.lst_exponent(model, lam, psi) == pytest.approx(q, rel=1e-10)


def test_psi_rejects_bad_input():
    with pytest.raises(ValueError):
        ms.psi_inverse(EXP1, 0.5, 0.0)
    with pytest.raises(ConfigError):
        ms.psi_inverse(EXP1, 1.5, 1.0)


def test_conditional_oracles_examples():
    assert ms.conditional_atom_oracle(EXP1, 0.5, 0.75, 0.0) == pytest.approx(0.75, abs=1e-10)
    assert ms.conditional_cf_oracle(EXP1, 0.5, 0.75, 1.0, 0.0) == pytest.approx(1.0)
    atom = ms.conditional_atom_oracle(EXP1, 0.5, 1.0, 2.0)
    assert 0 < atom <= 1
    assert abs(ms.conditional_cf_oracle(EXP1, 0.5, 1.0, 2.0, 3.0)) <= 1


def test_one_gap_transitions_match_oracle():
    v = ms.simulate_transitions(EXP1, 0.5, 1.0, 1.0, 100_000, seed=9)
    atom = ms.conditional_atom_oracle(EXP1, 0.5, 1.0, 1.0)
    p0 = np.mean(v == 0.0)
    assert abs(p0 - atom) <= 4 * math.sqrt(atom * (1 - atom) / v.size)
    for s in (1.0, 3.0):
        z = np.exp(1j * s * v)
        se = math.sqrt((z.real.var() + z.imag.var()) / v.size)
        assert abs(z.mean() - ms.conditional_cf_oracle(EXP1, 0.5, 1.0, 1.0, s)) <= 4 * se


def test_csv_round_trip(tmp_path, exp_run):
    path = ms.write_sample_csv(exp_run, tmp_path / "run" / "sample.csv")
    assert path.read_text().splitlines()[0] == "index,t,V"
    back = ms.read_sample_csv(path)
    assert back.observations.tobytes() == exp_run.observations.tobytes()
    assert back.lam == 0.5 and back.xi == 1.0 and back.model == EXP1
    assert back.times.tobytes() == exp_run.times.tobytes()


def test_csv_external_data_needs_rates(tmp_path):
    path = tmp_path / "ext.csv"
    path.write_text("V\n0\n1.5\n0\n2.0\n")
    with pytest.raises(ConfigError):
        ms.read_sample_csv(path)
    s = ms.read_sample_csv(path, lam=0.4, xi=2.0)
    assert s.observations.tolist() == [0.0, 1.5, 0.0, 2.0] and s.model is None


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("index,W\n0,1\n1,2\n")
    with pytest.raises(ConfigError):
        ms.read_sample_csv(path, lam=1, xi=1)


def test_sample_validation():
    with pytest.raises(ConfigError):
        ms.WorkloadSample(observations=np.array([1.0]), lam=1, xi=1)
    with pytest.raises(ConfigError):
        ms.WorkloadSample(observations=np.array([1.0, -0.1]), lam=1, xi=1)
    with pytest.raises(ConfigError):
        ms.WorkloadSample(observations=np.array([1.0, 2.0]), lam=0, xi=1)

import math

import numpy as np
import pytest
from scipy import stats

from urllc_ppp.errors import DomainError, UsageError
from urllc_ppp.fbl import CodingParams, error_probability_integral
from urllc_ppp.mcsim import (
    MonteCarloConfig,
    SirBatch,
    adequate_radius,
    empirical_cdf,
    empirical_error,
    ks_distance,
    read_batch,
    sample_sir,
    truncation_bias,
    write_batch,
)
from urllc_ppp.sirdist import NetworkParams, sir_cdf


def inverse_transform_batch(params, size, rng):
    # test-only path: exact draws from the analytic interference-limited CDF
    u = rng.random(size)
    samples = (-np.log1p(-u) / params.interference_coefficient) ** (params.path_loss_beta / 2)
    return SirBatch(samples=samples, params=params, seed=0)


def test_noise_only_is_exponential():
    c = 1e-3
    params = NetworkParams(0.0, 5.0, 4.0, c)
    batch = sample_sir(params, MonteCarloConfig(20_000, seed=3))
    mean = 1.0 / (c * 5.0**4)
    assert np.mean(batch.samples) == pytest.approx(mean, rel=0.03)
    assert stats.kstest(batch.samples, "expon", args=(0, mean)).pvalue > 1e-3
    assert ks_distance(batch, params) < 1.63 / math.sqrt(len(batch))


def test_no_interference_no_noise_gives_infinite_sir():
    params = NetworkParams(0.0, 5.0, 4.0, 0.0)
    batch = sample_sir(params, MonteCarloConfig(1000, seed=1))
    assert np.all(np.isinf(batch.samples))
    assert empirical_error(batch, CodingParams(500, 1.0)) == (0.0, 0.0)


def test_batch_of_threshold_values():
    coding = CodingParams(500, 1.3)
    batch = SirBatch(samples=np.full(50, coding.threshold), params=NetworkParams(1e-5), seed=0)
    mean, se = empirical_error(batch, coding)
    assert mean == pytest.approx(0.5, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_reference_setup_ks_and_cdf(ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(100_000, seed=7))
    assert len(batch) == 100_000 and np.all(batch.samples >= 0)
    assert ks_distance(batch, ref_net) <= 0.01
    assert empirical_cdf(batch, 0.0) == 0.0
    assert empirical_cdf(batch, math.inf) == 1.0
    assert abs(empirical_cdf(batch, 1.0) - sir_cdf(1.0, ref_net)) <= 0.01


def test_reference_setup_error_within_three_se(ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(100_000, seed=11))
    coding = CodingParams(500, 1.0)
    mean, se = empirical_error(batch, coding)
    assert abs(mean - error_probability_integral(ref_net, coding)) <= 3 * se


def test_empirical_cdf_nondecreasing(ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(5000, seed=2))
    xs = np.geomspace(1e-3, 1e9, 60)
    vals = [empirical_cdf(batch, x) for x in xs]
    assert vals == sorted(vals)


def test_ks_statistic_on_exact_draws(ref_net):
    n = 2000
    hits = 0
    for seed in range(40):
        batch = inverse_transform_batch(ref_net, n, np.random.default_rng(seed))
        hits += ks_distance(batch, ref_net) <= 1.36 / math.sqrt(n)
    assert hits >= 36


def test_ks_shrinks_with_sample_size(ref_net):
    # typical-case regression expectation, not a hard invariant
    small = [ks_distance(sample_sir(ref_net, MonteCarloConfig(100, seed=s)), ref_net) for s in range(5)]
    large = [ks_distance(sample_sir(ref_net, MonteCarloConfig(100_000, seed=s)), ref_net) for s in range(5)]
    assert sum(a > b for a, b in zip(small, large)) >= 4


def test_deterministic_across_workers(ref_net):
    cfg = MonteCarloConfig(25_000, seed=99, chunk_size=3000)
    one = sample_sir(ref_net, cfg, workers=1)
    many = sample_sir(ref_net, cfg, workers=8)
    assert one == many
    assert one.samples.tobytes() == many.samples.tobytes()
    assert sample_sir(ref_net, MonteCarloConfig(25_000, seed=100, chunk_size=3000), workers=1) != one


def test_chunk_prefix_is_stable(ref_net):
    # chunk i depends on (seed, i) only, so a longer run extends a shorter one
    short = sample_sir(ref_net, MonteCarloConfig(4000, seed=5, chunk_size=1000))
    longer = sample_sir(ref_net, MonteCarloConfig(9000, seed=5, chunk_size=1000))
    assert np.array_equal(longer.samples[:4000], short.samples)


def test_truncation_adequacy_enforced():
    ref_net = NetworkParams(1e-5)
    assert truncation_bias(ref_net, 2000.0) <= 1e-6
    steep_free = NetworkParams(1e-5, 5.0, 3.0)
    with pytest.raises(DomainError, match="far-field"):
        sample_sir(steep_free, MonteCarloConfig(10))
    radius = adequate_radius(steep_free)
    assert truncation_bias(steep_free, radius) <= 1e-6
    assert len(sample_sir(steep_free, MonteCarloConfig(10, region_radius=radius))) == 10


def test_region_radius_floor():
    with pytest.raises(DomainError):
        sample_sir(NetworkParams(1e-5, 5.0), MonteCarloConfig(10, region_radius=40.0))


def test_config_validation():
    with pytest.raises(DomainError):
        MonteCarloConfig(0)
    with pytest.raises(DomainError):
        MonteCarloConfig(10, seed=-1)
    with pytest.raises(DomainError):
        MonteCarloConfig(10, chunk_size=0)


def test_params_mismatch_and_empty(ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(100, seed=0))
    with pytest.raises(UsageError):
        ks_distance(batch, NetworkParams(2e-5))
    empty = SirBatch(samples=np.array([]), params=ref_net, seed=0)
    for call in (lambda: empirical_error(empty, CodingParams(10, 1.0)), lambda: empirical_cdf(empty, 1.0),
                 lambda: ks_distance(empty, ref_net)):  # fmt: skip
        with pytest.raises(DomainError):
            call()


def test_batch_dump_round_trip(tmp_path, ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(500, seed=12))
    path = tmp_path / "batch.txt"
    write_batch(batch, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# lambda=1e-05 D=5.0 beta=4.0 inv_power=0.0 seed=12 n_samples=500"
    assert len(lines) == 501
    assert read_batch(path) == batch


def test_batch_dump_rejects_truncated_file(tmp_path, ref_net):
    batch = sample_sir(ref_net, MonteCarloConfig(20, seed=1))
    path = tmp_path / "b.txt"
    write_batch(batch, path)
    path.write_text("\n".join(path.read_text().splitlines()[:-3]) + "\n")
    with pytest.raises(UsageError):
        read_batch(path)

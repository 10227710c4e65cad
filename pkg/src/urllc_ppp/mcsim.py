"""Monte Carlo oracle: Poisson interferer fields with Rayleigh fading.

Each realization places a Poisson number of interferers uniformly in a disk
around the typical receiver, draws unit-mean exponential power gains for all
links and records the resulting SIR (SINR when ``inv_power > 0``).

Realizations are produced in chunks; chunk ``i`` draws from its own Philox
substream keyed by ``(seed, i)``, so a batch depends only on the parameters,
the seed and the chunk size, never on how many workers ran it.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .fbl import conditional_error
from .sirdist import DispersionModel, NetworkParams, sir_cdf

WORKERS_ENV = "URLLC_PPP_WORKERS"
DEFAULT_REGION_RADIUS = 2000.0
DEFAULT_CHUNK_SIZE = 10_000
# far-field interference left out by the disk, relative to the signal power D^-beta
TRUNCATION_BIAS_LIMIT = 1e-6


@dataclass(frozen=True)
class MonteCarloConfig:
    num_realizations: int = 100_000
    region_radius: float = DEFAULT_REGION_RADIUS
    seed: int = 0
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if self.num_realizations < 1:
            raise DomainError("num_realizations must be >= 1")
        if not self.region_radius > 0.0:
            raise DomainError("region_radius must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be >= 1")

    def check(self, params):
        """Raise unless the truncation disk is adequate for ``params``."""
        if self.region_radius < 10.0 * params.link_distance:
            raise DomainError("region_radius must be at least 10x the link distance")
        bias = truncation_bias(params, self.region_radius)
        if bias > TRUNCATION_BIAS_LIMIT:
            raise DomainError(
                f"region_radius={self.region_radius:g} leaves far-field interference at {bias:.3g} "
                f"of the signal power (limit {TRUNCATION_BIAS_LIMIT:g}); use at least "
                f"{adequate_radius(params):.6g}"
            )


def truncation_bias(params, radius):
    """Mean interference beyond ``radius`` divided by the signal power ``D^-beta``."""
    beta = params.path_loss_beta
    tail = 2.0 * math.pi * params.density * radius ** (2.0 - beta) / (beta - 2.0)
    return tail * params.link_distance**beta


def adequate_radius(params, floor=DEFAULT_REGION_RADIUS):
    """Smallest radius (at least ``floor``) meeting :data:`TRUNCATION_BIAS_LIMIT`."""
    beta = params.path_loss_beta
    radius = max(floor, 10.0 * params.link_distance)
    if params.density == 0.0:
        return radius
    needed = (
        TRUNCATION_BIAS_LIMIT * (beta - 2.0) / (2.0 * math.pi * params.density * params.link_distance**beta)
    ) ** (1.0 / (2.0 - beta))
    # round up slightly so the strict check passes despite rounding
    return max(radius, needed * (1.0 + 1e-9))


@dataclass(frozen=True)
class SirBatch:
    samples: np.ndarray = field(repr=False)
    params: NetworkParams
    seed: int

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, SirBatch):
            return NotImplemented
        return self.params == other.params and self.seed == other.seed and np.array_equal(self.samples, other.samples)


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _chunk_generator(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _sample_chunk(params, config, index, size):
    rng = _chunk_generator(config.seed, index)
    beta = params.path_loss_beta
    area = math.pi * config.region_radius**2
    counts = rng.poisson(params.density * area, size)
    total = int(counts.sum())
    radii = config.region_radius * np.sqrt(rng.random(total))
    gains = rng.exponential(size=total)
    owner = np.repeat(np.arange(size), counts)
    with np.errstate(divide="ignore"):
        interference = np.bincount(owner, weights=gains * radii ** (-beta), minlength=size)
    signal = rng.exponential(size=size) * params.link_distance ** (-beta)
    denom = interference + params.inv_power
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(denom > 0.0, signal / np.where(denom > 0.0, denom, 1.0), np.inf)
    return gamma


def sample_sir(params, config, workers=None):
    """Draw ``config.num_realizations`` SIR samples for ``params``."""
    config.check(params)
    sizes = []
    remaining = config.num_realizations
    while remaining > 0:
        sizes.append(min(config.chunk_size, remaining))
        remaining -= sizes[-1]

    n_workers = min(worker_count(workers), len(sizes))
    if n_workers == 1:
        chunks = [_sample_chunk(params, config, i, s) for i, s in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(lambda a: _sample_chunk(params, config, *a), enumerate(sizes)))
    return SirBatch(samples=np.concatenate(chunks), params=params, seed=config.seed)


def _require_nonempty(batch):
    if len(batch) == 0:
        raise DomainError("empty SIR batch")


def empirical_error(batch, coding, model=DispersionModel.IID_GAUSSIAN):
    """Sample mean and standard error of the conditional error over the batch."""
    _require_nonempty(batch)
    values = conditional_error(batch.samples, coding, model)
    values = np.atleast_1d(values)
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def empirical_cdf(batch, x):
    """Fraction of samples ``<= x``."""
    _require_nonempty(batch)
    if x < 0.0:
        raise DomainError("empirical_cdf needs x >= 0")
    return np.count_nonzero(batch.samples <= x) / len(batch)


def ks_distance(batch, params):
    """Kolmogorov-Smirnov distance between the batch and the analytic SIR CDF."""
    _require_nonempty(batch)
    if params != batch.params:
        raise UsageError("batch was drawn under different network parameters")
    xs = np.sort(batch.samples)
    n = len(xs)
    cdf = sir_cdf(xs, params)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def _header(batch):
    p = batch.params
    return (
        f"# lambda={p.density!r} D={p.link_distance!r} beta={p.path_loss_beta!r} "
        f"inv_power={p.inv_power!r} seed={batch.seed} n_samples={len(batch)}"
    )


def write_batch(batch, path):
    """Dump samples one per line under a parameter header line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_header(batch) + "\n")
        for value in batch.samples.tolist():
            fh.write(repr(value) + "\n")


def read_batch(path):
    with open(path, encoding="ascii") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise UsageError(f"{path}: missing batch header line")
        fields = dict(item.split("=", 1) for item in header[1:].split())
        try:
            params = NetworkParams(
                float(fields["lambda"]), float(fields["D"]), float(fields["beta"]), float(fields["inv_power"])
            )
            seed = int(fields["seed"])
            expected = int(fields["n_samples"])
        except KeyError as exc:
            raise UsageError(f"{path}: header lacks {exc.args[0]!r}") from None
        samples = np.array([float(line) for line in fh if line.strip()], dtype=float)
    if len(samples) != expected:
        raise UsageError(f"{path}: header announces {expected} samples, found {len(samples)}")
    return SirBatch(samples=samples, params=params, seed=seed)

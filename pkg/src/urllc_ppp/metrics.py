"""Maximum reliable rate, area spectral efficiency and the frequency-reuse sweep."""

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .errors import DomainError, NumericalError
from .fbl import CodingParams, error_probability_closed_form, error_probability_integral
from .sirdist import DispersionModel, NetworkParams

logger = logging.getLogger(__name__)

DEFAULT_RATE_TOL = 1e-6
DEFAULT_MIN_BLOCKLENGTH = 10
_MAX_DOUBLINGS = 64
_MAX_BISECTIONS = 200


class Method(str, enum.Enum):
    INTEGRAL = "integral"
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class ReliabilityTarget:
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon target must lie in (0, 1), got {self.epsilon!r}")


@dataclass(frozen=True)
class FfrSpec:
    eta_values: Sequence[int]
    min_blocklength: int = DEFAULT_MIN_BLOCKLENGTH

    def __post_init__(self):
        etas = tuple(int(e) for e in self.eta_values)
        if not etas:
            raise DomainError("eta_values must be nonempty")
        if any(e < 1 for e in etas):
            raise DomainError("reuse factors must be >= 1")
        if list(etas) != sorted(set(etas)):
            raise DomainError("eta_values must be sorted ascending and distinct")
        if self.min_blocklength < 2:
            raise DomainError("min_blocklength must be >= 2")
        object.__setattr__(self, "eta_values", etas)


@dataclass
class ResultRecord:
    """One output row; field names double as CSV columns."""

    method: str
    lambda_: float
    distance: float
    beta: float
    inv_power: float
    n: int
    rate: Optional[float] = None
    epsilon_target: Optional[float] = None
    epsilon: Optional[float] = None
    r_epsilon: Optional[float] = None
    ase: Optional[float] = None
    eta: Optional[int] = None
    seed: Optional[int] = None
    ks: Optional[float] = None
    notes: str = ""

    @classmethod
    def from_inputs(cls, method, params, n, **kwargs):
        return cls(
            method=Method(method).value,
            lambda_=params.density,
            distance=params.link_distance,
            beta=params.path_loss_beta,
            inv_power=params.inv_power,
            n=n,
            **kwargs,
        )

    @property
    def params(self):
        return NetworkParams(self.lambda_, self.distance, self.beta, self.inv_power)


@dataclass(frozen=True)
class RateSolution:
    """Result of :func:`solve_r_epsilon`.

    ``epsilon`` is the error probability at ``rate`` and ``epsilon_next`` the
    one at ``rate + rate_tol``; ``feasible`` is False when even the smallest
    positive rate misses the target.
    """

    rate: float
    epsilon: float
    epsilon_next: float
    feasible: bool = True
    evaluations: int = field(default=0, compare=False)


def error_function(params, blocklength, model=DispersionModel.IID_GAUSSIAN, method=Method.INTEGRAL, batch=None):
    """Return ``rate -> epsilon`` for the chosen evaluation method."""
    method = Method(method)
    if method is Method.INTEGRAL:
        return lambda r: error_probability_integral(params, CodingParams(blocklength, r), model)
    if method is Method.CLOSED_FORM:
        return lambda r: error_probability_closed_form(params, CodingParams(blocklength, r))
    if batch is None:
        raise DomainError("monte_carlo method needs a SirBatch")
    from .mcsim import empirical_error

    return lambda r: empirical_error(batch, CodingParams(blocklength, r), model)[0]


def solve_r_epsilon(
    params,
    blocklength,
    target,
    model=DispersionModel.IID_GAUSSIAN,
    method=Method.INTEGRAL,
    rate_tol=DEFAULT_RATE_TOL,
    batch=None,
    error_fn: Optional[Callable[[float], float]] = None,
):
    """Largest rate on the ``rate_tol`` lattice whose error probability meets the target.

    Bisection over integer multiples of ``rate_tol`` keeps the returned rate
    and its successor exactly representable, so the bracket
    ``eps(R) <= target < eps(R + rate_tol)`` is checked on the very points
    handed back.
    """
    if not rate_tol > 0.0:
        raise DomainError("rate_tol must be positive")
    if isinstance(target, (int, float)):
        target = ReliabilityTarget(float(target))
    if params.interference_coefficient == 0.0 and params.noise_coefficient == 0.0:
        raise DomainError("no interference and no noise: the reliable rate is unbounded")
    eps = error_fn or error_function(params, blocklength, model, method, batch)
    calls = 0

    def grid(k):
        # shortest decimal for the lattice point, so reported rates read cleanly
        return float(f"{k * rate_tol:.15g}")

    def at(k):
        nonlocal calls
        calls += 1
        return eps(grid(k))

    eps_first = at(1)
    if eps_first > target.epsilon:
        return RateSolution(0.0, math.nan, eps_first, feasible=False, evaluations=calls)

    lo, eps_lo = 1, eps_first
    hi_rate = max(1.0, 2.0 * rate_tol)
    for _ in range(_MAX_DOUBLINGS):
        hi = int(math.ceil(hi_rate / rate_tol))
        eps_hi = at(hi)
        if eps_hi > target.epsilon:
            break
        lo, eps_lo = hi, eps_hi
        hi_rate *= 2.0
    else:
        raise NumericalError("could not bracket the target error probability", estimate=lo * rate_tol)

    for _ in range(_MAX_BISECTIONS):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        eps_mid = at(mid)
        if eps_mid <= target.epsilon:
            lo, eps_lo = mid, eps_mid
        else:
            hi, eps_hi = mid, eps_mid
    else:
        raise NumericalError("bisection did not converge", estimate=lo * rate_tol, error_bound=(hi - lo) * rate_tol)

    rate = grid(lo)
    eps_next = eps(rate + rate_tol)
    calls += 1
    # guard against quadrature noise between (lo+1)*tol and rate+tol
    while eps_next <= target.epsilon:
        rate, eps_lo = rate + rate_tol, eps_next
        eps_next = eps(rate + rate_tol)
        calls += 1
    return RateSolution(rate, eps_lo, eps_next, feasible=True, evaluations=calls)


def area_spectral_efficiency(density, r_eps, epsilon):
    """Delivered bits per channel use per unit area, ``density * r_eps * (1 - epsilon)``."""
    if density < 0.0 or r_eps < 0.0 or not (0.0 <= epsilon <= 1.0):
        raise DomainError("area_spectral_efficiency needs nonnegative inputs and epsilon in [0, 1]")
    return density * r_eps * (1.0 - epsilon)


def ffr_sweep(
    params,
    blocklength,
    target,
    model=DispersionModel.IID_GAUSSIAN,
    spec=None,
    method=Method.INTEGRAL,
    rate_tol=DEFAULT_RATE_TOL,
):
    """Area spectral efficiency for each admissible reuse factor.

    With reuse factor ``eta`` every bin sees density ``lambda / eta`` and
    blocklength ``floor(n / eta)``; the ASE is evaluated at the per-bin
    density. Factors whose blocklength drops below ``spec.min_blocklength``
    are skipped (logged).
    """
    if isinstance(target, (int, float)):
        target = ReliabilityTarget(float(target))
    spec = spec or FfrSpec(range(1, 9))
    method = Method(method)
    if method is Method.MONTE_CARLO:
        raise DomainError("ffr_sweep supports the analytic methods only")

    records = []
    for eta in spec.eta_values:
        n_bin = blocklength // eta
        if n_bin < spec.min_blocklength:
            logger.info("skipping eta=%d: floor(n/eta)=%d < %d", eta, n_bin, spec.min_blocklength)
            continue
        bin_params = replace(params, density=params.density / eta)
        sol = solve_r_epsilon(bin_params, n_bin, target, model, method, rate_tol)
        ase = area_spectral_efficiency(bin_params.density, sol.rate, target.epsilon)
        records.append(
            ResultRecord.from_inputs(
                method,
                bin_params,
                n_bin,
                rate=sol.rate,
                epsilon_target=target.epsilon,
                epsilon=sol.epsilon if sol.feasible else None,
                r_epsilon=sol.rate,
                ase=ase,
                eta=eta,
                notes="" if sol.feasible else "infeasible",
            )
        )
    if not records:
        raise DomainError("no admissible reuse factor: every floor(n/eta) is below min_blocklength")
    return records


def ffr_optimum(records):
    """``(eta*, ase*)`` maximizing ASE; ties go to the smallest eta."""
    if not records:
        raise DomainError("ffr_optimum needs at least one record")
    best = None
    for rec in sorted(records, key=lambda r: r.eta):
        if best is None or rec.ase > best.ase:
            best = rec
    return best.eta, best.ase

"""Monte Carlo estimates: block jackknife, integrated autocorrelation time, weighted means."""

import logging
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

LOGGER = logging.getLogger(__name__)

JACKKNIFE_BLOCKS = 50
SOKAL_WINDOW = 5.0


class EstimateMethod(str, Enum):
    EXACT = "Exact"
    GAUSSIAN = "Gaussian"
    REWEIGHTING = "Reweighting"
    METROPOLIS = "Metropolis"


class Estimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    std_error: float
    n_eff: float
    method: EstimateMethod
    tau_int: float = 0.5

    @model_validator(mode="after")
    def _check(self) -> "Estimate":
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be non-negative, got {self.std_error}")
        if not self.n_eff >= 1:
            raise ValueError(f"n_eff must be at least 1, got {self.n_eff}")
        return self

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(value=float(value), std_error=0.0, n_eff=1.0, method=EstimateMethod.EXACT)

    def agrees_with(self, target: float, n_sigma: float = 3.0, floor: float = 0.0) -> bool:
        """|value - target| within n_sigma standard errors (plus an absolute floor)."""
        return abs(self.value - target) <= n_sigma * self.std_error + floor

    def combined_error(self, other: "Estimate") -> float:
        return float(np.hypot(self.std_error, other.std_error))


def effective_sample_size(weights: np.ndarray) -> float:
    """(sum w)^2 / sum w^2."""
    weights = np.asarray(weights, dtype=float)
    return float(weights.sum() ** 2 / np.sum(weights**2))


def normalised_weights(log_weights: np.ndarray) -> np.ndarray:
    """exp(log w - max log w): the largest weight is exactly 1."""
    log_weights = np.asarray(log_weights, dtype=float)
    return np.exp(log_weights - np.max(log_weights))


def block_jackknife(
    values: np.ndarray,
    weights: Optional[np.ndarray] = None,
    statistic: Optional[Callable[[np.ndarray], float]] = None,
    n_blocks: int = JACKKNIFE_BLOCKS,
) -> tuple[float, float]:
    """Weighted mean of ``values`` (or ``statistic`` of the column means) with a block jackknife error.

    Args:
        values: Per-sample observations, shape (n,) or (n, k).
        weights: Optional per-sample weights; the mean is sum(w v) / sum(w).
        statistic: Maps the k weighted column means to the derived quantity.
            Defaults to the first column mean.
        n_blocks: Number of contiguous blocks (capped at n).

    Returns:
        (value, standard error)
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if statistic is None:
        statistic = lambda means: float(means[0])  # noqa: E731

    weighted = values * weights[:, None]
    total_w = weights.sum()
    total_wv = weighted.sum(axis=0)
    estimate = float(statistic(total_wv / total_w))

    blocks = max(2, min(n_blocks, n))
    edges = np.linspace(0, n, blocks + 1).astype(int)
    block_w = np.add.reduceat(weights, edges[:-1])
    block_wv = np.add.reduceat(weighted, edges[:-1], axis=0)
    leave_out = np.array(
        [statistic((total_wv - block_wv[b]) / (total_w - block_w[b])) for b in range(blocks)], dtype=float
    )
    spread = np.sum((leave_out - leave_out.mean()) ** 2)
    return estimate, float(np.sqrt((blocks - 1) / blocks * spread))


def integrated_autocorrelation(series: np.ndarray, window: float = SOKAL_WINDOW) -> float:
    """tau_int = 1/2 + sum_t rho(t) with Sokal's self-consistent window W >= window * tau(W).

    A constant series returns 1/2.
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    centred = series - series.mean()
    variance = np.dot(centred, centred) / n
    if n < 4 or variance == 0:
        return 0.5
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centred, n=size)
    autocov = np.fft.irfft(spectrum * np.conj(spectrum), n=size)[:n] / n
    rho = autocov / autocov[0]
    tau = 0.5
    for lag in range(1, n):
        tau += rho[lag]
        if lag >= window * tau:
            break
    return float(max(tau, 0.5))


def sample_estimate(
    values: np.ndarray,
    method: EstimateMethod,
    weights: Optional[np.ndarray] = None,
    statistic: Optional[Callable[[np.ndarray], float]] = None,
    n_chains: int = 1,
) -> Estimate:
    """Estimate from per-sample values.

    Metropolis values hold ``n_chains`` equal-length chains one after another. Each chain
    gets its iid (leave-one-out) error inflated by sqrt(2 tau_int), and the chains are
    combined with :func:`merge_estimates`.
    """
    values = np.asarray(values, dtype=float)
    if method is EstimateMethod.METROPOLIS:
        return merge_estimates([_chain_estimate(chain, statistic) for chain in np.split(values, n_chains)])
    value, error = block_jackknife(values, weights, statistic)
    n_eff = float(values.shape[0]) if weights is None else effective_sample_size(weights)
    return Estimate(value=value, std_error=error, n_eff=max(1.0, n_eff), method=method)


def _chain_estimate(chain: np.ndarray, statistic: Optional[Callable[[np.ndarray], float]]) -> Estimate:
    n = chain.shape[0]
    value, naive = block_jackknife(chain, statistic=statistic, n_blocks=n)
    tau = integrated_autocorrelation(chain if chain.ndim == 1 else chain[:, 0])
    return Estimate(
        value=value,
        std_error=naive * float(np.sqrt(2.0 * tau)),
        n_eff=max(1.0, n / (2.0 * tau)),
        method=EstimateMethod.METROPOLIS,
        tau_int=tau,
    )


def merge_estimates(estimates: Sequence[Estimate]) -> Estimate:
    """n_eff-weighted combination of independent estimates of the same quantity."""
    if not estimates:
        raise ValueError("nothing to merge")
    n_eff = np.array([e.n_eff for e in estimates])
    values = np.array([e.value for e in estimates])
    errors = np.array([e.std_error for e in estimates])
    total = n_eff.sum()
    return Estimate(
        value=float(np.dot(n_eff, values) / total),
        std_error=float(np.sqrt(np.dot(n_eff**2, errors**2)) / total),
        n_eff=float(total),
        method=estimates[0].method,
        tau_int=float(np.max([e.tau_int for e in estimates])),
    )

"""Monte Carlo check that the moment estimator reaches var(d) = 1 / (tau Re_d).

Each trial draws one tau-shot sample-mean count vector and turns it into a
separation estimate.  Trial ``i`` uses its own generator seeded from
``(seed, i)``, so results do not depend on thread count or scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import sensitivity
from .detection import CountModel, count_model
from .errors import DomainError, ParameterError
from .estimator import LinearizedMoments, linearize, refine_estimate
from .optics import ModeBasis, OpticsParams
from .source import SourceParams

THREADS_ENV = "SPADE_SENSE_THREADS"


class Sampler(str, Enum):
    GAUSSIAN_CLT = "gaussian_clt"
    POISSON_INDEPENDENT = "poisson_independent"

    @classmethod
    def parse(cls, value) -> "Sampler":
        aliases = {"gaussian": cls.GAUSSIAN_CLT, "poisson": cls.POISSON_INDEPENDENT}
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class EstimationRun:
    d_true: float
    tau: int
    trials: int
    seed: int
    sampler: Sampler
    estimates: np.ndarray
    empirical_var: float
    predicted_var: float
    ratio: float

    @property
    def bias(self) -> float:
        return float(np.mean(self.estimates) - self.d_true)

    @property
    def bias_stderr(self) -> float:
        return math.sqrt(self.empirical_var / self.trials)

    @property
    def var_stderr(self) -> float:
        return self.empirical_var * math.sqrt(2.0 / (self.trials - 1))


def thread_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def sample_mean(model: CountModel, tau: int, rng: np.random.Generator, sampler=Sampler.GAUSSIAN_CLT) -> np.ndarray:
    """Draw one tau-shot sample mean of the mode counts.

    Returns a vector over every mode of ``model``; modes outside
    ``model.modes`` are left at their (negligible) mean.
    """
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau!r}")
    sampler = Sampler.parse(sampler)
    out = model.means.copy()
    means = model.populated_means
    if sampler is Sampler.POISSON_INDEPENDENT:
        if model.g2 != 1.0:
            raise ParameterError(f"the independent Poisson sampler needs g2 = 1, got {model.g2}")
        out[model.modes] = rng.poisson(tau * means) / tau
        return out
    # symmetric square root of diag(N) + c N N^T = D^1/2 (I + c u u^T) D^1/2, u = sqrt(N)
    n_d = means.sum()
    scale = 1.0 + (model.g2 - 1.0) * n_d
    if scale <= 0:
        raise DomainError(f"count covariance is not positive definite (1 + (g2-1) N_D = {scale:.6g})")
    u = np.sqrt(means)
    beta = (math.sqrt(scale) - 1.0) / n_d
    z = rng.standard_normal(means.size)
    out[model.modes] = means + u * (z + beta * u * (u @ z)) / math.sqrt(tau)
    return out


def local_estimate(n_bar, d0, source: SourceParams, optics: OpticsParams, basis: ModeBasis | None = None, refine=False):
    """One-step moment estimate of d from a sample-mean vector, linearized at ``d0``."""
    lin = linearize(source, optics, d0, basis)
    if refine:
        return refine_estimate(n_bar, lin, source, optics)
    return float(lin.estimate(n_bar))


def _run_chunk(indices, model, lin: LinearizedMoments, tau, seed, sampler):
    return [float(lin.estimate(sample_mean(model, tau, trial_rng(seed, i), sampler))) for i in indices]


def run_trials(
    source: SourceParams,
    optics: OpticsParams,
    d_true: float,
    tau: int,
    trials: int,
    seed: int,
    basis: ModeBasis | None = None,
    sampler=Sampler.GAUSSIAN_CLT,
    threads: int | None = None,
) -> EstimationRun:
    """Estimate d from ``trials`` independent sample means and compare to the bound."""
    if trials < 2:
        raise ParameterError(f"need at least 2 trials for a variance, got {trials!r}")
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau!r}")
    sampler = Sampler.parse(sampler)
    if basis is None:
        basis = ModeBasis.for_gamma(d_true / (2.0 * optics.omega))
    model = count_model(source, optics, d_true, basis)
    lin = linearize(source, optics, d_true, basis)
    threads = threads or thread_count()

    chunks = np.array_split(np.arange(trials), max(1, min(threads, trials)))
    estimates = np.empty(trials)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = pool.map(lambda c: _run_chunk(c, model, lin, tau, seed, sampler), chunks)
        for chunk, values in zip(chunks, results):
            estimates[chunk] = values

    empirical = float(np.var(estimates, ddof=1))
    predicted = sensitivity.total(source, optics, d_true, basis, tau=tau).var_d
    return EstimationRun(
        d_true=float(d_true),
        tau=int(tau),
        trials=int(trials),
        seed=int(seed),
        sampler=sampler,
        estimates=estimates,
        empirical_var=empirical,
        predicted_var=predicted,
        ratio=empirical / predicted,
    )

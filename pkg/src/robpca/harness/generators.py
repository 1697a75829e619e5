"""Synthetic samples with a known population Gram matrix.

Seeds: trial ``t`` of an experiment with root seed ``s`` uses
``SeedSequence(s, spawn_key=(t,))``; its three spawned children drive the
data, the net and the off-net probes.  Any trial can therefore be replayed
on its own, in any order or process.
"""

from __future__ import annotations

import math

import numpy as np

from robpca.harness.config import ExperimentConfig


def trial_seed(root: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root, spawn_key=(trial,))


def trial_streams(seed: np.random.SeedSequence | int):
    """(data rng, net seed, probe seed) for one trial."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    data_ss, net_ss, probe_ss = seed.spawn(3)
    return (
        np.random.default_rng(data_ss),
        int(net_ss.generate_state(1)[0]),
        int(probe_ss.generate_state(1)[0]),
    )


def haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def population_gram(config: ExperimentConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``(G, sqrt_G)`` with the configured spectrum, rotated unless fixed."""
    lam = np.asarray(config.spectrum, dtype=float)
    if config.distribution == "fixed_spectrum":
        u = np.eye(config.d)
    else:
        u = haar_orthogonal(rng, config.d)
    g = (u * lam) @ u.T
    root = (u * np.sqrt(lam)) @ u.T
    return 0.5 * (g + g.T), root


def generate_sample(config: ExperimentConfig, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` centred vectors; return ``(sample, G_true)``.

    Student-t draws are rescaled by ``sqrt((dof - 2) / dof)`` so that their
    covariance is ``G_true``.  In contaminated mode a ``rate`` fraction of
    rows is multiplied by ``scale`` and ``G_true`` is the clean covariance.
    """
    rng = seed if isinstance(seed, np.random.Generator) else trial_streams(seed)[0]
    g, root = population_gram(config, rng)
    z = rng.standard_normal((config.n, config.d))
    if config.distribution == "student_t":
        nu = config.dof
        w = rng.chisquare(nu, size=config.n)
        z = z * np.sqrt(nu / w)[:, None] * math.sqrt((nu - 2.0) / nu)
    x = z @ root
    if config.distribution == "contaminated" and config.contamination_rate > 0:
        hit = rng.random(config.n) < config.contamination_rate
        x[hit] *= config.contamination_scale
    return x, g


def population_moments(config: ExperimentConfig, g: np.ndarray) -> tuple[float, float] | None:
    """Exact ``(kappa, s4_sq)`` of the clean model, or ``None`` when unknown.

    Gaussian: ``kappa = 3`` and ``E||X||^4 = Tr(G)^2 + 2 Tr(G^2)``; the
    rescaled Student-t multiplies both by ``(dof - 2) / (dof - 4)``.
    """
    if config.distribution == "contaminated":
        return None
    tr = float(np.trace(g))
    tr2 = float(np.sum(g * g))
    factor = 1.0
    if config.distribution == "student_t":
        factor = (config.dof - 2.0) / (config.dof - 4.0)
    return 3.0 * factor, math.sqrt(factor * (tr * tr + 2.0 * tr2))

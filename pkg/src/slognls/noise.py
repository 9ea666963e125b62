"""Lattice white noise, mollification and noise statistics.

White noise is sampled in physical space as iid ``N(0, h^-d)`` values, so the
lattice pairing ``<xi, phi> = sum xi_j phi_j h^d`` has variance ``||phi||^2_{L^2}``.
Streams come from numpy's counter-based Philox generator; ensemble members
get independent streams via ``SeedSequence.spawn``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import j0

from . import besov, grid
from .errors import ParameterError, StatisticalPowerError
from .grid import Field, GridSpec

RNG_NAME = "numpy.Philox4x64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seeds(master: int, n: int) -> list[int]:
    """Deterministic 64-bit member seeds split off a master seed."""
    children = np.random.SeedSequence(int(master)).spawn(int(n))
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


@dataclass(frozen=True)
class NoiseRealization:
    seed: int
    spec: GridSpec
    xi: Field


@dataclass(frozen=True)
class MollifierSpec:
    family: str = "gaussian"
    eps: float = 0.5

    def __post_init__(self):
        if self.family not in ("gaussian", "bump"):
            raise ParameterError(f"unknown mollifier family {self.family!r}")
        if not self.eps > 0:
            raise ParameterError(f"mollifier scale eps must be > 0, got {self.eps}")


def sample_white_noise(spec: GridSpec, seed: int) -> NoiseRealization:
    rng = make_rng(seed)
    values = rng.standard_normal(spec.shape) * spec.h ** (-spec.d / 2)
    return NoiseRealization(int(seed), spec, Field(spec, values))


def coupled_noise(master: NoiseRealization, spec: GridSpec) -> NoiseRealization:
    """Same realization seen on a coarser grid (spectral restriction of the master)."""
    vals = grid.restrict(master.xi.values, master.spec, spec)
    return NoiseRealization(master.seed, spec, Field(spec, vals))


# -- mollifier transforms -----------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(400)


def _bump_profile(r):
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@lru_cache(maxsize=4)
def _bump_table(d: int):
    r = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * _GL_WEIGHTS * _bump_profile(r)
    if d == 1:
        norm = 2 * np.sum(w)
    else:
        norm = 2 * np.pi * np.sum(w * r)
    return r, w, norm


def bump_hat(kappa: np.ndarray, d: int) -> np.ndarray:
    """Fourier transform of the unit-mass radial bump exp(-1/(1-|x|^2)) at |k| = kappa."""
    r, w, norm = _bump_table(d)
    kappa = np.asarray(kappa, dtype=float)
    flat = np.unique(kappa.ravel(), return_inverse=True)
    vals, inv = flat
    out = np.empty(vals.size)
    for start in range(0, vals.size, 2048):
        kk = vals[start:start + 2048, None]
        if d == 1:
            out[start:start + 2048] = 2 * np.sum(w * np.cos(kk * r), axis=1)
        else:
            out[start:start + 2048] = 2 * np.pi * np.sum(w * r * j0(kk * r), axis=1)
    return (out / norm)[inv].reshape(kappa.shape)


def rho_hat(m: MollifierSpec, spec: GridSpec) -> np.ndarray:
    """Multiplier rho_hat(eps k) on the grid; equals 1 at k = 0."""
    k2 = spec.k2()
    if m.family == "gaussian":
        return np.exp(-0.5 * m.eps**2 * k2)
    return bump_hat(m.eps * np.sqrt(k2), spec.d)


def mollify(xi: Field, m: MollifierSpec) -> Field:
    """xi_eps = xi * rho_eps by spectral multiplication."""
    xi.require("physical")
    out = grid.multiply(xi.spec, xi.values, rho_hat(m, xi.spec), real_output=True)
    return Field(xi.spec, out)


def mollified_covariance(m: MollifierSpec, spec: GridSpec, offset) -> float:
    """Lattice E[xi_eps(x) xi_eps(x + offset)] = L^-d sum_k |rho_hat|^2 e^{ik.offset}."""
    rh = rho_hat(m, spec)
    phase = sum(k * o for k, o in zip(spec.wavenumbers(), np.atleast_1d(offset)))
    return float(np.sum(np.abs(rh) ** 2 * np.cos(phase)) / spec.volume)


def regularity_probe(xi: Field, alpha: float, mu: float) -> float:
    """sup_n 2^(n alpha) || <x>^-mu Delta_n xi ||_inf over the resolved blocks."""
    xi.require("physical")
    return besov.block_sup(xi.spec, xi.values, alpha, -mu)


# -- statistics ---------------------------------------------------------------


def pairing(spec: GridSpec, xi: np.ndarray, phi: np.ndarray) -> float:
    return float(np.sum(xi * phi) * spec.cell)


def covariance_study(spec: GridSpec, phi: np.ndarray, psi: np.ndarray, n_samples: int,
                     master_seed: int) -> dict:
    """Monte-Carlo moments of (<xi, phi>, <xi, psi>) over an ensemble."""
    if n_samples < 2:
        raise StatisticalPowerError("covariance needs at least 2 samples", required=2)
    a = np.empty(n_samples)
    b = np.empty(n_samples)
    for i, s in enumerate(derive_seeds(master_seed, n_samples)):
        x = sample_white_noise(spec, s).xi.values
        a[i] = pairing(spec, x, phi)
        b[i] = pairing(spec, x, psi)
    prod = a * b
    return {
        "n": n_samples,
        "mean_phi": float(a.mean()),
        "stderr_mean_phi": float(a.std(ddof=1) / np.sqrt(n_samples)),
        "cov": float(prod.mean()),
        "stderr_cov": float(prod.std(ddof=1) / np.sqrt(n_samples)),
        "target": float(np.sum(phi * psi) * spec.cell),
    }


def regularity_study(master: NoiseRealization, resolutions, alpha: float, mu: float) -> list[dict]:
    """Probe value of the same realization restricted to each resolution."""
    rows = []
    for N in resolutions:
        spec = GridSpec(master.spec.d, int(N), master.spec.L)
        xi = coupled_noise(master, spec).xi
        rows.append({"N": int(N), "value": regularity_probe(xi, alpha, mu)})
    return rows


def noise_stats_rows(spec: GridSpec, n_samples: int, seed: int, alpha: float = -0.6,
                     mu: float = 0.1, resolutions=(64, 128, 256)) -> list[dict]:
    """Rows (n_samples, statistic, value, stderr) for the covariance and regularity probes."""
    x = spec.coords()
    r2 = spec.radius2()
    phi = np.exp(-r2 / 2)
    psi_orth = x[0] * np.exp(-r2 / 2) * np.ones(spec.shape)
    shift = np.exp(-((x[0] - 1.0) ** 2 + sum(c**2 for c in x[1:])) / 2) * np.ones(spec.shape)
    same = covariance_study(spec, phi, shift, n_samples, seed)
    orth = covariance_study(spec, phi, psi_orth, n_samples, seed)
    rows = [
        {"n_samples": n_samples, "statistic": "mean_pairing", "value": same["mean_phi"],
         "stderr": same["stderr_mean_phi"]},
        {"n_samples": n_samples, "statistic": "covariance", "value": same["cov"],
         "stderr": same["stderr_cov"]},
        {"n_samples": n_samples, "statistic": "covariance_target", "value": same["target"],
         "stderr": 0.0},
        {"n_samples": n_samples, "statistic": "covariance_orthogonal", "value": orth["cov"],
         "stderr": orth["stderr_cov"]},
    ]
    fine = GridSpec(spec.d, max(max(resolutions), spec.N), spec.L)
    master = sample_white_noise(fine, seed)
    for r in regularity_study(master, resolutions, alpha, mu):
        rows.append({"n_samples": 1, "statistic": f"regularity_N{r['N']}", "value": r["value"],
                     "stderr": 0.0})
    return rows

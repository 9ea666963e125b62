"""The field X_eps, Wick renormalization and the exponential transform.

Two constructions of ``X`` from the (mollified) noise are available:

``spectral``
    zero-mean inverse Laplacian on the torus, ``X_hat = -xi_hat / |k|^2`` and
    ``X_hat(0) = 0``; then ``Delta X = xi - mean(xi)`` and the correction
    field is the constant ``-mean(xi)``.
``kernel``
    ``X = G * xi`` with ``G = chi_R * Gamma``, where ``Gamma`` is the Laplacian
    Green function (``log|x| / 2pi`` in 2-D, ``|x| / 2`` in 1-D) and ``chi_R``
    a C-infinity cutoff equal to 1 on ``|x| <= R/2`` and 0 beyond ``R``.
    Then ``Delta G = delta + phi`` with the explicit smooth
    ``phi = Gamma Delta chi_R + 2 grad chi_R . grad Gamma``, so
    ``Delta X = xi + phi * xi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate
from scipy.special import j0

from . import besov, grid
from .errors import ParameterError, StatisticalPowerError
from .grid import Field, GridSpec
from .noise import MollifierSpec, derive_seeds, rho_hat, sample_white_noise


@dataclass(frozen=True)
class KernelSpec:
    mode: str = "spectral"
    radius: float = 1.0

    def __post_init__(self):
        if self.mode not in ("spectral", "kernel"):
            raise ParameterError(f"unknown X construction mode {self.mode!r}")
        if not self.radius > 0:
            raise ParameterError("kernel radius must be positive")


@dataclass(frozen=True)
class EnhancedNoise:
    spec: GridSpec
    xi_eps: Field
    X_eps: Field
    gradX_eps: tuple
    wick: Field
    c_eps: float
    correction: Field
    expX_plus: Field
    expX_minus: Field


# -- smooth cutoff and kernel transforms --------------------------------------


def _smooth_step(t):
    """g(t) rising from 0 (t <= 0) to 1 (t >= 1), C-infinity; returns g, g', g''."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-300, 1 - 1e-16)
    sc = 1.0 - tc
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        A = np.where(t > 0, np.exp(-1.0 / tc), 0.0)
        B = np.where(t < 1, np.exp(-1.0 / sc), 0.0)
        A1 = np.where(t > 0, A / tc**2, 0.0)
        A2 = np.where(t > 0, A * (1 / tc**4 - 2 / tc**3), 0.0)
        B1 = np.where(t < 1, -B / sc**2, 0.0)
        B2 = np.where(t < 1, B * (1 / sc**4 - 2 / sc**3), 0.0)
        S = A + B
        S1 = A1 + B1
        S2 = A2 + B2
        g = A / S
        g1 = (A1 * S - A * S1) / S**2
        g2 = (A2 * S - A * S2) / S**2 - 2 * S1 * (A1 * S - A * S1) / S**3
    g = np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, g))
    g1 = np.where((t <= 0) | (t >= 1), 0.0, g1)
    g2 = np.where((t <= 0) | (t >= 1), 0.0, g2)
    return g, g1, g2


def kernel_cutoff(r, radius: float):
    """chi_R(r) and its first two radial derivatives."""
    a = radius / 2
    g, g1, g2 = _smooth_step((np.asarray(r, dtype=float) - a) / (radius - a))
    s = 1.0 / (radius - a)
    return 1.0 - g, -g1 * s, -g2 * s * s


def green(r, d: int):
    r = np.asarray(r, dtype=float)
    if d == 1:
        return np.abs(r) / 2, 0.5 * np.ones_like(r)
    return np.log(r) / (2 * np.pi), 1.0 / (2 * np.pi * r)


def kernel_phi(r, d: int, radius: float):
    """phi = Delta G - delta as a radial function (supported in R/2 <= r <= R)."""
    chi, c1, c2 = kernel_cutoff(r, radius)
    gam, gam1 = green(r, d)
    lap_chi = c2 if d == 1 else c2 + c1 / r
    return gam * lap_chi + 2 * c1 * gam1


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(400)


def _radial_transform(f, kappa, d, lo, hi):
    r = lo + (hi - lo) * 0.5 * (_GL_NODES + 1.0)
    w = (hi - lo) * 0.5 * _GL_WEIGHTS * f(r)
    out = np.empty(kappa.size)
    for s in range(0, kappa.size, 2048):
        kk = kappa[s:s + 2048, None]
        if d == 1:
            out[s:s + 2048] = 2 * np.sum(w * np.cos(kk * r), axis=1)
        else:
            out[s:s + 2048] = 2 * np.pi * np.sum(w * r * j0(kk * r), axis=1)
    return out


def phi_hat(kappa, d: int, radius: float) -> np.ndarray:
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    return _radial_transform(lambda r: kernel_phi(r, d, radius), kappa.ravel(), d,
                             radius / 2, radius).reshape(kappa.shape)


def green_hat_zero(d: int, radius: float) -> float:
    """Integral of the truncated Green kernel G."""
    if d == 1:
        f = lambda x: 2 * (x / 2) * kernel_cutoff(x, radius)[0]
    else:
        f = lambda r: np.log(r) * kernel_cutoff(r, radius)[0] * r
    val, _ = integrate.quad(f, 0.0, radius, limit=200, points=[radius / 2])
    return float(val)


@lru_cache(maxsize=16)
def _multiplier(spec: GridSpec, k: KernelSpec) -> np.ndarray:
    k2 = spec.k2()
    out = np.zeros(spec.shape)
    nz = k2 > 0
    if k.mode == "spectral":
        out[nz] = -1.0 / k2[nz]
    else:
        if k.radius >= spec.L / 2:
            raise ParameterError(
                f"kernel support radius {k.radius} exceeds box half-width {spec.L / 2}"
            )
        vals, inv = np.unique(np.sqrt(k2), return_inverse=True)
        ph = phi_hat(vals, spec.d, k.radius)
        g = np.empty_like(vals)
        g[1:] = -(1.0 + ph[1:]) / vals[1:] ** 2
        g[0] = green_hat_zero(spec.d, k.radius)
        out = g[inv].reshape(spec.shape)
    out.flags.writeable = False
    return out


def multiplier(spec: GridSpec, k: KernelSpec) -> np.ndarray:
    """Fourier multiplier taking xi to X."""
    return _multiplier(spec, k)


# -- construction -------------------------------------------------------------


def _build_arrays(spec: GridSpec, xi_hat: np.ndarray, k: KernelSpec):
    """X, grad X, correction from the (raw-FFT) transform of xi_eps."""
    W = grid._WORKERS
    mult = multiplier(spec, k)
    Xh = mult * xi_hat
    X = sfft.ifftn(Xh, workers=W).real
    grads = [sfft.ifftn(1j * kj * Xh, workers=W).real for kj in spec.derivative_wavenumbers()]
    if k.mode == "spectral":
        corr = np.full(spec.shape, -xi_hat.flat[0].real / spec.size)
    else:
        corr = sfft.ifftn((-spec.k2() * mult - 1.0) * xi_hat, workers=W).real
    return X, grads, corr


def build_X(xi_eps: Field, k: KernelSpec = KernelSpec()):
    """Return (X_eps, gradX_eps, correction) with Delta X_eps = xi_eps + correction."""
    xi_eps.require("physical")
    if not xi_eps.is_real:
        xi_eps = xi_eps.real()
    spec = xi_eps.spec
    X, grads, corr = _build_arrays(spec, sfft.fftn(xi_eps.values, workers=grid._WORKERS), k)
    return Field(spec, X), tuple(Field(spec, g) for g in grads), Field(spec, corr)


def renorm_constant(m: MollifierSpec, k: KernelSpec, spec: GridSpec) -> float:
    """Closed-form lattice expectation E|grad X_eps|^2.

    ``c = L^-d sum_k |k|^2 |mult(k)|^2 |rho_hat(eps k)|^2`` with the derivative
    wavenumbers of the grid (Nyquist components excluded, as in ``gradient``).
    """
    kd2 = sum(kj**2 for kj in spec.derivative_wavenumbers())
    mult = multiplier(spec, k)
    return float(np.sum(kd2 * mult**2 * np.abs(rho_hat(m, spec)) ** 2) / spec.volume)


def _assemble(spec, xi_eps, X, grads, corr, c):
    g2 = sum(g**2 for g in grads)
    return EnhancedNoise(
        spec=spec,
        xi_eps=Field(spec, xi_eps),
        X_eps=Field(spec, X),
        gradX_eps=tuple(Field(spec, g) for g in grads),
        wick=Field(spec, g2 - c),
        c_eps=float(c),
        correction=Field(spec, corr),
        expX_plus=Field(spec, np.exp(X)),
        expX_minus=Field(spec, np.exp(-X)),
    )


def enhance(xi: Field, m: MollifierSpec, k: KernelSpec = KernelSpec()) -> EnhancedNoise:
    """All derived objects of one noise realization at mollification scale m.eps."""
    xi.require("physical")
    spec = xi.spec
    xh = sfft.fftn(xi.values, workers=grid._WORKERS) * rho_hat(m, spec)
    xi_eps = sfft.ifftn(xh, workers=grid._WORKERS).real
    X, grads, corr = _build_arrays(spec, xh, k)
    return _assemble(spec, xi_eps, X, grads, corr, renorm_constant(m, k, spec))


def zero_noise(spec: GridSpec) -> EnhancedNoise:
    z = np.zeros(spec.shape)
    return _assemble(spec, z, z, [z] * spec.d, z, 0.0)


def wick_square(en: EnhancedNoise) -> Field:
    """|grad X_eps|^2 - c_eps."""
    return Field(en.spec, sum(g.values**2 for g in en.gradX_eps) - en.c_eps)


def exp_transform(u: Field, en: EnhancedNoise, sign: int = 1) -> Field:
    """Multiply by e^{+X_eps} (sign=+1) or e^{-X_eps} (sign=-1)."""
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    if u.spec != en.spec:
        raise ParameterError("field and noise live on different grids")
    e = en.expX_plus if sign == 1 else en.expX_minus
    return Field(u.spec, u.values * e.values, u.tag)


# -- stochastic bound suite ---------------------------------------------------


def _linfit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def linear_fit(x, y):
    """Least-squares slope, intercept and R^2."""
    return _linfit(x, y)


@dataclass(frozen=True)
class BoundSuiteParams:
    eps: tuple = ()
    members: int = 200
    seed: int = 0
    alpha: float = 0.25
    mu: float = 0.5
    p: float = 6.0
    a: float = 1.0
    beta: float = 1.0
    mollifier: str = "gaussian"
    mode: str = "spectral"
    min_members: int = 200


def stochastic_bound_suite(spec: GridSpec, params: BoundSuiteParams) -> dict:
    """Ensemble quantiles of the X / Wick / exponential norm probes per eps, and growth fits.

    Statistics (all with weight <x>^-mu):

    * ``X_holder``: ||X_eps||_{C^alpha}
    * ``wick_holder``: ||:|grad X_eps|^2:||_{C^(alpha-1)}
    * ``expX_holder``: ||e^{a X_eps}||_{C^alpha}
    * ``corr_holder``: ||correction||_{C^beta}
    * ``log_growth``: ||grad X_eps||^2_{L^p} + ||:|grad X_eps|^2:||_{L^p}
    * ``cauchy``: ||X_e - X_e'||^2_{C^alpha} + ||wick_e - wick_e'||_{C^(alpha-1)}
      for consecutive eps > e' (reported at the larger eps)
    """
    P = params
    if P.members < P.min_members:
        raise StatisticalPowerError(
            f"stochastic bound suite needs at least {P.min_members} members, got {P.members}",
            required=P.min_members,
        )
    eps = sorted(P.eps, reverse=True)
    if len(eps) < 2:
        raise ParameterError("stochastic bound suite needs at least 2 eps values")
    k = KernelSpec(P.mode)
    molls = [MollifierSpec(P.mollifier, e) for e in eps]
    rhos = [rho_hat(m, spec) for m in molls]
    cs = [renorm_constant(m, k, spec) for m in molls]
    names = ["X_holder", "wick_holder", "expX_holder", "corr_holder", "log_growth", "cauchy"]
    data = {n: np.zeros((P.members, len(eps))) for n in names}
    data["cauchy"][:, -1] = np.nan
    W = grid._WORKERS
    hold = lambda a, al: besov.block_sup(spec, a, al, -P.mu)
    for i, s in enumerate(derive_seeds(P.seed, P.members)):
        xh0 = sfft.fftn(sample_white_noise(spec, s).xi.values, workers=W)
        prev = None
        for j, (rh, c) in enumerate(zip(rhos, cs)):
            X, grads, corr = _build_arrays(spec, xh0 * rh, k)
            g2 = sum(g**2 for g in grads)
            wick = g2 - c
            data["X_holder"][i, j] = hold(X, P.alpha)
            data["wick_holder"][i, j] = hold(wick, P.alpha - 1)
            data["expX_holder"][i, j] = hold(np.exp(P.a * X), P.alpha)
            data["corr_holder"][i, j] = hold(corr, P.beta)
            data["log_growth"][i, j] = (
                besov.lp_norm(spec, np.sqrt(g2), P.p, -P.mu) ** 2
                + besov.lp_norm(spec, wick, P.p, -P.mu)
            )
            if prev is not None:
                pX, pw = prev
                data["cauchy"][i, j - 1] = hold(pX - X, P.alpha) ** 2 + hold(pw - wick, P.alpha - 1)
            prev = (X, wick)
    rows = []
    med = {}
    for n in names:
        cols = data[n][:, :-1] if n == "cauchy" else data[n]
        q = np.quantile(cols, [0.1, 0.5, 0.9], axis=0)
        med[n] = q[1]
        for j, e in enumerate(eps):
            if n == "cauchy" and j == len(eps) - 1:
                continue
            rows.append({"statistic": n, "eps": e, "q10": float(q[0, j]), "median": float(q[1, j]),
                         "q90": float(q[2, j]), "members": P.members})
    loge = np.abs(np.log(np.asarray(eps)))
    bounded = {n: float(np.max(med[n]) / np.min(med[n])) for n in names[:4]}
    slope, icpt, r2 = _linfit(loge, med["log_growth"])
    cslope, _, cr2 = _linfit(np.log(eps[:-1]), np.log(med["cauchy"]))
    fits = {
        "bounded_ratio": bounded,
        "log_growth": {"slope": slope, "intercept": icpt, "r2": r2},
        "cauchy_order": {"order": cslope, "r2": cr2},
        "c_eps": dict(zip(map(float, eps), cs)),
    }
    return {"rows": rows, "fits": fits, "eps": eps, "samples": data}


def cauchy_difference(xi: Field, eps1: float, eps2: float, alpha: float = 0.5, mu: float = 0.5,
                      family: str = "gaussian", mode: str = "spectral") -> float:
    """Per-realization Cauchy statistic between two mollification scales."""
    k = KernelSpec(mode)
    e1 = enhance(xi, MollifierSpec(family, eps1), k)
    e2 = enhance(xi, MollifierSpec(family, eps2), k)
    spec = xi.spec
    dx = e1.X_eps.values - e2.X_eps.values
    dw = e1.wick.values - e2.wick.values
    return (besov.block_sup(spec, dx, alpha, -mu) ** 2
            + besov.block_sup(spec, dw, alpha - 1, -mu))

"""Littlewood-Paley blocks and weighted Besov / Sobolev / Hoelder norms on the lattice.

Conventions
-----------
* Weighted Lebesgue norm: ``||u||_{L^p_mu} = || <x>^mu u ||_{L^p}`` (Riemann sum,
  ``p = inf`` is the lattice max, a lower bound for the continuum sup).
* Dyadic scale is measured in units of the box frequency ``k0 = 2 pi / L``.
  With ``r = |k| / k0`` and the cutoff ``Phi`` (1 on ``r <= 1/2``, 0 on ``r >= 1``,
  raised cosine in ``log2 r`` in between) the block profiles are::

      psi_0 = Phi(r)
      psi_n = Phi(r / 2^n) - Phi(r / 2^(n-1))          1 <= n < n_max
      psi_{n_max} = 1 - Phi(r / 2^(n_max - 1))

  so ``sum_n psi_n == 1`` exactly and ``supp psi_n`` is the annulus
  ``2^(n-2) <= r <= 2^n``. ``n_max = log2(N/2)``; the last block also
  absorbs the 2-D corner modes beyond the Nyquist radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import grid
from .errors import ParameterError
from .grid import Field, GridSpec

INF = float("inf")


@dataclass(frozen=True)
class BesovParams:
    alpha: float
    p: float = 2.0
    q: float = 2.0
    mu: float = 0.0

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v >= 1):
                raise ParameterError(f"{name} must lie in [1, inf], got {v}")


@dataclass(frozen=True)
class LPDecomposition:
    spec: GridSpec
    blocks: tuple  # physical-space arrays, blocks[n] = Delta_n u
    profiles: tuple  # spectral multipliers psi_n

    @property
    def n_max(self) -> int:
        return len(self.blocks) - 1

    def total(self) -> np.ndarray:
        return np.sum(self.blocks, axis=0)


def cutoff(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[r <= 0.5] = 1.0
    mid = (r > 0.5) & (r < 1.0)
    out[mid] = np.cos(0.5 * np.pi * (np.log2(r[mid]) + 1.0)) ** 2
    return out


def n_max(spec: GridSpec) -> int:
    return int(round(np.log2(spec.N / 2)))


@lru_cache(maxsize=32)
def _profiles(spec: GridSpec) -> tuple:
    nm = n_max(spec)
    if nm + 1 < 3:
        raise ParameterError(f"grid N={spec.N} hosts fewer than 3 dyadic blocks")
    r = np.sqrt(spec.k2()) / spec.k_unit
    phis = [cutoff(r / 2.0**n) for n in range(nm)]
    prof = [phis[0]]
    prof += [phis[n] - phis[n - 1] for n in range(1, nm)]
    prof.append(1.0 - phis[nm - 1])
    for p in prof:
        p.flags.writeable = False
    return tuple(prof)


def block_profiles(spec: GridSpec) -> tuple:
    return _profiles(spec)


def lp_blocks(spec: GridSpec, a: np.ndarray) -> list[np.ndarray]:
    real = not np.iscomplexobj(a)
    ah = sfft.fftn(a, workers=grid._WORKERS)
    out = []
    for prof in _profiles(spec):
        b = sfft.ifftn(ah * prof, workers=grid._WORKERS)
        out.append(b.real if real else b)
    return out


def lp_decompose(u: Field) -> LPDecomposition:
    u.require("physical")
    return LPDecomposition(u.spec, tuple(lp_blocks(u.spec, u.values)), _profiles(u.spec))


def lp_norm(spec: GridSpec, a: np.ndarray, p: float = 2.0, mu: float = 0.0) -> float:
    """Weighted lattice norm ``|| <x>^mu a ||_{L^p}``."""
    w = np.abs(a)
    if mu != 0.0:
        w = w * (1.0 + spec.radius2()) ** (mu / 2)
    if p == INF:
        return float(np.max(w))
    return float((np.sum(w**p) * spec.cell) ** (1.0 / p))


def _combine(terms: np.ndarray, q: float) -> float:
    if q == INF:
        return float(np.max(terms))
    return float(np.sum(terms**q) ** (1.0 / q))


def besov_array(spec: GridSpec, a: np.ndarray, alpha: float, p: float = 2.0, q: float = 2.0,
                mu: float = 0.0, blocks=None) -> float:
    if blocks is None:
        blocks = lp_blocks(spec, a)
    terms = np.array([2.0 ** (alpha * n) * lp_norm(spec, b, p, mu) for n, b in enumerate(blocks)])
    return _combine(terms, q)


def besov_norm(u, bp: BesovParams, decomposition: LPDecomposition | None = None) -> float:
    """Truncated weighted Besov norm (sum_n 2^(alpha n q) ||Delta_n u||^q_{L^p_mu})^(1/q)."""
    if isinstance(u, LPDecomposition):
        decomposition, spec, arr = u, u.spec, None
    else:
        spec, arr = u.spec, u.values
    blocks = decomposition.blocks if decomposition is not None else None
    return besov_array(spec, arr, bp.alpha, bp.p, bp.q, bp.mu, blocks=blocks)


def block_sup(spec: GridSpec, a: np.ndarray, alpha: float, mu: float) -> float:
    """Weighted Hoelder probe sup_n 2^(n alpha) || <x>^mu Delta_n a ||_inf."""
    return besov_array(spec, a, alpha, INF, INF, mu)


def sobolev_array(spec: GridSpec, a: np.ndarray, alpha: float, mu: float = 0.0) -> float:
    if alpha == 0.0:
        b = a
    else:
        b = grid.multiply(spec, a, (1.0 + spec.k2()) ** (alpha / 2))
    return lp_norm(spec, b, 2.0, mu)


def sobolev_norm(u: Field, alpha: float, mu: float = 0.0) -> float:
    """||F^-1 <k>^alpha F u||_{L^2_mu}."""
    u.require("physical")
    return sobolev_array(u.spec, u.values, alpha, mu)


def space_norm(spec: GridSpec, a: np.ndarray, alpha: float, p: float, q: float, mu: float,
               realization: str = "auto") -> float:
    """Norm of B^alpha_{p,q,mu}; with ``auto`` the p = q = 2 case uses the H^alpha_mu form."""
    if realization not in ("auto", "besov", "sobolev"):
        raise ParameterError(f"unknown realization {realization!r}")
    use_h = realization == "sobolev" or (realization == "auto" and p == 2 and q == 2)
    if use_h:
        if not (p == 2 and q == 2):
            raise ParameterError("sobolev realization requires p = q = 2")
        return sobolev_array(spec, a, alpha, mu)
    return besov_array(spec, a, alpha, p, q, mu)


# -- inequality validators ----------------------------------------------------


def _conj(p: float) -> float:
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


def _close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _arrays(inputs) -> tuple:
    out = []
    spec = None
    for x in inputs:
        if isinstance(x, Field):
            spec = x.spec
            out.append(x.values)
        else:
            out.append(np.asarray(x))
    return spec, out


def _result(lhs: float, rhs: float) -> dict:
    if rhs == 0.0:
        ratio = 0.0 if lhs == 0.0 else INF
    else:
        ratio = lhs / rhs
    return {"lhs": float(lhs), "rhs_without_constant": float(rhs), "ratio": float(ratio)}


def validate_inequality(kind: str, inputs, params: dict, spec: GridSpec | None = None,
                        realization: str = "auto") -> dict:
    """Evaluate both sides of an embedding / interpolation / product / duality estimate.

    ``inputs`` is a sequence of Fields (or arrays with ``spec`` given).
    Returns ``{"lhs", "rhs_without_constant", "ratio"}``.
    """
    s, arrs = _arrays(inputs)
    spec = spec or s
    if spec is None:
        raise ParameterError("a GridSpec is required when inputs are plain arrays")
    P = dict(params)

    def norm(a, alpha, p, q, mu):
        return space_norm(spec, a, alpha, p, q, mu, realization)

    if kind == "embedding":
        (u,) = arrs
        a, p1, q1, m1 = P["alpha"], P["p1"], P["q1"], P["mu1"]
        p2, q2, m2 = P["p2"], P["q2"], P["mu2"]
        if not p1 <= p2:
            raise ParameterError("embedding requires p1 <= p2")
        if not q1 <= q2:
            raise ParameterError("embedding requires q1 <= q2")
        if not m1 >= m2:
            raise ParameterError("embedding requires mu1 >= mu2")
        a2 = a - spec.d * (_inv(p1) - _inv(p2))
        return _result(norm(u, a2, p2, q2, m2), norm(u, a, p1, q1, m1))

    if kind == "interpolation":
        (u,) = arrs
        th = P["theta"]
        if not 0.0 <= th <= 1.0:
            raise ParameterError("interpolation requires theta in [0, 1]")
        a0, p0, q0, m0 = P["alpha0"], P["p0"], P["q0"], P["mu0"]
        a1, p1, q1, m1 = P["alpha1"], P["p1"], P["q1"], P["mu1"]
        ip = (1 - th) * _inv(p0) + th * _inv(p1)
        iq = (1 - th) * _inv(q0) + th * _inv(q1)
        derived = {
            "alpha": ((1 - th) * a0 + th * a1, "alpha = (1-theta) alpha0 + theta alpha1"),
            "mu": ((1 - th) * m0 + th * m1, "mu = (1-theta) mu0 + theta mu1"),
            "p": (INF if ip == 0 else 1 / ip, "1/p = (1-theta)/p0 + theta/p1"),
            "q": (INF if iq == 0 else 1 / iq, "1/q = (1-theta)/q0 + theta/q1"),
        }
        vals = {}
        for key, (val, rel) in derived.items():
            if key in P:
                given = P[key]
                ok = (given == val) if INF in (given, val) else _close(given, val, 1e-10)
                if not ok:
                    raise ParameterError(f"interpolation hypothesis violated: {rel}")
            vals[key] = val
        lhs = norm(u, vals["alpha"], vals["p"], vals["q"], vals["mu"])
        n0 = norm(u, a0, p0, q0, m0)
        n1 = norm(u, a1, p1, q1, m1)
        if th == 0.0:
            rhs = n0
        elif th == 1.0:
            rhs = n1
        else:
            rhs = n0 ** (1 - th) * n1**th
        return _result(lhs, rhs)

    if kind == "product":
        u, v = arrs
        a1, a2 = P["alpha1"], P["alpha2"]
        m1, m2 = P.get("mu1", 0.0), P.get("mu2", 0.0)
        p1, p2 = P.get("p1", 2.0), P.get("p2", 2.0)
        kappa = P.get("kappa", 0.1)
        if not a1 + a2 > 0:
            raise ParameterError("product rule requires alpha1 + alpha2 > 0")
        if not kappa > 0:
            raise ParameterError("product rule requires kappa > 0")
        ip = _inv(p1) + _inv(p2)
        if ip > 1:
            raise ParameterError("product rule requires 1/p = 1/p1 + 1/p2 <= 1")
        p = INF if ip == 0 else 1 / ip
        if "p" in P and not _close(_inv(P["p"]), ip):
            raise ParameterError("product rule requires 1/p = 1/p1 + 1/p2")
        mu = m1 + m2
        if "mu" in P and not _close(P["mu"], mu):
            raise ParameterError("product rule requires mu = mu1 + mu2")
        alpha = min(a1, a2)
        lhs = norm(u * v, alpha - kappa, p, p, mu)
        rhs = norm(u, a1, p1, p1, m1) * norm(v, a2, p2, p2, m2)
        return _result(lhs, rhs)

    if kind == "duality":
        u, v = arrs
        a, p, q, mu = P.get("alpha", 0.0), P.get("p", 2.0), P.get("q", 2.0), P.get("mu", 0.0)
        pp, qq = _conj(p), _conj(q)
        if "p_prime" in P and not _close(_inv(p) + _inv(P["p_prime"]), 1.0):
            raise ParameterError("duality requires 1/p + 1/p' = 1")
        if "q_prime" in P and not _close(_inv(q) + _inv(P["q_prime"]), 1.0):
            raise ParameterError("duality requires 1/q + 1/q' = 1")
        lhs = abs(np.sum(u * v) * spec.cell)
        rhs = norm(u, a, p, q, mu) * norm(v, -a, pp, qq, -mu)
        return _result(lhs, rhs)

    raise ParameterError(f"unknown inequality kind {kind!r}")


def _log_integrand(a2: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros_like(a2)
    nz = a2 > 0
    out[nz] = a2[nz] * np.abs(np.log(a2[nz])) ** m
    return out


def validate_log_lemma(u: Field, m: int, eta: float, mu: float, mu0: float) -> dict:
    """Weighted logarithmic integral and the two displayed upper bounds (without constants).

    ``lhs = int <x>^(2mu) |u|^2 |log |u|^2|^m`` with ``0 log 0 = 0``.
    ``rhs`` uses the weighted L^(2+eta) term, ``rhs_h1`` replaces it by the
    smaller of the two H^1-based bounds.
    """
    u.require("physical")
    spec, d = u.spec, u.spec.d
    if int(m) != m or m < 1:
        raise ParameterError("log lemma requires an integer m >= 1")
    if not 0 <= mu < mu0:
        raise ParameterError("log lemma requires 0 <= mu < mu0")
    bound = 2 * (mu0 - mu) / (d / 2 + mu0)
    if not 0 < eta < bound:
        raise ParameterError(
            f"log lemma requires 0 < eta < 2(mu0 - mu)/(d/2 + mu0) = {bound:.6g}, got eta={eta}"
        )
    a = u.values
    a2 = np.abs(a) ** 2
    w = (1.0 + spec.radius2()) ** mu
    lhs = float(np.sum(w * _log_integrand(a2, int(m))) * spec.cell)

    l2 = lp_norm(spec, a, 2.0, 0.0)
    l2mu0 = lp_norm(spec, a, 2.0, mu0)
    e1 = d * eta / (2 * mu0) + 2 * mu / mu0
    first = l2mu0**e1 * l2 ** (2 - eta - e1) if l2 > 0 else 0.0
    lpe = lp_norm(spec, a, 2 + eta, 2 * mu / (2 + eta)) ** (2 + eta)
    s = d * eta / 2
    h1a = sobolev_array(spec, a, 1.0, 4 * mu / (d * eta)) ** s * l2 ** (2 + eta - s)
    h1b = sobolev_array(spec, a, 1.0, 0.0) ** s * lp_norm(spec, a, 2.0, 2 * mu / (2 + eta - s)) ** (2 + eta - s)
    return {
        "lhs": lhs,
        "rhs": float(first + lpe),
        "rhs_h1": float(first + min(h1a, h1b)),
    }


# -- corpus helpers -----------------------------------------------------------


def band_limited(spec: GridSpec, rng: np.random.Generator, band: int, real: bool = False,
                 decay: float = 1.0) -> np.ndarray:
    """Random trigonometric polynomial with modes |m_j| <= band (box units).

    The coefficients are drawn in a resolution-independent order, so the same
    generator state yields the same continuum function on every N > 2*band.
    """
    if 2 * band >= spec.N:
        raise ParameterError(f"band {band} not resolved on N={spec.N}")
    m = np.arange(-band, band + 1)
    shape = (m.size,) * spec.d
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mm = np.meshgrid(*([m] * spec.d), indexing="ij")
    c = c / (1.0 + sum(x**2 for x in mm)) ** (decay / 2)
    C = np.zeros(spec.shape, dtype=complex)
    idx = np.ix_(*([m % spec.N] * spec.d))
    C[idx] = c
    u = sfft.ifftn(C) * spec.size
    return u.real.copy() if real else u


DEFAULT_CORPUS_PARAMS = {
    "duality": {"alpha": 0.5, "p": 2.0, "q": 2.0, "mu": 0.3},
    "interpolation": {"theta": 0.5, "alpha0": 0.0, "p0": 2.0, "q0": 2.0, "mu0": 0.0,
                      "alpha1": 1.0, "p1": 2.0, "q1": 2.0, "mu1": 0.4},
    "product": {"alpha1": 1.0, "alpha2": 1.0, "kappa": 0.1, "p1": 2.0, "p2": 2.0},
    "embedding": {"alpha": 1.0, "p1": 2.0, "q1": 2.0, "mu1": 0.2, "p2": 4.0, "q2": 4.0, "mu2": 0.1},
    "log_lemma": {"m": 1, "eta": 0.1, "mu": 0.1, "mu0": 0.3},
}


def inequality_corpus(spec: GridSpec, n: int, band: int, seed: int, params: dict | None = None) -> dict:
    """Max and mean ratio per validator over ``n`` random band-limited inputs.

    Input ``i`` is drawn from its own seeded stream, so the corpus is the same
    set of continuum functions on every grid that resolves ``band``.
    """
    P = {**DEFAULT_CORPUS_PARAMS, **(params or {})}
    x = spec.coords()
    envelope = np.exp(-sum(c**2 for c in x) / 8.0)
    ratios = {k: [] for k in P}
    for i in range(n):
        rng = np.random.Generator(np.random.Philox(key=[int(seed), i]))
        u = band_limited(spec, rng, band) * envelope
        v = band_limited(spec, rng, band) * envelope
        fu, fv = Field(spec, u), Field(spec, v)
        for kind in ("duality", "interpolation", "product", "embedding"):
            ins = (fu,) if kind in ("interpolation", "embedding") else (fu, fv)
            ratios[kind].append(validate_inequality(kind, ins, P[kind])["ratio"])
        L = P["log_lemma"]
        r = validate_log_lemma(fu, L["m"], L["eta"], L["mu"], L["mu0"])
        ratios["log_lemma"].append(r["lhs"] / r["rhs"])
    return {k: {"max": float(np.max(v)), "mean": float(np.mean(v)), "params": P[k]}
            for k, v in ratios.items()}

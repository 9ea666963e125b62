"""Exponential splitting for i u_t = Delta u + W u + lam u log(delta + |u|^2).

Every piece has an exact unitary flow:

* linear:    u_hat <- exp(i |k|^2 t) u_hat
* potential: u <- exp(-i W t) u
* log:       u <- u exp(-i lam t log(delta + |u|^2))    (|u| is invariant)

The potential and log flows are both pointwise phases that leave |u|
unchanged, so they commute and are applied as a single phase. Strang is
``linear(dt/2) o phase(dt) o linear(dt/2)``, Lie is ``phase(dt) o linear(dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft

from . import grid
from .errors import DivergenceError, ParameterError
from .grid import Field, GridSpec


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1.0
    delta: float = 0.0
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "strang"
    record_every: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not self.T >= 0:
            raise ParameterError(f"T must be >= 0, got {self.T}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if self.scheme not in ("strang", "lie"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ParameterError("record_every must be >= 1")
        if abs(self.n_steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ParameterError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def truncation(spec: GridSpec, n: float) -> np.ndarray:
    """chi_n(x) = chi(x/n): 1 on |x| <= n, 0 on |x| >= 2n, raised cosine between."""
    r = np.sqrt(spec.radius2()) / n
    out = np.where(r <= 1, 1.0, 0.0)
    mid = (r > 1) & (r < 2)
    out[mid] = np.cos(0.5 * np.pi * (r[mid] - 1.0)) ** 2
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """Multiplicative potential W of the u-equation.

    kind ``none``: W = 0; ``deterministic``: W = chi_n V (no truncation when n
    is None); ``noise1d``: W = xi_eps; ``renormalized2d``: W = xi_eps - c_eps.
    """

    kind: str = "none"
    V: object = None
    n: float | None = None
    noise: object = None

    def __post_init__(self):
        if self.kind not in ("none", "deterministic", "noise1d", "renormalized2d"):
            raise ParameterError(f"unknown potential kind {self.kind!r}")
        if self.kind == "deterministic" and self.V is None:
            raise ParameterError("deterministic potential needs V")
        if self.kind in ("noise1d", "renormalized2d") and self.noise is None:
            raise ParameterError(f"{self.kind} potential needs an EnhancedNoise")

    def field(self, spec: GridSpec) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(spec.shape)
        if self.kind == "deterministic":
            V = self.V
            if callable(V):
                V = V(*spec.coords())
            V = np.asarray(V.values if isinstance(V, Field) else V, dtype=float) * np.ones(spec.shape)
            return V * truncation(spec, self.n) if self.n is not None else V
        en = self.noise
        if en.spec != spec:
            raise ParameterError("noise and solution grids differ")
        if self.kind == "noise1d":
            return np.array(en.xi_eps.values)
        return en.xi_eps.values - en.c_eps

    @property
    def renormalization(self) -> float:
        return self.noise.c_eps if self.kind == "renormalized2d" else 0.0


@dataclass
class Trajectory:
    spec: GridSpec
    config: SolverConfig
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)

    def append(self, t: float, u: np.ndarray) -> None:
        if self.times and not t > self.times[-1]:
            raise ParameterError("snapshot times must be strictly increasing")
        self.times.append(float(t))
        self.snapshots.append(Field(self.spec, u.copy()))

    def final(self) -> Field:
        return self.snapshots[-1]


# -- single flows -------------------------------------------------------------


def _log_phase(a2: np.ndarray, lam: float, delta: float, dt: float) -> np.ndarray:
    s = delta + a2
    out = np.zeros_like(s)
    nz = s > 0
    out[nz] = lam * dt * np.log(s[nz])
    return out


def linear_step(u: Field, dt: float) -> Field:
    u.require("physical")
    spec = u.spec
    return Field(spec, grid.multiply(spec, u.values.astype(complex), np.exp(1j * spec.k2() * dt)))


def potential_step(u: Field, W, dt: float) -> Field:
    Wv = W.values if isinstance(W, Field) else np.asarray(W)
    if np.iscomplexobj(Wv):
        raise ParameterError("potential must be real")
    return Field(u.spec, u.values * np.exp(-1j * Wv * dt))


def log_step(u: Field, lam: float, delta: float, dt: float) -> Field:
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    a = u.values
    return Field(u.spec, a * np.exp(-1j * _log_phase(np.abs(a) ** 2, lam, delta, dt)))


def star_inequality(z, zp):
    """Check |Im((z log|z|^2 - z' log|z'|^2)(conj z - conj z'))| <= 4 |z - z'|^2.

    The left side is evaluated in the cancellation-free form
    ``|Im(z conj z')| |log(|z|^2 / |z'|^2)|`` (0 log 0 = 0).
    Returns a boolean (array) of pointwise validity.
    """
    lhs, rhs = star_sides(z, zp)
    return lhs <= rhs * (1 + 1e-12)


def star_sides(z, zp):
    z = np.asarray(z, dtype=complex)
    zp = np.asarray(zp, dtype=complex)
    a = np.abs(z) ** 2
    b = np.abs(zp) ** 2
    cross = np.abs(np.imag(z * np.conj(zp)))
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.abs(np.log(a) - np.log(b))
    lhs = np.where(cross > 0, cross * np.where(np.isfinite(lr), lr, 0.0), 0.0)
    return lhs, 4 * np.abs(z - zp) ** 2


# -- composed stepper ---------------------------------------------------------


class Stepper:
    """Precomputed split-step propagator for one (grid, W, lam, delta, dt, scheme)."""

    def __init__(self, spec: GridSpec, W: np.ndarray, lam: float, delta: float, dt: float,
                 scheme: str = "strang"):
        if scheme not in ("strang", "lie"):
            raise ParameterError(f"unknown scheme {scheme!r}")
        self.spec = spec
        self.lam = float(lam)
        self.delta = float(delta)
        self.dt = float(dt)
        self.scheme = scheme
        self.W = np.asarray(W, dtype=float) * np.ones(spec.shape)
        k2 = spec.k2()
        frac = 0.5 if scheme == "strang" else 1.0
        self._lin = np.exp(1j * k2 * frac * dt)
        self._pot = np.exp(-1j * self.W * dt)

    def _linear(self, u):
        return sfft.ifftn(sfft.fftn(u, workers=grid._WORKERS) * self._lin, workers=grid._WORKERS)

    def _phase(self, u):
        if self.lam == 0.0:
            return u * self._pot
        ph = _log_phase(u.real**2 + u.imag**2, self.lam, self.delta, self.dt)
        return u * self._pot * np.exp(-1j * ph)

    def step(self, u: np.ndarray) -> np.ndarray:
        if self.scheme == "strang":
            return self._linear(self._phase(self._linear(u)))
        return self._phase(self._linear(u))


def strang_step(u: Field, config: SolverConfig, W=0.0) -> Field:
    """One step of the configured scheme with potential W (array, Field or scalar)."""
    Wv = W.values if isinstance(W, Field) else W
    st = Stepper(u.spec, Wv, config.lam, config.delta, config.dt, config.scheme)
    out = st.step(np.asarray(u.values, dtype=complex))
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state after step 1", step=1, last_snapshot=u)
    return Field(u.spec, out)


def solve(u0: Field, config: SolverConfig, pot: PotentialSpec = PotentialSpec(),
          observer: Callable | None = None) -> Trajectory:
    """Integrate from u0 to T, recording every ``record_every`` steps plus t = 0 and t = T.

    ``observer(t, u_array)`` is called at every recorded time.
    """
    u0.require("physical")
    spec = u0.spec
    u = np.array(u0.values, dtype=complex)
    if not np.all(np.isfinite(u)):
        raise ParameterError("initial datum is not finite")
    st = Stepper(spec, pot.field(spec), config.lam, config.delta, config.dt, config.scheme)
    traj = Trajectory(spec, config)
    traj.append(0.0, u)
    if observer is not None:
        observer(0.0, u)
    for n in range(1, config.n_steps + 1):
        u = st.step(u)
        if not np.all(np.isfinite(u)):
            raise DivergenceError(
                f"non-finite state at step {n}", step=n, last_snapshot=traj.snapshots[-1]
            )
        if n % config.record_every == 0 or n == config.n_steps:
            t = n * config.dt
            traj.append(t, u)
            if observer is not None:
                observer(t, u)
    return traj


def uniqueness_probe(u0: Field, eta0: float, config: SolverConfig,
                     pot: PotentialSpec = PotentialSpec(), noise=None, seed: int = 0,
                     margin: float = 0.1) -> dict:
    """Evolve u0 and u0 + eta0 w (w random, unit L^2 norm) with the same potential.

    Reports D(t) = int |v1 - v2|^2 e^{-2X} with v = e^{X} u (X = 0 without noise)
    against the growth envelope D(0) exp(8 |lam| t).
    """
    if eta0 < 0:
        raise ParameterError("perturbation size must be >= 0")
    spec = u0.spec
    if noise is None and pot.noise is not None:
        noise = pot.noise
    rng = np.random.Generator(np.random.Philox(int(seed)))
    w = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    w = grid.multiply(spec, w, np.exp(-0.5 * spec.k2() * (4 * spec.h) ** 2))
    w /= np.sqrt(np.sum(np.abs(w) ** 2) * spec.cell)
    t1 = solve(u0, config, pot)
    t2 = solve(Field(spec, u0.values + eta0 * w), config, pot)
    if noise is not None:
        ep, em2 = noise.expX_plus.values, noise.expX_minus.values ** 2
    else:
        ep, em2 = 1.0, 1.0
    D = np.array([
        np.sum(np.abs(ep * (a.values - b.values)) ** 2 * em2) * spec.cell
        for a, b in zip(t1.snapshots, t2.snapshots)
    ])
    times = np.array(t1.times)
    bound = D[0] * np.exp(8 * abs(config.lam) * times)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, D / bound, 0.0)
    return {
        "times": times,
        "D": D,
        "bound": bound,
        "max_ratio": float(np.max(ratio)),
        "exceeded": bool(np.any(D > (1 + margin) * bound)),
    }


def star_study(n_pairs: int, seed: int, chunk: int = 200_000) -> dict:
    """Check the (z, z') inequality on random pairs.

    Half the pairs have independent log-uniform moduli in [1e-8, 1e4] and
    uniform phases; the other half are close pairs z' = z (1 + s w) with
    small complex w, where the inequality is tightest.
    """
    rng = np.random.Generator(np.random.Philox(int(seed)))
    violations = 0
    worst = 0.0
    done = 0
    while done < n_pairs:
        m = min(chunk, n_pairs - done)
        half = m // 2
        r = 10.0 ** rng.uniform(-8, 4, size=(2, half))
        ph = rng.uniform(0, 2 * np.pi, size=(2, half))
        z1, z1p = r * np.exp(1j * ph)
        z2 = 10.0 ** rng.uniform(-8, 4, m - half) * np.exp(1j * rng.uniform(0, 2 * np.pi, m - half))
        s = 10.0 ** rng.uniform(-6, 0, m - half)
        w = rng.standard_normal(m - half) + 1j * rng.standard_normal(m - half)
        z2p = z2 * (1 + s * w)
        z = np.concatenate([z1, z2])
        zp = np.concatenate([z1p, z2p])
        lhs, rhs = star_sides(z, zp)
        violations += int(np.count_nonzero(lhs > rhs * (1 + 1e-12)))
        pos = rhs > 0
        if np.any(pos):
            worst = max(worst, float(np.max(lhs[pos] / rhs[pos])))
        done += m
    return {"pairs": int(n_pairs), "violations": violations, "max_ratio": worst}

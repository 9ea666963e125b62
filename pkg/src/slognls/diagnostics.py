"""Conserved and monitored functionals, and the limit studies built on them.

All integrals are lattice Riemann sums. Kinetic terms of the u-variable
energies use the spectral sum ``L^-d sum |k|^2 |u_hat|^2``, which is exactly
the quadratic form of the Laplacian used by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import besov, grid
from .errors import ParameterError
from .grid import Field, GridSpec
from .noise import MollifierSpec, NoiseRealization, coupled_noise
from .renorm import EnhancedNoise, KernelSpec, enhance, linear_fit
from .solver import PotentialSpec, SolverConfig, Trajectory, solve


@dataclass(frozen=True)
class ObservableSeries:
    name: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ParameterError(f"{self.name}: times and values must be 1-D of equal length")
        if np.any(np.diff(t) <= 0):
            raise ParameterError(f"{self.name}: times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ParameterError(f"{self.name}: non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def relative_drift(self) -> float:
        """max_t |f(t) - f(0)| / |f(0)|."""
        ref = abs(self.values[0])
        dev = float(np.max(np.abs(self.values - self.values[0])))
        return dev / ref if ref > 0 else dev


def _vals(u):
    return u.values if isinstance(u, Field) else np.asarray(u)


def _spec(u, spec):
    if isinstance(u, Field):
        return u.spec
    if spec is None:
        raise ParameterError("a GridSpec is needed for raw arrays")
    return spec


def _xlogx(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=float)
    nz = s > 0
    out[nz] = s[nz] * np.log(s[nz])
    return out


def _kinetic(spec: GridSpec, a: np.ndarray) -> float:
    ah = grid.forward(spec, a)
    return float(np.sum(spec.k2() * np.abs(ah) ** 2) / spec.volume)


# -- masses -------------------------------------------------------------------


def mass(u, spec: GridSpec | None = None) -> float:
    s = _spec(u, spec)
    return grid.integrate(s, np.abs(_vals(u)) ** 2)


def weighted_mass(u, mu: float, spec: GridSpec | None = None) -> float:
    """int <x>^(2 mu) |u|^2, the squared L^2_mu norm."""
    s = _spec(u, spec)
    return grid.integrate(s, (1.0 + s.radius2()) ** mu * np.abs(_vals(u)) ** 2)


def modified_mass(v, en: EnhancedNoise) -> float:
    """int |v|^2 e^{-2X}."""
    a = _vals(v)
    if a.shape != en.spec.shape:
        raise ParameterError("field and noise live on different grids")
    return grid.integrate(en.spec, np.abs(a * en.expX_minus.values) ** 2)


# -- energies -----------------------------------------------------------------


def energy_deterministic(u, V, delta: float, lam: float, spec: GridSpec | None = None) -> float:
    """int |grad u|^2 - int V |u|^2 - lam int (delta + |u|^2) log(delta + |u|^2)."""
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    s = _spec(u, spec)
    a = np.asarray(_vals(u), dtype=complex)
    a2 = np.abs(a) ** 2
    Vv = np.asarray(_vals(V), dtype=float) if V is not None else 0.0
    return (_kinetic(s, a) - grid.integrate(s, Vv * a2)
            - lam * grid.integrate(s, _xlogx(delta + a2)))


def energy_1d(u, xi_eps, lam: float, spec: GridSpec | None = None) -> float:
    """int |u'|^2 - lam int |u|^2 log |u|^2 - int |u|^2 xi_eps (d = 1)."""
    s = _spec(u, spec)
    if s.d != 1:
        raise ParameterError("energy_1d is defined for d = 1")
    return energy_deterministic(u, xi_eps, 0.0, lam, s)


def modified_energy(v, en: EnhancedNoise, lam: float, c: float | None = None) -> float:
    """Energy of the transformed unknown v = e^X u.

    int |grad v|^2 e^{-2X} - int |v|^2 (|grad X|^2 - c - corr) e^{-2X}
    - lam int |v|^2 log|v|^2 e^{-2X} + 2 lam int |v|^2 X e^{-2X}

    ``c`` defaults to ``en.c_eps``; pass 0 for the unrenormalized 1-D equation.
    """
    spec = en.spec
    a = np.asarray(_vals(v), dtype=complex)
    if a.shape != spec.shape:
        raise ParameterError("field and noise live on different grids")
    c = en.c_eps if c is None else c
    w = en.expX_minus.values ** 2
    a2 = np.abs(a) ** 2
    grads = grid.gradient(Field(spec, a))
    kin = sum(np.abs(g.values) ** 2 for g in grads)
    gx2 = sum(g.values**2 for g in en.gradX_eps)
    pot = gx2 - c - en.correction.values
    X = en.X_eps.values
    return grid.integrate(spec, (kin - a2 * pot - lam * _xlogx(a2) + 2 * lam * a2 * X) * w)


# -- trackers -----------------------------------------------------------------


def series(name: str, traj: Trajectory, fn) -> ObservableSeries:
    return ObservableSeries(name, np.array(traj.times), np.array([fn(s) for s in traj.snapshots]))


def norm_label(space: str, alpha: float, mu: float, which: str) -> str:
    return f"{space}{alpha:g}_{mu:g}({which})"


def norm_tracker(traj: Trajectory, norms, en: EnhancedNoise | None = None) -> dict:
    """Weighted norms of u(t) and, when noise is given, of v(t) = e^X u(t).

    ``norms`` is a list of ``(space, alpha, mu)`` with space ``"H"`` (weighted
    Sobolev) or ``"B"`` (Besov B^alpha_{2,2,mu}).
    """
    out = {}
    for space, alpha, mu in norms:
        if space not in ("H", "B"):
            raise ParameterError(f"unknown norm space {space!r}")

        def ev(a, spec=traj.spec, space=space, alpha=alpha, mu=mu):
            if space == "H":
                return besov.sobolev_array(spec, a, alpha, mu)
            return besov.besov_array(spec, a, alpha, 2.0, 2.0, mu)

        lab = norm_label(space, alpha, mu, "u")
        out[lab] = series(lab, traj, lambda f, ev=ev: ev(f.values))
        if en is not None:
            lab = norm_label(space, alpha, mu, "v")
            ep = en.expX_plus.values
            out[lab] = series(lab, traj, lambda f, ev=ev: ev(f.values * ep))
    return out


# -- drift under refinement ---------------------------------------------------


def fit_order(steps, values) -> float:
    """Slope of log(values) against log(steps)."""
    v = np.asarray(values, float)
    if np.any(v <= 0):
        return float("nan")
    return linear_fit(np.log(np.asarray(steps, float)), np.log(v))[0]


def energy_drift_study(u0: Field, base: SolverConfig, dts, pot: PotentialSpec, functional) -> dict:
    """Relative drift of ``functional(u_array)`` along runs at each dt.

    Returns the drifts and the fitted order of drift in dt.
    """
    drifts = []
    for dt in dts:
        cfg = SolverConfig(base.lam, base.delta, dt, base.T, base.scheme,
                           max(1, int(round(base.T / dt / 20))))
        vals = []
        solve(u0, cfg, pot, observer=lambda t, u: vals.append(functional(u)))
        vals = np.asarray(vals)
        drifts.append(float(np.max(np.abs(vals - vals[0])) / abs(vals[0])))
    return {"dt": list(map(float, dts)), "drift": drifts, "order": fit_order(dts, drifts)}


def self_convergence(u0: Field, base: SolverConfig, dts, dt_ref: float,
                     pot: PotentialSpec = PotentialSpec()) -> dict:
    """L^2 errors at time T against a fine-dt reference, with fitted order."""
    def final(dt):
        cfg = SolverConfig(base.lam, base.delta, dt, base.T, base.scheme,
                           max(1, int(round(base.T / dt))))
        return solve(u0, cfg, pot).final().values
    ref = final(dt_ref)
    errs = [float(np.sqrt(mass(final(dt) - ref, u0.spec))) for dt in dts]
    return {"dt": list(map(float, dts)), "error": errs, "order": fit_order(dts, errs)}


# -- limit studies ------------------------------------------------------------


def _pairs_report(params, dists, extra=None) -> dict:
    pairs = [(float(a), float(b)) for a, b in zip(params[:-1], params[1:])]
    dists = [float(d) for d in dists]
    second = [b for _, b in pairs]
    rep = {
        "pairs": pairs,
        "distance": dists,
        "monotone": bool(all(d1 > d2 for d1, d2 in zip(dists[:-1], dists[1:]))),
        "order": fit_order(second, dists),
    }
    if extra:
        rep.update(extra)
    return rep


def delta_study(deltas, u0: Field, config: SolverConfig, pot: PotentialSpec = PotentialSpec()) -> dict:
    """sup_t ||u^d1 - u^d2||_{L^2} for consecutive deltas (largest first).

    The fitted order is empirical; no rate is known for this limit.
    """
    deltas = sorted(map(float, deltas), reverse=True)
    if len(deltas) < 3:
        raise ParameterError("a delta study needs at least 3 delta values")
    if deltas[-1] <= 0:
        raise ParameterError("delta values must be > 0")
    runs = []
    for d in deltas:
        cfg = SolverConfig(config.lam, d, config.dt, config.T, config.scheme, config.record_every)
        runs.append(solve(u0, cfg, pot).snapshots)
    spec = u0.spec
    dists = [max(np.sqrt(mass(a.values - b.values, spec)) for a, b in zip(r1, r2))
             for r1, r2 in zip(runs[:-1], runs[1:])]
    return _pairs_report(deltas, dists, {"empirical": True})


def cauchy_eps_study(eps, master: NoiseRealization, spec: GridSpec, v0: Field, config: SolverConfig,
                     mu: float = 0.2, gamma: float = 0.5, gamma_prime: float = 1.0,
                     family: str = "gaussian", kernel: KernelSpec = KernelSpec()) -> dict:
    """Coupled renormalized runs across eps with common master noise and common v0.

    For each eps: u0 = e^{-X_eps} v0, solve with potential xi_eps - c_eps
    (d = 2) or xi_eps (d = 1), v_eps(t) = e^{X_eps} u(t). Consecutive pairs
    report sup_t ||v_e1 - v_e2||_{L^2_{-mu}} and, at the final time, the
    H^gamma_mu distance with its interpolation bound
    ``||d||_{L^2_mu}^(1 - gamma/gamma') ||d||_{H^gamma'_mu}^(gamma/gamma')``.
    """
    eps = sorted(map(float, eps), reverse=True)
    if len(eps) < 3:
        raise ParameterError("an eps study needs at least 3 eps values")
    if not 0 < gamma < gamma_prime:
        raise ParameterError("need 0 < gamma < gamma_prime")
    xi = coupled_noise(master, spec).xi if master.spec != spec else master.xi
    kind = "renormalized2d" if spec.d == 2 else "noise1d"
    runs = []
    for e in eps:
        en = enhance(xi, MollifierSpec(family, e), kernel)
        u0 = Field(spec, v0.values * en.expX_minus.values)
        traj = solve(u0, config, PotentialSpec(kind, noise=en))
        ep = en.expX_plus.values
        runs.append([s.values * ep for s in traj.snapshots])
    w = (1.0 + spec.radius2()) ** (-mu / 2)
    dists, hg, interp = [], [], []
    for r1, r2 in zip(runs[:-1], runs[1:]):
        dists.append(max(np.sqrt(grid.integrate(spec, np.abs(w * (a - b)) ** 2))
                         for a, b in zip(r1, r2)))
        d = r1[-1] - r2[-1]
        th = gamma / gamma_prime
        hg.append(besov.sobolev_array(spec, d, gamma, mu))
        interp.append(besov.sobolev_array(spec, d, 0.0, mu) ** (1 - th)
                      * besov.sobolev_array(spec, d, gamma_prime, mu) ** th)
    return _pairs_report(eps, dists, {"h_gamma": hg, "interpolation_bound": interp,
                                      "gamma": gamma, "gamma_prime": gamma_prime, "mu": mu})


def cauchy_eps_ensemble(eps, spec: GridSpec, v0: Field, config: SolverConfig, master_seed: int,
                        members: int = 1, **kw) -> dict:
    """cauchy_eps_study on ``members`` independent realizations, each coupled across eps.

    Reports the per-member studies and the member-averaged distances with
    their monotonicity and fitted order.
    """
    from .noise import derive_seeds, sample_white_noise

    if members < 1:
        raise ParameterError("members must be >= 1")
    studies = []
    for s in derive_seeds(master_seed, members):
        studies.append(cauchy_eps_study(eps, sample_white_noise(spec, s), spec, v0, config, **kw))
    mean = np.mean([st["distance"] for st in studies], axis=0)
    eps_sorted = sorted(map(float, eps), reverse=True)
    rep = _pairs_report(eps_sorted, mean)
    rep["members"] = studies
    return rep

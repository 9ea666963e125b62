"""Command-line entry point: ``slognls <subcommand> --config cfg.json [--out DIR] [--seed S] [--threads N]``.

Exit codes: 0 ok, 2 configuration/parameter error, 3 divergence, 4 statistical power.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import besov, config as cfgmod, diagnostics as diag, grid, noise, renorm, solver
from .errors import ConfigError, DivergenceError, ParameterError, StatisticalPowerError
from .grid import Field, GridSpec
from .manifest import RunManifest

OUT_ENV = "SLOGNLS_OUT"
SUBCOMMANDS = ("simulate", "renorm", "noise-stats", "validate-inequalities", "converge", "plot-data")
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_STATS = 0, 2, 3, 4


class Run:
    """Output directory bookkeeping for one invocation."""

    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, *paths) -> None:
        for p in paths:
            self.manifest.add(self.out, Path(p))

    def write_csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(r[h]) for h in header])
        self.register(p)
        return p

    def write_json(self, name: str, data) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.register(p)
        return p

    def dump(self, name: str, f: Field, description: str, seed=None) -> None:
        self.register(*grid.save_field(self.path(name), f, description, seed))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


# -- builders -----------------------------------------------------------------


def _spec(cfg) -> GridSpec:
    return GridSpec(cfg.grid.d, cfg.grid.N, cfg.grid.L)


def _solver_cfg(cfg, T=None) -> solver.SolverConfig:
    s = cfg.solver
    return solver.SolverConfig(s.lam, s.delta, s.dt, s.T if T is None else T, s.scheme, s.record_every)


def _initial(cfg, spec: GridSpec) -> np.ndarray:
    ic = cfg.initial
    x = spec.coords()
    r2 = sum((c - x0) ** 2 for c, x0 in zip(x, ic.center))
    phase = sum(p * c for p, c in zip(ic.momentum, x))
    return ic.amplitude * np.exp(-r2 / (2 * ic.width**2) + 1j * phase) * np.ones(spec.shape)


def _mollifier(cfg) -> noise.MollifierSpec:
    return noise.MollifierSpec(cfg.noise.mollifier, cfg.noise.eps)


def _kernel(cfg) -> renorm.KernelSpec:
    return renorm.KernelSpec(cfg.noise.mode, cfg.noise.radius)


def _problem(cfg, spec: GridSpec, seed: int, run: Run):
    """(u0, potential, enhanced noise, c used by the modified energy)."""
    v0 = _initial(cfg, spec)
    if cfg.noise.enabled:
        xi = noise.sample_white_noise(spec, seed).xi
        en = renorm.enhance(xi, _mollifier(cfg), _kernel(cfg))
        kind = "renormalized2d" if spec.d == 2 else "noise1d"
        pot = solver.PotentialSpec(kind, noise=en)
        u0 = v0 * en.expX_minus.values if cfg.initial.variable == "v" else v0
        c = en.c_eps if spec.d == 2 else 0.0
        run.manifest.derived_seeds["noise"] = seed
        return Field(spec, u0), pot, en, c
    p = cfg.potential
    en = renorm.zero_noise(spec)
    if p.kind == "none":
        return Field(spec, v0), solver.PotentialSpec(), en, 0.0
    if p.kind == "harmonic":
        V = p.strength * spec.radius2()
    else:
        V = p.strength * np.exp(-spec.radius2())
    return Field(spec, v0), solver.PotentialSpec("deterministic", V=V, n=p.truncation), en, 0.0


# -- subcommands --------------------------------------------------------------


def cmd_simulate(cfg, seed: int, run: Run) -> dict:
    spec = _spec(cfg)
    u0, pot, en, c = _problem(cfg, spec, seed, run)
    sc = _solver_cfg(cfg)
    W = pot.field(spec)
    lam, delta = sc.lam, sc.delta
    norms = [tuple(n) for n in cfg.diagnostics.norms]
    labels = []
    for space, a, mu in norms:
        labels.append(diag.norm_label(space, a, mu, "u"))
        if cfg.noise.enabled:
            labels.append(diag.norm_label(space, a, mu, "v"))
    ep = en.expX_plus.values
    rows = []
    snaps = []

    def observe(t, u):
        v = u * ep
        row = {
            "t": t,
            "mass": diag.mass(u, spec),
            "energy": diag.energy_deterministic(u, W, delta, lam, spec),
            "modified_mass": diag.modified_mass(v, en),
            "modified_energy": diag.modified_energy(v, en, lam, c),
        }
        for space, a, mu in norms:
            f = besov.sobolev_array if space == "H" else (
                lambda s, arr, al, m: besov.besov_array(s, arr, al, 2.0, 2.0, m))
            row[diag.norm_label(space, a, mu, "u")] = f(spec, u, a, mu)
            if cfg.noise.enabled:
                row[diag.norm_label(space, a, mu, "v")] = f(spec, v, a, mu)
        rows.append(row)
        if cfg.diagnostics.dump_snapshots or t == 0.0:
            snaps.append((t, u.copy()))

    traj = solver.solve(u0, sc, pot, observer=observe)
    if not cfg.diagnostics.dump_snapshots and sc.n_steps > 0:
        snaps.append((traj.times[-1], traj.final().values))
    header = ["t", "mass", "energy", "modified_mass", "modified_energy", *labels]
    run.write_csv("observables.csv", header, rows)
    for i, (t, u) in enumerate(snaps):
        run.dump(f"snapshots/u_{i:05d}.c128", Field(spec, u), f"u at t={t!r}", seed)
    m = np.array([r["mass"] for r in rows])
    return {"steps": sc.n_steps, "snapshots": len(snaps),
            "mass_drift": float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else 0.0}


def cmd_renorm(cfg, seed: int, run: Run) -> dict:
    spec = _spec(cfg)
    xi = noise.sample_white_noise(spec, seed).xi
    run.manifest.derived_seeds["noise"] = seed
    k = _kernel(cfg)
    out = {"mode": k.mode, "mollifier": cfg.noise.mollifier, "levels": []}
    for i, e in enumerate(cfg.renorm.eps):
        en = renorm.enhance(xi, noise.MollifierSpec(cfg.noise.mollifier, e), k)
        base = f"renorm/eps_{i:02d}"
        run.dump(f"{base}/xi_eps.c128", en.xi_eps, f"mollified noise, eps={e!r}", seed)
        run.dump(f"{base}/X_eps.c128", en.X_eps, f"X_eps, eps={e!r}", seed)
        for j, g in enumerate(en.gradX_eps):
            run.dump(f"{base}/gradX_{j}.c128", g, f"d_{j} X_eps, eps={e!r}", seed)
        run.dump(f"{base}/wick.c128", en.wick, f"|grad X_eps|^2 - c_eps, eps={e!r}", seed)
        run.dump(f"{base}/correction.c128", en.correction, f"Delta X - xi_eps, eps={e!r}", seed)
        run.dump(f"{base}/expX_plus.c128", en.expX_plus, f"exp(X_eps), eps={e!r}", seed)
        run.dump(f"{base}/expX_minus.c128", en.expX_minus, f"exp(-X_eps), eps={e!r}", seed)
        out["levels"].append({"eps": e, "c_eps": en.c_eps, "c_eps_repr": repr(en.c_eps), "dir": base})
    if cfg.renorm.bounds:
        R = cfg.renorm
        params = renorm.BoundSuiteParams(
            eps=tuple(R.bound_eps), members=R.bound_members, seed=seed, alpha=R.alpha,
            mu=R.bound_mu, p=R.p, mollifier=cfg.noise.mollifier, mode=k.mode,
        )
        res = renorm.stochastic_bound_suite(spec, params)
        run.manifest.derived_seeds["bound_members"] = noise.derive_seeds(seed, R.bound_members)
        run.write_csv("bounds.csv", ["statistic", "eps", "q10", "median", "q90", "members"], res["rows"])
        run.write_json("bounds_fits.json", res["fits"])
        out["bound_fits"] = res["fits"]
    run.write_json("renorm.json", out)
    return {"levels": len(out["levels"]), "c_eps": [lv["c_eps"] for lv in out["levels"]]}


def cmd_noise_stats(cfg, seed: int, run: Run) -> dict:
    spec = _spec(cfg)
    S = cfg.noise_stats
    rows = noise.noise_stats_rows(spec, S.n_samples, seed, S.alpha, S.mu, tuple(S.resolutions))
    run.manifest.derived_seeds["members"] = f"SeedSequence({seed}).spawn({S.n_samples})"
    run.write_csv("noise_stats.csv", ["n_samples", "statistic", "value", "stderr"], rows)
    return {"rows": len(rows)}


def cmd_validate(cfg, seed: int, run: Run) -> dict:
    V = cfg.validate_
    d, L = cfg.grid.d, cfg.grid.L
    star = solver.star_study(V.star_pairs, seed)
    rows = []
    maxima = {}
    for N in V.resolutions:
        res = besov.inequality_corpus(GridSpec(d, int(N), L), V.corpus, V.band, seed)
        maxima[int(N)] = res
        for kind, r in res.items():
            rows.append({"lemma": kind, "params": json.dumps(r["params"], sort_keys=True),
                         "N": int(N), "cases": V.corpus, "max_ratio": r["max"],
                         "mean_ratio": r["mean"]})
    spec = GridSpec(d, int(V.resolutions[0]), L)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    u = Field(spec, besov.band_limited(spec, rng, V.band))
    cs = besov.validate_inequality("duality", (u, Field(spec, np.conj(u.values))),
                                   {"alpha": 0.0, "p": 2.0, "q": 2.0, "mu": 0.0})
    th0 = besov.validate_inequality("interpolation", (u,), {
        "theta": 0.0, "alpha0": 0.5, "p0": 2.0, "q0": 2.0, "mu0": 0.1,
        "alpha1": 1.5, "p1": 2.0, "q1": 2.0, "mu1": 0.3})
    stability = {}
    if len(V.resolutions) > 1:
        a, b = maxima[int(V.resolutions[0])], maxima[int(V.resolutions[-1])]
        stability = {k: (b[k]["max"] / a[k]["max"] if a[k]["max"] > 0 else float("nan")) for k in a}
    summary = {"star": star, "equality_cases": {"cauchy_schwarz": cs["ratio"], "theta_endpoint": th0["ratio"]},
               "max_ratio": {str(k): {kk: vv["max"] for kk, vv in v.items()} for k, v in maxima.items()}, "refinement_ratio": stability}
    run.write_csv("inequalities.csv", ["lemma", "params", "N", "cases", "max_ratio", "mean_ratio"], rows)
    run.write_json("inequalities.json", summary)
    return {"star_violations": star["violations"]}


def cmd_converge(cfg, seed: int, run: Run) -> dict:
    spec = _spec(cfg)
    C = cfg.converge
    sc = _solver_cfg(cfg, T=C.T)
    if C.study == "eps":
        v0 = Field(spec, _initial(cfg, spec))
        rep = diag.cauchy_eps_ensemble(
            C.values, spec, v0, sc, seed, C.ensemble, mu=cfg.diagnostics.mu, gamma=C.gamma,
            gamma_prime=C.gamma_prime, family=cfg.noise.mollifier, kernel=_kernel(cfg))
        run.manifest.derived_seeds["members"] = noise.derive_seeds(seed, C.ensemble)
    else:
        u0, pot, _, _ = _problem(cfg, spec, seed, run)
        rep = diag.delta_study(C.values, u0, sc, pot)
    rows = [{"pair": f"{a!r}:{b!r}", "T": C.T, "distance": dist, "fitted_order": rep["order"]}
            for (a, b), dist in zip(rep["pairs"], rep["distance"])]
    run.write_csv("converge.csv", ["pair", "T", "distance", "fitted_order"], rows)
    run.write_json("converge.json", {"study": C.study, **rep})
    return {"order": rep["order"], "monotone": rep["monotone"]}


def plot_columns(src: Path, dst: Path, columns=None) -> None:
    """CSV -> whitespace-separated columns with a commented header (gnuplot ``using``)."""
    with open(src, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = list(rd)
    cols = list(columns) if columns else header
    missing = [c for c in cols if c not in header]
    if missing:
        raise ParameterError(f"plot.columns not in {src.name}: {missing}")
    idx = [header.index(c) for c in cols]
    lines = ["# " + " ".join(cols)]
    for r in rows:
        lines.append(" ".join(f"{float(r[i]):.10e}" for i in idx))
    dst.write_text("\n".join(lines) + "\n")


def cmd_plot(cfg, seed: int, run: Run) -> dict:
    src = Path(cfg.plot.input)
    if not src.is_absolute() and not src.exists():
        src = run.out / cfg.plot.input
    if not src.exists():
        raise ParameterError(f"plot.input not found: {cfg.plot.input}")
    dst = run.path(cfg.plot.output)
    plot_columns(src, dst, cfg.plot.columns)
    run.register(dst)
    return {"output": str(dst)}


COMMANDS = {
    "simulate": cmd_simulate,
    "renorm": cmd_renorm,
    "noise-stats": cmd_noise_stats,
    "validate-inequalities": cmd_validate,
    "converge": cmd_converge,
    "plot-data": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slognls", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON config (omit for all defaults)")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./slognls-out)")
    ap.add_argument("--seed", type=int, help="master seed, overrides the config")
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    return ap


def run(subcommand: str, cfg, out: Path, threads: int = 1) -> dict:
    """Execute one subcommand and write its manifest last. Raises library errors."""
    grid.set_threads(threads)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed
    man = RunManifest(subcommand, cfgmod.to_dict(cfg), seed, threads, noise.RNG_NAME)
    r = Run(out, man)
    t0 = time.perf_counter()
    summary = COMMANDS[subcommand](cfg, seed, r)
    man.wall_clock_s = time.perf_counter() - t0
    man.write(out)
    return summary


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.parse_config(args.config) if args.config else cfgmod.resolve({})
        if args.seed is not None:
            data = cfgmod.to_dict(cfg)
            data["seed"] = args.seed
            cfg = cfgmod.resolve(data)
        out = Path(args.out or os.environ.get(OUT_ENV) or "slognls-out")
        summary = run(args.subcommand, cfg, out, args.threads)
    except DivergenceError as exc:
        print(f"slognls: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except StatisticalPowerError as exc:
        print(f"slognls: insufficient statistics: {exc} (required: {exc.required})", file=sys.stderr)
        return EXIT_STATS
    except (ConfigError, ParameterError) as exc:
        print(f"slognls: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"subcommand": args.subcommand, "out": str(out), **summary}, default=_jsonable))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

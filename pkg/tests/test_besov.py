"""Littlewood-Paley blocks, weighted norms and the inequality validators."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from slognls import besov
from slognls.besov import BesovParams
from slognls.errors import ParameterError
from slognls.grid import Field, GridSpec

# max lhs/rhs of the log validator (m=1, eta=0.3, mu=0, mu0=1/2) over the
# 100 Gaussian bumps of _gauss_corpus, computed once and frozen
LOG_CORPUS_C = 2.1519658878664356

# H^alpha / B^alpha_{2,2} ratio range over 100 band-limited fields (L = 2 pi, N = 64, band 6)
SOBOLEV_BESOV_ENVELOPE = {
    0.5: (0.8154939515240038, 0.8636784352665463),
    1.0: (0.5578140871798762, 0.5858122266996074),
    1.5: (0.36519768755966986, 0.3876480017320733),
}


def _psi(n, r, n_max):
    """Block profile psi_n at r = |k| / k0, written out from the cutoff formula."""
    def phi(s):
        if s <= 0.5:
            return 1.0
        if s >= 1.0:
            return 0.0
        return np.cos(0.5 * np.pi * (np.log2(s) + 1.0)) ** 2
    if n == 0:
        return phi(r)
    if n == n_max:
        return 1.0 - phi(r / 2 ** (n_max - 1))
    return phi(r / 2**n) - phi(r / 2 ** (n - 1))


def _band(spec, seed, band=6):
    rng = np.random.Generator(np.random.Philox(seed))
    env = np.exp(-spec.radius2() / 8)
    return besov.band_limited(spec, rng, band) * env


def _gauss_corpus(spec):
    x = spec.axis()
    rng = np.random.default_rng(2024)
    for _ in range(100):
        a, w = rng.uniform(0.1, 3), rng.uniform(0.5, 2)
        yield Field(spec, a * np.exp(-x**2 / (2 * w * w)) + 0j)


class TestDecomposition:
    def test_constant_in_block_zero(self):
        spec = GridSpec(2, 64, 8.0)
        dec = besov.lp_decompose(Field(spec, np.full(spec.shape, 2.0)))
        assert np.allclose(dec.blocks[0], 2.0, atol=1e-13)
        assert all(np.max(np.abs(b)) < 1e-13 for b in dec.blocks[1:])

    @pytest.mark.parametrize("j", [2, 3, 4])
    def test_single_mode_confined_to_neighbouring_blocks(self, j):
        spec = GridSpec(1, 128, 8.0)
        m = 2**j - 1
        u = np.exp(1j * m * spec.k_unit * spec.axis())
        dec = besov.lp_decompose(Field(spec, u))
        mass = np.array([np.sum(np.abs(b) ** 2) for b in dec.blocks])
        outside = [n for n in range(len(mass)) if abs(n - j) > 1]
        assert np.all(mass[outside] < 1e-20)
        assert mass[j - 1: j + 2].sum() > 0

    def test_partition_of_unity(self):
        for d, N in [(1, 128), (2, 64)]:
            spec = GridSpec(d, N, 8.0)
            rng = np.random.default_rng(0)
            u = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
            total = besov.lp_decompose(Field(spec, u)).total()
            assert np.max(np.abs(total - u)) < 1e-10


class TestBesovNorm:
    def test_zero_field(self):
        spec = GridSpec(2, 32, 4.0)
        assert besov.besov_norm(Field(spec, np.zeros(spec.shape)), BesovParams(1.0)) == 0.0

    def test_homogeneity(self):
        spec = GridSpec(2, 32, 4.0)
        u = _band(spec, 1, 4)
        bp = BesovParams(0.7, 3.0, 1.5, 0.2)
        a = besov.besov_norm(Field(spec, 3.7 * u), bp)
        assert np.isclose(a, 3.7 * besov.besov_norm(Field(spec, u), bp), rtol=1e-12)

    def test_single_mode_brute_force(self):
        spec = GridSpec(1, 128, 8.0)
        m = 11
        u = np.exp(1j * m * spec.k_unit * spec.axis())
        nm = besov.n_max(spec)
        l2 = np.sqrt(spec.L)
        brute = np.sqrt(sum((2.0**n * abs(_psi(n, m, nm)) * l2) ** 2 for n in range(nm + 1)))
        got = besov.besov_norm(Field(spec, u), BesovParams(1.0, 2.0, 2.0, 0.0))
        assert abs(got - brute) <= 1e-10 * brute

    def test_sup_variants(self):
        spec = GridSpec(1, 64, 8.0)
        u = _band(spec, 2, 5)
        dec = besov.lp_decompose(Field(spec, u))
        expect = max(2.0 ** (0.5 * n) * np.max(np.abs(b)) for n, b in enumerate(dec.blocks))
        assert np.isclose(besov.besov_norm(dec, BesovParams(0.5, np.inf, np.inf)), expect, rtol=1e-14)

    def test_rejects_p_below_one(self):
        with pytest.raises(ParameterError):
            BesovParams(1.0, p=0.5)


class TestSobolev:
    def test_l2_case(self):
        spec = GridSpec(2, 32, 4.0)
        u = _band(spec, 3, 4)
        l2 = np.sqrt(np.sum(np.abs(u) ** 2) * spec.cell)
        assert abs(besov.sobolev_norm(Field(spec, u), 0.0) - l2) <= 1e-12 * l2

    def test_single_mode(self):
        spec = GridSpec(2, 32, 4.0)
        x, y = spec.coords()
        k = spec.k_unit * np.array([3, 1])
        u = np.exp(1j * (k[0] * x + k[1] * y))
        expect = (1 + k @ k) ** 0.75 * spec.L
        assert np.isclose(besov.sobolev_norm(Field(spec, u), 1.5), expect, rtol=1e-12)

    def test_equivalent_to_besov_22(self):
        # blocks are measured in box units, so take L = 2 pi where k0 = 1
        spec = GridSpec(2, 64, 2 * np.pi)
        ratios = {a: [] for a in SOBOLEV_BESOV_ENVELOPE}
        for s in range(100):
            u = Field(spec, besov.band_limited(spec, np.random.Generator(np.random.Philox(s)), 6))
            for alpha in ratios:
                ratios[alpha].append(besov.sobolev_norm(u, alpha) / besov.besov_norm(u, BesovParams(alpha)))
        for alpha, (lo, hi) in SOBOLEV_BESOV_ENVELOPE.items():
            r = np.array(ratios[alpha])
            assert 0.25 <= r.min() and r.max() <= 4.0
            assert lo - 1e-9 <= r.min() and r.max() <= hi + 1e-9


class TestValidators:
    def _u(self, N=64, seed=0):
        spec = GridSpec(2, N, 16.0)
        return Field(spec, _band(spec, seed))

    def test_cauchy_schwarz_equality(self):
        u = self._u()
        v = Field(u.spec, np.conj(u.values))
        r = besov.validate_inequality("duality", (u, v), {"alpha": 0.0, "p": 2.0, "q": 2.0, "mu": 0.0})
        assert abs(r["ratio"] - 1) < 1e-10

    def test_theta_zero_endpoint(self):
        u = self._u()
        P = {"theta": 0.0, "alpha0": 0.5, "p0": 2.0, "q0": 2.0, "mu0": 0.1,
             "alpha1": 1.5, "p1": 2.0, "q1": 2.0, "mu1": 0.3}
        assert abs(besov.validate_inequality("interpolation", (u,), P)["ratio"] - 1) < 1e-10
        Pb = {**P, "p0": 3.0, "q0": 3.0, "p1": 3.0, "q1": 3.0}
        assert abs(besov.validate_inequality("interpolation", (u,), Pb)["ratio"] - 1) < 1e-10

    def test_interpolation_relation_violated(self):
        u = self._u()
        P = {"theta": 0.5, "alpha0": 0.0, "p0": 2.0, "q0": 2.0, "mu0": 0.0,
             "alpha1": 1.0, "p1": 2.0, "q1": 2.0, "mu1": 0.0, "alpha": 0.7}
        with pytest.raises(ParameterError, match="alpha = "):
            besov.validate_inequality("interpolation", (u,), P)

    def test_product_hypotheses(self):
        u = self._u()
        with pytest.raises(ParameterError, match="alpha1 \\+ alpha2 > 0"):
            besov.validate_inequality("product", (u, u), {"alpha1": -1.0, "alpha2": 0.5})
        with pytest.raises(ParameterError, match="mu = mu1 \\+ mu2"):
            besov.validate_inequality("product", (u, u), {"alpha1": 1.0, "alpha2": 1.0, "mu1": 0.1,
                                                          "mu2": 0.1, "mu": 0.5})

    def test_duality_conjugates(self):
        u = self._u()
        with pytest.raises(ParameterError, match="1/p \\+ 1/p' = 1"):
            besov.validate_inequality("duality", (u, u), {"p": 2.0, "p_prime": 3.0})

    def test_embedding_direction(self):
        u = self._u()
        with pytest.raises(ParameterError, match="p1 <= p2"):
            besov.validate_inequality("embedding", (u,), {"alpha": 1.0, "p1": 4.0, "q1": 2.0,
                                                         "mu1": 0.0, "p2": 2.0, "q2": 2.0, "mu2": 0.0})

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            besov.validate_inequality("holder", (self._u(),), {})

    def test_product_envelope_stable_under_refinement(self):
        P = {"alpha1": 1.0, "alpha2": 1.0, "kappa": 0.1, "p1": 2.0, "p2": 2.0}
        maxima = []
        for N in (64, 128):
            spec = GridSpec(1, N, 16.0)
            worst = 0.0
            for s in range(100):
                rng = np.random.Generator(np.random.Philox(key=[7, s]))
                env = np.exp(-spec.radius2() / 8)
                u = besov.band_limited(spec, rng, 6) * env
                v = besov.band_limited(spec, rng, 6) * env
                r = besov.validate_inequality("product", (Field(spec, u), Field(spec, v)), P)
                worst = max(worst, r["ratio"])
            maxima.append(worst)
        assert np.isfinite(maxima).all()
        assert 0.5 <= maxima[1] / maxima[0] <= 2.0


class TestLogLemma:
    def test_unit_modulus(self):
        spec = GridSpec(2, 32, 4.0)
        u = np.exp(1j * spec.radius2())
        assert abs(besov.validate_log_lemma(Field(spec, u), 1, 0.1, 0.1, 0.3)["lhs"]) < 1e-13

    def test_zero_field(self):
        spec = GridSpec(2, 32, 4.0)
        r = besov.validate_log_lemma(Field(spec, np.zeros(spec.shape, complex)), 2, 0.1, 0.1, 0.3)
        assert r["lhs"] == 0.0 and r["rhs"] == 0.0

    def test_eta_out_of_range_cites_bound(self):
        spec = GridSpec(1, 64, 8.0)
        u = Field(spec, np.exp(-spec.axis() ** 2) + 0j)
        with pytest.raises(ParameterError, match="2\\(mu0 - mu\\)/\\(d/2 \\+ mu0\\)"):
            besov.validate_log_lemma(u, 1, 0.9, 0.2, 0.5)

    def test_requires_mu_below_mu0(self):
        spec = GridSpec(1, 64, 8.0)
        with pytest.raises(ParameterError):
            besov.validate_log_lemma(Field(spec, np.ones(64, complex)), 1, 0.1, 0.5, 0.5)

    def test_gaussian_against_quadrature(self):
        spec = GridSpec(1, 256, 40.0)
        u = Field(spec, np.exp(-spec.axis() ** 2 / 2) + 0j)
        r = besov.validate_log_lemma(u, 1, 0.3, 0.0, 0.5)
        # |u|^2 |log |u|^2| = x^2 exp(-x^2)
        oracle = integrate.quad(lambda t: t * t * np.exp(-t * t), -np.inf, np.inf)[0]
        assert abs(r["lhs"] / oracle - 1) < 0.01
        assert r["lhs"] / r["rhs"] <= LOG_CORPUS_C

    def test_corpus_constant_frozen(self):
        spec = GridSpec(1, 256, 40.0)
        ratios = []
        for u in _gauss_corpus(spec):
            r = besov.validate_log_lemma(u, 1, 0.3, 0.0, 0.5)
            assert r["rhs_h1"] > 0
            ratios.append(r["lhs"] / r["rhs"])
        assert max(ratios) == pytest.approx(LOG_CORPUS_C, rel=1e-9)


class TestCorpus:
    def test_same_inputs_on_every_grid(self):
        a = besov.band_limited(GridSpec(1, 32, 4.0), np.random.Generator(np.random.Philox(3)), 5)
        b = besov.band_limited(GridSpec(1, 64, 4.0), np.random.Generator(np.random.Philox(3)), 5)
        assert np.allclose(a, b[::2], atol=1e-12)

    def test_report_fields(self):
        res = besov.inequality_corpus(GridSpec(2, 32, 16.0), 3, 4, 0)
        assert set(res) == {"duality", "interpolation", "product", "embedding", "log_lemma"}
        for v in res.values():
            assert 0 < v["mean"] <= v["max"] < np.inf


@st.composite
def _pairs(draw):
    seed = draw(st.integers(0, 2**31))
    p = draw(st.sampled_from([1.0, 2.0, 3.0, np.inf]))
    q = draw(st.sampled_from([1.0, 2.0, np.inf]))
    alpha = draw(st.floats(-1.0, 2.0))
    mu = draw(st.floats(-0.5, 0.5))
    return seed, BesovParams(alpha, p, q, mu)


@settings(max_examples=40, deadline=None)
@given(_pairs())
def test_triangle_inequality(args):
    seed, bp = args
    spec = GridSpec(1, 64, 8.0)
    u, v = _band(spec, seed, 8), _band(spec, seed + 1, 8)
    n = lambda a: besov.besov_norm(Field(spec, a), bp)
    assert n(u + v) <= n(u) + n(v) + 1e-9 * (n(u) + n(v))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 1.0), st.floats(0.0, 0.3))
def test_embedding_monotone(seed, gap, mu_gap):
    # 2^(a' n) <x>^mu' <= 2^(a n) <x>^mu termwise, so the envelope is exactly 1
    spec = GridSpec(2, 32, 8.0)
    u = Field(spec, _band(spec, seed, 4))
    hi = besov.besov_norm(u, BesovParams(1.0, 2.0, 2.0, 0.3))
    lo = besov.besov_norm(u, BesovParams(1.0 - gap, 2.0, 2.0, 0.3 - mu_gap))
    assert lo <= hi * (1 + 1e-12)

"""Acceptance criteria, each run at its stated tolerance.

Criteria 1 to 6 run the shipped presets through the command line exactly as a
user would; criterion 7 bundles the fast property checks under a one-minute
budget.  A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest
import scipy.linalg

from drivenchain.bessel import bessel_j, z01
from drivenchain.cli import main
from drivenchain.dynamics import IntegratorConfig, Method, evolve, evolve_oracle
from drivenchain.hamiltonian import ChainConfig, decompose, h_static, number_operator, omega_fastest
from drivenchain.lindblad import NoiseConfig
from drivenchain.observables import SweepCurve, init_single_excitation, local_minima, visibility

pytestmark = pytest.mark.acceptance


class Presets:
    """Runs each preset once per session and hands back its tables."""

    def __init__(self, root):
        self.root = root
        self.done = set()

    def run(self, name):
        if name not in self.done:
            assert main([name, "--out", str(self.root)]) == 0
            self.done.add(name)

    def table(self, stem):
        return np.genfromtxt(self.root / f"{stem}.csv", delimiter=",", names=True)

    def meta(self, stem):
        return json.loads((self.root / f"{stem}.meta").read_text())


@pytest.fixture(scope="session")
def presets(tmp_path_factory):
    return Presets(tmp_path_factory.mktemp("presets"))


def criterion(record_property, label):
    record_property("criterion", label)


def test_criterion_1_cdt_dips(presets, record_property):
    criterion(record_property, "1 CDT dip positions")
    presets.run("fig2_offres")
    t = presets.table("fig2_offres")
    assert t.size == 121
    z, p = t["eac_over_omega"], t["max_transfer"]
    minima = local_minima(p)
    for target in (2.405, 5.520):
        near = [k for k in minima if abs(z[k] - target) <= 0.05]
        assert near, f"no local minimum within 0.05 of {target}"
        assert min(p[k] for k in near) <= 0.05
    assert presets.meta("fig2_offres")["wall_time_s"] <= 600


def test_criterion_2_h2_irrelevant_off_resonance(presets, record_property):
    criterion(record_property, "2 H2 irrelevance off resonance")
    presets.run("fig2_offres")
    presets.run("fig2_noh2")
    full, bare = presets.table("fig2_offres"), presets.table("fig2_noh2")
    assert np.array_equal(full["eac_over_omega"], bare["eac_over_omega"])
    assert np.max(np.abs(full["max_transfer"] - bare["max_transfer"])) <= 0.02


def test_criterion_3_resonance_comb(presets, record_property):
    criterion(record_property, "3 Resonance comb")
    presets.run("fig3")
    t = presets.table("fig3")
    p, n = t["max_transfer"], t["two_omega0_over_omega"]
    on = np.abs(n - np.round(n)) <= 1e-9 * n
    peaks = [k for k in range(1, p.size - 1) if p[k] > p[k - 1] and p[k] > p[k + 1]]
    assert peaks and all(on[k] for k in peaks)
    assert np.max(p[~on]) <= 0.02
    assert np.max(p[on]) > 0.02
    assert presets.meta("fig3")["wall_time_s"] <= 1200


def test_criterion_4_dephasing_robustness(presets, record_property):
    criterion(record_property, "4 Dephasing robustness")
    presets.run("fig5")
    t = presets.table("fig5_gdeph_0.1")
    z, p = t["eac_over_omega"], t["max_transfer"]
    k = int(np.argmin(np.abs(z - z01())))
    assert any(abs(z[m] - z01()) <= 0.05 for m in local_minima(p))
    assert p[k] <= 0.5 * p.max()


def test_criterion_5_coherence_endpoint(presets, record_property):
    criterion(record_property, "5 Coherence endpoint and linearity")
    presets.run("fig6")
    t = presets.table("fig6")
    assert t["gamma_deph"][0] == 0
    assert abs(t["coherence_C"][0] - 0.5) <= 0.02
    order = np.argsort(t["gamma_deph"])[:10]
    r = np.corrcoef(t["visibility"][order], t["coherence_C"][order])[0, 1]
    assert r * r >= 0.95


@pytest.mark.slow
def test_criterion_6_long_chain(presets, record_property):
    criterion(record_property, "6 N=6 scaling run")
    presets.run("fig7")
    for rate in (0.0001, 0.0005, 0.001, 0.005):
        stem = f"fig7_gdiss_{rate!r}"
        t = presets.table(stem)
        z, p = t["eac_over_omega"], t["max_transfer"]
        at_zero = p[int(np.argmin(np.abs(z - z01())))]
        at_12 = p[int(np.argmin(np.abs(z - 1.2)))]
        assert at_zero <= at_12, stem
        assert presets.meta(stem)["wall_time_s"] <= 4 * 3600
    t = presets.table("fig7_gdiss_0.0001")
    z, p = t["eac_over_omega"], t["max_transfer"]
    k = int(np.argmin(np.abs(z - z01())))
    assert p[k] < 0.05
    lo = hi = k
    while lo > 0 and p[lo - 1] < 0.05:
        lo -= 1
    while hi < p.size - 1 and p[hi + 1] < 0.05:
        hi += 1
    assert hi - lo + 1 >= 3


FIG5_RATES = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1)


def _fig5_visibility(presets, rate):
    t = presets.table(f"fig5_gdeph_{rate!r}")
    return visibility(SweepCurve("eac_over_omega", t["eac_over_omega"], "max_transfer", t["max_transfer"]))


def test_dephasing_visibility_examples(presets):
    presets.run("fig5")
    assert _fig5_visibility(presets, 0.0) >= 0.95
    assert _fig5_visibility(presets, 0.1) < _fig5_visibility(presets, 0.001)


@pytest.mark.xfail(strict=True, reason="weak dephasing first raises the visibility slightly; see the decision ledger")
def test_visibility_strictly_decreases_along_rate_ladder(presets):
    presets.run("fig5")
    vis = [_fig5_visibility(presets, r) for r in FIG5_RATES]
    assert all(b < a for a, b in zip(vis, vis[1:])), vis


def test_coherence_ladder_examples(presets):
    presets.run("fig6")
    t = presets.table("fig6")
    order = np.argsort(t["gamma_deph"])
    c = t["coherence_C"][order]
    assert np.all(np.diff(c) <= 0)
    assert t["gamma_deph"][order][-1] == pytest.approx(0.1) and c[-1] <= 0.05


@pytest.mark.slow
def test_long_chain_rate_ordering(presets):
    presets.run("fig7")
    low, high = presets.table("fig7_gdiss_0.0001"), presets.table("fig7_gdiss_0.005")
    assert np.all(high["max_transfer"] <= low["max_transfer"])


SMALL_SWEEP = """
experiment = sweep-amplitude
[chain]
n_sites = 2
omega0 = 10
j = 0.01
[drive]
omega_drive = 5
[noise]
gamma_diss = 0.001
[integrator]
t_end = 5
[sweep]
grid = linspace(0, 0.6, 66)
[output]
name = determinism
"""


def _property_checks(tmp_path):
    chain = ChainConfig.homogeneous(3, 10, 0.01, 0.8, 1.3)
    n_op = number_operator(3)
    hz, h1, h2 = decompose(chain, 0.37)
    assert np.max(np.abs(hz @ n_op - n_op @ hz)) == 0
    assert np.max(np.abs(h1 @ n_op - n_op @ h1)) <= 1e-15
    assert np.linalg.norm(h2 @ n_op - n_op @ h2) > 0

    pair = ChainConfig.homogeneous(2, 10, 0.01, 1.2 * 0.3, 0.3)
    noise = NoiseConfig(0.01, 0.001)
    tr = evolve(init_single_excitation(2, 1), pair, noise, IntegratorConfig(t_end=60, store_states=True))
    for rho in tr.states:
        assert abs(np.trace(rho) - 1) <= 1e-9
        assert np.max(np.abs(rho - rho.conj().T)) <= 1e-9
        assert np.linalg.eigvalsh(rho).min() >= -1e-8

    static = ChainConfig.homogeneous(2, 10, 0.01)
    psi = np.array([0, 1, 0, 1]) / math.sqrt(2)
    rho = 0.5 * np.outer(psi, psi).astype(complex) + 0.125 * np.eye(4)
    u = scipy.linalg.expm(-1j * h_static(static) * 5.0)
    exact = u @ rho @ u.conj().T
    dts, errs = [], []
    for f in (0.1, 0.07, 0.05, 0.035, 0.025):
        icfg = IntegratorConfig(t_end=5.0, dt_max=f / omega_fastest(static), store_states=True)
        run = evolve(rho, static, NoiseConfig(), icfg)
        dts.append(run.metadata["dt"])
        errs.append(np.max(np.abs(run.states[-1] - exact)))
    assert abs(np.polyfit(np.log(dts), np.log(errs), 1)[0] - 4.0) <= 0.2

    diss = NoiseConfig(gamma_diss=0.001)
    start = init_single_excitation(2, 1)
    rk4 = evolve(start, pair, diss, IntegratorConfig(t_end=1000))
    oracle = evolve_oracle(start, pair, diss, 0.05 / omega_fastest(pair), 1000)
    assert np.max(np.abs(rk4.populations - oracle.populations)) <= 1e-6

    for x in (0.3, 2.404825557695773, 7.2, 31.0):
        for n in range(1, 30):
            lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
            assert abs(lhs - 2 * n / x * bessel_j(n, x)) <= 1e-8
        total = bessel_j(0, x) ** 2 + 2 * sum(bessel_j(n, x) ** 2 for n in range(1, 80))
        assert abs(total - 1) <= 1e-10

    qubit = ChainConfig(1, (10.0,), ())
    decay = evolve(np.diag([1.0, 0.0]).astype(complex), qubit, NoiseConfig(gamma_diss=0.05), IntegratorConfig(t_end=10))
    assert np.max(np.abs(decay.population(1) - np.exp(-0.1 * decay.times))) <= 1e-6

    cfg = tmp_path / "determinism.cfg"
    cfg.write_text(SMALL_SWEEP)
    assert main([str(cfg), "--workers", "1", "--out", str(tmp_path / "w1")]) == 0
    assert main([str(cfg), "--workers", "8", "--out", str(tmp_path / "w8")]) == 0
    one = (tmp_path / "w1" / "determinism.csv").read_bytes()
    assert one == (tmp_path / "w8" / "determinism.csv").read_bytes()


def test_criterion_7_property_suite(tmp_path, record_property):
    criterion(record_property, "7 Property suite under one minute")
    start = time.perf_counter()
    _property_checks(tmp_path)
    elapsed = time.perf_counter() - start
    record_property("seconds", round(elapsed, 1))
    assert elapsed < 60, f"property suite took {elapsed:.1f} s"

"""Exit criteria.  Each test records one PASS/FAIL line in the terminal summary."""
import itertools
import math
import time

import numpy as np
import pytest

from spade_sense import errata
from spade_sense.cli import main
from spade_sense.detection import count_covariance, inv_covariance, total_count, total_variance
from spade_sense.errors import DomainError
from spade_sense.montecarlo import run_trials
from spade_sense.optics import OpticsParams, a_coeff, a_coeff_numeric, choose_cutoff, g_coeffs
from spade_sense.sensitivity import baseline, rim_closed_form, rim_numeric, total, tpd
from spade_sense.source import SourceParams

UNIT = OpticsParams(kappa=1.0, omega=1.0)
GRID = list(errata.standard_grid())


def test_c01_mode_completeness(criterion):
    start = time.perf_counter()
    sums = {}
    for gamma in (0.1, 0.5, 1.0, 2.0):
        cutoff = choose_cutoff(gamma, 1e-13)
        sums[gamma] = math.fsum(g_coeffs(cutoff, gamma) ** 2)
    elapsed = time.perf_counter() - start
    ok = all(1 - 1e-12 <= s <= 1 for s in sums.values()) and elapsed < 1.0
    criterion("C01 mode completeness", ok, f"min sum {min(sums.values()):.15f}, {elapsed:.3f}s")
    assert ok


def test_c02_closed_form_vs_quadrature(criterion):
    start = time.perf_counter()
    worst = 0.0
    for m, gamma, r, theta in itertools.product(range(11), (0.1, 0.5, 1.5), (0.0, 0.5, 1.0), (0.0, math.pi / 2, math.pi)):
        d = 2 * gamma
        closed = a_coeff(m, d, UNIT, r, theta)
        if abs(closed) <= 1e-12:
            continue
        worst = max(worst, abs(closed - a_coeff_numeric(m, d, UNIT, r, theta)) / abs(closed))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 10.0
    criterion("C02 amplitude closed form vs quadrature", ok, f"max rel err {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_c03_total_count_errata(criterion):
    impl, printed = 0.0, 0.0
    for src, d in GRID:
        ref = errata.truncated_total(src, UNIT, d)
        impl = max(impl, errata.rel_dev(total_count(src, UNIT, d), ref))
        printed = max(printed, errata.rel_dev(errata.printed_total_count(src, UNIT, d), ref))
    ok = impl < 1e-12 and printed > 0.10
    criterion("C03 N_D vs truncated sum", ok, f"implemented {impl:.2e}, printed {printed:.2e}")
    assert ok


def test_c04_rim_oracle(criterion):
    impl, printed = 0.0, 0.0
    for src, d in GRID:
        ref = rim_numeric(src, UNIT, d)
        impl = max(impl, errata.rel_dev(rim_closed_form(src, UNIT, d), ref))
        s = math.cosh(2 * src.r) - math.exp(-d * d / 2) * src.eta
        printed = max(printed, errata.rel_dev(errata.printed_rim_normalized(src, UNIT, d) / s, ref))
    ok = impl < 1e-8 and printed > 0.01
    criterion("C04 RIM closed form vs mode sum", ok, f"cosh form {impl:.2e}, sinh form {printed:.2e}")
    assert ok


def test_c05_tpd_oracle(criterion):
    bad = []
    for src, d in GRID:
        ref = errata.tpd_finite_difference(src, UNIT, d)
        if not errata.close(tpd(src, UNIT, d), ref, 1e-7, 1e-12):
            bad.append((src, d))
    ok = not bad
    criterion("C05 TPD vs finite difference", ok, f"{len(GRID) - len(bad)}/{len(GRID)} points within 1e-7")
    assert ok


def test_c06_asymptote(criterion):
    devs = {}
    for r in (0.25, 0.5, 1.0):
        rep = total(SourceParams(n_s=0.9, r=r, theta=0.0, g2=1.0), UNIT, 2e-6)
        devs[r] = errata.rel_dev(rep.r_total, math.exp(2 * r))
    ok = max(devs.values()) < 1e-4
    criterion("C06 d->0 asymptote e^{2r}", ok, f"max rel dev {max(devs.values()):.2e}")
    assert ok


def test_c07_half_pi_flatness(criterion):
    spread, value_err = 0.0, 0.0
    for r in (0.1, 0.5, 1.0):
        vals = [total(SourceParams(n_s=0.9, r=r, theta=math.pi / 2), UNIT, 2 * g).r_total
                for g in np.linspace(0.01, 3.0, 300)]
        spread = max(spread, max(vals) - min(vals))
        value_err = max(value_err, max(abs(v - math.cosh(2 * r)) for v in vals))
    ok = spread < 1e-10 and value_err < 1e-12
    criterion("C07 theta=pi/2 flat at cosh 2r", ok, f"spread {spread:.1e}, |R - cosh 2r| {value_err:.1e}")
    assert ok


def test_c08_baselines(criterion):
    rs = np.linspace(0, 1, 101)
    ent = [baseline("entangled", r) for r in rs]
    ok = (
        baseline("incoherent") == 1.0
        and baseline("mutually_coherent", 0.5) == 0.0
        and baseline("mutually_coherent", 0.0) == 1.0
        and baseline("mutually_coherent", 1.0) == 1.0
        and all(abs(e - math.exp(2 * r)) < 1e-15 * e for e, r in zip(ent, rs))
        and all(e > 1 for e in ent[1:])
        and all(b > a for a, b in zip(ent, ent[1:]))
    )
    criterion("C08 baselines", ok)
    assert ok


G2_AXIS = np.round(np.linspace(0.0, 2.0, 201), 12)
C09_BLOCKED = (
    "at r=1, n_s*kappa=0.9, d/2omega=0.5 the model's total-count variance N_D[1+(g2-1)N_D] is negative "
    "for g2 < 0.289, so R_total is undefined there (see decisions ledger)"
)


@pytest.mark.parametrize(
    "r",
    [0.3, 0.5, 0.7, pytest.param(1.0, marks=pytest.mark.xfail(raises=DomainError, strict=True, reason=C09_BLOCKED))],
)
def test_c09_fig3a_monotone_in_g2(criterion, r):
    try:
        vals = [total(SourceParams(n_s=0.9, g2=g2, r=r, theta=0.0), UNIT, 1.0).r_total for g2 in G2_AXIS]
    except DomainError as exc:
        criterion(f"C09 R_total non-increasing in g2 on [0,2] (r={r})", False, f"undefined: {exc}")
        raise
    ok = bool(np.all(np.diff(vals) <= 0))
    criterion(f"C09 R_total non-increasing in g2 on [0,2] (r={r})", ok, f"{vals[0]:.4f} -> {vals[-1]:.4f}")
    assert ok


def test_c10_sherman_morrison(criterion):
    rng = np.random.default_rng(2024)
    worst, sum_err = 0.0, 0.0
    for cutoff, g2 in itertools.product((32, 64), (0.5, 1.0, 2.0)):
        means = rng.uniform(0.01, 1.0, cutoff + 1)
        means *= 0.9 / means.sum()
        lam = count_covariance(means, g2)
        worst = max(worst, np.abs(lam @ inv_covariance(means, g2) - np.eye(cutoff + 1)).max())
        n_d = math.fsum(means)
        sum_err = max(sum_err, errata.rel_dev(math.fsum(lam.ravel()), total_variance(n_d, g2)))
    ok = worst < 1e-10 and sum_err < 1e-12
    criterion("C10 Sherman-Morrison inverse", ok, f"|L L^-1 - I| {worst:.1e}, sum rel err {sum_err:.1e}")
    assert ok


def test_c11_cramer_rao_attainment(criterion):
    src = SourceParams(n_s=0.9, g2=1.0, r=0.5, theta=0.0)
    start = time.perf_counter()
    run = run_trials(src, UNIT, 1.0, tau=10_000, trials=2000, seed=42)
    elapsed = time.perf_counter() - start
    again = run_trials(src, UNIT, 1.0, tau=10_000, trials=2000, seed=42)
    ok = 0.9 <= run.ratio <= 1.1 and np.array_equal(run.estimates, again.estimates) and elapsed < 30
    criterion("C11 Monte Carlo variance / bound", ok, f"ratio {run.ratio:.4f}, {elapsed:.2f}s")
    assert ok


def test_c12_coherent_intensity_invariance(criterion):
    worst = 0.0
    for r, theta, gamma in itertools.product(errata.GRID_R, errata.GRID_THETA, errata.GRID_GAMMA):
        vals = [total(SourceParams(n_s=nk, g2=1.0, r=r, theta=theta), UNIT, 2 * gamma).r_total for nk in (0.1, 0.5, 0.9)]
        worst = max(worst, (max(vals) - min(vals)) / abs(vals[0]))
    ok = worst <= 1e-12
    criterion("C12 R_total independent of n_s*kappa at g2=1", ok, f"max rel spread {worst:.1e}")
    assert ok


def test_c13_tpd_ratio_report(criterion, tmp_path):
    first, second = errata.report(), errata.report()
    entry = next(e for e in errata.entries() if e.key == "tpd_ratio")
    ratio, _ = errata.tpd_ratio()
    assert main(["figure", "fig5", "--out", str(tmp_path)]) == 0
    sidecar = (tmp_path / "fig5_report.txt").read_text()
    ok = first == second and f"{ratio:.6f}" in entry.evidence and "unverified" in sidecar and math.isfinite(ratio)
    criterion("C13 theta=0/pi optimal TPD ratio reported", ok, f"ratio {ratio:.4f} (quoted ~1.75, unverified)")
    assert ok


def test_c14_determinism(criterion, tmp_path):
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["figure", "fig3a", "--out", str(d)]) == 0
        assert main(["figure", "fig5", "--out", str(d)]) == 0
        assert main(["montecarlo", "--seed", "42", "--out", str(d / "mc.csv")]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    ok = outputs[0] == outputs[1] and len(outputs[0]) >= 6
    criterion("C14 byte-identical figure and Monte Carlo CSVs", ok, f"{len(outputs[0])} files compared")
    assert ok

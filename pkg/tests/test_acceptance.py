"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary).

Run with ``pytest tests/test_acceptance.py -v``; lines are also printed
with ``-s``.  Criteria that depend on data outside this repository say so in
their detail text instead of being skipped silently.
"""
import csv
import importlib.util
import os
import time
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest
from conftest import random_basis, record

from splitamp.cc import SolverConfig, solve_ccsd, solve_eccc
from splitamp.ci import extract_overlaps, fci
from splitamp.cluster import ci_to_cc, drop_disconnected, embed_active
from splitamp.estimator import ShotBudgetQuery, count_overlaps, fit_power_law, read_power_law_csv, shot_budget
from splitamp.integrals import ActiveSpaceSpec
from splitamp.noise import noise_study
from splitamp.workflows import builtin_fixtures, casci, casci_overlaps, empty_space, full_space, load_basis, tccsd

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]


def _fci_overlaps(basis, max_rank=4, max_ci_rank=None):
    e, states = fci(basis, max_rank=max_ci_rank)
    return float(e[0]), extract_overlaps(states[0], max_rank)


def test_1_eccc_exactness(reference_energies):
    t0 = time.perf_counter()
    h4 = load_basis("builtin:h4_square_sto3g")
    e_fci, ov = _fci_overlaps(h4)
    amps = ci_to_cc(ov, 4)
    errs = {}
    for mode in ("frozen", "iterative"):
        res = solve_eccc(h4, embed_active(amps, full_space(h4), h4, freeze=False), SolverConfig(t1t3_mode=mode))
        errs[mode] = abs(res.e_total - e_fci)
    dt = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-8 and dt < 10
    assert record("1", ok, f"|E_ecCC - E_FCI| frozen={errs['frozen']:.2e}, iterative={errs['iterative']:.2e} "
                           f"(tol 1e-8), {dt:.1f}s")


def test_2_ccsd_error_anchor():
    t0 = time.perf_counter()
    h4 = load_basis("builtin:h4_square_sto3g")
    e_fci, _ = _fci_overlaps(h4, 1)
    res = solve_ccsd(h4)
    diff = (res.e_total - e_fci) * 1e3
    dt = time.perf_counter() - t0
    # the published figure is an error magnitude; CCSD lies below FCI here
    ok = res.converged and abs(abs(diff) - 7.05) <= 0.1 and dt < 10
    assert record("2", ok, f"E_CCSD - E_FCI = {diff:+.4f} mEh, |error| = {abs(diff):.4f} (target 7.05 +- 0.1), "
                           f"{dt:.1f}s")


def test_3_theorem_oracle():
    t0 = time.perf_counter()
    h4 = load_basis("builtin:h4_square_sto3g")
    e_cisd, ov = _fci_overlaps(h4, 4, max_ci_rank=2)
    amps = ci_to_cc(ov, 4)
    type1 = solve_eccc(h4, embed_active(amps, full_space(h4), h4, freeze=False))
    kept, _ = drop_disconnected(amps, ov)
    type2 = solve_eccc(h4, embed_active(kept, full_space(h4), h4, freeze=False))
    e_ccsd = solve_ccsd(h4).e_total
    d1, d2 = abs(type1.e_total - e_cisd), abs(type2.e_total - e_ccsd)
    dt = time.perf_counter() - t0
    ok = d1 <= 1e-8 and d2 <= 1e-8 and dt < 30
    assert record("3", ok, f"|TypeI - E_CISD| = {d1:.2e}, |TypeII - E_CCSD| = {d2:.2e} (tol 1e-8), {dt:.1f}s")


def test_4_tccsd_limits():
    t0 = time.perf_counter()
    worst_full = worst_empty = worst_split = 0.0
    names = [n for n in builtin_fixtures()]
    for name in names:
        basis = load_basis(f"builtin:{name}")
        full = full_space(basis)
        e_cas = casci(basis, full).e_total
        try:
            t_full = tccsd(basis, full)
        except Exception as exc:  # noqa: BLE001 - recorded in the acceptance line
            assert record("4", False, f"{name}: full-space TCCSD failed: {exc}")
        t_empty = tccsd(basis, empty_space())
        e_ccsd = solve_ccsd(basis).e_total
        runs = [t_full, t_empty]
        if basis.n_spatial >= 4 and basis.n_alpha >= 2:
            try:
                runs.append(tccsd(basis, ActiveSpaceSpec.around_fermi_level(basis, 4, 4)))
            except Exception:  # noqa: BLE001 - degenerate CAS fails reference dominance
                pass
        worst_full = max(worst_full, abs(t_full.e_total - e_cas))
        worst_empty = max(worst_empty, abs(t_empty.e_total - e_ccsd))
        worst_split = max(worst_split, *(abs(r.e_as + r.e_ext - r.e_correlation) for r in runs))
    dt = time.perf_counter() - t0
    ok = worst_full <= 1e-8 and worst_empty <= 1e-10 and worst_split <= 1e-10 and dt < 60
    assert record("4", ok, f"{len(names)} fixtures: max|full - CASCI| = {worst_full:.1e}, "
                           f"max|empty - CCSD| = {worst_empty:.1e}, max|e_as + e_ext - e_corr| = {worst_split:.1e}, "
                           f"{dt:.1f}s")


TCCSD_ROWS = [(6, 3, 3, 118), (8, 2, 2, 199), (8, 3, 3, 316), (8, 4, 4, 361), (10, 5, 5, 876), (10, 6, 6, 805),
              (12, 6, 6, 1819), (14, 5, 5, 2836), (16, 3, 3, 2068), (16, 4, 4, 3193), (16, 5, 5, 4236),
              (16, 6, 6, 5071), (16, 8, 8, 5793)]
ECCC_ROWS = [(2, 1, 1, 4), (4, 2, 2, 36), (6, 2, 2, 225), (6, 3, 3, 381), (8, 2, 2, 784), (8, 3, 3, 2436),
             (8, 4, 4, 3355), (10, 5, 5, 21126), (10, 6, 6, 17255), (12, 6, 6, 98694)]


def test_5_overlap_counting():
    t0 = time.perf_counter()
    bad = [(r, "tccsd") for r in TCCSD_ROWS if count_overlaps(*r[:3], method="tccsd") != r[3]]
    bad += [(r, "eccc") for r in ECCC_ROWS if count_overlaps(*r[:3], method="eccc") != r[3]]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1
    assert record("5", ok, f"{len(TCCSD_ROWS)} TCCSD + {len(ECCC_ROWS)} ec-CC rows, mismatches: {bad or 'none'}, "
                           f"{dt * 1e3:.1f}ms")


def _n2_t1_table():
    text = files("splitamp").joinpath("data", "n2_ccpvdz_t1.csv").read_text()
    return [(float(r["R"]), float(r["t1_diag"]), int(r["s_published"])) for r in csv.DictReader(text.splitlines())]


def test_6_shot_budget_table():
    t0 = time.perf_counter()
    rows = _n2_t1_table()
    worst, total = 0.0, 0
    for _, t1, s_pub in rows:
        s = shot_budget(ShotBudgetQuery(t1, 1e-3, 118, 56, 12)).s
        total += s
        worst = max(worst, abs(s - s_pub) / s_pub)
    dt = time.perf_counter() - t0
    ok = worst <= 0.05 and abs(total - 2.9e7) / 2.9e7 <= 0.05 and dt < 1
    first = shot_budget(ShotBudgetQuery(rows[0][1], 1e-3, 118, 56, 12)).s
    last = shot_budget(ShotBudgetQuery(rows[-1][1], 1e-3, 118, 56, 12)).s
    assert record("6", ok, f"R=0.8: {first} (5231), R=2.8: {last} (3308901), worst row {worst:.2%}, "
                           f"total {total:.4g} (2.9e7 +- 5%)")


NOISE_SYSTEMS = [("h4_rect_sto3g", 2, 2), ("h6_chain_sto3g", 4, 4), ("n2_sto3g", 6, 6)]


@pytest.mark.slow
def test_7a_noise_linearity():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, ne, no in NOISE_SYSTEMS:
        basis = load_basis(f"builtin:{name}")
        spec = ActiveSpaceSpec.around_fermi_level(basis, ne, no)
        ov, _ = casci_overlaps(basis, spec, 2)
        res = noise_study("tccsd", ov, basis, spec, [1e-4, 1e-3, 1e-2], 30, seed=7, n_boot=1000)
        ok &= res.beta_sigma is not None and 0.9 <= res.beta_sigma <= 1.1 and sum(res.n_nonconverged) == 0
        parts.append(f"{name} CAS({ne},{no}) beta={res.beta_sigma:.4f}+-{res.beta_sigma_err:.4f} "
                     f"nonconv={sum(res.n_nonconverged)}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    assert record("7a", ok, "; ".join(parts) + f", {dt:.0f}s")


def test_7b_published_dataset_refit():
    src = os.environ.get("SPLITAMP_NOISE_DATASET")
    if not src or not Path(src).is_file():
        record("7b", False, "published noise dataset not available (set SPLITAMP_NOISE_DATASET to the downloaded "
                            "CSV; the archive host is unreachable from this environment)")
        pytest.fail("published dataset unavailable")
    model = fit_power_law(read_power_law_csv(src), n_boot=50_000, seed=0)
    ok = abs(model.beta - 0.277) <= 0.06 and abs(model.gamma + 1.074) <= 0.13
    assert record("7b", ok, f"beta={model.beta:.3f}+-{model.beta_err:.3f} (0.277+-0.06), "
                            f"gamma={model.gamma:.3f}+-{model.gamma_err:.3f} (-1.074+-0.13)")


N2_GEOMETRIES = [round(0.8 + 0.1 * k, 2) for k in range(21)]


def _n2_dir() -> Path:
    return Path(os.environ.get("SPLITAMP_N2_DIR", Path.home() / ".cache/splitamp/n2_ccpvdz"))


def _ensure_n2_fcidumps() -> Path | None:
    d = _n2_dir()
    names = [d / f"n2_ccpvdz_R{r:.2f}.fcidump" for r in N2_GEOMETRIES]
    if all(p.is_file() for p in names):
        return d
    if importlib.util.find_spec("pyscf") is None:
        return None
    spec = importlib.util.spec_from_file_location("make_n2_curve", ROOT / "tools" / "make_n2_curve.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(d)
    return d


def _local_max_beyond(rs, es, r_min):
    return [rs[k] for k in range(1, len(rs) - 1) if rs[k] > r_min and es[k] > es[k - 1] and es[k] > es[k + 1]]


@pytest.mark.slow
def test_8_n2_barrier_shift():
    t0 = time.perf_counter()
    d = _ensure_n2_fcidumps()
    if d is None:
        record("8", False, "environment-dependent: no N2/cc-pVDZ FCIDUMPs and pyscf unavailable to generate them")
        pytest.skip("N2/cc-pVDZ FCIDUMPs unavailable")
    e_cas, e_tcc, e_cc = [], [], []
    for r in N2_GEOMETRIES:
        basis = load_basis(d / f"n2_ccpvdz_R{r:.2f}.fcidump")
        spec = ActiveSpaceSpec.around_fermi_level(basis, 6, 6)
        t = tccsd(basis, spec)
        e_cas.append(t.e_hf + t.e_as_variational)
        e_tcc.append(t.e_total if t.converged else np.nan)
        c = solve_ccsd(basis)
        e_cc.append(c.e_total if c.converged else np.nan)
    i11 = N2_GEOMETRIES.index(1.1)
    cas_b = (e_cas[-1] - e_cas[i11]) * 1e3
    tcc_b = (e_tcc[-1] - e_tcc[i11]) * 1e3
    shift = tcc_b - cas_b
    tcc_max = _local_max_beyond(N2_GEOMETRIES, e_tcc, 1.7)
    cc_max = _local_max_beyond(N2_GEOMETRIES, e_cc, 1.7)
    dt = time.perf_counter() - t0
    ok = abs(shift - 45.4) <= 2.0 and not tcc_max and bool(cc_max) and np.all(np.isfinite(e_tcc)) and dt < 1800
    assert record("8", ok, f"CASCI {cas_b:.1f} -> TCCSD {tcc_b:.1f} mEh, shift {shift:.1f} (45.4 +- 2); "
                           f"TCCSD maxima >1.7A: {tcc_max or 'none'}; CCSD maxima >1.7A: {cc_max or 'none'}; "
                           f"{dt:.0f}s")


def test_9_property_suites():
    """Each property over 100 seeds (the hypothesis suites cover the same ground with shrinking)."""
    from test_cluster import random_complex_state, random_overlaps

    from splitamp.ci import CIVector
    from splitamp.cluster import cc_to_ci, filter_variance, phase_align
    from splitamp.noise import NoiseSpec, perturb_overlaps

    t0 = time.perf_counter()
    failures = {}

    def check(name, cond):
        if not cond:
            failures[name] = failures.get(name, 0) + 1

    for seed in range(100):
        rng = np.random.default_rng(seed)
        ov = random_overlaps(seed, n=int(rng.integers(3, 6)), na=2, nb=int(rng.integers(1, 3)))
        amps = ci_to_cc(ov, 4)
        back = cc_to_ci(amps, 4).scaled(ov.c0)
        check("round trip", max(abs(back.value(l) - ov.value(l)) for l in ov.entries) <= 1e-12)
        check("antisymmetry", amps.is_antisymmetric())
        f = float(rng.uniform(0.1, 10) * rng.choice([-1, 1]))
        sc = ci_to_cc(ov.scaled(f), 4)
        check("scale invariance", np.allclose(sc.t1, amps.t1, atol=1e-12) and np.allclose(sc.t2, amps.t2, atol=1e-12)
              and all(abs(sc.t4.get(l, 0.0) - t) <= 1e-12 for l, t in amps.t4.items()))
        s = random_complex_state(seed)
        a = phase_align(s)
        rot = CIVector(s.n_spatial, s.basis, s.coefficients * np.exp(1j * rng.uniform(0, 2 * np.pi)), s.reference)
        check("phase_align idempotence", np.allclose(phase_align(a).coefficients, a.coefficients, atol=1e-14))
        check("phase_align global phase", np.allclose(phase_align(rot).coefficients, a.coefficients, atol=1e-12))
        noisy = ov.replace(entries={l: (v, 0.05**2) for l, (v, _) in ov.entries.items()})
        k1, k2 = sorted(rng.uniform(0, 4, 2))
        z1 = {l for l, (v, _) in filter_variance(noisy, k1)[0].entries.items() if v == 0}
        z2 = {l for l, (v, _) in filter_variance(noisy, k2)[0].entries.items() if v == 0}
        check("filter monotonicity", z1 <= z2)
        spec = NoiseSpec(sigma=1e-3, seed=seed)
        p1, p2 = perturb_overlaps(ov, spec, 3), perturb_overlaps(ov, spec, 3)
        check("seeded determinism", p1.entries == p2.entries and p1.c0 == p2.c0)
    # residual oracle on non-canonical random integrals (subset of seeds: the Fock-space oracle is slow)
    import oracles
    from test_cc import random_amplitudes, residual_at

    from splitamp.cc import Integrals, ccsd_residual

    for seed in range(10):
        basis = random_basis(4, 4, seed)
        amps = random_amplitudes(basis, seed, 2)
        r1, r2 = ccsd_residual(amps.t1, amps.t2, Integrals(basis))
        _, res = oracles.cc_projections(basis, {**amps.canonical(1), **amps.canonical(2)}, 2)
        check("CCSD residual oracle", max(abs(residual_at(l, r1, r2, basis) - v) for l, v in res.items()) <= 1e-11)
    dt = time.perf_counter() - t0
    ok = not failures and dt < 300
    assert record("9", ok, f"100 seeds per property, failures: {failures or 'none'}, {dt:.1f}s")

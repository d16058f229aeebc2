import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitamp.errors import InputError, PreconditionError
from splitamp.estimator import (
    PowerLawModel,
    PowerLawRecord,
    ShotBudgetQuery,
    count_overlaps,
    fit_power_law,
    overlaps_per_rank,
    predict_error,
    prefactor_from_t1diag,
    read_power_law_csv,
    shot_budget,
    total_curve_budget,
)


def test_overlaps_per_rank():
    assert overlaps_per_rank(6, 3, 1) == 9
    assert overlaps_per_rank(6, 3, 2) == 9
    assert overlaps_per_rank(6, 3, 4) == 0


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 12), na=st.integers(0, 12), nb=st.integers(0, 12))
def test_eccc_count_is_rank_truncated_ci(n, na, nb):
    from math import comb

    if na > n or nb > n:
        with pytest.raises(InputError):
            count_overlaps(n, na, nb, "eccc")
        return
    d = count_overlaps(n, na, nb, "eccc")
    assert d <= comb(n, na) * comb(n, nb)
    assert count_overlaps(n, na, nb, "tccsd") <= d
    if na + nb <= 4 or (n - na) + (n - nb) <= 4:
        assert d == comb(n, na) * comb(n, nb)


def test_unknown_method():
    with pytest.raises(InputError):
        count_overlaps(4, 2, 2, "ccsdt")


def test_prefactor():
    assert prefactor_from_t1diag(0.01) == pytest.approx(375.9 * 0.01 - 0.84)
    assert prefactor_from_t1diag(0.0) == 0.1
    with pytest.raises(InputError):
        prefactor_from_t1diag(-0.1)


def test_shot_budget_inverts_error_model():
    q = ShotBudgetQuery(0.02, 1e-3, 118, 56, 12)
    b = shot_budget(q)
    sigma = np.sqrt(np.sqrt(2 * 12) / b.s_exact)
    assert predict_error(b.a, 118, 56, sigma) == pytest.approx(1e-3)
    assert b.s == int(np.ceil(b.s_exact)) and b.s_low < b.s < b.s_high


def test_shot_budget_validation():
    with pytest.raises(InputError):
        ShotBudgetQuery(0.02, 0.0, 118, 56, 12)
    with pytest.raises(InputError):
        ShotBudgetQuery(0.02, 1e-3, 118, 56, 11)
    with pytest.raises(PreconditionError):
        shot_budget(ShotBudgetQuery(0.02, 1e-3, 118, 56, 11, assume_half_filling=False))
    with pytest.raises(InputError):
        PowerLawModel(beta_err=-1)


def test_total_curve_budget():
    rows, total = total_curve_budget([0.01, 0.02], 118, 56, 12, 1e-3)
    assert total == sum(r.s for r in rows) and len(rows) == 2


def synthetic_records(beta=0.3, gamma=-1.1, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    recs = []
    for k, (d, N) in enumerate([(9, 8), (36, 12), (118, 24), (400, 40), (118, 56), (36, 30), (900, 20)]):
        a = 1.5 * np.exp(rng.normal(scale=noise))
        for s in (1e-4, 1e-3, 1e-2):
            err = a * d**beta * N**gamma * s * np.exp(rng.normal(scale=noise))
            recs.append(PowerLawRecord(f"m{k}", d, N, s, err))
    return recs


def test_fit_power_law_recovers_exponents():
    m = fit_power_law(synthetic_records(noise=0.05), n_boot=2000, seed=1)
    assert m.beta == pytest.approx(0.3, abs=0.05) and m.gamma == pytest.approx(-1.1, abs=0.1)
    assert 0 < m.beta_err < 0.2 and 0 < m.gamma_err < 0.3
    assert set(m.per_label_prefactors) == {f"m{k}" for k in range(7)}


def test_fit_power_law_deterministic_and_degenerate():
    recs = synthetic_records(noise=0.1)
    a = fit_power_law(recs, n_boot=500, seed=3)
    b = fit_power_law(recs, n_boot=500, seed=3)
    assert a.beta_err == b.beta_err
    with pytest.raises(PreconditionError):
        fit_power_law([PowerLawRecord("x", 9, 8, s, s) for s in (1e-3, 1e-2)], n_boot=10)


def test_read_power_law_csv_aliases():
    text = "molecule,num_overlaps,n_spin_orbitals,noise,error\nA,9,8,0.001,0.0003\nB,36,12,0.01,0.004\n"
    recs = read_power_law_csv(io.StringIO(text))
    assert recs[1] == PowerLawRecord("B", 36.0, 12.0, 0.01, 0.004)
    with pytest.raises(InputError):
        read_power_law_csv(io.StringIO("a,b\n1,2\n"))
    with pytest.raises(InputError):
        read_power_law_csv(io.StringIO("label,d,N,sigma,error\nA,x,8,0.1,0.1\n"))

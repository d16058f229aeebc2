import numpy as np
import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitamp.ci import (
    CIVector,
    ExcitationLabel,
    OverlapSet,
    enumerate_determinants,
    extract_overlaps,
    fci,
    reference_determinant,
    spin_conserving_labels,
)
from splitamp.cluster import (
    AmplitudeSet,
    cc_to_ci,
    ci_to_cc,
    drop_disconnected,
    embed_active,
    filter_variance,
    parity,
    partition_terms,
    phase_align,
)
from splitamp.errors import InputError, PreconditionError, ReferenceDominanceError
from splitamp.integrals import ActiveSpaceSpec

SEEDS = st.integers(0, 2**31 - 1)


def random_overlaps(seed, n=4, na=2, nb=2, max_rank=4, scale=0.1, variance=None) -> OverlapSet:
    rng = np.random.default_rng(seed)
    ref = reference_determinant(n, na, nb)
    occ = ref.spin_orbitals(n)
    vir = [p for p in range(2 * n) if p not in occ]
    entries = {}
    for r in range(1, max_rank + 1):
        for lab in spin_conserving_labels(occ, vir, n, r):
            entries[lab] = (float(rng.normal(scale=scale)), variance)
    c0 = float(rng.choice([-1, 1]) * rng.uniform(0.5, 1.5))
    return OverlapSet(n, ref, c0, entries)


def test_parity_and_partitions():
    assert parity((0, 1, 2)) == 1 and parity((1, 0, 2)) == -1 and parity((2, 0, 1)) == 1
    assert [len(partition_terms(r)) for r in (1, 2, 3, 4)] == [1, 3, 16, 131]


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_ci_to_cc_matches_exponential_oracle(seed):
    ov = random_overlaps(seed)
    amps = ci_to_cc(ov, 4)
    ref = oracles.exp_t_overlaps(oracles.amplitudes_to_labels(amps), ov.occ, ov.vir, ov.n_spatial, 4)
    for lab, c in ref.items():
        assert c == pytest.approx(ov.value(lab) / ov.c0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_cc_to_ci_matches_exponential_oracle(seed):
    amps = ci_to_cc(random_overlaps(seed), 4)
    ov = cc_to_ci(amps, 4)
    assert ov.c0 == 1.0
    ref = oracles.exp_t_overlaps(oracles.amplitudes_to_labels(amps), amps.occ, amps.vir, amps.n_spatial, 4)
    for lab, c in ref.items():
        assert ov.value(lab) == pytest.approx(c, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, n=st.integers(3, 6), na=st.integers(1, 3), nb=st.integers(1, 3))
def test_round_trip(seed, n, na, nb):
    if na >= n or nb >= n:
        return
    ov = random_overlaps(seed, n, na, nb)
    back = cc_to_ci(ci_to_cc(ov, 4), 4).scaled(ov.c0)
    for lab in ov.entries:
        assert back.value(lab) == pytest.approx(ov.value(lab), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_amplitudes_antisymmetric_and_canonical(seed):
    amps = ci_to_cc(random_overlaps(seed), 4)
    assert amps.is_antisymmetric()
    for rank in (3, 4):
        for lab in amps.sparse(rank):
            assert list(lab.occ) == sorted(lab.occ) and list(lab.virt) == sorted(lab.virt)
    # dense t2 agrees with the canonical listing under index swaps
    o = {p: k for k, p in enumerate(amps.occ)}
    v = {p: k for k, p in enumerate(amps.vir)}
    for lab, t in amps.canonical(2).items():
        (i, j), (a, b) = lab
        assert amps.t2[o[j], o[i], v[a], v[b]] == -t
        assert amps.t2[o[j], o[i], v[b], v[a]] == t


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, factor=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_intermediate_normalization_scale_invariance(seed, factor):
    ov = random_overlaps(seed)
    a, b = ci_to_cc(ov, 4), ci_to_cc(ov.scaled(factor), 4)
    assert np.allclose(a.t1, b.t1, atol=1e-12) and np.allclose(a.t2, b.t2, atol=1e-12)
    for rank in (3, 4):
        for lab, t in a.sparse(rank).items():
            assert b.sparse(rank).get(lab, 0.0) == pytest.approx(t, abs=1e-12)


def random_complex_state(seed, n=3):
    rng = np.random.default_rng(seed)
    dets = enumerate_determinants(n, 1, 1)
    c = rng.normal(size=len(dets)) + 1j * rng.normal(size=len(dets))
    return CIVector(n, dets, c / np.linalg.norm(c), reference_determinant(n, 1, 1))


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, theta=st.floats(0, 2 * np.pi))
def test_phase_align_idempotent_and_phase_invariant(seed, theta):
    s = random_complex_state(seed)
    a = phase_align(s)
    assert a.is_real and a.norm == pytest.approx(1.0)
    assert np.allclose(phase_align(a).coefficients, a.coefficients, atol=1e-14)
    rotated = CIVector(s.n_spatial, s.basis, s.coefficients * np.exp(1j * theta), s.reference)
    assert np.allclose(phase_align(rotated).coefficients, a.coefficients, atol=1e-12)
    k = int(np.argmax(np.abs(a.coefficients)))
    assert a.coefficients[k] > 0


def test_phase_align_zero_vector():
    s = random_complex_state(0)
    with pytest.raises(PreconditionError):
        phase_align(CIVector(s.n_spatial, s.basis, np.zeros(len(s.basis)), s.reference))


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, k1=st.floats(0, 5), k2=st.floats(0, 5))
def test_variance_filter_monotone(seed, k1, k2):
    lo, hi = sorted((k1, k2))
    ov = random_overlaps(seed, variance=0.05**2)
    a, ra = filter_variance(ov, lo)
    b, rb = filter_variance(ov, hi)
    zero_a = {lab for lab, (v, _) in a.entries.items() if v == 0.0}
    zero_b = {lab for lab, (v, _) in b.entries.items() if v == 0.0}
    assert zero_a <= zero_b and ra.n_zeroed_by_variance <= rb.n_zeroed_by_variance
    # survivors are untouched; literal mode zeroes the complement
    for lab in set(ov.entries) - zero_b:
        assert b.entries[lab] == ov.entries[lab]
    c, _ = filter_variance(ov, hi, literal=True)
    zero_c = {lab for lab, (v, _) in c.entries.items() if v == 0.0}
    assert zero_b | zero_c == set(ov.entries)


def test_filter_keeps_entries_without_variance():
    ov = random_overlaps(1)
    out, rep = filter_variance(ov, 100.0)
    assert out.entries == ov.entries and rep.n_zeroed_by_variance == 0
    with pytest.raises(InputError):
        filter_variance(ov, -1.0)


def test_cisd_vector_gives_only_disconnected_higher_ranks(h4):
    _, states = fci(h4, max_rank=2)
    ov = extract_overlaps(states[0], 4)
    amps = ci_to_cc(ov, 4)
    assert amps.t3 and amps.t4
    kept, rep = drop_disconnected(amps, ov)
    assert not kept.t3 and not kept.t4
    assert rep.n_dropped_disconnected == len(amps.t3) + len(amps.t4)


def test_reference_dominance():
    ov = random_overlaps(0).replace(c0=1e-9)
    with pytest.raises(ReferenceDominanceError):
        ci_to_cc(ov, 2)
    with pytest.raises(InputError):
        ci_to_cc(random_overlaps(0), 5)


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS)
def test_amplitude_jsonl_round_trip(seed):
    amps = ci_to_cc(random_overlaps(seed), 4)
    amps.frozen1[0, 0] = True
    amps.frozen2[0, 1, 0, 1] = amps.frozen2[1, 0, 1, 0] = True
    amps.frozen2[1, 0, 0, 1] = amps.frozen2[0, 1, 1, 0] = True
    back = AmplitudeSet.from_jsonl(amps.to_jsonl())
    assert np.allclose(back.t1, amps.t1, atol=1e-15) and np.allclose(back.t2, amps.t2, atol=1e-15)
    assert back.frozen_labels() == amps.frozen_labels()
    for rank in (3, 4):
        assert back.sparse(rank).keys() == amps.canonical(rank).keys()


def test_embed_active_relabels_and_freezes(h6):
    spec = ActiveSpaceSpec.around_fermi_level(h6, 2, 2)
    ov = random_overlaps(5, n=2, na=1, nb=1, max_rank=2)
    act = ci_to_cc(ov, 2)
    full = embed_active(act, spec, h6, freeze=True)
    n = h6.n_spatial
    smap = spec.spin_orbital_map(n)
    o = {p: k for k, p in enumerate(full.occ)}
    v = {p: k for k, p in enumerate(full.vir)}
    for lab, t in act.canonical(1).items():
        i, a = smap[lab.occ[0]], smap[lab.virt[0]]
        assert full.t1[o[i], v[a]] == t and full.frozen1[o[i], v[a]]
    # the whole active image is frozen (spin-forbidden entries stay zero)
    assert full.frozen1.sum() == 4 and full.frozen2.sum() == 4
    assert full.is_antisymmetric()
    with pytest.raises(InputError):
        embed_active(ci_to_cc(random_overlaps(0), 2), spec, h6)

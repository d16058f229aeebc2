import numpy as np
import pytest
from conftest import random_basis, random_integrals
from hypothesis import given, settings
from hypothesis import strategies as st

from splitamp.errors import FcidumpError, InputError, PreconditionError
from splitamp.integrals import (
    ActiveSpaceSpec,
    build_active_hamiltonian,
    build_fock,
    parse_fcidump,
    read_fcidump,
    to_spin_orbitals,
    write_fcidump,
)
from splitamp.workflows import builtin_fixtures, load_basis, resolve_path


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5))
def test_fcidump_round_trip(seed, n):
    mi = random_integrals(n, min(n, 2), seed)
    back = parse_fcidump(write_fcidump(mi))
    assert back.n_spatial == mi.n_spatial and back.n_electrons == mi.n_electrons
    assert np.allclose(back.h, mi.h, atol=1e-12)
    assert np.allclose(back.eri, mi.eri, atol=1e-12)
    assert back.e_core == pytest.approx(mi.e_core, abs=1e-12)


def test_builtin_fixtures_listed():
    names = builtin_fixtures()
    for name in ("h2_sto3g", "h4_square_sto3g", "h4_rect_sto3g", "lih_sto3g", "h6_chain_sto3g", "n2_sto3g"):
        assert name in names


@pytest.mark.parametrize("name", ["h2_sto3g", "h4_square_sto3g", "h4_rect_sto3g", "lih_sto3g",
                                  "h6_chain_sto3g", "n2_sto3g"])
def test_hf_energy_matches_reference(name, reference_energies):
    basis = load_basis(f"builtin:{name}")
    fock, e_hf = build_fock(basis)
    assert e_hf == pytest.approx(reference_energies[name]["e_hf"], abs=1e-9)
    assert np.allclose(fock, fock.T)
    # canonical RHF orbitals: Brillouin condition
    assert np.abs(fock[np.ix_(basis.occ, basis.vir)]).max() < 1e-6


def test_spin_orbital_antisymmetry(h4):
    g = h4.g
    assert np.allclose(g, -g.transpose(1, 0, 2, 3))
    assert np.allclose(g, -g.transpose(0, 1, 3, 2))
    assert np.allclose(g, g.transpose(2, 3, 0, 1))


def test_blocked_ordering(h4):
    n = h4.n_spatial
    assert h4.occ == (0, 1, n, n + 1)
    assert [h4.spin(p) for p in (0, n)] == [0, 1]
    # spin-forbidden one-body blocks vanish
    assert np.all(h4.h[:n, n:] == 0)


@pytest.mark.parametrize("text, msg", [
    ("", "header"),
    ("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.5 1 1 1 1\n 0.1 3 1 1 1\n", "index"),
    ("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n abc 1 1 1 1\n", ""),
    ("&FCI NELEC=2,MS2=0,\n&END\n 0.5 1 1 1 1\n", "NORB"),
])
def test_fcidump_errors(text, msg):
    with pytest.raises(FcidumpError) as exc:
        parse_fcidump(text)
    assert msg.lower() in str(exc.value).lower()
    assert isinstance(exc.value, InputError)


def test_missing_file_and_builtin():
    with pytest.raises((InputError, FileNotFoundError)):
        read_fcidump("/nonexistent/file.fcidump")
    with pytest.raises(InputError):
        resolve_path("builtin:does_not_exist")


def test_active_space_validation(h6):
    with pytest.raises(PreconditionError):
        ActiveSpaceSpec((2, 1), 1, 1).validate(h6)
    with pytest.raises(PreconditionError):
        ActiveSpaceSpec((2, 3), 2, 2).validate(h6)
    with pytest.raises(PreconditionError):
        ActiveSpaceSpec.around_fermi_level(h6, 8, 8)
    spec = ActiveSpaceSpec.around_fermi_level(h6, 4, 4)
    assert spec.active_spatial_orbitals == (1, 2, 3, 4)
    assert spec.spin_orbital_map(6) == (1, 2, 3, 4, 7, 8, 9, 10)


def test_frozen_core_energy_consistent(h6):
    """The embedded reference determinant reproduces the full HF energy."""
    spec = ActiveSpaceSpec.around_fermi_level(h6, 2, 2)
    act, e_frozen = build_active_hamiltonian(h6, spec)
    assert act.e_core == pytest.approx(e_frozen)
    assert build_fock(act)[1] == pytest.approx(build_fock(h6)[1], abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_frozen_core_reference_energy_random(seed):
    basis = random_basis(4, 4, seed)
    spec = ActiveSpaceSpec((1, 2), 1, 1)
    act, _ = build_active_hamiltonian(basis, spec)
    assert build_fock(act)[1] == pytest.approx(build_fock(basis)[1], abs=1e-10)


def test_open_shell_reference():
    basis = to_spin_orbitals(random_integrals(3, 3, 1, ms2=1))
    assert (basis.n_alpha, basis.n_beta) == (2, 1)

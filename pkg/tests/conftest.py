import json
from functools import lru_cache
import sys
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from splitamp.integrals import MolecularIntegrals, to_spin_orbitals  # noqa: E402
from splitamp.workflows import load_basis  # noqa: E402


def random_integrals(n_spatial: int, n_electrons: int, seed: int, ms2: int = 0, scale: float = 0.3) -> MolecularIntegrals:
    """Random real integrals with the 8-fold permutational symmetry of (pq|rs)."""
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n_spatial, n_spatial))
    h = 0.5 * (h + h.T) + np.diag(np.arange(n_spatial, dtype=float))
    x = rng.normal(scale=scale, size=(n_spatial,) * 4)
    eri = (x + x.transpose(1, 0, 2, 3) + x.transpose(0, 1, 3, 2) + x.transpose(1, 0, 3, 2))
    eri = eri + eri.transpose(2, 3, 0, 1)
    return MolecularIntegrals(n_spatial, n_electrons, ms2, h, eri / 8, float(rng.normal()))


@lru_cache(maxsize=64)
def random_basis(n_spatial=4, n_electrons=4, seed=0, **kw):
    return to_spin_orbitals(random_integrals(n_spatial, n_electrons, seed, **kw))


@pytest.fixture(scope="session")
def reference_energies():
    return json.loads(files("splitamp").joinpath("data", "reference_energies.json").read_text())


@pytest.fixture(scope="session")
def h4():
    return load_basis("builtin:h4_square_sto3g")


@pytest.fixture(scope="session")
def h4_rect():
    return load_basis("builtin:h4_rect_sto3g")


@pytest.fixture(scope="session")
def h2():
    return load_basis("builtin:h2_sto3g")


@pytest.fixture(scope="session")
def lih():
    return load_basis("builtin:lih_sto3g")


@pytest.fixture(scope="session")
def h6():
    return load_basis("builtin:h6_chain_sto3g")


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    """Register one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((criterion, bool(ok), detail))
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {crit:>3s}: {'PASS' if ok else 'FAIL'}  {detail}")

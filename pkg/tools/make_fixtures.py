"""Regenerate the bundled FCIDUMP fixtures and their reference energies.

Requires pyscf (development-only dependency).  Each molecule is run at the
*stable* RHF solution (stability analysis with Newton refinement), since the
default guess lands on a saddle point for square H4.

    python3 tools/make_fixtures.py [outdir]
"""
import json
import sys
from pathlib import Path

import numpy as np
from pyscf import ao2mo, cc, fci, gto, mcscf, scf

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from splitamp.integrals import MolecularIntegrals, write_fcidump  # noqa: E402

MOLECULES = {
    "h2_sto3g": ("H 0 0 0; H 0 0 0.7414", "sto-3g"),
    "h4_square_sto3g": ("H 0 0 0; H 1.23 0 0; H 0 1.23 0; H 1.23 1.23 0", "sto-3g"),
    "h4_rect_sto3g": ("H 0 0 0; H 1.23 0 0; H 0 1.60 0; H 1.23 1.60 0", "sto-3g"),
    "lih_sto3g": ("Li 0 0 0; H 0 0 1.6", "sto-3g"),
    "h6_chain_sto3g": ("; ".join(f"H 0 0 {1.5 * k}" for k in range(6)), "sto-3g"),
    "n2_sto3g": ("N 0 0 0; N 0 0 1.09", "sto-3g"),
}


def stable_rhf(mol):
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.init_guess = "1e"
    mf.kernel()
    for _ in range(5):
        mo, _, stable, _ = mf.stability(return_status=True)
        if stable:
            break
        dm = mf.make_rdm1(mo, mf.mo_occ)
        mf = scf.newton(mf)
        mf.kernel(dm0=dm)
    return mf


def integrals_from_rhf(mf) -> MolecularIntegrals:
    mol = mf.mol
    c = mf.mo_coeff
    n = c.shape[1]
    h = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), n)
    return MolecularIntegrals(n, mol.nelectron, mol.spin, h, eri, float(mol.energy_nuc()))


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    refs = {}
    for name, (atom, basis) in MOLECULES.items():
        mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0)
        mf = stable_rhf(mol)
        mi = integrals_from_rhf(mf)
        write_fcidump(mi, outdir / f"{name}.fcidump")
        e_fci = fci.FCI(mf).kernel()[0]
        mycc = cc.CCSD(mf)
        mycc.conv_tol = 1e-12
        mycc.kernel()
        entry = {"e_hf": float(mf.e_tot), "e_fci": float(e_fci), "e_ccsd": float(mycc.e_tot)}
        if mol.nelectron >= 6:
            mc = mcscf.CASCI(mf, 6 if mi.n_spatial > 6 else 4, 6 if mi.n_spatial > 6 else 4)
            entry["casci"] = {"ncas": mc.ncas, "nelecas": list(mc.nelecas), "e_tot": float(mc.kernel()[0])}
        refs[name] = entry
        print(name, json.dumps(entry))
    (outdir / "reference_energies.json").write_text(json.dumps(refs, indent=2) + "\n")


if __name__ == "__main__":
    np.set_printoptions(precision=10)
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/splitamp/data")

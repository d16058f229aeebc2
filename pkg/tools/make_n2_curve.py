"""Generate N2/cc-pVDZ FCIDUMPs along the dissociation curve (R = 0.8 ... 2.8 A).

Requires pyscf (development-only dependency).  The reference is the
D2h-adapted closed-shell RHF with the ground-state irrep occupation fixed
along the whole curve; without the symmetry constraint the RHF breaks spatial
symmetry beyond ~1.7 A and the CC curves jump between branches.  RHF is
converged at 1.1 A and followed outwards and inwards, seeding each geometry
with the density of its neighbour; a symmetry-preserving internal stability
check with Newton refinement is applied at every point.

    python3 tools/make_n2_curve.py [outdir]

The default output directory is ``$SPLITAMP_N2_DIR`` or
``~/.cache/splitamp/n2_ccpvdz``.  Files are named ``n2_ccpvdz_R{R:.2f}.fcidump``
and an ``index.json`` lists geometries with their RHF energies.
"""
import json
import os
import sys
from pathlib import Path

import numpy as np
from pyscf import gto, scf

sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from make_fixtures import integrals_from_rhf  # noqa: E402
from splitamp.integrals import write_fcidump  # noqa: E402

GEOMETRIES = [round(0.8 + 0.1 * k, 2) for k in range(21)]
START = 1.1
IRREP_NELEC = {"Ag": 6, "B1u": 4, "B2u": 2, "B3u": 2}


def default_dir() -> Path:
    return Path(os.environ.get("SPLITAMP_N2_DIR", Path.home() / ".cache/splitamp/n2_ccpvdz"))


def fcidump_name(r: float) -> str:
    return f"n2_ccpvdz_R{r:.2f}.fcidump"


def rhf_at(r, dm0=None):
    mol = gto.M(atom=f"N 0 0 0; N 0 0 {r}", basis="cc-pvdz", unit="Angstrom", verbose=0,
                symmetry="D2h")
    mf = scf.RHF(mol)
    mf.irrep_nelec = dict(IRREP_NELEC)
    mf.conv_tol = 1e-11
    mf.max_cycle = 200
    mf.kernel(dm0=dm0)
    for _ in range(5):
        mo, _, stable, _ = mf.stability(return_status=True)
        if stable:
            break
        dm = mf.make_rdm1(mo, mf.mo_occ)
        mf = scf.newton(mf)
        mf.kernel(dm0=dm)
    if not mf.converged:
        raise RuntimeError(f"RHF did not converge at R={r}")
    nocc = mol.nelectron // 2
    if not np.all(mf.mo_occ[:nocc] == 2):
        raise RuntimeError(f"RHF occupation is not aufbau at R={r}")
    return mf


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    start = GEOMETRIES.index(START)
    branches = [GEOMETRIES[start:], GEOMETRIES[start::-1]]
    index = {}
    for branch in branches:
        dm = None
        for r in branch:
            mf = rhf_at(r, dm)
            dm = mf.make_rdm1()
            if r not in index:
                write_fcidump(integrals_from_rhf(mf), outdir / fcidump_name(r))
                index[r] = float(mf.e_tot)
                print(f"R={r:.2f}  E_RHF={mf.e_tot:.10f}", flush=True)
    rows = [{"R": r, "fcidump": fcidump_name(r), "e_rhf": index[r]} for r in sorted(index)]
    (outdir / "index.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    np.set_printoptions(precision=10)
    main(sys.argv[1] if len(sys.argv) > 1 else default_dir())

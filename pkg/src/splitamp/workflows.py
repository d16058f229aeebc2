"""End-to-end pipelines: CASCI, TCCSD and ec-CC from a full-space Hamiltonian.

Both split-amplitude methods accept the active-space overlaps either from a
file/object (the quantum-input branch) or compute them by CASCI on the
embedded active Hamiltonian (the classical branch).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path

from .cc import CCResult, SolverConfig, TCCResult, solve_ccsd, solve_eccc
from .ci import active_map_for, enumerate_determinants, extract_overlaps, solve_ci
from .ci.overlaps import C0_THRESHOLD, OverlapSet
from .ci.state import CIVector
from .cluster import FilterReport, ci_to_cc, drop_disconnected, embed_active, filter_variance
from .errors import InputError
from .integrals import ActiveSpaceSpec, SpinOrbitalBasis, build_active_hamiltonian, build_fock, read_fcidump, to_spin_orbitals

log = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"


def builtin_fixtures() -> list[str]:
    return sorted(p.name[: -len(".fcidump")] for p in files("splitamp").joinpath("data").iterdir()
                  if p.name.endswith(".fcidump"))


def resolve_path(path: str | Path):
    """Map ``builtin:<name>`` onto a bundled fixture; other paths pass through."""
    s = str(path)
    if s.startswith(BUILTIN_PREFIX):
        name = s[len(BUILTIN_PREFIX):]
        res = files("splitamp").joinpath("data", name)
        if not res.is_file():
            res = files("splitamp").joinpath("data", name + ".fcidump")
        if not res.is_file():
            raise InputError(f"unknown builtin fixture {name!r}; available: {', '.join(builtin_fixtures())}")
        return res
    return Path(s)


def load_basis(path: str | Path) -> SpinOrbitalBasis:
    return to_spin_orbitals(read_fcidump(resolve_path(path)))


@dataclass
class CASCIResult:
    e_total: float
    e_frozen_core: float
    state: CIVector
    active_basis: SpinOrbitalBasis
    as_spec: ActiveSpaceSpec


def casci(basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec) -> CASCIResult:
    """Exact diagonalization in the active space with a frozen mean-field core."""
    act, e_frozen = build_active_hamiltonian(basis, as_spec)
    dets = enumerate_determinants(act.n_spatial, act.n_alpha, act.n_beta)
    energies, states = solve_ci(act, dets, 1)
    return CASCIResult(float(energies[0]), e_frozen, states[0], act, as_spec)


def casci_overlaps(basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec, max_rank: int,
                   c0_threshold: float = C0_THRESHOLD) -> tuple[OverlapSet, CASCIResult]:
    """CASCI overlaps relabelled into the full orbital numbering."""
    res = casci(basis, as_spec)
    ov = extract_overlaps(res.state, max_rank, active_map_for(basis, as_spec), c0_threshold)
    return ov, res


def _check_overlap_space(ov: OverlapSet, basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec):
    smap = set(as_spec.spin_orbital_map(basis.n_spatial))
    if ov.n_spatial != basis.n_spatial:
        raise InputError("overlap file numbering does not match the FCIDUMP orbital count")
    if not (set(ov.occ) | set(ov.vir)) <= smap:
        raise InputError("overlap labels extend beyond the active space")


def tccsd(basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec, config: SolverConfig | None = None,
          overlaps: OverlapSet | None = None, c0_threshold: float = C0_THRESHOLD) -> TCCResult:
    """Tailored CCSD with the active T1/T2 block frozen to cluster-analyzed values."""
    _, e_hf = build_fock(basis)
    e_var = None
    if as_spec.n_active == 0:
        res = solve_ccsd(basis, config)
        return TCCResult(res, 0.0, res.e_correlation, None)
    if overlaps is None:
        overlaps, cas = casci_overlaps(basis, as_spec, 2, c0_threshold)
        e_var = cas.e_total - e_hf
        log.info("CASCI energy %.12f (correlation %.12f)", cas.e_total, e_var)
    else:
        _check_overlap_space(overlaps, basis, as_spec)
    amps = ci_to_cc(overlaps, 2, c0_threshold)
    frozen = embed_active(amps, as_spec, basis, freeze=True)
    return solve_ccsd(basis, config, frozen=frozen, e_as_variational=e_var)


def postprocess_eccc(overlaps: OverlapSet, type2: bool = True, k: float = 2.0, literal_filter: bool = False,
                     c0_threshold: float = C0_THRESHOLD):
    """Filter -> cluster analysis through rank 4 -> drop purely disconnected T3/T4."""
    report = FilterReport()
    if overlaps.has_variances():
        overlaps, rep = filter_variance(overlaps, k, literal=literal_filter)
        report = report.merge(rep)
    amps = ci_to_cc(overlaps, 4, c0_threshold)
    if type2:
        amps, rep = drop_disconnected(amps, overlaps, 1e-12, k)
        report = report.merge(rep)
    return amps, report


def eccc(basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec, config: SolverConfig | None = None,
         overlaps: OverlapSet | None = None, type2: bool = True, k: float = 2.0, literal_filter: bool = False,
         c0_threshold: float = C0_THRESHOLD) -> tuple[CCResult, FilterReport]:
    """ec-CC with T3/T4 from active-space overlaps (Type-II by default)."""
    if overlaps is None:
        overlaps, _ = casci_overlaps(basis, as_spec, 4, c0_threshold)
    else:
        _check_overlap_space(overlaps, basis, as_spec)
    amps, report = postprocess_eccc(overlaps, type2, k, literal_filter, c0_threshold)
    external = embed_active(amps, as_spec, basis, freeze=False)
    return solve_eccc(basis, external, config), report


def full_space(basis: SpinOrbitalBasis) -> ActiveSpaceSpec:
    return ActiveSpaceSpec(tuple(range(basis.n_spatial)), basis.n_alpha, basis.n_beta)


def empty_space() -> ActiveSpaceSpec:
    return ActiveSpaceSpec((), 0, 0)

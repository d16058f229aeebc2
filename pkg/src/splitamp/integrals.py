"""Molecular integrals: FCIDUMP I/O, spin-orbital conversion, Fock build and
active-space embedding.

Spin orbitals use the *blocked* ordering: spin orbital ``p < n`` is the alpha
component of spatial orbital ``p`` and ``p >= n`` is the beta component of
spatial orbital ``p - n``.  Two-electron integrals are stored antisymmetrized
in physicists' notation, ``g[p, q, r, s] = <pq||rs> = <pq|rs> - <pq|sr>``.
"""
from __future__ import annotations

import gzip
import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FcidumpError, InputError, PreconditionError

BLOCKED = "blocked"

_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MolecularIntegrals:
    """Spatial-orbital integrals as found in an FCIDUMP file.

    ``eri`` is in chemists' ordering, ``eri[p, q, r, s] = (pq|rs)``.
    """

    n_spatial: int
    n_electrons: int
    ms2: int
    h: np.ndarray
    eri: np.ndarray
    e_core: float = 0.0
    orbital_symmetries: tuple[int, ...] = ()

    def __post_init__(self):
        n = self.n_spatial
        if self.h.shape != (n, n) or self.eri.shape != (n, n, n, n):
            raise InputError("integral arrays do not match n_spatial")
        _readonly(self.h)
        _readonly(self.eri)


def _parse_header(text: str) -> dict[str, list[str]]:
    body = re.sub(r"^\s*&FCI", "", text, flags=re.IGNORECASE)
    body = _HEADER_END.sub("", body.strip())
    fields: dict[str, list[str]] = {}
    key = None
    for token in re.split(r"[,\s]+", body):
        if not token:
            continue
        if "=" in token:
            key, _, value = token.partition("=")
            key = key.strip().upper()
            fields[key] = [value] if value else []
        elif key is not None:
            fields[key].append(token)
        else:
            raise FcidumpError(f"unexpected token {token!r} in FCIDUMP header")
    return fields


def _header_int(fields, name):
    try:
        return int(fields[name][0])
    except (KeyError, IndexError, ValueError):
        raise FcidumpError(f"FCIDUMP header lacks a valid {name}") from None


def parse_fcidump(text: str | io.TextIOBase) -> MolecularIntegrals:
    """Parse Molpro-style FCIDUMP text into :class:`MolecularIntegrals`.

    All permutational images of each stored integral are populated. Records
    that assign two different values to the same integral raise
    :class:`FcidumpError`.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    header_lines = []
    for n_header, line in enumerate(lines, start=1):
        header_lines.append(line)
        if _HEADER_END.search(line.strip()):
            break
    else:
        raise FcidumpError("FCIDUMP header is not terminated by &END or /")
    if not header_lines or "&FCI" not in header_lines[0].upper():
        raise FcidumpError("FCIDUMP must start with an &FCI namelist")

    fields = _parse_header(" ".join(header_lines))
    norb = _header_int(fields, "NORB")
    nelec = _header_int(fields, "NELEC")
    ms2 = int(fields.get("MS2", ["0"])[0])
    orbsym = tuple(int(x) for x in fields.get("ORBSYM", []))
    if norb <= 0 or nelec < 0 or nelec > 2 * norb:
        raise FcidumpError(f"inconsistent header NORB={norb}, NELEC={nelec}")

    h = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    seen: dict[tuple, float] = {}
    e_core = 0.0

    for lineno, line in enumerate(lines[n_header:], start=n_header + 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FcidumpError(f"line {lineno}: expected 'value i j k l'")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise FcidumpError(f"line {lineno}: cannot parse record") from None
        if min(i, j, k, l) < 0 or max(i, j, k, l) > norb:
            raise FcidumpError(f"line {lineno}: orbital index out of range")

        if i == j == k == l == 0:
            key = ("core",)
        elif k == 0 and l == 0:
            if j == 0:
                continue  # orbital energy record
            key = ("h",) + tuple(sorted((i, j)))
        elif 0 in (i, j, k, l):
            raise FcidumpError(f"line {lineno}: malformed index pattern")
        else:
            pair1 = tuple(sorted((i, j)))
            pair2 = tuple(sorted((k, l)))
            key = ("eri",) + min(pair1 + pair2, pair2 + pair1)

        if key in seen:
            if abs(seen[key] - value) > 1e-10 * max(1.0, abs(value)):
                raise FcidumpError(f"line {lineno}: contradicts an earlier record for {key[1:]}")
            continue
        seen[key] = value

        if key[0] == "core":
            e_core = value
        elif key[0] == "h":
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        else:
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r)):
                eri[a, b, c, d] = value
                eri[c, d, a, b] = value

    return MolecularIntegrals(norb, nelec, ms2, h, eri, e_core, orbsym)


def read_fcidump(path: str | Path) -> MolecularIntegrals:
    """Read an FCIDUMP file; ``.gz`` files are decompressed transparently."""
    path = Path(path)
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rt") as f:
                return parse_fcidump(f.read())
        return parse_fcidump(path.read_text())
    except OSError as exc:
        raise FcidumpError(f"cannot read {path}: {exc}") from exc


def write_fcidump(mi: MolecularIntegrals, path: str | Path | None = None, tol: float = 1e-14) -> str:
    """Serialize unique integrals in FCIDUMP format; returns the text."""
    n = mi.n_spatial
    sym = ",".join(str(s) for s in (mi.orbital_symmetries or (1,) * n))
    out = [f"&FCI NORB={n},NELEC={mi.n_electrons},MS2={mi.ms2},", f"  ORBSYM={sym},", "  ISYM=1,", "&END"]
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    v = mi.eri[i, j, k, l]
                    if abs(v) > tol:
                        out.append(f"{v: .16e} {i + 1} {j + 1} {k + 1} {l + 1}")
    for i in range(n):
        for j in range(i + 1):
            if abs(mi.h[i, j]) > tol:
                out.append(f"{mi.h[i, j]: .16e} {i + 1} {j + 1} 0 0")
    out.append(f"{mi.e_core: .16e} 0 0 0 0")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass(frozen=True)
class SpinOrbitalBasis:
    """Antisymmetrized spin-orbital Hamiltonian with a reference determinant."""

    n_spatial: int
    h: np.ndarray
    g: np.ndarray
    e_core: float
    reference_occupation: tuple[int, ...]
    ordering: str = BLOCKED

    def __post_init__(self):
        N = 2 * self.n_spatial
        if self.h.shape != (N, N) or self.g.shape != (N, N, N, N):
            raise InputError("spin-orbital arrays do not match n_spatial")
        _readonly(self.h)
        _readonly(self.g)

    @property
    def N(self) -> int:
        return 2 * self.n_spatial

    @property
    def occ(self) -> tuple[int, ...]:
        return tuple(sorted(self.reference_occupation))

    @property
    def vir(self) -> tuple[int, ...]:
        occ = set(self.reference_occupation)
        return tuple(p for p in range(self.N) if p not in occ)

    @property
    def n_alpha(self) -> int:
        return sum(1 for p in self.reference_occupation if p < self.n_spatial)

    @property
    def n_beta(self) -> int:
        return len(self.reference_occupation) - self.n_alpha

    @property
    def n_electrons(self) -> int:
        return len(self.reference_occupation)

    def spin(self, p: int) -> int:
        """0 for alpha, 1 for beta."""
        return int(p >= self.n_spatial)


def spin_orbital_eri(eri: np.ndarray) -> np.ndarray:
    """Antisymmetrized <pq||rs> in blocked spin orbitals from chemists' (pq|rs)."""
    n = eri.shape[0]
    N = 2 * n
    # <pq|rs> = (pr|qs) with spin(p)==spin(r), spin(q)==spin(s)
    phys = eri.transpose(0, 2, 1, 3)
    g = np.zeros((N, N, N, N))
    for sp in (0, 1):
        for sq in (0, 1):
            a, b = slice(sp * n, (sp + 1) * n), slice(sq * n, (sq + 1) * n)
            g[a, b, a, b] = phys
    return g - g.transpose(0, 1, 3, 2)


def aufbau_occupation(n_spatial: int, n_alpha: int, n_beta: int) -> tuple[int, ...]:
    return tuple(range(n_alpha)) + tuple(n_spatial + i for i in range(n_beta))


def to_spin_orbitals(mi: MolecularIntegrals, ordering: str = BLOCKED) -> SpinOrbitalBasis:
    """Expand spatial integrals into the antisymmetrized spin-orbital basis."""
    if ordering != BLOCKED:
        raise InputError(f"unsupported spin-orbital ordering {ordering!r}")
    if (mi.n_electrons + mi.ms2) % 2:
        raise PreconditionError(f"NELEC={mi.n_electrons} incompatible with MS2={mi.ms2}")
    n_alpha = (mi.n_electrons + mi.ms2) // 2
    n_beta = (mi.n_electrons - mi.ms2) // 2
    if n_beta < 0 or n_alpha > mi.n_spatial:
        raise PreconditionError("electron counts exceed the orbital space")
    n = mi.n_spatial
    h = np.kron(np.eye(2), mi.h)
    g = spin_orbital_eri(mi.eri)
    return SpinOrbitalBasis(n, h, g, float(mi.e_core), aufbau_occupation(n, n_alpha, n_beta), ordering)


def build_fock(basis: SpinOrbitalBasis) -> tuple[np.ndarray, float]:
    """Fock matrix and reference (Hartree-Fock) energy of the reference determinant."""
    occ = list(basis.reference_occupation)
    if not occ:
        return basis.h.copy(), basis.e_core
    # paired fancy indices give g[p, i, q, i] stacked along i
    fock = basis.h + basis.g[:, occ, :, occ].sum(axis=0)
    pair = basis.g[np.ix_(occ, occ, occ, occ)]
    e_hf = basis.e_core + basis.h[occ, occ].sum() + 0.5 * np.einsum("ijij->", pair)
    return fock, float(e_hf)


@dataclass(frozen=True)
class ActiveSpaceSpec:
    """Active spatial orbitals and the electrons distributed among them."""

    active_spatial_orbitals: tuple[int, ...]
    n_active_alpha: int
    n_active_beta: int

    def __post_init__(self):
        object.__setattr__(self, "active_spatial_orbitals", tuple(int(p) for p in self.active_spatial_orbitals))

    @property
    def n_active(self) -> int:
        return len(self.active_spatial_orbitals)

    @classmethod
    def around_fermi_level(cls, basis: SpinOrbitalBasis, n_electrons: int, n_orbitals: int) -> "ActiveSpaceSpec":
        """CAS(n_electrons, n_orbitals) centred on the HOMO-LUMO gap of a closed-shell reference."""
        if n_electrons % 2 or basis.n_alpha != basis.n_beta:
            raise PreconditionError("around_fermi_level expects even electrons and a closed-shell reference")
        first = basis.n_alpha - n_electrons // 2
        if first < 0 or first + n_orbitals > basis.n_spatial:
            raise PreconditionError(f"CAS({n_electrons},{n_orbitals}) does not fit the orbital space")
        return cls(tuple(range(first, first + n_orbitals)), n_electrons // 2, n_electrons // 2)

    def validate(self, basis: SpinOrbitalBasis) -> None:
        act = self.active_spatial_orbitals
        n = basis.n_spatial
        if len(set(act)) != len(act) or any(p < 0 or p >= n for p in act):
            raise PreconditionError("active orbitals must be distinct and within the orbital space")
        if list(act) != sorted(act):
            raise PreconditionError("active orbitals must be listed in ascending order")
        occ = set(basis.reference_occupation)
        n_a = sum(1 for p in act if p in occ)
        n_b = sum(1 for p in act if p + n in occ)
        if (n_a, n_b) != (self.n_active_alpha, self.n_active_beta):
            raise PreconditionError(
                f"reference places ({n_a}, {n_b}) electrons in the active space, "
                f"spec requests ({self.n_active_alpha}, {self.n_active_beta})"
            )
        for p in range(n):
            if p in act:
                continue
            a_occ, b_occ = p in occ, p + n in occ
            if a_occ != b_occ:
                raise PreconditionError(f"inactive orbital {p} is singly occupied")
            if a_occ and p > min(act, default=n):
                raise PreconditionError(f"occupied inactive orbital {p} lies above the active window")

    def spin_orbital_map(self, n_spatial_full: int) -> tuple[int, ...]:
        """Active blocked spin-orbital index -> full blocked spin-orbital index."""
        act = self.active_spatial_orbitals
        return tuple(act) + tuple(n_spatial_full + p for p in act)


def build_active_hamiltonian(basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec) -> tuple[SpinOrbitalBasis, float]:
    """Embed the inactive doubly occupied orbitals as a frozen mean field.

    The returned basis spans only the active orbitals; its ``e_core`` equals
    the frozen-core energy so that energies computed in it are total energies.
    """
    as_spec.validate(basis)
    n = basis.n_spatial
    smap = list(as_spec.spin_orbital_map(n))
    active = set(smap)
    frozen = [p for p in basis.reference_occupation if p not in active]
    h = basis.h[np.ix_(smap, smap)].copy()
    e_frozen = basis.e_core
    if frozen:
        h += basis.g[np.ix_(smap, frozen, smap, frozen)].diagonal(axis1=1, axis2=3).sum(axis=-1)
        pair = basis.g[np.ix_(frozen, frozen, frozen, frozen)]
        e_frozen += basis.h[frozen, frozen].sum() + 0.5 * np.einsum("ijij->", pair)
    g = basis.g[np.ix_(smap, smap, smap, smap)].copy()
    n_act = as_spec.n_active
    ref = aufbau_occupation(n_act, as_spec.n_active_alpha, as_spec.n_active_beta)
    return SpinOrbitalBasis(n_act, h, g, float(e_frozen), ref, basis.ordering), float(e_frozen)

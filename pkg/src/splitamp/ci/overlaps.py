"""Excitation-labelled overlaps <Phi_nu|Psi> in the Fermi-vacuum sign convention.

An :class:`OverlapSet` is the boundary object for externally measured data:
it holds the raw (unnormalized) reference overlap ``c0`` and one value per
canonical excitation label, optionally with a variance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..errors import InputError, PreconditionError, ReferenceDominanceError
from .determinants import (
    Determinant,
    ExcitationLabel,
    apply_excitation,
    bits_to_list,
    spin_conserving_labels,
)
from .state import CIVector, _parse_lines, _read_text

C0_THRESHOLD = 1e-6


class ActiveMap(NamedTuple):
    """Where an active-space calculation sits inside the full orbital space.

    ``spin_orbitals[p]`` is the full-space spin orbital of active spin
    orbital ``p`` (blocked order on both sides, so the map is monotone).
    """

    spin_orbitals: tuple[int, ...]
    n_spatial_full: int
    reference_full: tuple[int, ...]


def active_map_for(basis, as_spec) -> ActiveMap:
    """Build the :class:`ActiveMap` of ``as_spec`` inside ``basis``."""
    return ActiveMap(tuple(as_spec.spin_orbital_map(basis.n_spatial)), basis.n_spatial, basis.occ)


@dataclass
class OverlapSet:
    """Overlaps keyed by canonical labels; ``occ``/``vir`` span the label space."""

    n_spatial: int
    reference: Determinant
    c0: float
    entries: dict[ExcitationLabel, tuple[float, float | None]] = field(default_factory=dict)
    occ: tuple[int, ...] = ()
    vir: tuple[int, ...] = ()
    c0_variance: float | None = None

    def __post_init__(self):
        ref_occ = set(bits_to_list(self.reference.bits(self.n_spatial)))
        if not self.occ and not self.vir:
            self.occ = tuple(sorted(ref_occ))
            self.vir = tuple(p for p in range(2 * self.n_spatial) if p not in ref_occ)
        occ, vir = set(self.occ), set(self.vir)
        for lab in self.entries:
            if list(lab.occ) != sorted(set(lab.occ)) or list(lab.virt) != sorted(set(lab.virt)):
                raise InputError(f"label {lab} is not canonical")
            if len(lab.occ) != len(lab.virt) or not 1 <= len(lab.occ) <= 4:
                raise InputError(f"label {lab} has invalid rank")
            if not set(lab.occ) <= occ or not set(lab.virt) <= vir:
                raise InputError(f"label {lab} lies outside the overlap space")

    @property
    def max_rank(self) -> int:
        return max((lab.rank for lab in self.entries), default=0)

    def value(self, label: ExcitationLabel) -> float:
        v = self.entries.get(label)
        return 0.0 if v is None else v[0]

    def by_rank(self, rank: int) -> dict[ExcitationLabel, float]:
        return {lab: v for lab, (v, _) in self.entries.items() if lab.rank == rank}

    def has_variances(self) -> bool:
        return any(var is not None for _, var in self.entries.values())

    def replace(self, **kw) -> "OverlapSet":
        d = dict(n_spatial=self.n_spatial, reference=self.reference, c0=self.c0, entries=dict(self.entries),
                 occ=self.occ, vir=self.vir, c0_variance=self.c0_variance)
        d.update(kw)
        return OverlapSet(**d)

    def scaled(self, factor: float) -> "OverlapSet":
        ent = {lab: (v * factor, var) for lab, (v, var) in self.entries.items()}
        return self.replace(c0=self.c0 * factor, entries=ent)

    def to_civector(self) -> CIVector:
        """Re-synthesize the CI vector in this set's orbital numbering."""
        ref_bits = self.reference.bits(self.n_spatial)
        dets = [self.reference]
        coef = [self.c0]
        for lab, (v, _) in sorted(self.entries.items()):
            sign, bits = apply_excitation(ref_bits, lab)
            if sign == 0:
                raise PreconditionError(f"label {lab} is incompatible with the reference")
            dets.append(Determinant.from_bits(bits, self.n_spatial))
            coef.append(sign * v)
        return CIVector(self.n_spatial, dets, np.array(coef, dtype=float), self.reference)

    # -- serialization -------------------------------------------------
    def to_jsonl(self, path: str | Path | None = None) -> str:
        head = {
            "kind": "OverlapSet",
            "n_spatial": self.n_spatial,
            "reference": {"alpha_occ": self.reference.alpha_occ(), "beta_occ": self.reference.beta_occ()},
            "occ": list(self.occ),
            "vir": list(self.vir),
        }
        lines = [json.dumps(head), json.dumps(_record(ExcitationLabel((), ()), self.c0, self.c0_variance))]
        for lab in sorted(self.entries, key=lambda l: (l.rank, l)):
            v, var = self.entries[lab]
            lines.append(json.dumps(_record(lab, v, var)))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_jsonl(cls, source: str | Path) -> "OverlapSet":
        records = _parse_lines(_read_text(source))
        head = records[0]
        if head.get("kind") != "OverlapSet":
            raise InputError("not an OverlapSet file")
        try:
            n = int(head["n_spatial"])
            ref = Determinant.from_occupation(head["reference"]["alpha_occ"], head["reference"]["beta_occ"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError("malformed OverlapSet header") from exc
        c0, c0_var, entries = None, None, {}
        for r in records[1:]:
            lab, val, var = _parse_record(r, "value")
            if lab.rank == 0:
                c0, c0_var = val, var
            else:
                if lab in entries:
                    raise InputError(f"duplicate label {lab}")
                entries[lab] = (val, var)
        if c0 is None:
            raise InputError("OverlapSet file lacks the rank-0 (reference) record")
        return cls(n, ref, c0, entries, tuple(head.get("occ", ())), tuple(head.get("vir", ())), c0_var)


def _record(lab: ExcitationLabel, value: float, variance, key: str = "value") -> dict:
    value = complex(value)
    return {"rank": lab.rank, "occ": list(lab.occ), "virt": list(lab.virt),
            f"{key}_re": value.real, f"{key}_im": value.imag, "variance": variance}


def _parse_record(r: dict, key: str):
    try:
        occ = tuple(int(i) for i in r["occ"])
        virt = tuple(int(a) for a in r["virt"])
        re = float(r[f"{key}_re"])
        im = float(r.get(f"{key}_im", 0.0) or 0.0)
        var = r.get("variance")
        var = None if var is None else float(var)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed record {r}") from exc
    if int(r.get("rank", len(occ))) != len(occ) or len(occ) != len(virt):
        raise InputError(f"inconsistent rank in record {r}")
    if im != 0.0:
        raise InputError("complex overlap values must be phase-aligned before use")
    if var is not None and var < 0:
        raise InputError("negative variance")
    return ExcitationLabel(occ, virt), re, var


def extract_overlaps(state: CIVector, max_rank: int, active_map: ActiveMap | None = None,
                     c0_threshold: float = C0_THRESHOLD) -> OverlapSet:
    """Overlaps ``<E_label Phi_0|Psi>`` for every spin-conserving label up to ``max_rank``.

    Values are the raw coefficients times the excitation phase; ``c0`` is
    not normalized.  With ``active_map`` the labels are renumbered into the
    full orbital space.
    """
    if not 0 <= max_rank <= 4:
        raise InputError("max_rank must lie in [0, 4]")
    if not state.is_real:
        raise PreconditionError("state is complex; apply phase_align first")
    coef = np.real(state.coefficients)
    n = state.n_spatial
    ref = state.reference
    c0 = float(coef[state.index[ref]]) if ref in state.index else 0.0
    if abs(c0) < c0_threshold:
        raise ReferenceDominanceError(
            f"|c0| = {abs(c0):.3e} is below {c0_threshold:g}; the reference does not dominate")
    ref_bits = ref.bits(n)
    occ = bits_to_list(ref_bits)
    vir = [p for p in range(2 * n) if not (ref_bits >> p) & 1]
    lookup = {d.bits(n): float(c) for d, c in zip(state.basis, coef)}
    entries = {}
    for rank in range(1, max_rank + 1):
        for lab in spin_conserving_labels(occ, vir, n, rank):
            sign, bits = apply_excitation(ref_bits, lab)
            entries[lab] = (sign * lookup.get(bits, 0.0), None)
    if active_map is None:
        return OverlapSet(n, ref, c0, entries, tuple(occ), tuple(vir))
    m = active_map.spin_orbitals
    if len(m) != 2 * n or list(m) != sorted(m):
        raise InputError("active map must be a monotone map of all active spin orbitals")
    mapped = {ExcitationLabel(tuple(m[i] for i in lab.occ), tuple(m[a] for a in lab.virt)): v
              for lab, v in entries.items()}
    full_ref = Determinant.from_bits(sum(1 << p for p in active_map.reference_full), active_map.n_spatial_full)
    mapped_occ = {m[i] for i in occ}
    if not mapped_occ <= set(active_map.reference_full):
        raise PreconditionError("active reference is not part of the full reference")
    return OverlapSet(active_map.n_spatial_full, full_ref, c0, mapped,
                      tuple(m[i] for i in occ), tuple(m[a] for a in vir))

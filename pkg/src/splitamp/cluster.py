"""Cluster analysis: conversion between CI overlaps and cluster amplitudes.

Amplitudes of rank ``r`` are stored per canonical label (occupied and
virtual spin orbitals strictly ascending).  Ranks 1 and 2 are kept as dense
antisymmetric tensors over the amplitude space's occupied/virtual lists,
ranks 3 and 4 as sparse maps.

The coefficient of ``E_I^A`` in ``exp(T)`` is a sum over partitions of the
label into blocks ``(I_m, A_m)`` with ``|I_m| = |A_m|``; each term is the
product of block amplitudes times the parity of sorting the concatenated
occupied and virtual blocks.  ``ci_to_cc`` peels off the multi-block terms
rank by rank; ``cc_to_ci`` sums all of them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .ci.determinants import Determinant, ExcitationLabel, spin_conserving_labels
from .ci.overlaps import C0_THRESHOLD, OverlapSet, _parse_lines, _read_text, _record
from .ci.state import CIVector
from .errors import InputError, PreconditionError, ReferenceDominanceError


def parity(perm) -> int:
    """Sign of a permutation given as a sequence of distinct sortable items."""
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def partition_terms(rank: int) -> tuple[tuple[int, tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]], ...]:
    """All block partitions of a rank-``rank`` label as ``(sign, blocks)``.

    Each block is ``(occ_positions, vir_positions)`` with both tuples sorted.
    Rank 4 has 131 terms.
    """
    terms = []

    def rec(occ_left, vir_left, blocks):
        if not occ_left:
            o = [p for b in blocks for p in b[0]]
            v = [p for b in blocks for p in b[1]]
            terms.append((parity(o) * parity(v), tuple(blocks)))
            return
        first, rest = occ_left[0], occ_left[1:]
        for size in range(1, len(occ_left) + 1):
            for others in combinations(rest, size - 1):
                bo = (first,) + others
                for bv in combinations(vir_left, size):
                    rec([p for p in rest if p not in others], [p for p in vir_left if p not in bv],
                        blocks + [(bo, bv)])

    rec(list(range(rank)), list(range(rank)), [])
    terms.sort(key=lambda t: len(t[1]))
    return tuple(terms)


@dataclass
class AmplitudeSet:
    """Cluster amplitudes over occupied list ``occ`` and virtual list ``vir``.

    ``t1[i, a]`` and ``t2[i, j, a, b]`` are indexed by positions in ``occ`` /
    ``vir``; ``t3``/``t4`` map canonical labels (spin-orbital indices) to
    values.  ``frozen1``/``frozen2`` mark amplitudes a solver must not update.
    """

    n_spatial: int
    occ: tuple[int, ...]
    vir: tuple[int, ...]
    t1: np.ndarray
    t2: np.ndarray
    t3: dict = field(default_factory=dict)
    t4: dict = field(default_factory=dict)
    frozen1: np.ndarray | None = None
    frozen2: np.ndarray | None = None
    reference: tuple[int, ...] | None = None

    def __post_init__(self):
        self.occ, self.vir = tuple(self.occ), tuple(self.vir)
        o, v = len(self.occ), len(self.vir)
        self.t1 = np.asarray(self.t1, dtype=float)
        self.t2 = np.asarray(self.t2, dtype=float)
        if self.t1.shape != (o, v) or self.t2.shape != (o, o, v, v):
            raise InputError("amplitude tensor shapes do not match the orbital space")
        if self.frozen1 is None:
            self.frozen1 = np.zeros((o, v), dtype=bool)
        if self.frozen2 is None:
            self.frozen2 = np.zeros((o, o, v, v), dtype=bool)
        if self.reference is None:
            self.reference = self.occ
        self.reference = tuple(sorted(self.reference))

    @classmethod
    def zeros(cls, n_spatial: int, occ, vir, reference=None) -> "AmplitudeSet":
        o, v = len(occ), len(vir)
        return cls(n_spatial, tuple(occ), tuple(vir), np.zeros((o, v)), np.zeros((o, o, v, v)), reference=reference)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.occ), len(self.vir)

    def copy(self) -> "AmplitudeSet":
        return AmplitudeSet(self.n_spatial, self.occ, self.vir, self.t1.copy(), self.t2.copy(), dict(self.t3),
                            dict(self.t4), self.frozen1.copy(), self.frozen2.copy(), self.reference)

    def sparse(self, rank: int) -> dict:
        return {3: self.t3, 4: self.t4}[rank]

    def canonical(self, rank: int) -> dict[ExcitationLabel, float]:
        """Nonzero canonical entries of one rank keyed by spin-orbital labels."""
        if rank >= 3:
            return {lab: v for lab, v in self.sparse(rank).items() if v != 0.0}
        occ, vir = np.array(self.occ), np.array(self.vir)
        if rank == 1:
            ii, aa = np.nonzero(self.t1)
            return {ExcitationLabel((int(occ[i]),), (int(vir[a]),)): float(self.t1[i, a]) for i, a in zip(ii, aa)}
        ii, jj, aa, bb = np.nonzero(self.t2)
        keep = (ii < jj) & (aa < bb)
        return {ExcitationLabel((int(occ[i]), int(occ[j])), (int(vir[a]), int(vir[b]))): float(self.t2[i, j, a, b])
                for i, j, a, b in zip(ii[keep], jj[keep], aa[keep], bb[keep])}

    def is_antisymmetric(self, tol: float = 1e-14) -> bool:
        t2 = self.t2
        return bool(np.allclose(t2, -t2.transpose(1, 0, 2, 3), atol=tol)
                    and np.allclose(t2, -t2.transpose(0, 1, 3, 2), atol=tol))

    # -- serialization -------------------------------------------------
    def to_jsonl(self, path: str | Path | None = None) -> str:
        head = {"kind": "AmplitudeSet", "n_spatial": self.n_spatial, "occ": list(self.occ),
                "vir": list(self.vir), "reference": list(self.reference)}
        lines = [json.dumps(head)]
        opos = {p: k for k, p in enumerate(self.occ)}
        vpos = {p: k for k, p in enumerate(self.vir)}
        frozen = self.frozen_labels()
        labels = {}
        for r in (1, 2, 3, 4):
            labels.update(self.canonical(r))
        for lab in frozen:
            labels.setdefault(lab, self._dense_value(lab, opos, vpos))
        for lab in sorted(labels, key=lambda l: (l.rank, l)):
            rec = _record(lab, labels[lab], None, key="t")
            if lab.rank <= 2:
                rec["frozen"] = lab in frozen
            lines.append(json.dumps(rec))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def _dense_value(self, lab, opos, vpos) -> float:
        idx = tuple(opos[i] for i in lab.occ) + tuple(vpos[a] for a in lab.virt)
        return float((self.t1 if lab.rank == 1 else self.t2)[idx])

    def frozen_labels(self) -> set:
        occ, vir = np.array(self.occ), np.array(self.vir)
        out = {ExcitationLabel((int(occ[i]),), (int(vir[a]),)) for i, a in zip(*np.nonzero(self.frozen1))}
        for i, j, a, b in zip(*np.nonzero(self.frozen2)):
            if i < j and a < b:
                out.add(ExcitationLabel((int(occ[i]), int(occ[j])), (int(vir[a]), int(vir[b]))))
        return out

    @classmethod
    def from_jsonl(cls, source: str | Path) -> "AmplitudeSet":
        records = _parse_lines(_read_text(source))
        head = records[0]
        if head.get("kind") != "AmplitudeSet":
            raise InputError("not an AmplitudeSet file")
        try:
            amps = cls.zeros(int(head["n_spatial"]), head["occ"], head["vir"], head.get("reference"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError("malformed AmplitudeSet header") from exc
        from .ci.overlaps import _parse_record

        values, frozen = {}, set()
        for r in records[1:]:
            lab, val, _ = _parse_record(r, "t")
            if lab.rank == 0:
                continue
            values[lab] = val
            if r.get("frozen"):
                frozen.add(lab)
        _fill(amps, values, frozen)
        return amps


def _fill(amps: AmplitudeSet, values: dict, frozen=()) -> None:
    """Write canonical label values into ``amps`` (dense ranks antisymmetrized)."""
    opos = {p: k for k, p in enumerate(amps.occ)}
    vpos = {p: k for k, p in enumerate(amps.vir)}
    for lab, val in values.items():
        try:
            o = [opos[i] for i in lab.occ]
            v = [vpos[a] for a in lab.virt]
        except KeyError as exc:
            raise InputError(f"label {lab} lies outside the amplitude space") from exc
        if lab.rank == 1:
            amps.t1[o[0], v[0]] = val
            if lab in frozen:
                amps.frozen1[o[0], v[0]] = True
        elif lab.rank == 2:
            _set_t2(amps.t2, o, v, val)
            if lab in frozen:
                _set_t2(amps.frozen2, o, v, True)
        else:
            amps.sparse(lab.rank)[lab] = val


def _set_t2(t2, o, v, val):
    i, j = o
    a, b = v
    t2[i, j, a, b] = val
    t2[j, i, b, a] = val
    if t2.dtype == bool:
        t2[j, i, a, b] = t2[i, j, b, a] = val
    else:
        t2[j, i, a, b] = -val
        t2[i, j, b, a] = -val


class _LabelTable:
    """Canonical labels of one rank as position arrays with sortable integer keys."""

    def __init__(self, labels, opos, vpos):
        r = len(labels[0].occ) if labels else 0
        self.rank = r
        self.labels = list(labels)
        self.O = np.array([[opos[i] for i in lab.occ] for lab in labels], dtype=np.int64).reshape(-1, r)
        self.V = np.array([[vpos[a] for a in lab.virt] for lab in labels], dtype=np.int64).reshape(-1, r)


class _Store:
    """Amplitude lookup by position arrays across ranks (dense 1/2, sparse 3/4)."""

    def __init__(self, o, v):
        self.o, self.v = o, v
        self.t1 = np.zeros((o, v))
        self.t2 = np.zeros((o, o, v, v))
        self.sparse = {}

    def _key(self, O, V):
        key = np.zeros(O.shape[0], dtype=np.int64)
        for c in range(O.shape[1]):
            key = key * self.o + O[:, c]
        for c in range(V.shape[1]):
            key = key * self.v + V[:, c]
        return key

    def set_rank(self, rank, O, V, values):
        if rank == 1:
            self.t1[O[:, 0], V[:, 0]] = values
        elif rank == 2:
            i, j, a, b = O[:, 0], O[:, 1], V[:, 0], V[:, 1]
            self.t2[i, j, a, b] = values
            self.t2[j, i, b, a] = values
            self.t2[j, i, a, b] = -values
            self.t2[i, j, b, a] = -values
        else:
            key = self._key(O, V)
            order = np.argsort(key)
            self.sparse[rank] = (key[order], np.asarray(values)[order])

    def get(self, O, V):
        rank = O.shape[1]
        if rank == 1:
            return self.t1[O[:, 0], V[:, 0]]
        if rank == 2:
            return self.t2[O[:, 0], O[:, 1], V[:, 0], V[:, 1]]
        keys, vals = self.sparse.get(rank, (np.empty(0, np.int64), np.empty(0)))
        if len(keys) == 0:
            return np.zeros(O.shape[0])
        q = self._key(O, V)
        pos = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
        return np.where(keys[pos] == q, vals[pos], 0.0)


def _product_sum(store: _Store, O, V, rank, multi_only: bool) -> np.ndarray:
    total = np.zeros(O.shape[0])
    for sign, blocks in partition_terms(rank):
        if multi_only and len(blocks) == 1:
            continue
        prod = np.full(O.shape[0], float(sign))
        for bo, bv in blocks:
            prod *= store.get(O[:, list(bo)], V[:, list(bv)])
            if not prod.any():
                break
        total += prod
    return total


def _label_space(occ, vir, n_spatial, max_rank):
    return {r: spin_conserving_labels(occ, vir, n_spatial, r) for r in range(1, max_rank + 1)}


def ci_to_cc(overlaps: OverlapSet, max_rank: int = 2, c0_threshold: float = C0_THRESHOLD) -> AmplitudeSet:
    """Cluster amplitudes up to ``max_rank`` from (intermediate-normalized) overlaps.

    Every spin-conserving label of the overlap space is produced, so a
    CISD-type input still yields the disconnected rank-3/4 products.
    """
    if not 1 <= max_rank <= 4:
        raise InputError("max_rank must lie in [1, 4]")
    if abs(overlaps.c0) < c0_threshold:
        raise ReferenceDominanceError(f"|c0| = {abs(overlaps.c0):.3e} is below {c0_threshold:g}")
    occ, vir = overlaps.occ, overlaps.vir
    o, v = len(occ), len(vir)
    opos = {p: k for k, p in enumerate(occ)}
    vpos = {p: k for k, p in enumerate(vir)}
    store = _Store(o, v)
    amps = AmplitudeSet.zeros(overlaps.n_spatial, occ, vir,
                              reference=tuple(overlaps.reference.spin_orbitals(overlaps.n_spatial)))
    for rank, labels in _label_space(occ, vir, overlaps.n_spatial, max_rank).items():
        if not labels:
            continue
        tab = _LabelTable(labels, opos, vpos)
        c = np.array([overlaps.value(lab) for lab in labels]) / overlaps.c0
        t = c - _product_sum(store, tab.O, tab.V, rank, multi_only=True)
        store.set_rank(rank, tab.O, tab.V, t)
        if rank >= 3:
            amps.sparse(rank).update({lab: float(x) for lab, x in zip(labels, t) if x != 0.0})
    amps.t1[:] = store.t1
    amps.t2[:] = store.t2
    return amps


def _store_from_amps(amps: AmplitudeSet) -> _Store:
    o, v = amps.shape
    opos = {p: k for k, p in enumerate(amps.occ)}
    vpos = {p: k for k, p in enumerate(amps.vir)}
    store = _Store(o, v)
    store.t1[:] = amps.t1
    store.t2[:] = amps.t2
    for rank in (3, 4):
        ent = amps.sparse(rank)
        if ent:
            tab = _LabelTable(list(ent), opos, vpos)
            store.set_rank(rank, tab.O, tab.V, np.array(list(ent.values())))
    return store


def cc_to_ci(amps: AmplitudeSet, max_rank: int = 2) -> OverlapSet:
    """Intermediate-normalized CI overlaps ``<E_label Phi_0|exp(T) Phi_0>``."""
    if not 1 <= max_rank <= 4:
        raise InputError("max_rank must lie in [1, 4]")
    o, v = amps.shape
    opos = {p: k for k, p in enumerate(amps.occ)}
    vpos = {p: k for k, p in enumerate(amps.vir)}
    store = _store_from_amps(amps)
    entries = {}
    for rank, labels in _label_space(amps.occ, amps.vir, amps.n_spatial, max_rank).items():
        if not labels:
            continue
        tab = _LabelTable(labels, opos, vpos)
        c = _product_sum(store, tab.O, tab.V, rank, multi_only=False)
        entries.update({lab: (float(x), None) for lab, x in zip(labels, c)})
    ref = Determinant.from_bits(sum(1 << p for p in amps.reference), amps.n_spatial)
    return OverlapSet(amps.n_spatial, ref, 1.0, entries, amps.occ, amps.vir)


def phase_align(state: CIVector) -> CIVector:
    """Rotate by the phase of the largest-magnitude coefficient, keep the real part, renormalize."""
    c = np.asarray(state.coefficients)
    if not np.any(c != 0):
        raise PreconditionError("cannot phase-align a zero vector")
    k = int(np.argmax(np.abs(c)))
    phase = c[k] / abs(c[k])
    real = np.real(c * np.conj(phase)).astype(float)
    real /= np.linalg.norm(real)
    return CIVector(state.n_spatial, state.basis, real, state.reference)


@dataclass
class FilterReport:
    n_zeroed_by_variance: int = 0
    n_dropped_disconnected: int = 0
    thresholds: dict = field(default_factory=dict)

    def merge(self, other: "FilterReport") -> "FilterReport":
        return FilterReport(self.n_zeroed_by_variance + other.n_zeroed_by_variance,
                            self.n_dropped_disconnected + other.n_dropped_disconnected,
                            {**self.thresholds, **other.thresholds})


def filter_variance(overlaps: OverlapSet, k: float = 2.0, literal: bool = False) -> tuple[OverlapSet, FilterReport]:
    """Zero overlaps not significantly different from zero (``|value| <= k*sigma``).

    With ``literal=True`` the opposite rule is applied: entries with
    ``|value| > k*sigma`` are zeroed.  Entries without a variance are kept.
    """
    if k < 0:
        raise InputError("k must be nonnegative")
    out, n = {}, 0
    for lab, (val, var) in overlaps.entries.items():
        if var is None:
            out[lab] = (val, var)
            continue
        if var < 0:
            raise InputError(f"negative variance for {lab}")
        bound = k * np.sqrt(var)
        drop = abs(val) > bound if literal else abs(val) <= bound
        if drop and val != 0.0:
            n += 1
            val = 0.0
        out[lab] = (val, var)
    return overlaps.replace(entries=out), FilterReport(n, 0, {"k": k, "literal": literal})


def drop_disconnected(amps: AmplitudeSet, overlaps: OverlapSet, ci_zero_threshold: float = 1e-12,
                      k: float = 2.0) -> tuple[AmplitudeSet, FilterReport]:
    """Remove rank-3/4 amplitudes whose CI overlap vanishes (purely disconnected).

    When an entry carries a variance the threshold is raised to
    ``max(ci_zero_threshold, k*sigma)`` for that entry.
    """
    out = amps.copy()
    dropped = 0
    for rank in (3, 4):
        keep = {}
        for lab, t in amps.sparse(rank).items():
            val, var = overlaps.entries.get(lab, (0.0, None))
            thr = ci_zero_threshold if var is None else max(ci_zero_threshold, k * np.sqrt(var))
            if abs(val) > thr:
                keep[lab] = t
            else:
                dropped += 1
        if rank == 3:
            out.t3 = keep
        else:
            out.t4 = keep
    return out, FilterReport(0, dropped, {"ci_zero_threshold": ci_zero_threshold, "k": k})


def embed_active(amps: AmplitudeSet, as_spec, full_space, freeze: bool = True) -> AmplitudeSet:
    """Place active-space amplitudes into the full-space amplitude layout.

    ``amps`` may be numbered in the active space (``n_spatial`` equal to the
    active orbital count) or already in full-space numbering.  With
    ``freeze`` the image of the active t1/t2 block is marked frozen.
    """
    as_spec.validate(full_space)
    smap = as_spec.spin_orbital_map(full_space.n_spatial)
    n_act = len(as_spec.active_spatial_orbitals)
    if amps.n_spatial == n_act and amps.n_spatial != full_space.n_spatial:
        relabel = dict(enumerate(smap))
    elif amps.n_spatial == full_space.n_spatial:
        relabel = {p: p for p in range(full_space.N)}
    else:
        raise InputError("amplitude numbering matches neither the active nor the full space")
    image = set(smap)
    out = AmplitudeSet.zeros(full_space.n_spatial, full_space.occ, full_space.vir, reference=full_space.occ)
    opos = {p: k for k, p in enumerate(out.occ)}
    vpos = {p: k for k, p in enumerate(out.vir)}

    def mapped(lab):
        new = ExcitationLabel(tuple(relabel[i] for i in lab.occ), tuple(relabel[a] for a in lab.virt))
        if not (set(new.occ) | set(new.virt)) <= image:
            raise InputError(f"label {lab} lies outside the active window")
        if not set(new.occ) <= set(opos) or not set(new.virt) <= set(vpos):
            raise PreconditionError(f"label {new} is inconsistent with the full reference")
        return new

    values = {}
    for r in (1, 2, 3, 4):
        values.update({mapped(lab): v for lab, v in amps.canonical(r).items()})
    _fill(out, values)
    if freeze:
        ao = np.array([p in image for p in out.occ])
        av = np.array([p in image for p in out.vir])
        out.frozen1 = np.outer(ao, av)
        out.frozen2 = ao[:, None, None, None] & ao[None, :, None, None] & av[None, None, :, None] & av[None, None, None, :]
        i = np.arange(len(out.occ))
        a = np.arange(len(out.vir))
        out.frozen2[i, i] = False
        out.frozen2[:, :, a, a] = False
    return out


"""Slater determinants as bit strings and Fermi-vacuum excitation labels.

A determinant over ``n`` spatial orbitals is stored as two bit masks.  Its
spin-orbital bit string is ``alpha_mask | beta_mask << n`` (blocked order) and
the canonical state is the product of creation operators in ascending
spin-orbital order acting on the true vacuum.

An excitation label ``(occ, virt)`` with both tuples ascending denotes the
operator ``a+_{a1} ... a+_{ak} a_{ik} ... a_{i1}`` acting on the reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import NamedTuple

from ..errors import PreconditionError


@dataclass(frozen=True, order=True)
class Determinant:
    alpha_mask: int
    beta_mask: int

    def bits(self, n_spatial: int) -> int:
        return self.alpha_mask | (self.beta_mask << n_spatial)

    @classmethod
    def from_bits(cls, bits: int, n_spatial: int) -> "Determinant":
        mask = (1 << n_spatial) - 1
        return cls(bits & mask, bits >> n_spatial)

    @classmethod
    def from_occupation(cls, alpha_occ, beta_occ) -> "Determinant":
        return cls(sum(1 << p for p in alpha_occ), sum(1 << p for p in beta_occ))

    @property
    def n_alpha(self) -> int:
        return self.alpha_mask.bit_count()

    @property
    def n_beta(self) -> int:
        return self.beta_mask.bit_count()

    def alpha_occ(self) -> list[int]:
        return bits_to_list(self.alpha_mask)

    def beta_occ(self) -> list[int]:
        return bits_to_list(self.beta_mask)

    def spin_orbitals(self, n_spatial: int) -> list[int]:
        return bits_to_list(self.bits(n_spatial))


class ExcitationLabel(NamedTuple):
    occ: tuple[int, ...]
    virt: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.occ)


def bits_to_list(bits: int) -> list[int]:
    out = []
    p = 0
    while bits:
        if bits & 1:
            out.append(p)
        bits >>= 1
        p += 1
    return out


def reference_determinant(n_spatial: int, n_alpha: int, n_beta: int) -> Determinant:
    return Determinant((1 << n_alpha) - 1, (1 << n_beta) - 1)


def excitation_rank(reference: Determinant, det: Determinant) -> int:
    return (reference.alpha_mask & ~det.alpha_mask).bit_count() + (reference.beta_mask & ~det.beta_mask).bit_count()


def enumerate_determinants(
    n_spatial: int,
    n_alpha: int,
    n_beta: int,
    max_rank: int | None = None,
    reference: Determinant | None = None,
) -> list[Determinant]:
    """All determinants with the given electron counts, optionally rank-truncated."""
    if n_alpha > n_spatial or n_beta > n_spatial or min(n_alpha, n_beta) < 0:
        raise PreconditionError("electron counts exceed the orbital space")
    if max_rank is not None and reference is None:
        raise PreconditionError("max_rank requires a reference determinant")
    alphas = [sum(1 << p for p in c) for c in combinations(range(n_spatial), n_alpha)]
    betas = [sum(1 << p for p in c) for c in combinations(range(n_spatial), n_beta)]
    dets = [Determinant(a, b) for a in alphas for b in betas]
    if max_rank is not None:
        dets = [d for d in dets if excitation_rank(reference, d) <= max_rank]
    return dets


def count_determinants(n_spatial: int, n_alpha: int, n_beta: int) -> int:
    return comb(n_spatial, n_alpha) * comb(n_spatial, n_beta)


def _annihilate(bits: int, p: int) -> tuple[int, int]:
    if not (bits >> p) & 1:
        return 0, bits
    sign = -1 if (bits & ((1 << p) - 1)).bit_count() & 1 else 1
    return sign, bits ^ (1 << p)


def _create(bits: int, p: int) -> tuple[int, int]:
    if (bits >> p) & 1:
        return 0, bits
    sign = -1 if (bits & ((1 << p) - 1)).bit_count() & 1 else 1
    return sign, bits | (1 << p)


def apply_excitation(bits: int, label: ExcitationLabel) -> tuple[int, int]:
    """Apply the label's operator string to a canonical determinant.

    Returns ``(sign, new_bits)``; ``sign`` is 0 if the operator annihilates
    the state.
    """
    sign = 1
    for i in label.occ:
        s, bits = _annihilate(bits, i)
        sign *= s
        if not sign:
            return 0, bits
    for a in reversed(label.virt):
        s, bits = _create(bits, a)
        sign *= s
        if not sign:
            return 0, bits
    return sign, bits


def excitation_phase(reference: Determinant, label: ExcitationLabel, n_spatial: int) -> int:
    """Phase between the excited canonical determinant and ``E_label |reference>``."""
    ref_bits = reference.bits(n_spatial)
    occ_set = set(bits_to_list(ref_bits))
    if any(i not in occ_set for i in label.occ):
        raise PreconditionError(f"label {label} annihilates an unoccupied orbital")
    if any(a in occ_set for a in label.virt):
        raise PreconditionError(f"label {label} creates into an occupied orbital")
    if len(set(label.occ)) != len(label.occ) or len(set(label.virt)) != len(label.virt):
        raise PreconditionError(f"label {label} repeats an orbital")
    sign, _ = apply_excitation(ref_bits, label)
    return sign


def excitation_label(reference: Determinant, det: Determinant, n_spatial: int) -> ExcitationLabel:
    ref_bits = reference.bits(n_spatial)
    bits = det.bits(n_spatial)
    return ExcitationLabel(tuple(bits_to_list(ref_bits & ~bits)), tuple(bits_to_list(bits & ~ref_bits)))


def spin_conserving_labels(occ, vir, n_spatial: int, rank: int) -> list[ExcitationLabel]:
    """Canonical labels of one rank that conserve the number of alpha electrons.

    ``occ``/``vir`` are spin-orbital indices in blocked numbering over
    ``n_spatial`` spatial orbitals.
    """
    occ = sorted(occ)
    vir = sorted(vir)
    occ_a = [p for p in occ if p < n_spatial]
    occ_b = [p for p in occ if p >= n_spatial]
    vir_a = [p for p in vir if p < n_spatial]
    vir_b = [p for p in vir if p >= n_spatial]
    labels = []
    for na in range(rank + 1):
        nb = rank - na
        for ia in combinations(occ_a, na):
            for ib in combinations(occ_b, nb):
                for aa in combinations(vir_a, na):
                    for ab in combinations(vir_b, nb):
                        labels.append(ExcitationLabel(ia + ib, aa + ab))
    labels.sort()
    return labels

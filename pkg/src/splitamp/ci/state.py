"""CI vectors over explicit determinant lists and their JSONL form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError, PreconditionError
from .determinants import Determinant, bits_to_list


@dataclass
class CIVector:
    """Coefficients over a determinant basis, relative to a reference."""

    n_spatial: int
    basis: list[Determinant]
    coefficients: np.ndarray
    reference: Determinant
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.basis = list(self.basis)
        self.coefficients = np.asarray(self.coefficients)
        if self.coefficients.shape != (len(self.basis),):
            raise InputError("coefficient count does not match the determinant basis")
        if len(set(self.basis)) != len(self.basis):
            raise InputError("determinant basis contains duplicates")

    @property
    def index(self) -> dict[Determinant, int]:
        if self._index is None:
            self._index = {d: k for k, d in enumerate(self.basis)}
        return self._index

    def coefficient(self, det: Determinant) -> complex | float:
        k = self.index.get(det)
        return 0.0 if k is None else self.coefficients[k]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def normalized(self) -> "CIVector":
        nrm = self.norm
        if nrm == 0.0:
            raise PreconditionError("cannot normalize a zero vector")
        return CIVector(self.n_spatial, self.basis, self.coefficients / nrm, self.reference)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coefficients) or bool(np.all(self.coefficients.imag == 0))

    def bits(self) -> np.ndarray:
        return np.array([d.bits(self.n_spatial) for d in self.basis], dtype=np.uint64)

    def to_jsonl(self, path: str | Path | None = None) -> str:
        head = {
            "kind": "CIVector",
            "n_spatial": self.n_spatial,
            "reference": {"alpha_occ": self.reference.alpha_occ(), "beta_occ": self.reference.beta_occ()},
        }
        lines = [json.dumps(head)]
        for d, c in zip(self.basis, self.coefficients):
            c = complex(c)
            lines.append(json.dumps({
                "alpha_occ": d.alpha_occ(), "beta_occ": d.beta_occ(),
                "value_re": c.real, "value_im": c.imag, "variance": None,
            }))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_jsonl(cls, source: str | Path) -> "CIVector":
        text = _read_text(source)
        records = _parse_lines(text)
        head, body = records[0], records[1:]
        if head.get("kind") != "CIVector":
            raise InputError("not a CIVector file")
        ref = Determinant.from_occupation(head["reference"]["alpha_occ"], head["reference"]["beta_occ"])
        dets, vals = [], []
        for r in body:
            try:
                dets.append(Determinant.from_occupation(r["alpha_occ"], r["beta_occ"]))
                vals.append(complex(r["value_re"], r.get("value_im", 0.0) or 0.0))
            except (KeyError, TypeError) as exc:
                raise InputError(f"bad CIVector record {r}") from exc
        coef = np.array(vals, dtype=complex)
        if np.all(coef.imag == 0):
            coef = coef.real.copy()
        return cls(int(head["n_spatial"]), dets, coef, ref)


def _read_text(source) -> str:
    if isinstance(source, Path) or (isinstance(source, str) and source and "\n" not in source
                                    and Path(source).is_file()):
        try:
            return Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc}") from exc
    return str(source)


def _parse_lines(text: str) -> list[dict]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"line {n}: invalid JSON ({exc.msg})") from exc
    if not out:
        raise InputError("empty JSONL input")
    return out


def reference_from_occupation(occupation, n_spatial: int) -> Determinant:
    bits = sum(1 << p for p in occupation)
    return Determinant.from_bits(bits, n_spatial)


def occupation_of(det: Determinant, n_spatial: int) -> list[int]:
    return bits_to_list(det.bits(n_spatial))

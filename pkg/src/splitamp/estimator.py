"""Overlap counting, power-law noise-error model and shot budgets.

The TCCSD energy error under overlap noise of standard deviation sigma is
modelled as ``a * d**beta * N**gamma * sigma`` with ``d`` the number of
overlaps and ``N`` the number of spin orbitals.  Combined with the
half-filling variance bound ``sigma**2 = sqrt(2n)/s`` this gives the shot
budget ``s = a**2 / dE**2 * d**(2 beta) * N**(2 gamma) * sqrt(2n)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import InputError, PreconditionError

BETA, BETA_ERR = 0.277, 0.054
GAMMA, GAMMA_ERR = -1.074, 0.116
T1_SLOPE, T1_INTERCEPT = 375.9, -0.84
PREFACTOR_FLOOR = 0.1


def overlaps_per_rank(n_spatial: int, n_electrons_spin: int, rank: int) -> int:
    """Determinants of one spin at excitation ``rank``: C(zeta, rank) * C(n - zeta, rank)."""
    return comb(n_electrons_spin, rank) * comb(n_spatial - n_electrons_spin, rank)


def count_overlaps(n_spatial_active: int, n_alpha: int, n_beta: int, method: str = "tccsd") -> int:
    """Number of overlaps (including the reference) consumed by TCCSD or ec-CC."""
    if max(n_alpha, n_beta) > n_spatial_active or min(n_alpha, n_beta) < 0:
        raise InputError("electron counts exceed the active orbital count")
    def da(r):
        return overlaps_per_rank(n_spatial_active, n_alpha, r)

    def db(r):
        return overlaps_per_rank(n_spatial_active, n_beta, r)

    if method == "tccsd":
        return 1 + da(1) + db(1) + da(2) + db(2) + da(1) * db(1)
    if method == "eccc":
        return sum(da(ra) * db(rb) for ra in range(5) for rb in range(5 - ra))
    raise InputError(f"unknown method {method!r}; use 'tccsd' or 'eccc'")


def prefactor_from_t1diag(t1_diag: float, slope: float = T1_SLOPE, intercept: float = T1_INTERCEPT,
                          floor: float = PREFACTOR_FLOOR) -> float:
    if t1_diag < 0:
        raise InputError("t1_diag must be nonnegative")
    return max(slope * t1_diag + intercept, floor)


@dataclass
class PowerLawModel:
    beta: float = BETA
    gamma: float = GAMMA
    beta_err: float = BETA_ERR
    gamma_err: float = GAMMA_ERR
    a: float | None = None
    a_err: float | None = None
    per_label_prefactors: dict = field(default_factory=dict)
    n_boot: int = 0

    def __post_init__(self):
        if self.beta_err < 0 or self.gamma_err < 0:
            raise InputError("exponent errors must be nonnegative")


def predict_error(a: float, d: float, N: float, sigma: float, model: PowerLawModel | None = None) -> float:
    model = model or PowerLawModel()
    return a * d ** model.beta * N ** model.gamma * sigma


@dataclass(frozen=True)
class ShotBudgetQuery:
    t1_diag: float
    target_error: float
    d: int
    N: int
    n: int
    assume_half_filling: bool = True

    def __post_init__(self):
        if not self.target_error > 0:
            raise InputError("target_error must be positive")
        if min(self.d, self.N, self.n) < 1:
            raise InputError("d, N and n must be positive")
        if self.assume_half_filling and self.n % 2:
            raise InputError("half filling requires an even qubit count")


@dataclass(frozen=True)
class ShotBudget:
    s: int
    s_low: int
    s_high: int
    s_exact: float
    a: float


def _budget(a, target, d, N, n, beta, gamma) -> float:
    return a ** 2 / target ** 2 * d ** (2 * beta) * N ** (2 * gamma) * math.sqrt(2 * n)


def shot_budget(query: ShotBudgetQuery, model: PowerLawModel | None = None) -> ShotBudget:
    """Shots needed for ``query.target_error`` at half filling.

    ``s_low``/``s_high`` use both exponents shifted down/up by their errors.
    """
    if not query.assume_half_filling:
        raise PreconditionError("shot budgets are only available at half filling")
    model = model or PowerLawModel()
    a = prefactor_from_t1diag(query.t1_diag)
    args = (a, query.target_error, query.d, query.N, query.n)
    s = _budget(*args, model.beta, model.gamma)
    lo = _budget(*args, model.beta - model.beta_err, model.gamma - model.gamma_err)
    hi = _budget(*args, model.beta + model.beta_err, model.gamma + model.gamma_err)
    return ShotBudget(math.ceil(s), math.ceil(lo), math.ceil(hi), s, a)


def total_curve_budget(t1_diags, d: int, N: int, n: int, target_error: float,
                       model: PowerLawModel | None = None) -> tuple[list[ShotBudget], int]:
    rows = [shot_budget(ShotBudgetQuery(t, target_error, d, N, n), model) for t in t1_diags]
    return rows, sum(r.s for r in rows)


@dataclass
class PowerLawRecord:
    label: str
    d: float
    N: float
    sigma: float
    mean_abs_error: float


def _design(records):
    d = np.array([r.d for r in records], float)
    N = np.array([r.N for r in records], float)
    s = np.array([r.sigma for r in records], float)
    e = np.array([r.mean_abs_error for r in records], float)
    if np.any(d <= 0) or np.any(N <= 0) or np.any(s <= 0) or np.any(e <= 0):
        raise InputError("power-law records must be strictly positive")
    X = np.column_stack([np.ones_like(d), np.log(d), np.log(N)])
    return X, np.log(e / s)


def fit_prefactors(records, beta: float, gamma: float) -> dict[str, float]:
    """Per-label ``a`` with exponents fixed (geometric mean of the scaled errors)."""
    X, y = _design(records)
    resid = y - beta * X[:, 1] - gamma * X[:, 2]
    labels = np.array([r.label for r in records])
    return {lab: float(np.exp(resid[labels == lab].mean())) for lab in dict.fromkeys(labels)}


def fit_power_law(records, n_boot: int = 50_000, seed: int = 0, chunk: int = 2_000) -> PowerLawModel:
    """Global log-log least squares for (a, beta, gamma) with bootstrap errors.

    Per-label prefactors are then refit with the exponents fixed.
    """
    records = [r if isinstance(r, PowerLawRecord) else PowerLawRecord(*r) for r in records]
    X, y = _design(records)
    if len(np.unique(X[:, 1])) < 2 or len(np.unique(X[:, 2])) < 2 or np.linalg.matrix_rank(X) < 3:
        raise PreconditionError("need at least two distinct d and N values (degenerate design)")
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    errs = np.zeros(3)
    if n_boot > 0:
        from .noise import sample_generator

        rng = sample_generator(seed)
        n = len(y)
        samples = []
        for start in range(0, n_boot, chunk):
            m = min(chunk, n_boot - start)
            idx = rng.integers(0, n, size=(m, n))
            Xb, yb = X[idx], y[idx]
            XtX = np.einsum("bni,bnj->bij", Xb, Xb)
            Xty = np.einsum("bni,bn->bi", Xb, yb)
            ok = np.abs(np.linalg.det(XtX)) > 1e-12
            samples.append(np.linalg.solve(XtX[ok], Xty[ok][..., None])[..., 0])
        samples = np.concatenate(samples)
        errs = samples.std(axis=0, ddof=1) if len(samples) > 1 else errs
    a = float(np.exp(coef[0]))
    per = fit_prefactors(records, coef[1], coef[2])
    return PowerLawModel(float(coef[1]), float(coef[2]), float(errs[1]), float(errs[2]), a,
                         float(a * errs[0]), per, n_boot)


_ALIASES = {
    "label": ("label", "molecule", "system", "name"),
    "d": ("d", "n_overlaps", "num_overlaps", "overlaps"),
    "N": ("N", "n_spin_orbitals", "spin_orbitals", "nso"),
    "sigma": ("sigma", "noise", "std"),
    "mean_abs_error": ("mean_abs_error", "mean_abs_error_hartree", "error", "abs_error", "delta_e"),
}


def read_power_law_csv(source) -> list[PowerLawRecord]:
    """Read (label, d, N, sigma, mean_abs_error) rows; common column aliases accepted."""
    text = Path(source).read_text() if not hasattr(source, "read") else source.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise InputError("empty power-law dataset")
    cols = {}
    header = {h.strip(): h for h in rows[0].keys()}
    lower = {h.lower(): h for h in header}
    for key, names in _ALIASES.items():
        for nm in names:
            if nm in header or nm.lower() in lower:
                cols[key] = header.get(nm) or lower[nm.lower()]
                break
        else:
            raise InputError(f"dataset lacks a {key!r} column (have {list(header)})")
    out = []
    for k, r in enumerate(rows, 2):
        try:
            out.append(PowerLawRecord(r[cols["label"]], float(r[cols["d"]]), float(r[cols["N"]]),
                                      float(r[cols["sigma"]]), float(r[cols["mean_abs_error"]])))
        except (TypeError, ValueError) as exc:
            raise InputError(f"row {k}: {exc}") from exc
    return out

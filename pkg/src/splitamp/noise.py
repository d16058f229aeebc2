"""Gaussian shot-noise model for shadow-estimated overlaps and noise-response studies.

Overlaps estimated from ``s`` matchgate-shadow shots on ``n`` qubits at
half filling are modelled as independent Gaussians with variance
``sqrt(2 n) / s``.  Random draws use a Philox counter-based generator; the
stream for sample ``k`` of a study with seed ``seed`` is
``SeedSequence(seed, spawn_key=(k,))``, so results do not depend on how
samples are scheduled.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .cc import SolverConfig
from .ci.overlaps import OverlapSet
from .errors import InputError, PreconditionError, SplitAmpError
from .integrals import ActiveSpaceSpec, SpinOrbitalBasis

log = logging.getLogger(__name__)


def variance_from_shots(n_qubits: int, shots: int, half_filling: bool = True) -> float:
    """Overlap variance bound ``sqrt(2n)/s`` (half filling only)."""
    if not half_filling:
        raise PreconditionError(
            "only the half-filling variance bound is available; the general bound b(n, zeta) "
            "must be evaluated with the shadow protocol itself")
    if n_qubits < 1 or shots < 1:
        raise InputError("n_qubits and shots must be positive")
    return float(np.sqrt(2.0 * n_qubits) / shots)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float | None = None
    n_qubits: int | None = None
    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        by_sigma = self.sigma is not None
        by_shots = self.n_qubits is not None or self.shots is not None
        if by_sigma == by_shots:
            raise InputError("give exactly one of sigma or (n_qubits, shots)")
        if by_shots and (self.n_qubits is None or self.shots is None):
            raise InputError("n_qubits and shots must be given together")
        if by_sigma and self.sigma < 0:
            raise InputError("sigma must be nonnegative")

    @property
    def std(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        return float(np.sqrt(variance_from_shots(self.n_qubits, self.shots)))


def sample_generator(seed: int, sample_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(sample_index,))))


def perturb_overlaps(overlaps: OverlapSet, spec: NoiseSpec, sample_index: int = 0) -> OverlapSet:
    """Add independent Normal(0, sigma^2) noise to c0 and every entry.

    Draw order: c0 first, then entries sorted by (rank, label).
    """
    sigma = spec.std
    if sigma == 0.0:
        return overlaps.replace()
    rng = sample_generator(spec.seed, sample_index)
    labels = sorted(overlaps.entries, key=lambda l: (l.rank, l))
    draws = rng.normal(0.0, sigma, size=len(labels) + 1)
    var = sigma * sigma
    entries = {lab: (overlaps.entries[lab][0] + float(x), var) for lab, x in zip(labels, draws[1:])}
    return overlaps.replace(c0=overlaps.c0 + float(draws[0]), entries=entries, c0_variance=var)


@dataclass
class NoisePoint:
    sigma: float
    mean_abs_error: float
    n_samples: int
    n_nonconverged: int
    errors: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


@dataclass
class NoiseStudyResult:
    sigma_grid: list
    mean_abs_error: list
    sample_count: int
    n_nonconverged: list
    beta_sigma: float | None = None
    beta_sigma_err: float | None = None
    points: list = field(default_factory=list, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "mean_abs_error_hartree", "n_samples", "n_nonconverged"])
        for s, e, k in zip(self.sigma_grid, self.mean_abs_error, self.n_nonconverged):
            w.writerow([f"{s:.12g}", f"{e:.12g}", self.sample_count, k])
        return buf.getvalue()


def _run_workflow(workflow: str, basis, as_spec, overlaps, config, type2, k):
    from . import workflows

    if workflow == "tccsd":
        return workflows.tccsd(basis, as_spec, config, overlaps=overlaps)
    if workflow == "eccc":
        return workflows.eccc(basis, as_spec, config, overlaps=overlaps, type2=type2, k=k)[0]
    raise InputError(f"unknown workflow {workflow!r}")


def sample_energy_error(workflow: str, exact_overlaps: OverlapSet, basis: SpinOrbitalBasis,
                        as_spec: ActiveSpaceSpec, sigma: float, n_samples: int, seed: int = 0,
                        config: SolverConfig | None = None, type2: bool = True, k: float = 2.0,
                        e_clean: float | None = None) -> NoisePoint:
    """Mean |E_noisy - E_clean| over ``n_samples`` perturbed re-solves.

    Failed or non-converged samples are counted and excluded from the mean.
    """
    if n_samples < 1:
        raise InputError("n_samples must be positive")
    if e_clean is None:
        clean = _run_workflow(workflow, basis, as_spec, exact_overlaps, config, type2, k)
        if not clean.converged:
            raise PreconditionError("the noise-free workflow does not converge")
        e_clean = clean.e_total
    if sigma == 0.0:
        return NoisePoint(0.0, 0.0, n_samples, 0, np.zeros(n_samples))
    spec = NoiseSpec(sigma=sigma, seed=seed)
    errors, bad = [], 0
    for i in range(n_samples):
        noisy = perturb_overlaps(exact_overlaps, spec, i)
        try:
            res = _run_workflow(workflow, basis, as_spec, noisy, config, type2, k)
        except SplitAmpError as exc:
            log.warning("sample %d at sigma=%g failed: %s", i, sigma, exc)
            bad += 1
            continue
        if not res.converged:
            bad += 1
            continue
        errors.append(abs(res.e_total - e_clean))
    errors = np.array(errors)
    mean = float(errors.mean()) if len(errors) else float("nan")
    return NoisePoint(float(sigma), mean, n_samples, bad, errors)


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([np.ones_like(lx), lx])
    coef = np.linalg.lstsq(A, ly, rcond=None)[0]
    return float(coef[1]), float(np.exp(coef[0]))


def fit_sigma_exponent(points, n_boot: int = 2000, seed: int = 0) -> tuple[float, float, float]:
    """Fit ``|dE| = a sigma^beta``; returns ``(beta, bootstrap_std(beta), a)``.

    The bootstrap resamples (sigma, error) pairs; resamples with a single
    distinct sigma are discarded.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError("points must be (sigma, mean_abs_error) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise InputError("sigma and errors must be positive and finite")
    if len(pts) < 3 or np.log10(pts[:, 0].max() / pts[:, 0].min()) < 2 - 1e-9:
        raise PreconditionError("need at least 3 points spanning 2 decades of sigma")
    beta, a = _loglog_slope(pts[:, 0], pts[:, 1])
    rng = sample_generator(seed)
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(pts), len(pts))
        if len(np.unique(pts[idx, 0])) < 2:
            continue
        boots.append(_loglog_slope(pts[idx, 0], pts[idx, 1])[0])
    err = float(np.std(boots, ddof=1)) if len(boots) > 1 else 0.0
    return beta, err, a


def _fit_from_samples(points: list[NoisePoint], n_boot: int, seed: int) -> tuple[float, float]:
    """Slope with a bootstrap over individual samples within each sigma."""
    sig = np.array([p.sigma for p in points])
    means = np.array([p.mean_abs_error for p in points])
    beta, _ = _loglog_slope(sig, means)
    rng = sample_generator(seed)
    boots = []
    for _ in range(n_boot):
        m = np.array([rng.choice(p.errors, len(p.errors)).mean() for p in points])
        if np.all(m > 0):
            boots.append(_loglog_slope(sig, m)[0])
    return beta, float(np.std(boots, ddof=1)) if len(boots) > 1 else 0.0


def noise_study(workflow: str, exact_overlaps: OverlapSet, basis: SpinOrbitalBasis, as_spec: ActiveSpaceSpec,
                sigma_grid, n_samples: int, seed: int = 0, config: SolverConfig | None = None,
                type2: bool = True, k: float = 2.0, n_boot: int = 1000) -> NoiseStudyResult:
    """Sample the energy error over a sigma grid and fit the sigma exponent.

    The same per-sample random streams are reused for every sigma.
    """
    clean = _run_workflow(workflow, basis, as_spec, exact_overlaps, config, type2, k)
    points = [sample_energy_error(workflow, exact_overlaps, basis, as_spec, s, n_samples, seed, config, type2, k,
                                  e_clean=clean.e_total) for s in sigma_grid]
    res = NoiseStudyResult([p.sigma for p in points], [p.mean_abs_error for p in points], n_samples,
                           [p.n_nonconverged for p in points], points=points)
    usable = [p for p in points if p.sigma > 0 and np.isfinite(p.mean_abs_error) and p.mean_abs_error > 0]
    if len(usable) >= 2:
        res.beta_sigma, res.beta_sigma_err = _fit_from_samples(usable, n_boot, seed)
    return res

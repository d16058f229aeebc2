"""Spin-orbital CCSD, tailored CCSD and externally corrected CCSD.

Residuals follow the Stanton–Gauss intermediate formulation but keep the
full Fock matrix inside ``F_ae``/``F_mi``, so ``R`` is the true projection
``<Phi_mu| exp(-T) H exp(T) |Phi_0>`` and non-canonical orbitals are handled.
Amplitudes are updated by ``t += R / D`` with DIIS extrapolation.

Externally supplied T3/T4 enter the singles/doubles projections through
sparse loops over canonical labels; their contributions are linear in the
(T1-dressed) integrals, so fixed parts are evaluated once and cached.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .cluster import AmplitudeSet, parity
from .errors import InputError, PreconditionError
from .integrals import SpinOrbitalBasis, build_fock


def einsum(*operands, **kw):
    """``np.einsum`` with BLAS-backed contraction ordering."""
    kw.setdefault("optimize", True)
    return np.einsum(*operands, **kw)


log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    max_iterations: int = 200
    residual_tolerance: float = 1e-8
    diis_depth: int = 8
    diis_start: int = 2
    level_shift: float = 0.0
    t1t3_mode: str = "frozen"
    divergence_window: int = 10
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if not self.residual_tolerance > 0:
            raise InputError("residual_tolerance must be positive")
        if self.t1t3_mode not in ("frozen", "iterative"):
            raise InputError("t1t3_mode must be 'frozen' or 'iterative'")
        if self.max_iterations < 0 or self.diis_depth < 0:
            raise InputError("iteration counts must be nonnegative")


@dataclass
class CCResult:
    e_total: float
    e_correlation: float
    e_hf: float
    amplitudes: AmplitudeSet
    iterations: int
    final_residual_norm: float
    converged: bool
    diverged: bool = False
    trace: list = field(default_factory=list)

    @property
    def n_correlated_electrons(self) -> int:
        return len(self.amplitudes.occ)

    def diagnostics(self) -> dict:
        """T1 (Lee–Taylor convention) and D1 diagnostics of the singles."""
        t1 = self.amplitudes.t1
        n = self.n_correlated_electrons
        if n == 0:
            return {"t1_diag": 0.0, "d1_diag": 0.0}
        t1_so, d1 = diagnostics(t1, n)
        return {"t1_diag": t1_so / np.sqrt(2.0), "d1_diag": d1}

    def to_dict(self) -> dict:
        out = {"e_total": self.e_total, "e_correlation": self.e_correlation, "e_hf": self.e_hf,
               "iterations": self.iterations, "final_residual_norm": self.final_residual_norm,
               "converged": self.converged, "diverged": self.diverged, "trace": self.trace}
        out.update(self.diagnostics())
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class TCCResult:
    base: CCResult
    e_as: float
    e_ext: float
    e_as_variational: float | None = None

    def __getattr__(self, name):
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)

    def to_dict(self) -> dict:
        out = self.base.to_dict()
        out.update(e_as=self.e_as, e_ext=self.e_ext, e_as_variational=self.e_as_variational)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def diagnostics(t1: np.ndarray, n_correlated_electrons: int) -> tuple[float, float]:
    """``(||t1||_F / sqrt(n), largest singular value of t1)``."""
    if n_correlated_electrons <= 0:
        raise PreconditionError("diagnostics need at least one correlated electron")
    t1 = np.asarray(t1, dtype=float)
    if t1.size == 0:
        return 0.0, 0.0
    return (float(np.linalg.norm(t1) / np.sqrt(n_correlated_electrons)),
            float(np.linalg.norm(t1, 2)))


class Integrals:
    """Occupied/virtual blocks of ``f`` and ``<pq||rs>``, sliced on demand."""

    def __init__(self, basis: SpinOrbitalBasis):
        self.basis = basis
        self.fock, self.e_hf = build_fock(basis)
        self._idx = {"o": np.array(basis.occ, dtype=int), "v": np.array(basis.vir, dtype=int)}
        self._cache = {}

    def f(self, blk: str) -> np.ndarray:
        return self._get("f" + blk, lambda: self.fock[np.ix_(*(self._idx[c] for c in blk))])

    def g(self, blk: str) -> np.ndarray:
        return self._get(blk, lambda: np.ascontiguousarray(self.basis.g[np.ix_(*(self._idx[c] for c in blk))]))

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    @property
    def nocc(self) -> int:
        return len(self._idx["o"])

    @property
    def nvir(self) -> int:
        return len(self._idx["v"])


def _pij(x):
    return x - x.transpose(1, 0, 2, 3)


def _pab(x):
    return x - x.transpose(0, 1, 3, 2)


def cc_energy(t1: np.ndarray, t2: np.ndarray, basis: SpinOrbitalBasis | Integrals) -> float:
    """Correlation energy functional; only T1 and T2 enter."""
    ints = basis if isinstance(basis, Integrals) else Integrals(basis)
    g = ints.g("oovv")
    return float(einsum("ia,ia->", ints.f("ov"), t1)
                 + 0.25 * einsum("ijab,ijab->", g, t2)
                 + 0.5 * einsum("ijab,ia,jb->", g, t1, t1))


def ccsd_residual(t1: np.ndarray, t2: np.ndarray, ints: Integrals) -> tuple[np.ndarray, np.ndarray]:
    fov, foo, fvv = ints.f("ov"), ints.f("oo"), ints.f("vv")
    g = ints.g
    tt = einsum("ia,jb->ijab", t1, t1)
    tau_t = t2 + 0.5 * (tt - tt.transpose(0, 1, 3, 2))
    tau = t2 + tt - tt.transpose(0, 1, 3, 2)

    Fae = (fvv - 0.5 * einsum("me,ma->ae", fov, t1)
           + einsum("mf,mafe->ae", t1, g("ovvv"))
           - 0.5 * einsum("mnaf,mnef->ae", tau_t, g("oovv")))
    Fmi = (foo + 0.5 * einsum("ie,me->mi", t1, fov)
           + einsum("ne,mnie->mi", t1, g("ooov"))
           + 0.5 * einsum("inef,mnef->mi", tau_t, g("oovv")))
    Fme = fov + einsum("nf,mnef->me", t1, g("oovv"))

    x = einsum("je,mnie->mnij", t1, g("ooov"))
    Wmnij = g("oooo") + x - x.transpose(0, 1, 3, 2) + 0.25 * einsum("ijef,mnef->mnij", tau, g("oovv"))
    x = einsum("mb,amef->abef", t1, g("vovv"))
    Wabef = g("vvvv") - (x - x.transpose(1, 0, 2, 3)) + 0.25 * einsum("mnab,mnef->abef", tau, g("oovv"))
    Wmbej = (g("ovvo") + einsum("jf,mbef->mbej", t1, g("ovvv"))
             - einsum("nb,mnej->mbej", t1, g("oovo"))
             - einsum("jnfb,mnef->mbej", 0.5 * t2 + einsum("jf,nb->jnfb", t1, t1), g("oovv")))

    r1 = (fov + t1 @ Fae.T - Fmi.T @ t1
          + einsum("imae,me->ia", t2, Fme)
          - einsum("nf,naif->ia", t1, g("ovov"))
          - 0.5 * einsum("imef,maef->ia", t2, g("ovvv"))
          - 0.5 * einsum("mnae,nmei->ia", t2, g("oovo")))

    r2 = g("oovv").copy()
    r2 += _pab(einsum("ijae,be->ijab", t2, Fae - 0.5 * einsum("mb,me->be", t1, Fme)))
    r2 -= _pij(einsum("imab,mj->ijab", t2, Fmi + 0.5 * einsum("je,me->mj", t1, Fme)))
    r2 += 0.5 * einsum("mnab,mnij->ijab", tau, Wmnij)
    r2 += 0.5 * einsum("ijef,abef->ijab", tau, Wabef)
    x = einsum("imae,mbej->ijab", t2, Wmbej) - einsum("ie,ma,mbej->ijab", t1, t1, g("ovvo"))
    r2 += _pij(_pab(x))
    r2 += _pij(einsum("ie,abej->ijab", t1, g("vvvo")))
    r2 -= _pab(einsum("ma,mbij->ijab", t1, g("ovoo")))
    return r1, r2


def _canonical_to_full(c: np.ndarray) -> np.ndarray:
    """Antisymmetrize a tensor populated only at i<j, a<b."""
    return c - c.transpose(1, 0, 2, 3) - c.transpose(0, 1, 3, 2) + c.transpose(1, 0, 3, 2)


def _splits(rank: int, n_front: int, front_first: bool):
    """Position splits ``(chosen, rest, sign)`` of a sorted label slot list.

    ``sign`` is the parity of ``chosen + rest`` (``front_first``) or
    ``rest + chosen``.
    """
    out = []
    for chosen in combinations(range(rank), n_front):
        rest = tuple(p for p in range(rank) if p not in chosen)
        perm = chosen + rest if front_first else rest + chosen
        out.append((chosen, rest, parity(perm)))
    return out


class ExternalAmplitudes:
    """Frozen T3/T4 contributions to the singles/doubles projections.

    Terms (all with fixed ``t3``/``t4``)::

        r1 += 1/4 <jk||bc> t_ijk^abc
        r2 += F_kc t_ijk^abc + 1/2 P(ab) W_bkcd t_ijk^acd
              - 1/2 P(ij) W_mnje t_imn^abe + 1/4 <kl||cd> t_ijkl^abcd

    with the T1-dressed ``F_kc = f_kc + <kl||cd> t_ld``,
    ``W_bkcd = <bk||cd> - t_lb <lk||cd>`` and
    ``W_mnje = <mn||je> + t_jf <mn||fe>``; the dressings carry the T1*T3
    terms.
    """

    def __init__(self, ints: Integrals, external: AmplitudeSet):
        basis = ints.basis
        self.ints = ints
        self.o, self.v = ints.nocc, ints.nvir
        opos = {p: k for k, p in enumerate(basis.occ)}
        vpos = {p: k for k, p in enumerate(basis.vir)}
        self.labels = {}
        for rank in (3, 4):
            ent = {lab: t for lab, t in external.sparse(rank).items() if t != 0.0}
            try:
                O = np.array([[opos[i] for i in lab.occ] for lab in ent], dtype=int).reshape(-1, rank)
                V = np.array([[vpos[a] for a in lab.virt] for lab in ent], dtype=int).reshape(-1, rank)
            except KeyError as exc:
                raise InputError(f"external amplitude label outside the orbital space: {exc}") from exc
            self.labels[rank] = (O, V, np.array(list(ent.values()), dtype=float))
        self.n3 = len(self.labels[3][2])
        self.n4 = len(self.labels[4][2])
        self._r1 = None
        self._r2_t4 = None
        self._r2_t3_bare = None

    @property
    def empty(self) -> bool:
        return self.n3 == 0 and self.n4 == 0

    def r1(self) -> np.ndarray:
        if self._r1 is None:
            r1 = np.zeros((self.o, self.v))
            O, V, t = self.labels[3]
            g = self.ints.g("oovv")
            for (p,), ro, so in _splits(3, 1, True):
                for (q,), rv, sv in _splits(3, 1, True):
                    val = so * sv * t * g[O[:, ro[0]], O[:, ro[1]], V[:, rv[0]], V[:, rv[1]]]
                    np.add.at(r1, (O[:, p], V[:, q]), val)
            self._r1 = r1
        return self._r1

    def r2_t4(self) -> np.ndarray:
        if self._r2_t4 is None:
            c = np.zeros((self.o, self.o, self.v, self.v))
            O, V, t = self.labels[4]
            g = self.ints.g("oovv")
            for po, ro, so in _splits(4, 2, True):
                for pv, rv, sv in _splits(4, 2, True):
                    val = so * sv * t * g[O[:, ro[0]], O[:, ro[1]], V[:, rv[0]], V[:, rv[1]]]
                    np.add.at(c, (O[:, po[0]], O[:, po[1]], V[:, pv[0]], V[:, pv[1]]), val)
            self._r2_t4 = _canonical_to_full(c)
        return self._r2_t4

    def r2_t3(self, F: np.ndarray, Wb: np.ndarray, Wm: np.ndarray) -> np.ndarray:
        """T3 doubles contribution for given (linear) F_kc, W_bkcd, W_mnje."""
        o, v = self.o, self.v
        O, V, t = self.labels[3]
        out = np.zeros((o, o, v, v))
        if len(t) == 0:
            return out
        # F_kc t_ijk^abc: k and c moved to the end
        c = np.zeros_like(out)
        for (p,), ro, so in _splits(3, 1, False):
            for (q,), rv, sv in _splits(3, 1, False):
                val = so * sv * t * F[O[:, p], V[:, q]]
                np.add.at(c, (O[:, ro[0]], O[:, ro[1]], V[:, rv[0]], V[:, rv[1]]), val)
        out += _canonical_to_full(c)
        # 1/2 P(ab) W_bkcd t_ijk^acd: k to the end, a to the front, (c,d) summed both orders
        x = np.zeros_like(out)
        for (p,), ro, so in _splits(3, 1, False):
            for (q,), rv, sv in _splits(3, 1, True):
                vals = (so * sv * t)[:, None] * Wb[:, O[:, p], V[:, rv[0]], V[:, rv[1]]].T
                np.add.at(x, (O[:, ro[0]], O[:, ro[1]], V[:, q]), vals)
        x = x - x.transpose(1, 0, 2, 3)
        out += _pab(x)
        # -1/2 P(ij) W_mnje t_imn^abe: i to the front, e to the end, (m,n) summed both orders
        z = np.zeros_like(out)
        for (p,), ro, so in _splits(3, 1, True):
            for (q,), rv, sv in _splits(3, 1, False):
                vals = (so * sv * t)[:, None] * Wm[O[:, ro[0]], O[:, ro[1]], :, V[:, q]]
                np.add.at(z.transpose(0, 2, 3, 1), (O[:, p], V[:, rv[0]], V[:, rv[1]]), vals)
        z = z - z.transpose(0, 1, 3, 2)
        out -= _pij(z)
        return out

    def r2_t3_bare(self) -> np.ndarray:
        if self._r2_t3_bare is None:
            self._r2_t3_bare = self.r2_t3(self.ints.f("ov"), self.ints.g("vovv"), self.ints.g("ooov"))
        return self._r2_t3_bare

    def r2_t1t3(self, t1: np.ndarray) -> np.ndarray:
        g = self.ints.g("oovv")
        dF = einsum("klcd,ld->kc", g, t1)
        dWb = -einsum("lb,lkcd->bkcd", t1, g)
        dWm = einsum("jf,mnfe->mnje", t1, g)
        return self.r2_t3(dF, dWb, dWm)


def mp2_guess(ints: Integrals, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    d1, d2 = _denominators(ints, shift)
    return np.zeros((ints.nocc, ints.nvir)), ints.g("oovv") / d2


def _denominators(ints: Integrals, shift: float):
    eo = np.diag(ints.f("oo"))
    ev = np.diag(ints.f("vv"))
    d1 = eo[:, None] - ev[None, :] - shift
    d2 = eo[:, None, None, None] + eo[None, :, None, None] - ev[None, None, :, None] - ev[None, None, None, :] - shift
    return d1, d2


class _DIIS:
    def __init__(self, depth: int):
        self.depth = depth
        self.vecs, self.errs = [], []

    def push(self, vec, err):
        self.vecs.append(vec.copy())
        self.errs.append(err.copy())
        if len(self.vecs) > self.depth:
            self.vecs.pop(0)
            self.errs.pop(0)

    def extrapolate(self):
        n = len(self.vecs)
        if n < 2:
            return self.vecs[-1]
        B = -np.ones((n + 1, n + 1))
        B[n, n] = 0.0
        E = np.array(self.errs)
        B[:n, :n] = E @ E.T
        rhs = np.zeros(n + 1)
        rhs[n] = -1.0
        scale = np.abs(np.diag(B[:n, :n])).max()
        if scale > 0:
            B[:n, :n] /= scale
        try:
            c = np.linalg.lstsq(B, rhs, rcond=None)[0][:n]
        except np.linalg.LinAlgError:
            c = None
        if c is None or not np.all(np.isfinite(c)):
            log.debug("DIIS subspace singular; restarting from the latest vector")
            latest = self.vecs[-1]
            self.vecs, self.errs = [], []
            return latest
        return einsum("k,kx->x", c, np.array(self.vecs))


def _solve(ints: Integrals, config: SolverConfig, t1, t2, frozen1, frozen2, extra=None):
    """Jacobi/DIIS iterations on the non-frozen amplitudes.

    ``extra(t1) -> (r1_add, r2_add)`` supplies additional residual terms.
    Returns ``(t1, t2, iterations, residual_inf_norm, converged, diverged, trace)``.
    """
    free1, free2 = ~frozen1, ~frozen2
    fix1, fix2 = t1[frozen1].copy(), t2[frozen2].copy()
    d1, d2 = _denominators(ints, config.level_shift)
    n1 = int(free1.sum())

    def residual(t1, t2):
        r1, r2 = ccsd_residual(t1, t2, ints)
        if extra is not None:
            a1, a2 = extra(t1)
            r1 = r1 + a1
            r2 = r2 + a2
        r1[frozen1] = 0.0
        r2[frozen2] = 0.0
        return r1, r2

    def pack(a1, a2):
        return np.concatenate([a1[free1], a2[free2]])

    def unpack(vec):
        a1, a2 = np.empty_like(t1), np.empty_like(t2)
        a1[free1] = vec[:n1]
        a2[free2] = vec[n1:]
        a1[frozen1] = fix1
        a2[frozen2] = fix2
        return a1, a2

    trace = []
    if not free1.any() and not free2.any():
        r1, r2 = residual(t1, t2)
        return t1, t2, 0, 0.0, True, False, trace

    diis = _DIIS(config.diis_depth)
    growth, last = 0, np.inf
    for it in range(config.max_iterations + 1):
        r1, r2 = residual(t1, t2)
        rnorm = float(max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0)))
        energy = cc_energy(t1, t2, ints)
        trace.append({"iteration": it, "e_correlation": energy, "residual": rnorm})
        log.debug("cc it=%d E=%.12f |R|=%.3e", it, energy, rnorm)
        if not np.isfinite(rnorm) or rnorm > config.blowup_threshold:
            log.warning("CC residual blew up (%.3e) at iteration %d", rnorm, it)
            return t1, t2, it, rnorm, False, True, trace
        if rnorm <= config.residual_tolerance:
            return t1, t2, it, rnorm, True, False, trace
        growth = growth + 1 if rnorm > last else 0
        last = rnorm
        if growth >= config.divergence_window:
            log.warning("CC residual grew for %d consecutive iterations", growth)
            return t1, t2, it, rnorm, False, True, trace
        if it == config.max_iterations:
            break
        t1 = t1 + r1 / d1
        t2 = t2 + r2 / d2
        t1[frozen1] = fix1
        t2[frozen2] = fix2
        if config.diis_depth > 1:
            diis.push(pack(t1, t2), pack(r1, r2))
            if it + 1 >= config.diis_start:
                t1, t2 = unpack(diis.extrapolate())
    return t1, t2, config.max_iterations, rnorm, False, False, trace


def _result(ints, t1, t2, frozen1, frozen2, template: AmplitudeSet | None, outcome) -> CCResult:
    t1, t2, nit, rnorm, conv, div, trace = outcome
    basis = ints.basis
    amps = AmplitudeSet(basis.n_spatial, basis.occ, basis.vir, t1, t2, frozen1=frozen1.copy(),
                        frozen2=frozen2.copy(), reference=basis.occ)
    if template is not None:
        amps.t3, amps.t4 = dict(template.t3), dict(template.t4)
    e_corr = cc_energy(t1, t2, ints)
    if not conv:
        log.warning("CC did not converge (iterations=%d, residual=%.3e)", nit, rnorm)
    return CCResult(ints.e_hf + e_corr, e_corr, ints.e_hf, amps, nit, rnorm, conv, div, trace)


def _check_space(amps: AmplitudeSet, basis: SpinOrbitalBasis, what: str):
    if tuple(amps.occ) != tuple(basis.occ) or tuple(amps.vir) != tuple(basis.vir):
        raise InputError(f"{what} amplitudes are not laid out over the basis occupied/virtual space")


def solve_ccsd(basis: SpinOrbitalBasis, config: SolverConfig | None = None, initial: AmplitudeSet | None = None,
               frozen: AmplitudeSet | None = None, e_as_variational: float | None = None) -> CCResult | TCCResult:
    """CCSD; with ``frozen`` the masked amplitudes are held fixed (TCCSD).

    For TCCSD the active energy ``e_as`` is the energy functional evaluated
    on the frozen amplitudes alone and ``e_ext`` the remainder.
    """
    config = config or SolverConfig()
    ints = Integrals(basis)
    t1, t2 = mp2_guess(ints, config.level_shift)
    if initial is not None:
        _check_space(initial, basis, "initial")
        t1, t2 = initial.t1.copy(), initial.t2.copy()
    o, v = ints.nocc, ints.nvir
    frozen1 = np.zeros((o, v), dtype=bool)
    frozen2 = np.zeros((o, o, v, v), dtype=bool)
    if frozen is not None:
        _check_space(frozen, basis, "frozen")
        frozen1, frozen2 = frozen.frozen1.copy(), frozen.frozen2.copy()
        t1[frozen1] = frozen.t1[frozen1]
        t2[frozen2] = frozen.t2[frozen2]
    outcome = _solve(ints, config, t1, t2, frozen1, frozen2)
    res = _result(ints, t1, t2, frozen1, frozen2, None, outcome)
    if frozen is None:
        return res
    e_as = cc_energy(np.where(frozen1, frozen.t1, 0.0), np.where(frozen2, frozen.t2, 0.0), ints)
    return TCCResult(res, e_as, res.e_correlation - e_as, e_as_variational)


def solve_eccc(basis: SpinOrbitalBasis, external: AmplitudeSet, config: SolverConfig | None = None,
               initial: AmplitudeSet | None = None) -> CCResult:
    """Solve the CCSDTQ singles/doubles projections with frozen external T3/T4.

    In ``frozen`` t1t3 mode the T1*T3 doubles term uses ``external.t1`` and
    is evaluated once; in ``iterative`` mode it follows the current T1.
    """
    config = config or SolverConfig()
    ints = Integrals(basis)
    _check_space(external, basis, "external")
    ext = ExternalAmplitudes(ints, external)
    t1, t2 = mp2_guess(ints, config.level_shift)
    if initial is not None:
        _check_space(initial, basis, "initial")
        t1, t2 = initial.t1.copy(), initial.t2.copy()
    o, v = ints.nocc, ints.nvir
    frozen1 = np.zeros((o, v), dtype=bool)
    frozen2 = np.zeros((o, o, v, v), dtype=bool)
    extra = None
    if not ext.empty:
        r1_const = ext.r1()
        r2_const = ext.r2_t4() + ext.r2_t3_bare()
        if config.t1t3_mode == "frozen":
            r2_const = r2_const + ext.r2_t1t3(external.t1)

            def extra(t1):
                return r1_const, r2_const
        else:
            def extra(t1):
                return r1_const, r2_const + ext.r2_t1t3(t1)
    outcome = _solve(ints, config, t1, t2, frozen1, frozen2, extra)
    return _result(ints, t1, t2, frozen1, frozen2, external, outcome)


__all__ = [
    "CCResult", "ExternalAmplitudes", "Integrals", "SolverConfig", "TCCResult", "cc_energy", "ccsd_residual",
    "diagnostics", "mp2_guess", "solve_ccsd", "solve_eccc",
]

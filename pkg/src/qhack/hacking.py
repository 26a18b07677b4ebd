"""Hacking fidelities, strategies and probe optimization.

Systems: Alice's port ``A -> K`` and Bob's port ``B -> L`` of a unitary
``U`` (rows ``K (x) L``, columns ``A (x) B``, plus an optional spectator
factor ``C`` in the trailing slot). Bob holds a reference ``B'`` entangled
with ``B`` through the probe operator ``chi`` (shape ``dB' x dB``,
``||chi||_2 = 1``) and finishes with a recovery ``R`` acting on ``L B'``.

Everything is expressed through the rotated operator ``uo`` of shape
``(dL dB) x (dK dA)``. The recovery is stored as the ``(dK dA) x (dL dB')``
partial isometry it reduces to; :func:`recovery_unitary` rebuilds a full
unitary on ``L B'`` when a state-vector simulation needs one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from qhack import linalg
from qhack.linalg import dagger, polar_coisometry, rotate_clockwise
from qhack.random import as_generator, random_probe

SIM_DIM_CAP = 65536
STEP_GROWTH = 1.5
# step growth stops at the exact block maximizer; over-relaxation upsets the extrapolation
MAX_RELAXATION = 1.0


class DegenerateError(ValueError):
    """A normalization would divide by (numerically) zero."""


@dataclass(frozen=True)
class UnitaryNetwork:
    """A unitary ``AB(C) -> KL(C)`` with its declared partitions.

    ``dk``/``dl`` default to ``da``/``db``. ``d0`` is the dimension of the
    spectator factor ``C``, always the last tensor slot.
    """

    u: np.ndarray
    da: int
    db: int
    dk: int | None = None
    dl: int | None = None
    d0: int = 1
    atol: float = 1e-10

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        object.__setattr__(self, "u", u)
        if self.dk is None:
            object.__setattr__(self, "dk", self.da)
        if self.dl is None:
            object.__setattr__(self, "dl", self.db)
        dims = (self.da, self.db, self.dk, self.dl, self.d0)
        if any(int(d) < 1 for d in dims):
            raise linalg.PartitionError(f"dimensions must be positive, got {dims}")
        if self.da * self.db != self.dk * self.dl:
            raise linalg.PartitionError(
                f"input {self.da}x{self.db} and output {self.dk}x{self.dl} partitions differ in size"
            )
        n = self.da * self.db * self.d0
        if u.shape != (n, n):
            raise linalg.PartitionError(f"matrix shape {u.shape} does not match dimension {n}")
        if not np.all(np.isfinite(u)):
            raise ValueError("matrix has non-finite entries")
        err = np.linalg.norm(dagger(u) @ u - np.eye(n), 2)
        if err > self.atol:
            raise ValueError(f"matrix is not unitary: ||U^dag U - I||_2 = {err:.3g}")

    @property
    def dim(self) -> int:
        return self.da * self.db

    @property
    def kappa(self) -> float:
        return self.db / self.da

    @property
    def symmetric(self) -> bool:
        return self.dk == self.da and self.dl == self.db


@dataclass(frozen=True)
class RotatedChannel:
    """The rotated operator of a network together with its dimensions.

    ``norm`` is the denominator ``dA^2 dK`` shared by every fidelity
    formula. For ``d0 > 1`` the rotated matrix is that of ``Tr_C U / d0``,
    so its Frobenius norm drops below ``sqrt(dA dB)``.
    """

    uo: np.ndarray
    da: int
    db: int
    dk: int
    dl: int
    d0: int = 1

    @property
    def norm(self) -> int:
        return self.da * self.da * self.dk

    @cached_property
    def factors(self) -> linalg.SvdFactors:
        return linalg.svd(self.uo)

    @cached_property
    def nuclear(self) -> float:
        return float(self.factors.singulars.sum())


@dataclass
class HackingReport:
    strategy: str
    p_hack: float
    chi: np.ndarray
    recovery: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    history: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OptimizerSettings:
    step_size: float = 0.2
    max_iter: int = 2000
    convergence_tol: float = 1e-10
    pinv_rel_tol: float = 1e-10
    restarts: int = 3
    max_halvings: int = 30
    residual_tol: float = 1e-7

    def __post_init__(self):
        if not (self.step_size > 0 and self.max_iter > 0 and self.convergence_tol > 0 and self.pinv_rel_tol > 0):
            raise ValueError("optimizer settings must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")


@dataclass(frozen=True)
class MixedProbe:
    """Mixture ``sum_i p_i |phi_i><phi_i|`` of probe states given by operators ``chi_i``."""

    weights: tuple[float, ...]
    chis: tuple[np.ndarray, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.chis) or len(w) == 0:
            raise ValueError("need one weight per probe component")
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-10:
            raise ValueError("weights must be positive and sum to 1")
        shapes = {np.shape(c) for c in self.chis}
        if len(shapes) != 1:
            raise ValueError("all probe components must have the same shape")
        for c in self.chis:
            if abs(np.linalg.norm(c) - 1) > 1e-10:
                raise ValueError("each probe component needs unit Frobenius norm")


def rotated(network: UnitaryNetwork) -> RotatedChannel:
    u = network.u
    if network.d0 > 1:
        u = linalg.partial_trace(u, (network.dim, network.d0), keep="first") / network.d0
    uo = rotate_clockwise(u, (network.dk, network.dl), (network.da, network.db))
    return RotatedChannel(uo, network.da, network.db, network.dk, network.dl, network.d0)


def _check_probe(ch: RotatedChannel, chi) -> np.ndarray:
    chi = np.asarray(chi, dtype=complex)
    if chi.ndim != 2 or chi.shape[1] != ch.db:
        raise linalg.PartitionError(f"probe must have {ch.db} columns, got shape {chi.shape}")
    if abs(np.linalg.norm(chi) - 1) > 1e-10:
        raise ValueError(f"probe needs unit Frobenius norm, got {np.linalg.norm(chi):.12g}")
    return chi


def apply_probe(ch: RotatedChannel, chi: np.ndarray) -> np.ndarray:
    """``(I_L (x) chi) uo`` without forming the Kronecker product."""
    t = ch.uo.reshape(ch.dl, ch.db, -1)
    return np.einsum("pj,ijc->ipc", chi, t).reshape(ch.dl * chi.shape[0], -1)


def _trace_l(x: np.ndarray, dl: int) -> np.ndarray:
    """Trace the leading ``L`` factor of a possibly rectangular ``(dl*m) x (dl*n)`` matrix."""
    return np.einsum("ijik->jk", x.reshape(dl, x.shape[0] // dl, dl, x.shape[1] // dl))


def p_hack_trace_form(ch: RotatedChannel, r, chi) -> float:
    """``|Tr[R (I (x) chi) uo]|^2 / (dA^2 dK)``."""
    chi = _check_probe(ch, chi)
    r = np.asarray(r)
    m = apply_probe(ch, chi)
    if r.shape != (m.shape[1], m.shape[0]):
        raise linalg.PartitionError(f"recovery shape {r.shape} incompatible with {m.shape[::-1]}")
    return abs(np.trace(r @ m)) ** 2 / ch.norm


def optimal_recovery_for_probe(ch: RotatedChannel, chi, strategy: str = "CUSTOM") -> HackingReport:
    """Best recovery for a fixed probe: the polar factor of ``(I (x) chi) uo``."""
    chi = _check_probe(ch, chi)
    m = apply_probe(ch, chi)
    f = linalg.svd(m)
    r = dagger(f.right_adj) @ dagger(f.left)
    return HackingReport(strategy, float(f.singulars.sum()) ** 2 / ch.norm, chi, r)


def p_me(ch: RotatedChannel) -> float:
    """Maximally entangled probe with its optimal recovery: ``||uo||_1^2 / (dA^2 dK dB)``."""
    return ch.nuclear**2 / (ch.norm * ch.db)


def me_strategy(ch: RotatedChannel) -> HackingReport:
    return optimal_recovery_for_probe(ch, np.eye(ch.db) / math.sqrt(ch.db), "ME")


def pg_strategy(ch: RotatedChannel) -> HackingReport:
    """Pretty-good strategy.

    Probe ``Tr_L|uo^dag| / ||Tr_L|uo^dag|||_2`` with the canonical recovery
    ``R = V W^dag`` for which ``uo R = |uo^dag|``. ``p_hack`` is the closed
    form ``||Tr_L|uo^dag|||_2^2 / (dA^2 dK)``; ``extra["p_reopt"]`` is the
    fidelity after re-optimizing the recovery for the same probe.
    """
    w, s, vh = ch.factors
    abs_adj = (w * s) @ dagger(w)
    t = linalg.partial_trace(abs_adj, (ch.dl, ch.db), keep="second")
    nt = np.linalg.norm(t)
    if nt < 1e-14 * max(ch.nuclear, 1.0):
        raise DegenerateError("partial trace of |uo^dag| vanishes")
    chi = t / nt
    r = dagger(vh) @ dagger(w)
    reopt = optimal_recovery_for_probe(ch, chi)
    return HackingReport("PG", nt**2 / ch.norm, chi, r, extra={"p_reopt": reopt.p_hack, "recovery_reopt": reopt.recovery})


def optimal_probe_for_recovery(ch: RotatedChannel, r) -> tuple[np.ndarray, float]:
    """Best probe for a fixed recovery and its fidelity ``||Tr_L[uo R]||_2^2 / (dA^2 dK)``."""
    r = np.asarray(r)
    if r.shape[0] != ch.uo.shape[1] or r.shape[1] % ch.dl:
        raise linalg.PartitionError(f"recovery shape {r.shape} incompatible with rotated operator {ch.uo.shape}")
    t = _trace_l(ch.uo @ r, ch.dl)
    nt = np.linalg.norm(t)
    if nt < 1e-14:
        raise DegenerateError("Tr_L[uo R] vanishes; every probe gives zero fidelity")
    return dagger(t) / nt, nt**2 / ch.norm


class _Objective(NamedTuple):
    value: float
    grad: np.ndarray  # Tr_L[|M^dag|^+ M uo^dag]
    recovery: np.ndarray


def _evaluate(ch: RotatedChannel, chi: np.ndarray, rel_tol: float) -> _Objective:
    m = apply_probe(ch, chi)
    w, s, vh = linalg.svd(m)
    keep = s > rel_tol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    # |M^dag|^+ M is W V^dag restricted to the support of M
    ws, vhs = w[:, keep], vh[keep]
    g = _trace_l(ws @ (vhs @ dagger(ch.uo)), ch.dl)
    return _Objective(float(s.sum()), g, dagger(vh) @ dagger(w))


def _residual(chi: np.ndarray, g: np.ndarray) -> float:
    ng = np.linalg.norm(g)
    return float(np.linalg.norm(chi - g / ng)) if ng > 0 else float(np.linalg.norm(chi))


def extremal_residual(ch: RotatedChannel, chi, rel_tol: float = 1e-10) -> float:
    """``||chi - G / ||G||_2||_2`` with ``G = Tr_L[|M^dag|^+ M uo^dag]``; zero at a stationary probe."""
    chi = np.asarray(chi, dtype=complex)
    return _residual(chi, _evaluate(ch, chi, rel_tol).grad)


def _base_step(ch, chi, obj, eps, settings):
    """One damped step with per-step halving; returns ``(chi, obj, eps)`` or ``None``."""
    f = obj.value
    for _ in range(settings.max_halvings + 1):
        # chi is kept normalized, so ||Z_k||_2 = 1 in the update
        z = (1.0 - 0.5 * eps * f) * chi + 0.5 * eps * obj.grad
        nz = np.linalg.norm(z)
        if nz > 0:
            cand = z / nz
            new = _evaluate(ch, cand, settings.pinv_rel_tol)
            if new.value >= f:
                return cand, new, eps
        eps *= 0.5
    return None


def _extrapolate(ch, x0, x1, x2, floor, settings):
    """SQUAREM extrapolation through three successive iterates.

    Only a candidate whose objective is at least ``floor`` is returned, so
    the accepted sequence stays monotone.
    """
    r = x1 - x0
    v = x2 - 2.0 * x1 + x0
    nv = np.linalg.norm(v)
    if nv == 0:
        return None
    alpha = min(-np.linalg.norm(r) / nv, -1.0)
    # alpha = -1 reproduces x2, so stop shrinking just above it
    while alpha < -1.0 - 1e-3:
        z = x0 - 2.0 * alpha * r + alpha * alpha * v
        cand = z / np.linalg.norm(z)
        new = _evaluate(ch, cand, settings.pinv_rel_tol)
        if new.value >= floor:
            return cand, new
        alpha = 0.5 * (alpha - 1.0)
    return None


def _ascend(ch: RotatedChannel, chi: np.ndarray, settings: OptimizerSettings):
    obj = _evaluate(ch, chi, settings.pinv_rel_tol)
    history = [obj.value]
    converged = False
    eps = settings.step_size
    it = 0
    for it in range(1, settings.max_iter + 1):
        f = obj.value
        if f <= 0:
            converged = True
            break
        # one cycle: two damped steps, then an extrapolation through them
        x0 = chi
        step = _base_step(ch, chi, obj, eps, settings)
        if step is None:
            converged = True
            break
        chi, obj, eps = step
        history.append(obj.value)
        step = _base_step(ch, chi, obj, eps, settings)
        if step is not None:
            x1 = chi
            chi, obj, eps_used = step
            history.append(obj.value)
            # the extrapolation assumes both steps used the same map
            if eps_used == eps:
                jump = _extrapolate(ch, x0, x1, chi, obj.value, settings)
                if jump is not None:
                    chi, obj = jump
                    history.append(obj.value)
            eps = eps_used
        if (obj.value - f) / f < settings.convergence_tol and _residual(chi, obj.grad) <= settings.residual_tol:
            converged = True
            break
        # eps * f / 2 = 1 is the exact maximizer over chi for the current recovery
        eps = min(eps * STEP_GROWTH, 2.0 * MAX_RELAXATION / obj.value)
    return chi, obj, history, it, converged


def canonical_probe(chi: np.ndarray) -> np.ndarray:
    """PSD representative ``|chi| = sqrt(chi^dag chi)`` of the gauge orbit ``V chi``."""
    w, s, vh = linalg.svd(chi)
    p = (dagger(vh) * s) @ vh
    p = (p + dagger(p)) / 2
    return p / np.linalg.norm(p)


def optimize_probe(ch: RotatedChannel, settings: OptimizerSettings | None = None, rng=None) -> HackingReport:
    """Gradient ascent of ``f(chi) = ||(I (x) chi) uo||_1`` over unit-norm probes.

    Starts from the maximally entangled probe, then ``settings.restarts``
    random probes drawn from ``rng``; the best run is returned with its
    probe made positive semidefinite and the recovery re-derived for it.
    ``history`` holds the fidelity ``f**2 / norm`` after each accepted step
    of that run.
    """
    settings = settings or OptimizerSettings()
    starts = [np.eye(ch.db, dtype=complex) / math.sqrt(ch.db)]
    if settings.restarts:
        gen = as_generator(rng if rng is not None else 0)
        starts += [random_probe(ch.db, gen) for _ in range(settings.restarts)]
    best = None
    total_iters = 0
    for start in starts:
        run = _ascend(ch, start, settings)
        total_iters += run[3]
        if best is None or run[1].value > best[1].value:
            best = run
    chi, obj, history, iters, converged = best
    chi = canonical_probe(chi)
    final = _evaluate(ch, chi, settings.pinv_rel_tol)
    residual = _residual(chi, final.grad)
    return HackingReport(
        "OPT",
        final.value**2 / ch.norm,
        chi,
        final.recovery,
        iterations=iters,
        residual=residual,
        converged=converged,
        history=[h**2 / ch.norm for h in history],
        extra={"total_iterations": total_iters, "runs": len(starts)},
    )


def random_strategy(ch: RotatedChannel, rng) -> HackingReport:
    return optimal_recovery_for_probe(ch, random_probe(ch.db, rng), "RAND")


# ---------------------------------------------------------------------------
# full state-vector simulation


def recovery_unitary(ch: RotatedChannel, r: np.ndarray, dbp: int | None = None) -> np.ndarray:
    """Embed a ``(dK dA) x (dL dB')`` coisometry into a unitary on ``L B'``.

    Row ``(k, a)`` of ``r`` becomes row ``k * dB' + a`` of the unitary, the
    slot that the ideal state ``|psi>_{KL} |psi>_{A'B'}`` reads out.
    """
    dbp = dbp or ch.db
    if ch.dk > ch.dl or ch.da > dbp:
        raise linalg.PartitionError("recovery embedding needs dK <= dL and dA <= dB'")
    q = linalg.complete_to_unitary(r)
    n = ch.dl * dbp
    slots = np.array([k * dbp + a for k in range(ch.dk) for a in range(ch.da)])
    rest = np.setdiff1d(np.arange(n), slots)
    full = np.empty((n, n), dtype=complex)
    full[slots] = q[: len(slots)]
    full[rest] = q[len(slots):]
    return full


class SimulatedFidelities(NamedTuple):
    state: np.ndarray  # amplitudes indexed (A', K, L, B')
    f_joint: float
    f_ext: float
    f_post: float


def simulate_final_state(network: UnitaryNetwork, r_full, chi) -> SimulatedFidelities:
    """Run the protocol on state vectors.

    Prepares ``|psi>_{AA'} |phi>_{BB'}``, applies ``U`` then ``r_full`` on
    ``L B'``, and reads out the overlap with ``|psi>_{KL} |psi>_{A'B'}``
    (``f_joint``) and the two marginal fidelities on ``A'B'`` (``f_ext``)
    and ``KL`` (``f_post``).
    """
    if network.d0 != 1:
        raise ValueError("state simulation supports d0 = 1 only")
    da, db, dk, dl = network.da, network.db, network.dk, network.dl
    chi = np.asarray(chi, dtype=complex)
    dbp = chi.shape[0]
    if chi.shape[1] != db:
        raise linalg.PartitionError(f"probe must have {db} columns")
    if dk > dl or da > dbp:
        raise linalg.PartitionError("simulation needs dK <= dL and dA <= dB'")
    if da * dk * dl * dbp > SIM_DIM_CAP:
        raise ValueError(f"simulated dimension {da * dk * dl * dbp} exceeds cap {SIM_DIM_CAP}")
    r_full = np.asarray(r_full, dtype=complex)
    if r_full.shape != (dl * dbp, dl * dbp):
        raise linalg.PartitionError(f"recovery must be {dl * dbp}x{dl * dbp}")

    psi0 = np.einsum("xa,pb->xabp", np.eye(da) / math.sqrt(da), chi)  # (A', A, B, B')
    u = network.u.reshape(dk, dl, da, db)
    psi1 = np.einsum("klab,xabp->xklp", u, psi0)
    rf = r_full.reshape(dl, dbp, dl, dbp)
    state = np.einsum("yzlp,xklp->xkyz", rf, psi1)

    # ideal pair: K with the first dK levels of L, A' with the first dA levels of B'
    kl = np.einsum("xkkz->xz", state[:, :, :dk, :]) / math.sqrt(dk)  # (A', B')
    ab = np.einsum("xkyx->ky", state[:, :, :, :da]) / math.sqrt(da)  # (K, L)
    joint = np.einsum("xx->", kl[:, :da]) / math.sqrt(da)
    f_post = float(np.sum(np.abs(kl) ** 2))
    f_ext = float(np.sum(np.abs(ab) ** 2))
    return SimulatedFidelities(state, float(abs(joint) ** 2), f_ext, f_post)


# ---------------------------------------------------------------------------
# Hayden-Preskill dual


def swap_operator(d: int) -> np.ndarray:
    f = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            f[j * d + i, i * d + j] = 1.0
    return f


def _check_hp(network: UnitaryNetwork):
    if not network.symmetric:
        raise linalg.PartitionError("Hayden-Preskill duality needs dK = dA and dL = dB")
    if network.d0 != 1:
        raise ValueError("Hayden-Preskill duality needs d0 = 1")


def hp_fidelity(network: UnitaryNetwork, w, ch: RotatedChannel | None = None) -> float:
    """``||Tr_B[uo W^T F]||_2^2 / (dA dB^2)`` for Alice's decoder ``W``.

    ``W`` maps ``A'A`` (reference first) into a ``dB^2``-dimensional output
    ``A'_out A_out``, shape ``dB^2 x dA^2``; it is unitary when ``dA = dB``.
    ``F`` swaps the two ``dB``-dimensional output factors.
    """
    _check_hp(network)
    ch = ch or rotated(network)
    w = np.asarray(w)
    da, db = network.da, network.db
    if w.shape != (db * db, da * da):
        raise linalg.PartitionError(f"decoder must be {db * db}x{da * da}, got {w.shape}")
    r = w.T @ swap_operator(db)
    t = _trace_l(ch.uo @ r, db)
    return float(np.linalg.norm(t) ** 2 / (da * db * db))


def hp_fidelity_simulated(network: UnitaryNetwork, w) -> float:
    """Hayden-Preskill fidelity from the state-vector definition (``dA <= dB``).

    ``U^T`` acts on ``AB`` fed with ``|psi>_{AA'} |psi>_{BB'}``; ``W`` (same
    factor convention as :func:`hp_fidelity`) acts on ``A'A``; the overlap
    of ``A_out B'`` with ``|psi>`` is summed over the discarded systems.
    """
    _check_hp(network)
    da, db = network.da, network.db
    if da > db:
        raise linalg.PartitionError("state simulation of the dual protocol needs dA <= dB")
    w = np.asarray(w).reshape(db, db, da, da)  # (A'_out, A_out, A', A)
    u = network.u.reshape(da, db, da, db)
    # U^T|a b> = sum_ij U[(a,b),(i,j)] |i j>; inputs |a>_A|a>_A' and |b>_B|b>_B'
    psi1 = np.einsum("abij->iajb", u) / math.sqrt(da * db)  # (A, A', B, B')
    psi2 = np.einsum("yxci,icjb->yxjb", w, psi1)  # (A'_out, A_out, B, B')
    amp = np.einsum("yxjx->yj", psi2) / math.sqrt(db)
    return float(np.sum(np.abs(amp) ** 2))


def decoder_from_recovery(r: np.ndarray, db: int) -> np.ndarray:
    """Invert ``R = W^T F``: ``W = (R F)^T``."""
    return (np.asarray(r) @ swap_operator(db)).T


def hp_optimal(network: UnitaryNetwork, settings: OptimizerSettings | None = None, rng=None) -> dict:
    """Optimal dual decoder obtained by mapping the optimal hacking recovery."""
    _check_hp(network)
    ch = rotated(network)
    rep = optimize_probe(ch, settings, rng)
    w = decoder_from_recovery(rep.recovery, network.db)
    p_hp = hp_fidelity(network, w, ch)
    return {
        "p_hp_opt": p_hp,
        "p_hack_opt": rep.p_hack,
        "p_hack_opt_over_kappa2": rep.p_hack / network.kappa**2,
        "kappa": network.kappa,
        "decoder": w,
    }


def hp_bruteforce(network: UnitaryNetwork, restarts: int = 6, rng=None, max_iter: int = 5000, gtol: float = 1e-10) -> dict:
    """Maximize :func:`hp_fidelity` directly over decoders ``W``.

    Riemannian conjugate-gradient ascent (Polak-Ribiere+, Armijo
    backtracking, polar retraction) on the Stiefel manifold of partial
    isometries, from random starts. It never touches the probe
    parametrization, so it is an independent check of the duality.
    """
    _check_hp(network)
    ch = rotated(network)
    da, db = network.da, network.db
    f_swap = swap_operator(db)
    gen = as_generator(rng if rng is not None else 0)
    tall = db >= da  # W (dB^2 x dA^2) has orthonormal columns iff dB >= dA
    eye_b = np.eye(db)

    def value_and_grad(w):
        t = _trace_l(ch.uo @ (w.T @ f_swap), db)
        a = np.kron(eye_b, dagger(t)) @ ch.uo
        return float(np.vdot(t, t).real), 2 * np.conj(f_swap @ a)

    def project(w, g):
        if tall:
            x = dagger(w) @ g
            return g - w @ (x + dagger(x)) / 2
        x = g @ dagger(w)
        return g - (x + dagger(x)) / 2 @ w

    def retract(w):
        f = linalg.svd(w)
        return f.left @ f.right_adj

    def inner(x, y):
        return float(np.vdot(x, y).real)

    best_val, best_w, best_iters = -1.0, None, 0
    shape = (db * db, da * da)
    for _ in range(restarts):
        w = retract(gen.standard_normal(shape) + 1j * gen.standard_normal(shape))
        val, g = value_and_grad(w)
        rg = project(w, g)
        d = rg
        step = 1.0 / max(val, 1e-12)
        it = 0
        for it in range(1, max_iter + 1):
            slope = inner(rg, d)
            if slope <= 0:
                d, slope = rg, inner(rg, rg)
            while True:
                cand = retract(w + step * d)
                cval, cg = value_and_grad(cand)
                if cval >= val + 1e-4 * step * slope or step < 1e-16:
                    break
                step *= 0.5
            if cval < val:
                break
            w, val, g = cand, cval, cg
            rg_new = project(w, g)
            beta = max(0.0, inner(rg_new, rg_new - project(w, rg)) / inner(rg, rg))
            d = rg_new + beta * project(w, d)
            rg = rg_new
            step *= 2.0
            if np.linalg.norm(rg) <= gtol * max(val, 1.0):
                break
        if val > best_val:
            best_val, best_w, best_iters = val, w, it
    return {"p_hp_opt": best_val / (da * db * db), "decoder": best_w, "iterations": best_iters}


# ---------------------------------------------------------------------------
# mixed probes and the trade-off relation


def mixed_probe_fidelity(ch: RotatedChannel, probe: MixedProbe, r) -> tuple[float, float]:
    """Weighted hacking fidelity of a mixed probe and its overlap with the ME state.

    Returns ``(sum_i p_i |Tr[R (I (x) chi_i) uo]|^2 / (dA^2 dK), sum_i p_i |Tr chi_i|^2 / dB)``.
    """
    r = np.asarray(r)
    p = 0.0
    f_probe = 0.0
    for wgt, chi in zip(probe.weights, probe.chis):
        chi = _check_probe(ch, chi)
        m = apply_probe(ch, chi)
        if r.shape != (m.shape[1], m.shape[0]):
            raise linalg.PartitionError(f"recovery shape {r.shape} incompatible with {m.shape[::-1]}")
        p += wgt * abs(np.trace(r @ m)) ** 2
        f_probe += wgt * abs(np.trace(chi)) ** 2
    return p / ch.norm, f_probe / ch.db


def best_recovery_mixed(ch: RotatedChannel, probe: MixedProbe, max_iter: int = 500, tol: float = 1e-12):
    """Maximize the mixed-probe fidelity over recoveries.

    The objective is convex in ``R``, so replacing it by its linearization
    at the current ``R`` and taking the polar maximizer never decreases it.
    Starts from the optimal recovery of the average probe component.
    """
    ms = [apply_probe(ch, _check_probe(ch, c)) for c in probe.chis]
    w = np.asarray(probe.weights)
    r = polar_coisometry(sum(wi * m for wi, m in zip(w, ms)))
    prev = -1.0
    for _ in range(max_iter):
        tr = np.array([np.trace(r @ m) for m in ms])
        val = float(np.sum(w * np.abs(tr) ** 2))
        if val - prev <= tol * max(val, 1e-300):
            break
        prev = val
        r = polar_coisometry(sum(wi * np.conj(t) * m for wi, t, m in zip(w, tr, ms)))
    return r, mixed_probe_fidelity(ch, probe, r)[0]


class TradeoffResult(NamedTuple):
    fa: float
    fb: float
    fab: float
    slack: float


def check_tradeoff(rho, psi_a, phi_b) -> TradeoffResult:
    """Marginal and joint fidelities with ``|psi>|phi>`` and the slack of
    ``sqrt(1 - F_A) + sqrt(1 - F_B) >= (2/3)(1 - F_AB)``."""
    rho = np.asarray(rho, dtype=complex)
    psi_a = np.asarray(psi_a, dtype=complex).ravel()
    phi_b = np.asarray(phi_b, dtype=complex).ravel()
    da, db = len(psi_a), len(phi_b)
    if rho.shape != (da * db, da * db):
        raise linalg.PartitionError(f"state shape {rho.shape} does not match {da}x{db}")
    if np.linalg.norm(rho - dagger(rho)) > 1e-10 or abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError("state must be Hermitian with unit trace")
    if np.linalg.eigvalsh((rho + dagger(rho)) / 2).min() < -1e-10:
        raise ValueError("state is not positive semidefinite")
    if abs(np.linalg.norm(psi_a) - 1) > 1e-10 or abs(np.linalg.norm(phi_b) - 1) > 1e-10:
        raise ValueError("pure states must be normalized")
    t = rho.reshape(da, db, da, db)
    fa = np.einsum("i,ijkj,k->", psi_a.conj(), t, psi_a).real
    fb = np.einsum("j,ijil,l->", phi_b.conj(), t, phi_b).real
    v = np.kron(psi_a, phi_b)
    fab = (v.conj() @ rho @ v).real
    fa, fb, fab = (min(max(float(x), 0.0), 1.0) for x in (fa, fb, fab))
    slack = math.sqrt(1 - fa) + math.sqrt(1 - fb) - 2.0 * (1 - fab) / 3.0
    return TradeoffResult(fa, fb, fab, slack)

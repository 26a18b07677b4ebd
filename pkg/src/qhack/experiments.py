"""Monte Carlo sweeps over Haar networks and randomized verification suites.

Each ``(dA, trial)`` point draws its unitary from stream ``trial`` of the
master seed, so results do not depend on how points are scheduled across
threads. Rows are sorted by ``(dA, trial, strategy)`` before they are
returned or written.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from qhack import hacking, linalg
from qhack.hacking import OptimizerSettings, UnitaryNetwork
from qhack.random import RngState, haar_unitary, random_density_and_pure, random_probe
from qhack.theory import DimensionProfile, avg_p_opt

STRATEGIES = ("ME", "PG", "OPT", "RAND")
DEFAULT_DIM_CAP = 4096
CSV_HEADER = ("d_a", "d_b", "d_0", "kappa", "trial", "strategy", "p_hack", "iterations", "residual", "wall_ms")
AGG_HEADER = ("d_a", "d_b", "d_0", "kappa", "strategy", "trials", "mean", "std_err", "theory")
SUITES = ("bounds", "duality", "tradeoff", "twoqubit", "blackhole")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep over ``dA`` at a fixed aspect ratio ``kappa = dB / dA``.

    ``record_timing`` fills ``wall_ms``; it is off by default because
    wall-clock times would make otherwise identical runs differ.
    """

    da_list: tuple[int, ...]
    kappa: Fraction = Fraction(1)
    d0: int = 1
    trials: int = 20
    strategies: tuple[str, ...] = ("OPT",)
    master_seed: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    dim_cap: int = DEFAULT_DIM_CAP
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "da_list", tuple(int(d) for d in self.da_list))
        object.__setattr__(self, "kappa", Fraction(str(self.kappa)))
        object.__setattr__(self, "strategies", tuple(s.upper() for s in self.strategies))
        if not self.da_list or min(self.da_list) < 1:
            raise ValueError("da_list needs at least one positive dimension")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.trials < 1 or self.d0 < 1:
            raise ValueError("trials and d0 must be at least 1")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad or not self.strategies:
            raise ValueError(f"strategies must be a non-empty subset of {STRATEGIES}, got {sorted(bad)}")
        RngState(self.master_seed)
        for da in self.da_list:
            db = self.kappa * da
            if db.denominator != 1:
                raise ValueError(f"kappa * dA = {db} is not an integer for dA = {da}")
            if da * int(db) * self.d0 > self.dim_cap:
                raise ValueError(f"network dimension {da * int(db) * self.d0} exceeds cap {self.dim_cap}")

    def db_for(self, da: int) -> int:
        return int(self.kappa * da)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "optimizer" in d:
            d["optimizer"] = OptimizerSettings(**d["optimizer"])
        if "kappa" in d:
            d["kappa"] = Fraction(str(d["kappa"]))
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "da_list": list(self.da_list),
            "kappa": str(self.kappa),
            "d0": self.d0,
            "trials": self.trials,
            "strategies": list(self.strategies),
            "master_seed": self.master_seed,
            "optimizer": dataclasses.asdict(self.optimizer),
            "dim_cap": self.dim_cap,
            "record_timing": self.record_timing,
        }


@dataclass(frozen=True)
class SweepRow:
    d_a: int
    d_b: int
    d_0: int
    kappa: float
    trial: int
    strategy: str
    p_hack: float
    iterations: int
    residual: float
    wall_ms: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, k)) for k in CSV_HEADER]


@dataclass(frozen=True)
class AggregateRow:
    d_a: int
    d_b: int
    d_0: int
    kappa: float
    strategy: str
    trials: int
    mean: float
    std_err: float
    theory: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, k)) for k in AGG_HEADER]


def _strategy_order(s: str) -> int:
    return STRATEGIES.index(s)


def _run_point(config: ExperimentConfig, da: int, trial: int) -> list[SweepRow]:
    db = config.db_for(da)
    gen = RngState(config.master_seed, trial).generator()
    u = haar_unitary(da * db * config.d0, gen)
    # child streams keep each strategy's draws independent of which others run
    opt_gen, rand_gen = gen.spawn(2)
    net = UnitaryNetwork(u, da, db, d0=config.d0, atol=1e-8)
    ch = hacking.rotated(net)
    rows = []
    for name in sorted(config.strategies, key=_strategy_order):
        t0 = time.perf_counter()
        if name == "ME":
            rep = hacking.me_strategy(ch)
        elif name == "PG":
            rep = hacking.pg_strategy(ch)
        elif name == "OPT":
            rep = hacking.optimize_probe(ch, config.optimizer, opt_gen)
        else:
            rep = hacking.random_strategy(ch, rand_gen)
        wall = (time.perf_counter() - t0) * 1e3 if config.record_timing else 0.0
        residual = rep.residual if name == "OPT" else hacking.extremal_residual(ch, rep.chi, config.optimizer.pinv_rel_tol)
        rows.append(SweepRow(da, db, config.d0, float(config.kappa), trial, name, rep.p_hack, rep.iterations, residual, wall))
    return rows


def run_sweep(config: ExperimentConfig, threads: int = 1) -> list[SweepRow]:
    """Evaluate every requested strategy on ``trials`` Haar networks per ``dA``."""
    if threads < 1:
        raise ValueError("threads must be at least 1")
    points = [(da, t) for da in config.da_list for t in range(config.trials)]
    if threads == 1:
        chunks = [_run_point(config, da, t) for da, t in points]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda p: _run_point(config, *p), points))
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.d_a, r.trial, _strategy_order(r.strategy)))
    return rows


def aggregate(rows: Sequence[SweepRow]) -> list[AggregateRow]:
    """Per ``(dA, d0, strategy)`` mean, standard error ``s / sqrt(n)`` and theory value."""
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.d_a, r.d_b, r.d_0, r.strategy), []).append(r)
    out = []
    for (da, db, d0, strat), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], _strategy_order(kv[0][3]))):
        vals = np.array([r.p_hack for r in sorted(grp, key=lambda r: r.trial)])
        n = len(vals)
        std_err = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        theory = avg_p_opt(DimensionProfile(da, db, d0=d0))
        out.append(AggregateRow(da, db, d0, grp[0].kappa, strat, n, float(np.mean(vals)), std_err, theory))
    return out


def agg_path(path) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_agg{p.suffix or '.csv'}")


def _write_table(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(r.cells())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_csv(rows: Sequence[SweepRow], path, with_aggregate: bool = True) -> list[Path]:
    """Write trial rows to ``path`` and aggregates to ``<stem>_agg<suffix>``."""
    path = Path(path)
    _write_table(path, CSV_HEADER, rows)
    written = [path]
    if with_aggregate:
        _write_table(agg_path(path), AGG_HEADER, aggregate(rows))
        written.append(agg_path(path))
    return written


def read_csv(path) -> list[SweepRow]:
    types = dict(d_a=int, d_b=int, d_0=int, kappa=float, trial=int, strategy=str, p_hack=float, iterations=int, residual=float, wall_ms=float)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [SweepRow(**{k: types[k](v) for k, v in rec.items()}) for rec in reader]


def to_jsonable(obj):
    """Recursively convert arrays, complex numbers and dataclasses for ``json``."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def write_json(report, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# ---------------------------------------------------------------------------
# verification suites


class _Assertion:
    """Tracks the worst slack of one inequality over many trials (negative = violated)."""

    def __init__(self, name: str, formula: str, tolerance: float):
        self.name = name
        self.formula = formula
        self.tolerance = tolerance
        self.worst = math.inf
        self.worst_trial = None
        self.count = 0

    def record(self, slack: float, trial: int) -> None:
        self.count += 1
        if slack < self.worst:
            self.worst, self.worst_trial = float(slack), trial

    @property
    def passed(self) -> bool:
        return self.count > 0 and self.worst >= -self.tolerance

    def report(self, seed: int) -> dict:
        return {
            "name": self.name,
            "formula": self.formula,
            "tolerance": self.tolerance,
            "checks": self.count,
            "worst_slack": self.worst,
            "passed": self.passed,
            "counterexample": None if self.passed else {"master_seed": seed, "stream": self.worst_trial},
        }


def _network(seed: int, trial: int, da: int, db: int, **kw) -> tuple[UnitaryNetwork, np.random.Generator]:
    gen = RngState(seed, trial).generator()
    n = da * db * kw.get("d0", 1)
    return UnitaryNetwork(haar_unitary(n, gen), da, db, atol=1e-8, **kw), gen


def _verify_bounds(trials, seed, settings):
    chain = _Assertion("p_me <= p_pg <= p_pg_reopt <= p_opt", "bound_chain", 1e-9)
    floor = _Assertion("p_me >= 1/dA^2", "me_floor", 1e-9)
    square = _Assertion("1 - p_me <= 4 (1 - p_opt)", "me_vs_opt_square", 1e-9)
    for t in range(trials):
        d = (2, 3, 4)[t % 3]
        net, gen = _network(seed, t, d, d)
        ch = hacking.rotated(net)
        pme = hacking.p_me(ch)
        pg = hacking.pg_strategy(ch)
        popt = hacking.optimize_probe(ch, settings, gen).p_hack
        chain.record(min(pg.p_hack - pme, pg.extra["p_reopt"] - pg.p_hack, popt - pg.extra["p_reopt"]), t)
        floor.record(pme - 1.0 / d**2, t)
        square.record(4 * (1 - popt) - (1 - pme), t)
    return [chain, floor, square]


def _verify_duality(trials, seed, settings):
    a = _Assertion("|p_hp_opt (direct search) - p_opt / kappa^2| <= 1e-6", "hayden_preskill_duality", 0.0)
    k = 0
    for da in (2, 3):
        for db in (2, 3, 4):
            for _ in range(trials):
                net, gen = _network(seed, k, da, db)
                popt = hacking.optimize_probe(hacking.rotated(net), settings, gen).p_hack
                direct = hacking.hp_bruteforce(net, rng=gen)["p_hp_opt"]
                a.record(1e-6 - abs(direct - popt / net.kappa**2), k)
                k += 1
    return [a]


def simulated_strategy(seed: int, trial: int, d: int) -> hacking.SimulatedFidelities:
    """Run one random hacking attempt on state vectors.

    Even streams use the best recovery for a random probe, odd streams a
    Haar-random recovery unitary, so both high and low fidelities occur.
    """
    net, gen = _network(seed, trial, d, d)
    ch = hacking.rotated(net)
    chi = random_probe(d, gen)
    if trial % 2 == 0:
        r_full = hacking.recovery_unitary(ch, hacking.optimal_recovery_for_probe(ch, chi).recovery)
    else:
        r_full = haar_unitary(d * d, gen)
    return hacking.simulate_final_state(net, r_full, chi)


def _verify_tradeoff(trials, seed, settings, simulated=200):
    states = _Assertion("sqrt(1-F_A) + sqrt(1-F_B) >= (2/3)(1-F_AB)", "fidelity_tradeoff", 1e-12)
    sims = _Assertion("sqrt(1-f_ext) + sqrt(1-f_post) >= (2/3)(1-f_joint)", "hacking_tradeoff", 1e-12)
    mono = _Assertion("f_joint <= min(f_ext, f_post)", "partial_trace_monotonicity", 1e-10)
    for t in range(trials):
        gen = RngState(seed, t).generator()
        da, db = (int(x) for x in gen.integers(1, 5, size=2))
        states.record(hacking.check_tradeoff(*random_density_and_pure(da, db, gen)).slack, t)
    for t in range(min(simulated, trials)):
        f = simulated_strategy(seed, t, (2, 3)[t % 4 // 2])
        sims.record(math.sqrt(max(1 - f.f_ext, 0.0)) + math.sqrt(max(1 - f.f_post, 0.0)) - 2 * (1 - f.f_joint) / 3, t)
        mono.record(min(f.f_ext, f.f_post) - f.f_joint, t)
    return [states, sims, mono]


def _verify_twoqubit(trials, seed, settings):
    prop = _Assertion("Tr_B|uo^dag| proportional to identity", "two_qubit_pg_probe", 1e-10)
    opt = _Assertion("optimal probe equals I/sqrt(2)", "two_qubit_optimal_probe", 1e-6)
    target = np.eye(2) / math.sqrt(2)
    for t in range(trials):
        net, gen = _network(seed, t, 2, 2)
        ch = hacking.rotated(net)
        tb = linalg.partial_trace(linalg.abs_left(ch.uo), (2, 2), keep="second")
        prop.record(-np.linalg.norm(tb - np.trace(tb) / 2 * np.eye(2), 2), t)
        chi = hacking.optimize_probe(ch, settings, gen).chi
        opt.record(-np.linalg.norm(chi - target, 2), t)
    return [prop, opt]


def blackhole_values(trials: int, seed: int, d_m: int = 2, d_bh: int = 64) -> np.ndarray:
    """``||uo||_1^2 / D^2`` for Haar unitaries on ``D = d_m * d_bh`` with output ``K = B, L = M``."""
    d = d_m * d_bh
    vals = []
    for t in range(trials):
        net, _ = _network(seed, t, d_m, d_bh, dk=d_bh, dl=d_m)
        vals.append(hacking.rotated(net).nuclear ** 2 / d**2)
    return np.array(vals)


def _verify_blackhole(trials, seed, settings):
    a = _Assertion("mean ||uo||_1^2 / D^2 within 0.72 +- 0.03 (d_M=2, D_B=64)", "black_hole_limit", 0.0)
    mean = float(np.mean(blackhole_values(trials, seed)))
    a.record(0.03 - abs(mean - 0.72), 0)
    return [a]


_SUITE_FUNCS = {
    "bounds": _verify_bounds,
    "duality": _verify_duality,
    "tradeoff": _verify_tradeoff,
    "twoqubit": _verify_twoqubit,
    "blackhole": _verify_blackhole,
}


def run_verify(suite: str, trials: int, seed: int, settings: OptimizerSettings | None = None) -> dict:
    """Run a randomized invariant battery.

    The report lists each assertion with its worst slack; a failed
    assertion carries the ``(master_seed, stream)`` of its worst case.
    """
    if suite not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    RngState(seed)
    settings = settings or OptimizerSettings()
    assertions = _SUITE_FUNCS[suite](trials, seed, settings)
    reports = [a.report(seed) for a in assertions]
    return {
        "suite": suite,
        "trials": trials,
        "seed": seed,
        "passed": all(r["passed"] for r in reports),
        "assertions": reports,
    }

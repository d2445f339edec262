"""Deterministic generators for the four benchmark problem streams.

Each stream draws every round's data from counter-based substreams keyed by
``(seed, round, role)`` at construction time, computes certified bounds on the
loss gradient and constraint magnitude by interval arithmetic over the box,
and exposes rounds as pure, replayable functions of the round index. Streams
with identical (id, seed, horizon, params) are bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng
from .core import (
    AffineConstraints,
    Box,
    CapacityConstraint,
    ConfigurationError,
    ProblemSpec,
    RoundFunctions,
    Vector,
)
from .queues import affine_variation_bound


@dataclass(frozen=True)
class GeneratorConfig:
    """Identity of a generated stream; equal configs give bit-identical streams."""

    generator_id: str
    horizon: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.generator_id not in GENERATORS:
            raise ConfigurationError(
                f"unknown generator {self.generator_id!r}; known: {sorted(GENERATORS)}"
            )


class ProblemStream:
    """Round-indexed source of losses and constraints plus certified bounds."""

    def __init__(
        self,
        spec: ProblemSpec,
        config: GeneratorConfig,
        build_round: Callable[[int], RoundFunctions],
        variation_fn: Callable[[int], tuple[float, bool]],
        static_fn: Callable[[], tuple[RoundFunctions, Optional[Vector]]],
    ):
        self.spec = spec
        self.config = config
        self._build_round = build_round
        self._variation_fn = variation_fn
        self._static_fn = static_fn
        self._cache: dict[int, RoundFunctions] = {}

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def round(self, t: int) -> RoundFunctions:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside 1..{self.horizon}")
        rf = self._cache.get(t)
        if rf is None:
            rf = self._build_round(t)
            self._cache[t] = rf
        return rf

    def rounds(self):
        for t in range(1, self.horizon + 1):
            yield self.round(t)

    def variation_bound(self, t: int) -> tuple[float, bool]:
        """Bound on max_x ||g_t(x) - g_{t-1}(x)|| and whether it is certified."""
        if t < 2:
            raise IndexError("variation is defined for t >= 2")
        return self._variation_fn(t)

    def static_functions(self) -> tuple[RoundFunctions, Optional[Vector]]:
        """Summed loss with all rounds' constraints stacked, plus an anchor."""
        return self._static_fn()


def _merge_params(defaults: dict, params: dict, generator_id: str) -> dict:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigurationError(
            f"unknown params for {generator_id}: {sorted(unknown)}; allowed: {sorted(defaults)}"
        )
    merged = dict(defaults)
    merged.update(params)
    return merged


def _affine_range(matrix: np.ndarray, offset: np.ndarray, box: Box):
    """Per-row (min, max) of matrix @ x - offset over the box."""
    pos = np.clip(matrix, 0.0, None)
    neg = np.clip(matrix, None, 0.0)
    hi = pos @ box.upper + neg @ box.lower - offset
    lo = pos @ box.lower + neg @ box.upper - offset
    return lo, hi


def _affine_abs_bound(matrix, offset, box) -> float:
    lo, hi = _affine_range(matrix, offset, box)
    return float(np.max(np.maximum(np.abs(lo), np.abs(hi))))


def _affine_grad_norm_bound(matrix, offset, box) -> float:
    """Upper bound on max_x ||matrix @ x - offset|| via per-coordinate ranges."""
    lo, hi = _affine_range(matrix, offset, box)
    return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


def _affine_round(
    loss_value, loss_gradient, matrix, offset, anchor, loss_linear=None, loss_prox=None
) -> RoundFunctions:
    return RoundFunctions(
        loss_value=loss_value,
        loss_gradient=loss_gradient,
        constraint_values=lambda x, _m=matrix, _o=offset: _m @ x - _o,
        constraint_subgradient=lambda x, i, _m=matrix: _m[i],
        n_constraints=matrix.shape[0],
        affine=AffineConstraints(matrix, offset),
        loss_linear=loss_linear,
        loss_prox=loss_prox,
        feasible_anchor=anchor,
    )


# -- time-varying least squares ------------------------------------------------

TV_LEAST_SQUARES_DEFAULTS = {
    "dimension": 10,
    "n_constraints": 2,
    "loss_rows": 4,
    "box_low": 0.0,
    "box_high": 5.0,
}


def gen_tv_least_squares(cfg: GeneratorConfig) -> ProblemStream:
    """Least-squares tracking with freshly drawn affine constraints each round.

    Loss ``0.5 ||H_t x - y_t||^2`` with H_t entries uniform on [-1, 1) and
    targets ``y_t = H_t 1 + noise``; constraints ``A_t x - b_t`` with A_t
    uniform on [0, 1) and b_t uniform on (0, 1), so x = 0 is strictly feasible
    every round.
    """
    params = _merge_params(TV_LEAST_SQUARES_DEFAULTS, cfg.params, cfg.generator_id)
    p = int(params["dimension"])
    n = int(params["n_constraints"])
    rows = int(params["loss_rows"])
    box = Box.cube(params["box_low"], params["box_high"], p)
    T = cfg.horizon
    seed = cfg.seed

    h_all = np.empty((T, rows, p))
    y_all = np.empty((T, rows))
    a_all = np.empty((T, n, p))
    b_all = np.empty((T, n))
    for t in range(1, T + 1):
        g_loss = rng.substream(seed, t, rng.ROLE_LOSS)
        h = rng.uniform(g_loss, -1.0, 1.0, size=(rows, p))
        g_noise = rng.substream(seed, t, rng.ROLE_NOISE)
        eps = rng.standard_normal(g_noise, size=rows)
        g_cons = rng.substream(seed, t, rng.ROLE_CONSTRAINT)
        a = rng.uniform(g_cons, 0.0, 1.0, size=(n, p))
        b = rng.uniform(g_cons, 0.0, 1.0, size=n)
        h_all[t - 1] = h
        y_all[t - 1] = h.sum(axis=1) + eps
        a_all[t - 1] = a
        b_all[t - 1] = b

    grad_bound = 0.0
    cons_bound = 0.0
    for t in range(T):
        m = h_all[t].T @ h_all[t]
        c = h_all[t].T @ y_all[t]
        grad_bound = max(grad_bound, _affine_grad_norm_bound(m, c, box))
        cons_bound = max(cons_bound, _affine_abs_bound(a_all[t], b_all[t], box))

    spec = ProblemSpec(
        dimension=p,
        n_constraints=n,
        horizon=T,
        feasible=box,
        grad_bound=grad_bound,
        constraint_bound=cons_bound,
    )
    anchor = np.zeros(p)

    def build_round(t: int) -> RoundFunctions:
        h, y = h_all[t - 1], y_all[t - 1]
        a, b = a_all[t - 1], b_all[t - 1]

        def loss_value(x, _h=h, _y=y):
            r = _h @ x - _y
            return 0.5 * float(r @ r)

        def loss_gradient(x, _h=h, _y=y):
            return _h.T @ (_h @ x - _y)

        return _affine_round(loss_value, loss_gradient, a, b, anchor)

    def variation_fn(t: int):
        value = affine_variation_bound(
            a_all[t - 2], b_all[t - 2], a_all[t - 1], b_all[t - 1], box
        )
        return value, True

    def static_fn():
        m_sum = np.einsum("tij,tik->jk", h_all, h_all)
        c_sum = np.einsum("tij,ti->j", h_all, y_all)
        s0 = 0.5 * float(np.sum(y_all * y_all))
        mat = a_all.reshape(T * n, p)
        off = b_all.reshape(T * n)

        def loss_value(x):
            return 0.5 * float(x @ (m_sum @ x)) - float(c_sum @ x) + s0

        def loss_gradient(x):
            return m_sum @ x - c_sum

        return _affine_round(loss_value, loss_gradient, mat, off, anchor), anchor

    return ProblemStream(spec, cfg, build_round, variation_fn, static_fn)


# -- fixed-constraint quadratic / linear programs -------------------------------

QUADRATIC_DEFAULTS = {
    "dimension": 2,
    "n_constraints": 3,
    "box_low": 0.0,
    "box_high": 1.0,
    "drift_exponent": 0.1,
}

_PHASE_BLOCK = 5000


def _negative_mean_phase(t: int) -> bool:
    tt = ((t - 1) % _PHASE_BLOCK) + 1
    return tt <= 1500 or 2000 <= tt <= 3500 or tt >= 4000


class _SignTable:
    """Alternating-sign component from block permutations of 1..5000."""

    def __init__(self, seed: int):
        self.seed = seed
        self._blocks: dict[int, np.ndarray] = {}

    def sign(self, t: int) -> float:
        block = (t - 1) // _PHASE_BLOCK
        perm = self._blocks.get(block)
        if perm is None:
            gen = rng.substream(self.seed, block, rng.ROLE_PERMUTATION)
            perm = rng.permutation(gen, block * _PHASE_BLOCK + 1, (block + 1) * _PHASE_BLOCK)
            self._blocks[block] = perm
        mu = int(perm[(t - 1) % _PHASE_BLOCK])
        return -1.0 if mu % 2 else 1.0


def _drifting_targets(cfg: GeneratorConfig, params: dict) -> np.ndarray:
    """Per-round target vectors: bounded drift + phase-flipping mean + sign term."""
    p = int(params["dimension"])
    T = cfg.horizon
    exp = float(params["drift_exponent"])
    signs = _SignTable(cfg.seed)
    theta = np.empty((T, p))
    for t in range(1, T + 1):
        g_drift = rng.substream(cfg.seed, t, rng.ROLE_LOSS)
        width = float(t) ** exp
        part1 = rng.uniform(g_drift, -width, width, size=p)
        g_phase = rng.substream(cfg.seed, t, rng.ROLE_NOISE)
        if _negative_mean_phase(t):
            part2 = rng.uniform(g_phase, -1.0, 0.0, size=p)
        else:
            part2 = rng.uniform(g_phase, 0.0, 1.0, size=p)
        theta[t - 1] = part1 + part2 + signs.sign(t)
    return theta


def _fixed_constraints(cfg: GeneratorConfig, params: dict):
    p = int(params["dimension"])
    n = int(params["n_constraints"])
    gen = rng.substream(cfg.seed, 0, rng.ROLE_CONSTRAINT)
    a = rng.uniform(gen, 0.1, 0.5, size=(n, p))
    b = rng.uniform(gen, 0.0, 0.3, size=n)
    return a, b


def _make_fixed_constraint_stream(cfg: GeneratorConfig, quadratic: bool) -> ProblemStream:
    params = _merge_params(QUADRATIC_DEFAULTS, cfg.params, cfg.generator_id)
    p = int(params["dimension"])
    box = Box.cube(params["box_low"], params["box_high"], p)
    T = cfg.horizon
    theta = _drifting_targets(cfg, params)
    a_mat, b_off = _fixed_constraints(cfg, params)
    anchor = np.zeros(p)

    if quadratic:
        # grad = 2x + 18 theta: bound per coordinate over the box.
        coord_hi = np.maximum(
            np.abs(18.0 * theta + 2.0 * box.lower), np.abs(18.0 * theta + 2.0 * box.upper)
        )
        grad_bound = float(np.max(np.linalg.norm(coord_hi, axis=1)))
    else:
        grad_bound = float(np.max(np.linalg.norm(theta, axis=1)))
    cons_bound = _affine_abs_bound(a_mat, b_off, box)

    spec = ProblemSpec(
        dimension=p,
        n_constraints=int(params["n_constraints"]),
        horizon=T,
        feasible=box,
        grad_bound=grad_bound,
        constraint_bound=cons_bound,
        strong_convexity=1.0 if quadratic else 0.0,
    )

    def build_round(t: int) -> RoundFunctions:
        th = theta[t - 1]
        if quadratic:

            def loss_value(x, _th=th):
                d = x - _th
                return float(d @ d) + 20.0 * float(_th @ x)

            def loss_gradient(x, _th=th):
                return 2.0 * x + 18.0 * _th

            # f = ||x + 9 theta||^2 + const: prox form for exact projection solves.
            return _affine_round(
                loss_value, loss_gradient, a_mat, b_off, anchor, loss_prox=(1.0, -9.0 * th)
            )

        def loss_value(x, _th=th):
            return float(_th @ x)

        def loss_gradient(x, _th=th):
            return np.array(_th)

        return _affine_round(loss_value, loss_gradient, a_mat, b_off, anchor, loss_linear=th)

    def variation_fn(t: int):
        return 0.0, True

    def static_fn():
        s1 = theta.sum(axis=0)
        if quadratic:
            s2 = float(np.sum(theta * theta))

            def loss_value(x):
                return T * float(x @ x) + 18.0 * float(s1 @ x) + s2

            def loss_gradient(x):
                return 2.0 * T * x + 18.0 * s1

            rf = _affine_round(
                loss_value,
                loss_gradient,
                a_mat,
                b_off,
                anchor,
                loss_prox=(float(T), -9.0 * s1 / T),
            )
            return rf, anchor

        def loss_value(x):
            return float(s1 @ x)

        def loss_gradient(x):
            return np.array(s1)

        rf = _affine_round(loss_value, loss_gradient, a_mat, b_off, anchor, loss_linear=s1)
        return rf, anchor

    return ProblemStream(spec, cfg, build_round, variation_fn, static_fn)


def gen_quadratic_prog(cfg: GeneratorConfig) -> ProblemStream:
    """Strongly convex tracking objective with fixed affine constraints."""
    return _make_fixed_constraint_stream(cfg, quadratic=True)


def gen_linear_prog(cfg: GeneratorConfig) -> ProblemStream:
    """Linear objective variant of the fixed-constraint stream."""
    return _make_fixed_constraint_stream(cfg, quadratic=False)


# -- online job scheduling -------------------------------------------------------

JOB_SCHEDULING_DEFAULTS = {
    "n_centers": 100,
    "n_regions": 10,
    "box_high": 1000.0,
    "arrival_mean": 2500.0,
    "slots_per_day": 288,
    "price_csv": None,
    "price_base_low": 20.0,
    "price_base_high": 60.0,
    "price_daily_amplitude": 0.3,
    "price_noise_scale": 0.1,
    "service_weight": 4.0,
    "service_gain": 4.0,
}


def load_price_csv(path: str, n_regions: int) -> np.ndarray:
    """Load a ``timestamp,region,price`` table into a (slots, regions) array.

    Rows are grouped by timestamp in file order; every timestamp must cover
    all regions exactly once and prices must be nonnegative floats. Malformed
    rows abort with the offending line number.
    """
    stamps: list[str] = []
    table: dict[str, dict[str, float]] = {}
    regions: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "region", "price"]:
            raise ConfigurationError(f"{path}:1: expected header 'timestamp,region,price'")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ConfigurationError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
            stamp, region, price_text = (field.strip() for field in row)
            try:
                price = float(price_text)
            except ValueError:
                raise ConfigurationError(f"{path}:{line_no}: price {price_text!r} is not a number")
            if not np.isfinite(price) or price < 0:
                raise ConfigurationError(f"{path}:{line_no}: price must be finite and >= 0")
            if stamp not in table:
                table[stamp] = {}
                stamps.append(stamp)
            if region in table[stamp]:
                raise ConfigurationError(f"{path}:{line_no}: duplicate region {region!r} at {stamp}")
            table[stamp][region] = price
            regions.add(region)
    if len(regions) != n_regions:
        raise ConfigurationError(
            f"{path}: expected {n_regions} regions, found {len(regions)}"
        )
    ordered_regions = sorted(regions)
    prices = np.empty((len(stamps), n_regions))
    for i, stamp in enumerate(stamps):
        row = table[stamp]
        if len(row) != n_regions:
            raise ConfigurationError(f"{path}: timestamp {stamp} covers {len(row)} regions")
        prices[i] = [row[r] for r in ordered_regions]
    return prices


def gen_job_scheduling(cfg: GeneratorConfig) -> ProblemStream:
    """Power allocation across data centers against Poisson job arrivals.

    Cost is linear in the allocation with per-center prices following a daily
    sinusoid over a per-center base rate plus day-seeded noise (or an ingested
    price table); the single constraint requires total log-service capacity to
    cover the arrivals.
    """
    params = _merge_params(JOB_SCHEDULING_DEFAULTS, cfg.params, cfg.generator_id)
    centers = int(params["n_centers"])
    regions = int(params["n_regions"])
    if centers % regions != 0:
        raise ConfigurationError("n_centers must be a multiple of n_regions")
    per_region = centers // regions
    box = Box.cube(0.0, params["box_high"], centers)
    T = cfg.horizon
    seed = cfg.seed
    mean = float(params["arrival_mean"])
    slots = int(params["slots_per_day"])
    weight = float(params["service_weight"])
    gain = float(params["service_gain"])

    if params["price_csv"] is not None:
        table = load_price_csv(params["price_csv"], regions)
        if table.shape[0] < T:
            raise ConfigurationError(
                f"price table has {table.shape[0]} slots, horizon needs {T}"
            )
        prices = np.repeat(table[:T], per_region, axis=1)
    else:
        g_base = rng.substream(seed, 0, rng.ROLE_PRICE)
        base = rng.uniform(
            g_base, params["price_base_low"], params["price_base_high"], size=centers
        )
        prices = np.empty((T, centers))
        amp = float(params["price_daily_amplitude"])
        noise_scale = float(params["price_noise_scale"])
        for t in range(1, T + 1):
            day = (t - 1) // slots
            z = rng.standard_normal(rng.substream(seed, day, rng.ROLE_NOISE), size=centers)
            season = 1.0 + amp * np.sin(2.0 * np.pi * t / slots)
            prices[t - 1] = np.clip(base * (season + noise_scale * z), 0.0, None)

    arrivals = np.empty(T)
    for t in range(1, T + 1):
        g_arr = rng.substream(seed, t, rng.ROLE_ARRIVALS)
        arrivals[t - 1] = float(rng.poisson(g_arr, mean))

    total_capacity = float(np.sum(weight * np.log1p(gain * box.upper)))
    cons_bound = float(np.max(np.maximum(arrivals, total_capacity - arrivals)))
    grad_bound = float(np.max(np.linalg.norm(prices, axis=1)))

    spec = ProblemSpec(
        dimension=centers,
        n_constraints=1,
        horizon=T,
        feasible=box,
        grad_bound=grad_bound,
        constraint_bound=cons_bound,
    )

    def capacity_round(demand: float, cost: np.ndarray) -> RoundFunctions:
        cap = CapacityConstraint(demand=demand, weight=weight, gain=gain)
        anchor = np.array(box.upper) if demand < total_capacity else None

        def constraint_values(x, _d=demand):
            return np.array([_d - float(np.sum(weight * np.log1p(gain * x)))])

        def constraint_subgradient(x, i):
            return -(weight * gain) / (1.0 + gain * x)

        return RoundFunctions(
            loss_value=lambda x, _c=cost: float(_c @ x),
            loss_gradient=lambda x, _c=cost: np.array(_c),
            constraint_values=constraint_values,
            constraint_subgradient=constraint_subgradient,
            n_constraints=1,
            capacity=cap,
            loss_linear=cost,
            feasible_anchor=anchor,
        )

    def build_round(t: int) -> RoundFunctions:
        return capacity_round(float(arrivals[t - 1]), prices[t - 1])

    def variation_fn(t: int):
        # Rounds differ only by the arrival shift, so the movement is exact.
        return abs(float(arrivals[t - 1] - arrivals[t - 2])), True

    def static_fn():
        rf = capacity_round(float(np.max(arrivals)), prices.sum(axis=0))
        return rf, rf.feasible_anchor

    return ProblemStream(spec, cfg, build_round, variation_fn, static_fn)


GENERATORS: dict[str, Callable[[GeneratorConfig], ProblemStream]] = {
    "tv_least_squares": gen_tv_least_squares,
    "quadratic_prog": gen_quadratic_prog,
    "linear_prog": gen_linear_prog,
    "job_scheduling": gen_job_scheduling,
}

DEFAULT_HORIZONS = {
    "tv_least_squares": 1000,
    "quadratic_prog": 5000,
    "linear_prog": 5000,
    "job_scheduling": 2880,
}


def make_stream(cfg: GeneratorConfig) -> ProblemStream:
    """Build the stream named by the config."""
    return GENERATORS[cfg.generator_id](cfg)

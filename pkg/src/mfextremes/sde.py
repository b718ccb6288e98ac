"""Euler-Maruyama engines for the interacting system and its McKean-Vlasov limit.

All simulators write into an ``(N, steps + 1)`` array of positions on a uniform
grid. The mean-field value at step ``k`` is always computed from the time-``t_k``
ensemble (explicit scheme). Randomness comes from per-role streams derived from
``(seed, role, replication_id)`` so replications can run in any order and on
any number of workers without changing a single bit of output.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .model import ClosedFormLaw, ModelSpec

__all__ = [
    "LawCloud",
    "NonFiniteStateError",
    "PicardConvergenceError",
    "Role",
    "SimConfig",
    "TrajectoryBatch",
    "build_law_cloud",
    "empirical_mean_field",
    "load_paths_binary",
    "make_stream",
    "mean_field_values",
    "save_paths_binary",
    "simulate_iid_copies",
    "simulate_interacting",
    "step_interacting",
]

# Row count per block when evaluating a generic kernel matrix.
_KERNEL_BLOCK_ELEMENTS = 1 << 22


class NonFiniteStateError(FloatingPointError):
    def __init__(self, particle: int, step: int, value: float):
        self.particle = particle
        self.step = step
        self.value = value
        super().__init__(f"particle {particle} became non-finite ({value}) at step {step}")


class PicardConvergenceError(RuntimeError):
    pass


class Role(enum.IntEnum):
    INTERACTING = 0
    IID = 1
    CLOUD = 2
    CALIBRATION = 3


def make_stream(seed: int, replication_id: int, role: Role) -> np.random.Generator:
    """Independent generator for one (seed, replication, role) triple."""
    if seed < 0 or replication_id < 0:
        raise ValueError("seed and replication_id must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(role), int(replication_id)]))


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    horizon: float
    steps: int
    seed: int = 0
    replication_id: int = 0
    record_increments: bool = False

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


@dataclass
class TrajectoryBatch:
    grid: np.ndarray
    values: np.ndarray
    increments: Optional[np.ndarray] = None

    def __post_init__(self):
        n_times = self.grid.shape[0]
        if self.values.ndim != 2 or self.values.shape[1] != n_times:
            raise ValueError(f"values shape {self.values.shape} does not match grid of {n_times} times")
        if self.increments is not None and self.increments.shape != (self.values.shape[0], n_times - 1):
            raise ValueError(f"increments shape {self.increments.shape} inconsistent with values {self.values.shape}")

    @property
    def n_particles(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.grid.shape[0] - 1

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def endpoints(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass
class LawCloud:
    """Frozen ensemble of independent limit-law paths standing in for ``mu_t``.

    Summaries for the model's fast mean-field rule are cached per step; call
    :meth:`prepare` before sharing a cloud with forked workers so the cache is
    built once.
    """

    grid: np.ndarray
    cloud: np.ndarray
    generation: int = 0
    _summaries: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.cloud.ndim != 2 or self.cloud.shape[1] != self.grid.shape[0]:
            raise ValueError(f"cloud shape {self.cloud.shape} does not match grid")
        if self.cloud.shape[0] < 1:
            raise ValueError("a law cloud needs at least one path")

    @property
    def size(self) -> int:
        return self.cloud.shape[0]

    def summary(self, k: int, model: ModelSpec):
        rule = model.mean_field_rule
        key = (rule.name, k)
        if key not in self._summaries:
            self._summaries[key] = rule.prepare(self.grid[k], self.cloud[:, : k + 1])
        return self._summaries[key]

    def prepare(self, model: ModelSpec) -> "LawCloud":
        if model.mean_field_rule is not None:
            for k in range(self.grid.shape[0]):
                self.summary(k, model)
        return self


Law = Union[LawCloud, ClosedFormLaw]


def empirical_mean_field(x: np.ndarray, ensemble: np.ndarray, t: float, model: ModelSpec) -> np.ndarray:
    """Direct kernel average ``(1/M) sum_j g(t, x, y^j)`` over an ensemble.

    ``x`` is one prefix ``(k+1,)`` or a stack ``(n, k+1)``; ``ensemble`` has
    shape ``(M, k+1)``. This is the O(n M) reference path, evaluated in row
    blocks of fixed size.
    """
    ensemble = np.asarray(ensemble, dtype=float)
    if ensemble.ndim != 2 or ensemble.shape[0] == 0:
        raise ValueError("ensemble must be a nonempty (M, k+1) array")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x[None, :] if single else x
    m = ensemble.shape[0]
    block = max(1, _KERNEL_BLOCK_ELEMENTS // (m * ensemble.shape[1]))
    out = np.empty(xs.shape[0])
    for start in range(0, xs.shape[0], block):
        rows = xs[start : start + block]
        vals = np.broadcast_to(model.kernel(t, rows[:, None, :], ensemble[None, :, :]), (rows.shape[0], m))
        out[start : start + block] = vals.mean(axis=1)
    return out[0] if single else out


def mean_field_values(x: np.ndarray, ensemble: np.ndarray, t: float, model: ModelSpec) -> np.ndarray:
    """Mean-field values using the model's fast rule when it has one."""
    rule = model.mean_field_rule
    if rule is None:
        return empirical_mean_field(x, ensemble, t, model)
    return rule.evaluate(rule.prepare(t, ensemble), t, x)


def _law_mean_field(law: Law, k: int, t: float, x: np.ndarray, model: ModelSpec) -> np.ndarray:
    if isinstance(law, ClosedFormLaw):
        return law.mean_field(t, x)
    if model.mean_field_rule is not None:
        return model.mean_field_rule.evaluate(law.summary(k, model), t, x)
    return empirical_mean_field(x, law.cloud[:, : k + 1], t, model)


def _advance(values: np.ndarray, k: int, t: float, dt: float, r, dW: np.ndarray, model: ModelSpec):
    x = values[:, : k + 1]
    a = model.diffusion(t, x)
    drift = model.drift_interaction(t, x, r)
    c = model.drift_free(t, x)
    new = x[:, -1] + a * (drift * dt + dW) + c * dt
    if not np.all(np.isfinite(new)):
        bad = int(np.flatnonzero(~np.isfinite(new))[0])
        raise NonFiniteStateError(bad, k, float(new[bad]))
    values[:, k + 1] = new


def _increments(rng, n, k, dt, noise):
    if noise is not None:
        return noise[:, k]
    return rng.standard_normal(n) * math.sqrt(dt)


def _new_batch(config: SimConfig, model: ModelSpec, rng: np.random.Generator) -> TrajectoryBatch:
    values = np.empty((config.n_particles, config.steps + 1))
    values[:, 0] = model.sample_initial(rng, config.n_particles)
    increments = np.empty((config.n_particles, config.steps)) if config.record_increments else None
    return TrajectoryBatch(grid=config.grid, values=values, increments=increments)


def _check_noise(noise, config: SimConfig):
    if noise is None:
        return None
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (config.n_particles, config.steps):
        raise ValueError(f"noise shape {noise.shape} != {(config.n_particles, config.steps)}")
    return noise


def step_interacting(
    state: TrajectoryBatch,
    k: int,
    model: ModelSpec,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> TrajectoryBatch:
    """Advance every particle from ``t_k`` to ``t_{k+1}`` in place.

    The mean-field value of each particle is read from the co-simulated
    ensemble at ``t_k``. Brownian increments come from ``noise[:, k]`` when
    given, otherwise from ``rng``.
    """
    if not 0 <= k < state.steps:
        raise IndexError(f"step {k} outside 0..{state.steps - 1}")
    t, dt = float(state.grid[k]), float(state.grid[k + 1] - state.grid[k])
    dW = _increments(rng, state.n_particles, k, dt, noise)
    prefix = state.values[:, : k + 1]
    r = mean_field_values(prefix, prefix, t, model)
    _advance(state.values, k, t, dt, r, dW, model)
    if state.increments is not None:
        state.increments[:, k] = dW
    return state


def simulate_interacting(config: SimConfig, model: ModelSpec, noise: Optional[np.ndarray] = None) -> TrajectoryBatch:
    """Simulate the N-particle system on the full grid.

    The output is a deterministic function of ``(seed, replication_id)``,
    the config and the model.
    """
    noise = _check_noise(noise, config)
    rng = make_stream(config.seed, config.replication_id, Role.INTERACTING)
    batch = _new_batch(config, model, rng)
    for k in range(config.steps):
        step_interacting(batch, k, model, rng, noise)
    return batch


def _simulate_against(
    config: SimConfig,
    model: ModelSpec,
    law: Optional[Law],
    rng: np.random.Generator,
    noise: Optional[np.ndarray] = None,
    drift_free_only: bool = False,
) -> TrajectoryBatch:
    batch = _new_batch(config, model, rng)
    grid, values = batch.grid, batch.values
    dt = config.dt
    for k in range(config.steps):
        t = float(grid[k])
        dW = _increments(rng, config.n_particles, k, dt, noise)
        if drift_free_only:
            x = values[:, : k + 1]
            new = x[:, -1] + model.diffusion(t, x) * dW + model.drift_free(t, x) * dt
            if not np.all(np.isfinite(new)):
                bad = int(np.flatnonzero(~np.isfinite(new))[0])
                raise NonFiniteStateError(bad, k, float(new[bad]))
            values[:, k + 1] = new
        else:
            r = _law_mean_field(law, k, t, values[:, : k + 1], model)
            _advance(values, k, t, dt, r, dW, model)
        if batch.increments is not None:
            batch.increments[:, k] = dW
    return batch


def _check_grid(law: Law, config: SimConfig):
    if isinstance(law, LawCloud):
        grid = config.grid
        if law.grid.shape != grid.shape or not np.allclose(law.grid, grid, rtol=0, atol=1e-12):
            raise ValueError(
                f"law grid ({law.grid.shape[0] - 1} steps to T={law.grid[-1]}) does not match "
                f"config grid ({config.steps} steps to T={config.horizon})"
            )


def simulate_iid_copies(
    config: SimConfig,
    model: ModelSpec,
    law: Law,
    noise: Optional[np.ndarray] = None,
    role: Role = Role.IID,
) -> TrajectoryBatch:
    """N independent copies of the limit equation driven by a frozen law.

    The mean-field term reads ``law`` only, never the co-simulated copies.
    """
    _check_grid(law, config)
    noise = _check_noise(noise, config)
    rng = make_stream(config.seed, config.replication_id, role)
    return _simulate_against(config, model, law, rng, noise)


def build_law_cloud(
    config: SimConfig,
    model: ModelSpec,
    picard_iters: int = 3,
    tol: Optional[float] = None,
    use_closed_form: bool = True,
) -> LawCloud:
    """Approximate the limit law by Picard iteration over frozen clouds.

    A seed cloud of drift-free paths (``B`` switched off) starts the
    iteration. Generation 0 simulates ``config.n_particles`` paths whose
    mean-field term reads the seed; generation ``j`` reads the frozen
    generation ``j - 1``; generation ``picard_iters`` is returned. When the
    model has a closed-form law and ``use_closed_form`` is set, a single
    generation-0 cloud reading the analytic mean field is returned instead.

    Raises :class:`PicardConvergenceError` when the time-T means of the last
    two generations differ by more than ``tol`` (default: five combined
    standard errors).
    """
    m = config.n_particles
    if m < 2:
        raise ValueError(f"cloud size must be >= 2, got {m}")
    if picard_iters < 1:
        raise ValueError(f"picard_iters must be >= 1, got {picard_iters}")
    seeds = np.random.SeedSequence([int(config.seed), int(Role.CLOUD), int(config.replication_id)])
    children = seeds.spawn(picard_iters + 2)
    plain = SimConfig(m, config.horizon, config.steps, config.seed, config.replication_id)

    if use_closed_form and model.closed_form_law is not None:
        batch = _simulate_against(plain, model, model.closed_form_law, np.random.default_rng(children[1]))
        return LawCloud(grid=batch.grid, cloud=batch.values, generation=0)

    seed_paths = _simulate_against(plain, model, None, np.random.default_rng(children[0]), drift_free_only=True)
    previous = None
    current = LawCloud(grid=plain.grid, cloud=seed_paths.values, generation=-1)
    for gen in range(0, picard_iters + 1):
        if model.mean_field_rule is not None:
            current.prepare(model)
        batch = _simulate_against(plain, model, current, np.random.default_rng(children[gen + 1]))
        previous, current = current, LawCloud(grid=batch.grid, cloud=batch.values, generation=gen)

    last, before = current.cloud[:, -1], previous.cloud[:, -1]
    gap = abs(float(np.mean(last)) - float(np.mean(before)))
    if tol is None:
        tol = 5.0 * math.sqrt((np.var(last, ddof=1) + np.var(before, ddof=1)) / m)
    if gap > tol:
        raise PicardConvergenceError(
            f"generations {previous.generation} and {current.generation} have time-T means "
            f"{np.mean(before):.6g} and {np.mean(last):.6g} (gap {gap:.3g} > tol {tol:.3g})"
        )
    return current


_HEADER = struct.Struct("<qqd")


def save_paths_binary(path: Union[str, Path], batch: TrajectoryBatch) -> None:
    """Write ``N, steps`` (int64) and ``T`` (float64), then row-major float64 paths, little-endian."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(batch.n_particles, batch.steps, float(batch.grid[-1])))
        fh.write(np.ascontiguousarray(batch.values, dtype="<f8").tobytes())


def load_paths_binary(path: Union[str, Path]) -> TrajectoryBatch:
    raw = Path(path).read_bytes()
    n, steps, horizon = _HEADER.unpack_from(raw)
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if values.size != n * (steps + 1):
        raise ValueError(f"{path}: expected {n * (steps + 1)} doubles, found {values.size}")
    return TrajectoryBatch(
        grid=np.linspace(0.0, horizon, steps + 1),
        values=values.reshape(n, steps + 1).astype(float),
    )

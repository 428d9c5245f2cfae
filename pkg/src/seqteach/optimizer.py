"""Zeroth-order search over schedule logits.

The expected terminal cost of a schedule is only reachable through
noisy rollouts (sample a sequence, train a learner, measure test
error), so the search estimates gradients from random-direction finite
differences and feeds them to SGD with momentum. Stage one ties the
two endpoint distributions together and optimizes a single stationary
distribution; stage two starts from that solution and frees both
endpoints.
"""

from __future__ import annotations

import concurrent.futures
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, learner, schedule
from .seeds import mix
from .vocab import PhonemeInventory, PoolSplit, Vocabulary


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float = 0.01
    gamma: float = 0.9
    delta: float = 0.01
    n_dirs: int = 20
    n_seq: int = 5
    n_steps: int = 40
    horizon: int = 10000
    learner_seed_policy: str = "fixed"  # or "per_sequence"
    stage: str = "one"  # or "two"
    use_crn: bool = True

    def __post_init__(self):
        if self.eta <= 0 or self.delta <= 0:
            raise ValueError("eta and delta must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if min(self.n_dirs, self.n_seq) < 1 or self.n_steps < 0:
            raise ValueError("n_dirs, n_seq must be >= 1 and n_steps >= 0")
        if self.learner_seed_policy not in ("fixed", "per_sequence"):
            raise ValueError(f"unknown learner_seed_policy {self.learner_seed_policy!r}")
        if self.stage not in ("one", "two"):
            raise ValueError(f"stage must be 'one' or 'two', got {self.stage!r}")


@dataclass(frozen=True)
class OptimizerRunState:
    z: np.ndarray
    gamma_buf: np.ndarray
    step: int
    config: OptimizerConfig
    cost_history: tuple[tuple[int, float, float], ...] = ()
    best_z: np.ndarray | None = None
    best_mean: float = float("inf")
    master_seed: int = 0
    stage_tag: str = "stage1"


def initial_run_state(
    z0: np.ndarray, config: OptimizerConfig, master_seed: int, stage_tag: str
) -> OptimizerRunState:
    return OptimizerRunState(
        z=np.asarray(z0, dtype=np.float64).copy(),
        gamma_buf=np.zeros(len(z0)),
        step=0,
        config=config,
        cost_history=(),
        best_z=None,
        best_mean=float("inf"),
        master_seed=master_seed,
        stage_tag=stage_tag,
    )


# ----------------------------------------------------------------------
# Rollout machinery

@dataclass(frozen=True)
class RolloutContext:
    """Precomputed arrays for fast schedule evaluation on one split."""

    K: int
    bit_idx: np.ndarray
    bit_count: np.ndarray
    Y_pool: np.ndarray
    O_test: np.ndarray
    Y_test: np.ndarray
    inventory: PhonemeInventory
    horizon: int
    learner_seed: int
    lr: float = learner.DEFAULT_LR
    momentum: float = learner.DEFAULT_MOMENTUM


def build_context(
    vocab: Vocabulary,
    split: PoolSplit,
    horizon: int,
    learner_seed: int,
    lr: float = learner.DEFAULT_LR,
    momentum: float = learner.DEFAULT_MOMENTUM,
) -> RolloutContext:
    pool_items = [vocab[int(i)] for i in split.pool_indices]
    test_items = [vocab[int(i)] for i in split.test_indices]
    if not test_items:
        raise ValueError("empty test set")
    bit_lists = [np.flatnonzero(it.o) for it in pool_items]
    width = max(len(b) for b in bit_lists)
    bit_idx = np.zeros((len(pool_items), width), dtype=np.int64)
    bit_count = np.zeros(len(pool_items), dtype=np.int64)
    for k, b in enumerate(bit_lists):
        bit_idx[k, : len(b)] = b
        bit_count[k] = len(b)
    return RolloutContext(
        K=len(pool_items),
        bit_idx=bit_idx,
        bit_count=bit_count,
        Y_pool=np.stack([it.y for it in pool_items]),
        O_test=np.stack([it.o for it in test_items]),
        Y_test=np.stack([it.y for it in test_items]),
        inventory=vocab.inventory,
        horizon=horizon,
        learner_seed=learner_seed,
        lr=lr,
        momentum=momentum,
    )


def rollout(
    ctx: RolloutContext,
    P: np.ndarray,
    Q: np.ndarray,
    seq_seed: int,
    learner_seed: int,
) -> float:
    """Sample one sequence, train one fresh learner, return its cost."""
    seq = schedule.sample_interpolated_indices(P, Q, ctx.horizon, seq_seed)
    st = learner.init_learner(learner_seed, lr=ctx.lr, momentum=ctx.momentum)
    _kernels.train_on_sequence(
        st.W1, st.b1, st.W2, st.b2, st.vW1, st.vb1, st.vW2, st.vb2,
        ctx.bit_idx, ctx.bit_count, ctx.Y_pool, seq, ctx.lr, ctx.momentum,
    )
    return learner.batch_terminal_cost(
        st.W1, st.b1, st.W2, st.b2, ctx.O_test, ctx.Y_test, ctx.inventory
    )


_WORKER_CTX: RolloutContext | None = None


def _run_rollout_task(args):
    P, Q, seq_seed, learner_seed = args
    return rollout(_WORKER_CTX, P, Q, seq_seed, learner_seed)


class CostObjective:
    """Expected terminal cost of schedule logits z, with batching.

    Evaluations are expanded into independent rollout tasks keyed by
    position, so results are identical for any worker count. The
    worker pool is forked lazily on first use and must be closed by
    the owner (or used as a context manager).
    """

    def __init__(self, ctx: RolloutContext, config: OptimizerConfig, workers: int = 1):
        self.ctx = ctx
        self.config = config
        self.workers = max(1, int(workers))
        self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def decode(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map logits to endpoint probability vectors per the stage."""
        K = self.ctx.K
        if self.config.stage == "one":
            if len(z) != K - 1:
                raise ValueError(f"stage one expects {K - 1} logits, got {len(z)}")
            P = schedule.softmax_full(np.concatenate([z, [1.0]]))
            return P, P
        if len(z) != 2 * K - 2:
            raise ValueError(f"stage two expects {2 * K - 2} logits, got {len(z)}")
        P = schedule.softmax_full(np.concatenate([z[: K - 1], [1.0]]))
        Q = schedule.softmax_full(np.concatenate([z[K - 1 :], [1.0]]))
        return P, Q

    def _learner_seed(self, eval_seed: int, replicate: int) -> int:
        if self.config.learner_seed_policy == "fixed":
            return self.ctx.learner_seed
        return mix(eval_seed, "learner", replicate)

    def _map(self, tasks: list[tuple]) -> np.ndarray:
        global _WORKER_CTX
        if self.workers == 1 or len(tasks) == 1:
            _WORKER_CTX = self.ctx
            return np.array([_run_rollout_task(t) for t in tasks])
        if self._pool is None:
            _WORKER_CTX = self.ctx
            mp_ctx = multiprocessing.get_context("fork")
            self._pool = concurrent.futures.ProcessPoolExecutor(
                max_workers=self.workers, mp_context=mp_ctx
            )
        chunk = max(1, len(tasks) // (4 * self.workers))
        costs = list(self._pool.map(_run_rollout_task, tasks, chunksize=chunk))
        return np.array(costs)

    def evaluate_many(self, pairs: list[tuple[np.ndarray, int]]) -> list[tuple[float, float]]:
        n_seq = self.config.n_seq
        tasks = []
        for z, eval_seed in pairs:
            P, Q = self.decode(z)
            for i in range(n_seq):
                tasks.append((P, Q, mix(eval_seed, "seq", i), self._learner_seed(eval_seed, i)))
        costs = self._map(tasks).reshape(len(pairs), n_seq)
        means = costs.mean(axis=1)
        if n_seq > 1:
            errs = costs.std(axis=1, ddof=1) / np.sqrt(n_seq)
        else:
            errs = np.zeros(len(pairs))
        return list(zip(means.tolist(), errs.tolist()))

    def evaluate(self, z: np.ndarray, eval_seed: int) -> tuple[float, float]:
        return self.evaluate_many([(z, eval_seed)])[0]


class QuadraticHook:
    """Deterministic objective 0.5 * ||z||^2 for estimator validation."""

    def evaluate(self, z: np.ndarray, eval_seed: int) -> tuple[float, float]:
        return 0.5 * float(z @ z), 0.0

    def evaluate_many(self, pairs):
        return [self.evaluate(z, s) for z, s in pairs]


def expected_terminal_cost(
    z: np.ndarray,
    ctx: RolloutContext,
    config: OptimizerConfig,
    seed: int,
    workers: int = 1,
) -> tuple[float, float]:
    """Mean and standard error of the cost over n_seq fresh rollouts."""
    with CostObjective(ctx, config, workers) as obj:
        return obj.evaluate(z, seed)


# ----------------------------------------------------------------------
# Gradient estimation and the update rule

def sample_unit_vector(dim: int, seed: int) -> np.ndarray:
    """Uniformly random point on the unit sphere, deterministic in seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    norm = np.linalg.norm(v)
    while norm == 0.0:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
    return v / norm


def estimate_gradient(
    z: np.ndarray,
    objective,
    config: OptimizerConfig,
    seed: int,
    base_mean: float | None = None,
) -> np.ndarray:
    """Random-direction finite-difference gradient estimate.

    Averages (cost(z + delta*v_d) - cost(z)) * v_d over n_dirs unit
    directions and scales by dim/delta. The baseline cost(z) is
    evaluated once and shared by every direction; with common random
    numbers enabled the perturbed evaluations reuse the baseline's
    seed, otherwise each direction gets its own.
    """
    dim = len(z)
    delta = config.delta
    base_seed = mix(seed, "base")
    if base_mean is None:
        base_mean = objective.evaluate(z, base_seed)[0]
    dirs = [sample_unit_vector(dim, mix(seed, "dir", d)) for d in range(config.n_dirs)]
    if config.use_crn:
        pairs = [(z + delta * v, base_seed) for v in dirs]
    else:
        pairs = [(z + delta * v, mix(seed, "eval", d)) for d, v in enumerate(dirs)]
    results = objective.evaluate_many(pairs)
    g = np.zeros(dim)
    for v, (mean, _) in zip(dirs, results):
        g += (mean - base_mean) * v
    return g * (dim / (delta * config.n_dirs))


def sgd_step(state: OptimizerRunState, grad: np.ndarray) -> OptimizerRunState:
    """Momentum update: buf <- gamma*buf + eta*g; z <- z - buf."""
    if grad.shape != state.z.shape:
        raise ValueError("gradient shape mismatch")
    if not np.isfinite(grad).all():
        raise ValueError("non-finite gradient; step aborted")
    buf = state.config.gamma * state.gamma_buf + state.config.eta * grad
    return replace(state, z=state.z - buf, gamma_buf=buf, step=state.step + 1)


# ----------------------------------------------------------------------
# Stage drivers

def run_stage(
    objective,
    state: OptimizerRunState,
    progress=None,
    checkpoint=None,
) -> OptimizerRunState:
    """Drive estimate_gradient + sgd_step for the remaining steps.

    Records one cost_history entry per step plus a final evaluation,
    tracks the best-by-mean iterate, and optionally calls
    checkpoint(state) after every step. Resuming from a checkpointed
    state continues the identical trajectory.
    """
    config = state.config
    while state.step < config.n_steps:
        s = state.step
        step_seed = mix(state.master_seed, state.stage_tag, s)
        mean, err = objective.evaluate(state.z, mix(step_seed, "base"))
        state = _record(state, s, mean, err)
        grad = estimate_gradient(state.z, objective, config, step_seed, base_mean=mean)
        state = sgd_step(state, grad)
        if progress is not None:
            progress(s, mean, err)
        if checkpoint is not None:
            checkpoint(state)
    if len(state.cost_history) == config.n_steps:
        final_seed = mix(state.master_seed, state.stage_tag, config.n_steps)
        mean, err = objective.evaluate(state.z, mix(final_seed, "base"))
        state = _record(state, config.n_steps, mean, err)
        if progress is not None:
            progress(config.n_steps, mean, err)
        if checkpoint is not None:
            checkpoint(state)
    return state


def _record(state: OptimizerRunState, s: int, mean: float, err: float) -> OptimizerRunState:
    hist = state.cost_history + ((s, mean, err),)
    if mean < state.best_mean:
        return replace(state, cost_history=hist, best_mean=mean, best_z=state.z.copy())
    return replace(state, cost_history=hist)


def optimize_stage1(
    ctx: RolloutContext,
    config: OptimizerConfig,
    master_seed: int,
    workers: int = 1,
    progress=None,
    checkpoint=None,
    state: OptimizerRunState | None = None,
) -> tuple[schedule.Multinomial, OptimizerRunState]:
    """Optimize a stationary distribution from a uniform start.

    Returns the best-by-mean-cost iterate as a multinomial, plus the
    completed run state. Pass a checkpointed state to resume.
    """
    cfg = replace(config, stage="one")
    if state is None:
        z0 = schedule.probs_to_logits(schedule.uniform_multinomial(ctx.K)).free
        state = initial_run_state(z0, cfg, master_seed, "stage1")
    with CostObjective(ctx, cfg, workers) as obj:
        state = run_stage(obj, state, progress, checkpoint)
        best = state.best_z if state.best_z is not None else state.z
        P, _ = obj.decode(best)
    return schedule.Multinomial(P), state


def optimize_stage2(
    p_bar: schedule.Multinomial,
    ctx: RolloutContext,
    config: OptimizerConfig,
    master_seed: int,
    workers: int = 1,
    progress=None,
    checkpoint=None,
    state: OptimizerRunState | None = None,
) -> tuple[tuple[schedule.Multinomial, schedule.Multinomial], OptimizerRunState]:
    """Optimize both endpoints starting from (p_bar, p_bar)."""
    cfg = replace(config, stage="two")
    if state is None:
        half = schedule.probs_to_logits(p_bar).free
        state = initial_run_state(np.concatenate([half, half]), cfg, master_seed, "stage2")
    with CostObjective(ctx, cfg, workers) as obj:
        state = run_stage(obj, state, progress, checkpoint)
        best = state.best_z if state.best_z is not None else state.z
        P, Q = obj.decode(best)
    return (schedule.Multinomial(P), schedule.Multinomial(Q)), state


# ----------------------------------------------------------------------
# Final sequence selection

@dataclass(frozen=True)
class SelectionResult:
    sequence: schedule.TrainingSequence
    best_cost: float
    mean_cost: float
    stderr: float
    costs: np.ndarray = field(repr=False, default=None)


def select_best_sequence(
    P: schedule.Multinomial,
    Q: schedule.Multinomial,
    ctx: RolloutContext,
    N: int,
    seed: int,
    workers: int = 1,
    dist_id: str = "optimized",
    learner_seed_policy: str = "fixed",
) -> SelectionResult:
    """Sample N sequences, train a learner on each, keep the best.

    The N costs double as the evaluation sample for the schedule, so
    the result carries their mean and standard error too.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    seq_seeds = [mix(seed, "select", i) for i in range(N)]
    if learner_seed_policy == "fixed":
        learner_seeds = [ctx.learner_seed] * N
    else:
        learner_seeds = [mix(seed, "select-learner", i) for i in range(N)]
    tasks = [
        (P.probs, Q.probs, ss, ls) for ss, ls in zip(seq_seeds, learner_seeds)
    ]
    obj = CostObjective(ctx, OptimizerConfig(), workers)
    try:
        costs = obj._map(tasks)
    finally:
        obj.close()
    best = int(np.argmin(costs))
    idx = schedule.sample_interpolated_indices(P.probs, Q.probs, ctx.horizon, seq_seeds[best])
    seq = schedule.TrainingSequence(item_indices=idx, provenance=(dist_id, seq_seeds[best]))
    stderr = float(costs.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0
    return SelectionResult(
        sequence=seq,
        best_cost=float(costs[best]),
        mean_cost=float(costs.mean()),
        stderr=stderr,
        costs=costs,
    )

"""Experiment orchestration, configuration, persistence, and reports.

The two experiments mirror the structure of the study this package
supports: an efficiency sweep over training-pool sizes (batch training
to convergence, efficiency = correct test words / K) and a schedule
comparison (baseline samplers against the two optimization stages,
with best-sequence selection and pairwise significance tests). Runs
are driven by a TOML config, emit JSON/CSV/SVG reports, and are
deterministic in the master seed down to the report bytes.
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import analysis, learner, optimizer, schedule, vocab as vocab_mod
from .seeds import mix

DESK_SYNTHETIC = {
    "n_words": 300,
    "n_consonants": 10,
    "n_vowel_graphemes": 5,
    "exception_rate": 0.2,
    "zipf_exponent": 1.0,
}

# Desk-scale search hyperparameters. The step size and probe radius are
# much larger than the full-scale defaults in OptimizerConfig: with only
# 40 outer steps the iterate has to cover several logit units, and the
# finite-difference probe has to clear the rollout noise floor.
DESK_OPTIMIZER = optimizer.OptimizerConfig(
    eta=0.3,
    gamma=0.9,
    delta=0.5,
    n_dirs=12,
    n_seq=5,
    n_steps=40,
    horizon=1500,
)

DESK_K = 60
DESK_N_SELECT = 50


@dataclass(frozen=True)
class ExperimentConfig:
    vocab_path: str | None = None
    inventory_path: str | None = None
    synthetic: dict | None = field(default_factory=lambda: dict(DESK_SYNTHETIC))
    vocab_seed: int = 42
    K: int = DESK_K
    n_select: int = DESK_N_SELECT
    master_seed: int = 1
    outdir: str = "runs"
    workers: int = 1
    baselines: tuple[tuple[str, str, str], ...] = (("uniform", "uniform", "identity"),)
    optimizer: optimizer.OptimizerConfig = DESK_OPTIMIZER

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.n_select < 1:
            raise ValueError("n_select must be positive")
        if (self.vocab_path is None) == (self.synthetic is None):
            raise ValueError("config needs exactly one of vocab_path or synthetic")


def parse_baseline_spec(spec: str) -> tuple[str, str, str]:
    """Parse "uniform", "column", or "column:inverse" into
    (name, kind, transform)."""
    if ":" in spec:
        kind, transform = spec.split(":", 1)
    else:
        kind, transform = spec, "identity"
    if transform not in ("identity", "inverse"):
        raise ValueError(f"unknown baseline transform {transform!r}")
    return spec, kind, transform


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML experiment config. Missing keys keep desk defaults."""
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    vocab_sec = raw.get("vocab", {})
    exp = raw.get("experiment", {})
    opt = raw.get("optimizer", {})
    opt_cfg = replace(
        DESK_OPTIMIZER,
        **{k: opt[k] for k in (
            "eta", "gamma", "delta", "n_dirs", "n_seq", "n_steps",
            "horizon", "learner_seed_policy", "use_crn",
        ) if k in opt},
    )
    synthetic = vocab_sec.get("synthetic")
    vocab_path = vocab_sec.get("path")
    if synthetic is None and vocab_path is None:
        synthetic = dict(DESK_SYNTHETIC)
    baselines = tuple(
        parse_baseline_spec(s) for s in exp.get("baselines", ["uniform"])
    )
    return ExperimentConfig(
        vocab_path=vocab_path,
        inventory_path=vocab_sec.get("inventory"),
        synthetic=dict(synthetic) if synthetic is not None else None,
        vocab_seed=vocab_sec.get("seed", 42),
        K=exp.get("K", DESK_K),
        n_select=exp.get("n_select", DESK_N_SELECT),
        master_seed=exp.get("master_seed", 1),
        outdir=exp.get("outdir", "runs"),
        workers=exp.get("workers", 1),
        baselines=baselines,
        optimizer=opt_cfg,
    )


def build_vocabulary(config: ExperimentConfig) -> vocab_mod.Vocabulary:
    if config.synthetic is not None:
        return vocab_mod.generate_synthetic_vocabulary(config.synthetic, config.vocab_seed)
    if config.inventory_path is None:
        raise ValueError("vocab_path requires inventory_path")
    inv = vocab_mod.parse_phoneme_inventory(Path(config.inventory_path).read_text())
    return vocab_mod.parse_vocabulary(Path(config.vocab_path).read_text(), inv)


# ----------------------------------------------------------------------
# Efficiency experiment

@dataclass(frozen=True)
class EfficiencyCell:
    K: int
    mean_efficiency: float
    q25: float
    q75: float
    reps: int
    best_test_accuracy: float
    best_split_seed: int


@dataclass(frozen=True)
class EfficiencyReport:
    cells: tuple[EfficiencyCell, ...]
    lr: float
    criteria: dict
    master_seed: int


def efficiency_experiment(
    vocabulary: vocab_mod.Vocabulary,
    Ks: list[int],
    reps: int,
    criteria: dict | None = None,
    seed: int = 1,
    lr: float = 0.1,
    progress=None,
) -> EfficiencyReport:
    """Batch-train on random pools and score efficiency c/K per size.

    c counts correct test predictions after training to convergence.
    The best split per K (largest test accuracy) is recorded so later
    experiments can reuse it.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cells = []
    for K in Ks:
        effs = np.empty(reps)
        best_acc, best_split_seed = -1.0, 0
        for rep in range(reps):
            split_seed = mix(seed, "efficiency-split", K, rep)
            split = vocab_mod.split_vocabulary(vocabulary, K, split_seed)
            pool_items = [vocabulary[int(i)] for i in split.pool_indices]
            test_items = [vocabulary[int(i)] for i in split.test_indices]
            st = learner.init_learner(mix(seed, "efficiency-init", K, rep))
            st, epochs = learner.batch_train_to_convergence(
                st, pool_items, vocabulary.inventory, lr=lr, criteria=criteria
            )
            acc = 1.0 - learner.terminal_cost(st, test_items, vocabulary.inventory)
            c = acc * len(test_items)
            effs[rep] = c / K
            if acc > best_acc:
                best_acc, best_split_seed = acc, split_seed
            if progress is not None:
                progress(K, rep, epochs, acc)
        cells.append(
            EfficiencyCell(
                K=K,
                mean_efficiency=float(effs.mean()),
                q25=float(np.percentile(effs, 25)),
                q75=float(np.percentile(effs, 75)),
                reps=reps,
                best_test_accuracy=float(best_acc),
                best_split_seed=int(best_split_seed),
            )
        )
    crit = dict(learner.DEFAULT_CRITERIA)
    crit.update(criteria or {})
    return EfficiencyReport(cells=tuple(cells), lr=lr, criteria=crit, master_seed=seed)


# ----------------------------------------------------------------------
# Schedule comparison

@dataclass(frozen=True)
class ConditionResult:
    name: str
    mean_accuracy: float
    stderr: float
    n: int
    best_seq_accuracy: float
    p_vs_optimized: float | None
    accuracies: tuple[float, ...]
    p_start: tuple[float, ...]
    p_end: tuple[float, ...]


@dataclass(frozen=True)
class ComparisonReport:
    conditions: tuple[ConditionResult, ...]
    pool_words: tuple[str, ...]
    master_seed: int
    K: int
    horizon: int
    n_select: int
    config: dict


def _log(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _evaluate_condition(name, P, Q, ctx, config) -> tuple[optimizer.SelectionResult, dict]:
    sel = optimizer.select_best_sequence(
        P, Q, ctx, config.n_select,
        mix(config.master_seed, "evaluate", name),
        workers=config.workers,
        dist_id=name,
        learner_seed_policy=config.optimizer.learner_seed_policy,
    )
    return sel, {
        "name": name,
        "mean_accuracy": 1.0 - sel.mean_cost,
        "stderr": sel.stderr,
        "n": config.n_select,
        "best_seq_accuracy": 1.0 - sel.best_cost,
        "accuracies": tuple((1.0 - sel.costs).tolist()),
        "p_start": tuple(P.probs.tolist()),
        "p_end": tuple(Q.probs.tolist()),
    }


def run_comparison(config: ExperimentConfig, emit: bool = True) -> ComparisonReport:
    """Full comparison: baselines, stage 1, stage 2, selection, tests.

    Writes reports, distribution exports, and optimizer checkpoints to
    config.outdir unless emit is False. Deterministic in master_seed
    for any worker count.
    """
    t0 = time.monotonic()
    vocabulary = build_vocabulary(config)
    split = vocab_mod.split_vocabulary(vocabulary, config.K, mix(config.master_seed, "split"))
    ctx = optimizer.build_context(
        vocabulary, split, config.optimizer.horizon,
        learner_seed=mix(config.master_seed, "learner-init"),
    )
    outdir = Path(config.outdir)
    if emit:
        outdir.mkdir(parents=True, exist_ok=True)

    def stage_progress(tag):
        def cb(s, mean, err):
            _log(f"{tag} s={s} mean={mean:.4f} se={err:.4f} elapsed={time.monotonic() - t0:.1f}s")
        return cb

    rows = []
    selections = {}
    for name, kind, transform in config.baselines:
        P = schedule.baseline_distribution(vocabulary, split, kind, transform)
        sel, row = _evaluate_condition(name, P, P, ctx, config)
        selections[name] = sel
        rows.append(row)
        _log(f"baseline {name}: acc={row['mean_accuracy']:.4f} se={row['stderr']:.4f}")

    ckpt1 = outdir / "stage1.ckpt.json" if emit else None
    p_bar, state1 = optimizer.optimize_stage1(
        ctx, config.optimizer, config.master_seed, workers=config.workers,
        progress=stage_progress("stage1"),
        checkpoint=(lambda st: save_optimizer_state(st, ckpt1)) if emit else None,
    )
    sel, row = _evaluate_condition("stationary_optimized", p_bar, p_bar, ctx, config)
    selections["stationary_optimized"] = sel
    rows.append(row)
    _log(f"stage1 done: acc={row['mean_accuracy']:.4f}")

    ckpt2 = outdir / "stage2.ckpt.json" if emit else None
    (P_star, Q_star), state2 = optimizer.optimize_stage2(
        p_bar, ctx, config.optimizer, config.master_seed, workers=config.workers,
        progress=stage_progress("stage2"),
        checkpoint=(lambda st: save_optimizer_state(st, ckpt2)) if emit else None,
    )
    sel, row = _evaluate_condition("optimized", P_star, Q_star, ctx, config)
    selections["optimized"] = sel
    rows.append(row)
    _log(f"stage2 done: acc={row['mean_accuracy']:.4f} total={time.monotonic() - t0:.1f}s")

    opt_accs = rows[-1]["accuracies"]
    conditions = []
    for row in rows:
        if row["name"] == "optimized":
            p = None
        else:
            _, p = analysis.two_sample_t_test(row["accuracies"], opt_accs)
        conditions.append(ConditionResult(p_vs_optimized=p, **row))

    report = ComparisonReport(
        conditions=tuple(conditions),
        pool_words=tuple(vocabulary[int(i)].word for i in split.pool_indices),
        master_seed=config.master_seed,
        K=config.K,
        horizon=config.optimizer.horizon,
        n_select=config.n_select,
        config=_config_snapshot(config),
    )
    if emit:
        emit_comparison(report, outdir)
        (outdir / "distribution_optimized.csv").write_text(
            schedule.distribution_to_csv(vocabulary, split, P_star, Q_star)
        )
        (outdir / "distribution_stationary.csv").write_text(
            schedule.distribution_to_csv(vocabulary, split, p_bar, p_bar)
        )
    return report


def _config_snapshot(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["baselines"] = [list(b) for b in config.baselines]
    # execution details that cannot affect the results stay out of the
    # snapshot so reports are byte-identical across worker counts
    del d["workers"], d["outdir"]
    return d


# ----------------------------------------------------------------------
# Report emission

def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def report_json(report) -> str:
    return json.dumps(_to_jsonable(report), sort_keys=True, indent=2) + "\n"


def comparison_csv(report: ComparisonReport) -> str:
    lines = ["condition,mean_accuracy,stderr,n,best_seq_accuracy,p_vs_optimized"]
    for c in report.conditions:
        p = "" if c.p_vs_optimized is None else repr(c.p_vs_optimized)
        lines.append(
            f"{c.name},{c.mean_accuracy!r},{c.stderr!r},{c.n},{c.best_seq_accuracy!r},{p}"
        )
    return "\n".join(lines) + "\n"


def efficiency_csv(report: EfficiencyReport) -> str:
    lines = ["K,mean_efficiency,q25,q75,reps,best_test_accuracy,best_split_seed"]
    for c in report.cells:
        lines.append(
            f"{c.K},{c.mean_efficiency!r},{c.q25!r},{c.q75!r},{c.reps},"
            f"{c.best_test_accuracy!r},{c.best_split_seed}"
        )
    return "\n".join(lines) + "\n"


def emit_comparison(report: ComparisonReport, outdir: str | Path):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "comparison.json").write_text(report_json(report))
    (outdir / "comparison.csv").write_text(comparison_csv(report))
    if report.conditions:
        (outdir / "comparison.svg").write_text(comparison_svg(report))


def emit_efficiency(report: EfficiencyReport, outdir: str | Path):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "efficiency.json").write_text(report_json(report))
    (outdir / "efficiency.csv").write_text(efficiency_csv(report))
    if report.cells:
        (outdir / "efficiency.svg").write_text(efficiency_svg(report))


# ----------------------------------------------------------------------
# SVG charts (hand-rendered; no plotting dependency, byte-deterministic)

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 30, 80


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<title>{_xml_escape(title)}</title>',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]


def _y_axis(lines: list[str], lo: float, hi: float, label: str):
    span = hi - lo or 1.0
    for i in range(6):
        v = lo + span * i / 5
        y = _H - _MB - (_H - _MT - _MB) * i / 5
        lines.append(
            f'<line x1="{_ML}" y1="{y:.1f}" x2="{_W - _MR}" y2="{y:.1f}" stroke="#ddd"/>'
        )
        lines.append(f'<text x="{_ML - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    lines.append(
        f'<text x="14" y="{(_H - _MB + _MT) / 2}" transform="rotate(-90 14 '
        f'{(_H - _MB + _MT) / 2})" text-anchor="middle">{_xml_escape(label)}</text>'
    )


def comparison_svg(report: ComparisonReport) -> str:
    conds = report.conditions
    vals = [c.mean_accuracy for c in conds] + [c.best_seq_accuracy for c in conds]
    lo, hi = 0.0, max(vals) * 1.15 if vals else 1.0
    plot_h = _H - _MT - _MB
    plot_w = _W - _ML - _MR

    def ty(v):
        return _H - _MB - plot_h * (v - lo) / (hi - lo)

    lines = _svg_header("Mean test accuracy by schedule")
    _y_axis(lines, lo, hi, "test accuracy")
    n = len(conds)
    step = plot_w / n
    bar_w = step * 0.55
    for i, c in enumerate(conds):
        cx = _ML + step * (i + 0.5)
        x0 = cx - bar_w / 2
        y = ty(c.mean_accuracy)
        lines.append(
            f'<rect x="{x0:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
            f'height="{_H - _MB - y:.1f}" fill="#6699cc"/>'
        )
        e0, e1 = ty(c.mean_accuracy - c.stderr), ty(c.mean_accuracy + c.stderr)
        lines.append(
            f'<line x1="{cx:.1f}" y1="{e0:.1f}" x2="{cx:.1f}" y2="{e1:.1f}" '
            f'stroke="black" stroke-width="1.5"/>'
        )
        by = ty(c.best_seq_accuracy)
        lines.append(
            f'<text x="{cx:.1f}" y="{by + 5:.1f}" text-anchor="middle" '
            f'font-size="18">*</text>'
        )
        lines.append(
            f'<text x="{cx:.1f}" y="{_H - _MB + 14}" text-anchor="end" '
            f'transform="rotate(-30 {cx:.1f} {_H - _MB + 14})">{_xml_escape(c.name)}</text>'
        )
    lines.append(
        f'<text x="{_W - _MR}" y="{_MT - 10}" text-anchor="end" font-size="11">'
        f"* = best sequence</text>"
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def efficiency_svg(report: EfficiencyReport) -> str:
    cells = report.cells
    vals = [c.q75 for c in cells] + [c.q25 for c in cells] + [c.mean_efficiency for c in cells]
    lo, hi = 0.0, max(vals) * 1.15 if vals else 1.0
    Ks = [c.K for c in cells]
    k_lo, k_hi = min(Ks), max(Ks)
    plot_h = _H - _MT - _MB
    plot_w = _W - _ML - _MR

    def tx(k):
        if k_hi == k_lo:
            return _ML + plot_w / 2
        return _ML + plot_w * (k - k_lo) / (k_hi - k_lo)

    def ty(v):
        return _H - _MB - plot_h * (v - lo) / (hi - lo)

    lines = _svg_header("Efficiency by training pool size")
    _y_axis(lines, lo, hi, "efficiency c/K")
    band = " ".join(f"{tx(c.K):.1f},{ty(c.q75):.1f}" for c in cells)
    band += " " + " ".join(f"{tx(c.K):.1f},{ty(c.q25):.1f}" for c in reversed(cells))
    lines.append(f'<polygon points="{band}" fill="#cce0f0"/>')
    pts = " ".join(f"{tx(c.K):.1f},{ty(c.mean_efficiency):.1f}" for c in cells)
    lines.append(f'<polyline points="{pts}" fill="none" stroke="#336699" stroke-width="2"/>')
    for c in cells:
        lines.append(
            f'<circle cx="{tx(c.K):.1f}" cy="{ty(c.mean_efficiency):.1f}" r="3" fill="#336699"/>'
        )
        lines.append(
            f'<text x="{tx(c.K):.1f}" y="{_H - _MB + 16}" text-anchor="middle">{c.K}</text>'
        )
    lines.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - _MB + 34}" '
                 f'text-anchor="middle">K</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Checkpoints

_CKPT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "dtype": "<f8",
        "data": base64.b64encode(a.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).copy()


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _write_checkpoint(kind: str, payload: dict, path: str | Path):
    doc = {
        "version": _CKPT_VERSION,
        "kind": kind,
        "payload": payload,
        "sha256": _checksum(payload),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _read_checkpoint(kind: str, path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ValueError(f"corrupt checkpoint {path}: {e}") from None
    if doc.get("version") != _CKPT_VERSION:
        raise ValueError(f"checkpoint version {doc.get('version')!r}, expected {_CKPT_VERSION}")
    if doc.get("kind") != kind:
        raise ValueError(f"checkpoint holds {doc.get('kind')!r}, expected {kind!r}")
    if _checksum(doc["payload"]) != doc.get("sha256"):
        raise ValueError(f"checkpoint {path} failed its checksum")
    return doc["payload"]


def save_optimizer_state(state: optimizer.OptimizerRunState, path: str | Path):
    payload = {
        "z": _encode_array(state.z),
        "gamma_buf": _encode_array(state.gamma_buf),
        "step": state.step,
        "config": dataclasses.asdict(state.config),
        "cost_history": [list(h) for h in state.cost_history],
        "best_z": None if state.best_z is None else _encode_array(state.best_z),
        "best_mean": state.best_mean,
        "master_seed": state.master_seed,
        "stage_tag": state.stage_tag,
    }
    _write_checkpoint("optimizer_run", payload, path)


def load_optimizer_state(path: str | Path) -> optimizer.OptimizerRunState:
    p = _read_checkpoint("optimizer_run", path)
    return optimizer.OptimizerRunState(
        z=_decode_array(p["z"]),
        gamma_buf=_decode_array(p["gamma_buf"]),
        step=int(p["step"]),
        config=optimizer.OptimizerConfig(**p["config"]),
        cost_history=tuple((int(s), float(m), float(e)) for s, m, e in p["cost_history"]),
        best_z=None if p["best_z"] is None else _decode_array(p["best_z"]),
        best_mean=float(p["best_mean"]),
        master_seed=int(p["master_seed"]),
        stage_tag=p["stage_tag"],
    )


def save_learner_state(state: learner.LearnerState, path: str | Path):
    payload = {
        name: _encode_array(getattr(state, name))
        for name in ("W1", "b1", "W2", "b2", "vW1", "vb1", "vW2", "vb2")
    }
    payload["lr"] = state.lr
    payload["momentum"] = state.momentum
    _write_checkpoint("learner", payload, path)


def load_learner_state(path: str | Path) -> learner.LearnerState:
    p = _read_checkpoint("learner", path)
    arrays = {k: _decode_array(p[k]) for k in ("W1", "b1", "W2", "b2", "vW1", "vb1", "vW2", "vb2")}
    return learner.LearnerState(lr=p["lr"], momentum=p["momentum"], **arrays)

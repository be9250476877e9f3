"""Multi-seed baseline-vs-variant comparison: promotion % and steps-to-match."""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, config_from_dict, config_to_dict
from .run import RunResult, run_training

REPORT_COLUMNS = ["row_type", "arm", "seed", "score_at_T", "mean", "std",
                  "promotion_pct", "steps_to_match"]


@dataclass
class ArmSummary:
    scores: dict = field(default_factory=dict)  # seed -> score at T (failed seeds absent)
    failed: int = 0

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.scores.values())))

    @property
    def std(self) -> float:
        vals = list(self.scores.values())
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


@dataclass
class ComparisonReport:
    task: str
    algo: str
    T: int
    seeds: list
    base: ArmSummary
    variant: ArmSummary
    promotion_pct: float
    steps_to_match: float  # env steps, or math.inf when never reached
    variant_curve: list    # (step, seed-mean return) on the shared eval grid

    def to_jsonable(self) -> dict:
        stm = "inf" if math.isinf(self.steps_to_match) else int(self.steps_to_match)
        return {
            "T": self.T,
            "seeds": list(self.seeds),
            "rows": [{
                "task": self.task,
                "algo": self.algo,
                "baseline": {"mean": self.base.mean, "std": self.base.std,
                             "per_seed": {str(s): v for s, v in self.base.scores.items()},
                             "failed": self.base.failed},
                "variant": {"mean": self.variant.mean, "std": self.variant.std,
                            "per_seed": {str(s): v for s, v in self.variant.scores.items()},
                            "failed": self.variant.failed},
                "promotion_pct": self.promotion_pct,
                "steps_to_match": stm,
            }],
        }


def promotion_percent(base: float, variant: float) -> float:
    """(variant - base) / |base| * 100."""
    if base == 0.0:
        if variant == base:
            return 0.0
        return math.inf if variant > base else -math.inf
    return (variant - base) / abs(base) * 100.0


def score_at(eval_rows, T: int) -> float:
    """Mean return at the last evaluation step <= T."""
    eligible = [r for r in eval_rows if r[0] <= T]
    if not eligible:
        raise ValueError(f"no evaluation at or before step {T}")
    return float(eligible[-1][1])


def steps_to_match(curve, target: float) -> float:
    """Smallest eval step where the curve's mean return >= target, else inf."""
    if not curve:
        raise ValueError("empty evaluation curve")
    for step, mean in curve:
        if mean >= target:
            return int(step)
    return math.inf


def _run_arm_seed(cfg_dict: dict, out_dir: str | None, quiet: bool) -> RunResult:
    return run_training(config_from_dict(cfg_dict), out_dir, quiet=quiet)


def compare(cfg_base: ExperimentConfig, cfg_variant: ExperimentConfig, seeds,
            T: int, out_dir=None, jobs: int = 1, quiet: bool = True) -> ComparisonReport:
    """Run both arms across seeds and aggregate. Failed runs are excluded from
    the aggregates and counted per arm. Writes report.csv/report.json under
    out_dir when given (each run also gets its own subdirectory)."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError("compare needs at least 2 seeds")
    if cfg_base.env.name != cfg_variant.env.name or cfg_base.algo.name != cfg_variant.algo.name:
        raise ConfigError("compare arms must share env.name and algo.name")

    out_dir = Path(out_dir) if out_dir is not None else None
    jobs_spec = []
    for arm, cfg in (("base", cfg_base), ("variant", cfg_variant)):
        for seed in seeds:
            d = config_to_dict(cfg)
            d["seed"] = int(seed)
            run_dir = str(out_dir / arm / f"seed{seed}") if out_dir is not None else None
            jobs_spec.append((arm, seed, d, run_dir))

    results: dict = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {(arm, seed): pool.submit(_run_arm_seed, d, run_dir, quiet)
                       for arm, seed, d, run_dir in jobs_spec}
        results = {key: f.result() for key, f in futures.items()}
    else:
        for arm, seed, d, run_dir in jobs_spec:
            results[(arm, seed)] = _run_arm_seed(d, run_dir, quiet)

    summaries = {"base": ArmSummary(), "variant": ArmSummary()}
    for (arm, seed), res in results.items():
        if res.failed:
            summaries[arm].failed += 1
        else:
            summaries[arm].scores[seed] = score_at(res.eval_rows, T)
    for arm, summary in summaries.items():
        if not summary.scores:
            raise RuntimeError(f"all {arm} runs failed; nothing to aggregate")

    # seed-mean variant curve on the shared eval grid
    variant_ok = [res for (arm, _), res in results.items()
                  if arm == "variant" and not res.failed]
    grid = [row[0] for row in variant_ok[0].eval_rows]
    curve = []
    for i, step in enumerate(grid):
        curve.append((step, float(np.mean([res.eval_rows[i][1] for res in variant_ok]))))

    base_score = summaries["base"].mean
    report = ComparisonReport(
        task=cfg_base.env.name, algo=cfg_base.algo.name, T=T, seeds=seeds,
        base=summaries["base"], variant=summaries["variant"],
        promotion_pct=promotion_percent(base_score, summaries["variant"].mean),
        steps_to_match=steps_to_match(curve, base_score),
        variant_curve=curve,
    )
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(report.to_jsonable(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _write_report_csv(out_dir / "report.csv", report)
    return report


def _write_report_csv(path, report: ComparisonReport) -> None:
    lines = [",".join(REPORT_COLUMNS)]
    for arm, summary in (("base", report.base), ("variant", report.variant)):
        for seed in report.seeds:
            if seed in summary.scores:
                lines.append(f"seed,{arm},{seed},{summary.scores[seed]},,,,")
            else:
                lines.append(f"seed,{arm},{seed},failed,,,,")
    stm = "inf" if math.isinf(report.steps_to_match) else int(report.steps_to_match)
    for arm, summary in (("base", report.base), ("variant", report.variant)):
        promo = f"{report.promotion_pct}" if arm == "variant" else ""
        match = f"{stm}" if arm == "variant" else ""
        lines.append(f"aggregate,{arm},,,{summary.mean},{summary.std},{promo},{match}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

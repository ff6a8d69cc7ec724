"""Desk-scale end-to-end check: train at D=10, then compare against both baselines.

Usage: python3 scripts/desk_scale.py [--steps 2000] [--seed 0] [--out desk_out]
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from rlde import bbob, evalharness
from rlde.madqn import AgentConfig
from rlde.meta_train import save_checkpoint, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--runs", type=int, default=31)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="desk_out")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    budget = 2000 * args.dim

    t0 = time.perf_counter()
    agent, log = train(AgentConfig(), bbob.suite_split(), args.dim, args.steps, budget, seed=args.seed)
    digest = save_checkpoint(agent, out / "agent.ckpt")
    (out / "training_log.csv").write_text(log.to_csv())
    r = log.rewards()
    print(f"trained {args.steps} steps in {time.perf_counter() - t0:.0f}s; "
          f"reward first/last 10%: {r[: len(r) // 10].mean():.3f} / {r[-len(r) // 10 :].mean():.3f}")

    algs = [evalharness.rlde_algorithm(agent, digest), evalharness.random_search_algorithm(),
            evalharness.canonical_de_algorithm()]
    records = evalharness.run_experiment(algs, sorted(bbob.TEST_IDS), args.dim, args.runs, budget, args.seed)
    report = evalharness.build_report(records, "random_search", "canonical_de")
    evalharness.export(records, out, report)
    print(report.to_text())
    f1 = [rec.v_obj for rec in records if rec.algorithm == "rlde" and rec.function_id == 1]
    print("f1 runs with gap <= 1e-6:", int(np.sum(np.array(f1) <= 1e-6)), "/", len(f1))
    print(json.dumps(report.aei))
    print(f"total {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()

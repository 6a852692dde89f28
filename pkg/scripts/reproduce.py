#!/usr/bin/env python3
"""Run the four headline experiments end to end and print a short report.

Writes every trace CSV and summary JSON under --out (default: results/).
Sizes are the full experiment scales; expect a few minutes of runtime.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def run(args: list[str]) -> None:
    cmd = [sys.executable, "-m", "hedgelab", *args]
    print("+", " ".join(cmd))
    subprocess.run(cmd, check=True)


def summary(path: Path) -> dict:
    return json.loads((path / "summary.json").read_text())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--seeds", type=int, default=5, help="seeds per experiment")
    args = parser.parse_args()
    out = Path(args.out)
    seeds = str(args.seeds)

    run(
        ["run", "--scenario", "adversarial", "--algo", "ada,dt,hedge", "--n", "10",
         "--t", "10000", "--seeds", seeds, "--out", str(out / "adversarial")]
    )
    run(
        ["run", "--scenario", "stochastic", "--algo", "ada,hedge", "--n", "10", "--t", "50000",
         "--alpha", "0.2", "--mu", "0.3", "--seeds", seeds, "--out", str(out / "stochastic")]
    )
    run(
        ["run", "--scenario", "shifting", "--algo", "tv,hedge", "--n", "10", "--t", "9000",
         "--k", "3", "--alpha", "0.25", "--mu", "0.3", "--seeds", seeds, "--out", str(out / "shifting")]
    )
    fixtures = out / "fixtures"
    subprocess.run(
        [sys.executable, str(Path(__file__).with_name("make_tree_fixture.py")), "--out", str(fixtures)],
        check=True,
    )
    run(
        ["run", "--scenario", "tree", "--algo", "ada", "--tree", str(fixtures / "tree.json"),
         "--data", str(fixtures / "data.csv"), "--out", str(out / "tree")]
    )

    print("\n=== report ===")
    adv = summary(out / "adversarial")["aggregates"]
    print(f"adversarial  mean final regret: ada {adv['ada']['mean_final_regret_best']:.2f}, "
          f"dt {adv['dt']['mean_final_regret_best']:.2f}, hedge {adv['hedge']['mean_final_regret_best']:.2f}")
    sto = summary(out / "stochastic")["aggregates"]
    print(f"stochastic   mean regret to gap-best: ada {sto['ada']['mean_regret_designated_best']:.2f}, "
          f"hedge {sto['hedge']['mean_regret_designated_best']:.2f}")
    shf = summary(out / "shifting")["aggregates"]
    print(f"shifting     mean segmented regret: tv {shf['tv']['mean_kshift_regret']:.1f}, "
          f"hedge {shf['hedge']['mean_kshift_regret']:.1f}")
    tre = summary(out / "tree")["results"][0]
    print(f"tree         regret {tre['tree_regret']:.3f} over {len(json.loads((fixtures / 'tree.json').read_text())['nodes'])}-node template, "
          f"best pruning loss {tre['best_pruning_loss']:.3f} with {tre['best_pruning_leaves']} leaves")


if __name__ == "__main__":
    main()

"""Plan every builtin scenario with castr and write scenario, plan and SVG
files side by side into an output directory."""
import argparse
from pathlib import Path

from castr import cli, planfile, svg
from castr import scenario as scn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results/plans")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--planner", choices=cli.PLANNERS, default="castr")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in scn.BUILTIN:
        sc = scn.generate(name, seed=args.seed)
        rep = cli.run_cell(sc, args.planner)
        scn.save(sc, out / f"{name}.yaml")
        if rep.plan is not None:
            planfile.save(rep.plan, out / f"{name}.plan.yaml")
        (out / f"{name}.svg").write_text(svg.render_scenario(sc, rep.plan))
        print(f"{name:15s} {rep.status:8s} nodes={rep.nodes:5d} steps={rep.steps:3d} total={rep.total_ms:8.1f} ms")


if __name__ == "__main__":
    main()

"""Run one of the bundled convergence studies and print the fitted slopes.

    python scripts/convergence_study.py deconv
    python scripts/convergence_study.py elliptic_desk --out out/elliptic_desk
"""

import argparse
import time
from pathlib import Path

from maxent.harness import emit_report, load_config, run_study, write_summary

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("study", choices=sorted(p.stem for p in CONFIGS.glob("*.toml")))
    ap.add_argument("--out", default=None, help="output root (default: out/<study>)")
    args = ap.parse_args()
    cfgs = load_config(CONFIGS / f"{args.study}.toml")
    out = Path(args.out or Path("out") / args.study)
    start = time.perf_counter()
    reports = run_study(cfgs)
    for cfg in cfgs:
        rep = reports[cfg.sampler]
        emit_report(rep, out / cfg.sampler)
        write_summary(rep, cfg, out / cfg.sampler)
        print(f"{cfg.sampler:14s} slope {rep.slope:+.3f}")
        for row in rep.rows:
            print(f"    M={row.M:5d} rmse {row.rmse:.3e} std {row.std_dev:.3e}")
    print(f"reference {next(iter(reports.values())).reference:.10g}, "
          f"{time.perf_counter() - start:.0f}s")


if __name__ == "__main__":
    main()

"""Compare deconvolution RMSE at entropy sample count N and 2N.

Prints the per-M relative change for each sampler; the M-dependent
error should dominate, so changes stay small.
"""

import argparse
from dataclasses import replace

from maxent.harness import EntropySpec, default_config, run_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2**15)
    ap.add_argument("--samplers", nargs="+", default=["mc", "lattice_plain"])
    args = ap.parse_args()
    base = default_config("deconv")
    for sampler in args.samplers:
        reps = [run_convergence(replace(base, sampler=sampler,
                                        entropy=EntropySpec(method="gauss_lattice",
                                                            n_rule="fixed", n=n)))
                for n in (args.n, 2 * args.n)]
        for a, b in zip(reps[0].rows, reps[1].rows):
            print(f"{sampler:14s} M={a.M:5d} rmse {a.rmse:.4e} -> {b.rmse:.4e} "
                  f"change {abs(b.rmse - a.rmse) / a.rmse:.2%}")


if __name__ == "__main__":
    main()

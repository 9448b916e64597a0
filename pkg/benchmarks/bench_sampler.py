"""Benchmark the MCMC kernels: numba backend vs the pure-Python fallback.

The backend is fixed at import time by the ``HETPRIOR_NO_NUMBA`` environment
variable, so each backend is timed in its own subprocess.  Both runs use the
same seed and the draw files are hashed to confirm the two backends produce
bit-identical output.

Usage::

    python3 benchmarks/bench_sampler.py [--analyses 20] [--studies 6]
                                        [--chains 2] [--iters 4000]
                                        [--burnin 1000] [--seed 7]
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def build_corpus(n_analyses: int, n_studies: int, seed: int) -> str:
    import numpy as np

    rng = np.random.default_rng(seed)
    rows = ["analysis_id,study_id,estimate,std_err"]
    for j in range(n_analyses):
        tau = abs(rng.normal(0.0, 0.2))
        mu = rng.normal(0.0, 0.5)
        for i in range(n_studies):
            se = rng.uniform(0.15, 0.45)
            y = rng.normal(mu, float(np.hypot(se, tau)))
            rows.append(f"m{j},s{i},{y!r},{se!r}")
    return "\n".join(rows) + "\n"


def worker(args) -> None:
    """Time one fit with whatever backend the environment selected."""
    from hetprior.data import parse_collection
    from hetprior.sampler import BACKEND, McmcConfig, ModelSpec, run_hierarchical, samples_to_csv

    c = parse_collection(build_corpus(args.analyses, args.studies, args.seed))
    m = ModelSpec(het_family="half-normal")
    warm = McmcConfig(chains=1, burn_in=10, iterations=20, seed=args.seed)
    run_hierarchical(c, m, warm)  # trigger JIT compilation outside the timed region

    cfg = McmcConfig(
        chains=args.chains, burn_in=args.burnin, iterations=args.iters, seed=args.seed
    )
    t0 = time.perf_counter()
    s = run_hierarchical(c, m, cfg)
    elapsed = time.perf_counter() - t0
    digest = hashlib.sha256(samples_to_csv(s).encode()).hexdigest()
    total_iters = args.chains * (args.burnin + args.iters)
    print(
        json.dumps(
            {
                "backend": BACKEND,
                "seconds": elapsed,
                "iters_per_s": total_iters / elapsed,
                "digest": digest,
            }
        )
    )


def run_backend(no_numba: bool, argv: list[str]) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["HETPRIOR_NO_NUMBA"] = "1"
    else:
        env.pop("HETPRIOR_NO_NUMBA", None)
    out = subprocess.run(
        [sys.executable, __file__, "--worker"] + argv,
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--analyses", type=int, default=20)
    p.add_argument("--studies", type=int, default=6)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--iters", type=int, default=4000)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()

    if args.worker:
        worker(args)
        return 0

    argv = [
        "--analyses", str(args.analyses), "--studies", str(args.studies),
        "--chains", str(args.chains), "--iters", str(args.iters),
        "--burnin", str(args.burnin), "--seed", str(args.seed),
    ]
    print(
        f"corpus: {args.analyses} meta-analyses x {args.studies} studies; "
        f"{args.chains} chains x ({args.burnin} burn-in + {args.iters} kept)"
    )
    results = [run_backend(no_numba=False, argv=argv), run_backend(no_numba=True, argv=argv)]
    print(f"\n{'backend':<10} {'seconds':>9} {'iters/s':>12}")
    for r in results:
        print(f"{r['backend']:<10} {r['seconds']:>9.2f} {r['iters_per_s']:>12.0f}")
    fast, slow = results
    if fast["digest"] == slow["digest"]:
        print(f"\ndraws bit-identical across backends (sha256 {fast['digest'][:16]}...)")
    else:
        print("\nERROR: backends disagree!")
        return 1
    print(f"speedup: {slow['seconds'] / fast['seconds']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())

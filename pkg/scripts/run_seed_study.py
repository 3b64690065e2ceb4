#!/usr/bin/env python3
"""Multi-seed study of the directional claims on one synthetic task.

For each seed the full pipeline runs (CE and self-normalized pre-training,
then locally and globally normalized search-aware fine-tuning) and the
script prints one line of dev metrics per seed followed by verdicts:

  * search-aware local beats its CE warm start's beam decode
  * search-aware global beats its self-normalized warm start's beam decode
  * globally normalized search-aware >= locally normalized (label bias)
  * self-normalized |mean log Z| collapse vs. CE, accuracy kept close

Typical runtime: a few minutes per seed per encoder mode on one CPU.
"""

import argparse
import sys
import time

from softbeam.experiments import run_pipeline_seed


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--task", choices=("tagging", "transduction"),
                    default="tagging")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--encoder", choices=("unidirectional", "bidirectional",
                                          "both"), default="unidirectional")
    ap.add_argument("--sa-epochs", type=int, default=None,
                    help="override search-aware epochs (e.g. a quick look)")
    ap.add_argument("--verbose", action="store_true",
                    help="also print per-epoch training records")
    args = ap.parse_args()

    encoders = (["unidirectional", "bidirectional"]
                if args.encoder == "both" else [args.encoder])
    sa_overrides = ({"epochs": args.sa_epochs}
                    if args.sa_epochs is not None else None)
    log = print if args.verbose else None

    outcomes = {enc: [] for enc in encoders}
    for enc in encoders:
        for seed in range(args.seeds):
            t0 = time.time()
            out = run_pipeline_seed(args.task, seed, enc,
                                    sa_overrides=sa_overrides, log=log)
            outcomes[enc].append(out)
            print(f"{out.line()} ({time.time() - t0:.0f}s)", flush=True)

    for enc, outs in outcomes.items():
        n = len(outs)
        local_wins = sum(o.sa_local > o.ce_beam for o in outs)
        global_wins = sum(o.sa_global > o.l2_beam for o in outs)
        global_raw_wins = sum(o.sa_global > o.l2_beam_raw for o in outs)
        bias_dir = sum(o.sa_global >= o.sa_local for o in outs)
        gap_close = sum(abs(o.sa_global - o.sa_local) <= 0.01 for o in outs)
        print(f"\n[{args.task} / {enc}] over {n} seeds")
        print(f"  search-aware local  > CE warm beam:        "
              f"{local_wins}/{n}")
        print(f"  search-aware global > self-norm warm beam: "
              f"{global_wins}/{n} (vs raw-score decode: "
              f"{global_raw_wins}/{n})")
        print(f"  global >= local (label-bias direction):    {bias_dir}/{n}")
        if enc == "bidirectional":
            print(f"  |global - local| <= 1 point:               "
                  f"{gap_close}/{n}")
        logz_ok = sum(abs(o.l2_logz_dev) <= 0.1 * abs(o.ce_logz_dev)
                      for o in outs)
        acc_close = sum(abs(o.l2_beam - o.ce_beam) <= 0.03 for o in outs)
        print(f"  |mean log Z| collapse (<= 10% of CE):      {logz_ok}/{n}")
        print(f"  self-norm metric within 3 points of CE:    {acc_close}/{n}")
        if args.task == "transduction":
            degraded = sum(
                o.ce_beam_raw <= 0.7 * o.ce_beam for o in outs)
            print(f"  raw-score decode degrades CE BLEU >= 30%:  "
                  f"{degraded}/{n}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

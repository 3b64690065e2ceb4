"""Drive the full warm-start x normalization grid on lookahead tagging.

Everything goes through the command-line interface, so the printed lines
double as a reproducible transcript.  Layout under --root:

    data/train, data/dev        corpus files with vocab sidecars
    ce/, l2/                    pretraining runs (checkpoint, log-Z, evals)
    sa-ce-local/, sa-ce-global/, sa-l2-local/, sa-l2-global/
                                the four search-aware cells
followed by `softbeam report` over the whole tree.
"""

import argparse
import shlex
import sys
from pathlib import Path

from softbeam.cli import main as cli
from softbeam.experiments import (SELF_NORM_LAM, TAGGING_DATA, TAGGING_MODEL,
                                  TAGGING_PRETRAIN, TAGGING_SEARCH_AWARE)


def run(argv: list[str]) -> None:
    print("+ softbeam " + " ".join(shlex.quote(a) for a in argv), flush=True)
    rc = cli(argv)
    if rc != 0:
        sys.exit(rc)


def flags(**kv) -> list[str]:
    out = []
    for name, value in kv.items():
        out += ["--" + name.replace("_", "-"), str(value)]
    return out


def main() -> None:
    ap = argparse.ArgumentParser(
        description="warm-start x normalization grid, tagging task")
    ap.add_argument("--root", default="runs/tagging-grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--encoder", default="unidirectional",
                    choices=("unidirectional", "bidirectional"))
    args = ap.parse_args()
    root = Path(args.root)
    root.mkdir(parents=True, exist_ok=True)

    d = TAGGING_DATA
    gen_common = flags(task="tagging", vocab_size=d["vocab_size"],
                       ambiguity_rate=d["ambiguity_rate"],
                       n_lo=d["n_range"][0], n_hi=d["n_range"][1])
    run(["gen-data", *gen_common, "--out", str(root / "data" / "train"),
         "--count", str(d["train_count"]), "--seed", str(31 + args.seed)])
    run(["gen-data", *gen_common, "--out", str(root / "data" / "dev"),
         "--count", str(d["dev_count"]), "--seed", str(61 + args.seed)])

    m = TAGGING_MODEL
    model_common = flags(
        task_kind="tagging", train_path=root / "data" / "train",
        dev_path=root / "data" / "dev", embed_dim=m["embed_dim"],
        hidden_dim=m["hidden_dim"], encoder_mode=args.encoder,
        attention_mode=m["attention_mode"], beam_k=m["beam_k"],
        batch_size=m["batch_size"], dev_metric=m["dev_metric"],
        seed=args.seed)

    p = TAGGING_PRETRAIN
    pre_common = model_common + flags(optimizer=p["optimizer"],
                                      learning_rate=p["learning_rate"],
                                      epochs=p["epochs"],
                                      restarts=p["restarts"])
    run(["pretrain", *pre_common, "--objective", "teacher-forcing",
         "--out-dir", str(root / "ce")])
    run(["pretrain", *pre_common, "--objective", "self-normalized",
         "--lam", str(SELF_NORM_LAM), "--out-dir", str(root / "l2")])

    s = TAGGING_SEARCH_AWARE
    sa_common = model_common + flags(
        objective="soft-beam", optimizer=s["optimizer"],
        learning_rate=s["learning_rate"], epochs=s["epochs"],
        alpha0=s["alpha0"], alpha_growth=s["alpha_growth"],
        restarts=s["restarts"])
    for warm, warm_objective in (("ce", "teacher-forcing"),
                                 ("l2", "self-normalized")):
        for mode in ("local", "global"):
            run(["train", *sa_common,
                 "--warm-start", str(root / warm / "checkpoint.bin"),
                 "--warm-start-objective", warm_objective,
                 "--normalization-mode", mode,
                 "--out-dir", str(root / f"sa-{warm}-{mode}")])

    run(["report", "--run-root", str(root), "--task", "tagging", "--plots"])


if __name__ == "__main__":
    main()

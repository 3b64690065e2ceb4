"""Drive the warm-start x normalization grid on the rule transduction task.

Same shape as the tagging grid driver, plus the score-mode mismatch
demonstration: the teacher-forcing model decoded with raw (unnormalized)
scores, which collapses BLEU relative to normalized-score beam decoding.
"""

import argparse
import shlex
import sys
from pathlib import Path

from softbeam.cli import main as cli
from softbeam.experiments import (SELF_NORM_LAM, TRANSDUCTION_DATA,
                                  TRANSDUCTION_MODEL, TRANSDUCTION_PRETRAIN,
                                  TRANSDUCTION_SEARCH_AWARE)


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
        description="warm-start x normalization grid, transduction task")
    ap.add_argument("--root", default="runs/transduction-grid")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = Path(args.root)
    root.mkdir(parents=True, exist_ok=True)

    d = TRANSDUCTION_DATA
    gen_common = flags(task="transduction", vocab_size=d["vocab_size"],
                       reorder_window=d["reorder_window"],
                       t_max=d["t_max"], n_lo=d["n_range"][0],
                       n_hi=d["n_range"][1])
    run(["gen-data", *gen_common, "--out", str(root / "data" / "train"),
         "--count", str(d["train_count"]), "--seed", str(31 + args.seed)])
    run(["gen-data", *gen_common, "--out", str(root / "data" / "dev"),
         "--count", str(d["dev_count"]), "--seed", str(61 + args.seed)])

    m = TRANSDUCTION_MODEL
    model_common = flags(
        task_kind="transduction", train_path=root / "data" / "train",
        dev_path=root / "data" / "dev", embed_dim=m["embed_dim"],
        hidden_dim=m["hidden_dim"], encoder_mode="unidirectional",
        attention_mode=m["attention_mode"], beam_k=m["beam_k"],
        batch_size=m["batch_size"], dev_metric=m["dev_metric"],
        seed=args.seed)

    p = TRANSDUCTION_PRETRAIN
    pre_common = model_common + flags(optimizer=p["optimizer"],
                                      learning_rate=p["learning_rate"],
                                      epochs=p["epochs"],
                                      restarts=p["restarts"])
    run(["pretrain", *pre_common, "--objective", "teacher-forcing",
         "--out-dir", str(root / "ce")])
    run(["pretrain", *pre_common, "--objective", "self-normalized",
         "--lam", str(SELF_NORM_LAM), "--out-dir", str(root / "l2")])

    # score-mode mismatch: normalized-score vs raw-score beam decoding of
    # the same locally normalized checkpoint
    for score_mode, name in (("normalized", "beam-normalized"),
                             ("unnormalized", "beam-raw")):
        run(["decode", "--checkpoint", str(root / "ce" / "checkpoint.bin"),
             "--corpus", str(root / "data" / "dev"), "--mode", "beam",
             "--k", str(m["beam_k"]), "--score-mode", score_mode,
             "--out", str(root / "ce" / f"pred-{name}.txt")])
        run(["eval", "--pred", str(root / "ce" / f"pred-{name}.txt"),
             "--corpus", str(root / "data" / "dev"),
             "--decode-mode", "pretrain-beam"])

    s = TRANSDUCTION_SEARCH_AWARE
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

    run(["report", "--run-root", str(root), "--task", "transduction",
         "--plots"])


if __name__ == "__main__":
    main()

"""Report assembly: text tables over completed runs plus learning curves.

A run directory is self-describing: `config.txt` (the exact TrainConfig),
`log.txt` (one record per epoch), `checkpoint.bin`, `eval_*.json`
(EvalReport per decode mode), and for pre-training runs `logz.json` with
the log-normalizer statistics.  The report command only reads these files;
every number in a rendered table is the stored value, never recomputed.

The headline table is the warm-start x normalization grid: two pretrain
rows (greedy and beam decode of the initializer) and two search-aware rows
(locally and globally normalized), one column per encoder mode.  Cells
with no completed run render as the GAP marker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import TrainConfig, load_config
from .errors import DataError
from .metrics import DECODE_MODE_LABELS, EvalReport

GAP = "—"

WARM_GROUPS = {"teacher-forcing": "CE warm start",
               "self-normalized": "self-normalized warm start"}


def fmt_cell(value: float | None, digits: int = 2) -> str:
    return GAP if value is None else f"{value:.{digits}f}"


def render_table(title: str, col_labels: list[str],
                 rows: list[tuple[str, list[str]]]) -> str:
    head = [""] + col_labels
    body = [[label] + cells for label, cells in rows]
    widths = [max(len(r[i]) for r in [head] + body)
              for i in range(len(head))]

    def line(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    rule = "-" * len(line(head))
    out = [title, rule, line(head), rule]
    out.extend(line(r) for r in body)
    out.append(rule)
    return "".join(s + "\n" for s in out)


def render_grid_table(title: str, col_labels: list[str],
                      cells: dict[tuple[str, str], float | None],
                      digits: int = 2) -> str:
    rows = [(label, [fmt_cell(cells.get((label, c)), digits)
                     for c in col_labels])
            for label in DECODE_MODE_LABELS]
    return render_table(title, col_labels, rows)


def render_logz_table(entries: list[dict]) -> str:
    """Rows of log-normalizer statistics: one per pre-training run, mean
    and variance on train and dev."""
    rows = []
    for e in entries:
        rows.append((e["label"], [
            fmt_cell(e["train"]["mean"]), fmt_cell(e["train"]["variance"]),
            fmt_cell(e["dev"]["mean"]), fmt_cell(e["dev"]["variance"])]))
    return render_table("log-normalizer statistics",
                        ["train mean", "train var", "dev mean", "dev var"],
                        rows)


def render_bucket_table(report: EvalReport, title: str) -> str:
    labels = list(report.bucket_scores)
    rows = [("score", [fmt_cell(report.bucket_scores[b]) for b in labels])]
    return render_table(title, labels, rows)


def render_bleu_breakdown(reports: dict[str, EvalReport]) -> str:
    """Per decode mode: BLEU, the four n-gram precisions, length ratio."""
    cols = ["BLEU", "1-gram", "2-gram", "3-gram", "4-gram", "length ratio"]
    rows = []
    for label in DECODE_MODE_LABELS:
        rep = reports.get(label)
        if rep is None:
            rows.append((label, [GAP] * 6))
            continue
        rows.append((label, [fmt_cell(rep.bleu)]
                     + [fmt_cell(p) for p in rep.ngram_precisions]
                     + [fmt_cell(rep.length_ratio, 3)]))
    return render_table("BLEU breakdown", cols, rows)


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------


@dataclass
class RunInfo:
    path: Path
    config: TrainConfig
    reports: dict[str, EvalReport] = field(default_factory=dict)
    logz: dict | None = None

    @property
    def metric_name(self) -> str:
        return "bleu" if self.config.dev_metric == "bleu" else "accuracy"

    def metric(self, decode_label: str) -> float | None:
        rep = self.reports.get(decode_label)
        if rep is None:
            return None
        value = getattr(rep, self.metric_name)
        return 100.0 * value if self.metric_name == "accuracy" else value


def load_run(path: str | Path) -> RunInfo:
    p = Path(path)
    cfg_file = p / "config.txt"
    if not cfg_file.exists():
        raise DataError(f"{p} is not a run directory (no config.txt)")
    info = RunInfo(path=p, config=load_config(cfg_file))
    for f in sorted(p.glob("eval_*.json")):
        rep = EvalReport.from_dict(json.loads(f.read_text()))
        info.reports[rep.decode_mode] = rep
    logz_file = p / "logz.json"
    if logz_file.exists():
        info.logz = json.loads(logz_file.read_text())
    return info


def scan_runs(root: str | Path) -> list[RunInfo]:
    root = Path(root)
    runs = []
    for cfg_file in sorted(root.glob("*/config.txt")):
        runs.append(load_run(cfg_file.parent))
    return runs


def assemble_report(runs: list[RunInfo], task_kind: str) -> str:
    """One grid table per warm-start group, a BLEU breakdown for
    transduction, and a log-normalizer table if pre-training stats exist."""
    runs = [r for r in runs if r.config.task_kind == task_kind]
    if not runs:
        return f"no completed runs for task {task_kind}\n"
    col_labels = sorted({r.config.encoder_mode for r in runs})
    chunks = []
    for warm_obj, group_title in WARM_GROUPS.items():
        cells: dict[tuple[str, str], float | None] = {}
        for r in runs:
            col = r.config.encoder_mode
            if r.config.objective == warm_obj:
                cells[("pretrain-greedy", col)] = r.metric("pretrain-greedy")
                cells[("pretrain-beam", col)] = r.metric("pretrain-beam")
            elif (r.config.objective == "soft-beam"
                  and r.config.warm_start_objective == warm_obj):
                label = ("locally-normalized"
                         if r.config.normalization_mode == "local"
                         else "globally-normalized")
                cells[(label, col)] = r.metric(label)
        if any(v is not None for v in cells.values()):
            chunks.append(render_grid_table(
                f"{task_kind}: {group_title}", col_labels, cells))
    logz_entries = []
    for r in runs:
        if r.logz is not None:
            logz_entries.append({"label": f"{r.config.objective} "
                                          f"(lam={r.config.lam:g})",
                                 **r.logz})
    if logz_entries:
        chunks.append(render_logz_table(logz_entries))
    if task_kind == "transduction":
        merged: dict[str, EvalReport] = {}
        for r in runs:
            merged.update(r.reports)
        chunks.append(render_bleu_breakdown(merged))
        for r in runs:
            for rep in r.reports.values():
                if rep.bucket_scores:
                    chunks.append(render_bucket_table(
                        rep, f"scores by source length ({rep.decode_mode})"))
                    break
    return "\n".join(chunks)


def parse_log_records(log_path: str | Path) -> list[dict]:
    records = []
    for line in Path(log_path).read_text().splitlines():
        if not line.startswith("restart="):
            continue
        rec = {}
        for part in line.split():
            key, _, val = part.partition("=")
            rec[key] = None if val == "-" else float(val)
        records.append(rec)
    return records


def plot_learning_curves(run_dir: str | Path) -> Path:
    """Render train loss and dev metric vs. epoch (one line per restart)
    to learning_curves.png inside the run directory."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    records = parse_log_records(run_dir / "log.txt")
    if not records:
        raise DataError(f"{run_dir}/log.txt has no epoch records")
    restarts = sorted({int(r["restart"]) for r in records})
    fig, (ax_loss, ax_dev) = plt.subplots(1, 2, figsize=(9, 3.5))
    for restart in restarts:
        rs = [r for r in records if int(r["restart"]) == restart]
        epochs = [int(r["epoch"]) for r in rs]
        ax_loss.plot(epochs, [r["train_loss"] for r in rs],
                     label=f"restart {restart}")
        ax_dev.plot(epochs, [r["dev_metric"] for r in rs],
                    label=f"restart {restart}")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_dev.set_xlabel("epoch")
    ax_dev.set_ylabel("dev metric")
    ax_dev.legend(fontsize="small")
    fig.tight_layout()
    out = run_dir / "learning_curves.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out

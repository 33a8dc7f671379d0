import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from dfagnn.analysis.diagnostics import EpochRecord

# 定义实验结果的输出协议。
# 每个 CSV 的第一行是 "# config: <json>" 溯源行，其余部分可以直接用
# pandas.read_csv(path, comment="#") 读回。

logger = logging.getLogger(__name__)

# --- 文件格式常量 ---
PROVENANCE_PREFIX = "# config: "
SUMMARY_FILE = "summary.csv"
EPOCHS_FILE = "epochs_seed{seed}.csv"
AGGREGATE_SEED = "all"

EPOCH_COLUMNS = ["epoch", "stage", "final", "loss", "train_acc", "val_acc", "test_acc"]


@dataclass
class SummaryRow:
    """
    一次训练的结果行；``seed`` 为 "all" 时表示多个种子的汇总。

    ``variant`` 标记消融实验的开关组合，不扫描攻击或深度的命令保持这些字段的默认值。
    """
    command: str
    algorithm: str
    dataset: str
    seed: Any
    num_layers: int
    best_epoch: Optional[int]
    val_acc: float
    test_acc: float
    variant: str = "default"
    attack_kind: str = "none"
    attack_rate: float = 0.0
    test_ci95: float = float("nan")
    runs: int = 1

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


def epoch_row(record: EpochRecord) -> Dict[str, Any]:
    """把 EpochRecord 展平成一行，逐层读数写成 ``<kind>_l<layer>`` 列。"""
    row: Dict[str, Any] = {k: getattr(record, k) for k in EPOCH_COLUMNS}
    for reading in record.weight_angles:
        row[f"weight_angle_l{reading.layer}"] = reading.degrees
    for reading in record.grad_angles:
        row[f"grad_angle_l{reading.layer}"] = reading.degrees
    for reading in record.dx_angles:
        row[f"dx_angle_l{reading.layer}"] = reading.degrees
    for c in record.criteria:
        row[f"p_l{c.layer}"] = c.p
        row[f"q_l{c.layer}"] = c.q
    degenerate = [r.layer for r in (*record.weight_angles, *record.grad_angles, *record.dx_angles) if r.degenerate]
    degenerate += [c.layer for c in record.criteria if c.degenerate]
    if degenerate:
        row["degenerate_layers"] = " ".join(str(l) for l in sorted(set(degenerate)))
    return row


def epochs_frame(records: Sequence[EpochRecord]) -> pd.DataFrame:
    # 列按首次出现的顺序排列，带与不带对齐诊断的记录可以混排
    return pd.DataFrame([epoch_row(r) for r in records])


def summary_frame(rows: Iterable[SummaryRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in rows])


def write_csv(path: Path, frame: pd.DataFrame, provenance: str) -> Path:
    """先写一行配置溯源，再写表格；相同输入得到逐字节相同的文件。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(PROVENANCE_PREFIX + provenance + "\n")
        frame.to_csv(f, index=False, lineterminator="\n", float_format="%.10g")
    logger.info("[OUTPUT] wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_provenance(path: Path) -> Optional[Dict[str, Any]]:
    """
    解析结果 CSV 的溯源行。

    :return: 配置字典；没有合法溯源行时返回 None。
    """
    with open(path, encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
    if not first.startswith(PROVENANCE_PREFIX):
        return None
    try:
        return json.loads(first[len(PROVENANCE_PREFIX):])
    except json.JSONDecodeError:
        logger.warning("[OUTPUT] malformed provenance line in %s", path)
        return None


def aggregate_row(rows: Sequence[SummaryRow], mean: float, half_width: float) -> SummaryRow:
    """多个种子的汇总行，公共字段取自 ``rows[0]``。"""
    first = rows[0]
    return SummaryRow(
        command=first.command, algorithm=first.algorithm, dataset=first.dataset, seed=AGGREGATE_SEED,
        num_layers=first.num_layers, best_epoch=None,
        val_acc=float(np.nanmean([r.val_acc for r in rows])), test_acc=mean,
        variant=first.variant, attack_kind=first.attack_kind, attack_rate=first.attack_rate,
        test_ci95=half_width, runs=len(rows),
    )


if __name__ == '__main__':
    # 示例用法
    record = EpochRecord(epoch=0, loss=1.2, train_acc=0.5, val_acc=0.4, test_acc=0.45)
    print(f"Epoch row: {epoch_row(record)}")
    row = SummaryRow(command="train", algorithm="dfa", dataset="cora", seed=0, num_layers=3,
                     best_epoch=12, val_acc=0.81, test_acc=0.80)
    print(f"Summary row: {json.dumps(row.to_row())}")

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dfagnn.errors import ConfigError
from dfagnn.pipeline.bp_trainer import BpConfig
from dfagnn.pipeline.dfa_trainer import DfaConfig, FreezeStage, staged_schedule
from dfagnn.pipeline.pseudo_error import SpreadConfig

# --- 路径配置 (可由环境变量覆盖) ---
DATA_ROOT = Path(os.environ.get("DFAGNN_DATA_DIR", "data"))
OUTPUT_ROOT = Path(os.environ.get("DFAGNN_OUTPUT_DIR", "results"))
LOG_LEVEL = os.environ.get("DFAGNN_LOG_LEVEL", "INFO")

# --- 各数据集超参数 ---
# lr, hidden, alpha, spread iterations, epsilon, weight decay, training epochs
DATASET_PRESETS: Dict[str, Dict[str, Any]] = {
    "cora":      {"lr": 0.01,  "hidden": 64, "alpha": 0.1,  "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 5e-4, "epochs": 1000},
    "citeseer":  {"lr": 0.01,  "hidden": 64, "alpha": 0.01, "spread_iterations": 200, "epsilon": 0.5, "weight_decay": 5e-4, "epochs": 1000},
    "pubmed":    {"lr": 0.01,  "hidden": 64, "alpha": 0.1,  "spread_iterations": 200, "epsilon": 0.5, "weight_decay": 5e-4, "epochs": 1000},
    "photo":     {"lr": 0.001, "hidden": 64, "alpha": 0.01, "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 5e-4, "epochs": 1000},
    "computer":  {"lr": 0.001, "hidden": 64, "alpha": 0.01, "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 5e-4, "epochs": 1000},
    "texas":     {"lr": 0.01,  "hidden": 64, "alpha": 0.9,  "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 0.0,  "epochs": 1000},
    "cornell":   {"lr": 0.01,  "hidden": 64, "alpha": 0.5,  "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 0.0,  "epochs": 1000},
    "actor":     {"lr": 0.01,  "hidden": 64, "alpha": 0.5,  "spread_iterations": 50,  "epsilon": 0.5, "weight_decay": 0.0,  "epochs": 1000},
    "chameleon": {"lr": 0.01,  "hidden": 64, "alpha": 0.5,  "spread_iterations": 200, "epsilon": 0.5, "weight_decay": 0.0,  "epochs": 1000},
    "squirrel":  {"lr": 0.01,  "hidden": 64, "alpha": 0.5,  "spread_iterations": 200, "epsilon": 0.5, "weight_decay": 0.0,  "epochs": 1000},
}
DEFAULT_PRESET = "cora"

# --- 数据集统计 (加载后用于核对导出文件) ---
# nodes, undirected edges, features, classes, homophily
DATASET_STATS: Dict[str, Tuple[int, int, int, int, float]] = {
    "cora":      (2708, 5278, 1433, 7, 0.825),
    "citeseer":  (3327, 4552, 3703, 6, 0.706),
    "pubmed":    (19717, 44324, 500, 5, 0.792),
    "computer":  (13752, 245861, 767, 10, 0.785),
    "photo":     (7650, 119081, 745, 8, 0.836),
    "chameleon": (890, 17708, 2325, 5, 0.244),
    "squirrel":  (2223, 93996, 2089, 5, 0.190),
    "actor":     (7600, 26659, 932, 5, 0.220),
    "texas":     (183, 279, 1703, 5, 0.057),
    "cornell":   (183, 277, 1703, 5, 0.301),
}

# --- 实验协议默认值 ---
PROTOCOL_CONFIG: Dict[str, Any] = {
    "num_layers": 3,
    "split_fractions": (0.6, 0.2, 0.2),
    "per_class": 20,
    "val_size": 500,
    "seed_count": 10,
    "attack_seed_count": 5,
    "attack_rates": (0.0, 0.2, 0.4, 0.6, 0.8),
    "depths": (2, 3, 4, 5, 6, 7, 8),
}

CONFIG = {
    "PATHS": {"DATA_ROOT": str(DATA_ROOT), "OUTPUT_ROOT": str(OUTPUT_ROOT), "LOG_LEVEL": LOG_LEVEL},
    "PROTOCOL": PROTOCOL_CONFIG,
    "PRESETS": DATASET_PRESETS,
}

SplitMode = Literal["random602020", "sparse20"]
AttackKind = Literal["add", "remove", "flip"]


def preset_for(dataset: str) -> Dict[str, Any]:
    """按数据集目录名取超参数行，未知名称回退到 Cora 的配置。"""
    return DATASET_PRESETS.get(Path(dataset).name.lower(), DATASET_PRESETS[DEFAULT_PRESET])


class ExperimentConfig(BaseModel):
    """
    描述一次实验的扁平配置。
    值为 None 的超参数由 :meth:`resolved` 从数据集预设中补齐。
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    dataset: str
    algorithm: Literal["bp", "dfa"] = "dfa"
    num_layers: int = Field(PROTOCOL_CONFIG["num_layers"], ge=2)
    hidden: Optional[int] = Field(None, ge=1)
    lr: Optional[float] = Field(None, gt=0)
    weight_decay: Optional[float] = Field(None, ge=0)
    bp_lr: Optional[float] = Field(None, gt=0)
    bp_weight_decay: Optional[float] = Field(None, ge=0)
    epochs: Optional[int] = Field(None, ge=0)
    alpha: Optional[float] = Field(None, ge=0, lt=1)
    spread_iterations: Optional[int] = Field(None, ge=1)
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    use_error_generator: bool = True
    use_node_filter: bool = True
    modulate_by_activation_derivative: bool = False
    seeds: Tuple[int, ...] = tuple(range(PROTOCOL_CONFIG["seed_count"]))
    split_mode: SplitMode = "random602020"
    split_name: Optional[str] = None
    split_fractions: Tuple[float, float, float] = PROTOCOL_CONFIG["split_fractions"]
    per_class: int = Field(PROTOCOL_CONFIG["per_class"], ge=1)
    val_size: int = Field(PROTOCOL_CONFIG["val_size"], ge=0)
    attack_kind: Optional[AttackKind] = None
    attack_rate: float = Field(0.0, ge=0)
    attack_kinds: Tuple[AttackKind, ...] = ("add", "remove", "flip")
    attack_rates: Tuple[float, ...] = PROTOCOL_CONFIG["attack_rates"]
    attack_seed_count: int = Field(PROTOCOL_CONFIG["attack_seed_count"], ge=1)
    depths: Tuple[int, ...] = PROTOCOL_CONFIG["depths"]
    freeze_schedule: Optional[Tuple[FreezeStage, ...]] = None
    stage_epochs: Optional[Tuple[int, ...]] = None  # 三阶段冻结实验的各阶段长度
    normalize_features: bool = True
    output_dir: str = str(OUTPUT_ROOT)
    workers: int = Field(1, ge=1)
    log_every: int = Field(100, ge=0)

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        if len(set(v)) != len(v) or min(v) < 0:
            raise ValueError("seeds must be distinct non-negative integers")
        return v

    @field_validator("attack_rates")
    @classmethod
    def _rates(cls, v):
        if not v or min(v) < 0:
            raise ValueError("attack_rates must be a non-empty list of non-negative rates")
        return v

    @field_validator("depths")
    @classmethod
    def _depths(cls, v):
        if not v or min(v) < 2:
            raise ValueError("depths must be a non-empty list of layer counts >= 2")
        return v

    @model_validator(mode="before")
    @classmethod
    def _expand_stages(cls, data: Any) -> Any:
        # 阶段长度按最终合并后的 num_layers 展开，输出层下标随深度变化
        if not isinstance(data, dict) or data.get("stage_epochs") is None:
            return data
        layers = int(data.get("num_layers", PROTOCOL_CONFIG["num_layers"]))
        expanded = staged_schedule(layers, tuple(data["stage_epochs"]))
        given = data.get("freeze_schedule")
        # 溯源行里两者同时存在且一致，可以原样读回
        if given is not None and tuple(FreezeStage.model_validate(st) for st in given) != expanded:
            raise ValueError("stage_epochs and freeze_schedule disagree; give only one of them")
        return {**data, "freeze_schedule": expanded}

    @model_validator(mode="after")
    def _cross(self) -> "ExperimentConfig":
        if self.use_node_filter and not self.use_error_generator:
            raise ValueError("use_node_filter requires use_error_generator")
        if self.attack_rate > 0 and self.attack_kind is None:
            raise ValueError(f"attack_rate={self.attack_rate} needs an attack_kind (add, remove or flip)")
        if any(f <= 0 for f in self.split_fractions) or sum(self.split_fractions) > 1 + 1e-12:
            raise ValueError(f"split_fractions must be positive and sum to at most 1, got {self.split_fractions}")
        for stage in self.freeze_schedule or ():
            if any(not 0 <= l < self.num_layers for l in stage.frozen):
                raise ValueError(f"freeze schedule layer outside 0..{self.num_layers - 1}: {stage.frozen}")
        return self

    # --- 派生配置 ---

    def resolved(self) -> "ExperimentConfig":
        """返回副本，所有 None 超参数取自数据集预设。"""
        preset = preset_for(self.dataset)
        fill = {k: preset[k] for k in ("lr", "weight_decay", "epochs", "alpha", "spread_iterations", "epsilon", "hidden")
                if getattr(self, k) is None}
        out = self.model_copy(update=fill)
        return out.model_copy(update={
            "bp_lr": out.bp_lr if out.bp_lr is not None else out.lr,
            "bp_weight_decay": out.bp_weight_decay if out.bp_weight_decay is not None else out.weight_decay,
        })

    def dfa_config(self, num_layers: Optional[int] = None, **overrides) -> DfaConfig:
        r = self.resolved()
        values = dict(
            spread=SpreadConfig(alpha=r.alpha, iterations=r.spread_iterations, epsilon=r.epsilon),
            lr=r.lr, weight_decay=r.weight_decay, epochs=r.epochs,
            num_layers=num_layers or r.num_layers, hidden=r.hidden,
            use_error_generator=r.use_error_generator, use_node_filter=r.use_node_filter,
            freeze_schedule=r.freeze_schedule,
            modulate_by_activation_derivative=r.modulate_by_activation_derivative,
            log_every=r.log_every,
        )
        values.update(overrides)
        return DfaConfig(**values)

    def bp_config(self, num_layers: Optional[int] = None) -> BpConfig:
        r = self.resolved()
        return BpConfig(lr=r.bp_lr, weight_decay=r.bp_weight_decay, epochs=r.epochs,
                        num_layers=num_layers or r.num_layers, hidden=r.hidden, log_every=r.log_every)

    def provenance(self, **extra: Any) -> str:
        """补齐后的全部字段加上 ``extra``，按键排序的 JSON，写入每个 CSV 的首行。"""
        return json.dumps({**self.resolved().model_dump(mode="json"), **extra}, sort_keys=True)

    @classmethod
    def from_sources(cls, config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """
        合并 JSON 配置文件与显式覆盖项 (覆盖项优先)。

        :raises ConfigError: 文件无法读取、含未知字段或取值越界。
        """
        values: Dict[str, Any] = {}
        if config_file:
            try:
                raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config file {config_file}: {e}") from None
            if not isinstance(raw, dict):
                raise ConfigError(f"config file {config_file} must hold a JSON object")
            values.update(raw)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid experiment configuration:\n{e}") from None


if __name__ == '__main__':
    # 打印配置以供检查
    print("--- DFA-GNN Configuration ---")
    for section, settings in CONFIG.items():
        print(f"\n[{section}]")
        for key, value in settings.items():
            print(f"  {key:<20}: {value}")

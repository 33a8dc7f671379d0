import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

# 将项目根目录添加到 Python 路径，以便直接运行 dfagnn/run.py
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

try:
    from pydantic import ValidationError

    from dfagnn.api.commands import COMMANDS
    from dfagnn.config import DATA_ROOT, LOG_LEVEL, ExperimentConfig
    from dfagnn.errors import ConfigError, DatasetFormatError, GraphError
    from dfagnn.pipeline.run_manager import RunManager
except ImportError as e:
    print(f"FATAL ERROR: Failed to import necessary modules: {e}")
    print("Please install the packages listed in requirements.txt.")
    sys.exit(1)

logger = logging.getLogger("dfagnn")

EXIT_CONFIG_ERROR = 2
# 输入类错误映射为退出码 2；训练中途的数值错误照常抛出
INPUT_ERRORS = (ConfigError, DatasetFormatError, GraphError, ValidationError)


# --- 逗号分隔列表的解析 ---

def _floats(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _words(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    """五个子命令共用同一组参数；未给出的参数保持 None，由配置文件或数据集预设决定。"""
    parser = argparse.ArgumentParser(prog="dfagnn", description="DFA-GNN and backpropagation GCN experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--data", dest="dataset", help=f"dataset directory (default {DATA_ROOT / 'cora'})")
    g.add_argument("--algo", dest="algorithm", choices=["bp", "dfa"])
    g.add_argument("--config", dest="config_file", help="flat JSON file with ExperimentConfig fields")
    g.add_argument("--seed-count", type=int, help="use seeds 0..N-1")
    g.add_argument("--seeds", type=_ints, help="explicit comma-separated seed list")
    g.add_argument("--out", dest="output_dir")
    g.add_argument("--workers", type=int)

    h = common.add_argument_group("hyper-parameters (default: dataset preset)")
    h.add_argument("--layers", dest="num_layers", type=int)
    h.add_argument("--hidden", type=int)
    h.add_argument("--lr", type=float)
    h.add_argument("--weight-decay", type=float)
    h.add_argument("--bp-lr", type=float)
    h.add_argument("--bp-weight-decay", type=float)
    h.add_argument("--epochs", type=int)
    h.add_argument("--alpha", type=float)
    h.add_argument("--iterations", dest="spread_iterations", type=int)
    h.add_argument("--epsilon", type=float)
    h.add_argument("--no-eg", dest="use_error_generator", action="store_const", const=False)
    h.add_argument("--no-nf", dest="use_node_filter", action="store_const", const=False)
    h.add_argument("--modulate", dest="modulate_by_activation_derivative", action="store_const", const=True)
    h.add_argument("--no-normalize", dest="normalize_features", action="store_const", const=False)

    s = common.add_argument_group("splits and attacks")
    s.add_argument("--split", dest="split_mode", choices=["random602020", "sparse20"])
    s.add_argument("--split-name", help="use splits/<name>.json from the dataset directory")
    s.add_argument("--per-class", type=int)
    s.add_argument("--val-size", type=int)
    s.add_argument("--attack-kind", choices=["add", "remove", "flip"])
    s.add_argument("--attack-rate", type=float)
    s.add_argument("--attack-kinds", type=_words)
    s.add_argument("--attack-rates", type=_floats)
    s.add_argument("--attack-seed-count", type=int)
    s.add_argument("--depths", type=_ints)
    s.add_argument("--stages", dest="stage_epochs", type=_ints,
                   help="three stage lengths: hidden only, output only, hidden only")

    o = common.add_argument_group("output")
    o.add_argument("--log-level", default=LOG_LEVEL)
    o.add_argument("--log-every", type=int)
    o.add_argument("--quiet", action="store_true", help="no progress bars")

    for verb, text in [("train", "train one algorithm over all seeds"),
                       ("ablate", "compare the pseudo-error generator and node filter variants"),
                       ("attack", "random structural attacks, BP vs DFA"),
                       ("depth", "accuracy against number of layers, BP vs DFA"),
                       ("align", "per-epoch feedback alignment diagnostics")]:
        sub.add_parser(verb, parents=[common], help=text)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """
    只有用户显式给出的参数才会覆盖配置文件。
    --stages 只传阶段长度，冻结层在配置合并后按最终的 num_layers 展开。
    """
    skip = {"command", "config_file", "seed_count", "log_level", "quiet"}
    values = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if args.seed_count is not None and args.seeds is None:
        values["seeds"] = list(range(args.seed_count))
    return values


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口。返回进程退出码：0 成功，2 输入有误，130 用户中断。"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        print("\n--- 1. Loading Configuration ---")
        overrides = overrides_from_args(args)
        if args.config_file is None and "dataset" not in overrides:
            overrides["dataset"] = str(DATA_ROOT / "cora")
        config = ExperimentConfig.from_sources(args.config_file, overrides)
        logger.info("[CONFIG] %s", config.provenance(command=args.command))

        print(f"\n--- 2. Running '{args.command}' ---")
        manager = RunManager(workers=config.workers, progress=not args.quiet)
        output = COMMANDS[args.command](config, manager=manager)
    except INPUT_ERRORS as e:
        # 配置或数据有误：训练尚未开始，直接退出
        logger.critical("FATAL: %s", e)
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        logger.warning("Interrupted by user.")
        return 130

    print("\n--- 3. Done ---")
    for path in output.files:
        print(f"  {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

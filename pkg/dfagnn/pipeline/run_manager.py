import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

from tqdm import tqdm

from dfagnn.data.dataset import Dataset, Split
from dfagnn.pipeline.bp_trainer import BpConfig, TrainResult, train_bp
from dfagnn.pipeline.dfa_trainer import DfaConfig, train_dfa

logger = logging.getLogger(__name__)


@dataclass
class TrainJob:
    """
    One training run. ``tags`` travel with the result untouched (variant,
    attack setting, depth...) so commands can build their rows.
    """
    dataset: Dataset
    split: Split
    config: Union[BpConfig, DfaConfig]
    seed: int
    tags: Dict[str, Any] = field(default_factory=dict)

    @property
    def algorithm(self) -> str:
        return "dfa" if isinstance(self.config, DfaConfig) else "bp"


@dataclass
class JobOutcome:
    job_index: int
    seed: int
    tags: Dict[str, Any]
    result: TrainResult


def run_job(index: int, job: TrainJob) -> JobOutcome:
    """Execute a single job; top-level so worker processes can import it."""
    if job.algorithm == "dfa":
        result = train_dfa(job.dataset, job.split, job.config, seed=job.seed)
    else:
        result = train_bp(job.dataset, job.split, job.config, seed=job.seed)
    return JobOutcome(job_index=index, seed=job.seed, tags=job.tags, result=result)


class RunManager:
    """
    Runs batches of independent training jobs, serially or on a process pool.

    Each job owns its seed, so results do not depend on the worker count;
    outcomes always come back in submission order.
    """
    def __init__(self, workers: int = 1, progress: bool = True):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.progress = progress

    def run(self, jobs: Sequence[TrainJob], desc: str = "runs") -> List[JobOutcome]:
        if not jobs:
            return []
        logger.info("[RUN] %d %s on %d worker(s)", len(jobs), desc, self.workers)
        if self.workers == 1:
            return [run_job(i, job) for i, job in enumerate(tqdm(jobs, desc=desc, disable=not self.progress))]

        outcomes: List[Optional[JobOutcome]] = [None] * len(jobs)
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = {pool.submit(run_job, i, job): i for i, job in enumerate(jobs)}
            for future in tqdm(as_completed(futures), total=len(futures), desc=desc, disable=not self.progress):
                i = futures[future]
                try:
                    outcomes[i] = future.result()
                except Exception:
                    logger.error("[RUN] job %d (seed %d, %s) failed", i, jobs[i].seed, jobs[i].tags)
                    for other in futures:
                        other.cancel()
                    raise
        return outcomes

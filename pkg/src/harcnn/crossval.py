"""Subject-partitioned k-fold cross-validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data.registry import ActivityGroup, SensorConfig, check_applicable
from .data.windows import build_dataset
from .errors import FoldError
from .metrics import EvalReport, evaluate
from .nn.network import NetworkSpec
from .optim import TrainConfig, train
from .seeding import substream

log = logging.getLogger(__name__)


@dataclass
class FoldPlan:
    k: int
    test_sets: list
    train_sets: list
    note: str = ""

    def __iter__(self):
        return iter(zip(self.train_sets, self.test_sets))


def plan_folds(subject_ids, k: int = 5, seed: int = 0, test_size: int | None = None) -> FoldPlan:
    """Split subjects (never windows) into ``k`` folds.

    By default the test sets are disjoint and cover every subject once, so 19
    subjects give test sizes 4, 4, 4, 4, 3. With ``test_size`` every fold
    holds exactly that many test subjects, taken cyclically from the shuffled
    list; subjects may then be tested in more than one fold.
    """
    subjects = sorted(set(int(s) for s in subject_ids))
    if len(subjects) < k:
        raise ValueError(f"need at least {k} subjects for {k} folds, got {len(subjects)}")
    order = [subjects[i] for i in substream(seed, "folds").permutation(len(subjects))]
    if test_size is None:
        tests = [sorted(part.tolist()) for part in np.array_split(np.array(order), k)]
        sizes = [len(t) for t in tests]
        note = (
            f"disjoint folds over {len(subjects)} subjects, test sizes {sizes}"
            if len(set(sizes)) > 1
            else ""
        )
    else:
        if not 1 <= test_size < len(subjects):
            raise ValueError("test_size must leave at least one training subject")
        n = len(subjects)
        tests = [sorted(order[(i * test_size + j) % n] for j in range(test_size)) for i in range(k)]
        note = f"fixed {test_size} test subjects per fold; folds may share test subjects"
    trains = [[s for s in subjects if s not in set(t)] for t in tests]
    return FoldPlan(k, tests, trains, note)


@dataclass
class FoldResult:
    fold: int
    report: EvalReport
    train_subjects: set
    test_subjects: set
    trace: list = field(default_factory=list)


@dataclass
class CrossvalResult:
    group: ActivityGroup
    config: SensorConfig
    plan: FoldPlan
    folds: list
    pooled: EvalReport

    @property
    def reports(self) -> list:
        return [f.report for f in self.folds]


def fold_seed(seed: int, fold: int) -> int:
    return int(substream(seed, "fold", fold).integers(2**31 - 1))


def crossval(
    group: ActivityGroup,
    config: SensorConfig,
    recordings,
    cfg: TrainConfig,
    k: int = 5,
    spec: NetworkSpec | None = None,
    train_thin: int = 1,
    test_size: int | None = None,
    plan: FoldPlan | None = None,
    on_fold=None,
) -> CrossvalResult:
    """Train a fresh network per fold and evaluate it on the held-out subjects.

    ``train_thin`` keeps every n-th training window of each recording (test
    sets are never thinned). Subject sets are read back from the windows
    actually used, not from the plan. Any fold error aborts the run as a
    :class:`FoldError` carrying the fold number.
    """
    check_applicable(group, config)
    dataset = build_dataset(recordings, group, config)
    if spec is None:
        spec = NetworkSpec(channels=config.arity, output_units=group.m)
    if plan is None:
        plan = plan_folds(dataset.subjects, k, cfg.seed, test_size)
    folds = []
    for fold, (train_ids, test_ids) in enumerate(plan, start=1):
        try:
            train_set = dataset.subset(np.flatnonzero(np.isin(dataset.subjects, train_ids))).thin(train_thin)
            test_set = dataset.subset(np.flatnonzero(np.isin(dataset.subjects, test_ids)))
            fold_cfg = replace(cfg, seed=fold_seed(cfg.seed, fold))
            log.info("fold %d: %d train / %d test windows", fold, len(train_set), len(test_set))
            state, trace = train(spec, train_set, fold_cfg)
            meta = {"group": group.name, "config": config.name, "fold": str(fold)}
            report = evaluate(state, spec, test_set, meta, batch_size=max(cfg.batch_size, 256))
        except Exception as exc:
            raise FoldError(fold, exc) from exc
        result = FoldResult(
            fold,
            report,
            set(np.unique(train_set.subjects).tolist()),
            set(np.unique(test_set.subjects).tolist()),
            trace,
        )
        folds.append(result)
        if on_fold is not None:
            on_fold(result)
    pooled = EvalReport.pooled(
        [f.report for f in folds], {"group": group.name, "config": config.name, "fold": "pooled"}
    )
    return CrossvalResult(group, config, plan, folds, pooled)

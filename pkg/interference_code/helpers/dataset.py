# Copyright 2023 D-Wave
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Co-execution campaigns that turn applications into an interference dataset.

Every co-location of a plan is executed once per repetition by a runner. The runner
decides what executing means: running synthetic applications on this machine, looking up
externally measured runtimes, or asking a seeded contention oracle.
"""
import abc
import hashlib
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from itertools import combinations_with_replacement
from typing import Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from helpers.core import (ApplicationProfile, CoLocation, ResourceVector, SlowdownObservation, Unit,
                          calibrate_maxima, interference_level, normalize_profile)
from helpers.errors import (CoExecutionError, ConfigError, DomainError, EmptyPlanError, InterferenceError,
                            UnitMismatchError, UnknownLabelError)
from helpers.model import PAPER_COEFFICIENTS, InterferenceModel, features, predict
from helpers.regression import DatasetRow, InterferenceDataset
from helpers.settings import DEFAULT_CACHE_SIZE_BYTES
from helpers.stressor import SyntheticAppSpec, estimate_profile, run
from helpers.transports import make_transport

logger = logging.getLogger(__name__)

PAIRWISE_ALL = 'pairwise-all'
EXPLICIT_LIST = 'explicit-list'
SCHEMES = (PAIRWISE_ALL, EXPLICIT_LIST)

AGGREGATE_MEAN = 'mean'
AGGREGATE_NONE = 'none'

DEFAULT_ISOLATED_RUNTIME = 1.0


def _sorted_members(members):
    return tuple(sorted(members, key=lambda m: m.label))


def _group_name(members):
    return 'x'.join(m.label for m in members)


@dataclass(frozen=True)
class CoExecutionPlan:
    """Which applications are co-executed, and how often.

    Attributes:
        members (tuple): ApplicationProfile or SyntheticAppSpec members with unique labels
        scheme (str): 'pairwise-all' (every group of ``group_size`` members, repeated
            members included) or 'explicit-list' (the label groups in ``groups``)
        repetitions (int): co-executions per co-location
        groups (tuple[tuple[str]]): member labels of each co-location of an explicit list
        group_size (int): applications per co-location of a pairwise-all plan
        aggregate (str): 'mean' averages the repetitions into one row, 'none' keeps one row each
    """
    members: Tuple[object, ...]
    scheme: str = PAIRWISE_ALL
    repetitions: int = 1
    groups: Tuple[Tuple[str, ...], ...] = ()
    group_size: int = 2
    aggregate: str = AGGREGATE_MEAN

    def __post_init__(self):
        object.__setattr__(self, 'members', tuple(self.members))
        object.__setattr__(self, 'groups', tuple(tuple(g) for g in self.groups))
        if not self.members:
            raise EmptyPlanError('the plan has no members')
        labels = [m.label for m in self.members]
        if len(set(labels)) != len(labels):
            raise ConfigError(f'member labels must be unique, got {labels}')
        if self.scheme not in SCHEMES:
            raise ConfigError(f'unknown scheme {self.scheme!r}, expected one of {SCHEMES}')
        if self.aggregate not in (AGGREGATE_MEAN, AGGREGATE_NONE):
            raise ConfigError(f'unknown aggregation {self.aggregate!r}')
        if self.repetitions < 1:
            raise ConfigError(f'repetitions must be >= 1, got {self.repetitions}')
        if self.scheme == PAIRWISE_ALL and self.group_size < 2:
            raise ConfigError(f'a co-location needs at least 2 applications, group_size={self.group_size}')
        if self.scheme == EXPLICIT_LIST:
            if not self.groups:
                raise EmptyPlanError('the explicit list has no co-locations')
            for group in self.groups:
                if len(group) < 2:
                    raise ConfigError(f'a co-location needs at least 2 applications, got {group}')
                for label in group:
                    self.member(label)

    def member(self, label):
        for m in self.members:
            if m.label == label:
                return m
        raise UnknownLabelError(f'{label!r} is not a member of the plan')

    def colocations(self):
        """Returns:
            list[tuple]: members of every co-location, label-sorted, in lexicographic order
        """
        if self.scheme == PAIRWISE_ALL:
            groups = combinations_with_replacement(_sorted_members(self.members), self.group_size)
        else:
            groups = (_sorted_members(self.member(label) for label in g) for g in self.groups)
        return sorted(groups, key=lambda g: tuple(m.label for m in g))

    @property
    def size(self):
        """Number of co-locations, n (n + 1) / 2 for a pairwise-all plan of n members."""
        if self.scheme == PAIRWISE_ALL:
            return math.comb(len(self.members) + self.group_size - 1, self.group_size)
        return len(self.groups)


@dataclass(frozen=True)
class ContentionOracle:
    """Deterministic stand-in for a machine: interference follows the model plus seeded noise.

    Attributes:
        h1, h2, h3 (float): hidden coefficients
        sigma (float): standard deviation of the Gaussian noise
        seed (int): base seed of the noise
    """
    h1: float = PAPER_COEFFICIENTS[0]
    h2: float = PAPER_COEFFICIENTS[1]
    h3: float = PAPER_COEFFICIENTS[2]
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigError(f'oracle noise sigma must be finite and >= 0, got {self.sigma}')

    @property
    def model(self):
        return InterferenceModel(self.h1, self.h2, self.h3)

    def rng(self, labels, repetition=0):
        """Generator of the noise of one co-location; depends only on the seed, labels and repetition."""
        digest = hashlib.sha256('x'.join(sorted(labels)).encode()).hexdigest()
        return np.random.default_rng(np.random.SeedSequence([self.seed, int(digest[:8], 16), repetition]))


def oracle_slowdown(oracle, coloc, repetition=0):
    """Interference level the oracle assigns to a co-location.

    Args:
        oracle (ContentionOracle): hidden coefficients and noise
        coloc (CoLocation): co-location of score profiles
        repetition (int): repetition index; each repetition draws its own noise

    Returns:
        float: h1 T1 + h2 T2 + h3 T3 + noise
    """
    level = predict(oracle.model, features(coloc))
    if oracle.sigma > 0:
        level += oracle.rng(coloc.labels, repetition).normal(0.0, oracle.sigma)
    return level


class Runner(abc.ABC):
    """Executes co-locations for `co_execute`."""

    def prepare(self, members):
        """Called once with every member of a plan before its first co-execution."""

    @abc.abstractmethod
    def profile(self, member):
        """Returns the score profile of a member."""

    @abc.abstractmethod
    def isolated_runtime(self, member):
        """Returns the runtime of a member in a dedicated machine (s)."""

    @abc.abstractmethod
    def concurrent_runtimes(self, members, repetition=0):
        """Returns the first-completion runtime of each member, in order, when run together."""


def _profile_runtime(member, default=None):
    runtime = getattr(member, 'isolated_runtime', None)
    if runtime is None:
        runtime = default
    if runtime is None:
        raise CoExecutionError('no measured isolated runtime', label=member.label)
    return runtime


def _score_profile(member):
    if not isinstance(member, ApplicationProfile):
        raise ConfigError(f'member {member.label!r} is not an application profile')
    if member.unit is not Unit.SCORE:
        raise UnitMismatchError(f'profile {member.label!r} is not normalized into scores')
    return member


class OracleRunner(Runner):
    """Runs nothing; concurrent runtimes are the isolated ones stretched by the oracle's level.

    Args:
        oracle (ContentionOracle): source of the interference levels
        default_isolated_runtime (float): runtime of members without one
    """

    def __init__(self, oracle, default_isolated_runtime=DEFAULT_ISOLATED_RUNTIME):
        self.oracle = oracle
        self.default_isolated_runtime = default_isolated_runtime

    def profile(self, member):
        return _score_profile(member)

    def isolated_runtime(self, member):
        return _profile_runtime(member, self.default_isolated_runtime)

    def concurrent_runtimes(self, members, repetition=0):
        coloc = CoLocation(tuple(self.profile(m) for m in members))
        level = oracle_slowdown(self.oracle, coloc, repetition)
        if level <= -1.0:
            raise CoExecutionError(f'oracle level {level} leaves no runtime', label=coloc.name)
        return [self.isolated_runtime(m) * (1.0 + level) for m in members]


class MeasurementRunner(Runner):
    """Replays concurrent runtimes measured elsewhere.

    Args:
        measurements (pd.DataFrame): columns ``colocation, label, concurrent_runtime_s`` and
            optionally ``repetition``; one row per member of each co-execution
    """

    def __init__(self, measurements):
        missing = {'colocation', 'label', 'concurrent_runtime_s'} - set(measurements.columns)
        if missing:
            raise ConfigError(f'measurements lack the columns {sorted(missing)}')
        self.measurements = measurements

    @classmethod
    def from_csv(cls, path):
        return cls(pd.read_csv(path, comment='#', float_precision='round_trip'))

    def profile(self, member):
        return _score_profile(member)

    def isolated_runtime(self, member):
        return _profile_runtime(member)

    def concurrent_runtimes(self, members, repetition=0):
        name = _group_name(members)
        rows = self.measurements[self.measurements['colocation'] == name]
        if 'repetition' in rows.columns:
            rows = rows[rows['repetition'] == repetition]
        available = {}
        for label, runtime in zip(rows['label'], rows['concurrent_runtime_s']):
            available.setdefault(label, []).append(float(runtime))
        runtimes = []
        for member in members:
            if not available.get(member.label):
                raise CoExecutionError(f'no measured runtime in co-location {name}', label=member.label)
            runtimes.append(available[member.label].pop(0))
        return runtimes


class RestartingRunner(Runner):
    """Runner that launches real executions and keeps contention up until the slowest finishes.

    Every member starts at the same time. A member that finishes while others still run is
    restarted; its recorded runtime is the wall time of its first completion. Once every
    member has completed once, the restarted instances are cancelled.
    """

    @abc.abstractmethod
    def launch(self, member, cancel):
        """Runs one instance of ``member`` to completion or until ``cancel`` is set."""

    def concurrent_runtimes(self, members, repetition=0):
        count = len(members)
        first = [None] * count
        lock = threading.Lock()
        all_done = threading.Event()
        restarts = [0] * count
        start = time.perf_counter()

        def loop(i):
            member = members[i]
            while not all_done.is_set():
                try:
                    self.launch(member, all_done)
                except InterferenceError as e:
                    all_done.set()
                    raise CoExecutionError(str(e), label=member.label) from e
                except Exception as e:
                    all_done.set()
                    raise CoExecutionError(repr(e), label=member.label) from e
                with lock:
                    if first[i] is None:
                        first[i] = time.perf_counter() - start
                        if all(f is not None for f in first):
                            all_done.set()
                    else:
                        restarts[i] += 1

        with ThreadPoolExecutor(max_workers=count, thread_name_prefix='member') as pool:
            futures = [pool.submit(loop, i) for i in range(count)]
        for future in futures:
            future.result()
        logger.debug('%s completed, restarts per member %s', _group_name(members), restarts)
        return first


class StressorRunner(RestartingRunner):
    """Executes synthetic applications on this machine.

    Isolated runs are profiled from the stressor counters and normalized with ``maxima``;
    without maxima the highest isolated rates over the plan's members define score 1.0.

    Args:
        workers (int): workers of each synthetic application
        transport (str): transport name, 'inproc' or 'loopback'
        maxima (CalibrationMaxima, optional): calibration maxima
        decimals (int, optional): rounding of the scores
        cache_size_bytes (int): cache capacity of the DRAM attribution
    """

    def __init__(self, workers=1, transport='inproc', maxima=None, decimals=None,
                 cache_size_bytes=DEFAULT_CACHE_SIZE_BYTES):
        self.workers = workers
        self.transport = transport
        self.maxima = maxima
        self.decimals = decimals
        self.cache_size_bytes = cache_size_bytes
        self._runtimes = {}
        self._profiles = {}

    def _run_once(self, spec, cancel=None):
        with make_transport(self.transport, self.workers) as transport:
            start = time.perf_counter()
            counters = run(spec, self.workers, transport, self.cache_size_bytes, cancel)
            return counters, time.perf_counter() - start

    def prepare(self, members):
        raw = {}
        for spec in members:
            if not isinstance(spec, SyntheticAppSpec):
                raise ConfigError(f'member {spec.label!r} is not a synthetic application')
            if spec.label in self._runtimes:
                continue
            counters, seconds = self._run_once(spec)
            rates = estimate_profile(counters, seconds)
            zeros = (ResourceVector(),) * (self.workers - 1)
            raw[spec.label] = ApplicationProfile(spec.label, (rates,) + zeros, self.workers, seconds)
            self._runtimes[spec.label] = seconds
            logger.info('isolated %s: %.3f s, %s', spec.label, seconds, rates.to_mapping())
        if not raw:
            return
        if self.maxima is None:
            self.maxima = calibrate_maxima(raw.values(), allow_unused=True)
        for label, profile in raw.items():
            self._profiles[label] = normalize_profile(profile, self.maxima, self.decimals)

    def _prepared(self, member, table):
        if member.label not in table:
            self.prepare([member])
        return table[member.label]

    def profile(self, member):
        return self._prepared(member, self._profiles)

    def isolated_runtime(self, member):
        return self._prepared(member, self._runtimes)

    def launch(self, member, cancel):
        self._run_once(member, cancel)


def co_execute(members, runner, repetition=0):
    """Runs members together and observes their slowdowns.

    Args:
        members (Sequence): members of one co-location, at least two
        runner (Runner): executes the co-location
        repetition (int): repetition index

    Returns:
        list[SlowdownObservation]: one observation per member, ordered by label
    """
    members = _sorted_members(members)
    if len(members) < 2:
        raise DomainError(f'a co-execution needs at least 2 applications, got {len(members)}')
    name = _group_name(members)
    isolated = [runner.isolated_runtime(m) for m in members]
    try:
        concurrent = runner.concurrent_runtimes(members, repetition)
    except CoExecutionError:
        raise
    except Exception as e:
        raise CoExecutionError(str(e), label=name) from e
    if len(concurrent) != len(members):
        raise CoExecutionError(f'runner returned {len(concurrent)} runtimes for {len(members)} members',
                               label=name)
    return [SlowdownObservation(m.label, iso, conc) for m, iso, conc in zip(members, isolated, concurrent)]


def build_dataset(plan, runner, calibration_id='', progress=True):
    """Co-executes every co-location of a plan.

    Failed co-executions become rows without an observation, carrying the error.

    Args:
        plan (CoExecutionPlan): what to run
        runner (Runner): how to run it
        calibration_id (str): identifier of the calibration behind the scores
        progress (bool): show a progress bar

    Returns:
        InterferenceDataset: one row per co-location (per repetition with aggregate 'none'),
        ordered by member labels
    """
    runner.prepare(plan.members)
    rows = []
    for members in tqdm(plan.colocations(), desc='co-executions', disable=not progress):
        row_features = features(CoLocation(tuple(runner.profile(m) for m in members)))
        levels = []
        error = None
        for repetition in range(plan.repetitions):
            try:
                levels.append(interference_level(co_execute(members, runner, repetition)))
            except CoExecutionError as e:
                error = str(e)
                logger.warning('co-execution %s failed: %s', row_features.name, e)
                break
        if error is not None:
            rows.append(DatasetRow(row_features, None, error))
        elif plan.aggregate == AGGREGATE_MEAN:
            rows.append(DatasetRow(row_features, math.fsum(levels) / len(levels)))
        else:
            rows.extend(DatasetRow(row_features, level) for level in levels)
    rows.sort(key=lambda r: r.features.labels)
    generated = datetime.now(timezone.utc).isoformat(timespec='seconds')
    return InterferenceDataset(tuple(rows), calibration_id, generated)


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int


def _edge(k, bin_width):
    return round(k * bin_width, 12)


def _bin_index(value, bin_width):
    # v / w drifts across an edge in floating point (0.3 / 0.1 < 3); the emitted edges decide
    k = math.floor(value / bin_width)
    if value >= _edge(k + 1, bin_width):
        k += 1
    elif value < _edge(k, bin_width):
        k -= 1
    return k


def histogram(dataset, bin_width):
    """Counts observed interference levels per half-open bin [k w, (k + 1) w).

    Args:
        dataset (InterferenceDataset): dataset to count
        bin_width (float): bin width w

    Returns:
        list[HistogramBin]: contiguous bins from the lowest to the highest occupied one
    """
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise DomainError(f'bin width must be positive, got {bin_width}')
    values = [r.observed for r in dataset.usable_rows()]
    if not values:
        return []
    indices = [_bin_index(v, bin_width) for v in values]
    counts = {}
    for k in indices:
        counts[k] = counts.get(k, 0) + 1
    return [HistogramBin(_edge(k, bin_width), _edge(k + 1, bin_width), counts.get(k, 0))
            for k in range(min(indices), max(indices) + 1)]

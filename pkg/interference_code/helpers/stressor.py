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
"""Synthetic application template used to generate the calibration workload.

Each worker runs ``omega`` main loop iterations. An iteration is a computation phase of
``alpha`` strided STREAM-SUM passes (``A[i] = B[i] + C[i]`` on every ``delta``-th element of
``gamma``-element vectors), each followed by ``theta`` square roots per touched element,
then a communication phase of ``beta`` all-to-all exchanges of ``lambda_bytes`` per peer.

Hardware counters are replaced by software counts of the work actually done.
"""
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from helpers.core import ResourceVector, Unit
from helpers.errors import ConfigError, DomainError, UnitMismatchError, UnknownLabelError
from helpers.settings import DEFAULT_CACHE_SIZE_BYTES
from helpers.transports import InProcessTransport

logger = logging.getLogger(__name__)

ELEMENT_BYTES = 8
CACHE_LINE_BYTES = 64
SQRT_SEED = 2.0
ACCESSES_PER_ELEMENT = 3  # reads of B and C, write of A


@dataclass(frozen=True)
class SyntheticAppSpec:
    """Parameters of one synthetic application.

    Args:
        omega (int): main loop iterations
        alpha (int): computation phase iterations per main loop iteration
        beta (int): communication phase iterations per main loop iteration
        gamma (int): elements per vector
        delta (int): stride in elements
        theta (int): square roots per touched element
        lambda_bytes (int): bytes sent to every other worker by one exchange
        label (str): optional name, e.g. the preset label
    """

    omega: int
    alpha: int
    beta: int
    gamma: int
    delta: int
    theta: int
    lambda_bytes: int
    label: str = ''

    def __post_init__(self):
        minima = {'omega': 0, 'alpha': 0, 'beta': 0, 'gamma': 1, 'delta': 1, 'theta': 0, 'lambda_bytes': 0}
        for name, minimum in minima.items():
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f'{name} must be an integer, got {value!r}')
            if value < minimum:
                raise ConfigError(f'{name} must be >= {minimum}, got {value}')
        if self.delta > self.gamma:
            raise ConfigError(f'stride delta={self.delta} exceeds vector length gamma={self.gamma}')

    @property
    def touched_per_pass(self):
        """Elements touched by one strided pass, ceil(gamma / delta)."""
        return -(-self.gamma // self.delta)

    @property
    def working_set_bytes(self):
        return ACCESSES_PER_ELEMENT * self.gamma * ELEMENT_BYTES

    @property
    def loop_trips(self):
        """Innermost loop trips of one worker: touched elements, square roots and exchanges."""
        per_pass = self.touched_per_pass * (1 + self.theta)
        return self.omega * (self.alpha * per_pass + self.beta)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f'unknown stressor parameters: {sorted(unknown)}')
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class StressorCounters:
    """Software-counted activity of a run, summed over its workers.

    Phase durations are summed over workers as well, so they are worker-seconds.
    """

    element_accesses: int = 0
    dram_element_accesses: int = 0
    sqrt_evaluations: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    computation_phase_seconds: float = 0.0
    communication_phase_seconds: float = 0.0
    iterations_completed: int = 0

    def __add__(self, other):
        if not isinstance(other, StressorCounters):
            return NotImplemented
        return StressorCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def to_dict(self):
        return asdict(self)


# label: (omega, alpha, beta, gamma, delta, theta, lambda)
# S13-S18 are printed with beta = 150000 although the phases were meant to take similar
# time; the values are kept as published.
_PRESET_PARAMETERS = {
    'S1': (25, 120000, 5200, 7000, 512, 0, 22600),
    'S2': (25, 90000, 5200, 9000, 1024, 6, 22600),
    'S3': (25, 40000, 5200, 11500, 2048, 22, 22600),
    'S4': (25, 7500, 5200, 30000, 512, 0, 22600),
    'S5': (25, 2700, 5200, 39000, 512, 21, 22600),
    'S6': (25, 20000, 5200, 11800, 256, 2, 22600),
    'S7': (25, 120000, 1500, 7000, 512, 0, 749568),
    'S8': (25, 90000, 1500, 9000, 1024, 6, 749568),
    'S9': (25, 40000, 1500, 11500, 2048, 22, 749568),
    'S10': (25, 7500, 1500, 30000, 512, 0, 749568),
    'S11': (25, 2700, 1500, 39000, 512, 21, 749568),
    'S12': (25, 20000, 1500, 11800, 256, 2, 749568),
    'S13': (25, 120000, 150000, 7000, 512, 0, 150000),
    'S14': (25, 90000, 150000, 9000, 1024, 6, 150000),
    'S15': (25, 40000, 150000, 11500, 2048, 22, 150000),
    'S16': (25, 7500, 150000, 30000, 512, 0, 150000),
    'S17': (25, 2700, 150000, 39000, 512, 21, 150000),
    'S18': (25, 20000, 150000, 11800, 256, 2, 150000),
}

PRESETS = {label: SyntheticAppSpec(*params, label=label) for label, params in _PRESET_PARAMETERS.items()}


def preset(label):
    """Returns the published parameter row of a synthetic application.

    Args:
        label (str): 'S1' .. 'S18'

    Returns:
        SyntheticAppSpec: preset parameters
    """
    try:
        return PRESETS[label]
    except KeyError:
        raise UnknownLabelError(f'unknown preset {label!r}, expected S1..S{len(PRESETS)}') from None


def is_dram_bound(spec, cache_size_bytes=DEFAULT_CACHE_SIZE_BYTES):
    """Whether the accesses of ``spec`` are attributed to DRAM.

    A stride of at least one cache line defeats spatial locality and a working set larger
    than the cache defeats temporal locality; only then is every access counted as a miss.
    """
    return spec.delta * ELEMENT_BYTES >= CACHE_LINE_BYTES and spec.working_set_bytes > cache_size_bytes


def expected_counters(spec, workers=1, cache_size_bytes=DEFAULT_CACHE_SIZE_BYTES):
    """Closed-form counts of a complete run; phase durations are left at zero.

    Args:
        spec (SyntheticAppSpec): workload parameters
        workers (int): number of workers
        cache_size_bytes (int): cache capacity of the DRAM attribution

    Returns:
        StressorCounters: counts summed over the workers
    """
    passes = spec.omega * spec.alpha * spec.touched_per_pass
    accesses = passes * ACCESSES_PER_ELEMENT
    exchanged = spec.omega * spec.beta * spec.lambda_bytes * (workers - 1)
    return StressorCounters(
        element_accesses=workers * accesses,
        dram_element_accesses=workers * accesses if is_dram_bound(spec, cache_size_bytes) else 0,
        sqrt_evaluations=workers * passes * spec.theta,
        bytes_sent=workers * exchanged,
        bytes_received=workers * exchanged,
        iterations_completed=workers * spec.omega,
    )


class _StopFlag:
    """Cancellation sampled once per main loop iteration, identically for every worker."""

    def __init__(self, workers, cancel):
        self.stop = False
        self._cancel = cancel
        self.barrier = threading.Barrier(workers, action=self._sample)

    def _sample(self):
        self.stop = self._cancel is not None and self._cancel.is_set()


def _work(rank, spec, transport, stop_flag, dram_bound):
    a = np.ones(spec.gamma)
    b = np.full(spec.gamma, 2.0)
    c = np.zeros(spec.gamma)
    strided = slice(0, spec.gamma, spec.delta)
    a_view, b_view, c_view = a[strided], b[strided], c[strided]
    roots_per_pass = spec.touched_per_pass * spec.theta
    payload = bytes(spec.lambda_bytes)
    peers = transport.workers - 1

    accesses = roots = sent = received = completed = 0
    compute_seconds = comm_seconds = 0.0
    t = SQRT_SEED
    for i in range(spec.omega):
        try:
            stop_flag.barrier.wait()
        except threading.BrokenBarrierError:
            break
        if stop_flag.stop:
            break

        start = time.perf_counter()
        for _ in range(spec.alpha):
            np.add(b_view, c_view, out=a_view)
            for _ in range(roots_per_pass):
                t = math.sqrt(t)
        accesses += spec.alpha * a_view.size * ACCESSES_PER_ELEMENT
        roots += spec.alpha * roots_per_pass
        middle = time.perf_counter()

        for z in range(spec.beta):
            incoming = transport.all_to_all(rank, payload, iteration=i * spec.beta + z)
            sent += len(payload) * peers
            received += sum(len(chunk) for chunk in incoming)
        compute_seconds += middle - start
        comm_seconds += time.perf_counter() - middle
        completed += 1

    return StressorCounters(
        element_accesses=accesses,
        dram_element_accesses=accesses if dram_bound else 0,
        sqrt_evaluations=roots,
        bytes_sent=sent,
        bytes_received=received,
        computation_phase_seconds=compute_seconds,
        communication_phase_seconds=comm_seconds,
        iterations_completed=completed,
    )


def run(spec, workers=1, transport=None, cache_size_bytes=DEFAULT_CACHE_SIZE_BYTES, cancel=None):
    """Runs the synthetic application with ``workers`` concurrent workers.

    Args:
        spec (SyntheticAppSpec): workload parameters
        workers (int): number of workers (processes of the application)
        transport (Transport, optional): all-to-all transport among the workers; an
            in-process transport is used when omitted. The caller opens and closes it.
        cache_size_bytes (int): cache capacity of the DRAM attribution
        cancel (threading.Event, optional): once set, every worker stops before its next
            main loop iteration

    Returns:
        StressorCounters: counters summed over the workers

    Raises:
        ConfigError: invalid worker count or transport size
        CommunicationError: an exchange failed; names the communication iteration
    """
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f'workers must be a positive integer, got {workers!r}')
    if transport is None:
        transport = InProcessTransport(workers)
    elif transport.workers != workers:
        raise ConfigError(f'transport connects {transport.workers} workers, run needs {workers}')

    dram_bound = is_dram_bound(spec, cache_size_bytes)
    stop_flag = _StopFlag(workers, cancel)
    logger.debug('running %s on %d workers (%d loop trips each)', spec.label or 'spec', workers, spec.loop_trips)

    failures = []
    failures_lock = threading.Lock()

    def guarded(rank):
        try:
            return _work(rank, spec, transport, stop_flag, dram_bound)
        except Exception as e:
            with failures_lock:
                failures.append(e)
            stop_flag.barrier.abort()
            transport.abort()
            raise

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix='stressor') as pool:
        futures = [pool.submit(guarded, rank) for rank in range(workers)]
    if failures:
        # peers of a failed worker fail with a derived error flagged as aborted
        causes = [f for f in failures if not getattr(f, 'aborted', False)]
        raise (causes or failures)[0]

    total = sum((f.result() for f in futures), StressorCounters())
    logger.debug('%s finished: %s', spec.label or 'spec', total)
    return total


def estimate_profile(counters, wall_seconds, measured=None):
    """Converts counters into a raw access profile.

    Args:
        counters (StressorCounters): counters of a run
        wall_seconds (float): wall-clock duration of the run
        measured (ResourceVector, optional): externally measured raw rates that replace the
            software estimate

    Returns:
        ResourceVector: raw rates, SLLC and DRAM in MR/s, network in MB/s
    """
    if not wall_seconds > 0:
        raise DomainError(f'wall_seconds must be positive, got {wall_seconds}')
    if measured is not None:
        if measured.unit is not Unit.RAW:
            raise UnitMismatchError('measured rates must be raw')
        return measured
    return ResourceVector(
        counters.element_accesses / wall_seconds / 1e6,
        counters.dram_element_accesses / wall_seconds / 1e6,
        counters.bytes_sent / wall_seconds / 1e6,
        unit=Unit.RAW,
    )

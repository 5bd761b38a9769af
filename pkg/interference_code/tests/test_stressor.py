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

import threading
import time
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from helpers.core import ResourceVector, Unit
from helpers.errors import CommunicationError, ConfigError, DomainError, UnitMismatchError, UnknownLabelError
from helpers.stressor import (PRESETS, StressorCounters, SyntheticAppSpec, estimate_profile, expected_counters,
                              is_dram_bound, preset, run)
from helpers.transports import InProcessTransport, LoopbackTransport

COUNT_FIELDS = ('element_accesses', 'dram_element_accesses', 'sqrt_evaluations', 'bytes_sent',
                'bytes_received', 'iterations_completed')


def counts(counters):
    return {name: getattr(counters, name) for name in COUNT_FIELDS}


def spec(omega=1, alpha=1, beta=0, gamma=10, delta=1, theta=0, lambda_bytes=0):
    return SyntheticAppSpec(omega, alpha, beta, gamma, delta, theta, lambda_bytes)


class RecordingTransport(InProcessTransport):
    """Records when every worker enters and leaves the data movement of each exchange."""

    def __init__(self, workers, fail_rank=None, fail_iteration=None, on_exchange=None):
        super().__init__(workers, timeout=30)
        self.events = []
        self.fail_rank = fail_rank
        self.fail_iteration = fail_iteration
        self.on_exchange = on_exchange

    def _exchange(self, rank, payload, iteration):
        self.events.append(('begin', iteration, rank))
        if rank == self.fail_rank and iteration == self.fail_iteration:
            raise OSError('link down')
        if self.on_exchange is not None:
            self.on_exchange(rank, iteration)
        received = super()._exchange(rank, payload, iteration)
        self.events.append(('done', iteration, rank))
        return received


def test_single_full_stride_pass():
    counters = run(spec(gamma=10, delta=1))
    assert (counters.element_accesses, counters.sqrt_evaluations, counters.bytes_sent) == (30, 0, 0)


def test_strided_passes_with_square_roots():
    counters = run(spec(omega=2, alpha=3, gamma=100, delta=7, theta=2))
    assert counters.element_accesses == 270
    assert counters.sqrt_evaluations == 180


def test_all_to_all_fan_out():
    counters = run(spec(alpha=0, beta=2, gamma=1, lambda_bytes=1000), workers=4)
    assert counters.bytes_sent == 24000
    assert counters.bytes_received == 24000


@st.composite
def workloads(draw):
    gamma = draw(st.integers(1, 500))
    return SyntheticAppSpec(
        omega=draw(st.integers(0, 4)), alpha=draw(st.integers(0, 10)), beta=draw(st.integers(0, 4)),
        gamma=gamma, delta=draw(st.integers(1, gamma)), theta=draw(st.integers(0, 4)),
        lambda_bytes=draw(st.integers(0, 4096)),
    )


@settings(max_examples=200, deadline=None)
@given(workloads(), st.integers(1, 4))
def test_counters_match_closed_form(workload, workers):
    counters = run(workload, workers=workers)
    assert counts(counters) == counts(expected_counters(workload, workers))
    assert counters.bytes_received == counters.bytes_sent


def test_doubling_omega_doubles_every_counter():
    base = spec(omega=2, alpha=3, beta=2, gamma=50, delta=3, theta=1, lambda_bytes=64)
    single = counts(run(base, workers=3))
    double = counts(run(replace(base, omega=4), workers=3))
    assert double == {name: 2 * value for name, value in single.items()}


def test_disabled_phases_count_nothing():
    assert run(spec(theta=0, alpha=5)).sqrt_evaluations == 0
    assert run(spec(beta=0, lambda_bytes=100), workers=2).bytes_sent == 0
    assert run(spec(beta=3, lambda_bytes=0), workers=2).bytes_sent == 0


def test_exchanges_synchronize_workers():
    transport = RecordingTransport(3)
    run(spec(omega=3, alpha=1, beta=2, lambda_bytes=8), workers=3, transport=transport)
    events = transport.events
    last_iteration = max(iteration for _, iteration, _ in events)
    for z in range(last_iteration):
        last_done = max(i for i, (kind, it, _) in enumerate(events) if kind == 'done' and it == z)
        first_next = min(i for i, (kind, it, _) in enumerate(events) if kind == 'begin' and it == z + 1)
        assert last_done < first_next


def test_transport_failure_names_the_iteration():
    transport = RecordingTransport(3, fail_rank=1, fail_iteration=2)
    with pytest.raises(CommunicationError) as excinfo:
        run(spec(omega=3, beta=2, lambda_bytes=8), workers=3, transport=transport)
    assert excinfo.value.iteration == 2
    assert 'link down' in str(excinfo.value)


class FailingLoopbackTransport(LoopbackTransport):
    def _exchange(self, rank, payload, iteration):
        if rank == 1 and iteration == 2:
            raise OSError('link down')
        return super()._exchange(rank, payload, iteration)


def test_loopback_failure_wakes_the_peers_and_keeps_its_cause():
    with FailingLoopbackTransport(3, timeout=60) as transport:
        start = time.perf_counter()
        with pytest.raises(CommunicationError) as excinfo:
            run(spec(omega=3, beta=2, lambda_bytes=8), workers=3, transport=transport)
        elapsed = time.perf_counter() - start
    assert excinfo.value.iteration == 2
    assert not excinfo.value.aborted
    assert 'link down' in str(excinfo.value)
    assert elapsed < 30


def test_cancel_stops_every_worker_at_the_same_iteration():
    cancel = threading.Event()
    transport = RecordingTransport(3, on_exchange=lambda rank, iteration: cancel.set())
    counters = run(spec(omega=5, beta=1, lambda_bytes=8), workers=3, transport=transport, cancel=cancel)
    assert counters.iterations_completed == 3
    assert counters.bytes_sent == counters.bytes_received == 3 * 8 * 2


def test_cancel_before_start_runs_nothing():
    cancel = threading.Event()
    cancel.set()
    assert counts(run(spec(omega=5), workers=2, cancel=cancel)) == counts(StressorCounters())


def test_loopback_run_conserves_bytes():
    with LoopbackTransport(3, timeout=30) as transport:
        counters = run(spec(omega=2, alpha=1, beta=2, lambda_bytes=200000), workers=3, transport=transport)
    assert counters.bytes_sent == counters.bytes_received == 3 * 2 * 2 * 200000 * 2


def test_transport_size_must_match():
    with pytest.raises(ConfigError):
        run(spec(), workers=2, transport=InProcessTransport(3))
    with pytest.raises(ConfigError):
        run(spec(), workers=0)


@pytest.mark.parametrize('params', [
    dict(gamma=0, delta=1),
    dict(gamma=10, delta=11),
    dict(omega=-1),
    dict(theta=-2),
    dict(lambda_bytes=1.5),
    dict(alpha=True),
])
def test_invalid_specs(params):
    with pytest.raises(ConfigError):
        spec(**params)


def test_presets():
    assert len(PRESETS) == 18
    assert preset('S1') == SyntheticAppSpec(25, 120000, 5200, 7000, 512, 0, 22600, label='S1')
    assert preset('S4') == SyntheticAppSpec(25, 7500, 5200, 30000, 512, 0, 22600, label='S4')
    assert preset('S9') == SyntheticAppSpec(25, 40000, 1500, 11500, 2048, 22, 749568, label='S9')
    assert preset('S13').beta == 150000
    with pytest.raises(UnknownLabelError):
        preset('S99')


def test_spec_properties():
    workload = spec(omega=2, alpha=3, beta=4, gamma=100, delta=7, theta=2)
    assert workload.touched_per_pass == 15
    assert workload.working_set_bytes == 2400
    assert workload.loop_trips == 2 * (3 * 15 * 3 + 4)
    assert SyntheticAppSpec.from_dict(workload.to_dict()) == workload
    with pytest.raises(ConfigError):
        SyntheticAppSpec.from_dict({**workload.to_dict(), 'zeta': 1})


def test_dram_attribution():
    assert not any(is_dram_bound(p) for p in PRESETS.values())
    streaming = spec(gamma=1_000_000, delta=8)
    assert is_dram_bound(streaming)
    assert not is_dram_bound(replace(streaming, delta=4))
    assert not is_dram_bound(streaming, cache_size_bytes=10 ** 8)
    expected = expected_counters(streaming)
    assert expected.dram_element_accesses == expected.element_accesses


def test_estimate_profile():
    rates = estimate_profile(StressorCounters(element_accesses=3 * 10 ** 9, bytes_sent=600 * 10 ** 6), 2.0)
    assert rates.unit is Unit.RAW
    assert (rates.sllc, rates.dram, rates.net) == pytest.approx((1500, 0, 300))
    assert estimate_profile(StressorCounters(), 1.0).as_array().tolist() == [0, 0, 0]


def test_estimate_profile_errors_and_override():
    with pytest.raises(DomainError):
        estimate_profile(StressorCounters(), 0.0)
    measured = ResourceVector(1, 2, 3)
    assert estimate_profile(StressorCounters(element_accesses=10), 1.0, measured=measured) is measured
    with pytest.raises(UnitMismatchError):
        estimate_profile(StressorCounters(), 1.0, measured=ResourceVector(0.1, 0, 0, Unit.SCORE))


def test_counters_add():
    total = StressorCounters(element_accesses=3, bytes_sent=2) + StressorCounters(element_accesses=4, sqrt_evaluations=1)
    assert (total.element_accesses, total.bytes_sent, total.sqrt_evaluations) == (7, 2, 1)

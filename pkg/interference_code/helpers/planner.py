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
"""Interference-aware grouping of applications onto hosts.

A heuristic demonstrator, not an optimal placement solver: small instances are solved by
enumerating every assignment, larger ones by greedily taking the least interfering group.
"""
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Tuple

from helpers.core import CoLocation
from helpers.errors import ConfigError, EmptyPlanError
from helpers.model import is_extrapolation, predict_colocation

logger = logging.getLogger(__name__)

EXHAUSTIVE = 'exhaustive'
GREEDY = 'greedy'
AUTO = 'auto'

# assignments enumerated before falling back to the greedy grouping
EXHAUSTIVE_LIMIT = 10000


@dataclass(frozen=True)
class GroupCandidate:
    """One possible host: the grouped applications and their predicted interference."""
    labels: Tuple[str, ...]
    indices: Tuple[int, ...]
    predicted: float
    extrapolated: bool = False

    @property
    def name(self):
        return 'x'.join(self.labels)

    @property
    def sort_key(self):
        return self.predicted, self.labels


@dataclass(frozen=True)
class PlanRecommendation:
    """Ranked candidate groups and the chosen assignment.

    Attributes:
        candidates (tuple[GroupCandidate]): every evaluated group, ascending by prediction,
            ties broken by labels
        assignment (tuple[GroupCandidate]): chosen groups, one per host
        total (float): summed predicted interference of the assignment
        strategy (str): 'exhaustive' or 'greedy'
        assignments_evaluated (int): complete assignments compared
    """
    candidates: Tuple[GroupCandidate, ...]
    assignment: Tuple[GroupCandidate, ...]
    total: float
    strategy: str
    assignments_evaluated: int

    def to_dict(self):
        def group(c):
            return {'labels': list(c.labels), 'predicted': c.predicted, 'extrapolated': c.extrapolated}
        return {
            'strategy': self.strategy,
            'total': self.total,
            'assignments_evaluated': self.assignments_evaluated,
            'candidates': [group(c) for c in self.candidates],
            'assignment': [group(c) for c in self.assignment],
        }


def count_assignments(n, slots):
    """Ways to split ``n`` distinguishable applications into unordered hosts of ``slots``."""
    hosts = n // slots
    return math.factorial(n) // (math.factorial(slots) ** hosts * math.factorial(hosts))


def _partitions(indices, slots):
    if not indices:
        yield ()
        return
    head, rest = indices[0], indices[1:]
    for companions in combinations(rest, slots - 1):
        group = (head,) + companions
        remaining = tuple(i for i in rest if i not in companions)
        for tail in _partitions(remaining, slots):
            yield (group,) + tail


def recommend(profiles, slots_per_host, model, strategy=AUTO, exhaustive_limit=EXHAUSTIVE_LIMIT):
    """Groups applications onto hosts of ``slots_per_host`` so predicted interference stays low.

    Args:
        profiles (Sequence[ApplicationProfile]): score profiles, labels may repeat
        slots_per_host (int): applications per host
        model (InterferenceModel): model predicting each group's interference
        strategy (str): 'auto', 'exhaustive' or 'greedy'; 'auto' enumerates when there are at
            most ``exhaustive_limit`` assignments
        exhaustive_limit (int): enumeration threshold of 'auto'

    Returns:
        PlanRecommendation: ranked candidates and the assignment of minimum total among
        the evaluated ones
    """
    profiles = list(profiles)
    n = len(profiles)
    if n == 0:
        raise EmptyPlanError('no profiles to place')
    if slots_per_host < 2 or slots_per_host > n:
        raise ConfigError(f'slots per host must lie in [2, {n}], got {slots_per_host}')
    if n % slots_per_host:
        raise ConfigError(f'{n} applications do not fill hosts of {slots_per_host} slots')
    if strategy not in (AUTO, EXHAUSTIVE, GREEDY):
        raise ConfigError(f'unknown planning strategy {strategy!r}')

    cache = {}

    def candidate(indices):
        if indices not in cache:
            members = sorted((profiles[i] for i in indices), key=lambda p: p.label)
            predicted = predict_colocation(model, CoLocation(tuple(members)))
            cache[indices] = GroupCandidate(tuple(p.label for p in members), indices, predicted,
                                            is_extrapolation(predicted))
        return cache[indices]

    if strategy == AUTO:
        strategy = EXHAUSTIVE if count_assignments(n, slots_per_host) <= exhaustive_limit else GREEDY

    if strategy == EXHAUSTIVE:
        best, best_key, evaluated = None, None, 0
        for partition in _partitions(tuple(range(n)), slots_per_host):
            groups = [candidate(g) for g in partition]
            key = (math.fsum(g.predicted for g in groups), sorted(g.labels for g in groups))
            evaluated += 1
            if best_key is None or key < best_key:
                best, best_key = groups, key
    else:
        best, unassigned = [], tuple(range(n))
        while unassigned:
            chosen = min((candidate(g) for g in combinations(unassigned, slots_per_host)),
                         key=lambda c: c.sort_key)
            best.append(chosen)
            unassigned = tuple(i for i in unassigned if i not in chosen.indices)
        evaluated = 1

    assignment = tuple(sorted(best, key=lambda c: c.sort_key))
    total = math.fsum(c.predicted for c in assignment)
    logger.debug('%s planning compared %d assignments of %d groups', strategy, evaluated, len(cache))
    return PlanRecommendation(
        candidates=tuple(sorted(cache.values(), key=lambda c: c.sort_key)),
        assignment=assignment,
        total=total,
        strategy=strategy,
        assignments_evaluated=evaluated,
    )

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
"""Definitional math of cross-application interference.

Access rates of an application are aggregated over its virtual machines, normalized
into scores against a calibration machine, and accumulated over the applications
sharing one host. Slowdown, interference level and the similarity factors between
co-located applications are defined here as well.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from helpers.errors import (CalibrationError, DomainError, MalformedProfileError,
                            UnitMismatchError)

logger = logging.getLogger(__name__)

# Slack for floating-point sums of per-VM scores.
SCORE_TOLERANCE = 1e-9


class ResourceKind(str, Enum):
    """Shared resources whose contention is modeled."""
    SLLC = 'sllc'
    DRAM = 'dram'
    NET = 'net'


RESOURCES = (ResourceKind.SLLC, ResourceKind.DRAM, ResourceKind.NET)


class Unit(str, Enum):
    """Raw rates (MR/s, MR/s, MB/s) or dimensionless scores."""
    RAW = 'raw'
    SCORE = 'score'


@dataclass(frozen=True)
class ResourceVector:
    """Per-resource access rates of a VM or an application.

    Attributes:
        sllc (float): SLLC references (MR/s) or score
        dram (float): DRAM references (MR/s) or score
        net (float): virtual network traffic (MB/s) or score
        unit (Unit): whether the components are raw rates or scores
    """
    sllc: float = 0.0
    dram: float = 0.0
    net: float = 0.0
    unit: Unit = Unit.RAW

    def __post_init__(self):
        object.__setattr__(self, 'unit', Unit(self.unit))
        for resource in RESOURCES:
            value = float(getattr(self, resource.value))
            if not math.isfinite(value) or value < 0:
                raise DomainError(f'{resource.value} access must be finite and >= 0, got {value}')
            if self.unit is Unit.SCORE and value > 1.0 + SCORE_TOLERANCE:
                raise DomainError(f'{resource.value} score must lie in [0, 1], got {value}')
            object.__setattr__(self, resource.value, value)

    def __getitem__(self, resource):
        return getattr(self, ResourceKind(resource).value)

    def __add__(self, other):
        if not isinstance(other, ResourceVector):
            return NotImplemented
        if other.unit is not self.unit:
            raise UnitMismatchError(f'cannot add {self.unit.value} and {other.unit.value} vectors')
        return ResourceVector(self.sllc + other.sllc, self.dram + other.dram, self.net + other.net,
                              self.unit)

    def as_array(self):
        """Returns:
            np.ndarray: the components in (sllc, dram, net) order
        """
        return np.array([self.sllc, self.dram, self.net], dtype=float)

    @classmethod
    def from_array(cls, values, unit=Unit.RAW):
        sllc, dram, net = (float(x) for x in values)
        return cls(sllc, dram, net, unit)

    @classmethod
    def from_mapping(cls, mapping, unit=Unit.RAW):
        """Builds a vector from a ``{sllc, dram, net}`` mapping; missing keys are zero."""
        return cls(float(mapping.get('sllc', 0.0)), float(mapping.get('dram', 0.0)),
                   float(mapping.get('net', 0.0)), unit)

    def to_mapping(self):
        return {'sllc': self.sllc, 'dram': self.dram, 'net': self.net}


@dataclass(frozen=True)
class CalibrationMaxima:
    """Highest access rates achievable on the calibration machine; they map to score 1.0."""
    max_sllc: float
    max_dram: float
    max_net: float

    def __post_init__(self):
        for name in ('max_sllc', 'max_dram', 'max_net'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise CalibrationError(f'{name} must be strictly positive, got {value}')
            object.__setattr__(self, name, value)

    def __getitem__(self, resource):
        return getattr(self, f'max_{ResourceKind(resource).value}')


@dataclass(frozen=True)
class ApplicationProfile:
    """Access profile of one application.

    Attributes:
        label (str): application identifier
        vm_accesses (tuple[ResourceVector]): access of each virtual machine
        vm_count (int): number of virtual machines, defaults to ``len(vm_accesses)``
        isolated_runtime (float, optional): runtime in a dedicated machine (s)
    """
    label: str
    vm_accesses: Tuple[ResourceVector, ...]
    vm_count: Optional[int] = None
    isolated_runtime: Optional[float] = None

    def __post_init__(self):
        accesses = tuple(self.vm_accesses)
        object.__setattr__(self, 'vm_accesses', accesses)
        if not accesses:
            raise MalformedProfileError(f'profile {self.label!r} has no VM accesses')
        if self.vm_count is None:
            object.__setattr__(self, 'vm_count', len(accesses))
        if self.vm_count != len(accesses):
            raise MalformedProfileError(
                f'profile {self.label!r} declares {self.vm_count} VMs '
                f'but lists {len(accesses)} VM accesses')
        if len({v.unit for v in accesses}) != 1:
            raise UnitMismatchError(f'profile {self.label!r} mixes raw and score VM accesses')
        if self.isolated_runtime is not None and not self.isolated_runtime > 0:
            raise MalformedProfileError(
                f'profile {self.label!r} has nonpositive isolated runtime {self.isolated_runtime}')

    @property
    def unit(self):
        return self.vm_accesses[0].unit

    @property
    def access(self):
        """ResourceVector: aggregated access of the application (see `application_access`)."""
        return application_access(self)

    @classmethod
    def from_scores(cls, label, sllc, dram, net, vm_count=1, isolated_runtime=None):
        """Builds a score profile from published per-application scores.

        Only the aggregate is known, so the first VM carries it and the others are zero;
        the aggregation then reproduces the published scores exactly.
        """
        aggregate = ResourceVector(sllc, dram, net, Unit.SCORE)
        zeros = (ResourceVector(unit=Unit.SCORE),) * (vm_count - 1)
        return cls(label, (aggregate,) + zeros, vm_count, isolated_runtime)

    def with_runtime(self, isolated_runtime):
        return ApplicationProfile(self.label, self.vm_accesses, self.vm_count, isolated_runtime)


@dataclass(frozen=True)
class CoLocation:
    """Applications sharing one physical host.

    Attributes:
        profiles (tuple[ApplicationProfile]): the co-located applications, at least two
    """
    profiles: Tuple[ApplicationProfile, ...]

    def __post_init__(self):
        profiles = tuple(self.profiles)
        object.__setattr__(self, 'profiles', profiles)
        if len(profiles) < 2:
            raise DomainError(f'a co-location needs at least 2 applications, got {len(profiles)}')
        if len({p.unit for p in profiles}) != 1:
            raise UnitMismatchError('co-located profiles mix raw and score units')

    @property
    def unit(self):
        return self.profiles[0].unit

    @property
    def labels(self):
        return tuple(p.label for p in self.profiles)

    @property
    def name(self):
        """str: member labels joined the way co-locations are written, e.g. ``S1xS3``."""
        return 'x'.join(self.labels)

    def sorted(self):
        """Returns:
            CoLocation: the same co-location with members ordered by label
        """
        return CoLocation(tuple(sorted(self.profiles, key=lambda p: p.label)))


@dataclass(frozen=True)
class SlowdownObservation:
    """Isolated and concurrent runtime of one application."""
    label: str
    isolated_runtime: float
    concurrent_runtime: float

    def __post_init__(self):
        for name in ('isolated_runtime', 'concurrent_runtime'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f'{self.label}: {name} must be strictly positive, got {value}')


def application_access(profile):
    """Sums the access of all virtual machines of an application.

    Args:
        profile (ApplicationProfile): the application

    Returns:
        ResourceVector: component-wise sum of the VM accesses, in the profile's unit
    """
    if not profile.vm_accesses:
        raise MalformedProfileError(f'profile {profile.label!r} has no VM accesses')
    totals = [math.fsum(v[resource] for v in profile.vm_accesses) for resource in RESOURCES]
    if profile.unit is Unit.SCORE:
        totals = [min(x, 1.0) for x in totals]
    return ResourceVector.from_array(totals, profile.unit)


def round_half_up(value, decimals):
    """Rounds ``value`` half away from zero on its shortest decimal representation.

    Args:
        value (float): value to round
        decimals (int, optional): decimal places; None leaves the value untouched

    Returns:
        float: the rounded value
    """
    if decimals is None:
        return value
    quantum = Decimal(1).scaleb(-int(decimals))
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def normalize(raw, maxima, decimals=None):
    """Converts raw access rates into scores between 0.0 and 1.0.

    Args:
        raw (ResourceVector): raw access rates
        maxima (CalibrationMaxima): highest rates of the calibration machine
        decimals (int, optional): decimal places of the scores (1, 2) or None for no rounding

    Returns:
        ResourceVector: score vector
    """
    if raw.unit is not Unit.RAW:
        raise UnitMismatchError('normalize expects raw access rates')
    if decimals is not None and int(decimals) < 0:
        raise DomainError(f'decimals must be >= 0, got {decimals}')
    scores = []
    for resource in RESOURCES:
        maximum = maxima[resource]
        if not maximum > 0:
            raise CalibrationError(f'calibration maximum of {resource.value} is zero')
        score = min(max(raw[resource] / maximum, 0.0), 1.0)
        scores.append(round_half_up(score, decimals))
    return ResourceVector.from_array(scores, Unit.SCORE)


def normalize_profile(profile, maxima, decimals=None):
    """Scores a whole application from its aggregated access.

    Args:
        profile (ApplicationProfile): raw profile
        maxima (CalibrationMaxima): calibration maxima
        decimals (int, optional): rounding of the scores

    Returns:
        ApplicationProfile: score profile whose aggregate equals the normalized access
    """
    if profile.unit is Unit.SCORE:
        return profile
    scores = normalize(application_access(profile), maxima, decimals)
    return ApplicationProfile.from_scores(profile.label, scores.sllc, scores.dram, scores.net,
                                          profile.vm_count, profile.isolated_runtime)


def calibrate_maxima(profiles, allow_unused=False):
    """Takes the highest aggregated rate per resource over a calibration set.

    Args:
        profiles (Iterable[ApplicationProfile]): raw profiles of the calibration workload
        allow_unused (bool): a resource no profile accesses gets maximum 1.0 instead of
            failing; every profile then scores 0 on it

    Returns:
        CalibrationMaxima: maxima mapping to score 1.0
    """
    accesses = [application_access(p) for p in profiles]
    if not accesses:
        raise CalibrationError('calibration needs at least one profile')
    if any(a.unit is not Unit.RAW for a in accesses):
        raise UnitMismatchError('calibration expects raw profiles')
    highest = np.max([a.as_array() for a in accesses], axis=0)
    if allow_unused:
        for resource, value in zip(RESOURCES, highest):
            if value == 0:
                logger.warning('no calibration profile accesses %s, its maximum is set to 1.0', resource.value)
        highest = np.where(highest > 0, highest, 1.0)
    return CalibrationMaxima(*highest)


def access_level(score):
    """Classifies a score into the workload design levels.

    High is the maximum rate, medium about 50% of it and low about 10%.

    Args:
        score (float): per-application score

    Returns:
        str: 'high', 'medium', 'low' or 'none'
    """
    if score >= 0.75:
        return 'high'
    if score >= 0.3:
        return 'medium'
    if score > 0:
        return 'low'
    return 'none'


def _require_scores(*profiles):
    for profile in profiles:
        if profile.unit is not Unit.SCORE:
            raise UnitMismatchError(f'profile {profile.label!r} is not normalized into scores')


def accumulated_access(coloc, resource):
    """Sums the scores of all co-located applications for one resource.

    Args:
        coloc (CoLocation): the co-location
        resource (ResourceKind): shared resource

    Returns:
        float: accumulated score, possibly above 1.0
    """
    _require_scores(*coloc.profiles)
    return math.fsum(application_access(p)[resource] for p in coloc.profiles)


def slowdown(obs):
    """Fractional runtime increase under co-location; negative when the concurrent run was faster.

    Args:
        obs (SlowdownObservation): isolated and concurrent runtimes

    Returns:
        float: C / T - 1
    """
    if not (obs.isolated_runtime > 0 and obs.concurrent_runtime > 0):
        raise DomainError(f'{obs.label}: runtimes must be strictly positive')
    return obs.concurrent_runtime / obs.isolated_runtime - 1.0


def interference_level(observations):
    """Mean slowdown of the co-located applications.

    Args:
        observations (Sequence[SlowdownObservation]): one observation per application

    Returns:
        float: interference level
    """
    observations = list(observations)
    if not observations:
        raise DomainError('interference level needs at least one observation')
    return math.fsum(slowdown(o) for o in observations) / len(observations)


def similarity_factor(a, b, resource):
    """One minus the absolute score difference of two applications for one resource.

    Args:
        a (ApplicationProfile): first application
        b (ApplicationProfile): second application
        resource (ResourceKind): shared resource

    Returns:
        float: similarity factor
    """
    _require_scores(a, b)
    return 1.0 - abs(application_access(a)[resource] - application_access(b)[resource])


def global_similarity(coloc, resource):
    """Average similarity factor over every unordered pair of co-located applications.

    Args:
        coloc (CoLocation): the co-location
        resource (ResourceKind): shared resource

    Returns:
        float: global similarity factor of the resource
    """
    if len(coloc.profiles) < 2:
        raise DomainError('global similarity needs at least 2 applications')
    factors = [similarity_factor(a, b, resource)
               for a, b in itertools.combinations(coloc.profiles, 2)]
    return math.fsum(factors) / len(factors)

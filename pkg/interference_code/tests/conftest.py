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

import pytest

from helpers.core import ApplicationProfile
from helpers.dataset import PAIRWISE_ALL, CoExecutionPlan, ContentionOracle, OracleRunner, build_dataset
from helpers.reference_data import evaluation_score_profiles, synthetic_score_profiles


def score_profile(label, sllc, dram, net, vm_count=1, isolated_runtime=None):
    return ApplicationProfile.from_scores(label, sllc, dram, net, vm_count, isolated_runtime)


def oracle_dataset(sigma=0.0, seed=0, hidden=None, members=None):
    """171-row dataset over the synthetic score profiles, labelled by a contention oracle."""
    members = members if members is not None else list(synthetic_score_profiles().values())
    oracle = ContentionOracle(*(hidden or ()), sigma=sigma, seed=seed)
    plan = CoExecutionPlan(tuple(members), PAIRWISE_ALL)
    return build_dataset(plan, OracleRunner(oracle), calibration_id='testbed', progress=False)


@pytest.fixture
def synthetic_scores():
    return synthetic_score_profiles()


@pytest.fixture
def evaluation_scores():
    return evaluation_score_profiles()

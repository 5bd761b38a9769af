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
"""Published profiles and interference measurements used as fixtures and demo inputs.

Synthetic applications were run with six VMs on the reference testbed; evaluation
applications list their process count in the label (``P6`` / ``P4``).
"""
from itertools import combinations_with_replacement

from helpers.core import ApplicationProfile, ResourceVector, Unit

SYNTHETIC_VM_COUNT = 6

# label: (sllc MR/s, dram MR/s, net MB/s) measured in a dedicated machine
SYNTHETIC_RAW = {
    'S1': (1635, 4, 300),
    'S2': (851, 61, 324),
    'S3': (239, 41, 312),
    'S4': (444, 444, 318),
    'S5': (224, 224, 324),
    'S6': (797, 240, 318),
    'S7': (1597, 18, 2892),
    'S8': (890, 43, 2810),
    'S9': (220, 49, 2910),
    'S10': (438, 438, 2832),
    'S11': (214, 214, 2892),
    'S12': (817, 241, 2838),
    'S13': (1575, 22, 1392),
    'S14': (890, 52, 1362),
    'S15': (228, 49, 1335),
    'S16': (438, 438, 1375),
    'S17': (221, 221, 1404),
    'S18': (824, 239, 1380),
}

# label: (sllc, dram, net) scores rounded to one decimal place
SYNTHETIC_SCORES = {
    'S1': (1.0, 0.0, 0.1),
    'S2': (0.5, 0.1, 0.1),
    'S3': (0.1, 0.1, 0.1),
    'S4': (0.3, 1.0, 0.1),
    'S5': (0.1, 0.5, 0.1),
    'S6': (0.5, 0.5, 0.1),
    'S7': (1.0, 0.0, 1.0),
    'S8': (0.5, 0.1, 1.0),
    'S9': (0.1, 0.1, 1.0),
    'S10': (0.3, 1.0, 1.0),
    'S11': (0.1, 0.5, 1.0),
    'S12': (0.5, 0.5, 1.0),
    'S13': (1.0, 0.0, 0.5),
    'S14': (0.5, 0.1, 0.5),
    'S15': (0.1, 0.1, 0.5),
    'S16': (0.3, 1.0, 0.5),
    'S17': (0.1, 0.5, 0.5),
    'S18': (0.5, 0.5, 0.5),
}

# co-location: (accumulated sllc, dram, net, observed interference)
# The SLLC and DRAM sums printed for S15xS7 and S14xS8 belong to each other; NET
# matches the member scores in every row.
PAIR_ACCUMULATED = {
    ('S1', 'S3'): (1.1, 0.1, 0.2, 0.3410),
    ('S2', 'S2'): (1.0, 0.2, 0.2, 0.7112),
    ('S13', 'S3'): (1.1, 0.1, 0.6, 0.3151),
    ('S14', 'S2'): (1.0, 0.2, 0.6, 0.7183),
    ('S15', 'S7'): (1.0, 0.2, 1.5, 0.4167),
    ('S14', 'S8'): (1.1, 0.1, 1.5, 0.8797),
}

PAIR_ACCUMULATED_SWAPPED = {('S15', 'S7'), ('S14', 'S8')}

# label: (sllc, dram, net) scores rounded to two decimal places
EVALUATION_SCORES = {
    'MUFITS.I1.P6': (0.05, 0.13, 0.00),
    'MUFITS.I2.P6': (0.03, 0.00, 0.01),
    'MUFITS.I1.P4': (0.05, 0.08, 0.00),
    'HPL.I1.P6': (0.03, 0.06, 0.02),
    'HPL.I2.P6': (0.03, 0.06, 0.02),
    'HPL.I1.P4': (0.02, 0.04, 0.01),
    'DGEMM.I1.P6': (0.02, 0.02, 0.00),
    'DGEMM.I2.P6': (0.01, 0.02, 0.00),
    'DGEMM.I1.P4': (0.01, 0.02, 0.00),
    'PTRANS.I1.P6': (0.18, 0.21, 0.32),
    'PTRANS.I2.P6': (0.02, 0.04, 0.02),
    'PTRANS.I1.P4': (0.14, 0.09, 0.19),
    'FFT.I1.P4': (0.07, 0.17, 0.49),
    'FFT.I2.P4': (0.07, 0.16, 0.52),
}

# co-located labels: (observed, published prediction)
EVALUATION_OBSERVED = {
    ('PTRANS.I1.P6',) * 2: (0.4450, 0.3997),
    ('PTRANS.I2.P6',) * 2: (0.0531, 0.1211),
    ('DGEMM.I1.P6',) * 2: (0.0779, 0.0250),
    ('FFT.I1.P4',) * 3: (0.4931, 0.4045),
    ('MUFITS.I1.P4',) * 3: (0.2285, 0.1165),
}

# The published PTRANS.I2.P6 prediction cannot be reproduced from its rounded scores.
EVALUATION_UNREPRODUCIBLE = {('PTRANS.I2.P6',) * 2}

# scheme: (applications per host, instances co-located with each other and themselves)
EVALUATION_SCHEMES = {
    'A': (2, ('MUFITS.I1.P6', 'MUFITS.I2.P6', 'HPL.I1.P6', 'HPL.I2.P6', 'DGEMM.I1.P6', 'DGEMM.I2.P6',
              'PTRANS.I1.P6', 'PTRANS.I2.P6', 'FFT.I1.P4', 'FFT.I2.P4')),
    'B': (3, ('MUFITS.I1.P4', 'HPL.I1.P4', 'DGEMM.I1.P4', 'PTRANS.I1.P4', 'FFT.I1.P4')),
}


def _vm_count(label):
    return int(label.rsplit('.P', 1)[1]) if '.P' in label else SYNTHETIC_VM_COUNT


def synthetic_raw_profiles():
    """Returns:
        dict[str, ApplicationProfile]: raw synthetic profiles, access split evenly over six VMs
    """
    profiles = {}
    for label, rates in SYNTHETIC_RAW.items():
        per_vm = ResourceVector(*(r / SYNTHETIC_VM_COUNT for r in rates), unit=Unit.RAW)
        profiles[label] = ApplicationProfile(label, (per_vm,) * SYNTHETIC_VM_COUNT)
    return profiles


def synthetic_score_profiles():
    """Returns:
        dict[str, ApplicationProfile]: synthetic profiles with their published scores
    """
    return {label: ApplicationProfile.from_scores(label, *scores, vm_count=SYNTHETIC_VM_COUNT)
            for label, scores in SYNTHETIC_SCORES.items()}


def evaluation_score_profiles():
    """Returns:
        dict[str, ApplicationProfile]: evaluation applications with their published scores
    """
    return {label: ApplicationProfile.from_scores(label, *scores, vm_count=_vm_count(label))
            for label, scores in EVALUATION_SCORES.items()}


def evaluation_schemes():
    """Co-locations of the evaluation campaign.

    Scheme A pairs the six-process instances of both problem sizes (FFT runs on four
    processes), scheme B groups the four-process first instances three by three. Every
    application is also co-located with copies of itself.

    Returns:
        dict[str, list[tuple[str]]]: label-sorted groups of each scheme, in lexicographic order
    """
    return {scheme: list(combinations_with_replacement(sorted(labels), size))
            for scheme, (size, labels) in EVALUATION_SCHEMES.items()}

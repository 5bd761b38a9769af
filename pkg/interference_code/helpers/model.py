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
"""Three-term interference prediction model.

The model weighs accumulated access to each shared resource by how evenly the
co-located applications compete for it:

    I = c1 * T1 + c2 * T2 + c3 * T3
    T1 = T_sllc * G_sllc
    T2 = T_net * G_net
    T3 = T_dram * T_sllc * G_sllc

There is no intercept and no quadratic term.
"""
import math

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from helpers.core import ResourceKind, accumulated_access, global_similarity
from helpers.errors import DomainError

PAPER_DEFAULT = 'paper-default'
FITTED = 'fitted'

PAPER_COEFFICIENTS = (0.7498, 0.1598, 0.1456)

# Highest interference level observed in the data behind the published coefficients.
ENVELOPE_MAX = 1.89


@dataclass(frozen=True)
class FeatureRow:
    """Model terms of one co-location, with the accumulated scores and similarities they come from.

    Attributes:
        t1 (float): T_sllc * G_sllc
        t2 (float): T_net * G_net
        t3 (float): T_dram * T_sllc * G_sllc
        labels (tuple[str]): member labels of the co-location
        accumulated (tuple[float], optional): (T_sllc, T_dram, T_net)
        similarity (tuple[float], optional): (G_sllc, G_dram, G_net)
    """
    t1: float
    t2: float
    t3: float
    labels: Tuple[str, ...] = ()
    accumulated: Optional[Tuple[float, float, float]] = None
    similarity: Optional[Tuple[float, float, float]] = None

    def as_array(self):
        return np.array([self.t1, self.t2, self.t3], dtype=float)

    @property
    def name(self):
        return 'x'.join(self.labels)


@dataclass(frozen=True)
class InterferenceModel:
    """Coefficients of the three-term model.

    Attributes:
        c1 (float): weight of T1
        c2 (float): weight of T2
        c3 (float): weight of T3
        provenance (str): 'paper-default' or 'fitted'
        diagnostics (FitDiagnostics, optional): fit diagnostics of a fitted model
    """
    c1: float
    c2: float
    c3: float
    provenance: str = FITTED
    diagnostics: Optional[object] = None

    def __post_init__(self):
        for name in ('c1', 'c2', 'c3'):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f'coefficient {name} is not finite')
        if self.provenance not in (PAPER_DEFAULT, FITTED):
            raise DomainError(f'unknown model provenance {self.provenance!r}')

    @classmethod
    def paper_default(cls):
        return cls(*PAPER_COEFFICIENTS, provenance=PAPER_DEFAULT)

    @property
    def coefficients(self):
        return np.array([self.c1, self.c2, self.c3], dtype=float)

    def to_dict(self):
        data = {'c1': self.c1, 'c2': self.c2, 'c3': self.c3, 'provenance': self.provenance}
        if self.diagnostics is not None:
            data['diagnostics'] = self.diagnostics.to_dict()
        return data


def features(coloc):
    """Computes the model terms of a co-location.

    Args:
        coloc (CoLocation): co-location of score profiles

    Returns:
        FeatureRow: terms T1, T2, T3 with the accumulated scores and global similarities
    """
    t_sllc, t_dram, t_net = (accumulated_access(coloc, r) for r in ResourceKind)
    g_sllc, g_dram, g_net = (global_similarity(coloc, r) for r in ResourceKind)
    return FeatureRow(
        t1=t_sllc * g_sllc,
        t2=t_net * g_net,
        t3=t_dram * t_sllc * g_sllc,
        labels=coloc.labels,
        accumulated=(t_sllc, t_dram, t_net),
        similarity=(g_sllc, g_dram, g_net),
    )


def features_from_scores(accumulated, similarity, labels=()):
    """Rebuilds the model terms from stored accumulated scores and similarities.

    Args:
        accumulated (tuple[float]): (T_sllc, T_dram, T_net)
        similarity (tuple[float]): (G_sllc, G_dram, G_net)
        labels (tuple[str]): co-location labels

    Returns:
        FeatureRow: the terms
    """
    t_sllc, t_dram, t_net = accumulated
    g_sllc, _, g_net = similarity
    return FeatureRow(t_sllc * g_sllc, t_net * g_net, t_dram * t_sllc * g_sllc,
                      tuple(labels), tuple(accumulated), tuple(similarity))


def predict(model, row):
    """Predicted interference level; not clamped.

    Args:
        model (InterferenceModel): model coefficients
        row (FeatureRow): model terms

    Returns:
        float: c1 * t1 + c2 * t2 + c3 * t3
    """
    terms = (row.t1, row.t2, row.t3)
    if not all(math.isfinite(t) for t in terms):
        raise DomainError(f'non-finite model terms {terms}')
    return math.fsum(c * t for c, t in zip((model.c1, model.c2, model.c3), terms))


def predict_colocation(model, coloc):
    """Shortcut for ``predict(model, features(coloc))``."""
    return predict(model, features(coloc))


def prediction_error(predicted, observed):
    """Absolute difference between predicted and observed interference.

    Args:
        predicted (float): predicted interference level
        observed (float): measured interference level

    Returns:
        float: |predicted - observed|
    """
    if not (math.isfinite(predicted) and math.isfinite(observed)):
        raise DomainError('prediction error needs finite inputs')
    return abs(predicted - observed)


def is_extrapolation(prediction, envelope_max=ENVELOPE_MAX):
    """Flags predictions outside the interference range the model was built on."""
    return prediction < 0 or prediction > envelope_max


def evaluate_predictions(pairs, threshold=0.10):
    """Summarizes prediction errors over a set of co-locations.

    Args:
        pairs (Iterable[tuple[float, float]]): (predicted, observed) per co-location
        threshold (float): error bound of the "precise" share

    Returns:
        dict: 'mean_error', 'max_error', 'share_under_threshold' and 'count'
    """
    errors = [prediction_error(p, o) for p, o in pairs]
    if not errors:
        raise DomainError('no predictions to evaluate')
    return {
        'mean_error': math.fsum(errors) / len(errors),
        'max_error': max(errors),
        'share_under_threshold': sum(e < threshold for e in errors) / len(errors),
        'count': len(errors),
    }

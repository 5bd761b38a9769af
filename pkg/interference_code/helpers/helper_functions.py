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
"""File formats of the toolkit and the experiment cache.

JSON files are described by pydantic models and converted into the domain types, so
a file that loads is also a valid profile, calibration, model, plan or stressor spec.
Datasets and histograms are CSV files written with pandas.
"""
import json
import logging
import lzma
import math
import os
import pickle
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Extra, ValidationError

from helpers.core import ApplicationProfile, CalibrationMaxima, ResourceVector, Unit, normalize_profile
from helpers.dataset import AGGREGATE_MEAN, PAIRWISE_ALL, CoExecutionPlan
from helpers.errors import (CalibrationError, ConfigError, DatasetLoadError, MalformedProfileError,
                            UnknownLabelError)
from helpers.model import FITTED, InterferenceModel, features_from_scores
from helpers.reference_data import evaluation_score_profiles, synthetic_score_profiles
from helpers.regression import DatasetRow, FitDiagnostics, InterferenceDataset
from helpers.settings import get_settings
from helpers.stressor import SyntheticAppSpec, preset

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ['t_sllc', 't_dram', 't_net', 'g_sllc', 'g_dram', 'g_net']
TERM_COLUMNS = ['t1', 't2', 't3']
DATASET_COLUMNS = SCORE_COLUMNS + TERM_COLUMNS + ['interference']
TERM_TOLERANCE = 1e-6


class _FileModel(BaseModel):
    class Config:
        extra = Extra.forbid


class VMAccessFile(_FileModel):
    sllc: float = 0.0
    dram: float = 0.0
    net: float = 0.0


class ProfileFile(_FileModel):
    label: str
    vm_count: Optional[int] = None
    vm_accesses: List[VMAccessFile]
    isolated_runtime_s: Optional[float] = None
    units: Unit = Unit.RAW

    def to_profile(self):
        accesses = tuple(ResourceVector(v.sllc, v.dram, v.net, self.units) for v in self.vm_accesses)
        return ApplicationProfile(self.label, accesses, self.vm_count, self.isolated_runtime_s)

    @classmethod
    def from_profile(cls, profile):
        return cls(label=profile.label, vm_count=profile.vm_count,
                   vm_accesses=[v.to_mapping() for v in profile.vm_accesses],
                   isolated_runtime_s=profile.isolated_runtime, units=profile.unit)


class CalibrationFile(_FileModel):
    max_sllc: float
    max_dram: float
    max_net: float
    calibration_id: str = ''

    def to_maxima(self):
        return CalibrationMaxima(self.max_sllc, self.max_dram, self.max_net)


class ModelFile(_FileModel):
    c1: float
    c2: float
    c3: float
    provenance: str = FITTED
    diagnostics: Optional[dict] = None

    def to_model(self):
        diagnostics = FitDiagnostics.from_dict(self.diagnostics) if self.diagnostics else None
        return InterferenceModel(self.c1, self.c2, self.c3, self.provenance, diagnostics)


class StressSpecFile(_FileModel):
    """Stressor parameters; explicit values override those of ``preset``."""
    preset: Optional[str] = None
    label: Optional[str] = None
    omega: Optional[int] = None
    alpha: Optional[int] = None
    beta: Optional[int] = None
    gamma: Optional[int] = None
    delta: Optional[int] = None
    theta: Optional[int] = None
    lambda_bytes: Optional[int] = None

    def to_spec(self):
        values = preset(self.preset).to_dict() if self.preset else {}
        values.update(self.dict(exclude={'preset'}, exclude_none=True))
        missing = [name for name in ('omega', 'alpha', 'beta', 'gamma', 'delta', 'theta', 'lambda_bytes')
                   if name not in values]
        if missing:
            raise ConfigError(f'stressor spec lacks {missing}')
        return SyntheticAppSpec.from_dict(values)


class PlanFile(_FileModel):
    """Co-execution plan; a string member names a preset or a bundled score profile."""
    members: List[Union[ProfileFile, StressSpecFile, str]]
    scheme: str = PAIRWISE_ALL
    repetitions: int = 1
    groups: List[List[str]] = []
    group_size: int = 2
    aggregate: str = AGGREGATE_MEAN


def _parse(model_class, path, error_class):
    try:
        with open(path) as f:
            return model_class.parse_obj(json.load(f))
    except ValidationError as e:
        raise error_class(f'{path}: {_first_error(e)}') from e
    except (OSError, json.JSONDecodeError) as e:
        raise error_class(f'{path}: {e}') from e


def _first_error(e):
    error = e.errors()[0]
    return f"{'.'.join(str(x) for x in error['loc'])}: {error['msg']}"


class PredictReportFile(BaseModel):
    """JSON report of the predict command; only the inputs are read back."""
    model: ModelFile
    profiles: List[ProfileFile]


def write_json(data, path):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
        f.write('\n')


def load_profile(path):
    return _parse(ProfileFile, path, MalformedProfileError).to_profile()


def save_profile(profile, path):
    write_json(json.loads(ProfileFile.from_profile(profile).json()), path)


def load_calibration(path):
    """Returns:
        tuple[CalibrationMaxima, str]: maxima and calibration identifier
    """
    calibration = _parse(CalibrationFile, path, CalibrationError)
    return calibration.to_maxima(), calibration.calibration_id or Path(path).stem


def save_calibration(maxima, path, calibration_id=''):
    write_json({'max_sllc': maxima.max_sllc, 'max_dram': maxima.max_dram, 'max_net': maxima.max_net,
                'calibration_id': calibration_id}, path)


def load_model(path):
    return _parse(ModelFile, path, ConfigError).to_model()


def load_predict_report(path):
    """Returns:
        tuple[InterferenceModel, list[ApplicationProfile]]: inputs of a predict report
    """
    report = _parse(PredictReportFile, path, ConfigError)
    return report.model.to_model(), [p.to_profile() for p in report.profiles]


def save_model(model, path):
    write_json(model.to_dict(), path)


def load_stress_spec(path):
    return _parse(StressSpecFile, path, ConfigError).to_spec()


def bundled_profile(label):
    bundled = {**synthetic_score_profiles(), **evaluation_score_profiles()}
    try:
        return bundled[label]
    except KeyError:
        raise UnknownLabelError(f'no bundled profile named {label!r}') from None


def load_plan(path, synthetic=False, maxima=None, decimals=None):
    """Reads a plan file.

    Args:
        path (str): plan file
        synthetic (bool): members are stressor specs (string members name presets) instead of
            profiles (string members name bundled score profiles)
        maxima (CalibrationMaxima, optional): normalizes raw profile members
        decimals (int, optional): rounding of normalized scores

    Returns:
        CoExecutionPlan: the plan
    """
    plan_file = _parse(PlanFile, path, ConfigError)
    members = []
    for entry in plan_file.members:
        if synthetic:
            if isinstance(entry, ProfileFile):
                raise ConfigError(f'profile member {entry.label!r} cannot run on the stressor')
            member = preset(entry) if isinstance(entry, str) else entry.to_spec()
        else:
            if isinstance(entry, StressSpecFile):
                raise ConfigError('stressor spec members need the stressor runner')
            member = bundled_profile(entry) if isinstance(entry, str) else entry.to_profile()
            if member.unit is Unit.RAW:
                if maxima is None:
                    raise CalibrationError(f'raw profile {member.label!r} needs a calibration')
                member = normalize_profile(member, maxima, decimals)
        members.append(member)
    return CoExecutionPlan(tuple(members), plan_file.scheme, plan_file.repetitions,
                           tuple(tuple(g) for g in plan_file.groups), plan_file.group_size,
                           plan_file.aggregate)


def dataset_frame(dataset):
    """Returns:
        pd.DataFrame: one line per row, columns ``colocation``, ``members`` (JSON list of the member
        labels), the dataset columns and ``error``
    """
    records = []
    for row in dataset.rows:
        f = row.features
        if f.accumulated is None or f.similarity is None:
            raise DatasetLoadError(f'row {f.name} carries no scores to store')
        records.append([f.name, json.dumps(list(f.labels)), *f.accumulated, *f.similarity, f.t1, f.t2, f.t3,
                        np.nan if row.observed is None else row.observed, row.error])
    return pd.DataFrame(records, columns=['colocation', 'members'] + DATASET_COLUMNS + ['error'])


def save_dataset(dataset, path):
    with open(path, 'w', newline='') as f:
        f.write(f'# calibration_id: {dataset.calibration_id}\n')
        f.write(f'# generated: {dataset.generated}\n')
        dataset_frame(dataset).to_csv(f, index=False)


def _header(path):
    header = {}
    with open(path) as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].partition(':')
            header[key.strip()] = value.strip()
    return header


def _row_labels(record):
    members = record.get('members')
    if isinstance(members, str):
        try:
            labels = json.loads(members)
        except json.JSONDecodeError as e:
            raise DatasetLoadError(f'unreadable member labels {members!r}: {e}') from e
        if not (isinstance(labels, list) and all(isinstance(label, str) for label in labels)):
            raise DatasetLoadError(f'member labels must be a JSON list of strings, got {members!r}')
        return tuple(labels)
    # files without a members column only carry the joined name
    colocation = record.get('colocation')
    return tuple(str(colocation).split('x')) if colocation is not None and not pd.isna(colocation) else ()


def load_dataset(path):
    """Reads a dataset CSV and re-derives the model terms of every row.

    Raises:
        DatasetLoadError: unreadable file, missing columns or stored terms that disagree
            with their scores by more than 1e-6
    """
    try:
        header = _header(path)
        frame = pd.read_csv(path, skiprows=len(header), float_precision='round_trip')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetLoadError(f'{path}: {e}') from e
    missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetLoadError(f'{path}: missing columns {missing}')

    rows = []
    for i, record in enumerate(frame.to_dict('records')):
        labels = _row_labels(record)
        scores = [float(record[c]) for c in SCORE_COLUMNS]
        if not all(math.isfinite(s) for s in scores):
            raise DatasetLoadError(f'{path}: row {i + 1} has missing scores')
        row_features = features_from_scores(scores[:3], scores[3:], labels)
        stored = [float(record[c]) for c in TERM_COLUMNS]
        recomputed = [row_features.t1, row_features.t2, row_features.t3]
        if not all(abs(s - r) <= TERM_TOLERANCE for s, r in zip(stored, recomputed)):
            raise DatasetLoadError(f'{path}: row {i + 1} terms {stored} disagree with its scores {recomputed}')
        observed = None if pd.isna(record['interference']) else float(record['interference'])
        error = record.get('error')
        error = None if error is None or pd.isna(error) else str(error)
        rows.append(DatasetRow(row_features, observed, error))
    return InterferenceDataset(tuple(rows), header.get('calibration_id', ''), header.get('generated', ''))


def save_histogram(bins, path):
    frame = pd.DataFrame([(b.low, b.high, b.count) for b in bins], columns=['bin_low', 'bin_high', 'count'])
    frame.to_csv(path, index=False)


def _cache_path(prefix, cache_dir=None):
    cache_dir = Path(cache_dir) if cache_dir is not None else get_settings().cache_dir
    return cache_dir.joinpath(f'savedata_{prefix}.pkl')


def load_experiment_data(prefix, cache_dir=None):
    """Load cached experiment data.

    Args:
        prefix (str): prefix used in naming cached data.
        cache_dir (Path, optional): cache directory, the configured one by default.

    Returns:
        dict: the cached data, None when nothing is cached under ``prefix``.
    """
    filepath = _cache_path(prefix, cache_dir)
    if not filepath.exists():
        logger.info('%s not found, nothing loaded', filepath)
        return None

    with lzma.open(filepath, 'rb') as f:
        data = pickle.load(f)

    logger.info('loaded %s', filepath)
    return data


def save_experiment_data(prefix, data, overwrite=True, cache_dir=None):
    """Save experiment data.

    Args:
        prefix (str): prefix used in naming cached data.
        data (dict): data to store.
        overwrite (bool, optional): Flag for overwriting stored data. Defaults to True.
        cache_dir (Path, optional): cache directory, the configured one by default.

    Returns:
        bool: indicator for successful storage of data.
    """
    filepath = _cache_path(prefix, cache_dir)
    if filepath.exists() and not overwrite:
        logger.info('%s exists, not overwriting', filepath)
        return False

    os.makedirs(filepath.parent, exist_ok=True)
    with lzma.open(filepath, 'wb') as f:
        pickle.dump(data, f)

    logger.info('saved %s', filepath)
    return True

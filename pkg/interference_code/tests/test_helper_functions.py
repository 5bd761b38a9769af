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

import json

import numpy as np
import pytest

from conftest import oracle_dataset, score_profile
from helpers.core import ApplicationProfile, CalibrationMaxima, ResourceVector, Unit
from helpers.dataset import EXPLICIT_LIST, HistogramBin
from helpers.errors import (CalibrationError, ConfigError, DatasetLoadError, EmptyPlanError, MalformedProfileError,
                            UnknownLabelError)
from helpers.helper_functions import (bundled_profile, load_calibration, load_dataset, load_experiment_data,
                                      load_model, load_plan, load_predict_report, load_profile, load_stress_spec,
                                      save_calibration, save_dataset, save_experiment_data, save_histogram,
                                      save_model, save_profile, write_json)
from helpers.model import InterferenceModel
from helpers.regression import fit
from helpers.stressor import SyntheticAppSpec, preset


def test_profile_file_round_trip(tmp_path):
    profile = ApplicationProfile('app', (ResourceVector(0.1 + 0.2, 1 / 3, 7e-5), ResourceVector(2.5, 0, 1e9)),
                                 isolated_runtime=12.345678901234567)
    save_profile(profile, tmp_path / 'app.json')
    assert load_profile(tmp_path / 'app.json') == profile


def test_malformed_profiles(tmp_path):
    cases = {
        'unknown_field.json': {'label': 'a', 'vm_accesses': [{'sllc': 1}], 'colour': 'red'},
        'vm_count.json': {'label': 'a', 'vm_count': 2, 'vm_accesses': [{'sllc': 1}]},
        'negative.json': {'label': 'a', 'vm_accesses': [{'sllc': -1}]},
        'no_label.json': {'vm_accesses': [{'sllc': 1}]},
    }
    for name, data in cases.items():
        write_json(data, tmp_path / name)
        with pytest.raises((MalformedProfileError, ValueError)):
            load_profile(tmp_path / name)
    (tmp_path / 'broken.json').write_text('{"label": ')
    with pytest.raises(MalformedProfileError):
        load_profile(tmp_path / 'broken.json')
    with pytest.raises(MalformedProfileError):
        load_profile(tmp_path / 'missing.json')


def test_score_profile_file(tmp_path):
    write_json({'label': 'FFT', 'vm_count': 2, 'units': 'score',
                'vm_accesses': [{'sllc': 0.07, 'dram': 0.17, 'net': 0.49}, {}]}, tmp_path / 'fft.json')
    profile = load_profile(tmp_path / 'fft.json')
    assert profile.unit is Unit.SCORE
    assert profile.access.as_array().tolist() == [0.07, 0.17, 0.49]


def test_calibration_file(tmp_path):
    save_calibration(CalibrationMaxima(1635, 444, 2910), tmp_path / 'testbed.json', 'testbed')
    maxima, calibration_id = load_calibration(tmp_path / 'testbed.json')
    assert (maxima.max_sllc, maxima.max_dram, maxima.max_net, calibration_id) == (1635, 444, 2910, 'testbed')
    write_json({'max_sllc': 1, 'max_dram': 1, 'max_net': 1}, tmp_path / 'lab.json')
    assert load_calibration(tmp_path / 'lab.json')[1] == 'lab'
    write_json({'max_sllc': 0, 'max_dram': 1, 'max_net': 1}, tmp_path / 'zero.json')
    with pytest.raises(CalibrationError):
        load_calibration(tmp_path / 'zero.json')


def test_model_file_round_trip(tmp_path):
    model = fit(oracle_dataset(sigma=0.05, seed=4))
    save_model(model, tmp_path / 'model.json')
    loaded = load_model(tmp_path / 'model.json')
    assert (loaded.c1, loaded.c2, loaded.c3) == (model.c1, model.c2, model.c3)
    assert loaded.provenance == model.provenance
    assert loaded.diagnostics.r2 == model.diagnostics.r2
    assert loaded.diagnostics.residuals == model.diagnostics.residuals

    save_model(InterferenceModel.paper_default(), tmp_path / 'paper.json')
    assert load_model(tmp_path / 'paper.json') == InterferenceModel.paper_default()


def test_predict_report_inputs(tmp_path):
    profile = score_profile('P', 0.18, 0.21, 0.32, vm_count=6)
    save_profile(profile, tmp_path / 'p.json')
    report = {'model': InterferenceModel.paper_default().to_dict(),
              'profiles': [json.loads((tmp_path / 'p.json').read_text())],
              'predictions': []}
    write_json(report, tmp_path / 'report.json')
    model, profiles = load_predict_report(tmp_path / 'report.json')
    assert model == InterferenceModel.paper_default()
    assert profiles == [profile]


def test_stress_spec_file(tmp_path):
    write_json({'preset': 'S9', 'omega': 2}, tmp_path / 'short.json')
    assert load_stress_spec(tmp_path / 'short.json') == SyntheticAppSpec(
        2, 40000, 1500, 11500, 2048, 22, 749568, label='S9')
    write_json({'label': 'mine', 'omega': 1, 'alpha': 1, 'beta': 0, 'gamma': 8, 'delta': 1, 'theta': 0,
                'lambda_bytes': 0}, tmp_path / 'mine.json')
    assert load_stress_spec(tmp_path / 'mine.json').label == 'mine'
    write_json({'omega': 1}, tmp_path / 'partial.json')
    with pytest.raises(ConfigError):
        load_stress_spec(tmp_path / 'partial.json')
    write_json({'preset': 'S99'}, tmp_path / 'unknown.json')
    with pytest.raises(UnknownLabelError):
        load_stress_spec(tmp_path / 'unknown.json')


def test_profile_plan(tmp_path):
    write_json({'members': ['PTRANS.I1.P6', 'DGEMM.I1.P6',
                            {'label': 'raw', 'vm_accesses': [{'sllc': 817.5, 'dram': 0, 'net': 291}]}],
                'repetitions': 2}, tmp_path / 'plan.json')
    with pytest.raises(CalibrationError):
        load_plan(tmp_path / 'plan.json')
    plan = load_plan(tmp_path / 'plan.json', maxima=CalibrationMaxima(1635, 444, 2910), decimals=1)
    assert [m.label for m in plan.members] == ['PTRANS.I1.P6', 'DGEMM.I1.P6', 'raw']
    assert plan.members[2].access.as_array().tolist() == [0.5, 0.0, 0.1]
    assert plan.size == 6
    assert plan.repetitions == 2


def test_synthetic_plan(tmp_path):
    write_json({'members': ['S1', {'preset': 'S2', 'omega': 1}, {'preset': 'S3', 'label': 'S3-short', 'omega': 1}],
                'scheme': EXPLICIT_LIST, 'groups': [['S1', 'S3-short']]}, tmp_path / 'plan.json')
    plan = load_plan(tmp_path / 'plan.json', synthetic=True)
    assert plan.members[0] == preset('S1')
    assert plan.members[1].omega == 1
    assert plan.size == 1
    with pytest.raises(ConfigError):
        load_plan(tmp_path / 'plan.json')


def test_unusable_plans(tmp_path):
    write_json({'members': []}, tmp_path / 'empty.json')
    with pytest.raises(EmptyPlanError):
        load_plan(tmp_path / 'empty.json')
    write_json({'members': ['NOPE']}, tmp_path / 'unknown.json')
    with pytest.raises(UnknownLabelError):
        load_plan(tmp_path / 'unknown.json')
    write_json({'members': ['S1'], 'shuffle': True}, tmp_path / 'extra.json')
    with pytest.raises(ConfigError):
        load_plan(tmp_path / 'extra.json')


def test_bundled_profiles():
    assert bundled_profile('S4').access.as_array().tolist() == pytest.approx([0.3, 1.0, 0.1])
    assert bundled_profile('FFT.I1.P4').vm_count == 4
    with pytest.raises(UnknownLabelError):
        bundled_profile('S19')


def test_dataset_csv_round_trip(tmp_path):
    dataset = oracle_dataset(sigma=0.1, seed=9)
    save_dataset(dataset, tmp_path / 'dataset.csv')
    assert (tmp_path / 'dataset.csv').read_text().startswith('# calibration_id: testbed\n# generated: ')
    loaded = load_dataset(tmp_path / 'dataset.csv')
    assert loaded.calibration_id == 'testbed'
    assert loaded.generated == dataset.generated
    assert [r.observed for r in loaded.rows] == [r.observed for r in dataset.rows]
    assert [r.features.labels for r in loaded.rows] == [r.features.labels for r in dataset.rows]
    assert np.array_equal(loaded.design_matrix(), dataset.design_matrix())
    assert fit(loaded).coefficients.tolist() == fit(dataset).coefficients.tolist()


def test_labels_containing_x_survive_the_csv(tmp_path):
    members = [score_profile('nginx', 0.4, 0.1, 0.2), score_profile('xapian', 0.1, 0.0, 0.6)]
    dataset = oracle_dataset(members=members)
    save_dataset(dataset, tmp_path / 'dataset.csv')
    loaded = load_dataset(tmp_path / 'dataset.csv')
    assert [r.features.labels for r in loaded.rows] == [('nginx', 'nginx'), ('nginx', 'xapian'),
                                                        ('xapian', 'xapian')]
    assert [r.features.name for r in loaded.rows] == [r.features.name for r in dataset.rows]


def test_datasets_without_member_labels_still_load(tmp_path):
    save_dataset(oracle_dataset(members=[score_profile('A', 0.4, 0.1, 0.2)]), tmp_path / 'dataset.csv')
    lines = (tmp_path / 'dataset.csv').read_text().splitlines()
    stripped = [line for line in lines if line.startswith('#')]
    stripped += [line.replace('colocation,members,', 'colocation,', 1).replace(',"[""A"", ""A""]"', '', 1)
                 for line in lines if not line.startswith('#')]
    (tmp_path / 'legacy.csv').write_text('\n'.join(stripped) + '\n')
    assert load_dataset(tmp_path / 'legacy.csv').rows[0].features.labels == ('A', 'A')


def test_malformed_member_labels_are_rejected(tmp_path):
    save_dataset(oracle_dataset(members=[score_profile('A', 0.4, 0.1, 0.2)]), tmp_path / 'dataset.csv')
    text = (tmp_path / 'dataset.csv').read_text().replace('"[""A"", ""A""]"', '"{""A"": 1}"')
    (tmp_path / 'dataset.csv').write_text(text)
    with pytest.raises(DatasetLoadError):
        load_dataset(tmp_path / 'dataset.csv')


def test_failed_rows_survive_the_csv(tmp_path):
    dataset = oracle_dataset()
    rows = list(dataset.rows)
    rows[3] = type(rows[3])(rows[3].features, None, 'S1: member crashed')
    save_dataset(type(dataset)(tuple(rows), 'c', 'now'), tmp_path / 'dataset.csv')
    loaded = load_dataset(tmp_path / 'dataset.csv')
    assert loaded.rows[3].observed is None
    assert loaded.rows[3].error == 'S1: member crashed'
    assert len(loaded.usable_rows()) == 170


def test_tampered_terms_are_rejected(tmp_path):
    save_dataset(oracle_dataset(), tmp_path / 'dataset.csv')
    lines = (tmp_path / 'dataset.csv').read_text().splitlines()
    header = lines[2].split(',')
    cells = lines[10].split(',')
    cells[header.index('t1')] = str(float(cells[header.index('t1')]) + 0.01)
    lines[10] = ','.join(cells)
    (tmp_path / 'dataset.csv').write_text('\n'.join(lines) + '\n')
    with pytest.raises(DatasetLoadError):
        load_dataset(tmp_path / 'dataset.csv')


def test_dataset_without_columns(tmp_path):
    (tmp_path / 'dataset.csv').write_text('colocation,t1\nS1xS1,0.5\n')
    with pytest.raises(DatasetLoadError):
        load_dataset(tmp_path / 'dataset.csv')
    with pytest.raises(DatasetLoadError):
        load_dataset(tmp_path / 'missing.csv')


def test_histogram_csv(tmp_path):
    save_histogram([HistogramBin(0.0, 0.5, 2), HistogramBin(0.5, 1.0, 1)], tmp_path / 'hist.csv')
    assert (tmp_path / 'hist.csv').read_text().splitlines() == ['bin_low,bin_high,count', '0.0,0.5,2', '0.5,1.0,1']


def test_experiment_cache(tmp_path):
    assert load_experiment_data('demo', cache_dir=tmp_path) is None
    assert save_experiment_data('demo', {'levels': [0.1, 0.2]}, cache_dir=tmp_path)
    assert not save_experiment_data('demo', {'levels': []}, overwrite=False, cache_dir=tmp_path)
    assert load_experiment_data('demo', cache_dir=tmp_path) == {'levels': [0.1, 0.2]}


def test_experiment_cache_follows_the_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('INTERFERENCE_CACHE_DIR', str(tmp_path / 'cache'))
    save_experiment_data('env', [1, 2, 3])
    assert (tmp_path / 'cache' / 'savedata_env.pkl').exists()
    assert load_experiment_data('env') == [1, 2, 3]

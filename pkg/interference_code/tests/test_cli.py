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

import pandas as pd
import pytest

from conftest import score_profile
from helpers.core import CalibrationMaxima, CoLocation
from helpers.dataset import build_dataset
from helpers.helper_functions import (load_dataset, load_model, save_calibration, save_dataset, save_profile,
                                      write_json)
from helpers.model import PAPER_COEFFICIENTS, features
from helpers.reference_data import SYNTHETIC_SCORES, synthetic_raw_profiles
from helpers.regression import DatasetRow, InterferenceDataset
from interference_cli import build_parser, main

PTRANS = 'PTRANS.I1.P6'
DGEMM = 'DGEMM.I1.P6'


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    monkeypatch.delenv('INTERFERENCE_CALIBRATION', raising=False)
    monkeypatch.setenv('INTERFERENCE_CACHE_DIR', str(tmp_path / 'cache'))


def run_json(capsys, argv):
    assert main(argv + ['--format', 'json']) == 0
    return json.loads(capsys.readouterr().out)


def profile_plan(path, labels, **extra):
    write_json({'members': list(labels), **extra}, path)
    return str(path)


def test_predict_bundled_profiles(capsys):
    assert main(['predict', PTRANS, PTRANS]) == 0
    out = capsys.readouterr().out
    assert '39.42%' in out
    assert 'PTRANS.I1.P6xPTRANS.I1.P6' in out


def test_predict_profile_files(tmp_path, capsys, evaluation_scores):
    paths = []
    for label in ('FFT.I1.P4',) * 3:
        paths.append(str(tmp_path / f'fft{len(paths)}.json'))
        save_profile(evaluation_scores[label], paths[-1])
    report = run_json(capsys, ['predict'] + paths)
    assert report['predicted'] == pytest.approx(0.40796, abs=1e-5)
    assert report['extrapolated'] is False
    assert report['features']['t_net'] == pytest.approx(1.47)


def test_predict_report_round_trip(tmp_path, capsys):
    report = run_json(capsys, ['predict', PTRANS, DGEMM])
    write_json(report, tmp_path / 'report.json')
    again = run_json(capsys, ['predict', '--from-report', str(tmp_path / 'report.json')])
    assert again == report


def test_predict_with_a_fitted_model(tmp_path, capsys):
    write_json({'c1': 1.0, 'c2': 0.0, 'c3': 0.0}, tmp_path / 'model.json')
    report = run_json(capsys, ['predict', 'S4', 'S4', '--model', str(tmp_path / 'model.json')])
    assert report['predicted'] == pytest.approx(0.6)


def test_raw_profiles_need_a_calibration(tmp_path, capsys):
    save_profile(synthetic_raw_profiles()['S1'], tmp_path / 's1.json')
    raw = str(tmp_path / 's1.json')
    assert main(['predict', raw, raw]) == 3
    err = capsys.readouterr().err
    assert err.startswith('error: calibration: ')
    assert len(err.strip().splitlines()) == 1

    save_calibration(CalibrationMaxima(1635, 444, 2910), tmp_path / 'testbed.json', 'testbed')
    report = run_json(capsys, ['predict', raw, raw, '--calibration', str(tmp_path / 'testbed.json'),
                               '--decimals', '1'])
    assert report['features']['t_sllc'] == pytest.approx(2 * SYNTHETIC_SCORES['S1'][0])


def test_calibration_from_the_environment(tmp_path, capsys, monkeypatch):
    save_profile(synthetic_raw_profiles()['S4'], tmp_path / 's4.json')
    save_calibration(CalibrationMaxima(1635, 444, 2910), tmp_path / 'testbed.json', 'testbed')
    monkeypatch.setenv('INTERFERENCE_CALIBRATION', str(tmp_path / 'testbed.json'))
    report = run_json(capsys, ['normalize', str(tmp_path / 's4.json'), '--decimals', '1'])
    assert report['calibration_id'] == 'testbed'
    assert report['profiles'][0]['units'] == 'score'


def test_normalize_derives_a_calibration(tmp_path, capsys):
    paths = []
    for label, profile in synthetic_raw_profiles().items():
        paths.append(str(tmp_path / f'{label}.json'))
        save_profile(profile, paths[-1])
    report = run_json(capsys, ['normalize', *paths, '--derive-calibration', '--decimals', '1',
                               '--save-calibration', str(tmp_path / 'derived.json'),
                               '--output-dir', str(tmp_path / 'scores')])
    by_label = {p['label']: p for p in report['profiles']}
    assert sum(v['sllc'] for v in by_label['S4']['vm_accesses']) == pytest.approx(SYNTHETIC_SCORES['S4'][0])
    assert (tmp_path / 'scores' / 'S18.json').exists()
    assert json.loads((tmp_path / 'derived.json').read_text())['max_net'] == pytest.approx(2910)


def test_dataset_then_fit(tmp_path, capsys):
    plan = profile_plan(tmp_path / 'plan.json', [f'S{i}' for i in range(1, 19)])
    assert main(['dataset', plan, '--output', str(tmp_path / 'dataset.csv'), '--no-progress']) == 0
    assert len(load_dataset(tmp_path / 'dataset.csv')) == 171

    report = run_json(capsys, ['fit', str(tmp_path / 'dataset.csv'), '--output', str(tmp_path / 'model.json')])
    coefficients = [report['coefficients'][name] for name in ('c1', 'c2', 'c3')]
    assert coefficients == pytest.approx(PAPER_COEFFICIENTS, abs=1e-9)
    assert report['n'] == 171
    assert load_model(tmp_path / 'model.json').c1 == report['coefficients']['c1']


def four_row_dataset(path):
    profiles = {label: score_profile(label, *scores) for label, scores in (
        ('A', (0.5, 0.2, 0.1)), ('B', (0.3, 0.0, 0.6)), ('C', (0.9, 0.4, 0.2)), ('D', (0.1, 0.7, 0.9)))}
    rows = tuple(DatasetRow(features(CoLocation((profiles[a], profiles[b]))), observed)
                 for (a, b), observed in ((('A', 'B'), 0.3), (('B', 'C'), 0.5), (('C', 'D'), 0.2), (('A', 'D'), 0.9)))
    save_dataset(InterferenceDataset(rows, 'testbed', 'now'), path)
    return str(path)


def test_fit_with_one_spare_row(tmp_path, capsys):
    dataset = four_row_dataset(tmp_path / 'dataset.csv')
    report = run_json(capsys, ['fit', dataset, '--output', str(tmp_path / 'model.json')])
    assert report['n'] == 4
    assert report['r2'] < 1.0
    assert report['r2_adj'] is None
    assert report['residual_checks'] == []
    assert load_model(tmp_path / 'model.json').c1 == report['coefficients']['c1']

    assert main(['fit', dataset]) == 0
    assert 'R2-adj undefined' in capsys.readouterr().out


def test_noisy_dataset_to_stdout(tmp_path, capsys):
    plan = profile_plan(tmp_path / 'plan.json', ['S1', 'S2'])
    assert main(['dataset', plan, '--sigma', '0.1', '--seed', '3', '--no-progress',
                 '--hidden', '0.5', '0.2', '0.1']) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith('colocation,members,t_sllc')
    assert [line.split(',')[0] for line in lines[1:]] == ['S1xS1', 'S1xS2', 'S2xS2']


def test_dataset_cache(tmp_path, capsys, monkeypatch):
    plan = profile_plan(tmp_path / 'plan.json', ['S1', 'S2', 'S3'])
    argv = ['dataset', plan, '--no-progress', '--cache-prefix', 'three', '--sigma', '0.2']
    assert main(argv + ['--seed', '1', '--output', str(tmp_path / 'first.csv')]) == 0
    assert (tmp_path / 'cache' / 'savedata_three.pkl').exists()

    def no_build(*args, **kwargs):
        raise AssertionError('the cached dataset should be reused')

    monkeypatch.setattr('interference_cli.build_dataset', no_build)
    assert main(argv + ['--seed', '1', '--output', str(tmp_path / 'second.csv')]) == 0
    monkeypatch.setattr('interference_cli.build_dataset', build_dataset)
    assert main(argv + ['--seed', '2', '--output', str(tmp_path / 'third.csv')]) == 0
    first, second, third = (pd.read_csv(tmp_path / name, comment='#')['interference'].tolist()
                            for name in ('first.csv', 'second.csv', 'third.csv'))
    assert second == first
    assert third != first


def test_measured_dataset(tmp_path, capsys):
    members = [{'label': 'A', 'units': 'score', 'isolated_runtime_s': 60.0,
                'vm_accesses': [{'sllc': 0.2, 'dram': 0.1, 'net': 0.0}]},
               {'label': 'B', 'units': 'score', 'isolated_runtime_s': 80.0,
                'vm_accesses': [{'sllc': 0.3, 'dram': 0.0, 'net': 0.1}]}]
    plan = profile_plan(tmp_path / 'plan.json', members)
    (tmp_path / 'measured.csv').write_text('colocation,label,concurrent_runtime_s\n'
                                           'AxA,A,66\nAxA,A,66\nAxB,A,100\nAxB,B,100\n')
    assert main(['dataset', plan, '--runner', 'measurements', '--measurements', str(tmp_path / 'measured.csv'),
                 '--output', str(tmp_path / 'dataset.csv'), '--no-progress']) == 0
    rows = load_dataset(tmp_path / 'dataset.csv').rows
    assert rows[0].observed == pytest.approx(0.1)
    assert rows[1].observed == pytest.approx(0.4583, abs=1e-4)
    assert rows[2].failed and 'B' in rows[2].error


def test_empty_plan_fails(tmp_path, capsys):
    plan = profile_plan(tmp_path / 'plan.json', [])
    assert main(['dataset', plan, '--no-progress']) == 14
    assert capsys.readouterr().err.startswith('error: empty-plan: ')


def test_collinear_dataset_fails_to_fit(tmp_path, capsys):
    members = [{'label': label, 'units': 'score', 'vm_accesses': [{'sllc': sllc}]}
               for label, sllc in (('A', 0.2), ('B', 0.5), ('C', 0.9))]
    plan = profile_plan(tmp_path / 'plan.json', members)
    assert main(['dataset', plan, '--output', str(tmp_path / 'dataset.csv'), '--no-progress']) == 0
    assert main(['fit', str(tmp_path / 'dataset.csv')]) == 7
    assert capsys.readouterr().err.startswith('error: collinearity: ')


def test_histogram_and_analyze(tmp_path, capsys):
    plan = profile_plan(tmp_path / 'plan.json', [f'S{i}' for i in range(1, 19)])
    main(['dataset', plan, '--output', str(tmp_path / 'dataset.csv'), '--no-progress'])
    assert main(['histogram', str(tmp_path / 'dataset.csv'), '--bin-width', '0.5', '--format', 'csv',
                 '--output', str(tmp_path / 'hist.csv')]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == 'bin_low,bin_high,count'
    counts = [int(line.split(',')[2]) for line in lines[1:]]
    assert sum(counts) == 171
    assert counts[0] == 94
    assert pd.read_csv(tmp_path / 'hist.csv')['count'].tolist() == counts

    summary = run_json(capsys, ['analyze', str(tmp_path / 'dataset.csv')])
    assert summary['n'] == 171
    assert summary['sllc_correlation'] == pytest.approx(0.5707, abs=1e-3)


def test_stress_spec_file(tmp_path, capsys):
    write_json({'label': 'tiny', 'omega': 2, 'alpha': 3, 'beta': 2, 'gamma': 100, 'delta': 7, 'theta': 2,
                'lambda_bytes': 1000}, tmp_path / 'tiny.json')
    report = run_json(capsys, ['stress', str(tmp_path / 'tiny.json'), '--workers', '4',
                               '--output', str(tmp_path / 'counters.json')])
    assert report['counters']['element_accesses'] == 4 * 270
    assert report['counters']['sqrt_evaluations'] == 4 * 180
    assert report['counters']['bytes_sent'] == 4 * 2 * 2 * 1000 * 3
    assert json.loads((tmp_path / 'counters.json').read_text())['counters'] == report['counters']


def test_stress_needs_one_spec(tmp_path, capsys):
    assert main(['stress']) == 10
    write_json({'preset': 'S1'}, tmp_path / 's1.json')
    assert main(['stress', str(tmp_path / 's1.json'), '--preset', 'S2']) == 10


def test_presets(capsys):
    presets = run_json(capsys, ['presets'])
    assert [p['label'] for p in presets] == [f'S{i}' for i in range(1, 19)]
    assert presets[3]['alpha'] == 7500


def test_plan_pairs_ptrans_with_dgemm(capsys):
    recommendation = run_json(capsys, ['plan', PTRANS, DGEMM, PTRANS, DGEMM, '--slots', '2'])
    assert [g['labels'] for g in recommendation['assignment']] == [[DGEMM, PTRANS]] * 2
    assert main(['plan', PTRANS, DGEMM, PTRANS, DGEMM, '--slots', '3']) == 10
    assert capsys.readouterr().err.startswith('error: config: ')


def test_unknown_profile_label(capsys):
    assert main(['predict', 'NOT-A-PROFILE', PTRANS]) == 11
    assert capsys.readouterr().err.startswith('error: unknown-label: ')


def test_table_output(capsys, tmp_path):
    assert main(['plan', PTRANS, DGEMM, '--slots', '2']) == 0
    assert 'chosen assignment' in capsys.readouterr().out
    assert main(['presets']) == 0
    assert 'S18' in capsys.readouterr().out


def test_parser_rejects_bad_decimals():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['predict', PTRANS, PTRANS, '--decimals', '3'])

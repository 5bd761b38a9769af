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
"""Command-line entry point of the interference toolkit.

Run ``python interference_cli.py <command> --help`` from this directory for the options
of each command. Every command exits 0 on success; failures print a single line
``error: <class>: <message>`` on stderr and exit with the code of the error class.
"""
import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict

from helpers.core import CoLocation, Unit, calibrate_maxima, normalize_profile
from helpers.dataset import (ContentionOracle, MeasurementRunner, OracleRunner, StressorRunner,
                             build_dataset, histogram)
from helpers.errors import CalibrationError, ConfigError, InterferenceError
from helpers.helper_functions import (ProfileFile, bundled_profile, dataset_frame, load_calibration,
                                      load_dataset, load_experiment_data, load_model, load_plan,
                                      load_predict_report, load_profile, load_stress_spec, save_calibration,
                                      save_dataset, save_experiment_data, save_histogram, save_model,
                                      save_profile, write_json)
from helpers.model import (PAPER_COEFFICIENTS, PAPER_DEFAULT, InterferenceModel, features,
                           is_extrapolation, predict)
from helpers.planner import AUTO, EXHAUSTIVE, GREEDY, recommend
from helpers.regression import analyze_dataset, fit, residual_checks, significance
from helpers.settings import get_settings
from helpers.stressor import PRESETS, estimate_profile, preset, run
from helpers.transports import TRANSPORTS, make_transport

logger = logging.getLogger('interference_cli')

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def _decimals(value):
    if value == 'none':
        return None
    return int(value)


def _percent(value):
    return f'{100 * value:.2f}%'


def _emit_json(data):
    print(json.dumps(data, indent=2))


def _maxima(args, required):
    """Calibration from ``--calibration`` or the environment; None when absent and not required."""
    path = args.calibration or get_settings().calibration
    if path is None:
        if required:
            raise CalibrationError('missing calibration: pass --calibration or set INTERFERENCE_CALIBRATION')
        return None, ''
    return load_calibration(path)


def _load_profiles(args, names):
    """Reads profile files (or bundled labels) and normalizes raw ones."""
    profiles = [load_profile(name) if os.path.exists(name) else bundled_profile(name) for name in names]
    raw = any(p.unit is Unit.RAW for p in profiles)
    maxima, _ = _maxima(args, required=raw)
    return [normalize_profile(p, maxima, args.decimals) if p.unit is Unit.RAW else p for p in profiles]


def _model(name):
    if name == PAPER_DEFAULT:
        return InterferenceModel.paper_default()
    return load_model(name)


def cmd_normalize(args):
    profiles = [load_profile(path) for path in args.profiles]
    if args.derive_calibration:
        maxima, calibration_id = calibrate_maxima(profiles), 'derived'
        if args.save_calibration:
            save_calibration(maxima, args.save_calibration, calibration_id)
    else:
        maxima, calibration_id = _maxima(args, required=True)
    scored = [normalize_profile(p, maxima, args.decimals) for p in profiles]

    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        for profile in scored:
            save_profile(profile, os.path.join(args.output_dir, f'{profile.label}.json'))

    if args.format == 'json':
        _emit_json({'calibration_id': calibration_id,
                    'profiles': [json.loads(ProfileFile.from_profile(p).json()) for p in scored]})
    else:
        print(f'calibration {calibration_id}: max sllc {maxima.max_sllc:g} MR/s, '
              f'max dram {maxima.max_dram:g} MR/s, max net {maxima.max_net:g} MB/s')
        for profile in scored:
            a = profile.access
            print(f'{profile.label:>16}  sllc {a.sllc:.4g}  dram {a.dram:.4g}  net {a.net:.4g}')
    return 0


def _predict_report(model, profiles):
    row = features(CoLocation(tuple(profiles)))
    predicted = predict(model, row)
    return {
        'model': model.to_dict(),
        'colocation': row.name,
        'profiles': [json.loads(ProfileFile.from_profile(p).json()) for p in profiles],
        'features': {
            't_sllc': row.accumulated[0], 't_dram': row.accumulated[1], 't_net': row.accumulated[2],
            'g_sllc': row.similarity[0], 'g_dram': row.similarity[1], 'g_net': row.similarity[2],
            't1': row.t1, 't2': row.t2, 't3': row.t3,
        },
        'predicted': predicted,
        'extrapolated': is_extrapolation(predicted),
    }


def cmd_predict(args):
    if args.from_report:
        model, profiles = load_predict_report(args.from_report)
    else:
        model = _model(args.model)
        profiles = _load_profiles(args, args.profiles)
    report = _predict_report(model, profiles)

    if args.format == 'json':
        _emit_json(report)
    else:
        f = report['features']
        print(f"co-location {report['colocation']} ({model.provenance} model)")
        print(f"  T sllc {f['t_sllc']:.4f}  dram {f['t_dram']:.4f}  net {f['t_net']:.4f}")
        print(f"  G sllc {f['g_sllc']:.4f}  dram {f['g_dram']:.4f}  net {f['g_net']:.4f}")
        print(f"  t1 {f['t1']:.4f}  t2 {f['t2']:.4f}  t3 {f['t3']:.4f}")
        flag = '  (extrapolated)' if report['extrapolated'] else ''
        print(f"  predicted interference {_percent(report['predicted'])}{flag}")
    return 0


def _fit_report(model, alpha):
    diag = model.diagnostics
    report = {
        'coefficients': {'c1': model.c1, 'c2': model.c2, 'c3': model.c3},
        'n': diag.n,
        'r2': diag.r2,
        'r2_adj': None if math.isnan(diag.r2_adj) else diag.r2_adj,
        'f_statistic': diag.f_statistic,
        'f_pvalue': diag.f_pvalue,
        'significance': [
            {'term': c.name, 't_statistic': c.t_statistic, 'pvalue': c.pvalue, 'significant': c.significant}
            for c in significance(diag, alpha).coefficients
        ],
    }
    try:
        checks = residual_checks(diag, alpha).checks
        report['residual_checks'] = [
            {'check': c.name, 'statistic': c.statistic, 'pvalue': c.pvalue, 'passed': c.passed, 'note': c.note}
            for c in checks
        ]
    except InterferenceError as e:
        logger.warning('residual checks skipped: %s', e)
        report['residual_checks'] = []
    return report


def cmd_fit(args):
    dataset = load_dataset(args.dataset)
    model = fit(dataset, floor_negative=args.floor_negative, include_failed=args.include_failed)
    if args.output:
        save_model(model, args.output)
    report = _fit_report(model, args.alpha)

    if args.format == 'json':
        _emit_json(report)
    else:
        c = report['coefficients']
        print(f"I = {c['c1']:.4f} T1 + {c['c2']:.4f} T2 + {c['c3']:.4f} T3   ({report['n']} rows)")
        r2_adj = 'undefined' if report['r2_adj'] is None else f"{report['r2_adj']:.4f}"
        print(f"R2 {report['r2']:.4f}  R2-adj {r2_adj}  "
              f"F {report['f_statistic']:.4g} (p = {report['f_pvalue']:.3g})")
        for test in report['significance']:
            print(f"  {test['term']}: t = {test['t_statistic']:.4g}, p = {test['pvalue']:.3g}")
        for check in report['residual_checks']:
            verdict = 'passed' if check['passed'] else 'FAILED'
            print(f"  {check['check']}: p = {check['pvalue']:.3g} {verdict} ({check['note']})")
    return 0


def _stress_spec(args):
    if args.spec and args.preset:
        raise ConfigError('pass either a spec file or --preset, not both')
    if args.preset:
        return preset(args.preset)
    if args.spec:
        return load_stress_spec(args.spec)
    raise ConfigError('a spec file or --preset is required')


def cmd_stress(args):
    spec = _stress_spec(args)
    cache_size_bytes = args.cache_size_bytes or get_settings().cache_size_bytes
    with make_transport(args.transport, args.workers) as transport:
        start = time.perf_counter()
        counters = run(spec, args.workers, transport, cache_size_bytes)
        wall_seconds = time.perf_counter() - start
    rates = estimate_profile(counters, wall_seconds)
    report = {'spec': spec.to_dict(), 'workers': args.workers, 'transport': args.transport,
              'counters': counters.to_dict(), 'wall_seconds': wall_seconds,
              'estimated_raw': rates.to_mapping()}
    if args.output:
        write_json(report, args.output)

    if args.format == 'json':
        _emit_json(report)
    else:
        print(f"{spec.label or 'spec'} on {args.workers} workers ({args.transport}): {wall_seconds:.3f} s")
        for name, value in counters.to_dict().items():
            print(f'  {name}: {value}')
        print(f'  estimated sllc {rates.sllc:.4g} MR/s, dram {rates.dram:.4g} MR/s, net {rates.net:.4g} MB/s')
    return 0


def _runner(args, maxima):
    if args.runner == 'oracle':
        hidden = args.hidden or PAPER_COEFFICIENTS
        return OracleRunner(ContentionOracle(*hidden, sigma=args.sigma, seed=args.seed))
    if args.runner == 'stressor':
        return StressorRunner(args.workers, args.transport, maxima, args.decimals,
                              get_settings().cache_size_bytes)
    if not args.measurements:
        raise ConfigError('the measurements runner needs --measurements')
    return MeasurementRunner.from_csv(args.measurements)


def _dataset_inputs(args, plan, calibration_id):
    """Everything a cached dataset depends on."""
    inputs = {'plan': plan, 'runner': args.runner, 'calibration_id': calibration_id}
    if args.runner == 'oracle':
        inputs.update(hidden=tuple(args.hidden or PAPER_COEFFICIENTS), sigma=args.sigma, seed=args.seed)
    elif args.runner == 'stressor':
        inputs.update(workers=args.workers, transport=args.transport, decimals=args.decimals,
                      cache_size_bytes=get_settings().cache_size_bytes)
    else:
        inputs.update(measurements=os.path.abspath(args.measurements) if args.measurements else None)
    return inputs


def cmd_dataset(args):
    synthetic = args.runner == 'stressor'
    maxima, calibration_id = _maxima(args, required=False)
    plan = load_plan(args.plan, synthetic=synthetic, maxima=maxima, decimals=args.decimals)

    inputs = _dataset_inputs(args, plan, calibration_id)
    dataset = None
    if args.cache_prefix:
        cached = load_experiment_data(args.cache_prefix)
        if cached and cached.get('inputs') == inputs:
            dataset = cached['dataset']
        elif cached:
            logger.info('cached dataset %s was built from other inputs, rebuilding', args.cache_prefix)
    if dataset is None:
        dataset = build_dataset(plan, _runner(args, maxima), calibration_id,
                                progress=not args.no_progress)
        if args.cache_prefix:
            save_experiment_data(args.cache_prefix, {'dataset': dataset, 'inputs': inputs})

    if args.output:
        save_dataset(dataset, args.output)
    else:
        dataset_frame(dataset).to_csv(sys.stdout, index=False)
    failed = sum(r.failed for r in dataset.rows)
    logger.info('%d rows, %d failed', len(dataset), failed)
    return 0


def cmd_histogram(args):
    bins = histogram(load_dataset(args.dataset), args.bin_width)
    if args.output:
        save_histogram(bins, args.output)
    if args.format == 'csv':
        print('bin_low,bin_high,count')
        for b in bins:
            print(f'{b.low!r},{b.high!r},{b.count}')
    elif args.format == 'json':
        _emit_json([{'bin_low': b.low, 'bin_high': b.high, 'count': b.count} for b in bins])
    else:
        for b in bins:
            print(f'[{_percent(b.low):>8}, {_percent(b.high):>8})  {b.count:4d}  {"#" * b.count}')
    return 0


def cmd_analyze(args):
    summary = analyze_dataset(load_dataset(args.dataset))
    if args.format == 'json':
        _emit_json(asdict(summary))
    else:
        print(f'{summary.n} rows, interference {_percent(summary.minimum)} .. {_percent(summary.maximum)}')
        print(f'  Pearson r (accumulated SLLC, interference) {summary.sllc_correlation:.4f}')
        print(f'  coefficient of variation {summary.coefficient_of_variation:.4f}')
        print(f'  below 50%: {_percent(summary.share_low)}, 50%-100%: {_percent(summary.share_medium)}, '
              f'above 100%: {_percent(summary.share_high)}')
    return 0


def cmd_plan(args):
    profiles = _load_profiles(args, args.profiles)
    recommendation = recommend(profiles, args.slots, _model(args.model), args.strategy)
    if args.format == 'json':
        _emit_json(recommendation.to_dict())
    else:
        print(f'{recommendation.strategy} strategy, {recommendation.assignments_evaluated} assignments compared')
        print('candidate groups:')
        for c in recommendation.candidates:
            print(f'  {c.name:<40} {_percent(c.predicted)}')
        print(f'chosen assignment (total {_percent(recommendation.total)}):')
        for c in recommendation.assignment:
            flag = '  (extrapolated)' if c.extrapolated else ''
            print(f'  {c.name:<40} {_percent(c.predicted)}{flag}')
    return 0


def cmd_presets(args):
    specs = [s.to_dict() for s in PRESETS.values()]
    if args.format == 'json':
        _emit_json(specs)
    else:
        print(f"{'label':>6} {'omega':>6} {'alpha':>7} {'beta':>7} {'gamma':>6} {'delta':>6} {'theta':>6} {'lambda':>7}")
        for s in specs:
            print(f"{s['label']:>6} {s['omega']:>6} {s['alpha']:>7} {s['beta']:>7} {s['gamma']:>6} "
                  f"{s['delta']:>6} {s['theta']:>6} {s['lambda_bytes']:>7}")
    return 0


def _finite_float(value):
    number = float(value)
    if not math.isfinite(number):
        raise argparse.ArgumentTypeError(f'{value} is not finite')
    return number


def build_parser():
    parser = argparse.ArgumentParser(prog='interference', description='Cross-application interference toolkit')
    parser.add_argument('--verbose', action='store_true', help='log debug messages')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--calibration', help='calibration file (default: $INTERFERENCE_CALIBRATION)')
    common.add_argument('--decimals', type=_decimals, default=None, choices=[1, 2, None],
                        help='rounding of normalized scores: 1, 2 or none')

    def formats(sub, choices=('table', 'json')):
        sub.add_argument('--format', choices=choices, default='table')

    commands = parser.add_subparsers(dest='command', required=True)

    sub = commands.add_parser('normalize', parents=[common], help='convert raw profiles into scores')
    sub.add_argument('profiles', nargs='+')
    sub.add_argument('--derive-calibration', action='store_true',
                     help='use the highest rates of the given profiles as the calibration')
    sub.add_argument('--save-calibration', help='write the derived calibration to this file')
    sub.add_argument('--output-dir', help='write the normalized profiles into this directory')
    formats(sub)
    sub.set_defaults(handler=cmd_normalize)

    sub = commands.add_parser('predict', parents=[common], help='predict the interference of a co-location')
    sub.add_argument('profiles', nargs='*', help='profile files or bundled profile labels')
    sub.add_argument('--model', default=PAPER_DEFAULT, help="model file or 'paper-default'")
    sub.add_argument('--from-report', help='recompute a JSON report written by predict')
    formats(sub)
    sub.set_defaults(handler=cmd_predict)

    sub = commands.add_parser('fit', help='fit the model to a dataset')
    sub.add_argument('dataset')
    sub.add_argument('--output', help='model file to write')
    sub.add_argument('--floor-negative', action='store_true', help='floor negative interference at 0')
    sub.add_argument('--include-failed', action='store_true', help='keep failed rows that carry a value')
    sub.add_argument('--alpha', type=float, default=0.05, help='significance level')
    formats(sub)
    sub.set_defaults(handler=cmd_fit)

    sub = commands.add_parser('stress', help='run a synthetic application')
    sub.add_argument('spec', nargs='?', help='stressor spec file')
    sub.add_argument('--preset', choices=list(PRESETS))
    sub.add_argument('--workers', type=int, default=1)
    sub.add_argument('--transport', choices=list(TRANSPORTS), default='inproc')
    sub.add_argument('--cache-size-bytes', type=int, help='cache size of the DRAM attribution')
    sub.add_argument('--output', help='counters report file')
    formats(sub)
    sub.set_defaults(handler=cmd_stress)

    sub = commands.add_parser('dataset', parents=[common], help='build an interference dataset')
    sub.add_argument('plan')
    sub.add_argument('--runner', choices=['oracle', 'stressor', 'measurements'], default='oracle')
    sub.add_argument('--measurements', help='CSV of measured concurrent runtimes')
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--sigma', type=_finite_float, default=0.0, help='oracle noise')
    sub.add_argument('--hidden', type=_finite_float, nargs=3, metavar=('C1', 'C2', 'C3'),
                     help='oracle coefficients (default: the published ones)')
    sub.add_argument('--workers', type=int, default=1)
    sub.add_argument('--transport', choices=list(TRANSPORTS), default='inproc')
    sub.add_argument('--cache-prefix', help='reuse or store the dataset in the experiment cache')
    sub.add_argument('--no-progress', action='store_true')
    sub.add_argument('--output', help='dataset CSV (default: stdout)')
    sub.set_defaults(handler=cmd_dataset)

    sub = commands.add_parser('histogram', help='count interference levels per bin')
    sub.add_argument('dataset')
    sub.add_argument('--bin-width', type=_finite_float, default=0.1)
    sub.add_argument('--output', help='histogram CSV to write')
    formats(sub, ('table', 'json', 'csv'))
    sub.set_defaults(handler=cmd_histogram)

    sub = commands.add_parser('analyze', help='describe a dataset')
    sub.add_argument('dataset')
    formats(sub)
    sub.set_defaults(handler=cmd_analyze)

    sub = commands.add_parser('plan', parents=[common], help='group applications onto hosts')
    sub.add_argument('profiles', nargs='+', help='profile files or bundled profile labels')
    sub.add_argument('--slots', type=int, required=True, help='applications per host')
    sub.add_argument('--model', default=PAPER_DEFAULT)
    sub.add_argument('--strategy', choices=[AUTO, EXHAUSTIVE, GREEDY], default=AUTO)
    formats(sub)
    sub.set_defaults(handler=cmd_plan)

    sub = commands.add_parser('presets', help='list the synthetic application presets')
    formats(sub)
    sub.set_defaults(handler=cmd_presets)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)
    try:
        return args.handler(args)
    except InterferenceError as e:
        message = ' '.join(str(e).split())
        print(f'error: {e.error_class}: {message}', file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

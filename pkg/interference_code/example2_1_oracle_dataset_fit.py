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

import numpy as np

from tqdm import tqdm

from helpers.dataset import PAIRWISE_ALL, CoExecutionPlan, ContentionOracle, OracleRunner, build_dataset
from helpers.helper_functions import load_experiment_data, save_experiment_data
from helpers.model import PAPER_COEFFICIENTS
from helpers.paper_plotting_functions import plot_interference_histogram, plot_net_correlation, plot_sllc_correlation
from helpers.reference_data import synthetic_score_profiles
from helpers.regression import analyze_dataset, fit, residual_checks, significance


def make_dataset(param, seed):
    """Builds the 171 pairwise co-executions of the synthetic applications against the oracle.

    Args:
        param (dict): parameters with keys "hidden" for the oracle coefficients and "sigma"
                      for its noise.
        seed (int): oracle seed

    Returns:
        InterferenceDataset: the dataset
    """
    oracle = ContentionOracle(*param['hidden'], sigma=param['sigma'], seed=seed)
    plan = CoExecutionPlan(tuple(synthetic_score_profiles().values()), PAIRWISE_ALL)
    return build_dataset(plan, OracleRunner(oracle), calibration_id='testbed', progress=False)


def run_experiment(param):
    """Fits the model to one dataset per seed.

    Args:
        param (dict): parameters with keys "hidden", "sigma" and "num_seeds".

    Returns:
        dict: first dataset, fitted coefficients and whether every residual check passed
    """
    coefficients, passed = [], []
    first = None
    for seed in tqdm(range(param['num_seeds']), total=param['num_seeds']):
        dataset = make_dataset(param, seed)
        if first is None:
            first = dataset
        model = fit(dataset)
        coefficients.append(model.coefficients)
        passed.append(residual_checks(model.diagnostics).all_passed)
    return {'dataset': first, 'coefficients': np.array(coefficients), 'passed': np.array(passed)}


def main():
    """Main function to run example
    """
    param = {
        'hidden': PAPER_COEFFICIENTS,
        'sigma': 0.15,
        'num_seeds': 100,
    }
    prefix = f"example2_1_sigma{param['sigma']}_n{param['num_seeds']}"

    data_dict = load_experiment_data(prefix)
    if data_dict is None:
        print("Running experiment")
        data_dict = run_experiment(param)
        save_experiment_data(prefix, data_dict)

    dataset = data_dict['dataset']
    model = fit(dataset)
    report = significance(model.diagnostics)
    print(f'\nI = {model.c1:.4f} T1 + {model.c2:.4f} T2 + {model.c3:.4f} T3  '
          f'(hidden {param["hidden"]}), R2 = {model.diagnostics.r2:.4f}')
    for test in report.coefficients:
        print(f'  {test.name}: p = {test.pvalue:.3g}')
    for check in residual_checks(model.diagnostics).checks:
        print(f"  {check.name}: p = {check.pvalue:.3g} {'passed' if check.passed else 'FAILED'}")

    summary = analyze_dataset(dataset)
    print(f'\nPearson r (T_sllc, I) = {summary.sllc_correlation:.3f}, '
          f'{100 * summary.share_low:.0f}% of the co-executions below 50%')

    errors = np.abs(data_dict['coefficients'] - np.array(param['hidden']))
    print(f"\nOver {param['num_seeds']} seeds: mean |c - h| = {errors.mean(axis=0).round(4)}, "
          f"residual checks passed for {100 * data_dict['passed'].mean():.0f}% of the fits")

    plot_interference_histogram(dataset=dataset, bin_width=0.1)
    plot_sllc_correlation(dataset=dataset)
    plot_net_correlation(dataset=dataset)


if __name__ == "__main__":
    main()

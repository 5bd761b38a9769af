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

from helpers.core import CoLocation
from helpers.model import InterferenceModel, evaluate_predictions, is_extrapolation, predict_colocation
from helpers.paper_plotting_functions import (plot_predicted_levels, plot_predicted_vs_observed,
                                              plot_prediction_errors)
from helpers.planner import recommend
from helpers.reference_data import (EVALUATION_OBSERVED, EVALUATION_UNREPRODUCIBLE, evaluation_schemes,
                                    evaluation_score_profiles)


def main():
    """Main function to run example
    """
    model = InterferenceModel.paper_default()
    profiles = evaluation_score_profiles()

    campaign = {}
    for scheme, groups in evaluation_schemes().items():
        levels = {}
        for labels in groups:
            coloc = CoLocation(tuple(profiles[label] for label in labels))
            levels[coloc.name] = predict_colocation(model, coloc)
        lowest, highest = min(levels, key=levels.get), max(levels, key=levels.get)
        print(f'scheme {scheme}: {len(levels)} co-locations, predicted '
              f'{100 * levels[lowest]:.2f}% ({lowest}) to {100 * levels[highest]:.2f}% ({highest})')
        campaign.update(levels)
    print(f'campaign: {len(campaign)} co-locations, predicted '
          f'{100 * min(campaign.values()):.2f}% to {100 * max(campaign.values()):.2f}%\n')

    names, predicted, observed = [], [], []
    print(f"{'co-location':>40} {'predicted':>10} {'observed':>10}")
    for labels, (measured, _) in EVALUATION_OBSERVED.items():
        coloc = CoLocation(tuple(profiles[label] for label in labels))
        prediction = predict_colocation(model, coloc)
        flag = ' *' if labels in EVALUATION_UNREPRODUCIBLE else ''
        flag += ' (extrapolated)' if is_extrapolation(prediction) else ''
        print(f'{coloc.name:>40} {100 * prediction:9.2f}% {100 * measured:9.2f}%{flag}')
        names.append(labels[0].split('.')[0])
        predicted.append(prediction)
        observed.append(measured)
    print('* the rounded published scores do not reproduce the published prediction')

    summary = evaluate_predictions(zip(predicted, observed))
    print(f"\nmean error {100 * summary['mean_error']:.2f}%, max error {100 * summary['max_error']:.2f}%, "
          f"{100 * summary['share_under_threshold']:.0f}% of the predictions within 10%")

    # two instances each of the heaviest and the lightest application, two per host
    hosts = [profiles[label] for label in ('PTRANS.I1.P6', 'DGEMM.I1.P6') * 2]
    plan = recommend(hosts, 2, model)
    print(f'\nPlacement ({plan.strategy}): total predicted interference {100 * plan.total:.2f}%')
    for group in plan.assignment:
        print(f'  {group.name}: {100 * group.predicted:.2f}%')

    plot_predicted_vs_observed(predicted=predicted, observed=observed, labels=names)
    plot_prediction_errors(predicted=predicted, observed=observed)
    plot_predicted_levels(predicted=list(campaign.values()))


if __name__ == "__main__":
    main()

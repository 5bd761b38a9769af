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

import matplotlib
matplotlib.use('Agg')

import pytest
from matplotlib import pyplot as plt

from conftest import oracle_dataset
from helpers import paper_plotting_functions
from helpers.core import CoLocation
from helpers.model import InterferenceModel, predict_colocation
from helpers.paper_plotting_functions import (plot_interference_histogram, plot_net_correlation,
                                              plot_predicted_levels, plot_predicted_vs_observed,
                                              plot_prediction_errors, plot_sllc_correlation)
from helpers.reference_data import evaluation_schemes, evaluation_score_profiles


@pytest.fixture
def shown(monkeypatch):
    figures = []
    monkeypatch.setattr(paper_plotting_functions, 'MAKE_TIKZ_PLOTS', False)
    monkeypatch.setattr(plt, 'show', lambda: figures.append(plt.gcf()))
    yield figures
    plt.close('all')


def test_dataset_plots(shown):
    dataset = oracle_dataset(sigma=0.1, seed=2)
    plot_interference_histogram(dataset=dataset, bin_width=0.1)
    plot_sllc_correlation(dataset=dataset)
    assert len(shown) == 2
    assert shown[1].axes[0].get_title().startswith('Pearson r = ')


def test_prediction_plots(shown):
    predicted, observed = [0.3997, 0.0250, 0.4045], [0.4450, 0.0779, 0.4931]
    plot_predicted_vs_observed(predicted=predicted, observed=observed, labels=['PTRANS', 'DGEMM', 'FFT'])
    plot_prediction_errors(predicted=predicted, observed=observed)
    assert len(shown) == 2
    assert shown[1].axes[0].get_title() == 'Mean error 6.23%'


def test_net_correlation_plot(shown):
    plot_net_correlation(dataset=oracle_dataset())
    assert shown[0].axes[0].get_xlabel() == '$T_{NET}$'
    assert shown[0].axes[0].get_title().startswith('Pearson r = ')


def test_campaign_prediction_histogram(shown):
    profiles = evaluation_score_profiles()
    model = InterferenceModel.paper_default()
    predicted = [predict_colocation(model, CoLocation(tuple(profiles[label] for label in group)))
                 for groups in evaluation_schemes().values() for group in groups]
    plot_predicted_levels(predicted=predicted)
    assert shown[0].axes[0].get_title() == '90 co-locations, 1.51% to 42.25%'

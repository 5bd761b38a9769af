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
import tikzplotlib

from matplotlib import pyplot as plt

from helpers.dataset import histogram
from helpers.model import prediction_error
from helpers.regression import pearson


extra_code = '\\usepackage{sfmath,siunitx}\\usepackage{mathspec}\\setmainfont{TeX Gyre Heros}\\setmathfont(Digits,Latin,Greek){TeX Gyre Heros}'

tikz_axis_parameters = [
    'axis line style=thick',
    'scale only axis',
    'axis background/.style={fill=white}',
    'every axis plot post/.append style={fill opacity=0.3}',
    'line join=bevel',
]

PATH_TO_PAPER_DIR = "../paper_materials/"
MAKE_TIKZ_PLOTS = False


def _finish(fn):
    """Shows the current figure, or writes it as standalone tikz under the paper directory."""
    if MAKE_TIKZ_PLOTS:
        code = tikzplotlib.get_tikz_code(
            standalone=True,
            axis_width='5cm', axis_height='5cm',
            float_format='.5g',
            extra_axis_parameters=tikz_axis_parameters,
        )
        code = code.replace('\\documentclass{standalone}',
                            '\\documentclass{standalone}\n' + extra_code)

        with open(f'{PATH_TO_PAPER_DIR}/tex/{fn}.tex', "w") as f:
            f.write(code)
    else:
        plt.show()


def plot_interference_histogram(*, dataset, bin_width=0.1, fn='interference_histogram'):
    """Histogram of the observed interference levels of a dataset.

    Args:
        dataset (InterferenceDataset): dataset to plot
        bin_width (float): width of the bins, as a fraction
        fn (str): file name of the tikz export
    """
    plt.clf()

    bins = histogram(dataset, bin_width)
    if bins:
        plt.bar([100 * b.low for b in bins], [b.count for b in bins],
                width=100 * bin_width, align='edge', alpha=0.5, edgecolor='k')
        plt.axvline(100 * 0.5, color='k', linestyle=':')
    plt.title('Interference levels')
    plt.xlabel('Interference level (%)')
    plt.ylabel('Occurrences')

    _finish(fn)


def _plot_accumulated_correlation(dataset, resource, axis_label, fn):
    plt.clf()

    rows = dataset.usable_rows()
    accumulated = np.array([r.features.accumulated[resource] for r in rows])
    observed = np.array([r.observed for r in rows])
    plt.plot(accumulated, 100 * observed, 'o', alpha=0.5)
    plt.title(f'Pearson r = {pearson(accumulated, observed):.2f}')
    plt.xlabel(axis_label)
    plt.ylabel('Interference level (%)')

    _finish(fn)


def plot_sllc_correlation(*, dataset, fn='sllc_correlation'):
    """Accumulated SLLC score against the observed interference level.

    Args:
        dataset (InterferenceDataset): dataset whose rows carry accumulated scores
        fn (str): file name of the tikz export
    """
    _plot_accumulated_correlation(dataset, 0, r'$T_{SLLC}$', fn)


def plot_net_correlation(*, dataset, fn='net_correlation'):
    """Accumulated virtual network score against the observed interference level."""
    _plot_accumulated_correlation(dataset, 2, r'$T_{NET}$', fn)


def plot_predicted_vs_observed(*, predicted, observed, labels=None, fn='predicted_vs_observed'):
    """Scatter of predicted against observed interference, with the identity line.

    Args:
        predicted (Sequence[float]): predicted interference levels
        observed (Sequence[float]): observed interference levels
        labels (Sequence[str], optional): co-location names annotated next to the points
        fn (str): file name of the tikz export
    """
    plt.clf()

    P = 100 * np.asarray(predicted, dtype=float)
    O = 100 * np.asarray(observed, dtype=float)
    top = max(P.max(initial=0), O.max(initial=0)) * 1.05 + 1
    plt.plot([0, top], [0, top], 'k:')
    plt.plot(O, P, 'o')
    for name, x, y in zip(labels or (), O, P):
        plt.annotate(name, (x, y), fontsize=6)
    plt.xlim(0, top)
    plt.ylim(0, top)
    plt.xlabel('Observed interference (%)')
    plt.ylabel('Predicted interference (%)')

    _finish(fn)


def plot_prediction_errors(*, predicted, observed, bin_width=0.02, fn='prediction_errors'):
    """Histogram of the absolute prediction errors.

    Args:
        predicted (Sequence[float]): predicted interference levels
        observed (Sequence[float]): observed interference levels
        bin_width (float): width of the error bins, as a fraction
        fn (str): file name of the tikz export
    """
    plt.clf()

    errors = np.array([prediction_error(p, o) for p, o in zip(predicted, observed)])
    top = errors.max(initial=0) + bin_width
    plt.hist(100 * errors, bins=100 * np.arange(0, top + bin_width, bin_width), alpha=0.5)
    plt.title(f'Mean error {100 * errors.mean():.2f}%' if errors.size else 'Prediction errors')
    plt.xlabel('Absolute error (%)')
    plt.ylabel('Co-locations')

    _finish(fn)


def plot_predicted_levels(*, predicted, bin_width=0.05, fn='predicted_levels'):
    """Histogram of predicted interference levels, e.g. over a whole co-location campaign.

    Args:
        predicted (Sequence[float]): predicted interference levels
        bin_width (float): width of the bins, as a fraction
        fn (str): file name of the tikz export
    """
    plt.clf()

    P = np.asarray(predicted, dtype=float)
    low = np.floor(P.min(initial=0) / bin_width) * bin_width
    edges = np.arange(low, P.max(initial=0) + 2 * bin_width, bin_width)
    plt.hist(100 * P, bins=100 * edges, alpha=0.5, edgecolor='k')
    if P.size:
        plt.title(f'{P.size} co-locations, {100 * P.min():.2f}% to {100 * P.max():.2f}%')
    plt.xlabel('Predicted interference (%)')
    plt.ylabel('Co-locations')

    _finish(fn)

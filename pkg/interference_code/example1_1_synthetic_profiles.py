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

import time
from dataclasses import replace

from tqdm import tqdm

from helpers.core import ApplicationProfile, ResourceVector, access_level, calibrate_maxima, normalize_profile
from helpers.helper_functions import load_experiment_data, save_experiment_data
from helpers.stressor import PRESETS, estimate_profile, run
from helpers.transports import make_transport


def scaled_preset(spec, param):
    """Shrinks a preset so the whole workload design runs in minutes on a laptop.

    Args:
        spec (SyntheticAppSpec): published preset
        param (dict): parameters with keys "omega" for the main loop iterations and
                      "scale" dividing the computation and communication iterations.

    Returns:
        SyntheticAppSpec: scaled preset
    """
    return replace(spec, omega=param['omega'], alpha=max(1, spec.alpha // param['scale']),
                   beta=max(1, spec.beta // param['scale']))


def profile_presets(param):
    """Runs every preset in isolation and estimates its raw access rates.

    Args:
        param (dict): parameters with keys "workers", "transport", "omega" and "scale".

    Returns:
        dict: raw profiles and counters per preset label
    """
    profiles, counters = {}, {}
    for label, spec in tqdm(PRESETS.items(), total=len(PRESETS)):
        spec = scaled_preset(spec, param)
        with make_transport(param['transport'], param['workers']) as transport:
            start = time.perf_counter()
            counters[label] = run(spec, param['workers'], transport)
            seconds = time.perf_counter() - start
        rates = estimate_profile(counters[label], seconds)
        zeros = (ResourceVector(),) * (param['workers'] - 1)
        profiles[label] = ApplicationProfile(label, (rates,) + zeros, param['workers'], seconds)
    return {'profiles': profiles, 'counters': counters}


def main():
    """Main function to run example
    """
    param = {
        'workers': 2,
        'transport': 'loopback',
        'omega': 1,
        'scale': 50,
    }
    prefix = f"example1_1_w{param['workers']}_s{param['scale']}_{param['transport']}"

    data_dict = load_experiment_data(prefix)
    if data_dict is None:
        print("Running experiment")
        data_dict = profile_presets(param)
        save_experiment_data(prefix, data_dict)

    raw = data_dict['profiles']
    # no preset streams through DRAM on a cache of the testbed's size
    maxima = calibrate_maxima(raw.values(), allow_unused=True)
    print(f'\nCalibration: sllc {maxima.max_sllc:.4g} MR/s, dram {maxima.max_dram:.4g} MR/s, '
          f'net {maxima.max_net:.4g} MB/s\n')
    print(f"{'label':>6} {'sllc':>6} {'dram':>6} {'net':>6}   levels")
    for label, profile in raw.items():
        scores = normalize_profile(profile, maxima, decimals=1).access
        levels = '/'.join(access_level(s) for s in scores.as_array())
        print(f'{label:>6} {scores.sllc:6.1f} {scores.dram:6.1f} {scores.net:6.1f}   {levels}')


if __name__ == "__main__":
    main()

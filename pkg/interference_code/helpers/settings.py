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
from pathlib import Path
from typing import Optional

from pydantic import BaseSettings, Field


DEFAULT_CACHE_SIZE_BYTES = 12 * 1024 * 1024  # 12 MB SLLC of the reference testbed


class Settings(BaseSettings):
    """Environment configuration, read from ``INTERFERENCE_*`` variables.

    Attributes:
        calibration (Path, optional): default calibration file used when ``--calibration`` is absent
        cache_dir (Path): directory of the lzma-pickled experiment cache
        cache_size_bytes (int): cache capacity used by the stressor's DRAM attribution proxy
    """

    calibration: Optional[Path] = None
    cache_dir: Path = Path('cached_experiment_data')
    cache_size_bytes: int = Field(DEFAULT_CACHE_SIZE_BYTES, gt=0)

    class Config:
        env_prefix = 'INTERFERENCE_'


def get_settings():
    """Reads the settings from the current environment.

    Returns:
        Settings: current settings
    """
    return Settings()

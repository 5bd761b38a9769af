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
"""Exceptions raised by the interference toolkit.

Every error carries a stable ``error_class`` string and an ``exit_code`` so that the
command-line entry point can report failures as a single machine-parsable line.
"""


class InterferenceError(Exception):
    """Base class of all toolkit errors."""

    error_class = 'interference-error'
    exit_code = 1


class MalformedProfileError(InterferenceError, ValueError):
    error_class = 'malformed-profile'
    exit_code = 2


class CalibrationError(InterferenceError, ValueError):
    error_class = 'calibration'
    exit_code = 3


class UnitMismatchError(InterferenceError, ValueError):
    error_class = 'unit-mismatch'
    exit_code = 4


class DomainError(InterferenceError, ValueError):
    error_class = 'domain'
    exit_code = 5


class InsufficientDataError(InterferenceError, ValueError):
    error_class = 'insufficient-data'
    exit_code = 6


class CollinearityError(InterferenceError, ValueError):
    """Raised when the design matrix of a fit is rank deficient or ill conditioned.

    Args:
        message (str): human readable description
        columns (list[str]): names of the columns taking part in the linear dependency
    """

    error_class = 'collinearity'
    exit_code = 7

    def __init__(self, message, columns=()):
        self.columns = list(columns)
        if self.columns:
            message = f"{message} (dependent columns: {', '.join(self.columns)})"
        super().__init__(message)


class DegreesOfFreedomError(InterferenceError, ValueError):
    error_class = 'degrees-of-freedom'
    exit_code = 8


class UndefinedCorrelationError(InterferenceError, ValueError):
    error_class = 'undefined-correlation'
    exit_code = 9


class ConfigError(InterferenceError, ValueError):
    error_class = 'config'
    exit_code = 10


class UnknownLabelError(InterferenceError, KeyError):
    error_class = 'unknown-label'
    exit_code = 11

    def __str__(self):
        return str(self.args[0]) if self.args else self.error_class


class CommunicationError(InterferenceError, RuntimeError):
    """Raised when an all-to-all exchange fails.

    Args:
        message (str): human readable description
        iteration (int): communication phase iteration that failed
        aborted (bool): the exchange was cut short because another worker failed
    """

    error_class = 'communication'
    exit_code = 12

    def __init__(self, message, iteration=None, aborted=False):
        self.iteration = iteration
        self.aborted = aborted
        if iteration is not None:
            message = f'communication phase iteration {iteration}: {message}'
        super().__init__(message)


class CoExecutionError(InterferenceError, RuntimeError):
    """Raised when a member of a co-execution fails.

    Args:
        message (str): human readable description
        label (str): label of the failing member
    """

    error_class = 'co-execution'
    exit_code = 13

    def __init__(self, message, label=None):
        self.label = label
        if label is not None:
            message = f'{label}: {message}'
        super().__init__(message)


class EmptyPlanError(InterferenceError, ValueError):
    error_class = 'empty-plan'
    exit_code = 14


class DatasetLoadError(InterferenceError, ValueError):
    error_class = 'dataset-load'
    exit_code = 15

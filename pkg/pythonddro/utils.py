"""
Shared array and file helpers.
"""

import os
from pathlib import Path

import numpy as np

from .debug import Debug
from .errors import DimensionMismatch

class FileUtils:
    @classmethod
    def is_file(cls, path):
        try:
            is_file = Path(path).is_file()
        except (TypeError, OSError):
            is_file = False

        return is_file

    @classmethod
    def file_to_string(cls, path):
        try:
            with open(path, "r", encoding = "utf-8") as file:
                return file.read()
        except FileNotFoundError:
            Debug.log_error(f"unable to find {path}")
            raise
        except OSError:
            Debug.log_error(f"failed to read {path}")
            raise

    @classmethod
    def ensure_directory(cls, path):
        os.makedirs(path, exist_ok = True)
        return path

class ArrayUtils:
    @classmethod
    def as_vector(cls, values, name = "vector") -> np.ndarray:
        vector = np.array(values, dtype = float).reshape(-1)

        if vector.size == 0:
            raise ValueError(f"{name} must not be empty")
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"{name} must contain only finite values")

        return vector

    @classmethod
    def frozen(cls, array) -> np.ndarray:
        # read-only copy so shared instances cannot be mutated
        array = np.array(array, dtype = float)
        array.setflags(write = False)
        return array

    @classmethod
    def check_length(cls, vector, expected, what = "vector"):
        if len(vector) != expected:
            raise DimensionMismatch(f"{what} has {len(vector)} entries, expected {expected}")

    @classmethod
    def expectation(cls, values, weights) -> float:
        return float(np.dot(weights, values))

    @classmethod
    def mean_std(cls, values, weights):
        """ Mean and standard deviation under weights, two-pass """
        mean = float(np.dot(weights, values))
        variance = float(np.dot(weights, (values - mean) ** 2))
        return mean, float(np.sqrt(max(variance, 0.0)))

class EnvUtils:
    @classmethod
    def thread_count(cls, requested = None) -> int:
        """ Worker cap: the requested count, else DDRO_THREADS, else the core count """
        if requested is None:
            requested = os.environ.get("DDRO_THREADS")
        if requested in (None, ""):
            return os.cpu_count() or 1

        try:
            count = int(requested)
        except (TypeError, ValueError):
            Debug.log_warning(f"ignoring thread count {requested!r}, expected an integer")
            return os.cpu_count() or 1

        return max(count, 1)

"""File formats used by the command line tools."""

from ..dataset import read_dataset_csv, write_dataset_csv
from ..draws import read_draws, write_draws

__all__ = ["read_draws", "write_draws", "read_dataset_csv", "write_dataset_csv"]

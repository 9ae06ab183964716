# util.py

import os
import csv
import json
import hashlib
import logging

import numpy as np

from errors import MatrixFileError

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
UINT64_MASK = (1 << 64) - 1

###############################################################################
# 1. Basic Utility Functions
###############################################################################

def resolve_path(*args):
    """
    Resolves a path relative to the current file's directory.
    """
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), *args)

def configure_logging(level="INFO"):
    """
    Configures the root logger once for a command-line run.
    Records go to stderr so stdout only carries command results.

    Args:
        level (str or int): Logging level name or number.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)

def derive_seed(seed, *parts):
    """
    Derives a 64-bit seed from a base seed and a tuple of labels.

    The labels are hashed independently of the base seed, so adding a new
    label combination never shifts the seeds of existing ones.

    Args:
        seed (int): Base seed.
        *parts: Labels (identity id, function label, dim, trial index, ...).

    Returns:
        int: seed XOR blake2b-64 of the joined labels.
    """
    key = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return (int(seed) & UINT64_MASK) ^ int.from_bytes(digest, "little")

###############################################################################
# 2. Matrix JSON
###############################################################################

def _reject_constant(name):
    raise ValueError(f"non-finite constant {name} is not allowed")

def read_matrix_json(path):
    """
    Reads a {"dim": n, "rows": [[...], ...]} file.

    Args:
        path (str): File to read.

    Returns:
        np.ndarray: The (n, n) float matrix. Symmetry and definiteness are
        left to spd_core.

    Raises:
        MatrixFileError: When the file is missing, not JSON, or not a finite n×n table.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f, parse_constant=_reject_constant)
    except FileNotFoundError:
        raise MatrixFileError(path, "file not found")
    except (ValueError, OSError) as e:
        raise MatrixFileError(path, f"cannot parse: {e}")

    if not isinstance(data, dict) or "dim" not in data or "rows" not in data:
        raise MatrixFileError(path, 'expected an object with "dim" and "rows"')

    dim = data["dim"]
    rows = data["rows"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise MatrixFileError(path, f'"dim" must be a positive integer, got {dim!r}')
    if not isinstance(rows, list) or len(rows) != dim:
        raise MatrixFileError(path, f'"rows" must hold {dim} rows')

    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise MatrixFileError(path, f"row {i} must hold {dim} numbers")
        for value in row:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise MatrixFileError(path, f"row {i} holds a non-numeric entry {value!r}")

    entries = np.array(rows, dtype=float)
    if not np.all(np.isfinite(entries)):
        raise MatrixFileError(path, "entries must be finite")
    return entries

def write_matrix_json(path, entries):
    """
    Writes a matrix in the {"dim", "rows"} format with round-trip float reprs.
    """
    entries = np.asarray(entries, dtype=float)
    payload = {
        "dim": int(entries.shape[0]),
        "rows": [[float(x) for x in row] for row in entries],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, allow_nan=False)
        f.write("\n")
    logging.info(f"Wrote {entries.shape[0]}x{entries.shape[0]} matrix to {path}")

###############################################################################
# 3. CSV Reports
###############################################################################

def format_number(value):
    """
    17 significant digits, 'inf'/'nan' for non-finite values.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)

def write_csv(path, header, rows):
    """
    Writes rows with a header; numbers go through format_number.

    Args:
        path (str): Output file.
        header (list[str]): Column names.
        rows (iterable[tuple]): Row values (str, bool, int or float).
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
            count += 1
    logging.info(f"Wrote {count} rows to {path}")
    return count

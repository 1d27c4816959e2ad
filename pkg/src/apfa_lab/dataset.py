"""Categorical longitudinal datasets and their CSV representation.

CSV layout: comma separated, one observation per line, categories coded as
positive integers.  Lines starting with ``#`` are comments, except the
directive ``# alphabets: 2,2,3`` which declares the alphabet sizes of the
outcome columns (otherwise they are inferred as ``1..max`` per column).  An
optional header row names the columns; the covariate column is picked by name
or by zero-based index.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .errors import DataError

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True, eq=False)
class Dataset:
    rows: np.ndarray
    alphabets: tuple[int, ...]
    covariate: np.ndarray | None = None
    covariate_kind: str | None = None
    covariate_name: str | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(self.alphabets))
        if rows.ndim != 2:
            raise DataError("rows must form a two-dimensional array")
        alphabets = tuple(int(k) for k in self.alphabets)
        if rows.shape[1] != len(alphabets):
            raise DataError(f"rows have {rows.shape[1]} columns but {len(alphabets)} alphabets were given")
        if not alphabets:
            raise DataError("a dataset needs at least one outcome column")
        if rows.size:
            bad = (rows < 1) | (rows > np.asarray(alphabets))
            if bad.any():
                r, c = np.argwhere(bad)[0]
                raise DataError(f"value {rows[r, c]} outside 1..{alphabets[c]} in column {c + 1}", row=int(r) + 1)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "alphabets", alphabets)
        if self.covariate is not None:
            kind = self.covariate_kind or CATEGORICAL
            if kind not in (CATEGORICAL, CONTINUOUS):
                raise DataError(f"unknown covariate kind {kind!r}")
            cov = np.asarray(self.covariate, dtype=float if kind == CONTINUOUS else np.int64)
            if cov.shape != (rows.shape[0],):
                raise DataError("covariate length differs from the number of rows")
            cov.setflags(write=False)
            object.__setattr__(self, "covariate", cov)
            object.__setattr__(self, "covariate_kind", kind)

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def p(self) -> int:
        return len(self.alphabets)

    def __len__(self) -> int:
        return self.n

    def with_covariate(self, values, kind: str = CATEGORICAL, name: str | None = None) -> "Dataset":
        return Dataset(self.rows, self.alphabets, values, kind, name, self.names)

    def without_covariate(self) -> "Dataset":
        return Dataset(self.rows, self.alphabets, names=self.names)

    def subset(self, mask) -> "Dataset":
        cov = None if self.covariate is None else self.covariate[mask]
        return Dataset(self.rows[mask], self.alphabets, cov, self.covariate_kind, self.covariate_name, self.names)

    def equals(self, other: "Dataset") -> bool:
        same_cov = (self.covariate is None and other.covariate is None) or (
            self.covariate is not None
            and other.covariate is not None
            and self.covariate_kind == other.covariate_kind
            and np.array_equal(self.covariate, other.covariate)
        )
        return self.alphabets == other.alphabets and np.array_equal(self.rows, other.rows) and same_cov

    @classmethod
    def from_counts(cls, counts: dict[tuple[int, ...], int], alphabets: Sequence[int] | None = None) -> "Dataset":
        """Expand ``{outcome: multiplicity}`` into rows, outcomes in the given order."""
        rows = [x for x, k in counts.items() for _ in range(k)]
        if alphabets is None:
            alphabets = tuple(np.max(np.asarray(rows), axis=0)) if rows else ()
        return cls(np.asarray(rows, dtype=np.int64).reshape(len(rows), len(alphabets)), tuple(alphabets))


def _parse_alphabets(text: str, line_no: int) -> tuple[int, ...]:
    try:
        sizes = tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise DataError(f"cannot parse alphabet directive {text!r}", row=line_no) from None
    if not sizes or any(k < 1 for k in sizes):
        raise DataError("alphabet sizes must be positive integers", row=line_no)
    return sizes


def _column_index(spec: str | int, names: list[str] | None, width: int | None, what: str) -> int:
    if isinstance(spec, str) and not spec.isdigit():
        if names is None or spec not in names:
            raise DataError(f"unknown {what} column {spec!r}")
        return names.index(spec)
    index = int(spec)
    if width is not None and not 0 <= index < width:
        raise DataError(f"{what} column index {index} out of range")
    return index


def parse_dataset(
    text: str,
    *,
    header: bool = False,
    covariate: str | int | None = None,
    continuous: bool = False,
    alphabets: Sequence[int] | None = None,
    delimiter: str = ",",
    drop: Sequence[str | int] = (),
) -> Dataset:
    """Parse CSV text; see the module docstring for the format.

    ``drop`` lists columns (names or zero-based indices) to skip entirely.
    Errors carry the 1-based line number of the offending row.
    """
    declared = tuple(alphabets) if alphabets is not None else None
    names: list[str] | None = None
    records: list[tuple[int, list[str]]] = []
    for line_no, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("alphabets:") and declared is None:
                declared = _parse_alphabets(body.split(":", 1)[1], line_no)
            continue
        fields = [f.strip() for f in line.split(delimiter)]
        if header and names is None:
            names = fields
            continue
        records.append((line_no, fields))

    width = len(names) if names is not None else (len(records[0][1]) if records else None)
    cov_index = None if covariate is None else _column_index(covariate, names, width, "covariate")
    skipped = {_column_index(c, names, width, "dropped") for c in drop}
    if cov_index is not None and cov_index in skipped:
        raise DataError("the covariate column cannot be dropped")
    if width is None:
        if declared is None:
            raise DataError("no data rows and no declared alphabets")
        width = len(declared) + (cov_index is not None) + len(skipped)

    n_out = width - (cov_index is not None) - len(skipped)
    values = np.zeros((len(records), n_out), dtype=np.int64)
    cov_vals: list = []
    for r, (line_no, fields) in enumerate(records):
        if len(fields) != width:
            raise DataError(f"expected {width} values, found {len(fields)}", row=line_no)
        c = 0
        for j, f in enumerate(fields):
            if j in skipped:
                continue
            if j == cov_index:
                try:
                    cov_vals.append(float(f) if continuous else int(f))
                except ValueError:
                    kind = "number" if continuous else "integer code"
                    raise DataError(f"covariate value {f!r} is not a {kind}", row=line_no) from None
                continue
            try:
                v = int(f)
            except ValueError:
                raise DataError(f"category {f!r} is not an integer", row=line_no) from None
            if v < 1:
                raise DataError(f"category {v} must be a positive integer", row=line_no)
            if declared is not None and c < len(declared) and v > declared[c]:
                raise DataError(f"category {v} exceeds declared alphabet size {declared[c]}", row=line_no)
            values[r, c] = v
            c += 1

    if declared is not None:
        if len(declared) != n_out:
            raise DataError(f"{len(declared)} alphabet sizes declared for {n_out} outcome columns")
        sizes = declared
    else:
        if not len(records):
            raise DataError("cannot infer alphabets from an empty dataset")
        sizes = tuple(int(k) for k in values.max(axis=0))

    out_names = None
    cov_name = None
    if names is not None:
        out_names = tuple(nm for j, nm in enumerate(names) if j != cov_index and j not in skipped)
        if cov_index is not None:
            cov_name = names[cov_index]
    elif cov_index is not None:
        cov_name = str(cov_index)
    cov = None
    if cov_index is not None:
        cov = np.asarray(cov_vals, dtype=float if continuous else np.int64)
    return Dataset(
        values,
        sizes,
        cov,
        (CONTINUOUS if continuous else CATEGORICAL) if cov is not None else None,
        cov_name,
        out_names,
    )


def read_dataset(source: str | os.PathLike | TextIO, **options) -> Dataset:
    """Read a dataset from a path or an open text stream."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    return parse_dataset(text, **options)


def format_dataset(d: Dataset, header: bool = True) -> str:
    out = io.StringIO()
    out.write("# alphabets: " + ",".join(str(k) for k in d.alphabets) + "\n")
    if header:
        names = list(d.names) if d.names else [f"X{i}" for i in range(1, d.p + 1)]
        if d.covariate is not None:
            names.append(d.covariate_name or "Z")
        out.write(",".join(names) + "\n")
    cov = d.covariate
    for r, row in enumerate(d.rows.tolist()):
        fields = [str(v) for v in row]
        if cov is not None:
            fields.append(repr(float(cov[r])) if d.covariate_kind == CONTINUOUS else str(int(cov[r])))
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def write_dataset(d: Dataset, dest: str | os.PathLike | TextIO, header: bool = True) -> None:
    text = format_dataset(d, header=header)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()

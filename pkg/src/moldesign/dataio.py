"""Dataset and corpus file ingestion.

Property datasets are CSV with header "smiles,ron,mon,dcn"; empty cells
are missing labels. Corpus files hold one SMILES per line with optional
"#" comments.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

from .molgraph import MolGraphError, canonical_smiles, parse_smiles

EXPECTED_HEADER = ["smiles", "ron", "mon", "dcn"]


class DataError(Exception):
    pass


class IoError(DataError):
    pass


class HeaderMismatch(DataError):
    pass


class AllRowsInvalid(DataError):
    pass


@dataclass
class DatasetRow:
    smiles: str
    canonical: str
    ron: float = None
    mon: float = None
    dcn: float = None

    def labels(self):
        return {"ron": self.ron, "mon": self.mon, "dcn": self.dcn}


@dataclass
class PropertyDataset:
    rows: list
    issues: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


def _parse_cell(cell, line_no, name):
    cell = cell.strip()
    if not cell:
        return None
    try:
        return float(cell)
    except ValueError:
        raise DataError("line %d: bad %s value %r" % (line_no, name, cell))


def ingest_dataset(path):
    """Load and validate a property dataset CSV."""
    try:
        f = open(path, newline="")
    except OSError as e:
        raise IoError(str(e))
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch("empty file")
        if [h.strip().lower() for h in header] != EXPECTED_HEADER:
            raise HeaderMismatch("expected header %s, got %s"
                                 % (",".join(EXPECTED_HEADER), ",".join(header)))
        rows, issues, seen = [], [], {}
        for line_no, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != 4:
                issues.append("line %d: expected 4 columns, got %d"
                              % (line_no, len(cells)))
                continue
            smiles = cells[0].strip()
            try:
                g = parse_smiles(smiles)
                canon = canonical_smiles(g)
                labels = {name: _parse_cell(cells[i + 1], line_no, name)
                          for i, name in enumerate(("ron", "mon", "dcn"))}
            except (MolGraphError, DataError) as e:
                issues.append("line %d: %s" % (line_no, e))
                continue
            if all(v is None for v in labels.values()):
                issues.append("line %d: no labels" % line_no)
                continue
            if canon in seen:
                msg = ("line %d: duplicate molecule %s (first on line %d)"
                       % (line_no, canon, seen[canon]))
                issues.append(msg)
                warnings.warn(msg)
                continue
            seen[canon] = line_no
            rows.append(DatasetRow(smiles=smiles, canonical=canon, **labels))
    if not rows:
        raise AllRowsInvalid("no valid rows in %s" % path)
    return PropertyDataset(rows=rows, issues=issues)


def read_smiles_corpus(path):
    """One SMILES per line; '#' starts a comment."""
    try:
        f = open(path)
    except OSError as e:
        raise IoError(str(e))
    graphs = []
    with f:
        for line_no, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                graphs.append(parse_smiles(text))
            except MolGraphError as e:
                raise DataError("line %d: %s" % (line_no, e))
    return graphs

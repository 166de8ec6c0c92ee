"""Cohort manifest and sealed-answer CSV files.

Manifest columns: ``subject_id, fold, volume_path, raw_score,
residual_score, <demographic columns>, d001..dNNN``.  Missing values are
empty fields; test-fold residuals are always written empty because they
live only in the sealed answers file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from ..tabular import read_rows, write_rows
from .cohort import DemographicCovariates, SubjectRecord

_DEMO_COLUMNS = ("brain_volume", "site", "age_months", "sex", "ethnicity",
                 "parental_education", "parental_income", "marital_status")


def manifest_columns(n_regions: int) -> list[str]:
    return (["subject_id", "fold", "volume_path", "raw_score", "residual_score"]
            + list(_DEMO_COLUMNS) + [f"d{j + 1:03d}" for j in range(n_regions)])


def write_manifest(path: str | Path, records: list[SubjectRecord]) -> None:
    if not records:
        raise InvalidInputError("cannot write an empty manifest")
    n_regions = records[0].derived.size
    rows = []
    for r in records:
        demo = r.demographics
        residual = None if r.fold == "test" else r.residual_score
        row = [r.subject_id, r.fold, r.volume_path, r.raw_score, residual,
               demo.brain_volume, demo.site, demo.age_months, demo.sex,
               demo.ethnicity, demo.parental_education, demo.parental_income,
               demo.marital_status]
        row += [int(v) for v in r.derived]
        rows.append(row)
    write_rows(path, manifest_columns(n_regions), rows)


def read_manifest(path: str | Path) -> list[SubjectRecord]:
    header, rows = read_rows(path)
    n_regions = sum(1 for h in header if h.startswith("d") and h[1:].isdigit())
    if header != manifest_columns(n_regions):
        raise InvalidInputError(f"unexpected manifest columns in {path}")
    records = []
    for row in rows:
        vals = dict(zip(header, row))

        def opt(key, conv):
            return None if vals[key] == "" else conv(vals[key])

        demo = DemographicCovariates(
            brain_volume=float(vals["brain_volume"]),
            site=opt("site", str),
            age_months=opt("age_months", float),
            sex=opt("sex", str),
            ethnicity=opt("ethnicity", str),
            parental_education=opt("parental_education", int),
            parental_income=opt("parental_income", int),
            marital_status=opt("marital_status", str),
        )
        derived = np.array([int(vals[f"d{j + 1:03d}"]) for j in range(n_regions)],
                           dtype=np.int64)
        records.append(SubjectRecord(
            subject_id=vals["subject_id"], fold=vals["fold"],
            volume_path=vals["volume_path"], derived=derived, demographics=demo,
            raw_score=float(vals["raw_score"]),
            residual_score=opt("residual_score", float)))
    return records


def write_sealed_answers(path: str | Path, answers: dict[str, float]) -> None:
    rows = [[sid, val] for sid, val in sorted(answers.items())]
    write_rows(path, ["subject_id", "residual_score"], rows)


def read_sealed_answers(path: str | Path) -> dict[str, float]:
    header, rows = read_rows(path)
    if header != ["subject_id", "residual_score"]:
        raise InvalidInputError(f"unexpected sealed-answer columns in {path}")
    return {sid: float(val) for sid, val in rows}

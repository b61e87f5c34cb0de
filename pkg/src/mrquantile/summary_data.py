"""Ingestion and harmonization of two-sample GWAS summary statistics.

Exposure and outcome associations arrive as delimited text files with one row
per variant. Parsing validates every row; harmonization aligns outcome effect
alleles to the exposure's, flipping the outcome beta when the allele pair is
swapped and dropping variants whose alleles are incompatible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    EmptyFileError,
    MalformedRowError,
    MissingColumnError,
    NoOverlapError,
)

VALID_ALLELES = frozenset("ACGT")
REQUIRED_COLUMNS = ("snp", "effect_allele", "other_allele", "beta", "se", "pvalue")
DEFAULT_COLUMN_MAP = {name: name for name in REQUIRED_COLUMNS + ("eaf",)}

_MISSING_VALUES = frozenset({"", ".", "NA", "N/A", "NAN", "NONE", "NULL"})


@dataclass(frozen=True)
class GwasRow:
    """One variant's association from a single GWAS."""

    snp_id: str
    effect_allele: str
    other_allele: str
    beta: float
    se: float
    pvalue: float
    eaf: float | None = None


@dataclass(frozen=True)
class InstrumentRecord:
    """Allele-aligned exposure and outcome associations for one variant.

    beta_y refers to the same effect allele as beta_x. Standard errors are
    nonnegative; parsed inputs always carry strictly positive ones.
    """

    snp_id: str
    beta_x: float
    se_x: float
    beta_y: float
    se_y: float


@dataclass(frozen=True)
class Provenance:
    """Audit counts for one harmonization run.

    dropped_palindromic counts A/T and C/G variants whose match would have
    required strand inference; they are included in dropped_mismatch so that
    retained + dropped_mismatch + dropped_no_match equals the number of
    exposure rows passing the p-value threshold.
    """

    exposure_path: str
    outcome_path: str
    pval_threshold: float
    n_exposure_pass: int = 0
    retained: int = 0
    dropped_no_match: int = 0
    dropped_mismatch: int = 0
    dropped_palindromic: int = 0
    duplicate_exposure: int = 0
    duplicate_outcome: int = 0


@dataclass(frozen=True)
class HarmonizedSet:
    """Harmonized instrument records plus outcome-model metadata."""

    records: tuple[InstrumentRecord, ...]
    outcome_type: str  # "continuous" or "binary_rare"
    provenance: Provenance

    def __post_init__(self):
        if self.outcome_type not in ("continuous", "binary_rare"):
            raise ValueError(f"unknown outcome_type: {self.outcome_type!r}")
        ids = [rec.snp_id for rec in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate snp_ids in HarmonizedSet")


def _parse_float(text: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedRowError(line, f"could not parse {what}: {text!r}") from None


def _validate_allele(text: str, line: int, what: str) -> str:
    allele = text.strip().upper()
    if len(allele) != 1 or allele not in VALID_ALLELES:
        raise MalformedRowError(line, f"{what} must be one of A/C/G/T, got {text!r}")
    return allele


def parse_gwas_file(
    path: str | Path,
    column_map: Mapping[str, str] | None = None,
    delimiter: str | None = None,
) -> list[GwasRow]:
    """Read and validate GWAS summary statistics from delimited text.

    Parameters
    ----------
    path:
        Input file. The delimiter defaults to a comma for ``.csv`` files and
        a tab otherwise; pass ``delimiter`` to override.
    column_map:
        Maps the canonical column names (snp, effect_allele, other_allele,
        beta, se, pvalue, and optionally eaf) to the file's header names.
        The eaf column is used only when its mapped name is present.

    Raises
    ------
    FileNotFoundError, MissingColumnError, EmptyFileError, MalformedRowError
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if delimiter is None:
        delimiter = "," if path.suffix.lower() == ".csv" else "\t"
    colmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        colmap.update(column_map)

    with open(path, newline="") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(str(path)) from None
        header = [h.strip() for h in header]
        index: dict[str, int] = {}
        for canonical in REQUIRED_COLUMNS:
            name = colmap[canonical]
            if name not in header:
                raise MissingColumnError(f"{path}: missing column {name!r}")
            index[canonical] = header.index(name)
        eaf_idx = header.index(colmap["eaf"]) if colmap.get("eaf") in header else None

        rows: list[GwasRow] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise MalformedRowError(
                    line_no, f"expected {len(header)} fields, got {len(raw)}"
                )
            snp_id = raw[index["snp"]].strip()
            if not snp_id:
                raise MalformedRowError(line_no, "empty snp id")
            ea = _validate_allele(raw[index["effect_allele"]], line_no, "effect allele")
            oa = _validate_allele(raw[index["other_allele"]], line_no, "other allele")
            if ea == oa:
                raise MalformedRowError(line_no, "effect and other allele are identical")
            beta = _parse_float(raw[index["beta"]], line_no, "beta")
            se = _parse_float(raw[index["se"]], line_no, "se")
            pvalue = _parse_float(raw[index["pvalue"]], line_no, "pvalue")
            if not se > 0:
                raise MalformedRowError(line_no, f"se must be > 0, got {se}")
            if not 0.0 <= pvalue <= 1.0:
                raise MalformedRowError(line_no, f"pvalue must be in [0, 1], got {pvalue}")
            eaf = None
            if eaf_idx is not None:
                cell = raw[eaf_idx].strip()
                if cell.upper() not in _MISSING_VALUES:
                    eaf = _parse_float(cell, line_no, "eaf")
                    if not 0.0 < eaf < 1.0:
                        raise MalformedRowError(line_no, f"eaf must be in (0, 1), got {eaf}")
            rows.append(GwasRow(snp_id, ea, oa, beta, se, pvalue, eaf))

    if not rows:
        raise EmptyFileError(str(path))
    return rows


def _dedupe(rows: Sequence[GwasRow]) -> tuple[list[GwasRow], int]:
    seen: set[str] = set()
    out: list[GwasRow] = []
    dropped = 0
    for row in rows:
        if row.snp_id in seen:
            dropped += 1
            continue
        seen.add(row.snp_id)
        out.append(row)
    return out, dropped


def _is_palindromic(a: str, b: str) -> bool:
    pair = frozenset((a, b))
    return pair == frozenset("AT") or pair == frozenset("CG")


def harmonize(
    exposure: Sequence[GwasRow],
    outcome: Sequence[GwasRow],
    pval_threshold: float = 5e-8,
    outcome_type: str = "continuous",
    exposure_path: str = "",
    outcome_path: str = "",
) -> HarmonizedSet:
    """Match exposure and outcome variants and align outcome effect alleles.

    Exposure rows are first filtered to ``pvalue < pval_threshold``. A variant
    is retained when it appears in both studies with the same allele pair,
    either directly or swapped; a swap flips the sign of the outcome beta.
    Palindromic variants (A/T, C/G) are retained only on a direct match, since
    a swapped match is indistinguishable from a strand flip.

    Raises
    ------
    NoOverlapError
        When no variant survives matching.
    """
    exposure, dup_exp = _dedupe(exposure)
    outcome, dup_out = _dedupe(outcome)
    outcome_by_id = {row.snp_id: row for row in outcome}

    passed = [row for row in exposure if row.pvalue < pval_threshold]
    records: list[InstrumentRecord] = []
    dropped_no_match = 0
    dropped_mismatch = 0
    dropped_palindromic = 0
    for exp in passed:
        out = outcome_by_id.get(exp.snp_id)
        if out is None:
            dropped_no_match += 1
            continue
        if out.effect_allele == exp.effect_allele and out.other_allele == exp.other_allele:
            beta_y = out.beta
        elif out.effect_allele == exp.other_allele and out.other_allele == exp.effect_allele:
            if _is_palindromic(exp.effect_allele, exp.other_allele):
                dropped_mismatch += 1
                dropped_palindromic += 1
                continue
            beta_y = -out.beta
        else:
            dropped_mismatch += 1
            continue
        records.append(
            InstrumentRecord(exp.snp_id, exp.beta, exp.se, beta_y, out.se)
        )

    if not records:
        raise NoOverlapError(
            f"no variants retained ({len(passed)} exposure rows passed the threshold)"
        )
    provenance = Provenance(
        exposure_path=exposure_path,
        outcome_path=outcome_path,
        pval_threshold=pval_threshold,
        n_exposure_pass=len(passed),
        retained=len(records),
        dropped_no_match=dropped_no_match,
        dropped_mismatch=dropped_mismatch,
        dropped_palindromic=dropped_palindromic,
        duplicate_exposure=dup_exp,
        duplicate_outcome=dup_out,
    )
    return HarmonizedSet(tuple(records), outcome_type, provenance)


def subset(data: HarmonizedSet, keep: Sequence[int]) -> HarmonizedSet:
    """Return a copy of ``data`` restricted to the given record indices."""
    records = tuple(data.records[i] for i in keep)
    return replace(data, records=records)

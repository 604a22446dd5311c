"""Summary-statistic ingestion, allele harmonization and instrument selection.

Three GWAS files enter every analysis: a selection study (provides the
p-values used to pick instruments), an exposure study and an outcome study.
Effects are aligned to the exposure's allele coding, then approximately
independent instruments are chosen greedily by distance.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

VALID_ALLELES = frozenset("ACGT")
PALINDROMIC_PAIRS = (frozenset("AT"), frozenset("CG"))

#: role -> default column name, in required-role order
REQUIRED_ROLES = ("rsid", "chrom", "pos", "effect_allele", "other_allele",
                  "beta", "se", "pval")
DEFAULT_COLUMNS = {role: role for role in REQUIRED_ROLES}


@dataclass(frozen=True)
class SnpRecord:
    rsid: str
    chrom: str
    pos: int
    effect_allele: str
    other_allele: str
    beta: float
    se: float
    pval: float

    def __post_init__(self):
        if self.se <= 0:
            raise ValueError(f"{self.rsid}: se must be positive")
        if not 0.0 <= self.pval <= 1.0:
            raise ValueError(f"{self.rsid}: pval must be in [0, 1]")
        if self.effect_allele == self.other_allele:
            raise ValueError(f"{self.rsid}: alleles must differ")
        if self.effect_allele not in VALID_ALLELES or self.other_allele not in VALID_ALLELES:
            raise ValueError(f"{self.rsid}: alleles must be one of A/C/G/T")
        if self.pos < 0:
            raise ValueError(f"{self.rsid}: position must be non-negative")


@dataclass
class SummarySet:
    """Aligned per-SNP effect estimates: the estimator's sole input."""

    snps: list
    gamma_hat: np.ndarray
    sigma_x: np.ndarray
    Gamma_hat: np.ndarray
    sigma_y: np.ndarray

    def __post_init__(self):
        self.gamma_hat = np.ascontiguousarray(self.gamma_hat, dtype=np.float64)
        self.sigma_x = np.ascontiguousarray(self.sigma_x, dtype=np.float64)
        self.Gamma_hat = np.ascontiguousarray(self.Gamma_hat, dtype=np.float64)
        self.sigma_y = np.ascontiguousarray(self.sigma_y, dtype=np.float64)
        p = len(self.snps)
        if p < 1:
            raise ValueError("SummarySet needs at least one SNP")
        for name in ("gamma_hat", "sigma_x", "Gamma_hat", "sigma_y"):
            if getattr(self, name).shape != (p,):
                raise ValueError(f"{name} must have length {p}")
        if np.any(self.sigma_x <= 0) or np.any(self.sigma_y <= 0):
            raise ValueError("all standard errors must be strictly positive")
        if len(set(self.snps)) != p:
            raise ValueError("duplicate SNP identifiers")

    def __len__(self):
        return len(self.snps)


@dataclass
class InstrumentTable:
    """Harmonized per-SNP rows with genomic coordinates and selection p-values.

    Superset of :class:`SummarySet`; this is the TSV-serializable form used
    between the ``select`` and ``fit`` pipeline stages.
    """

    rsid: list
    chrom: list
    pos: np.ndarray
    gamma_hat: np.ndarray
    sigma_x: np.ndarray
    Gamma_hat: np.ndarray
    sigma_y: np.ndarray
    sel_pval: np.ndarray

    COLUMNS = ("rsid", "chrom", "pos", "gamma_hat", "sigma_x",
               "Gamma_hat", "sigma_y", "sel_pval")

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.int64)
        for name in ("gamma_hat", "sigma_x", "Gamma_hat", "sigma_y", "sel_pval"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))

    def __len__(self):
        return len(self.rsid)

    def to_summary_set(self):
        return SummarySet(snps=list(self.rsid), gamma_hat=self.gamma_hat,
                          sigma_x=self.sigma_x, Gamma_hat=self.Gamma_hat,
                          sigma_y=self.sigma_y)

    def subset(self, idx):
        idx = np.asarray(idx)
        return InstrumentTable(
            rsid=[self.rsid[i] for i in idx],
            chrom=[self.chrom[i] for i in idx],
            pos=self.pos[idx],
            gamma_hat=self.gamma_hat[idx],
            sigma_x=self.sigma_x[idx],
            Gamma_hat=self.Gamma_hat[idx],
            sigma_y=self.sigma_y[idx],
            sel_pval=self.sel_pval[idx],
        )

    def to_tsv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(self.COLUMNS)
            for i in range(len(self)):
                writer.writerow([
                    self.rsid[i], self.chrom[i], int(self.pos[i]),
                    repr(float(self.gamma_hat[i])), repr(float(self.sigma_x[i])),
                    repr(float(self.Gamma_hat[i])), repr(float(self.sigma_y[i])),
                    repr(float(self.sel_pval[i])),
                ])

    @classmethod
    def from_tsv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            if reader.fieldnames is None or set(cls.COLUMNS) - set(reader.fieldnames):
                raise ValueError(f"{path}: expected columns {cls.COLUMNS}")
            rows = list(reader)
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls(
            rsid=[r["rsid"] for r in rows],
            chrom=[r["chrom"] for r in rows],
            pos=np.array([int(r["pos"]) for r in rows]),
            gamma_hat=np.array([float(r["gamma_hat"]) for r in rows]),
            sigma_x=np.array([float(r["sigma_x"]) for r in rows]),
            Gamma_hat=np.array([float(r["Gamma_hat"]) for r in rows]),
            sigma_y=np.array([float(r["sigma_y"]) for r in rows]),
            sel_pval=np.array([float(r["sel_pval"]) for r in rows]),
        )


def _sniff_delimiter(header_line):
    return "\t" if "\t" in header_line else ","


def parse_summary_file(path, column_map=None):
    """Read one GWAS summary file into SnpRecords.

    ``column_map`` maps the roles in :data:`REQUIRED_ROLES` to column names in
    the file's header (defaults: the role names themselves).  Rows whose
    required fields are missing, unparseable or invalid (non-positive se,
    p-value outside [0, 1], bad alleles) are skipped and counted.

    Returns ``(records, n_skipped)``.
    """
    colmap = dict(DEFAULT_COLUMNS)
    if column_map:
        colmap.update(column_map)
    missing_roles = [r for r in REQUIRED_ROLES if r not in colmap]
    if missing_roles:
        raise ValueError(f"column_map missing roles: {missing_roles}")

    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty file")
        delim = _sniff_delimiter(first)
        reader = csv.DictReader(io.StringIO(first + fh.read()), delimiter=delim)
        header = reader.fieldnames or []
        absent = [colmap[r] for r in REQUIRED_ROLES if colmap[r] not in header]
        if absent:
            raise ValueError(f"{path}: header missing column(s) {absent}")

        records = []
        n_skipped = 0
        for row in reader:
            try:
                rec = SnpRecord(
                    rsid=row[colmap["rsid"]].strip(),
                    chrom=row[colmap["chrom"]].strip(),
                    pos=int(row[colmap["pos"]]),
                    effect_allele=row[colmap["effect_allele"]].strip().upper(),
                    other_allele=row[colmap["other_allele"]].strip().upper(),
                    beta=float(row[colmap["beta"]]),
                    se=float(row[colmap["se"]]),
                    pval=float(row[colmap["pval"]]),
                )
            except (ValueError, TypeError, AttributeError, KeyError):
                n_skipped += 1
                continue
            if not rec.rsid or not np.isfinite([rec.beta, rec.se, rec.pval]).all():
                n_skipped += 1
                continue
            records.append(rec)

    if not records:
        raise ValueError(f"{path}: no parseable rows")
    return records, n_skipped


def _is_palindromic(a1, a2):
    return frozenset((a1, a2)) in PALINDROMIC_PAIRS


def _orient(record, ref):
    """Sign multiplier aligning ``record`` to the reference allele coding.

    Returns +1/-1, or None when the allele pairs cannot be reconciled.
    """
    if (record.effect_allele, record.other_allele) == (ref.effect_allele, ref.other_allele):
        return 1.0
    if (record.effect_allele, record.other_allele) == (ref.other_allele, ref.effect_allele):
        return -1.0
    return None


def harmonize(selection, exposure, outcome, drop_palindromic=True):
    """Intersect the three studies and align everything to the exposure coding.

    SNPs missing from any study, with irreconcilable allele pairs, or (when
    ``drop_palindromic``) with strand-ambiguous A/T or C/G pairs are dropped.
    Output rows follow the exposure file's order.
    """
    for name, recs in (("selection", selection), ("exposure", exposure), ("outcome", outcome)):
        if not recs:
            raise ValueError(f"{name} records are empty")
    sel_by_id = {r.rsid: r for r in selection}
    out_by_id = {r.rsid: r for r in outcome}

    rows = []
    seen = set()
    for exp in exposure:
        if exp.rsid in seen:
            continue
        seen.add(exp.rsid)
        sel = sel_by_id.get(exp.rsid)
        out = out_by_id.get(exp.rsid)
        if sel is None or out is None:
            continue
        if drop_palindromic and _is_palindromic(exp.effect_allele, exp.other_allele):
            continue
        sign_out = _orient(out, exp)
        sign_sel = _orient(sel, exp)
        if sign_out is None or sign_sel is None:
            continue
        rows.append((exp, out, sign_out, sel))

    if not rows:
        raise ValueError("no SNPs survive intersection and harmonization")

    return InstrumentTable(
        rsid=[exp.rsid for exp, _, _, _ in rows],
        chrom=[exp.chrom for exp, _, _, _ in rows],
        pos=np.array([exp.pos for exp, _, _, _ in rows]),
        gamma_hat=np.array([exp.beta for exp, _, _, _ in rows]),
        sigma_x=np.array([exp.se for exp, _, _, _ in rows]),
        Gamma_hat=np.array([sign * out.beta for _, out, sign, _ in rows]),
        sigma_y=np.array([out.se for _, out, _, _ in rows]),
        sel_pval=np.array([sel.pval for _, _, _, sel in rows]),
    )


def select_instruments(table, p_range=(0.0, 1.0), min_distance_bp=10_000_000):
    """Greedy distance-based instrument selection.

    Keeps SNPs with selection p-value in ``(lo, hi]``, then repeatedly takes
    the smallest remaining p-value (ties broken by rsid) and discards
    unselected SNPs on the same chromosome closer than ``min_distance_bp``.
    """
    lo, hi = p_range
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("p_range must satisfy 0 <= lo < hi <= 1")
    if min_distance_bp < 0:
        raise ValueError("min_distance_bp must be non-negative")

    in_window = np.flatnonzero((table.sel_pval > lo) & (table.sel_pval <= hi))
    order = sorted(in_window, key=lambda i: (table.sel_pval[i], table.rsid[i]))

    kept = []
    kept_by_chrom = {}
    for i in order:
        chrom = table.chrom[i]
        pos = int(table.pos[i])
        if any(abs(pos - q) < min_distance_bp for q in kept_by_chrom.get(chrom, ())):
            continue
        kept.append(i)
        kept_by_chrom.setdefault(chrom, []).append(pos)

    if not kept:
        raise ValueError("no instruments left after selection")
    # output order fixed by genome coordinates, not input row order
    kept.sort(key=lambda i: (table.chrom[i], int(table.pos[i]), table.rsid[i]))
    return table.subset(kept)

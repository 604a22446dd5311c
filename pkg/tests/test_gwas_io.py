"""Parsing, harmonization and instrument selection."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rapsmr.gwas_io import (InstrumentTable, SnpRecord, harmonize,
                            parse_summary_file, select_instruments)

HEADER = "rsid\tchrom\tpos\teffect_allele\tother_allele\tbeta\tse\tpval"


def write_tsv(path, rows, header=HEADER, sep="\t"):
    lines = [header.replace("\t", sep)]
    lines += [sep.join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def rec(rsid="rs1", chrom="1", pos=100, ea="A", oa="G", beta=0.1, se=0.01, pval=0.5):
    return SnpRecord(rsid, chrom, pos, ea, oa, beta, se, pval)


class TestParse:
    def test_well_formed(self, tmp_path):
        path = write_tsv(tmp_path / "x.tsv", [
            ("rs1", 1, 100, "A", "G", 0.1, 0.01, 0.5),
            ("rs2", 1, 200, "C", "T", -0.2, 0.02, 0.01),
            ("rs3", 2, 300, "G", "T", 0.0, 0.03, 0.9),
        ])
        records, skipped = parse_summary_file(path)
        assert len(records) == 3 and skipped == 0
        assert [r.rsid for r in records] == ["rs1", "rs2", "rs3"]
        assert records[1].beta == -0.2

    def test_na_row_skipped(self, tmp_path):
        path = write_tsv(tmp_path / "x.tsv", [
            ("rs1", 1, 100, "A", "G", 0.1, "NA", 0.5),
            ("rs2", 1, 200, "C", "T", -0.2, 0.02, 0.01),
        ])
        records, skipped = parse_summary_file(path)
        assert len(records) == 1 and skipped == 1

    def test_zero_se_skipped(self, tmp_path):
        path = write_tsv(tmp_path / "x.tsv", [
            ("rs1", 1, 100, "A", "G", 0.1, 0.0, 0.5),
            ("rs2", 1, 200, "C", "T", -0.2, 0.02, 0.01),
        ])
        records, skipped = parse_summary_file(path)
        assert len(records) == 1 and skipped == 1

    def test_comma_delimited_and_column_map(self, tmp_path):
        header = "SNP,CHR,BP,A1,A2,BETA,SE,P"
        path = write_tsv(tmp_path / "x.csv", [("rs1", 1, 100, "A", "G", 0.1, 0.01, 0.5)],
                         header=header, sep=",")
        colmap = dict(rsid="SNP", chrom="CHR", pos="BP", effect_allele="A1",
                      other_allele="A2", beta="BETA", se="SE", pval="P")
        records, skipped = parse_summary_file(path, colmap)
        assert len(records) == 1 and skipped == 0

    def test_missing_column_raises(self, tmp_path):
        path = write_tsv(tmp_path / "x.tsv", [("rs1", 1, 100, "A", "G", 0.1, 0.01, 0.5)],
                         header=HEADER.replace("\tpval", "\tp_other"))
        with pytest.raises(ValueError, match="pval"):
            parse_summary_file(path)

    def test_all_rows_bad_raises(self, tmp_path):
        path = write_tsv(tmp_path / "x.tsv", [("rs1", 1, 100, "A", "A", 0.1, 0.01, 0.5)])
        with pytest.raises(ValueError, match="no parseable rows"):
            parse_summary_file(path)

    def test_missing_file(self):
        with pytest.raises(OSError):
            parse_summary_file("/nonexistent/file.tsv")


class TestHarmonize:
    def test_identity_case(self):
        sel = [rec(pval=1e-9)]
        exp = [rec(beta=0.3)]
        out = [rec(beta=0.1, se=0.02)]
        table = harmonize(sel, exp, out)
        assert table.rsid == ["rs1"]
        assert_allclose(table.gamma_hat, [0.3])
        assert_allclose(table.Gamma_hat, [0.1])
        assert_allclose(table.sel_pval, [1e-9])

    def test_allele_swap_flips_outcome(self):
        sel = [rec()]
        exp = [rec(ea="A", oa="G", beta=0.3)]
        out = [rec(ea="G", oa="A", beta=0.1)]
        table = harmonize(sel, exp, out)
        assert_allclose(table.Gamma_hat, [-0.1])
        assert_allclose(table.gamma_hat, [0.3])

    def test_palindromic_dropped_by_default(self):
        sel = [rec(ea="A", oa="T"), rec(rsid="rs2", ea="C", oa="G"),
               rec(rsid="rs3", ea="A", oa="C")]
        exp = [rec(ea="A", oa="T"), rec(rsid="rs2", ea="C", oa="G"),
               rec(rsid="rs3", ea="A", oa="C")]
        out = list(exp)
        table = harmonize(sel, exp, out)
        assert table.rsid == ["rs3"]
        table2 = harmonize(sel, exp, out, drop_palindromic=False)
        assert table2.rsid == ["rs1", "rs2", "rs3"]

    def test_irreconcilable_dropped(self):
        sel = [rec()]
        exp = [rec(ea="A", oa="G")]
        out = [rec(ea="A", oa="C")]
        with pytest.raises(ValueError, match="no SNPs survive"):
            harmonize(sel, exp, out)

    def test_intersection_only(self):
        sel = [rec(), rec(rsid="rs2", pos=200)]
        exp = [rec(), rec(rsid="rs3", pos=300)]
        out = [rec(), rec(rsid="rs2", pos=200), rec(rsid="rs3", pos=300)]
        table = harmonize(sel, exp, out)
        assert table.rsid == ["rs1"]

    def test_double_flip_is_identity(self):
        sel = [rec(ea="A", oa="G", beta=0.05, pval=0.2)]
        exp = [rec(ea="A", oa="G", beta=0.3)]
        out = [rec(ea="A", oa="G", beta=0.1)]
        base = harmonize(sel, exp, out)

        def swap(r):
            return SnpRecord(r.rsid, r.chrom, r.pos, r.other_allele,
                             r.effect_allele, -r.beta, r.se, r.pval)

        twice = harmonize([swap(swap(r)) for r in sel], exp, [swap(swap(r)) for r in out])
        assert_allclose(twice.Gamma_hat, base.Gamma_hat, atol=0)
        assert_allclose(twice.sel_pval, base.sel_pval, atol=0)

    def test_empty_input_raises(self):
        with pytest.raises(ValueError, match="empty"):
            harmonize([], [rec()], [rec()])


def make_table(rows):
    """rows: (rsid, chrom, pos, pval)"""
    n = len(rows)
    return InstrumentTable(
        rsid=[r[0] for r in rows],
        chrom=[str(r[1]) for r in rows],
        pos=np.array([r[2] for r in rows]),
        gamma_hat=np.full(n, 0.1),
        sigma_x=np.full(n, 0.01),
        Gamma_hat=np.full(n, 0.05),
        sigma_y=np.full(n, 0.02),
        sel_pval=np.array([r[3] for r in rows]),
    )


class TestSelectInstruments:
    def test_greedy_distance_exclusion(self):
        table = make_table([("rs1", 1, 5_000_000, 1e-8), ("rs2", 1, 10_000_000, 1e-4)])
        kept = select_instruments(table, min_distance_bp=10_000_000)
        assert kept.rsid == ["rs1"]

    def test_different_chromosomes_all_kept(self):
        table = make_table([("rs1", 1, 100, 1e-8), ("rs2", 2, 150, 1e-4)])
        kept = select_instruments(table, min_distance_bp=10_000_000)
        assert sorted(kept.rsid) == ["rs1", "rs2"]

    def test_p_window_excludes_significant(self):
        table = make_table([("rs1", 1, 100, 1e-9), ("rs2", 2, 150, 1e-4)])
        kept = select_instruments(table, p_range=(5e-8, 1.0), min_distance_bp=0)
        assert kept.rsid == ["rs2"]
        kept_sig = select_instruments(table, p_range=(0.0, 5e-8), min_distance_bp=0)
        assert kept_sig.rsid == ["rs1"]

    def test_order_independence_and_ties(self):
        rows = [("rsB", 1, 0, 0.5), ("rsA", 1, 4_000_000, 0.5),
                ("rsC", 1, 30_000_000, 0.7)]
        kept_fwd = select_instruments(make_table(rows), min_distance_bp=10_000_000)
        kept_rev = select_instruments(make_table(rows[::-1]), min_distance_bp=10_000_000)
        assert kept_fwd.rsid == kept_rev.rsid == ["rsA", "rsC"]

    def test_exact_distance_kept(self):
        table = make_table([("rs1", 1, 0, 1e-8), ("rs2", 1, 10_000_000, 1e-4)])
        kept = select_instruments(table, min_distance_bp=10_000_000)
        assert kept.rsid == ["rs1", "rs2"]

    def test_empty_result_raises(self):
        table = make_table([("rs1", 1, 100, 0.5)])
        with pytest.raises(ValueError, match="no instruments"):
            select_instruments(table, p_range=(0.0, 1e-8))

    def test_bad_ranges(self):
        table = make_table([("rs1", 1, 100, 0.5)])
        with pytest.raises(ValueError):
            select_instruments(table, p_range=(0.5, 0.5))
        with pytest.raises(ValueError):
            select_instruments(table, min_distance_bp=-1)

    def test_tsv_round_trip(self, tmp_path):
        table = make_table([("rs1", 1, 100, 0.5), ("rs2", "X", 900, 1e-9)])
        path = tmp_path / "instruments.tsv"
        table.to_tsv(path)
        back = InstrumentTable.from_tsv(path)
        assert back.rsid == table.rsid
        assert back.chrom == table.chrom
        assert_allclose(back.pos, table.pos)
        assert_allclose(back.gamma_hat, table.gamma_hat, atol=0)
        assert_allclose(back.sel_pval, table.sel_pval, atol=0)

    def test_summary_set_view(self):
        table = make_table([("rs1", 1, 100, 0.5), ("rs2", 2, 900, 0.1)])
        ss = table.to_summary_set()
        assert ss.snps == ["rs1", "rs2"]
        assert len(ss) == 2

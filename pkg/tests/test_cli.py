import json

import pytest

from labclean.cli import main


def write_spec(tmp_path, extra=""):
    path = tmp_path / "synth.toml"
    path.write_text(
        f"""
seed = 5
n_patients = 20
n_tests = 500
date_start = "2020-01-01"
date_end = "2020-03-31"
{extra}
""",
        encoding="utf-8",
    )
    return path


class TestSynthCommand:
    def test_generates_corpus(self, tmp_path, capsys):
        rc = main(["synth", "--spec", str(write_spec(tmp_path)),
                   "--out", str(tmp_path / "corpus")])
        assert rc == 0
        assert (tmp_path / "corpus" / "tests.csv").exists()
        assert (tmp_path / "corpus" / "patients.csv").exists()
        assert (tmp_path / "corpus" / "manifest.json").exists()

    def test_invalid_rate_exits_one(self, tmp_path):
        spec = write_spec(tmp_path, "[dirt]\nnull_rate = 1.5\n")
        assert main(["synth", "--spec", str(spec), "--out", str(tmp_path)]) == 1

    def test_missing_spec_exits_one(self, tmp_path):
        assert main(["synth", "--spec", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path)]) == 1

    def test_same_seed_identical_checksums(self, tmp_path):
        import hashlib

        spec = write_spec(tmp_path)
        for d in ("a", "b"):
            assert main(["synth", "--spec", str(spec),
                         "--out", str(tmp_path / d)]) == 0
        h = [hashlib.sha256((tmp_path / d / "tests.csv").read_bytes()).hexdigest()
             for d in ("a", "b")]
        assert h[0] == h[1]


class TestCleanCommand:
    def test_clean_outputs(self, tmp_path, capsys):
        spec = write_spec(tmp_path, "[dirt]\nout_of_range_rate = 0.2\n")
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        rc = main(["clean", "--input", str(tmp_path / "c" / "tests.csv"),
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("| analyte |")  # markdown table on stdout
        for name in ("cleaned.csv", "reduction.csv", "rejects.csv"):
            assert (tmp_path / "o" / name).exists()
        header = (tmp_path / "o" / "cleaned.csv").read_text().splitlines()[0]
        assert header.endswith("clean_stage_passed")

    def test_missing_input_exits_two(self, tmp_path):
        assert main(["clean", "--input", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path)]) == 2

    def test_empty_input_ok(self, tmp_path, capsys):
        path = tmp_path / "t.csv"
        path.write_text("ID_PACIENTE|DT_COLETA|DE_EXAME|DE_ANALITO|DE_RESULTADO\n")
        assert main(["clean", "--input", str(path), "--out", str(tmp_path / "o")]) == 0
        reduction = (tmp_path / "o" / "reduction.csv").read_text().splitlines()
        assert reduction[-1].startswith("Total,0,0")

    def test_all_missing_reference(self, tmp_path, capsys):
        spec = write_spec(tmp_path, "[dirt]\nmissing_reference_rate = 1.0\n")
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        rc = main(["clean", "--input", str(tmp_path / "c" / "tests.csv"),
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        rejects = (tmp_path / "o" / "rejects.csv").read_text()
        assert rejects.count("NoReference") == 500


class TestProfileCommand:
    def test_tests_profile(self, tmp_path):
        spec = write_spec(tmp_path)
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        rc = main(["profile", "--input", str(tmp_path / "c" / "tests.csv"),
                   "--out", str(tmp_path / "p")])
        assert rc == 0
        doc = json.loads((tmp_path / "p" / "profile.json").read_text())
        assert "columns" in doc and "exams_per_period" in doc
        assert doc["ingest_report"]["rows_ok"] == 500
        assert (tmp_path / "p" / "exams_per_month.csv").exists()

    def test_patient_profile(self, tmp_path):
        spec = write_spec(tmp_path)
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        rc = main(["profile", "--input", str(tmp_path / "c" / "patients.csv"),
                   "--kind", "patient", "--out", str(tmp_path / "p")])
        assert rc == 0
        doc = json.loads((tmp_path / "p" / "profile.json").read_text())
        assert doc["sex_distribution"]["F"]["count"] == 10
        assert "age_distribution" in doc

    def test_missing_input_exits_two(self, tmp_path):
        assert main(["profile", "--input", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path)]) == 2


class TestReportCommand:
    def test_reduction_markdown(self, tmp_path, capsys):
        spec = write_spec(tmp_path)
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        main(["clean", "--input", str(tmp_path / "c" / "tests.csv"),
              "--out", str(tmp_path / "o")])
        capsys.readouterr()
        rc = main(["report", "--reduction", str(tmp_path / "o" / "reduction.csv")])
        assert rc == 0
        assert capsys.readouterr().out.startswith("| analyte |")

    def test_boxplots_from_profile(self, tmp_path):
        spec = write_spec(tmp_path)
        main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")])
        main(["profile", "--input", str(tmp_path / "c" / "tests.csv"),
              "--out", str(tmp_path / "p")])
        rc = main(["report", "--profile", str(tmp_path / "p" / "profile.json"),
                   "--out", str(tmp_path / "p")])
        assert rc == 0
        assert (tmp_path / "p" / "boxplots.svg").read_text().startswith("<svg")

    def test_no_flags_is_usage_error(self):
        assert main(["report"]) == 1

    def test_bad_subcommand_exits_one(self):
        assert main(["frobnicate"]) == 1

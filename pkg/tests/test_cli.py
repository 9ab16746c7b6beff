import json

import pytest

from fragsched import build_scheme, projective_plane, read_scheme, scheme_hash, write_scheme
from fragsched.cli import main
from fragsched.errors import (
    DuplicateReplicaOnServer,
    ParseError,
    SchemaVersionUnsupported,
    ValidationFailed,
)
from fragsched.schemefile import doc_to_scheme, scheme_to_doc


class TestSchemeFile:
    def test_roundtrip_identity_and_hash(self, tmp_path, pp2):
        path = tmp_path / "pp2.json"
        write_scheme(pp2, path)
        back = read_scheme(path)
        assert back.occupancy == pp2.occupancy
        assert back.params == pp2.params
        assert scheme_hash(back) == scheme_hash(pp2)
        write_scheme(back, tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()

    def test_replication_mismatch_names_fragment(self):
        doc = scheme_to_doc(projective_plane(2))
        doc["occupancy"][2] = doc["occupancy"][2][:2]  # fragment 3 loses a replica
        with pytest.raises(ValidationFailed, match="fragment 3"):
            doc_to_scheme(doc)

    def test_unknown_format_version(self):
        doc = scheme_to_doc(projective_plane(2))
        doc["format"] = 99
        with pytest.raises(SchemaVersionUnsupported):
            doc_to_scheme(doc)

    def test_missing_fields(self):
        with pytest.raises(ParseError):
            doc_to_scheme({"format": 1, "B": 3})

    def test_duplicate_replica_in_file(self):
        doc = scheme_to_doc(build_scheme([{1, 2}, {1, 2}], mu=1.0))
        doc["occupancy"][0] = [1, 1]
        with pytest.raises(DuplicateReplicaOnServer):
            doc_to_scheme(doc)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{nope")
        with pytest.raises(ParseError):
            read_scheme(path)


class TestConstruct:
    def test_pp(self, tmp_path, capsys):
        out = tmp_path / "pp.json"
        assert main(["construct", "--kind", "pp", "--q", "3", "--out", str(out)]) == 0
        scheme = read_scheme(out)
        assert (scheme.params.B, scheme.params.V) == (13, 13)

    def test_cyclic(self, tmp_path):
        out = tmp_path / "cy.json"
        assert main(["construct", "--kind", "cyclic", "--V", "7", "--R", "3",
                     "--mu", "0.5", "--out", str(out)]) == 0
        scheme = read_scheme(out)
        assert scheme.params.mu == 0.5
        assert sorted(scheme.fragments_on(1)) == [1, 2, 3]

    def test_affine(self, tmp_path):
        out = tmp_path / "af.json"
        assert main(["construct", "--kind", "affine", "--q", "2", "--out", str(out)]) == 0
        assert read_scheme(out).params.V == 4

    def test_large_emits_reduction(self, tmp_path, capsys):
        out = tmp_path / "lg.json"
        assert main(["construct", "--kind", "large", "--V", "2", "--B", "2", "--K", "4",
                     "--out", str(out)]) == 0
        scheme = read_scheme(out)
        assert scheme.params.K == 2  # distinct fragments per server
        assert all(s == frozenset({1, 2}) for s in scheme.occupancy)

    def test_nonprime_exits_one(self, tmp_path, capsys):
        rc = main(["construct", "--kind", "pp", "--q", "4", "--out", str(tmp_path / "x.json")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_missing_flag_exits_one(self, tmp_path, capsys):
        rc = main(["construct", "--kind", "cyclic", "--V", "7", "--out", str(tmp_path / "x.json")])
        assert rc == 1

    def test_unknown_flag_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["construct", "--kind", "pp", "--q", "2", "--frobnicate", "1",
                  "--out", str(tmp_path / "x.json")])
        assert exc.value.code == 2


class TestInspectAndBounds:
    @pytest.fixture()
    def pp2_file(self, tmp_path, pp2):
        path = tmp_path / "pp2.json"
        write_scheme(pp2, path)
        return path

    def test_inspect_fields(self, pp2_file, tmp_path):
        out = tmp_path / "inspect.json"
        assert main(["inspect", "--scheme", str(pp2_file), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["tau_max"] == 1 and doc["lambda_max"] == 1
        assert doc["two_design_lambda"] == 1
        assert doc["conservation_laws"] == [True, True]
        assert doc["config"]["scheme_hash"] == scheme_hash(read_scheme(pp2_file))

    def test_bounds_csv_columns(self, pp2_file, tmp_path):
        out = tmp_path / "bounds.csv"
        assert main(["bounds", "--scheme", str(pp2_file), "--out", str(out)]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "ell,lb_general,lb_design,ub,rep_expected,mds_expected"
        assert len(lines) == 1 + 7
        first = lines[1].split(",")
        assert first[0] == "0" and first[3] == "7"


class TestSimulateExactMdp:
    @pytest.fixture()
    def pp2_file(self, tmp_path, pp2):
        path = tmp_path / "pp2.json"
        write_scheme(pp2, path)
        return path

    def test_simulate_byte_identical(self, pp2_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        flags = ["simulate", "--scheme", str(pp2_file), "--scheduler", "ranked",
                 "--rank", "harmonic", "--init", "ud", "--mu", "1", "--runs", "500",
                 "--seed", "9"]
        assert main(flags + ["--out", str(a)]) == 0
        assert main(flags + ["--out", str(b), "--threads", "2"]) == 0
        da, db = json.loads(a.read_text()), json.loads(b.read_text())
        assert da["mean_download_time"] == db["mean_download_time"]
        assert a.with_suffix(".profile.csv").exists()
        # identical flags twice: byte-identical artifact
        first = a.read_bytes()
        assert main(flags + ["--out", str(a)]) == 0
        assert a.read_bytes() == first

    def test_simulate_csv_format(self, pp2_file, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["simulate", "--scheme", str(pp2_file), "--runs", "50",
                     "--seed", "1", "--format", "csv", "--out", str(out)]) == 0
        text = out.read_text()
        assert "# scheme_hash=" in text
        assert "mean_download_time" in text

    def test_exact_matches_reference(self, tmp_path, ring4):
        path = tmp_path / "ring.json"
        write_scheme(ring4, path)
        out = tmp_path / "exact.json"
        assert main(["exact", "--scheme", str(path), "--scheduler", "random",
                     "--mu", "1", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["mean_download_time"] == pytest.approx(21 / 16)
        assert doc["mean_download_time_exact"] == "21/16"
        assert doc["jensen_lower_bound"] <= 21 / 16

    def test_mdp_reports_gap(self, pp2_file, tmp_path):
        out = tmp_path / "mdp.json"
        assert main(["mdp", "--scheme", str(pp2_file), "--compare-rank", "harmonic",
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["compare"]["relative_gap"] >= 0.0
        assert doc["optimal_value"] > 0

    def test_mdp_cap_exits_one(self, tmp_path, capsys):
        from fragsched import cyclic_shift

        path = tmp_path / "big.json"
        write_scheme(cyclic_shift(25, 3), path)
        assert main(["mdp", "--scheme", str(path)]) == 1


class TestEnsembleCli:
    def test_ensemble_csv(self, tmp_path):
        out = tmp_path / "ens.csv"
        assert main(["ensemble", "--kind", "rep", "--mode", "fragment", "--B", "5",
                     "--V", "8", "--R", "2", "--samples", "300", "--seed", "4",
                     "--out", str(out)]) == 0
        text = out.read_text().splitlines()
        header = [l for l in text if l.startswith("#")]
        assert any("duplicate_frequency" in l for l in header)
        body = [l for l in text if not l.startswith("#")]
        assert body[0] == "ell,mean_N,se_N,expected_N"
        assert len(body) == 1 + 8


class TestReproduce:
    def test_appendix_means_passes(self, capsys):
        assert main(["reproduce", "appendix-means"]) == 0
        out = capsys.readouterr().out
        assert "21/16" in out and "11/8" in out

    def test_table_smoke(self, tmp_path, capsys):
        # structural smoke run at a tiny run count; tolerance enforcement is
        # exercised at full scale by the acceptance battery
        out = tmp_path / "table.csv"
        rc = main(["reproduce", "table-download-times", "--runs", "400",
                   "--seed", "20260809", "--threads", "2", "--out", str(out)])
        assert rc in (0, 1)
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "row,mean,reference,rel_error,status"
        assert len(lines) == 1 + 4
        stdout = capsys.readouterr().out
        assert "pp/harmonic-ud" in stdout

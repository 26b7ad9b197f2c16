import glob

import pytest

from maxentbn.cli import run


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestValidate:
    def test_all_shipped_models(self, capsys):
        paths = sorted(glob.glob("models/*.cn"))
        assert len(paths) >= 4
        for path in paths:
            code, out, err = invoke(capsys, "validate", path)
            assert code == 0, (path, err)
            assert out.startswith("warning:") or out.startswith("ok:")

    def test_parse_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cn"
        bad.write_text("vars A\nP(A|A)=0.5\n")
        code, out, err = invoke(capsys, "validate", str(bad))
        assert code == 2
        assert "parse error" in err

    def test_missing_file_exit_2(self, capsys):
        code, _, err = invoke(capsys, "validate", "models/nonexistent.cn")
        assert code == 2

    def test_scope_warning_printed(self, tmp_path, capsys):
        f = tmp_path / "warn.cn"
        f.write_text("vars A B C\nP(A|B)=0.7\nP(C)=0.5\n")
        code, out, _ = invoke(capsys, "validate", str(f))
        assert code == 0
        assert "warning" in out


class TestCheck:
    def test_mining_consistent(self, capsys):
        code, out, _ = invoke(capsys, "check", "models/mining.cn")
        assert code == 0
        assert out.splitlines()[0] == "consistent"

    def test_quad_inconsistent_exit_1(self, capsys):
        code, out, _ = invoke(capsys, "check", "models/inconsistent-quad.cn")
        assert code == 1
        assert out.splitlines()[0] == "inconsistent"

    def test_local_check_culprit(self, capsys):
        code, out, _ = invoke(capsys, "check", "models/contradiction.cn", "--local")
        assert code == 1
        assert "culprit" in out

    def test_local_mining_with_witness(self, capsys):
        code, out, _ = invoke(capsys, "check", "models/mining.cn", "--local",
                              "--witness")
        assert code == 0
        assert "scope A C D" in out


class TestDecompose:
    def test_mining(self, capsys):
        code, out, _ = invoke(capsys, "decompose", "models/mining.cn")
        assert code == 0
        assert "fill-in: none" in out
        assert "{A,C,D}; {B,C,D}" in out
        assert "cost: 16" in out

    def test_graph_file_anneal(self, capsys):
        code, out, _ = invoke(capsys, "decompose", "models/sixring.graph",
                              "--graph", "--method", "anneal", "--seed", "1")
        assert code == 0
        assert "cost: 32" in out


class TestDsep:
    def test_separated(self, capsys):
        code, out, _ = invoke(capsys, "dsep", "models/mining.cn",
                              "--x", "A", "--y", "B", "--given", "C,D")
        assert code == 0
        assert out.strip() == "separated"

    def test_not_separated(self, capsys):
        code, out, _ = invoke(capsys, "dsep", "models/mining.cn",
                              "--x", "A", "--y", "C")
        assert code == 0
        assert out.strip() == "not separated"

    def test_unknown_variable_exit_2(self, capsys):
        code, _, err = invoke(capsys, "dsep", "models/mining.cn",
                              "--x", "A", "--y", "Z")
        assert code == 2


class TestSolve:
    def test_dual(self, capsys):
        code, out, _ = invoke(capsys, "solve", "models/fig21.cn",
                              "--method", "dual")
        assert code == 0
        assert "scope A B" in out
        assert "0.2808" in out or "0.280750" in out

    def test_successive_with_trace(self, capsys):
        code, out, _ = invoke(capsys, "solve", "models/fig21.cn",
                              "--method", "successive", "--trace")
        assert code == 0
        assert "converged: yes" in out
        assert "P(B|A)=0.8" in out  # trace lines included

    def test_decomposed(self, capsys):
        code, out, _ = invoke(capsys, "solve", "models/mining.cn",
                              "--method", "decomposed")
        assert code == 0
        assert "clique A,C,D" in out
        assert "clique B,C,D" in out

    def test_tsv_format(self, capsys):
        code, out, _ = invoke(capsys, "solve", "models/fig21.cn",
                              "--method", "dual", "--format", "tsv")
        assert code == 0
        assert "A B\t00\t" in out

    def test_nonconvergence_exit_1(self, capsys):
        code, out, _ = invoke(capsys, "solve", "models/inconsistent-quad.cn",
                              "--method", "successive", "--max-cycles", "5")
        assert code == 1
        assert "converged: no" in out

    def test_inconsistent_dual_exit_1(self, capsys):
        code, _, err = invoke(capsys, "solve", "models/inconsistent-quad.cn",
                              "--method", "dual", "--max-iterations", "60")
        assert code == 1


class TestQueryVerb:
    def test_marginal(self, capsys):
        code, out, _ = invoke(capsys, "query", "models/mining.cn",
                              "--event", "C,D")
        assert code == 0
        assert out.startswith("P(C,D) = 0.11")

    def test_conditional(self, capsys):
        code, out, _ = invoke(capsys, "query", "models/fig21.cn",
                              "--event", "A", "--given", "B")
        assert code == 0
        assert out.startswith("P(A|B) = 0.70")

    def test_cross_clique_exit_2(self, capsys):
        code, _, err = invoke(capsys, "query", "models/mining.cn",
                              "--event", "A,B")
        assert code == 2
        assert "span multiple cliques" in err


class TestBenchVerb:
    def test_report_shape(self, capsys):
        code, out, _ = invoke(capsys, "bench", "models/fig21.cn")
        assert code == 0
        assert "speedup:" in out
        assert "max marginal deviation:" in out


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ("validate", "models/mining.cn"),
        ("check", "models/mining.cn"),
        ("check", "models/mining.cn", "--local"),
        ("decompose", "models/mining.cn"),
        ("decompose", "models/sixring.graph", "--graph", "--method", "anneal",
         "--seed", "11"),
        ("dsep", "models/mining.cn", "--x", "A", "--y", "B", "--given", "C,D"),
        ("solve", "models/mining.cn", "--method", "decomposed", "--trace"),
        ("solve", "models/fig21.cn", "--method", "dual"),
        ("query", "models/mining.cn", "--event", "C,D"),
    ])
    def test_identical_argv_identical_output(self, capsys, argv):
        code1, out1, err1 = invoke(capsys, *argv)
        code2, out2, err2 = invoke(capsys, *argv)
        assert (code1, out1, err1) == (code2, out2, err2)

    def test_usage_error_exit_2(self, capsys):
        assert run(["frobnicate"]) == 2
        capsys.readouterr()
        assert run(["solve", "models/fig21.cn", "--method", "bogus"]) == 2
        capsys.readouterr()

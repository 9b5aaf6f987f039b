import io
import shlex
import subprocess
import sys

import pytest

from puzzlepieces import cli
from puzzlepieces.symbolic import SymbolicContext, parse_word


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def records(text):
    return [dict(tok.split("=", 1) for tok in shlex.split(line)) for line in text.splitlines()]


def test_word_gcd():
    code, out, _ = run("word", "gcd", "s-2 s+3", "s-3 s+3")
    assert code == 0
    assert out == "gcd=s+3 nu=3\n"


def test_word_div_and_classify():
    code, out, _ = run("word", "div", "s-2 s+3", "s+3")
    assert code == 0 and "true" in out
    code, out, _ = run("word", "classify", "s-2 s+3", "--M", "10")
    rec = records(out)[0]
    assert rec["complete"] == "true" and rec["order"] == "5"


def test_quad_bounds_dp_identity():
    code, out, _ = run("quad", "bounds", "--checks", "dp-identity", "--a", "-1.9998")
    assert code == 0
    rec = records(out)[0]
    assert rec["passed"] == "true" and float(rec["margin"]) < 1e-9


def test_scan_roots():
    code, out, _ = run("scan", "roots", "--m-max", "12", "--out", "csv")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "m,a_m" and len(rows) == 13
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    # full precision output
    assert all(len(r.split(",")[1].lstrip("-").replace(".", "")) >= 16 for r in rows[1:])


def test_usage_error_exit_code():
    code, _, err = run("word", "nope")
    assert code == cli.EXIT_USAGE
    assert "usage" in err
    assert run()[0] == cli.EXIT_USAGE


def test_precondition_error_exit_code():
    code, _, err = run("quad", "piece", "--word", "s+99", "--M", "10")
    assert code == cli.EXIT_PRECONDITION
    assert "ParseError" in err


def test_indeterminate_exit_code():
    # the first critical word needs itself to be built at this parameter
    code, out, _ = run("quad", "sr", "--a", "-1.999996472758271", "--M", "10", "--depth", "3")
    assert code == cli.EXIT_INDETERMINATE
    assert records(out)[0]["status"] == "indeterminate"


def test_deterministic_output():
    argv = ("scan", "pliss", "--k", "50", "--seed", "3")
    assert run(*argv)[1] == run(*argv)[1]
    argv = ("quad", "itinerary", "--M", "10", "--depth", "2")
    assert run(*argv)[1] == run(*argv)[1]


def test_threads_do_not_change_output():
    base = ("scan", "sr", "--M", "8", "--depth", "2", "--n", "40")
    assert run(*base, "--threads", "1")[1] == run(*base, "--threads", "3")[1]


def test_printed_words_reparse():
    ctx = SymbolicContext(10)
    code, out, _ = run("quad", "itinerary", "--M", "10", "--depth", "2",
                       "--a", str(-1.9999984312644297 + 0.2 * 4.706250531e-6))
    assert code in (0, 2)
    words = [r["word"] for r in records(out) if "word" in r]
    assert words
    for text in words:
        assert str(parse_word(text, ctx, validate=False)) == text
    code, out, _ = run("word", "fav", "tA . s+3 s-4", "--M", "10", "--max-order", "12")
    for r in records(out):
        assert str(parse_word(r["divisor"], ctx)) == r["divisor"]


def _clear_env(monkeypatch):
    for key in list(cli.os.environ):
        if key.startswith("PZD_"):
            monkeypatch.delenv(key)


def test_config_precedence(tmp_path, monkeypatch):
    _clear_env(monkeypatch)
    conf = tmp_path / "pzd.conf"
    conf.write_text("M = 9\nout = csv\n")
    code, out, _ = run("quad", "context", "--config", str(conf))
    assert code == 0 and out.startswith("a,") and ",9," in out.splitlines()[1] + ","
    # environment beats the file
    monkeypatch.setenv("PZD_M", "8")
    code, out, _ = run("quad", "context", "--config", str(conf))
    assert ",8," in out.splitlines()[1] + ","
    # flags beat both
    code, out, _ = run("quad", "context", "--config", str(conf), "--M", "10")
    assert ",10," in out.splitlines()[1] + ","


def test_config_path_from_env(tmp_path, monkeypatch):
    _clear_env(monkeypatch)
    conf = tmp_path / "pzd.conf"
    conf.write_text("out = csv\n")
    monkeypatch.setenv("PZD_CONFIG", str(conf))
    assert run("scan", "roots", "--m-max", "2")[1].startswith("m,a_m")


def test_bad_config_line(tmp_path, monkeypatch):
    _clear_env(monkeypatch)
    conf = tmp_path / "bad.conf"
    conf.write_text("no equals sign\n")
    assert run("quad", "context", "--config", str(conf))[0] == cli.EXIT_PRECONDITION


def test_gap_files(tmp_path):
    k = tmp_path / "k.txt"
    kt = tmp_path / "kt.txt"
    k.write_text("0 0.1\n0.05 0.1\n")
    kt.write_text("# hull then gaps\n0 1\n0.3 0.3001\n0.5 0.5001\n")
    code, out, _ = run("scan", "bm13", "--k", str(k), "--ktilde", str(kt))
    assert code == 0
    assert float(records(out)[0]["measure"]) > 0
    code, out, _ = run("scan", "gaps", "--in", str(kt), "--d", "0")
    assert float(records(out)[0]["lp_sum"]) == pytest.approx(2e-4)


def test_henon_commands():
    a = str(-1.9999984312644297 + 0.2 * 4.706250531e-6)
    code, out, _ = run("henon", "boxes", "--M", "10", "--a", a, "--b", "1e-6", "--family", "henon")
    assert code == 0 and "cover_residual" in out
    code, out, _ = run("henon", "affine", "--word", "s-2", "--M", "10", "--a", a, "--b", "1e-6",
                       "--family", "henon")
    assert code == 0
    code, out, _ = run("henon", "critical", "--target", "s+3", "--M", "10", "--a", a)
    assert code == 0 and "in_position" in out


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "puzzlepieces.cli", "word", "gcd", "s-2", "s+2"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout == "gcd=e nu=0\n"

import pytest

from flmarket.cli import main
from flmarket.config import ConfigError, parse_config
from flmarket.ledger import HashChainLedger


SMALL_CONFIG = """\
n_clients = 6
k_select = 3
rounds = 2
seeds = 0, 1
theta_min = 0.3
local_epochs = 2
"""


def write_config(tmp_path, body, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return path


class TestParseConfig:
    def test_minimal_config_fills_defaults(self, tmp_path):
        path = write_config(tmp_path, "n_clients = 10\nk_select = 3\n")
        config = parse_config(path)
        assert config.n_clients == 10
        assert config.k_values == [3]
        assert config.w1 == config.w2 == 0.5
        assert config.delta == 2.0
        assert config.lam == 1.0

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = write_config(tmp_path, "# a comment\n\nn_clients = 4\nk_select = 2\n")
        assert parse_config(path).n_clients == 4

    def test_k_exceeding_n_names_the_invariant(self, tmp_path):
        path = write_config(tmp_path, "n_clients = 3\nk_select = 5\n")
        with pytest.raises(ConfigError, match="k_select <= n_clients"):
            parse_config(path)

    def test_bad_weights_name_the_invariant(self, tmp_path):
        path = write_config(tmp_path, "w1 = 0.9\nw2 = 0.2\n")
        with pytest.raises(ConfigError, match=r"w1 \+ w2 = 1"):
            parse_config(path)

    def test_unknown_key_reports_line_number(self, tmp_path):
        path = write_config(tmp_path, "n_clients = 3\nbogus = 1\n")
        with pytest.raises(ConfigError, match=":2:"):
            parse_config(path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = write_config(tmp_path, "just some words\n")
        with pytest.raises(ConfigError, match=":1:"):
            parse_config(path)

    def test_unparseable_value_reports_key(self, tmp_path):
        path = write_config(tmp_path, "rounds = many\n")
        with pytest.raises(ConfigError, match="rounds"):
            parse_config(path)

    def test_digest_tracks_config_content(self, tmp_path):
        a = parse_config(write_config(tmp_path, "n_clients = 5\nk_select = 2\n", "a.cfg"))
        b = parse_config(write_config(tmp_path, "n_clients = 5\nk_select = 2\n", "b.cfg"))
        c = parse_config(write_config(tmp_path, "n_clients = 6\nk_select = 2\n", "c.cfg"))
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()


class TestSolveCommand:
    def test_complete_top_type(self, capsys):
        assert main(["solve", "--theta", "1.0"]) == 0
        out = capsys.readouterr().out
        assert "q=1.5" in out and "r=0.75" in out

    def test_incomplete_regime(self, capsys):
        assert main(["solve", "--theta", "0.5", "--regime", "incomplete"]) == 0
        out = capsys.readouterr().out
        # q* = (1 + 2*0.5)^2 / 6
        assert f"q={(2.0 ** 2) / 6!r}" in out

    def test_invalid_theta_is_a_usage_error(self):
        assert main(["solve", "--theta", "1.5"]) == 2


class TestVerifyLedgerCommand:
    def _chain_file(self, tmp_path, n=12):
        ledger = HashChainLedger()
        for i in range(n):
            ledger.append(i // 3, i % 3, 0.01 * i, 0.1 * i)
        path = tmp_path / "chain.bin"
        ledger.save(path)
        return path

    def test_clean_file_exits_zero(self, tmp_path, capsys):
        path = self._chain_file(tmp_path)
        assert main(["verify-ledger", str(path)]) == 0
        assert "OK (12 records)" in capsys.readouterr().out

    def test_flipped_byte_exits_one_with_index(self, tmp_path, capsys):
        path = self._chain_file(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[8 + 5 * 96 + 16] ^= 0x01  # epsilon byte of record 5
        path.write_bytes(bytes(raw))
        assert main(["verify-ledger", str(path)]) == 1
        assert "tampered at index 5" in capsys.readouterr().out

    def test_empty_file_is_a_valid_empty_chain(self, tmp_path, capsys):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        assert main(["verify-ledger", str(path)]) == 0
        assert "OK (0 records)" in capsys.readouterr().out

    def test_truncated_file_is_a_format_error(self, tmp_path, capsys):
        path = self._chain_file(tmp_path)
        path.write_bytes(path.read_bytes()[:-7])
        assert main(["verify-ledger", str(path)]) == 1
        assert "format error" in capsys.readouterr().err

    def test_missing_file_exits_one(self, tmp_path):
        assert main(["verify-ledger", str(tmp_path / "nope.bin")]) == 1


class TestRunCommand:
    def test_writes_all_csvs(self, tmp_path):
        body = SMALL_CONFIG + (
            f"output_dir = {tmp_path / 'out'}\n"
            "tamper_alphas = 0.5\n"
            "tamper_betas = 2.0\n"
            "ledger_modes = chained, vulnerable\n"
        )
        path = write_config(tmp_path, body)
        assert main(["run", str(path)]) == 0
        out = tmp_path / "out"
        for name in ("rounds.csv", "summary.csv", "reputation.csv", "robustness.csv"):
            assert (out / name).exists(), name

    def test_csv_headers_carry_config_hash_and_seeds(self, tmp_path):
        body = SMALL_CONFIG + f"output_dir = {tmp_path / 'out'}\n"
        path = write_config(tmp_path, body)
        config = parse_config(path)
        assert main(["run", str(path)]) == 0
        first = (tmp_path / "out" / "summary.csv").read_text().splitlines()[0]
        assert first == f"# config_sha={config.digest()} seeds=0,1"

    def test_summary_has_one_row_per_mechanism_per_k(self, tmp_path):
        body = SMALL_CONFIG + f"output_dir = {tmp_path / 'out'}\n"
        path = write_config(tmp_path, body)
        assert main(["run", str(path)]) == 0
        lines = (tmp_path / "out" / "summary.csv").read_text().splitlines()
        assert lines[1] == "mechanism,k,mean_utility,std_utility"
        assert len(lines) == 2 + 4  # comment + header + 4 mechanisms at one k

    def test_reruns_are_byte_identical(self, tmp_path):
        body = SMALL_CONFIG + f"output_dir = {tmp_path / 'out'}\n"
        path = write_config(tmp_path, body)
        assert main(["run", str(path)]) == 0
        first = {
            n: (tmp_path / "out" / n).read_bytes()
            for n in ("rounds.csv", "summary.csv", "reputation.csv")
        }
        assert main(["run", str(path)]) == 0
        for name, blob in first.items():
            assert (tmp_path / "out" / name).read_bytes() == blob, name

    def test_missing_config_is_a_usage_error(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.cfg")]) == 2

    def test_invalid_config_is_a_usage_error(self, tmp_path):
        path = write_config(tmp_path, "n_clients = 3\nk_select = 9\n")
        assert main(["run", str(path)]) == 2

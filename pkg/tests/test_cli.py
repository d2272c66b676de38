import pandas as pd
import pytest

from cli import build_spec, main, parse_args

TINY_CONFIG = """\
num_users = 2
num_aps = 4
antennas_per_ap = 2
association_size = 2
area_side_m = 200
schemes = upc
num_drops = 1
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path


@pytest.fixture
def results(tmp_path, config_file):
    out_dir = tmp_path / "results"
    assert main(['run', str(config_file), '--seed', '5', '--out-dir', str(out_dir)]) == 0
    return out_dir / "results.csv"


def test_run_writes_the_table(results):
    table = pd.read_csv(results)
    assert len(table) == 8
    assert set(table['scheme']) == {'upc'}


def test_resume_reproduces_the_table(tmp_path, config_file, results):
    out_dir = tmp_path / "resumed"
    args = ['run', str(config_file), '--seed', '5', '--resume', '--out-dir', str(out_dir)]
    assert main(args) == 0
    assert main(args) == 0
    assert (out_dir / "results.csv").read_text() == results.read_text()


def test_overrides(config_file):
    spec = build_spec(parse_args(['run', str(config_file), '--seed', '3', '--drops', '4']))
    assert spec.master_seed == 3
    assert spec.num_drops == 4


def test_sweep_grids(config_file):
    spec = build_spec(parse_args(['sweep', str(config_file), '--users', '2,3',
                                  '--sar-caps', '0.08,0.008']))
    assert spec.sweeps == {'num_users': [2, 3], 'sar_cap': [0.08, 0.008]}


def test_sweep_without_grid(config_file):
    assert main(['sweep', str(config_file)]) == 1


def test_cdf(tmp_path, results):
    out_dir = tmp_path / "cdf"
    assert main(['cdf', str(results), '--group-by', 'scheme,direction',
                 '--out-dir', str(out_dir)]) == 0
    assert (out_dir / "cdf_rate_upc_dl.csv").exists()
    assert (out_dir / "cdf_rate_upc_ul.csv").exists()
    assert (out_dir / "plot_rate_cdf.py").exists()


def test_cdf_of_a_missing_table(tmp_path):
    assert main(['cdf', str(tmp_path / "absent.csv")]) == 1


def test_summary(results, capsys):
    assert main(['summary', str(results)]) == 0
    output = capsys.readouterr().out
    assert 'upc' in output
    assert 'cell_free' in output


def test_missing_config(tmp_path):
    assert main(['run', str(tmp_path / "absent.cfg")]) == 1


def test_unknown_command():
    with pytest.raises(SystemExit):
        parse_args(['plot'])

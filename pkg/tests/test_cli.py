import json

import numpy as np
import pytest

from cmvborg import cli
from cmvborg.errors import ConfigError, NoConvergence


def write_config(tmp_path, name='cfg.json', **cfg):
    cfg.setdefault('out', str(tmp_path / 'out'))
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


BORG = {'kind': 'borg', 'theta0': np.pi / 2, 'theta1': 3 * np.pi / 2}


def test_spectrum_free(tmp_path):
    path = write_config(tmp_path, m=2, sequence={'kind': 'free'}, n_sites=64)
    assert cli.main(['spectrum', '--config', path]) == cli.EXIT_OK
    out = tmp_path / 'out'
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['schema'] == 1 and summary['ok']
    assert summary['in_arc_fraction'] == 1.0
    assert summary['count'] == 128
    assert summary['mass_defect'] < 1e-10
    lines = (out / 'eigenangles.csv').read_text().splitlines()
    assert lines[0] == 'index,theta' and len(lines) == 129
    assert (out / 'measure.csv').exists()


def test_spectrum_borg_in_arc(tmp_path):
    path = write_config(tmp_path, m=1, sequence=BORG, n_sites=128)
    assert cli.main(['spectrum', '--config', path]) == cli.EXIT_OK
    summary = json.loads((tmp_path / 'out' / 'summary.json').read_text())
    assert summary['in_arc_fraction'] >= 0.99


def test_spectrum_fail_exit(tmp_path):
    path = write_config(tmp_path, m=1, sequence={'kind': 'free'}, n_sites=64,
                        arc=[1.0, 2.0])
    assert cli.main(['spectrum', '--config', path]) == cli.EXIT_FAIL


def test_deterministic_outputs(tmp_path):
    seq = {'kind': 'random', 'support': [-4, 3], 'max_norm': 0.8}
    a = write_config(tmp_path, 'a.json', m=2, sequence=seq, n_sites=32,
                     out=str(tmp_path / 'a'))
    b = write_config(tmp_path, 'b.json', m=2, sequence=seq, n_sites=32,
                     out=str(tmp_path / 'a'))
    cli.main(['spectrum', '--config', a, '--seed', '11'])
    first = (tmp_path / 'a' / 'eigenangles.csv').read_bytes()
    cli.main(['spectrum', '--config', b, '--seed', '11', '--out', str(tmp_path / 'b')])
    assert (tmp_path / 'b' / 'eigenangles.csv').read_bytes() == first
    assert ((tmp_path / 'b' / 'measure.csv').read_bytes()
            == (tmp_path / 'a' / 'measure.csv').read_bytes())
    cli.main(['spectrum', '--config', a, '--seed', '12', '--out', str(tmp_path / 'c')])
    assert (tmp_path / 'c' / 'eigenangles.csv').read_bytes() != first


@pytest.mark.parametrize('cfg', [
    {'m': 1, 'sequence': {'kind': 'nope'}},
    {'m': 1, 'sequence': {'kind': 'borg', 'theta0': 2.0}},
    {'m': 1, 'grid_n': 100},
    {'m': 1, 'J': 12},
    {'m': 1, 'tolerances': {'bogus': 1.0}},
    {'m': 1, 'unknown_key': 3},
    {'m': 2, 'sequence': {'kind': 'borg', 'theta0': 0, 'theta1': 1, 'gamma': [[1, 0]]}},
    {'m': 1, 'sequence': {'kind': 'free'}, 'perturb': [{'site': 0, 'delta': 1.5}]},
])
def test_config_errors(tmp_path, cfg):
    path = write_config(tmp_path, **cfg)
    assert cli.main(['spectrum', '--config', path]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(['trace', '--config', str(tmp_path / 'missing.json')]) == cli.EXIT_CONFIG
    bad = tmp_path / 'bad.json'
    bad.write_text('[1, 2]')
    assert cli.main(['trace', '--config', str(bad)]) == cli.EXIT_CONFIG


def test_borg_verify_requires_borg(tmp_path):
    path = write_config(tmp_path, m=1, sequence={'kind': 'free'})
    assert cli.main(['borg-verify', '--config', path]) == cli.EXIT_CONFIG


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def boom(*args, **kw):
        raise NoConvergence('did not settle')
    monkeypatch.setattr(cli.an, 'reflectionless_check', boom)
    path = write_config(tmp_path, m=1, sequence=BORG)
    assert cli.main(['reflectionless', '--config', path]) == cli.EXIT_NUMERIC


def test_unknown_command(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(['frobnicate', '--config', 'x.json'])


def test_trace_free(tmp_path):
    path = write_config(tmp_path, m=1, sequence={'kind': 'free'}, grid_n=256,
                        r_final=0.99, J=3)
    assert cli.main(['trace', '--config', path]) == cli.EXIT_OK
    rep = json.loads((tmp_path / 'out' / 'trace_report.json').read_text())
    assert rep['command'] == 'trace' and rep['ok']


def test_xi_borg(tmp_path):
    path = write_config(tmp_path, m=1, sequence=BORG, grid_n=512, r_final=0.999)
    assert cli.main(['xi', '--config', path]) == cli.EXIT_OK
    rep = json.loads((tmp_path / 'out' / 'xi_report.json').read_text())
    assert rep['closed_form_deviation'] <= 0.05
    assert rep['normalization'] < 1e-2
    assert len((tmp_path / 'out' / 'xi.csv').read_text().splitlines()) > 512


def test_reflectionless_pass_and_fail(tmp_path):
    good = write_config(tmp_path, 'g.json', m=1, sequence=BORG, grid_n=128,
                        r_final=0.999, out=str(tmp_path / 'g'))
    assert cli.main(['reflectionless', '--config', good]) == cli.EXIT_OK
    bad = write_config(tmp_path, 'b.json', m=1, sequence=BORG, grid_n=128, r_final=0.999,
                       perturb=[{'site': 0, 'delta': -0.3}], out=str(tmp_path / 'b'))
    assert cli.main(['reflectionless', '--config', bad]) == cli.EXIT_FAIL
    rep = json.loads((tmp_path / 'b' / 'reflectionless_report.json').read_text())
    assert rep['ok'] is False


def test_resolvent_check(tmp_path):
    path = write_config(tmp_path, m=2, sequence={'kind': 'random', 'support': [-5, 4]},
                        resolvent={'z': [[0.5, 0.0], [0.3, 0.3]], 'count': 4, 'span': 6,
                                   'padding': 60})
    assert cli.main(['resolvent-check', '--config', path]) == cli.EXIT_OK
    rep = json.loads((tmp_path / 'out' / 'resolvent_report.json').read_text())
    assert rep['max_deviation'] <= 1e-8 and len(rep['entries']) == 8


def test_run_config_validation():
    with pytest.raises(ConfigError):
        cli.RunConfig(r_final=1.0)
    cfg = cli.RunConfig(tolerances={'trace': 1e-3})
    assert cfg.tolerances['trace'] == 1e-3 and cfg.tolerances['xi'] == 0.05

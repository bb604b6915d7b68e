"""
Tests for the command-line front end.
"""
import json

import pytest
from click.testing import CliRunner

from cli import EXIT_FAILED, EXIT_INPUT, EXIT_OK, cli

QUICK_SETTINGS = 'grid_n: 360\nraster_n: 400\noracle_grid_n: 256\n'


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_geometry(tmp_path):
    def write(params, name='geometry.json'):
        path = tmp_path / name
        path.write_text(json.dumps(dict(zip(('d2', 'd3', 'r2', 'r3', 'd4'), params))), encoding='utf-8')
        return str(path)
    return write


@pytest.fixture
def quick_settings(tmp_path):
    path = tmp_path / 'settings.yaml'
    path.write_text(QUICK_SETTINGS, encoding='utf-8')
    return str(path)


def test_classify_writes_report(runner, write_geometry, tmp_path):
    out = tmp_path / 'report.json'
    result = runner.invoke(cli, ['--log-level', 'ERROR', 'classify', write_geometry((0, 2, 1, 0, 2)),
                                 '--json', str(out)])
    assert result.exit_code == EXIT_OK
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['type_label'] == 'Transition A1-A2'
    assert report['computed'] is None


def test_missing_geometry_file_is_input_error(runner, tmp_path):
    result = runner.invoke(cli, ['classify', str(tmp_path / 'missing.json')])
    assert result.exit_code == EXIT_INPUT


def test_invalid_geometry_is_input_error(runner, write_geometry):
    result = runner.invoke(cli, ['classify', write_geometry((1, 3, 2, 0, 0))])
    assert result.exit_code == EXIT_INPUT
    assert 'd4' in result.output


def test_malformed_geometry_document(runner, tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{"d2": 1, "d3": ', encoding='utf-8')
    assert runner.invoke(cli, ['classify', str(path)]).exit_code == EXIT_INPUT


def test_unknown_setting_is_input_error(runner, write_geometry, tmp_path):
    path = tmp_path / 'settings.yaml'
    path.write_text('grid_size: 100\n', encoding='utf-8')
    result = runner.invoke(cli, ['--settings', str(path), 'classify', write_geometry((0, 2, 1, 0, 2))])
    assert result.exit_code == EXIT_INPUT


def test_sweep_csv_and_fixed_pairs(runner, tmp_path):
    out = tmp_path / 'sweep.csv'
    result = runner.invoke(cli, ['--log-level', 'ERROR', 'sweep', '--x', 'd3:0.5:2:5', '--y', 'd4:0.5:3:5',
                                 '--csv', str(out), '--fixed', 'd2=0', 'r2=1', 'r3=0'])
    assert result.exit_code == EXIT_OK
    lines = out.read_text(encoding='utf-8').splitlines()
    assert lines[0] == 'x,y,label,on_transition'
    assert len(lines) == 26


def test_sweep_missing_parameter_is_input_error(runner):
    result = runner.invoke(cli, ['sweep', '--x', 'd3:0.5:2:5', '--y', 'd4:0.5:3:5', '--fixed', 'd2=0'])
    assert result.exit_code == EXIT_INPUT


def test_sweep_bad_axis_is_input_error(runner):
    result = runner.invoke(cli, ['sweep', '--x', 'd3:2:0.5:5', '--y', 'd4:0.5:3:5',
                                 '--fixed', 'd2=0 r2=1 r3=0'])
    assert result.exit_code == EXIT_INPUT


@pytest.mark.slow
def test_analyze_writes_json_and_svg(runner, write_geometry, quick_settings, tmp_path):
    out, svg = tmp_path / 'report.json', tmp_path / 'workspace.svg'
    result = runner.invoke(cli, ['--log-level', 'ERROR', '--settings', quick_settings, 'analyze',
                                 write_geometry((0, 2, 1, 0, 3)), '--json', str(out), '--svg', str(svg)])
    assert result.exit_code == EXIT_OK
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['type_label'] == 'A3'
    assert report['computed']['n_cusps'] == 0
    assert report['configuration']['grid_n'] == 360
    assert svg.read_text(encoding='utf-8').lstrip().startswith('<?xml')


@pytest.mark.slow
def test_validate_exit_code(runner, write_geometry, quick_settings):
    result = runner.invoke(cli, ['--log-level', 'ERROR', '--settings', quick_settings, 'validate',
                                 write_geometry((0, 2, 0, 0, 1)), '--samples', '10'])
    assert result.exit_code in (EXIT_OK, EXIT_FAILED)
    assert 'oracle_agreement:' in result.output
    assert 'well_connected:' in result.output


def test_log_level_ignores_environment(runner, write_geometry, monkeypatch):
    levels = []
    monkeypatch.setenv('LOG_LEVEL', 'DEBUG')
    monkeypatch.setattr('cli.setup_logging', levels.append)
    result = runner.invoke(cli, ['classify', write_geometry((0, 2, 1, 0, 2))])
    assert result.exit_code == EXIT_OK
    assert levels == ['INFO']


def test_set_overrides_one_tolerance(runner, write_geometry, tmp_path):
    out = tmp_path / 'report.json'
    result = runner.invoke(cli, ['--log-level', 'ERROR', '--set', 'cert_eps=1e-8', '--set', 'grid-n=360',
                                 'classify', write_geometry((0, 2, 1, 0, 2)), '--json', str(out)])
    assert result.exit_code == EXIT_OK
    configuration = json.loads(out.read_text(encoding='utf-8'))['configuration']
    assert configuration['cert_eps'] == 1e-8
    assert configuration['grid_n'] == 360


def test_set_wins_over_settings_file(runner, write_geometry, quick_settings, tmp_path):
    out = tmp_path / 'report.json'
    result = runner.invoke(cli, ['--log-level', 'ERROR', '--settings', quick_settings, '--set', 'raster_n=600',
                                 'classify', write_geometry((0, 2, 1, 0, 2)), '--json', str(out)])
    assert result.exit_code == EXIT_OK
    configuration = json.loads(out.read_text(encoding='utf-8'))['configuration']
    assert configuration['raster_n'] == 600
    assert configuration['grid_n'] == 360


@pytest.mark.parametrize('item', ['cert_eps', 'grid_size=100', 'grid_n=fine', 'grid_n=10'])
def test_bad_set_is_input_error(runner, write_geometry, item):
    result = runner.invoke(cli, ['--set', item, 'classify', write_geometry((0, 2, 1, 0, 2))])
    assert result.exit_code == EXIT_INPUT

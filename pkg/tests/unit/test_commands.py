"""
Tests for the management commands and the run ledger.
"""
import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from experiments.management.commands.verify_bounds import Command as VerifyBoundsCommand
from experiments.models import CertificateRecord, ScenarioRun


def run(command, *args):
    out, err = StringIO(), StringIO()
    call_command(command, *args, stdout=out, stderr=err)
    return out.getvalue()


@pytest.mark.django_db
class TestCertifyCommand:
    """python manage.py certify"""

    def test_writes_report(self, scalar_document, write_config, tmp_path):
        output = run('certify', '--config', write_config(scalar_document), '--out', str(tmp_path))
        report = json.loads((tmp_path / 'certificates.json').read_text())
        assert 'CERTIFICATES' in output
        assert len(report['config_hash']) == 64
        assert report['decisions']
        cert = report['certificates'][0]
        for name in ('beta', 'eta', 'ell_star', 'tau', 'epsilon', 'r_N', 'c_terminal', 'd',
                     'h0', 'c_delta_mu', 'b0', 'cbar'):
            assert cert[name] is not None

        ledger = ScenarioRun.objects.get()
        assert ledger.command == 'certify'
        assert ledger.status == 'completed'
        assert CertificateRecord.objects.filter(run=ledger, horizon=3).exists()

    def test_dump_qp(self, scalar_document, write_config, tmp_path):
        run('certify', '--config', write_config(scalar_document), '--out', str(tmp_path),
            '--dump-qp')
        report = json.loads((tmp_path / 'certificates.json').read_text())
        assert len(report['condensed']['3']['H']) == 3

    def test_double_integrator_preset(self, tmp_path):
        run('certify', '--preset', 'double_integrator', '--out', str(tmp_path))
        report = json.loads((tmp_path / 'certificates.json').read_text())
        assert report['certificates'][0]['N'] == 5

    def test_refusal_exit_code(self, scalar_document, write_config, tmp_path):
        scalar_document['budget'] = 1
        ell_star_document = dict(scalar_document, budget='auto')
        run('certify', '--config', write_config(ell_star_document, 'auto.json'),
            '--out', str(tmp_path))
        report = json.loads((tmp_path / 'certificates.json').read_text())
        if report['certificates'][0]['ell_star'] < 1.0:
            pytest.skip('every budget certifies this design')

        with pytest.raises(CommandError) as excinfo:
            run('certify', '--config', write_config(scalar_document), '--out', str(tmp_path))
        assert excinfo.value.returncode == 2
        assert 'increase ell' in str(excinfo.value)
        assert ScenarioRun.objects.filter(status='refused').count() == 1

    def test_invalid_config_exit_code(self, scalar_document, write_config):
        scalar_document['cost']['Q'] = [[0.0]]
        with pytest.raises(CommandError) as excinfo:
            run('certify', '--config', write_config(scalar_document))
        assert excinfo.value.returncode == 1


@pytest.mark.django_db
class TestSimulateCommand:
    """python manage.py simulate / dimsumpc"""

    def test_tdmpc_run(self, scalar_document, write_config, tmp_path):
        output = run('simulate', '--config', write_config(scalar_document), '--out', str(tmp_path))
        assert 'TDMPC RUN' in output
        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert summary['T'] == 20
        assert summary['uncertified'] is False

        ledger = ScenarioRun.objects.get()
        assert ledger.status == 'completed'
        assert ledger.total_cost == pytest.approx(summary['J_T'])
        assert ledger.suboptimality == pytest.approx(summary['R'])

    def test_zero_state(self, scalar_document, write_config, tmp_path):
        scalar_document['x0'] = [0.0]
        run('simulate', '--config', write_config(scalar_document), '--out', str(tmp_path))
        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert summary['J_T'] == 0.0
        assert summary['R'] == 0.0

    def test_optimal_mode(self, scalar_document, write_config, tmp_path):
        scalar_document['mode'] = 'optimal'
        run('simulate', '--config', write_config(scalar_document), '--out', str(tmp_path))
        assert (tmp_path / 'trajectory.csv').exists()
        assert not (tmp_path / 'optimal.csv').exists()

    def test_dimsumpc_command_rejects_other_modes(self, scalar_document, write_config):
        with pytest.raises(CommandError) as excinfo:
            run('dimsumpc', '--config', write_config(scalar_document))
        assert excinfo.value.returncode == 1

    def test_certified_dimsumpc(self, tmp_path):
        output = run('dimsumpc', '--preset', 'scalar_dimsumpc_certified', '--out', str(tmp_path))
        assert 'DIMSUMPC RUN' in output
        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert summary['uncertified'] is False
        assert ScenarioRun.objects.get().command == 'dimsumpc'

    def test_repeat(self, scalar_document, write_config, tmp_path):
        run('simulate', '--config', write_config(scalar_document), '--out', str(tmp_path),
            '--repeat', '2')
        summary = json.loads((tmp_path / 'summary.json').read_text())
        assert summary['metadata']['repeat'] == 2


@pytest.mark.django_db
class TestCompareCommand:

    def test_identical_configs(self, scalar_document, write_config, tmp_path):
        path = write_config(scalar_document)
        run('compare', '--config', path, '--config', path, '--out', str(tmp_path))
        comparison = json.loads((tmp_path / 'comparison.json').read_text())
        assert comparison['delta_J_T'] == 0.0
        assert comparison['first']['cumulative_flop_proxy'] == \
            comparison['second']['cumulative_flop_proxy']

    def test_mismatch_exit_code(self, scalar_document, write_config, tmp_path):
        first = write_config(scalar_document, 'first.json')
        scalar_document['T'] = 10
        second = write_config(scalar_document, 'second.json')
        with pytest.raises(CommandError) as excinfo:
            run('compare', '--config', first, '--config', second, '--out', str(tmp_path))
        assert excinfo.value.returncode == 1

    def test_needs_two_scenarios(self, scalar_document, write_config):
        with pytest.raises(CommandError) as excinfo:
            run('compare', '--config', write_config(scalar_document))
        assert excinfo.value.returncode == 1


@pytest.mark.django_db
class TestVerifyBoundsCommand:

    def test_refuses_optimal_preset(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            run('verify_bounds', '--preset', 'pendulum_optimal', '--out', str(tmp_path))
        assert excinfo.value.returncode == 2
        assert ScenarioRun.objects.get().status == 'refused'

    def test_refuses_override(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            run('verify_bounds', '--preset', 'pendulum_tdmpc', '--out', str(tmp_path))
        assert excinfo.value.returncode == 2

    def test_writes_reports(self, scalar_document, write_config, tmp_path):
        scalar_document['x0'] = [0.0]
        run('verify_bounds', '--config', write_config(scalar_document), '--out', str(tmp_path))
        document = json.loads((tmp_path / 'bounds.json').read_text())
        assert all(report['satisfied'] for report in document['reports'])

    def test_help_names_hyphenated_command(self):
        assert 'verify-bounds' in VerifyBoundsCommand.help


@pytest.mark.django_db
class TestRunsCommand:

    def test_empty_ledger(self):
        assert 'No runs recorded' in run('runs')

    def test_lists_runs(self, scalar_document, write_config, tmp_path):
        run('simulate', '--config', write_config(scalar_document), '--out', str(tmp_path))
        output = run('runs', '--status', 'completed')
        assert 'simulate' in output
        assert 'Showing 1 of 1 runs' in output

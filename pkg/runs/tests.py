import tempfile
from datetime import timedelta
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag
from django.urls import reverse
from django.utils import timezone
from rest_framework import status
from rest_framework.test import APIClient

from config.unfold_admin import get_navigation_for_user
from core.exceptions import ConfigError, ModelValidationError
from observables.export import read_header

from .config import RunConfig, column_label, parse_model_value, sweep_grid
from .models import SimulationRun

PUMP_SWEEP = {
    'preset': 'paper-default-2lvl',
    'backend': 'exact',
    'sweep': {'parameter': 'gamma_pump', 'values': ['1 MHz', '10 MHz', '100 MHz']},
}


class WorkspaceMixin:

    def setUp(self):
        super().setUp()
        workspace = tempfile.TemporaryDirectory()
        self.addCleanup(workspace.cleanup)
        self.root = Path(workspace.name)

    def write_config(self, data, name='run.yaml'):
        path = self.root / name
        path.write_text(yaml.safe_dump(data))
        return str(path)

    def nvsim(self, *args):
        stdout = StringIO()
        call_command('nvsim', *args, stdout=stdout, stderr=StringIO())
        return stdout.getvalue()


# =============================================================================
# RUN CONFIG
# =============================================================================

class RunConfigTests(SimpleTestCase):

    def test_defaults(self):
        config = RunConfig.from_dict({'preset': 'paper-default-2lvl'})
        self.assertEqual(config.command, 'steady-sweep')
        self.assertEqual(config.backend, 'exact')
        self.assertEqual(config.sweep_values(), [None])

    def test_column_labels_carry_units(self):
        self.assertEqual(column_label('gamma_pump'), 'gamma_pump[1/s]')
        self.assertEqual(column_label('g'), 'g[rad/s]')
        self.assertEqual(column_label('N'), 'N')

    def test_log_grid(self):
        grid = sweep_grid({'parameter': 'gamma_pump', 'start': '100 kHz', 'stop': '1 GHz',
                           'points': 5, 'scale': 'log'})
        self.assertAlmostEqual(grid[0], 1e5)
        self.assertAlmostEqual(grid[2] / 1e7, 1.0)
        self.assertAlmostEqual(grid[-1], 1e9)

    def test_integer_grid(self):
        self.assertEqual(sweep_grid({'parameter': 'N', 'start': 2, 'stop': 8, 'points': 4}), [2, 4, 6, 8])
        with self.assertRaises(ConfigError):
            parse_model_value('N', 2.5)

    def test_rejects_non_monotone_sweep(self):
        with self.assertRaises(ModelValidationError) as ctx:
            RunConfig.from_dict({
                'preset': 'paper-default-2lvl',
                'sweep': {'parameter': 'gamma_pump', 'values': [1e6, 1e5, 1e7]},
            })
        self.assertIn('sweep', ctx.exception.errors)

    def test_rejects_incompatible_backend(self):
        with self.assertRaises(ModelValidationError) as ctx:
            RunConfig.from_dict({'preset': 'paper-default-5lvl', 'backend': 'dicke'})
        self.assertIn('backend', ctx.exception.errors)
        with self.assertRaises(ModelValidationError):
            RunConfig.from_dict({'preset': 'paper-default-2lvl', 'command': 'g2', 'backend': 'meanfield'})
        with self.assertRaises(ModelValidationError):
            RunConfig.from_dict({'preset': 'paper-default-2lvl', 'command': 'dicke-map'})

    def test_rejects_bad_override(self):
        with self.assertRaises(ModelValidationError) as ctx:
            RunConfig.from_dict({'preset': 'paper-default-2lvl', 'overrides': {'kappa': '3 furlongs'}})
        self.assertIn('overrides', ctx.exception.errors)

    def test_command_line_arguments_win(self):
        config = RunConfig.from_dict(PUMP_SWEEP).with_arguments(
            command='spectrum', backend='dicke', out='elsewhere', overrides=['N=3'],
        )
        self.assertEqual((config.command, config.backend, config.out), ('spectrum', 'dicke', 'elsewhere'))
        self.assertEqual(config.resolve().N, 3)

    def test_point_spec_applies_sweep_value(self):
        config = RunConfig.from_dict(PUMP_SWEEP)
        spec = config.point_spec(config.resolve(), config.sweep_values()[1])
        self.assertEqual(spec.gamma_g1e1, 1e7)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            RunConfig.load('/nonexistent/run.yaml')


# =============================================================================
# NVSIM COMMAND
# =============================================================================

class NvsimCommandTests(WorkspaceMixin, TestCase):

    def test_steady_sweep_writes_tables(self):
        out = self.root / 'out'
        output = self.nvsim('steady-sweep', '--config', self.write_config(PUMP_SWEEP), '--out', str(out))
        self.assertIn('steady-sweep: 3 point(s)', output)

        steady = pd.read_csv(out / 'steady.csv', comment='#')
        self.assertEqual(list(steady['gamma_pump[1/s]']), [1e6, 1e7, 1e8])
        self.assertIn('radiation[1/s]', steady.columns)
        self.assertTrue((steady['radiation[1/s]'] > 0).all())
        self.assertAlmostEqual(float((steady['pop_g1'] + steady['pop_e1']).iloc[0]), 1.0, places=8)

        scaling = pd.read_csv(out / 'scaling.csv', comment='#')
        self.assertEqual(len(scaling), 3)
        self.assertFalse((out / '.parts').exists())

    def test_header_rebuilds_the_config(self):
        path = self.write_config(PUMP_SWEEP)
        out = self.root / 'out'
        self.nvsim('steady-sweep', '--config', path, '--out', str(out))
        metadata = read_header(out / 'steady.csv')
        self.assertEqual(RunConfig.from_header(metadata).as_dict(), RunConfig.load(path).as_dict())
        self.assertEqual(metadata['model']['N'], 2)
        self.assertIn('version', metadata)

    def test_repeated_runs_are_byte_identical(self):
        path = self.write_config(PUMP_SWEEP)
        first, second = self.root / 'first', self.root / 'second'
        self.nvsim('steady-sweep', '--config', path, '--out', str(first))
        self.nvsim('steady-sweep', '--config', path, '--out', str(second))
        for name in ('steady.csv', 'scaling.csv'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_worker_count_does_not_change_output(self):
        path = self.write_config(PUMP_SWEEP)
        serial, parallel = self.root / 'serial', self.root / 'parallel'
        self.nvsim('steady-sweep', '--config', path, '--out', str(serial), '--workers', '1')
        self.nvsim('steady-sweep', '--config', path, '--out', str(parallel), '--workers', '3')
        self.assertEqual((serial / 'steady.csv').read_bytes(), (parallel / 'steady.csv').read_bytes())

    def test_outputs_filter_and_override(self):
        data = dict(PUMP_SWEEP, outputs=['steady'])
        out = self.root / 'out'
        self.nvsim('steady-sweep', '--config', self.write_config(data), '--out', str(out),
                   '--override', 'N=1')
        self.assertEqual(sorted(p.name for p in out.iterdir()), ['steady.csv'])
        self.assertEqual(read_header(out / 'steady.csv')['config']['overrides'], {'N': '1'})

    def test_meanfield_listing(self):
        out = self.root / 'out'
        config = self.write_config({'preset': 'paper-default-2lvl'})
        self.nvsim('steady-sweep', '--config', config, '--out', str(out), '--backend', 'meanfield', '--listing')
        listing = (out / 'equations.txt').read_text()
        self.assertTrue(listing.startswith('# '))
        self.assertIn('d<a>/dt = ', listing)
        steady = pd.read_csv(out / 'steady.csv', comment='#')
        self.assertTrue(bool(steady['converged'].iloc[0]))

    def test_dicke_map(self):
        out = self.root / 'out'
        config = self.write_config({'preset': 'paper-default-2lvl', 'command': 'dicke-map', 'backend': 'dicke',
                                    'overrides': {'N': 3}})
        self.nvsim('dicke-map', '--config', config, '--out', str(out))
        table = pd.read_csv(out / 'dicke_map.csv', comment='#')
        self.assertEqual(len(table), 6)
        self.assertAlmostEqual(table['population'].sum(), 1.0, places=8)

    def test_run_is_recorded(self):
        out = self.root / 'out'
        self.nvsim('steady-sweep', '--config', self.write_config(PUMP_SWEEP), '--out', str(out))
        run = SimulationRun.objects.get()
        self.assertEqual((run.status, run.exit_code, run.points), ('completed', 0, 3))
        self.assertEqual(run.preset, 'paper-default-2lvl')
        self.assertEqual(sorted(Path(f).name for f in run.files), ['scaling.csv', 'steady.csv'])
        self.assertIsNotNone(run.duration)

    def test_invalid_config_exits_with_two(self):
        config = self.write_config({'preset': 'paper-default-5lvl', 'backend': 'dicke'})
        with self.assertRaises(CommandError) as ctx:
            self.nvsim('steady-sweep', '--config', config, '--out', str(self.root / 'out'))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_listing_needs_meanfield(self):
        config = self.write_config({'preset': 'paper-default-2lvl'})
        with self.assertRaises(CommandError) as ctx:
            self.nvsim('steady-sweep', '--config', config, '--listing')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_oversized_product_space_exits_with_three(self):
        config = self.write_config({'preset': 'paper-default-5lvl', 'overrides': {'N': 4}})
        with self.assertRaises(CommandError) as ctx:
            self.nvsim('steady-sweep', '--config', config, '--out', str(self.root / 'out'))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('meanfield', str(ctx.exception))
        run = SimulationRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('failed', 3))

    def test_validate_config(self):
        output = self.nvsim('validate-config', '--config', self.write_config(PUMP_SWEEP))
        self.assertIn('sweep_points: 3', output)
        self.assertIn('Configuration is valid.', output)
        self.assertFalse(SimulationRun.objects.exists())

    def test_presets_list(self):
        output = self.nvsim('presets', 'list')
        for name in ('paper-default-2lvl', 'paper-default-3lvl', 'paper-default-5lvl'):
            self.assertIn(name, output)

    def test_calibrate_needs_a_calibration_section(self):
        with self.assertRaises(CommandError) as ctx:
            self.nvsim('calibrate', 'paper-default-2lvl')
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('no calibration section', str(ctx.exception))


class CollectiveSweepTests(WorkspaceMixin, TestCase):
    """Pump sweeps of larger ensembles through the command."""

    def sweep(self, data, backend, command='steady-sweep'):
        out = self.root / command
        self.nvsim(command, '--config', self.write_config(data), '--out', str(out), '--backend', backend)
        return out

    @tag('slow')
    def test_meanfield_radiation_turns_superlinear_then_saturates(self):
        N = 80
        out = self.sweep({
            'preset': 'paper-default-3lvl',
            'overrides': {'N': N},
            'sweep': {'parameter': 'gamma_pump', 'start': 1e5, 'stop': 1e9, 'points': 13, 'scale': 'log'},
        }, 'meanfield')
        steady = pd.read_csv(out / 'steady.csv', comment='#')
        self.assertTrue(steady['converged'].all())

        slopes = pd.read_csv(out / 'scaling.csv', comment='#')['slope'].to_numpy()
        self.assertAlmostEqual(slopes[0], 1.0, delta=0.1)
        self.assertGreater(slopes[1:-1].max(), 1.1)
        self.assertLess(slopes[-1], 1.0)

        # the collective pseudo-spin stays inside the Dicke triangle
        J, M = steady['J'].to_numpy(), steady['M'].to_numpy()
        self.assertTrue(np.all(np.abs(M) <= J + 1e-6))
        self.assertTrue(np.all(J <= N / 2 + 1e-6))
        self.assertGreater(J[0], 0.95 * N / 2)
        self.assertLess(M[0], -0.95 * N / 2)

    def test_dicke_map_stays_inside_the_triangle(self):
        N = 4
        out = self.sweep({
            'preset': 'paper-default-2lvl',
            'command': 'dicke-map',
            'overrides': {'N': N, 'n_max': 3},
            'sweep': {'parameter': 'gamma_pump', 'values': ['1 MHz', '100 MHz', '1 GHz']},
        }, 'dicke', command='dicke-map')
        table = pd.read_csv(out / 'dicke_map.csv', comment='#')
        self.assertTrue(((table['M'].abs() <= table['J'] + 1e-6) & (table['J'] <= N / 2 + 1e-6)).all())
        self.assertTrue((table['population'] > -1e-10).all())

        means = []
        for _, rows in table.groupby('gamma_pump[1/s]', sort=True):
            weights = rows['population'].to_numpy()
            self.assertAlmostEqual(weights.sum(), 1.0, places=8)
            J = float(weights @ rows['J'].to_numpy())
            M = float(weights @ rows['M'].to_numpy())
            self.assertLessEqual(abs(M), J + 1e-6)
            self.assertLessEqual(J, N / 2 + 1e-6)
            means.append((J, M))
        self.assertLess(means[0][1], -0.9 * N / 2)
        self.assertGreater(means[-1][1], means[0][1])


# =============================================================================
# API
# =============================================================================

class RunApiTests(TestCase):

    def setUp(self):
        self.client = APIClient()
        self.completed = SimulationRun.objects.create(
            command='steady-sweep', backend='exact', preset='paper-default-2lvl',
            config={'preset': 'paper-default-2lvl'}, status='completed', exit_code=0, points=3,
        )
        self.failed = SimulationRun.objects.create(
            command='g2', backend='exact', preset='paper-default-5lvl',
            config={'preset': 'paper-default-5lvl'}, status='failed', exit_code=3, points=1,
            message='Too large',
        )
        now = timezone.now()
        SimulationRun.objects.filter(pk=self.completed.pk).update(created_at=now - timedelta(hours=1))
        SimulationRun.objects.filter(pk=self.failed.pk).update(created_at=now)

    def test_list_is_paginated_newest_first(self):
        response = self.client.get(reverse('api:run_list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 2)
        self.assertEqual([item['id'] for item in response.data['results']], [self.failed.pk, self.completed.pk])

    def test_list_filters(self):
        response = self.client.get(reverse('api:run_list'), {'status': 'failed'})
        self.assertEqual([item['id'] for item in response.data['results']], [self.failed.pk])
        response = self.client.get(reverse('api:run_list'), {'preset': '2lvl'})
        self.assertEqual([item['id'] for item in response.data['results']], [self.completed.pk])

    def test_invalid_filter(self):
        response = self.client.get(reverse('api:run_list'), {'status': 'unknown'})
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertFalse(response.data['success'])

    def test_detail_includes_config(self):
        response = self.client.get(reverse('api:run_detail', args=[self.failed.pk]))
        self.assertTrue(response.data['success'])
        self.assertEqual(response.data['data']['config'], {'preset': 'paper-default-5lvl'})
        self.assertEqual(response.data['data']['exit_code'], 3)

    def test_missing_run(self):
        response = self.client.get(reverse('api:run_detail', args=[9999]))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)
        self.assertFalse(response.data['success'])

    def test_presets_by_scheme(self):
        response = self.client.get(reverse('api:preset_list'), {'scheme': 'two-level'})
        self.assertEqual([item['name'] for item in response.data['data']], ['paper-default-2lvl'])

    def test_validate_config(self):
        response = self.client.post(reverse('api:config_validate'), PUMP_SWEEP, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['data']['sweep_points'], 3)
        self.assertEqual(response.data['data']['model']['scheme'], 'two-level')

    def test_validate_config_reports_field_errors(self):
        response = self.client.post(
            reverse('api:config_validate'), {'preset': 'paper-default-5lvl', 'backend': 'dicke'}, format='json',
        )
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('backend', response.data['errors'])


class AdminNavigationTests(SimpleTestCase):

    def test_sidebar_only_links_the_run_registry(self):
        sections = get_navigation_for_user(request=None)
        self.assertEqual([str(section['title']) for section in sections], ['Dashboard', 'Simulation Runs'])
        links = [item['link'] for section in sections for item in section['items']]
        self.assertNotIn('/admin/auth/user/', links)
        for link in links:
            self.assertTrue(link == '/admin/' or link.startswith('/admin/runs/'), link)

"""
nvsim: batch experiments on the NV-cavity model.

    python manage.py nvsim steady-sweep --config sweep.yaml --backend meanfield
    python manage.py nvsim g2 --config g2.yaml --workers 3
    python manage.py nvsim presets list
    python manage.py nvsim calibrate paper-default-5lvl --write
"""
import logging

import yaml
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import SimulationError
from emitters.presets import calibration_path, list_presets
from observables.calibration import calibrate_preset
from runs.config import BACKENDS, COMMANDS, RunConfig
from runs.runner import run

logger = logging.getLogger(__name__)

PROJECT_LOGGERS = ('core', 'emitters', 'master_equation', 'dicke', 'cumulant', 'observables', 'runs')

VERBOSITY_LEVELS = {
    0: logging.ERROR,
    1: logging.WARNING,
    2: logging.INFO,
    3: logging.DEBUG,
}


class Command(BaseCommand):
    help = "Run NV-cavity superradiance simulations and write CSV data files."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)

        for name in COMMANDS:
            sub = subparsers.add_parser(name, help=f"Run the {name} experiment.")
            self._add_run_arguments(sub)
            if name == 'steady-sweep':
                sub.add_argument(
                    '--listing', action='store_true',
                    help="Also write the derived mean-field equations (meanfield backend).",
                )

        validate = subparsers.add_parser('validate-config', help="Validate a config and print it resolved.")
        self._add_run_arguments(validate)

        presets = subparsers.add_parser('presets', help="Inspect the shipped model presets.")
        presets.add_argument('action', choices=['list'])

        calibrate = subparsers.add_parser(
            'calibrate', help="Fit a preset's calibration parameters to its g2 feature targets.",
        )
        calibrate.add_argument('preset', help="Preset name.")
        calibrate.add_argument(
            '--write', action='store_true',
            help="Store the fitted parameters as the preset's calibration overlay.",
        )

    def _add_run_arguments(self, parser):
        parser.add_argument('--config', required=True, help="RunConfig YAML file.")
        parser.add_argument('--backend', choices=BACKENDS, help="Override the config backend.")
        parser.add_argument('--out', help="Output directory.")
        parser.add_argument('--workers', type=int, help="Worker processes for sweep points.")
        parser.add_argument(
            '--override', action='append', default=[], metavar='KEY=VALUE',
            help="Model parameter override with units, e.g. gamma_pump='10 MHz'. Repeatable.",
        )

    def handle(self, *args, **options):
        self._configure_logging(options['verbosity'])
        subcommand = options['subcommand']
        try:
            if subcommand == 'presets':
                return self._list_presets()
            if subcommand == 'calibrate':
                return self._calibrate(options['preset'], options['write'])
            config = self._load(subcommand, options)
            if subcommand == 'validate-config':
                return self._validate(config)
            result = run(config, workers=options.get('workers'))
        except SimulationError as exc:
            raise CommandError(exc.message, returncode=exc.exit_code) from exc

        for path in result.files:
            self.stdout.write(str(path))
        self.stdout.write(self.style.SUCCESS(
            f"{subcommand}: {result.points} point(s), {len(result.files)} file(s)"
        ))

    def _configure_logging(self, verbosity):
        level = VERBOSITY_LEVELS.get(int(verbosity), logging.DEBUG)
        for name in PROJECT_LOGGERS:
            logging.getLogger(name).setLevel(level)

    def _load(self, subcommand, options):
        config = RunConfig.load(options['config'])
        extra = {'listing': True} if options.get('listing') else None
        return config.with_arguments(
            command=subcommand if subcommand in COMMANDS else None,
            backend=options.get('backend'),
            out=options.get('out'),
            overrides=options.get('override') or (),
            options=extra,
        )

    def _validate(self, config):
        spec = config.resolve()
        resolved = {
            'config': config.as_dict(),
            'out': config.out,
            'model': spec.as_dict(),
            'sweep_points': len(config.sweep_values()),
        }
        self.stdout.write(yaml.safe_dump(resolved, sort_keys=True, default_flow_style=False))
        self.stdout.write(self.style.SUCCESS("Configuration is valid."))

    def _list_presets(self):
        for item in list_presets():
            self.stdout.write(f"{item['name']:<24} {item['scheme'] or '-':<12} {item['description']}")

    def _calibrate(self, preset, write):
        result = calibrate_preset(preset, write=write)
        for name, target in result.plan.targets.items():
            self.stdout.write(f"{name:<4} {getattr(result.features, name):8.4f}  target {target:.4f}")
        for name, value in result.parameters.items():
            self.stdout.write(f"{name:<12} {value:.6e}")
        if write:
            self.stdout.write(str(calibration_path(preset)))
        self.stdout.write(self.style.SUCCESS(
            f"calibrate: {preset} within {result.plan.tolerance} after {result.evaluations} evaluation(s)"
        ))

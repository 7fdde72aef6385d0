"""
Batch runner behind the ``nvsim`` command.

Every sweep point is an independent job. Each job writes its rows to a
part file under ``<out>/.parts``; once all jobs are done the parts are
merged in grid order into one CSV per observable, so the worker count
never changes what ends up on disk.
"""
import json
import logging
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from django.db import DatabaseError
from django.utils import timezone

import config as project
from core.conf import simulation_setting
from core.exceptions import ConfigError, SimulationError
from core.units import parse_quantity
from cumulant.equations import MeanFieldSystem
from cumulant.integrate import dicke_numbers, integrate
from cumulant.spectrum import mf_spectrum
from dicke.liouvillian import build_dicke_liouvillian, dicke_populations
from master_equation.solvers import steady_state
from observables.collective import build_liouvillian, collective_numbers, superradiant_pulse
from observables.correlations import default_g2_taus, g2, spectrum
from observables.export import atomic_write, metadata_header, write_csv
from observables.features import (
    extract_g2_features, fit_spectrum_peaks, hybrid_mode_frequencies, power_law_exponent,
    radiation_scaling,
)

from .config import column_label
from .models import SimulationRun

logger = logging.getLogger(__name__)

PUMP_PARAMETERS = ('gamma_pump', 'gamma_ge', 'gamma_g1e1')
PARTS_DIR = '.parts'


@dataclass
class RunResult:
    files: list = field(default_factory=list)
    points: int = 0


# =============================================================================
# HELPERS
# =============================================================================

def _sweep_column(config, value):
    if value is None:
        return {}
    return {column_label(config.sweep_parameter): value}


def _number(value):
    return float('nan') if value is None else value


def _time_grid(config, prefix, default):
    """Geometric tau grid from ``<prefix>_min/_max/_points`` options, led by tau = 0."""
    names = [f'{prefix}_min', f'{prefix}_max', f'{prefix}_points']
    if not any(name in config.options for name in names):
        return default
    tau_min = config.option(names[0], simulation_setting('G2.TAU_MIN'), kind='time')
    tau_max = config.option(names[1], simulation_setting('G2.TAU_MAX'), kind='time')
    points = int(config.option(names[2], simulation_setting('G2.POINTS')))
    return np.concatenate(([0.0], np.geomspace(tau_min, tau_max, points)))


def _window(config, name):
    bounds = config.option(name)
    if bounds is None:
        return None
    low, high = bounds
    return parse_quantity(low, kind='time'), parse_quantity(high, kind='time')


def _omega_grid(config):
    if 'omega_max' not in config.options:
        return None
    high = config.option('omega_max', kind='rate')
    low = config.option('omega_min', -high, kind='rate')
    return np.linspace(low, high, int(config.option('omega_points', 2001)))


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not serializable")


# =============================================================================
# SWEEP POINTS
# =============================================================================

def steady_point(config, spec, value):
    record = _sweep_column(config, value)
    if config.backend == 'meanfield':
        system = MeanFieldSystem(spec)
        trajectory = integrate(system, t_end=config.option('t_end', kind='time'))
        state = trajectory.final
        record['radiation[1/s]'] = state.radiation_rate
        record['photon_number'] = state.photon_number
        populations = state.populations()
        J, M = dicke_numbers(state, spec.N)
        extra = {'converged': bool(trajectory.converged), 'residual': float(trajectory.residual)}
    else:
        liouvillian = build_liouvillian(spec, config.backend)
        rho = steady_state(liouvillian)
        photons = liouvillian.expect('n', rho).real
        record['radiation[1/s]'] = spec.kappa * photons
        record['photon_number'] = photons
        populations = liouvillian.populations(rho)
        J, M = collective_numbers(liouvillian, rho)
        extra = {}
    record.update({f'pop_{level}': p for level, p in populations.items()})
    record.update({'J': J, 'M': M, **extra})
    return {'steady': [record]}


def g2_point(config, spec, value):
    liouvillian = build_liouvillian(spec, config.backend)
    rho = steady_state(liouvillian)
    curve = g2(liouvillian, rho, taus=_time_grid(config, 'tau', default_g2_taus()))
    features = extract_g2_features(
        curve,
        dip_window=_window(config, 'dip_window'),
        shoulder_window=_window(config, 'shoulder_window'),
        threshold=config.option('threshold'),
    )
    column = _sweep_column(config, value)
    rows = [{**column, 'tau[s]': tau, 'g2': g} for tau, g in zip(curve.taus, curve.values)]
    record = {**column, 'photon_number': curve.photon_number}
    for name, entry in features.as_record().items():
        record[f'{name}[s]' if name.startswith('tau') else name] = _number(entry)
    return {'g2': rows, 'g2_features': [record]}


def spectrum_point(config, spec, value):
    omegas = _omega_grid(config)
    if config.backend == 'meanfield':
        system = MeanFieldSystem(spec)
        trajectory = integrate(system, t_end=config.option('t_end', kind='time'))
        result = mf_spectrum(system, trajectory.final, omegas=omegas, converged=trajectory.converged)
        J, _ = dicke_numbers(trajectory.final, spec.N)
    else:
        liouvillian = build_liouvillian(spec, config.backend)
        rho = steady_state(liouvillian)
        taus = None
        if 'tau_max' in config.options:
            taus = np.linspace(
                0.0, config.option('tau_max', kind='time'),
                int(config.option('tau_points', simulation_setting('SPECTRUM.POINTS'))),
            )
        result = spectrum(liouvillian, rho, taus=taus, omegas=omegas)
        J, _ = collective_numbers(liouvillian, rho)

    peaks = fit_spectrum_peaks(result, prominence=config.option('prominence'))
    lower, upper = hybrid_mode_frequencies(J, spec.g, detuning=spec.omega_e1g1, cavity=spec.omega_c)
    column = _sweep_column(config, value)
    centers = [peak.center for peak in peaks]
    return {
        'spectrum': [
            {**column, 'omega[rad/s]': omega, 'S': sample}
            for omega, sample in zip(result.omegas, result.samples)
        ],
        'spectrum_peaks': [
            {
                **column, 'peak': index, 'center[rad/s]': peak.center,
                'width[rad/s]': peak.width, 'amplitude': peak.amplitude,
                'low_confidence': peak.low_confidence,
            }
            for index, peak in enumerate(peaks)
        ],
        'spectrum_modes': [{
            **column,
            'J': J,
            'hybrid_lower[rad/s]': lower,
            'hybrid_upper[rad/s]': upper,
            'hybrid_splitting[rad/s]': upper - lower,
            'fitted_splitting[rad/s]': max(centers) - min(centers) if len(centers) > 1 else math.nan,
            'integral[1/s]': result.integral(),
            'kappa_photons[1/s]': result.kappa * result.photon_number,
            'window_limited': bool(result.warnings),
        }],
    }


def pulse_point(config, spec, value):
    times = np.linspace(
        0.0,
        config.option('t_end', simulation_setting('PULSE.T_END'), kind='time'),
        int(config.option('points', simulation_setting('PULSE.POINTS'))),
    )
    record_populations = bool(config.option('record_populations', False)) and config.backend == 'dicke'
    result = superradiant_pulse(
        spec, times,
        backend=config.backend,
        initial=config.option('initial', 'pumped'),
        pump=config.option('pump', kind='rate'),
        record_populations=record_populations,
    )
    column = _sweep_column(config, value)
    frame = result.as_frame()
    tables = {
        'pulse': [{**column, **row} for row in frame.to_dict(orient='records')],
        'pulse_peaks': [{
            **column,
            'peak_rate[1/s]': result.peak_rate,
            'peak_time[s]': result.peak_time,
            'delayed': result.is_delayed(),
        }],
    }
    if result.populations:
        samples = int(config.option('population_samples', simulation_setting('PULSE.POPULATION_SAMPLES')))
        picks = np.unique(np.linspace(0, len(times) - 1, samples).round().astype(int))
        tables['pulse_populations'] = [
            {**column, 't[s]': times[i], 'J': J, 'M': M, 'population': p}
            for i in picks
            for (J, M), p in result.populations[i].values.items()
        ]
    return tables


def dicke_map_point(config, spec, value):
    liouvillian = build_dicke_liouvillian(spec)
    populations = dicke_populations(steady_state(liouvillian), spec.N)
    column = _sweep_column(config, value)
    return {
        'dicke_map': [
            {**column, 'J': J, 'M': M, 'population': p}
            for (J, M), p in populations.values.items()
        ],
    }


POINT_HANDLERS = {
    'steady-sweep': steady_point,
    'g2': g2_point,
    'spectrum': spectrum_point,
    'pulse': pulse_point,
    'dicke-map': dicke_map_point,
}


# =============================================================================
# SWEEP-LEVEL ANALYSIS
# =============================================================================

def _steady_scaling(config, values, tables):
    if config.sweep_parameter not in PUMP_PARAMETERS or len(values) < 2:
        return
    rates = [row['radiation[1/s]'] for row in tables['steady']]
    try:
        scaling = radiation_scaling(values, rates)
    except ConfigError as exc:
        logger.warning(f"Skipping radiation scaling: {exc}")
        return
    label = column_label(config.sweep_parameter)
    tables['scaling'] = [
        {label: pump, 'radiation[1/s]': rate, 'slope': slope, 'regime': regime}
        for pump, rate, slope, regime in zip(
            scaling.pumps, scaling.rates, scaling.slopes, scaling.regimes()
        )
    ]


def _pulse_scaling(config, values, tables):
    if config.sweep_parameter != 'N' or len(values) < 2:
        return
    peaks = [row['peak_rate[1/s]'] for row in tables['pulse_peaks']]
    exponent = power_law_exponent(values, peaks)
    logger.info(f"Peak pulse intensity scales as N^{exponent:.3f}")
    tables['pulse_scaling'] = [{'points': len(values), 'exponent': exponent}]


SWEEP_ANALYSES = {
    'steady-sweep': _steady_scaling,
    'pulse': _pulse_scaling,
}


# =============================================================================
# EXECUTION
# =============================================================================

def _init_worker():
    import django

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    django.setup()


def run_point(job):
    """Evaluate one sweep point and store its rows as a part file."""
    config, index, value, parts = job
    spec = config.point_spec(config.resolve(), value)
    tables = POINT_HANDLERS[config.command](config, spec, value)
    atomic_write(Path(parts) / f"{index:05d}.json", json.dumps(tables, default=_plain))
    return index


def _collect(config, values, workers, out):
    parts = out / PARTS_DIR
    if parts.exists():
        shutil.rmtree(parts)
    parts.mkdir(parents=True)
    jobs = [(config, index, value, str(parts)) for index, value in enumerate(values)]
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
                for index in pool.map(run_point, jobs):
                    logger.info(f"Point {index + 1}/{len(jobs)} done")
        else:
            for job in jobs:
                run_point(job)
                logger.info(f"Point {job[1] + 1}/{len(jobs)} done")

        tables = {}
        for index in range(len(jobs)):
            with open(parts / f"{index:05d}.json") as handle:
                for name, rows in json.load(handle).items():
                    tables.setdefault(name, []).extend(rows)
        return tables
    finally:
        shutil.rmtree(parts, ignore_errors=True)


def _start_record(config, points):
    if not simulation_setting('RECORD_RUNS'):
        return None
    try:
        return SimulationRun.objects.create(
            command=config.command,
            backend=config.backend,
            preset=config.preset,
            config=config.as_dict(),
            status='running',
            output_dir=str(config.out),
            points=points,
        )
    except DatabaseError as exc:
        logger.warning(f"Run registry unavailable ({exc}); continuing without a record")
        return None


def _finish_record(record, status, exit_code, files=(), message=''):
    if record is None:
        return
    record.status = status
    record.exit_code = exit_code
    record.files = [str(path) for path in files]
    record.message = message
    record.finished_at = timezone.now()
    try:
        record.save()
    except DatabaseError as exc:
        logger.warning(f"Could not update run record {record.pk}: {exc}")


def run(config, workers=None):
    """Execute ``config``: one CSV per observable under ``config.out``."""
    spec = config.resolve()
    values = config.sweep_values()
    workers = workers or simulation_setting('DEFAULT_WORKERS')
    out = Path(config.out)
    record = _start_record(config, len(values))
    logger.info(
        f"Running {config.command} on {config.backend}: preset {config.preset}, "
        f"{len(values)} point(s), {workers} worker(s)"
    )

    files = []
    try:
        tables = _collect(config, values, workers, out)
        analysis = SWEEP_ANALYSES.get(config.command)
        if analysis:
            analysis(config, values, tables)

        metadata = config.as_metadata(spec, project.__version__)
        for name, rows in tables.items():
            if config.wants(name):
                files.append(write_csv(pd.DataFrame.from_records(rows), out / f"{name}.csv", metadata))
        if config.option('listing'):
            listing = MeanFieldSystem(spec).listing()
            files.append(atomic_write(out / 'equations.txt', metadata_header(metadata) + listing))
    except SimulationError as exc:
        logger.error(f"{config.command} failed: {exc}")
        _finish_record(record, 'failed', exc.exit_code, files, exc.message)
        raise
    except Exception as exc:
        logger.exception(f"{config.command} crashed: {exc}")
        _finish_record(record, 'failed', 1, files, str(exc))
        raise

    _finish_record(record, 'completed', 0, files)
    logger.info(f"Wrote {len(files)} file(s) to {out}")
    return RunResult(files=files, points=len(values))

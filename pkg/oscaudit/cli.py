"""
oscaudit command line: batch verification runs and single-input evaluations of the coupled oscillator formulas.
"""
import sys
import time
import logging
import argparse

from concurrent.futures import Executor, ThreadPoolExecutor
from typing import Dict, Any, Callable, List, Optional

import numpy as np

from oscaudit import app, OscAuditError, UsageError, error_from_dict
from oscaudit.linalg3 import SymMat3, make_rng
from oscaudit.report import Report, FORMATS
from oscaudit import spectrum, euler, mij_appendix, modal, dynamics

logger = logging.getLogger(__name__)

CSV_COLUMNS = {
    'eig': 'csv columns: index, jacobi, printed, robust, printed_dev, robust_dev with --matrix, key, value '
           'otherwise',
    'verify-rotation': 'csv columns: key, value (matrices as json text)',
    'verify-mij': 'csv columns: entry, status, confirmed_samples, max_deviation, max_relative_deviation, '
                  'matches_rt_g_r, matches_r_g_rt; with --matrix and --angles: entry, printed, rt_g_r, r_g_rt, '
                  'deviation, confirmed; with --probe: key, value',
    'euler-fit': 'csv columns: key, value',
    'modal': 'csv columns: mode, lambda, v1, v2, v3, norm_residual, eig_residual with --matrix, key, value '
             'otherwise',
    'simulate': 'csv columns: t, x1, x2, x3, p1, p2, p3, energy, D (D with --compare-decoupling); '
                'run, label, max_D, final_D, energy_end, work_end, error with a sweep section in the config',
    'report': 'csv columns: entry, status, confirmed_samples, max_deviation, max_relative_deviation, '
              'matches_rt_g_r, matches_r_g_rt (appendix table), all audits in json and xlsx',
}

JSON_FLOATS = ('json floats are written as the shortest text that reads back to the same double, at most 17 '
               'significant digits; csv floats use 12')


def parse_matrix(text: str) -> SymMat3:
    """
    Read a matrix literal, rows separated by ';' and entries by ','
    :param text: literal like "7,1,2;1,6,3;2,3,5"
    :return: SymMat3, exact symmetry required
    """
    try:
        rows = [[float(value) for value in row.split(',')] for row in text.strip().split(';')]
        return SymMat3.from_matrix(np.array(rows))
    except ValueError as exc:
        raise UsageError(f'invalid --matrix "{text}": {exc}. Example: --matrix "7,1,2;1,6,3;2,3,5"')


def parse_angles(text: str) -> euler.EulerAngles:
    """
    Read phi,theta,psi in radians
    """
    try:
        values = [float(value) for value in text.split(',')]
    except ValueError:
        values = []
    if len(values) != 3 or not np.all(np.isfinite(values)):
        raise UsageError(f'invalid --angles "{text}". Example: --angles "0.3,0.4,0.5"')
    return euler.EulerAngles(*values)


class Runner:
    """
    Settings shared by the subcommands of one invocation
    """
    def __init__(self, args: argparse.Namespace, executor: Optional[Executor] = None) -> None:
        run = app.section('run')
        self.args, self.executor = args, executor
        self.seed, self.samples, self.tol = int(run['seed']), int(run['samples']), float(run['tol'])
        self.mode = getattr(args, 'mode', None) or run.get('mode', 'both')
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError(f'seed must be a 64-bit unsigned integer, got {self.seed}')
        if self.samples < 1:
            raise UsageError(f'samples must be at least 1, got {self.samples}')
        if not self.tol > 0.0:
            raise UsageError(f'tol must be positive, got {self.tol}')
        jacobi = app.section('jacobi')
        self.jacobi_tol, self.max_sweeps = float(jacobi['tol']), int(jacobi['max_sweeps'])
        sampling = app.section('sampling')
        self.matrix_scale, self.audit_scale = float(sampling['matrix_scale']), float(sampling['audit_scale'])
        self.fit = euler.FitSettings.from_config(app.section('fit'), self.seed)
        self.min_z = float(app.section('modal').get('min_discriminant', 1e-6))
        dyn = app.section('dynamics')
        self.max_phase, self.min_overlap = float(dyn['max_step_phase']), float(dyn['min_overlap'])

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed)

    def matrix(self) -> Optional[SymMat3]:
        text = getattr(self.args, 'matrix', None)
        return parse_matrix(text) if text else None

    def angles(self) -> Optional[euler.EulerAngles]:
        text = getattr(self.args, 'angles', None)
        return parse_angles(text) if text else None

    def keep(self, key: str) -> bool:
        """False for keys of the mode not requested"""
        other = {'printed': 'robust', 'robust': 'printed'}.get(self.mode)
        return not (other and key.startswith(other))

    def eig(self, report: Report) -> None:
        if g := self.matrix():
            comparison = spectrum.compare_modes(g, self.jacobi_tol, self.max_sweeps).as_dict()
            report.add_results({key: value for key, value in comparison.items() if self.keep(key)})
            rows = []
            for i in range(3):
                row = {'index': i + 1, 'jacobi': comparison['jacobi'][i],
                       'printed': comparison['printed']['omega_sq'][i], 'robust': comparison['robust']['omega_sq'][i],
                       'printed_dev': comparison['printed_vs_jacobi'][i],
                       'robust_dev': comparison['robust_vs_jacobi'][i]}
                rows.append({key: value for key, value in row.items() if self.keep(key)})
            report.add_table('eigenvalues', rows)
            for flag in sorted(set(comparison['printed']['flags']) | set(comparison['robust']['flags'])):
                report.add_information(f'flag {flag}')
        else:
            audit = spectrum.spectrum_audit(self.rng(), self.samples, self.matrix_scale, self.jacobi_tol,
                                            self.max_sweeps)
            report.add_results({key: value for key, value in audit.items() if self.keep(key)})

    def verify_rotation(self, report: Report) -> None:
        if a := self.angles():
            report.add_results(euler.angle_comparison(a) | {'generator_algebra': euler.verify_generator_algebra()})
        else:
            report.add_results(euler.rotation_audit(self.rng(), self.samples))

    def verify_mij(self, report: Report) -> None:
        g, a = self.matrix(), self.angles()
        if getattr(self.args, 'probe', False):
            if g is None:
                raise UsageError('--probe needs --matrix')
            report.add_results(mij_appendix.mij_zero_constraint_probe(g, self.fit))
        elif g is not None and a is not None:
            comparison = mij_appendix.mij_compare(g, a, self.tol)
            report.add_results(comparison.as_dict())
            report.add_table('entries', [
                {'entry': f'M{i + 1}{j + 1}', 'printed': comparison.printed[i, j],
                 'rt_g_r': comparison.product_rt_g_r[i, j], 'r_g_rt': comparison.product_r_g_rt[i, j],
                 'deviation': comparison.per_entry_dev[i, j], 'confirmed': bool(comparison.confirmed[i, j])}
                for i in range(3) for j in range(3)])
        elif g is not None or a is not None:
            raise UsageError('verify-mij needs both --matrix and --angles for a single evaluation')
        else:
            audit = mij_appendix.mij_audit(self.rng(), self.samples, self.audit_scale, self.tol)
            report.add_table('entries', audit.pop('table'))
            report.add_results(audit)

    def euler_fit(self, report: Report) -> None:
        if g := self.matrix():
            report.add_results(euler.euler_fit(g, self.fit).as_dict())
        else:
            report.add_results(euler.fit_audit(self.rng(), self.samples, self.audit_scale, self.fit, self.executor))

    def modal(self, report: Report) -> None:
        if g := self.matrix():
            basis = modal.build_modal_basis(g)
            report.add_results({'basis': basis.as_dict(), 'transform': modal.modal_transform(g).as_dict(),
                                'oracle_transform': modal.robust_orthonormal_diagonalizer(g).as_dict(),
                                'spectrum_agreement': modal.spectrum_agreement(g)})
            names = ('v', 'v_plus', 'v_minus')
            report.add_table('modes', [
                {'mode': name, 'lambda': value, 'v1': vector[0], 'v2': vector[1], 'v3': vector[2],
                 'norm_residual': norm, 'eig_residual': residual}
                for name, value, vector, norm, residual in zip(
                    names, basis.eigenvalues, (basis.v, basis.v_plus, basis.v_minus), basis.norm_residuals,
                    basis.eig_residuals)])
            if basis.completed:
                report.add_information(f'{basis.completed} completed by a cross product')
            if 'flipped' in basis.preferred_sign:
                report.add_information('printed A+- does not normalize every modal vector')
        else:
            report.add_results(modal.modal_audit(self.rng(), self.samples, self.audit_scale, self.min_z))

    def simulate(self, report: Report) -> None:
        config = app.config
        if 'oscillators' not in config:
            raise UsageError('simulate needs --config with an oscillators section')
        compare = bool(getattr(self.args, 'compare_decoupling', False))
        report.add_information('classical Hamilton equations are used as the dynamics of the comparison')
        if overrides := config.get('sweep'):
            base = {key: value for key, value in config.items() if key != 'sweep'}
            runs = dynamics.sweep(base, overrides, compare, self.max_phase, self.min_overlap, self.executor)
            columns = ['run', 'label', 'max_D', 'final_D', 'energy_end', 'work_end', 'error']
            report.add_table('runs', [run | {'error': (run.get('error') or {}).get('kind')} for run in runs],
                             columns)
            return
        trajectory = dynamics.simulate(config, compare, self.max_phase, self.min_overlap)
        columns = ['t', 'x1', 'x2', 'x3', 'p1', 'p2', 'p3', 'energy'] + (['D'] if compare else [])
        report.add_table('trajectory', trajectory.rows(), columns)
        report.add_results(trajectory.summary())
        if trajectory.error:
            report.add_error(error_from_dict(trajectory.error), context='naive decoupling')

    def full_report(self, report: Report) -> None:
        for name, command in (('eig', self.eig), ('verify_rotation', self.verify_rotation),
                              ('verify_mij', self.verify_mij), ('euler_fit', self.euler_fit),
                              ('modal', self.modal)):
            section = Report(name)
            command(section)
            report.add_results({name: section.results})
            for table, content in section.tables.items():
                report.add_table(table, content['rows'], content['columns'])


COMMANDS: Dict[str, Callable[[Runner, Report], None]] = {
    'eig': Runner.eig,
    'verify-rotation': Runner.verify_rotation,
    'verify-mij': Runner.verify_mij,
    'euler-fit': Runner.euler_fit,
    'modal': Runner.modal,
    'simulate': Runner.simulate,
    'report': Runner.full_report,
}


def build_parser() -> argparse.ArgumentParser:
    # Suppressed defaults keep values given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument('--seed', type=int, help='seed of the PCG64 generator')
    common.add_argument('--samples', type=int, help='number of random samples of batch runs')
    common.add_argument('--tol', type=float, help='confirmation tolerance')
    common.add_argument('--mode', choices=('printed', 'robust', 'both'), help='eigenvalue formulas reported')
    common.add_argument('--format', choices=FORMATS, help='report format')
    common.add_argument('--out', help='output file, standard output by default')
    common.add_argument('--config', help='toml or json configuration file')
    common.add_argument('--workers', type=int, help='worker threads of batch runs')
    common.add_argument('-v', '--verbose', action='store_true')
    common.add_argument('--debug', action='store_true')

    parser = argparse.ArgumentParser(prog='oscaudit', description='Audit the formulas of three coupled '
                                                                  'time-dependent oscillators', epilog=JSON_FLOATS,
                                                                  parents=[common])
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name: str, text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=text, description=text, epilog=f'{CSV_COLUMNS[name]}. {JSON_FLOATS}',
                              parents=[common])

    add('eig', 'closed-form eigenvalues against the Jacobi oracle').add_argument(
        '--matrix', help='symmetric matrix "r11,r12,r13;r21,r22,r23;r31,r32,r33"')
    add('verify-rotation', 'Euler rotation matrices and generator algebra').add_argument(
        '--angles', help='"phi,theta,psi" in radians')
    mij = add('verify-mij', 'appendix coefficients against the true conjugation')
    mij.add_argument('--matrix', help='symmetric matrix literal')
    mij.add_argument('--angles', help='"phi,theta,psi" in radians')
    mij.add_argument('--probe', action='store_true', help='minimize the printed off-diagonal coefficients')
    add('euler-fit', 'diagonalize by Euler rotations').add_argument('--matrix', help='symmetric matrix literal')
    add('modal', 'modal basis and transformation').add_argument('--matrix', help='symmetric matrix literal')
    add('simulate', 'direct and naively decoupled integration').add_argument(
        '--compare-decoupling', action='store_true', help='integrate the naive decoupling and report D(t)')
    add('report', 'all batch audits in one report')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    Execute one subcommand
    :param argv: arguments without the program name
    :return: exit code, 0 success, 1 usage error, 2 numerical error
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits after help or on a usage error
        return 0 if not exc.code else 1

    try:
        app.init(args)
        fmt = getattr(args, 'format', None) or app.section('run').get('format', 'json')
        workers = int(app.section('run').get('workers', 1))
        if workers < 1:
            raise UsageError(f'workers must be at least 1, got {workers}')
        code = 0
        with ThreadPoolExecutor(max_workers=workers) as executor:
            runner = Runner(args, executor)
            report = Report(args.command, runner.seed, runner.samples, runner.tol, runner.mode)
            start = time.perf_counter()
            with report:
                try:
                    COMMANDS[args.command](runner, report)
                except UsageError:
                    raise
                except OscAuditError as err:
                    # Numerical errors end the run, the report still records them
                    logger.error('%s: %s', err.kind, err.message)
                    report.add_error(err, context=args.command)
                    code = err.exit_code
        logger.info('%s seed=%d samples=%d done in %.2f s', args.command, runner.seed, runner.samples,
                    time.perf_counter() - start)
        report.write(fmt, getattr(args, 'out', None))
        return code
    except UsageError as err:
        print(f'oscaudit {args.command}: {err.message}', file=sys.stderr)
        return err.exit_code


def main() -> int:
    return run(sys.argv[1:])


if __name__ == '__main__':

    sys.exit(main())

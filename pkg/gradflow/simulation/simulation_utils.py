# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import numpy as np
from scipy import sparse
from gradflow.dynamics.dynamics_utils import FlowState
from gradflow.utils.utilities import ValidationError, load_file, save_csv

schemes = ('euler', 'rk4')
dense_limit = 256


class DivergenceError(ArithmeticError):
    """
    The integrated state became non-finite or exceeded the divergence threshold.
    """
    def __init__(self, time, norm, message=None):
        self.time = float(time)
        self.norm = float(norm)
        super().__init__(message or 'the integration diverged at t = %g (state norm %g)' % (self.time, self.norm))


class IntegratorConfig(object):
    """
    Fixed-step integration settings.
    """
    def __init__(self, scheme='rk4', dt=0.01, horizon=2000.0, record_stride=1, stop=None, max_norm=1e100,
                 record_multipliers=True):
        """
        :param scheme: 'euler' or 'rk4'
        :param dt: time step
        :param horizon: final time T
        :param record_stride: record one snapshot every record_stride steps
        :param stop: optional residual threshold, the integration stops when ||dz/dt|| + ||dmu/dt|| < stop
        :param max_norm: the integration is declared divergent when the state norm exceeds it
        :param record_multipliers: False to record only z (saves memory on long runs)
        """
        if scheme not in schemes:
            raise ValidationError('scheme should be "euler" or "rk4", got ' + repr(scheme))
        try:
            dt, horizon, max_norm = float(dt), float(horizon), float(max_norm)
        except (TypeError, ValueError):
            raise ValidationError('dt, horizon and max_norm should be numbers')
        if not (np.isfinite(dt) and np.isfinite(horizon)) or dt <= 0 or horizon <= 0:
            raise ValidationError('dt and horizon should be strictly positive, got dt=%s T=%s' % (dt, horizon))
        if dt > horizon:
            raise ValidationError('dt=%g is larger than the horizon %g' % (dt, horizon))
        if isinstance(record_stride, bool) or int(record_stride) != record_stride or record_stride < 1:
            raise ValidationError('record_stride should be a positive integer, got ' + repr(record_stride))
        record_stride = int(record_stride)
        if record_stride * dt > horizon * (1 + 1e-12):
            raise ValidationError('the recording interval record_stride * dt is larger than the horizon')
        if stop is not None and stop <= 0:
            raise ValidationError('stop should be strictly positive or None')
        if max_norm <= 0:
            raise ValidationError('max_norm should be strictly positive')
        self.scheme = scheme
        self.dt = dt
        self.horizon = horizon
        self.record_stride = record_stride
        self.stop = None if stop is None else float(stop)
        self.max_norm = max_norm
        self.record_multipliers = bool(record_multipliers)

    @classmethod
    def from_dict(cls, block):
        """
        Build the configuration from a JSON block, e.g. {"scheme": "rk4", "dt": 0.01, "horizon": 2000}.
        """
        if block is None:
            return cls()
        if not isinstance(block, dict):
            raise ValidationError('the integrator block should be a JSON object')
        allowed = {'scheme', 'dt', 'horizon', 'record_stride', 'stop', 'max_norm', 'record_multipliers'}
        unknown = set(block) - allowed
        if unknown:
            raise ValidationError('unknown integrator keys: ' + str(sorted(unknown)))
        return cls(**block)

    @property
    def step_count(self):
        return int(round(self.horizon / self.dt))

    @property
    def sample_interval(self):
        return self.record_stride * self.dt

    def to_dict(self):
        return {'scheme': self.scheme, 'dt': self.dt, 'horizon': self.horizon, 'record_stride': self.record_stride,
                'stop': self.stop, 'max_norm': self.max_norm, 'record_multipliers': self.record_multipliers}

    def __repr__(self):
        return 'IntegratorConfig(%s)' % self.to_dict()


class Trajectory(object):
    """
    Sampled trajectory: times, aggregate states z (one row per sample) and optionally the multipliers mu.
    """
    def __init__(self, times, z, mu=None, reason='horizon'):
        """
        :param times: increasing sample times, starting at 0
        :param z: array of shape (samples, z_dim)
        :param mu: None or array of shape (samples, mu_dim)
        :param reason: 'horizon' or 'residual', why the integration stopped
        """
        self.times = np.asarray(times, dtype=float)
        self.z = np.atleast_2d(np.asarray(z, dtype=float))
        self.mu = None if mu is None else np.atleast_2d(np.asarray(mu, dtype=float))
        if self.z.shape[0] != self.times.size:
            raise ValueError('times and z should have the same number of samples')
        if self.mu is not None and self.mu.shape[0] != self.times.size:
            raise ValueError('times and mu should have the same number of samples')
        if self.times.size and (self.times[0] != 0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError('times should start at 0 and be increasing')
        self.reason = reason

    @property
    def sample_count(self):
        return self.times.size

    @property
    def z_dim(self):
        return self.z.shape[1]

    def final_state(self):
        return FlowState(self.z[-1], () if self.mu is None else self.mu[-1])

    def state(self, index):
        return FlowState(self.z[index], () if self.mu is None else self.mu[index])

    def save(self, file_path):
        """
        Save the trajectory as CSV with the header time, z[0], ..., mu[0], ...
        """
        header = ['time'] + ['z[%d]' % idx for idx in range(self.z_dim)]
        columns = [self.times[:, np.newaxis], self.z]
        if self.mu is not None:
            header += ['mu[%d]' % idx for idx in range(self.mu.shape[1])]
            columns.append(self.mu)
        save_csv(file_path, header, np.hstack(columns))

    @classmethod
    def load(cls, file_path):
        """
        Load a trajectory saved with save().

        :param file_path: path of the CSV file
        :return: the Trajectory, its stopping reason is unknown (None)
        """
        (header, values), _ = load_file(file_path)
        if not header or header[0] != 'time':
            raise ValidationError(str(file_path) + ' is not a trajectory file, the first column should be "time"')
        z_columns = [idx for idx, name in enumerate(header) if name.startswith('z[')]
        mu_columns = [idx for idx, name in enumerate(header) if name.startswith('mu[')]
        if not z_columns:
            raise ValidationError(str(file_path) + ' has no z column')
        mu = values[:, mu_columns] if mu_columns else None
        return cls(values[:, 0], values[:, z_columns], mu, reason=None)

    def __repr__(self):
        return 'Trajectory(samples=%d, z_dim=%d, mu=%s, reason=%r)' % (
            self.sample_count, self.z_dim, None if self.mu is None else self.mu.shape[1], self.reason)


def _step(rhs, t, y, dt, scheme, k1):
    if scheme == 'euler':
        return y + dt * k1
    k2 = rhs(t + dt / 2, y + 0.5 * dt * k1)
    k3 = rhs(t + dt / 2, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _operator(matrix):
    # small systems are faster as dense arrays
    return matrix.toarray() if matrix.shape[0] <= dense_limit else sparse.csr_matrix(matrix)


def affine_propagator(operator, offset, dt, scheme):
    """
    One step of a scheme applied to the linear system dy/dt = A y + c, as the affine map y -> M y + m with
    X = dt A, M = I + X P(X) and m = dt P(X) c, where P(X) = I for euler and I + X/2 + X^2/6 + X^3/24 for rk4.

    :param operator: the sparse matrix A
    :param offset: the vector c
    :param dt: time step
    :param scheme: 'euler' or 'rk4'
    :return: the sparse matrix M and the vector m
    """
    if scheme not in schemes:
        raise ValidationError('scheme should be "euler" or "rk4", got ' + repr(scheme))
    identity = sparse.identity(operator.shape[0], format='csr')
    scaled = sparse.csr_matrix(dt * operator)
    polynomial = identity
    if scheme == 'rk4':
        polynomial = identity + scaled @ (0.5 * identity + scaled @ (identity / 6.0 + scaled / 24.0))
    return sparse.csr_matrix(identity + scaled @ polynomial), dt * (polynomial @ np.asarray(offset, dtype=float))


def _stepper(rhs, dt, scheme):
    """
    Step and slope functions for rhs. Flows exposing an affine split (quadratic costs) are stepped with
    precomputed operators instead of calling rhs four times per step.

    :return: advance(t, y, k1) -> next state, derivative(t, y) -> slope, and whether advance uses k1
    """
    split = getattr(rhs, 'affine_split', None)
    operators = split() if split is not None else None
    if operators is None:
        return (lambda t, y, k1: _step(rhs, t, y, dt, scheme, k1)), rhs, True
    gradient, offset, rest = operators
    gains = rhs.gains
    if gains.is_constant:
        kG = gains.kG_at(0.0)
        operator = sparse.csr_matrix(kG * gradient + rest)
        shift = kG * offset
        propagator, propagator_shift = affine_propagator(operator, shift, dt, scheme)
        slope = _operator(operator)
        derivative = (lambda t, y: slope @ y + shift)
        # the propagator fills in with the powers of A, keep the stages when it gets denser than four of them
        if operator.shape[0] <= dense_limit or propagator.nnz <= 4 * operator.nnz:
            propagator = _operator(propagator)
            return (lambda t, y, k1: propagator @ y + propagator_shift), derivative, False
    else:
        gradient, rest = _operator(gradient), _operator(rest)
        derivative = (lambda t, y: gains.kG_at(t) * (gradient @ y + offset) + rest @ y)
    return (lambda t, y, k1: _step(derivative, t, y, dt, scheme, k1)), derivative, True


def integrate(rhs, initial, config, verbose=False):
    """
    Integrate dy/dt = rhs(t, y) with a fixed-step explicit scheme from the FlowState initial, y = [z, mu].
    Times are computed as step * dt, which keeps identical inputs bit-identical.

    :param rhs: callable rhs(t, y) returning the derivative of the packed state, e.g. a GradientFlow
    :param initial: the initial FlowState
    :param config: the IntegratorConfig
    :param verbose: True to print the progress every tenth of the horizon
    :return: the Trajectory, with the final snapshot always recorded
    """
    z_dim = initial.z.size
    y = initial.as_vector()
    dt, stride, scheme = config.dt, config.record_stride, config.scheme
    nb_steps = config.step_count
    nb_records = nb_steps // stride + 1 + (1 if nb_steps % stride else 0)
    width = y.size if config.record_multipliers else z_dim
    records = np.empty((nb_records, width))
    times = np.empty(nb_records)

    advance, derivative, uses_slope = _stepper(rhs, dt, scheme)
    needs_slope = uses_slope or config.stop is not None
    k1 = np.asarray(derivative(0.0, y), dtype=float)
    if k1.shape != y.shape:
        raise ValueError('rhs returned shape %s for a state of shape %s' % (k1.shape, y.shape))
    if not np.all(np.isfinite(k1)):
        raise DivergenceError(0.0, np.linalg.norm(y), 'rhs is not finite at the initial state')

    records[0] = y[:width]
    times[0] = 0.0
    count = 1
    reason = 'horizon'
    progress = max(nb_steps // 10, 1)
    step = 0
    with np.errstate(over='ignore', invalid='ignore'):
        while step < nb_steps:
            if config.stop is not None and \
                    np.linalg.norm(k1[:z_dim]) + np.linalg.norm(k1[z_dim:]) < config.stop:
                reason = 'residual'
                break
            y = advance(step * dt, y, k1)
            step += 1
            norm = np.sqrt(y @ y)
            if not np.isfinite(norm) or norm > config.max_norm:
                raise DivergenceError(step * dt, norm)
            if step % stride == 0:
                records[count] = y[:width]
                times[count] = step * dt
                count += 1
            if verbose and step % progress == 0:
                print('t = %g / %g, ||y|| = %.6g' % (step * dt, config.horizon, norm))
            if needs_slope and step < nb_steps:
                k1 = derivative(step * dt, y)
    if times[count - 1] != step * dt:
        records[count] = y[:width]
        times[count] = step * dt
        count += 1
    records = records[:count]
    mu = records[:, z_dim:] if config.record_multipliers and y.size > z_dim else None
    return Trajectory(times[:count], records[:, :z_dim], mu, reason=reason)


def convergence_order(rhs, initial, scheme, dt=0.1, horizon=1.0):
    """
    Observed order of a scheme by Richardson extrapolation over the steps dt, dt/2 and dt/4:
    log2(||y_dt - y_dt/2|| / ||y_dt/2 - y_dt/4||) on the final states.

    :param rhs: callable rhs(t, y)
    :param initial: the initial FlowState
    :param scheme: 'euler' or 'rk4'
    :param dt: coarsest step
    :param horizon: final time, a multiple of dt
    :return: the observed order
    """
    finals = []
    for divisor in (1, 2, 4):
        config = IntegratorConfig(scheme=scheme, dt=dt / divisor, horizon=horizon,
                                  record_stride=int(round(horizon / dt)) * divisor, record_multipliers=True)
        finals.append(integrate(rhs, initial, config).final_state().as_vector())
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    if fine == 0:
        raise ValueError('the two finest solutions coincide, use a larger dt')
    return float(np.log2(coarse / fine))

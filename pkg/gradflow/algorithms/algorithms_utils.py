# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import warnings
import numpy as np
from scipy import linalg
from scipy.sparse import linalg as splinalg
import gradflow.costs.costs_utils as cu
from gradflow.dynamics.dynamics_utils import GainSchedule, GradientFlow, MethodSpec
from gradflow.utils.utilities import NotStrictlyConvexError, ValidationError, save_json

gradient_tolerance = 1e-10


class OracleResult(object):
    """
    Optimum x* of the unsplit problem min_x sum_i f_i(x), with f* and the norm of the gradient of the sum at x*.
    """
    def __init__(self, x_star, f_star, method, residual, iterations=0):
        """
        :param x_star: the optimum, vector of length n
        :param f_star: the optimal value
        :param method: 'analytic' (direct linear solve) or 'numeric' (gradient descent)
        :param residual: norm of sum_i grad f_i(x*)
        :param iterations: number of descent iterations, 0 for the analytic solve
        """
        self.x_star = np.asarray(x_star, dtype=float)
        self.f_star = float(f_star)
        self.method = method
        self.residual = float(residual)
        self.iterations = int(iterations)

    def to_dict(self):
        return {'x_star': self.x_star, 'f_star': self.f_star, 'method': self.method, 'residual': self.residual,
                'iterations': self.iterations}

    def save(self, file_path):
        save_json(file_path, self.to_dict())

    def __repr__(self):
        return 'OracleResult(x_star=%s, f_star=%.6g, method=%r, residual=%.2e)' % (
            np.array2string(self.x_star, precision=6), self.f_star, self.method, self.residual)


def solve_consensus_optimum(cost, numeric=False, tolerance=gradient_tolerance, max_iterations=1000000,
                            verbose=False):
    """
    Minimize sum_i f_i(x) without splitting: (sum_i Q_i) x = -sum_i b_i for quadratic costs, damped gradient descent
    with a backtracking line search otherwise.

    :param cost: the SeparableCost, with a strictly convex sum
    :param numeric: True to use gradient descent even for quadratic costs
    :param tolerance: gradient norm at which the descent stops
    :param max_iterations: maximum number of descent iterations
    :param verbose: True to print the descent progress
    :return: the OracleResult
    """
    x = np.zeros(cost.variable_count)
    cu.check_strict_convexity(cost, x)
    if cost.is_quadratic and not numeric:
        hessian = np.sum([agent.Q for agent in cost.agents], axis=0)
        linear = np.sum([agent.b for agent in cost.agents], axis=0)
        try:
            x = linalg.solve(hessian, -linear, assume_a='sym')
        except linalg.LinAlgError as err:
            raise NotStrictlyConvexError('the sum of the quadratic costs is singular: ' + str(err))
        residual = np.linalg.norm(hessian @ x + linear)
        return OracleResult(x, cost.total_value(x), 'analytic', residual)

    step = 1.0
    value, gradient = cost.total_value(x), cost.total_gradient(x)
    for iteration in range(max_iterations):
        norm = np.linalg.norm(gradient)
        if norm < tolerance:
            return OracleResult(x, value, 'numeric', norm, iteration)
        resolution = 16 * np.finfo(float).eps * max(1.0, abs(value))
        step *= 2
        while True:
            candidate = x - step * gradient
            candidate_value = cost.total_value(candidate)
            candidate_gradient = cost.total_gradient(candidate)
            if candidate_value <= value - 0.5 * step * norm ** 2:
                break
            # the required decrease is below the resolution of f, accept any step reducing |grad|
            if 0.5 * step * norm ** 2 <= resolution and np.linalg.norm(candidate_gradient) < norm:
                break
            step *= 0.5
            if step < 1e-16:
                raise NotStrictlyConvexError('the line search failed at |grad| = %.3e' % norm)
        x = candidate
        value, gradient = candidate_value, candidate_gradient
        if verbose and iteration % 1000 == 0:
            print('iteration', iteration, ': f =', value, ', |grad| =', norm)
    raise ValueError('gradient descent did not reach |grad| < %g in %d iterations' % (tolerance, max_iterations))


def _p_flow(cost, layout, kP, kG):
    if kG <= 0 or kP <= 0:
        raise ValidationError('the steady state needs kP > 0 and kG > 0, got kP=%s kG=%s' % (kP, kG))
    return GradientFlow(cost, MethodSpec('p', GainSchedule(kG=kG, kP=kP), layout))


def predict_P_steady_state(cost, layout, kP=1.0, kG=1.0, tolerance=gradient_tolerance, max_iterations=50,
                           verbose=False):
    """
    Fixed point of the P flow with constant gains, the solution of (k_P / k_G) L z + grad f(z) = 0. Linear for
    quadratic costs, Newton iterations otherwise.

    :param cost: the SeparableCost
    :param layout: the AggregateLayout
    :param kP: proportional gain
    :param kG: gradient gain
    :param tolerance: residual norm at which the Newton iterations stop
    :param max_iterations: maximum number of Newton iterations
    :param verbose: True to print the Newton residuals
    :return: the aggregate steady state
    """
    flow = _p_flow(cost, layout, kP, kG)
    ratio = kP / kG
    z = np.zeros(layout.z_dim)
    for iteration in range(max_iterations):
        residual = ratio * layout.laplacian_dot(z) + flow.aggregate_gradient(z)
        norm = np.linalg.norm(residual)
        if verbose:
            print('Newton iteration', iteration, ': residual', norm)
        if norm < tolerance and iteration > 0:
            return z
        jacobian = (ratio * layout.laplacian + flow.aggregate_hessian(z)).tocsc()
        # spsolve reports a singular system by an exception or by a warning and a non-finite solution
        try:
            with np.errstate(all='ignore'), warnings.catch_warnings():
                warnings.simplefilter('ignore', splinalg.MatrixRankWarning)
                correction = splinalg.spsolve(jacobian, residual)
        except RuntimeError as err:
            raise NotStrictlyConvexError('(kP/kG) L + Hessian is singular: ' + str(err))
        if not np.all(np.isfinite(correction)):
            raise NotStrictlyConvexError('(kP/kG) L + Hessian is singular, the P flow has no unique steady state')
        z = z - correction
        if cost.is_quadratic:
            final = np.linalg.norm(ratio * layout.laplacian_dot(z) + flow.aggregate_gradient(z))
            if final > 1e-8 * max(1.0, norm):
                raise NotStrictlyConvexError('(kP/kG) L + Hessian is singular, residual %.3e' % final)
            return z
    raise ValueError('Newton iterations did not converge in %d iterations' % max_iterations)


def kkt_residual(cost, layout, z, mu, gains, t=0.0):
    """
    Saddle-point certificate of the I and PI flows: the consensus residual ||D^T z|| and the stationarity residual
    ||k_G grad f(z) + k_I' D mu||.

    :param cost: the SeparableCost
    :param layout: the AggregateLayout
    :param z: aggregate state
    :param mu: aggregate multipliers
    :param gains: the GainSchedule
    :param t: time, for a fading gradient gain
    :return: (consensus residual, stationarity residual)
    """
    flow = GradientFlow(cost, MethodSpec('pi', gains, layout, allow_degenerate=True))
    z = layout.check_z(z)
    mu = np.asarray(mu, dtype=float)
    consensus = np.linalg.norm(layout.incidence_transpose_dot(z))
    stationarity = np.linalg.norm(gains.kG_at(t) * flow.aggregate_gradient(z) + gains.kIp * layout.incidence_dot(mu))
    return float(consensus), float(stationarity)


def recover_multipliers(cost, layout, x_star, gains, t=0.0):
    """
    Least-norm multipliers mu solving k_I' D mu = -k_G grad f(z*) at the replicated optimum z*.

    :return: the replicated optimum z* and the multipliers mu
    """
    if gains.kIp <= 0:
        raise ValidationError('multipliers need kIp > 0')
    flow = GradientFlow(cost, MethodSpec('pi', gains, layout, allow_degenerate=True))
    z_star = np.asarray(x_star, dtype=float)[layout.z_variable]
    target = -gains.kG_at(t) / gains.kIp * flow.aggregate_gradient(z_star)
    mu = splinalg.lsqr(layout.incidence, target, atol=1e-14, btol=1e-14, iter_lim=100000)[0]
    return z_star, mu

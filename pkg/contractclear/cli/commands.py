"""The ``contractclear`` subcommands."""

from __future__ import annotations

import dataclasses
import logging

from ..clearing import clear_bisection, clear_decentralized, clear_stochastic, diagnose_rates
from ..experiments import (
    capacity_statics,
    compare_mechanisms,
    convergence_series,
    fee_sweep,
    movielens_comparison,
    regret_experiment,
    scaling_sweep,
    sensitivity_grid,
    shock_run,
)
from ..mechanisms import MechanismKind
from ..movielens import load_movielens
from ..results import ResultTable
from .core import CommandRegistry, argument
from .errors import BadArgument

log = logging.getLogger(__name__)

__all__ = ('registry',)

registry = CommandRegistry(
    'contractclear',
    description='Capacity-constrained contract clearing: solvers, mechanisms and experiments.',
)

registry.add_common_argument('--config', metavar='PATH', help='scenario file (JSON); defaults apply without it')
registry.add_common_argument('--seed', type=int, metavar='INT', help='override experiment.master_seed')
registry.add_common_argument('--out', metavar='PATH', help='write the result table here instead of stdout')
registry.add_common_argument('--format', choices=('csv', 'json'), help='result format (default: from --out suffix, else csv)')
registry.add_common_argument('--jobs', type=int, metavar='INT', help='worker processes for replications')
registry.add_common_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')


def _replications(ctx):
    value = ctx.flag('replications')
    if value is not None and value <= 0:
        raise BadArgument('must be positive', flag='--replications')
    return value


@registry.command()
@argument('--method', choices=('decentralized', 'stochastic', 'bisection'), default='decentralized',
          help='solver to run (default: decentralized)')
def clear(ctx):
    """Clear one instance and print the price, allocations and rate diagnostics."""
    cfg = ctx.config
    pop = ctx.population()
    c = cfg.contract
    method = ctx.flag('method')

    if method == 'bisection':
        solution = clear_bisection(pop, c, tol_primal=cfg.algo.primal_tolerance(c.m))
    elif method == 'stochastic':
        solution = clear_stochastic(pop, c, cfg.algo, cfg.master_seed)
    else:
        solution = clear_decentralized(pop, c, cfg.algo, cfg.master_seed)

    ctx.echo('method', solution.method)
    ctx.echo('mu_star', solution.mu_star)
    ctx.echo('converged', solution.converged)
    ctx.echo('iterations', solution.iterations)
    ctx.echo('total', solution.total)
    ctx.echo('slack', solution.slack)

    metadata = {'mu_star': solution.mu_star, 'converged': solution.converged, 'iterations': solution.iterations}
    if len(solution.trace):
        oracle = clear_bisection(pop, c).mu_star
        diagnostics = diagnose_rates(solution.trace, oracle, pop, c)
        ctx.echo('mu_oracle', oracle)
        ctx.echo('kappa', diagnostics.contraction_kappa)
        ctx.echo('fejer_violations', diagnostics.fejer_violations)
        ctx.echo('lipschitz_L', diagnostics.lipschitz_L)
        ctx.echo('strong_mono_alpha', diagnostics.strong_mono_alpha)
        metadata.update(mu_oracle=oracle, kappa=diagnostics.contraction_kappa)

    x = solution.allocations
    table = ResultTable(['id', 'alpha', 'beta', 'x'], metadata=metadata)
    for agent_id, alpha, beta, quantity in zip(pop.ids, pop.alpha, pop.beta, x):
        table.add_row([int(agent_id), float(alpha), float(beta), float(quantity)])
    ctx.emit(table)


@registry.command()
@argument('--replications', type=int, metavar='INT', help='override experiment.replications')
def compare(ctx):
    """Compare every configured mechanism on common populations."""
    ctx.emit(compare_mechanisms(ctx.config, replications=_replications(ctx)).to_table())


@registry.command()
@argument('--mechanism', action='append', metavar='NAME',
          help='mechanism to sweep, repeatable (default: proposed_equilibrium)')
def sweep(ctx):
    """Sweep the per-unit fee over experiment.tau_grid."""
    names = ctx.flag('mechanism')
    kinds = [MechanismKind.from_value(name) for name in names] if names else None
    ctx.emit(fee_sweep(ctx.config, kinds).to_table())


@registry.command()
@argument('--mechanism', metavar='NAME', help='mechanism to evaluate (default: proposed_equilibrium)')
def grid(ctx):
    """Factorial tau x g sensitivity grid with central-difference gradients."""
    name = ctx.flag('mechanism')
    kind = MechanismKind.from_value(name) if name else None
    ctx.emit(sensitivity_grid(ctx.config, kind).to_table())


@registry.command()
def shock(ctx):
    """Play the clearing loop across a fee or demand shock and report resilience."""
    result = shock_run(ctx.config)
    for key in ('resilience', 'reconvergence_time', 'fairness_loss', 'fairness_rebound', 'mu_final', 'mu_oracle_post'):
        ctx.echo(key, result.summary.get(key))
    ctx.emit(result.to_table())


@registry.command()
@argument('--horizon', type=int, metavar='INT', help='override experiment.regret.horizon')
def regret(ctx):
    """Cumulative dynamic regret of repeated play under drifting demand."""
    cfg = ctx.config
    horizon = ctx.flag('horizon')
    if horizon is not None:
        if horizon <= 0:
            raise BadArgument('must be positive', flag='--horizon')
        cfg = cfg.replace(regret=dataclasses.replace(cfg.regret, horizon=horizon))
    result = regret_experiment(cfg)
    ctx.echo('regret', result.at(result.cumulative.size))
    ctx.echo('slope', result.slope)
    ctx.emit(result.to_table())


@registry.command()
def statics(ctx):
    """Clearing price as a function of capacity over experiment.m_grid."""
    result = capacity_statics(ctx.config, agents=ctx.population())
    ctx.echo('monotone', result.monotone)
    ctx.emit(result.to_table())


@registry.command()
@argument('--data', metavar='PATH', help='MovieLens u.data file (default: experiment.movielens.path)')
@argument('--strict', action='store_true', default=None, help='abort on malformed lines')
@argument('--capacity', type=float, metavar='REAL', help='capacity (default: users / 5)')
@argument('--replications', type=int, metavar='INT', help='override experiment.sweep_replications')
def movielens(ctx):
    """Compare the mechanisms on a population built from MovieLens ratings."""
    cfg = ctx.config
    path = ctx.flag('data') or cfg.movielens.path
    if not path:
        raise BadArgument('a ratings file is required (--data or experiment.movielens.path)', flag='--data')
    strict = cfg.movielens.strict if ctx.flag('strict') is None else True
    capacity = ctx.flag('capacity')
    if capacity is not None and not capacity > 0:
        raise BadArgument('must be positive', flag='--capacity')

    pop, report = load_movielens(path, strict=strict, seed=cfg.master_seed, beta_dist=cfg.beta_dist)
    ctx.echo('users', report.users)
    ctx.echo('records', report.records)
    ctx.echo('malformed', report.malformed)

    result = movielens_comparison(pop, cfg, capacity=capacity, replications=_replications(ctx))
    table = result.to_table()
    table.metadata.update(users=report.users, records=report.records, malformed=report.malformed)
    ctx.emit(table)


@registry.command()
@argument('--replications', type=int, metavar='INT', help='override experiment.sweep_replications')
def scaling(ctx):
    """Compare the mechanisms across experiment.n_grid population sizes."""
    ctx.emit(scaling_sweep(ctx.config, replications=_replications(ctx)).to_table())


@registry.command()
def trajectory(ctx):
    """Per-iteration price, demand, allocations, efficiency and Gini of one run."""
    cfg = ctx.config
    pop = ctx.population()
    series = convergence_series(pop, cfg.contract, cfg.algo, cfg.master_seed, eps_part=cfg.eps_part)
    ctx.echo('converged', series.converged)
    ctx.echo('mu_star', series.mu_star)
    ctx.emit(series.to_table({'master_seed': cfg.master_seed, 'n': len(pop)}))

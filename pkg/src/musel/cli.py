"""Command-line interface.

Subcommands: estimate (run a selector on CSV data), simulate (Monte Carlo
benchmark), sensitivity (Gram sensitivities), thresholds (noise threshold
calculus).  Structured results are JSON; tables are CSV.  All writes are
atomic (temp file + rename), and every subcommand is a pure function of its
arguments, input files and seed.

Exit codes: 0 ok; 1 malformed CSV; 2 infeasible; 3 iteration limit;
4 sensitivity budget exceeded; 64 usage error.
"""

import json
import sys

import click
import numpy as np

from . import io as mio
from .estimators import (SelectorConfig, feasibility_check,
                         solve_compensated_mu, solve_dantzig,
                         solve_missing_data_cmu, solve_mu_selector)
from .lp import LpStatus
from .missing import MaskedDesign, estimate_pi, rescale, sigma_hat
from .sensitivity import (BudgetExceededError, empirical_gram,
                          kappa_inf_exact, kappa_lower_bound, kappa_one,
                          kappa_q_from_inf, kappa_star)
from .simulate import (PRESETS, SimConfig, config_from_preset, rows_to_csv,
                       rows_to_markdown, run_experiment)
from .thresholds import NoiseParams, thresholds_for

click.UsageError.exit_code = 64

_STATUS_EXIT = {
    LpStatus.OPTIMAL: 0,
    LpStatus.INFEASIBLE: 2,
    LpStatus.ITERATION_LIMIT: 3,
    LpStatus.UNBOUNDED: 5,
}


@click.group()
def cli():
    """musel: l1 selectors for noisy and partially missing designs."""


def _emit(text, out):
    if out:
        mio.atomic_write_text(out, text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _load(path, header, reader):
    try:
        return reader(path, header=header)
    except mio.CsvFormatError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)


@cli.command()
@click.option("--design", required=True, type=click.Path(exists=True))
@click.option("--response", required=True, type=click.Path(exists=True))
@click.option("--mode", required=True,
              type=click.Choice(["mu", "cmu", "dantzig", "missing"]))
@click.option("--mu", "mu_", type=float, default=0.0, show_default=True)
@click.option("--tau", type=float, required=True)
@click.option("--pi", type=float, default=None,
              help="Known missingness probability (missing mode).")
@click.option("--estimate-pi", "est_pi", is_flag=True,
              help="Estimate pi from the zero frequency (missing mode).")
@click.option("--domain", type=click.Choice(["nonneg", "free"]),
              default="nonneg", show_default=True)
@click.option("--dhat", type=click.Path(exists=True), default=None,
              help="Compensation diagonal CSV (cmu mode).")
@click.option("--path", "mpath", type=click.Choice(["rescale", "direct"]),
              default="rescale", show_default=True,
              help="Missing-mode route: rescale Z or solve the masked form.")
@click.option("--header", is_flag=True, help="Skip the first CSV line.")
@click.option("--out", type=click.Path(), default=None,
              help="Output JSON path (default: stdout).")
def estimate(design, response, mode, mu_, tau, pi, est_pi, domain, dhat,
             mpath, header, out):
    """Run a selector on a design/response pair and write the estimate."""
    Z = _load(design, header, mio.read_matrix)
    y = _load(response, header, mio.read_vector)

    if mode == "missing":
        if (pi is None) == (not est_pi):
            raise click.UsageError(
                "missing mode needs exactly one of --pi or --estimate-pi")
        cfg = SelectorConfig(mu=mu_, tau=tau, domain=domain)
        est = solve_missing_data_cmu(Z, y, pi=pi, config=cfg, path=mpath)
        masked = MaskedDesign(Z_tilde=Z)
        pi_used = pi if pi is not None else estimate_pi(masked)
        comp = sigma_hat(masked, pi_used).sigma_hat_sq
        if mpath == "rescale":
            chk_cfg = SelectorConfig(mu=mu_, tau=tau, domain=domain,
                                     compensation=comp)
            residual, _ = feasibility_check(est.theta, rescale(masked, pi_used),
                                            y, chk_cfg)
        else:
            n = Z.shape[0]
            G = Z.T @ Z / n
            G[np.diag_indices_from(G)] -= comp
            c = (1.0 - pi_used) * (Z.T @ y) / n
            l1 = float(np.sum(np.abs(est.theta)))
            residual = float(np.max(np.abs(c - G @ est.theta))) - (mu_ * l1 + tau)
    elif mode == "cmu":
        if dhat is None:
            raise click.UsageError(
                "cmu mode needs --dhat (or use --mode missing with --pi)")
        comp = _load(dhat, header, mio.read_vector)
        cfg = SelectorConfig(mu=mu_, tau=tau, domain=domain, compensation=comp)
        est = solve_compensated_mu(Z, y, cfg)
        residual, _ = feasibility_check(est.theta, Z, y, cfg)
    elif mode == "mu":
        cfg = SelectorConfig(mu=mu_, tau=tau, domain=domain)
        est = solve_mu_selector(Z, y, cfg)
        residual, _ = feasibility_check(est.theta, Z, y, cfg)
    else:
        est = solve_dantzig(Z, y, tau, domain=domain)
        cfg = SelectorConfig(mu=0.0, tau=tau, domain=domain)
        residual, _ = feasibility_check(est.theta, Z, y, cfg)

    payload = {
        "theta": [float(v) for v in est.theta],
        "l1": est.l1_norm,
        "support": [int(j) for j in est.support],
        "status": est.status.value,
        "feasibility_residual": residual,
        "iterations": est.iterations,
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)
    sys.exit(_STATUS_EXIT[est.status])


_SIM_KEYS = {"n", "p", "s_list", "theta_value", "noise_sd", "pi_star",
             "delta_list", "tau_rule", "reps", "estimators", "fresh_design",
             "pi_mode", "nonzero_threshold"}


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON file with SimConfig overrides.")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--seed", type=int, required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--raw", is_flag=True,
              help="Also write per-replication records to <out>.raw.json.")
@click.option("--markdown", "md", is_flag=True,
              help="Also print a mean-(std) table to stdout.")
@click.option("--fresh-design", is_flag=True,
              help="Redraw the design every replication instead of per s.")
@click.option("--workers", type=int, default=None,
              help="Worker threads (default: MUSEL_THREADS or cpu count).")
def simulate(config_path, preset, seed, out, raw, md, fresh_design, workers):
    """Run the Monte Carlo benchmark grid and write the table as CSV."""
    overrides = {}
    if config_path:
        with open(config_path) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _SIM_KEYS
        if unknown:
            raise click.UsageError(
                f"unknown config key {sorted(unknown)[0]!r}; "
                f"valid keys: {sorted(_SIM_KEYS)}")
        overrides.update(file_cfg)
    if fresh_design:
        overrides["fresh_design"] = True
    for key in ("s_list", "delta_list", "estimators"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    try:
        if preset:
            config = config_from_preset(preset, seed=seed, **overrides)
        else:
            config = SimConfig(seed=seed, **overrides)
    except (ValueError, TypeError) as e:
        raise click.UsageError(str(e))

    result = run_experiment(config, workers=workers, collect_raw=raw)
    rows, raw_records = result if raw else (result, None)
    mio.atomic_write_text(out, rows_to_csv(rows))
    if raw:
        mio.atomic_write_text(out + ".raw.json",
                              json.dumps(raw_records, indent=2, sort_keys=True) + "\n")
    if md:
        click.echo(rows_to_markdown(rows), nl=False)


@cli.command()
@click.option("--gram", type=click.Path(exists=True), default=None)
@click.option("--s", "s_", type=int, required=True)
@click.option("--q", "q_", required=True,
              help="1, 2, inf, or star:k (0-based coordinate k).")
@click.option("--empirical", is_flag=True,
              help="Build the Gram estimate from --design (and --dhat).")
@click.option("--design", type=click.Path(exists=True), default=None)
@click.option("--dhat", type=click.Path(exists=True), default=None)
@click.option("--lower-bound", "lower", is_flag=True,
              help="Use the any-p LP lower bound instead of enumeration.")
@click.option("--budget", type=int, default=100_000, show_default=True)
@click.option("--header", is_flag=True)
@click.option("--out", type=click.Path(), default=None)
def sensitivity(gram, s_, q_, empirical, design, dhat, lower, budget, header,
                out):
    """Compute a cone sensitivity of a Gram matrix."""
    if empirical:
        if design is None:
            raise click.UsageError("--empirical needs --design")
        Z = _load(design, header, mio.read_matrix)
        d = _load(dhat, header, mio.read_vector) if dhat else None
        psi = empirical_gram(Z, d)
    elif gram is not None:
        psi = _load(gram, header, mio.read_matrix)
    else:
        raise click.UsageError("provide --gram or --empirical with --design")

    try:
        if q_.startswith("star:"):
            k = int(q_.split(":", 1)[1])
            res = kappa_star(psi, s_, k, budget_cap=budget)
        elif q_ == "inf":
            res = (kappa_lower_bound(psi, s_) if lower
                   else kappa_inf_exact(psi, s_, budget_cap=budget))
        elif q_ == "1":
            if lower:
                base = kappa_lower_bound(psi, s_)
                res = base
                res.value = kappa_q_from_inf(base.value, s_, 1.0)
                res.q = 1.0
            else:
                res = kappa_one(psi, s_, budget_cap=budget)
        elif q_ == "2":
            base = (kappa_lower_bound(psi, s_) if lower
                    else kappa_inf_exact(psi, s_, budget_cap=budget))
            res = base
            res.value = kappa_q_from_inf(base.value, s_, 2.0)
            res.q = 2.0
            res.kind = "lower_bound"
            res.certificate = None
            res.certificate_J = None
        else:
            raise click.UsageError(f"bad --q {q_!r}: use 1, 2, inf or star:k")
    except BudgetExceededError as e:
        click.echo(f"error: {e} (pass --lower-bound)", err=True)
        sys.exit(4)
    except ValueError as e:
        raise click.UsageError(str(e))

    _emit(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n", out)


@cli.command()
@click.option("--gamma-xi", "gamma_xi", type=float, required=True,
              help="Subgaussian constant of the response noise.")
@click.option("--gamma-Xi", "gamma_Xi", type=float, required=True,
              help="Subgaussian constant of the design noise.")
@click.option("--m2", type=float, default=1.0, show_default=True)
@click.option("--m4", type=float, default=1.0, show_default=True)
@click.option("--pi", type=float, default=None,
              help="Missingness probability (enables the b threshold).")
@click.option("--n", "n_", type=int, required=True)
@click.option("--p", "p_", type=int, required=True)
@click.option("--eps", type=float, required=True)
@click.option("--gamma0", type=float, default=None)
@click.option("--t0", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
def thresholds(gamma_xi, gamma_Xi, m2, m4, pi, n_, p_, eps, gamma0, t0, out):
    """Compute the noise deviation thresholds and mu(eps), tau(eps)."""
    try:
        params = NoiseParams(gamma_xi=gamma_xi, gamma_Xi=gamma_Xi,
                             epsilon=eps, n=n_, p=p_, m2=m2, m4=m4,
                             gamma0=gamma0, t0=t0)
        th = thresholds_for(params, pi_star=pi)
    except ValueError as e:
        raise click.UsageError(str(e))
    inputs = {"gamma_xi": gamma_xi, "gamma_Xi": gamma_Xi, "m2": m2, "m4": m4,
              "pi": pi, "n": n_, "p": p_, "eps": eps,
              "gamma0": params.gamma0, "t0": params.t0}
    _emit(th.to_json(inputs=inputs) + "\n", out)


def main():
    cli()


if __name__ == "__main__":
    main()

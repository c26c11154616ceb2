//! Subcommand drivers. Each produces a complete CSV document (header row,
//! `.` decimals, a trailing status column) so output is easy to diff and
//! byte-stable for fixed inputs.

use anyhow::{bail, Result};
use rayon::prelude::*;
use sharq_core::{
    avg_error_direct, avg_error_interfered, delay_pmf, equal_access, optimize_access,
    pu_outage_overall, simulate, su_outage, su_outage_bounds, transmission_load, AccessPolicy,
    Constraint, Error as CoreError, OptimizerConfig, OutageProfile, SimConfig, SuArrivals,
};

use crate::scenario::{linear_to_db, ArrivalMode, PolicyMode, Scenario};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub grid_step: Option<f64>,
}

/// Outcome of a whole run: the CSV text plus whether the run as a whole
/// succeeded (drives the exit code).
pub struct RunOutput {
    pub csv: String,
    pub ok: bool,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn infeasible_status(binding: Constraint) -> String {
    format!("INFEASIBLE({binding})")
}

/// The four fading-averaged error probabilities; power-independent of
/// lambda_p, so computed once per scenario.
struct AveragedErrors {
    eps_s1: f64,
    eps_s2: f64,
    eps_p1: f64,
    eps_p2: f64,
}

fn averaged_errors(scenario: &Scenario) -> Result<AveragedErrors> {
    let link = scenario.link()?;
    Ok(AveragedErrors {
        eps_s1: avg_error_direct(link.su_snr, link.n, link.rate)?,
        eps_s2: avg_error_interfered(link.su_snr, link.pu_snr, link.n, link.rate)?,
        eps_p1: avg_error_direct(link.pu_snr, link.n, link.rate)?,
        eps_p2: avg_error_interfered(link.pu_snr, link.su_snr, link.n, link.rate)?,
    })
}

fn profile_at(errors: &AveragedErrors, lambda_p: f64) -> Result<OutageProfile> {
    Ok(OutageProfile::new(
        lambda_p,
        errors.eps_s1,
        errors.eps_s2,
        errors.eps_p1,
        errors.eps_p2,
    )?)
}

enum Resolved {
    Policy(AccessPolicy),
    Infeasible(Constraint),
}

fn resolve_policy(
    scenario: &Scenario,
    profile: &OutageProfile,
    trials: usize,
    grid_step: f64,
) -> Result<Resolved> {
    match scenario.policy.mode {
        PolicyMode::Explicit => Ok(Resolved::Policy(
            scenario
                .explicit_policy()?
                .expect("validated explicit policy"),
        )),
        PolicyMode::Equal => match equal_access(scenario.targets.eps_s, profile, trials) {
            Ok(eq) => Ok(Resolved::Policy(AccessPolicy::uniform(eq.q, trials)?)),
            Err(CoreError::InfeasiblePolicy { binding }) => Ok(Resolved::Infeasible(binding)),
            Err(e) => Err(e.into()),
        },
        PolicyMode::Optimal => {
            let cfg =
                OptimizerConfig::new(grid_step, scenario.targets.eps_s, scenario.targets.eps_p)?;
            match optimize_access(&cfg, profile, trials) {
                Ok(policy) => Ok(Resolved::Policy(policy)),
                Err(CoreError::InfeasiblePolicy { binding }) => Ok(Resolved::Infeasible(binding)),
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Run closures over the sweep points on a sized thread pool, keeping sweep
/// order in the output.
fn sweep_rows<F>(points: &[f64], jobs: Option<usize>, row: F) -> Result<Vec<String>>
where
    F: Fn(usize, f64) -> Result<String> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &lp)| row(i, lp))
            .collect()
    })
}

/// Whole output assembled from header + rows; `ok` when at least one row is
/// not infeasible.
fn assemble(header: &str, rows: Vec<String>) -> RunOutput {
    let ok = rows
        .iter()
        .any(|r| r.ends_with(",OK") || r.ends_with(",PASS"));
    let mut csv = String::from(header);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    RunOutput { csv, ok }
}

/// Analytical sweep: outage, bounds, load, primary outage and expected
/// delay per lambda_p.
pub fn run_analyze(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let errors = averaged_errors(scenario)?;
    let trials = scenario.trials()?;
    let grid_step = opts.grid_step.unwrap_or_else(|| scenario.grid_step());
    let points = scenario.sweep_points();
    let rows = sweep_rows(&points, opts.jobs, |_, lambda_p| {
        let profile = profile_at(&errors, lambda_p)?;
        let (lo, hi) = su_outage_bounds(&profile, trials);
        match resolve_policy(scenario, &profile, trials, grid_step)? {
            Resolved::Policy(policy) => {
                let eps_s = su_outage(&policy, &profile);
                let phi = transmission_load(&policy, &profile);
                let eps_p =
                    pu_outage_overall(phi, trials, eps_s, profile.eps_p1(), profile.eps_p2())?;
                let delay = delay_pmf(&policy, &profile)?;
                Ok(format!(
                    "{},{},{},{},{},{},{},OK",
                    fmt(lambda_p),
                    fmt(eps_s),
                    fmt(lo),
                    fmt(hi),
                    fmt(phi),
                    fmt(eps_p),
                    fmt(delay.expected_delay()),
                ))
            }
            Resolved::Infeasible(binding) => Ok(format!(
                "{},,{},{},,,,{}",
                fmt(lambda_p),
                fmt(lo),
                fmt(hi),
                infeasible_status(binding)
            )),
        }
    })?;
    Ok(assemble(
        "lambda_p,eps_s,eps_sl,eps_su,phi,eps_p,expected_delay,status",
        rows,
    ))
}

/// Transmit-power comparison of the four schemes, in dB per packet.
pub fn run_power_sweep(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let errors = averaged_errors(scenario)?;
    let link = scenario.link()?;
    let trials = scenario.trials()?;
    let grid_step = opts.grid_step.unwrap_or_else(|| scenario.grid_step());
    let points = scenario.sweep_points();
    let rows = sweep_rows(&points, opts.jobs, |_, lambda_p| {
        let profile = profile_at(&errors, lambda_p)?;
        let cfg = OptimizerConfig::new(grid_step, scenario.targets.eps_s, scenario.targets.eps_p)?;
        match sharq_core::scheme_powers(&link, &profile, &cfg, trials) {
            Ok(breakdown) => {
                let p = breakdown.powers;
                Ok(format!(
                    "{},{},{},{},{},OK",
                    fmt(lambda_p),
                    fmt(linear_to_db(p.open_loop)),
                    fmt(linear_to_db(p.non_opportunistic)),
                    fmt(linear_to_db(p.opportunistic_equal)),
                    fmt(linear_to_db(p.opportunistic_optimal)),
                ))
            }
            Err(CoreError::InfeasiblePolicy { binding }) => Ok(format!(
                "{},,,,,{}",
                fmt(lambda_p),
                infeasible_status(binding)
            )),
            Err(e) => Err(e.into()),
        }
    })?;
    Ok(assemble(
        "lambda_p,p_open_loop_db,p_non_opp_db,p_opp_equal_db,p_opp_optimal_db,status",
        rows,
    ))
}

/// Optimal access policies per sweep point.
pub fn run_optimize(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let errors = averaged_errors(scenario)?;
    let trials = scenario.trials()?;
    let grid_step = opts.grid_step.unwrap_or_else(|| scenario.grid_step());
    let points = scenario.sweep_points();
    let header = {
        let mut h = String::from("lambda_p,phi,eps_s,eps_p");
        for i in 1..=trials {
            h.push_str(&format!(",q{i}"));
        }
        h.push_str(",status");
        h
    };
    let rows = sweep_rows(&points, opts.jobs, |_, lambda_p| {
        let profile = profile_at(&errors, lambda_p)?;
        let cfg = OptimizerConfig::new(grid_step, scenario.targets.eps_s, scenario.targets.eps_p)?;
        match optimize_access(&cfg, &profile, trials) {
            Ok(policy) => {
                let eps_s = su_outage(&policy, &profile);
                let phi = transmission_load(&policy, &profile);
                let eps_p =
                    pu_outage_overall(phi, trials, eps_s, profile.eps_p1(), profile.eps_p2())?;
                let mut row = format!(
                    "{},{},{},{}",
                    fmt(lambda_p),
                    fmt(phi),
                    fmt(eps_s),
                    fmt(eps_p)
                );
                for &q in policy.q() {
                    row.push_str(&format!(",{}", fmt(q)));
                }
                row.push_str(",OK");
                Ok(row)
            }
            Err(CoreError::InfeasiblePolicy { binding }) => {
                let mut row = format!("{},,,", fmt(lambda_p));
                for _ in 0..trials {
                    row.push(',');
                }
                row.push_str(&infeasible_status(binding));
                Ok(row)
            }
            Err(e) => Err(e.into()),
        }
    })?;
    Ok(assemble(&header, rows))
}

fn sim_config_at(
    scenario: &Scenario,
    lambda_p: f64,
    policy: AccessPolicy,
    seed: u64,
) -> Result<SimConfig> {
    let sim = match &scenario.sim {
        Some(sim) => sim,
        None => bail!("this command needs a [sim] section"),
    };
    Ok(SimConfig {
        num_slots: sim.num_slots,
        seed,
        link: scenario.link()?,
        traffic: scenario.traffic_model(lambda_p)?,
        policy,
        su_arrivals: match sim.arrivals {
            ArrivalMode::Constant => SuArrivals::ConstantInterarrival,
            ArrivalMode::Bernoulli => SuArrivals::Bernoulli,
        },
    })
}

fn base_seed(scenario: &Scenario, opts: &RunOptions) -> u64 {
    opts.seed
        .or_else(|| scenario.sim.as_ref().map(|s| s.seed))
        .unwrap_or(0)
}

/// Monte Carlo sweep: empirical rates with confidence intervals.
pub fn run_simulate(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let errors = averaged_errors(scenario)?;
    let trials = scenario.trials()?;
    let grid_step = opts.grid_step.unwrap_or_else(|| scenario.grid_step());
    let seed = base_seed(scenario, opts);
    let points = scenario.sweep_points();
    let header = {
        let mut h = String::from(
            "lambda_p,slots,seed,su_outage,su_outage_ci,phi,phi_ci,pu_outage,pu_outage_ci",
        );
        for l in 0..trials {
            h.push_str(&format!(",delay_{l}"));
        }
        h.push_str(",status");
        h
    };
    let rows = sweep_rows(&points, opts.jobs, |index, lambda_p| {
        let profile = profile_at(&errors, lambda_p)?;
        match resolve_policy(scenario, &profile, trials, grid_step)? {
            Resolved::Policy(policy) => {
                let cfg =
                    sim_config_at(scenario, lambda_p, policy, seed.wrapping_add(index as u64))?;
                let report = simulate(&cfg)?;
                let mut row = format!(
                    "{},{},{},{},{},{},{},{},{}",
                    fmt(lambda_p),
                    report.slots,
                    report.seed,
                    fmt(report.su_outage_rate()),
                    fmt(report.su_outage_ci()),
                    fmt(report.phi_mean()),
                    fmt(report.phi_ci()),
                    fmt(report.pu_outage_rate()),
                    fmt(report.pu_outage_ci()),
                );
                for l in 0..trials {
                    row.push_str(&format!(",{}", report.delay_counts[l]));
                }
                row.push_str(",OK");
                Ok(row)
            }
            Resolved::Infeasible(binding) => {
                let mut row = format!("{},,,,,,,,", fmt(lambda_p));
                for _ in 0..trials {
                    row.push(',');
                }
                row.push_str(&infeasible_status(binding));
                Ok(row)
            }
        }
    })?;
    Ok(assemble(&header, rows))
}

/// One analytical-vs-empirical comparison row.
fn validate_row(name: &str, lambda_p: f64, analytical: f64, empirical: f64, se: f64) -> String {
    let z = if se > 0.0 {
        (analytical - empirical).abs() / se
    } else if analytical == empirical {
        0.0
    } else {
        f64::INFINITY
    };
    let status = if z <= 3.0 { "PASS" } else { "FAIL" };
    format!(
        "{},{name},{},{},{},{},{status}",
        fmt(lambda_p),
        fmt(analytical),
        fmt(empirical),
        fmt(se),
        fmt(z)
    )
}

/// Closed forms against the simulator at the 3-sigma criterion, one row per
/// quantity per sweep point.
pub fn run_validate(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let errors = averaged_errors(scenario)?;
    let trials = scenario.trials()?;
    let grid_step = opts.grid_step.unwrap_or_else(|| scenario.grid_step());
    let seed = base_seed(scenario, opts);
    let points = scenario.sweep_points();
    let groups = sweep_rows(&points, opts.jobs, |index, lambda_p| {
        let profile = profile_at(&errors, lambda_p)?;
        let policy = match resolve_policy(scenario, &profile, trials, grid_step)? {
            Resolved::Policy(policy) => policy,
            Resolved::Infeasible(binding) => {
                return Ok(format!(
                    "{},policy,,,,,{}",
                    fmt(lambda_p),
                    infeasible_status(binding)
                ));
            }
        };
        let cfg = sim_config_at(
            scenario,
            lambda_p,
            policy.clone(),
            seed.wrapping_add(index as u64),
        )?;
        let report = simulate(&cfg)?;

        let mut rows = Vec::new();
        let eps_s = su_outage(&policy, &profile);
        rows.push(validate_row(
            "eps_s",
            lambda_p,
            eps_s,
            report.su_outage_rate(),
            report.su_outage_ci() / 1.96,
        ));
        let phi = transmission_load(&policy, &profile);
        rows.push(validate_row(
            "phi",
            lambda_p,
            phi,
            report.phi_mean(),
            report.phi_ci() / 1.96,
        ));
        let eps_p = pu_outage_overall(phi, trials, eps_s, profile.eps_p1(), profile.eps_p2())?;
        rows.push(validate_row(
            "eps_p",
            lambda_p,
            eps_p,
            report.pu_outage_rate(),
            report.pu_outage_ci() / 1.96,
        ));
        let delay = delay_pmf(&policy, &profile)?;
        for l in 0..trials {
            rows.push(validate_row(
                &format!("delay_{l}"),
                lambda_p,
                delay.mass()[l],
                report.delay_fraction(l),
                report.delay_ci(l) / 1.96,
            ));
        }
        if report.excess_delay > 0 {
            rows.push(format!(
                "{},excess_delay,0,{},,,FAIL",
                fmt(lambda_p),
                report.excess_delay
            ));
        }
        Ok(rows.join("\n"))
    })?;
    let rows: Vec<String> = groups
        .iter()
        .flat_map(|g| g.lines().map(String::from))
        .collect();
    let all_pass = !rows.is_empty() && rows.iter().all(|r| r.ends_with(",PASS"));
    let mut out = assemble("lambda_p,quantity,analytical,empirical,se,z,status", rows);
    out.ok = all_pass;
    Ok(out)
}

/// Canonical re-serialisation of the parsed scenario.
pub fn run_echo_config(scenario: &Scenario) -> RunOutput {
    RunOutput {
        csv: scenario.to_toml(),
        ok: true,
    }
}

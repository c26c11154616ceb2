//! Access-probability policies and per-scheme transmit powers.
//!
//! Three reference schemes bracket the opportunistic one:
//!
//! * open loop - a single shot sized to hit the outage target outright;
//! * non-opportunistic - always retransmit regardless of primary activity;
//! * opportunistic - retransmit with per-trial access probabilities, either
//!   equal across trials (closed form) or optimised by constrained grid
//!   search over non-decreasing probability vectors.

use alloc::vec::Vec;

use crate::arq::{pu_outage_overall, su_outage_bounds, AccessPolicy, OutageProfile};
use crate::error::{Constraint, Error, Result};
use crate::fbl::{required_power, LinkConfig};

/// Settings for the constrained access search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Grid resolution; must divide 1 into an integer number of levels.
    pub grid_step: f64,
    /// Secondary outage target.
    pub eps_s_target: f64,
    /// Primary outage target.
    pub eps_p_target: f64,
    /// Restrict the search to non-decreasing vectors q_1 <= ... <= q_M.
    pub monotone_restriction: bool,
}

impl OptimizerConfig {
    pub fn new(grid_step: f64, eps_s_target: f64, eps_p_target: f64) -> Result<Self> {
        let levels = 1.0 / grid_step;
        if !(grid_step > 0.0 && grid_step <= 1.0) || (levels - libm::round(levels)).abs() > 1e-9 {
            return Err(Error::Domain("grid step must divide 1 evenly"));
        }
        if !(0.0..=1.0).contains(&eps_s_target) {
            return Err(Error::ProbabilityOutOfRange {
                value: eps_s_target,
            });
        }
        if !(0.0..=1.0).contains(&eps_p_target) {
            return Err(Error::ProbabilityOutOfRange {
                value: eps_p_target,
            });
        }
        Ok(OptimizerConfig {
            grid_step,
            eps_s_target,
            eps_p_target,
            monotone_restriction: true,
        })
    }

    fn levels(&self) -> usize {
        libm::round(1.0 / self.grid_step) as usize
    }
}

/// Result of the equal-access closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualAccess {
    /// Common access probability for every trial.
    pub q: f64,
    /// True when the target sits above the no-access upper bound and q was
    /// clamped to the zero boundary (the achieved outage then undershoots
    /// the target).
    pub clamped: bool,
}

/// Equal access probability meeting an outage target:
/// q = (eps_target^(1/M) - T) / beta.
///
/// Targets below the always-transmit bound are infeasible; targets above the
/// never-transmit bound return the clamped zero boundary.
pub fn equal_access(eps_s_target: f64, profile: &OutageProfile, m: usize) -> Result<EqualAccess> {
    if !(eps_s_target > 0.0 && eps_s_target <= 1.0) {
        return Err(Error::Domain("outage target must lie in (0, 1]"));
    }
    if m < 1 {
        return Err(Error::Domain("policy needs at least one trial"));
    }
    let (lower, upper) = su_outage_bounds(profile, m);
    if eps_s_target < lower * (1.0 - 1e-12) {
        return Err(Error::InfeasiblePolicy {
            binding: Constraint::SuOutage,
        });
    }
    if eps_s_target >= upper {
        return Ok(EqualAccess {
            q: 0.0,
            clamped: true,
        });
    }
    let beta = profile.beta();
    // upper > target implies T^M > target, so beta = 0 cannot reach here.
    debug_assert!(beta < 0.0);
    let root = libm::pow(eps_s_target, 1.0 / m as f64);
    let q = ((root - profile.t_factor()) / beta).clamp(0.0, 1.0);
    Ok(EqualAccess { q, clamped: false })
}

/// Feasibility and objective of one candidate policy.
fn evaluate(q: &[f64], profile: &OutageProfile, cfg: &OptimizerConfig) -> (f64, f64, bool, bool) {
    let lambda_p = profile.lambda_p();
    let beta = profile.beta();
    let t = profile.t_factor();
    let mut phi = 0.0;
    let mut eps_s = 1.0;
    for &qi in q {
        phi += (lambda_p * qi + (1.0 - lambda_p)) * eps_s;
        eps_s *= beta * qi + t;
    }
    let su_ok = eps_s <= cfg.eps_s_target;
    let eps_p = pu_outage_overall(phi, q.len(), eps_s, profile.eps_p1(), profile.eps_p2())
        .unwrap_or(f64::INFINITY);
    let pu_ok = eps_p <= cfg.eps_p_target;
    (phi, eps_s, su_ok, pu_ok)
}

/// Minimise the transmission load over the access grid subject to both
/// outage targets.
///
/// The exact equal-access solution (when feasible) seeds the search, so the
/// returned load never exceeds it. Ties break towards the lexicographically
/// smallest vector; the result is deterministic.
pub fn optimize_access(
    cfg: &OptimizerConfig,
    profile: &OutageProfile,
    m: usize,
) -> Result<AccessPolicy> {
    if m < 1 {
        return Err(Error::Domain("policy needs at least one trial"));
    }
    let levels = cfg.levels();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut any_su_ok = false;

    let mut consider = |q: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
        let (phi, _eps_s, su_ok, pu_ok) = evaluate(q, profile, cfg);
        any_su_ok |= su_ok;
        if !(su_ok && pu_ok) {
            return;
        }
        let better = match best {
            None => true,
            Some((bphi, bq)) => phi < *bphi || (phi == *bphi && q < bq.as_slice()),
        };
        if better {
            *best = Some((phi, q.to_vec()));
        }
    };

    if let Ok(eq) = equal_access(cfg.eps_s_target, profile, m) {
        let seed = alloc::vec![eq.q; m];
        consider(&seed, &mut best);
    }

    // Odometer over level indices; the monotone restriction walks
    // non-decreasing tuples only.
    let mut idx = alloc::vec![0usize; m];
    let mut q = alloc::vec![0.0f64; m];
    loop {
        for (slot, &i) in q.iter_mut().zip(&idx) {
            *slot = i as f64 / levels as f64;
        }
        consider(&q, &mut best);
        if !advance(&mut idx, levels, cfg.monotone_restriction) {
            break;
        }
    }
    match best {
        Some((_, q)) => AccessPolicy::new(q),
        None => {
            let binding = if any_su_ok {
                Constraint::PuOutage
            } else {
                Constraint::SuOutage
            };
            Err(Error::InfeasiblePolicy { binding })
        }
    }
}

/// Step the level odometer; returns false once the grid is exhausted.
fn advance(idx: &mut [usize], levels: usize, monotone: bool) -> bool {
    for j in (0..idx.len()).rev() {
        if idx[j] < levels {
            idx[j] += 1;
            let fill = if monotone { idx[j] } else { 0 };
            idx[j + 1..].fill(fill);
            return true;
        }
    }
    false
}

/// Open-loop (single-shot) transmit power: the arrival-weighted mix of the
/// interfered and interference-free powers that each hit the target alone.
pub fn power_open_loop(link: &LinkConfig, lambda_p: f64, eps_s_target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda_p) {
        return Err(Error::ProbabilityOutOfRange { value: lambda_p });
    }
    let direct = required_power(eps_s_target, link.n, link.rate, None)?;
    let interfered = required_power(eps_s_target, link.n, link.rate, Some(link.pu_snr))?;
    Ok(lambda_p * interfered + (1.0 - lambda_p) * direct)
}

/// Non-opportunistic scheme: trial count and per-packet power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonOpportunistic {
    /// Continuous trial count log(target) / log(beta + T).
    pub trials: f64,
    /// Expected per-packet power, trials * p_s.
    pub power: f64,
}

impl NonOpportunistic {
    /// Integer-trial reading of the continuous count.
    pub fn trials_ceil(&self) -> u32 {
        libm::ceil(self.trials) as u32
    }
}

/// Power of the always-retransmit scheme at fixed per-shot power `p_s`.
pub fn power_non_opportunistic(
    profile: &OutageProfile,
    eps_s_target: f64,
    p_s: f64,
) -> Result<NonOpportunistic> {
    if eps_s_target.is_nan() || eps_s_target <= 0.0 || eps_s_target >= 1.0 {
        return Err(Error::Domain("outage target must lie in (0, 1)"));
    }
    if p_s.is_nan() || p_s <= 0.0 {
        return Err(Error::Domain("per-shot power must be positive"));
    }
    let per_trial = profile.beta() + profile.t_factor();
    if per_trial >= 1.0 {
        return Err(Error::InfeasiblePolicy {
            binding: Constraint::SuOutage,
        });
    }
    if per_trial <= 0.0 {
        return Err(Error::Domain("degenerate error-free per-trial failure"));
    }
    let trials = libm::log(eps_s_target) / libm::log(per_trial);
    Ok(NonOpportunistic {
        trials,
        power: trials * p_s,
    })
}

/// Opportunistic per-packet power: transmission load times per-shot power.
pub fn power_opportunistic(policy: &AccessPolicy, profile: &OutageProfile, p_s: f64) -> f64 {
    crate::arq::transmission_load(policy, profile) * p_s
}

/// Per-packet expected transmit powers of the four schemes, all linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemePowers {
    pub open_loop: f64,
    pub non_opportunistic: f64,
    pub opportunistic_equal: f64,
    pub opportunistic_optimal: f64,
}

/// Scheme powers plus the policies behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeBreakdown {
    pub powers: SchemePowers,
    pub equal_q: f64,
    pub optimal_policy: AccessPolicy,
    pub non_opportunistic_trials: f64,
}

/// Compute all four scheme powers at one operating point.
///
/// The optimal search is seeded with the equal solution, so
/// `opportunistic_optimal <= opportunistic_equal` holds exactly.
pub fn scheme_powers(
    link: &LinkConfig,
    profile: &OutageProfile,
    cfg: &OptimizerConfig,
    m: usize,
) -> Result<SchemeBreakdown> {
    let open_loop = power_open_loop(link, profile.lambda_p(), cfg.eps_s_target)?;
    let non_opp = power_non_opportunistic(profile, cfg.eps_s_target, link.su_snr)?;
    let equal = equal_access(cfg.eps_s_target, profile, m)?;
    let equal_policy = AccessPolicy::uniform(equal.q, m)?;
    let optimal_policy = optimize_access(cfg, profile, m)?;
    let powers = SchemePowers {
        open_loop,
        non_opportunistic: non_opp.power,
        opportunistic_equal: power_opportunistic(&equal_policy, profile, link.su_snr),
        opportunistic_optimal: power_opportunistic(&optimal_policy, profile, link.su_snr),
    };
    Ok(SchemeBreakdown {
        powers,
        equal_q: equal.q,
        optimal_policy,
        non_opportunistic_trials: non_opp.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arq::su_outage;

    fn worked_profile() -> OutageProfile {
        OutageProfile::new(0.5, 0.1, 0.5, 0.01, 0.2).unwrap()
    }

    #[test]
    fn equal_access_worked_example() {
        let p = worked_profile();
        let eq = equal_access(0.1275, &p, 2).unwrap();
        assert!(!eq.clamped);
        assert!((eq.q - 0.771_714_314_291_43).abs() < 1e-12, "q = {}", eq.q);
        // round trip through the outage recursion
        let policy = AccessPolicy::uniform(eq.q, 2).unwrap();
        assert!((su_outage(&policy, &p) - 0.1275).abs() < 1e-12);
    }

    #[test]
    fn equal_access_boundaries() {
        let p = worked_profile();
        let (lower, upper) = su_outage_bounds(&p, 2);
        let at_lower = equal_access(lower, &p, 2).unwrap();
        assert!((at_lower.q - 1.0).abs() < 1e-12);
        let at_upper = equal_access(upper, &p, 2).unwrap();
        assert!(at_upper.clamped && at_upper.q == 0.0);
        assert!(matches!(
            equal_access(lower * 0.5, &p, 2),
            Err(Error::InfeasiblePolicy {
                binding: Constraint::SuOutage
            })
        ));
    }

    #[test]
    fn optimize_slack_targets_gives_all_zero() {
        let p = worked_profile();
        let cfg = OptimizerConfig::new(0.05, 1.0, 1.0).unwrap();
        let policy = optimize_access(&cfg, &p, 3).unwrap();
        assert_eq!(policy.q(), &[0.0, 0.0, 0.0]);
        // phi = (1 - lambda_p) sum of reach probabilities
        let phi = crate::arq::transmission_load(&policy, &p);
        let want = 0.5 * (1.0 + 0.55 + 0.55 * 0.55);
        assert!((phi - want).abs() < 1e-15);
    }

    #[test]
    fn optimize_tight_target_forces_all_ones() {
        let p = worked_profile();
        let (lower, _) = su_outage_bounds(&p, 3);
        let cfg = OptimizerConfig::new(0.05, lower, 1.0).unwrap();
        let policy = optimize_access(&cfg, &p, 3).unwrap();
        assert_eq!(policy.q(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn optimize_never_beats_su_bound() {
        let p = worked_profile();
        let (lower, _) = su_outage_bounds(&p, 3);
        let cfg = OptimizerConfig::new(0.05, lower * 0.5, 1.0).unwrap();
        assert!(matches!(
            optimize_access(&cfg, &p, 3),
            Err(Error::InfeasiblePolicy {
                binding: Constraint::SuOutage
            })
        ));
    }

    #[test]
    fn optimize_reports_pu_binding() {
        let p = worked_profile();
        // Secondary target reachable, primary target impossible (< eps_p1).
        let cfg = OptimizerConfig::new(0.25, 0.9, 0.001).unwrap();
        assert!(matches!(
            optimize_access(&cfg, &p, 2),
            Err(Error::InfeasiblePolicy {
                binding: Constraint::PuOutage
            })
        ));
    }

    #[test]
    fn optimize_dominates_equal_access() {
        let p = worked_profile();
        for target in [0.05, 0.1275, 0.2] {
            let cfg = OptimizerConfig::new(0.01, target, 1.0).unwrap();
            let policy = optimize_access(&cfg, &p, 3).unwrap();
            let eq = equal_access(target, &p, 3).unwrap();
            let eq_policy = AccessPolicy::uniform(eq.q, 3).unwrap();
            let phi_opt = crate::arq::transmission_load(&policy, &p);
            let phi_eq = crate::arq::transmission_load(&eq_policy, &p);
            assert!(
                phi_opt <= phi_eq + 1e-12,
                "target {target}: {phi_opt} vs {phi_eq}"
            );
            assert!(su_outage(&policy, &p) <= target + 1e-12);
        }
    }

    #[test]
    fn grid_step_validation() {
        assert!(OptimizerConfig::new(0.01, 0.1, 0.1).is_ok());
        assert!(OptimizerConfig::new(0.3, 0.1, 0.1).is_err());
        assert!(OptimizerConfig::new(0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn non_opportunistic_worked_example() {
        let p = worked_profile();
        let r = power_non_opportunistic(&p, 1e-3, 100.0).unwrap();
        assert!((r.trials - 5.737_467_868_179_595).abs() < 1e-12);
        assert!((r.power - r.trials * 100.0).abs() < 1e-9);
        assert_eq!(r.trials_ceil(), 6);
        // log-ratio identities
        let per_trial = p.beta() + p.t_factor();
        let one = power_non_opportunistic(&p, per_trial, 1.0).unwrap();
        assert!((one.trials - 1.0).abs() < 1e-12);
        let two = power_non_opportunistic(&p, per_trial * per_trial, 1.0).unwrap();
        assert!((two.trials - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_opportunistic_rejects_useless_retransmissions() {
        // beta + T = 1 happens when eps_s2 = 1 and eps_s1 = 1.
        let p = OutageProfile::new(0.3, 1.0, 1.0, 0.01, 0.2).unwrap();
        assert!(power_non_opportunistic(&p, 1e-3, 1.0).is_err());
    }

    #[test]
    fn opportunistic_power_examples() {
        let p = worked_profile();
        let policy = AccessPolicy::new(alloc::vec![0.5, 1.0]).unwrap();
        let power = power_opportunistic(&policy, &p, 100.0);
        assert!((power - 117.5).abs() < 1e-12);
        let silent = OutageProfile::new(1.0, 0.1, 0.5, 0.01, 0.2).unwrap();
        let zero = AccessPolicy::uniform(0.0, 2).unwrap();
        assert_eq!(power_opportunistic(&zero, &silent, 100.0), 0.0);
    }

    #[test]
    fn open_loop_mixes_branches() {
        let link = LinkConfig::new(500, 0.25, 1000.0, 1584.893).unwrap();
        let t = 1e-2;
        let p0 = power_open_loop(&link, 0.0, t).unwrap();
        let p1 = power_open_loop(&link, 1.0, t).unwrap();
        let direct = required_power(t, 500, 0.25, None).unwrap();
        let interfered = required_power(t, 500, 0.25, Some(1000.0)).unwrap();
        assert!((p0 - direct).abs() < 1e-9 * direct);
        assert!((p1 - interfered).abs() < 1e-9 * interfered);
        let mid = power_open_loop(&link, 0.4, t).unwrap();
        assert!((mid - (0.4 * interfered + 0.6 * direct)).abs() < 1e-9 * mid);
    }
}

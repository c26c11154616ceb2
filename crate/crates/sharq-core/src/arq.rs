//! Closed-form analysis of the secondary user's ARQ process and of the
//! primary user it shares the channel with.
//!
//! The central object is the per-trial failure factor
//!
//! ```text
//! theta_m = beta q_m + T,   beta = lambda_p (eps_s2 - 1),
//!                           T    = lambda_p (1 - eps_s1) + eps_s1
//! ```
//!
//! where `q_m` is the access probability at trial m. The probability of
//! reaching trial m is the product of the first m-1 factors, and the
//! secondary outage after M trials is the product of all M.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Tolerance for probabilities that must land in [0, 1] up to rounding.
const PROB_TOL: f64 = 1e-9;

/// Tolerance for recognising 1/lambda_s as an integer despite floating-point
/// division (1/(1/3) = 3.0000000000000004).
const SCHEDULE_SNAP: f64 = 1e-9;

/// The four fading-averaged error probabilities of the two users, tied to a
/// primary arrival rate.
///
/// `eps_s1`/`eps_p1` are interference-free, `eps_s2`/`eps_p2` interfered;
/// interference only degrades, so construction enforces `eps_s2 >= eps_s1`
/// and `eps_p2 >= eps_p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageProfile {
    lambda_p: f64,
    eps_s1: f64,
    eps_s2: f64,
    eps_p1: f64,
    eps_p2: f64,
}

impl OutageProfile {
    pub fn new(lambda_p: f64, eps_s1: f64, eps_s2: f64, eps_p1: f64, eps_p2: f64) -> Result<Self> {
        for (value, what) in [
            (lambda_p, "lambda_p"),
            (eps_s1, "eps_s1"),
            (eps_s2, "eps_s2"),
            (eps_p1, "eps_p1"),
            (eps_p2, "eps_p2"),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                let _ = what;
                return Err(Error::ProbabilityOutOfRange { value });
            }
        }
        if eps_s2 < eps_s1 {
            return Err(Error::Domain("eps_s2 must not be below eps_s1"));
        }
        if eps_p2 < eps_p1 {
            return Err(Error::Domain("eps_p2 must not be below eps_p1"));
        }
        Ok(OutageProfile {
            lambda_p,
            eps_s1,
            eps_s2,
            eps_p1,
            eps_p2,
        })
    }

    pub fn lambda_p(&self) -> f64 {
        self.lambda_p
    }
    pub fn eps_s1(&self) -> f64 {
        self.eps_s1
    }
    pub fn eps_s2(&self) -> f64 {
        self.eps_s2
    }
    pub fn eps_p1(&self) -> f64 {
        self.eps_p1
    }
    pub fn eps_p2(&self) -> f64 {
        self.eps_p2
    }

    /// Slope of the per-trial failure factor in the access probability;
    /// non-positive, since accessing can only help the secondary user.
    pub fn beta(&self) -> f64 {
        self.lambda_p * (self.eps_s2 - 1.0)
    }

    /// Per-trial failure factor at access probability zero.
    pub fn t_factor(&self) -> f64 {
        self.lambda_p * (1.0 - self.eps_s1) + self.eps_s1
    }
}

/// Per-trial access probabilities q_1 ... q_M.
///
/// The secondary outage is symmetric under permutation of the entries, but
/// the transmission load and the delay distribution are not: earlier entries
/// weigh more.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPolicy(Vec<f64>);

impl AccessPolicy {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Domain("policy needs at least one trial"));
        }
        for &value in &q {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::ProbabilityOutOfRange { value });
            }
        }
        Ok(AccessPolicy(q))
    }

    /// Policy with the same access probability at every trial.
    pub fn uniform(q: f64, trials: usize) -> Result<Self> {
        Self::new(alloc::vec![q; trials])
    }

    pub fn trials(&self) -> usize {
        self.0.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.0
    }
}

/// Trial-budget schedule derived from the secondary arrival rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// ceil(1 / lambda_s)
    pub m_hi: u32,
    /// floor(1 / lambda_s)
    pub m_lo: u32,
    /// Minimal fraction of packets that must receive the larger budget:
    /// the fractional part of 1 / lambda_s.
    pub alpha_min: f64,
}

/// Arrival rates plus the trial-budget schedule keeping the secondary queue
/// stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub m_hi: u32,
    pub m_lo: u32,
    /// Fraction of packets given the `m_hi` budget; at least the fractional
    /// part of 1/lambda_s so that the mean budget covers the inter-arrival
    /// time.
    pub alpha: f64,
}

impl TrafficModel {
    pub fn new(lambda_p: f64, lambda_s: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_p) {
            return Err(Error::ProbabilityOutOfRange { value: lambda_p });
        }
        let schedule = derive_schedule(lambda_s)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::ProbabilityOutOfRange { value: alpha });
        }
        if alpha + PROB_TOL < schedule.alpha_min {
            return Err(Error::Domain("alpha below the stability minimum"));
        }
        Ok(TrafficModel {
            lambda_p,
            lambda_s,
            m_hi: schedule.m_hi,
            m_lo: schedule.m_lo,
            alpha,
        })
    }

    /// Model using the minimal stable alpha.
    pub fn with_min_alpha(lambda_p: f64, lambda_s: f64) -> Result<Self> {
        let schedule = derive_schedule(lambda_s)?;
        Self::new(lambda_p, lambda_s, schedule.alpha_min)
    }
}

/// Ceil/floor trial budgets and the minimal mixing fraction for a secondary
/// arrival probability.
pub fn derive_schedule(lambda_s: f64) -> Result<Schedule> {
    if !(lambda_s > 0.0 && lambda_s <= 1.0) {
        return Err(Error::Domain("lambda_s must lie in (0, 1]"));
    }
    let inv = 1.0 / lambda_s;
    let snapped = libm::round(inv);
    if (inv - snapped).abs() <= SCHEDULE_SNAP * inv.max(1.0) {
        return Ok(Schedule {
            m_hi: snapped as u32,
            m_lo: snapped as u32,
            alpha_min: 0.0,
        });
    }
    let floor = libm::floor(inv);
    Ok(Schedule {
        m_hi: floor as u32 + 1,
        m_lo: floor as u32,
        alpha_min: inv - floor,
    })
}

/// Per-trial failure factor theta = beta q + T.
pub fn step_factor(q_m: f64, beta: f64, t_factor: f64) -> Result<f64> {
    let theta = beta * q_m + t_factor;
    if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&theta) {
        return Err(Error::ProbabilityOutOfRange { value: theta });
    }
    Ok(theta.clamp(0.0, 1.0))
}

fn theta(profile: &OutageProfile, q_m: f64) -> f64 {
    profile.beta() * q_m + profile.t_factor()
}

/// Secondary-user outage after exhausting all trials: the product of the
/// per-trial failure factors. Invariant under permutation of the policy.
pub fn su_outage(policy: &AccessPolicy, profile: &OutageProfile) -> f64 {
    policy.q().iter().map(|&q| theta(profile, q)).product()
}

/// Proposition-style bounds on the secondary outage for any policy of
/// length `m`: always-transmit gives the lower bound (beta + T)^M, never
/// transmitting under primary activity the upper bound T^M.
pub fn su_outage_bounds(profile: &OutageProfile, m: usize) -> (f64, f64) {
    let lower = libm::pow(profile.beta() + profile.t_factor(), m as f64);
    let upper = libm::pow(profile.t_factor(), m as f64);
    (lower, upper)
}

/// Probability that the secondary user's packet is still unresolved when
/// trial `m` starts (1-based; `m = M + 1` is the outage itself).
pub fn reach_probability(m: usize, policy: &AccessPolicy, profile: &OutageProfile) -> Result<f64> {
    if m < 1 || m > policy.trials() + 1 {
        return Err(Error::Domain("trial index out of range"));
    }
    Ok(policy.q()[..m - 1]
        .iter()
        .map(|&q| theta(profile, q))
        .product())
}

/// Expected number of actual transmissions per secondary packet.
///
/// Not permutation-invariant: early trials are reached more often.
pub fn transmission_load(policy: &AccessPolicy, profile: &OutageProfile) -> f64 {
    let lambda_p = profile.lambda_p();
    let mut total = 0.0;
    let mut reach = 1.0;
    for &q in policy.q() {
        total += (lambda_p * q + (1.0 - lambda_p)) * reach;
        reach *= theta(profile, q);
    }
    total
}

/// Primary outage given simultaneous transmission: interference-free if the
/// secondary packet resolves (probability 1 - eps_s), interfered otherwise.
pub fn pu_outage_simultaneous(eps_s: f64, eps_p1: f64, eps_p2: f64) -> f64 {
    (1.0 - eps_s) * eps_p1 + eps_s * eps_p2
}

/// Overall primary outage: the collision exposure phi/M mixes the
/// simultaneous-transmission branch into the clean one. Affine and strictly
/// increasing in phi whenever eps_s (eps_p2 - eps_p1) > 0.
pub fn pu_outage_overall(phi: f64, m: usize, eps_s: f64, eps_p1: f64, eps_p2: f64) -> Result<f64> {
    let m = m as f64;
    if !(0.0..=m + PROB_TOL).contains(&phi) {
        return Err(Error::Domain("phi must lie in [0, M]"));
    }
    let share = phi / m;
    Ok(share * pu_outage_simultaneous(eps_s, eps_p1, eps_p2) + (1.0 - share) * eps_p1)
}

/// Distribution of the primary user's decoder-waiting delay, in packet
/// durations (slots), over l = 0 .. M-1.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayPmf {
    mass: Vec<f64>,
    residual: f64,
}

impl DelayPmf {
    /// Wrap a raw mass vector, recording whatever it fails to sum to.
    pub fn from_mass(mass: Vec<f64>) -> Self {
        let residual = 1.0 - mass.iter().sum::<f64>();
        DelayPmf { mass, residual }
    }

    /// P(delta = l) for l = 0 .. M-1.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// 1 minus the total mass; reported, never silently renormalised.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Expected delay in packet durations.
    pub fn expected_delay(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(l, &p)| l as f64 * p)
            .sum()
    }
}

/// Primary-user delay distribution under the worst-case (back-to-back)
/// secondary traffic pattern.
///
/// A primary packet arriving at secondary trial m waits only if the
/// secondary transmitted and failed in that slot; it then waits until the
/// secondary packet resolves (first later success, or the final trial
/// whatever its outcome). Arrival position is uniform over the M trials.
///
/// Not permutation-invariant in the policy.
pub fn delay_pmf(policy: &AccessPolicy, profile: &OutageProfile) -> Result<DelayPmf> {
    let m_total = policy.trials();
    let q = policy.q();
    let thetas: Vec<f64> = q.iter().map(|&qi| theta(profile, qi)).collect();
    let eps_s2 = profile.eps_s2();
    let mf = m_total as f64;

    // reach[m] = probability the secondary is still active entering trial
    // m+1 (0-based prefix products).
    let mut reach = alloc::vec![1.0; m_total + 1];
    for i in 0..m_total {
        reach[i + 1] = reach[i] * thetas[i];
    }

    let mut mass = alloc::vec![0.0; m_total];

    // Zero delay: the arrival slot has no pending secondary failure. That
    // covers an absent secondary, a silent one, an immediately decoded one,
    // and (whatever happens) an arrival at the final trial.
    let mut zero = 1.0; // m = M term
    for m in 1..m_total {
        let present = reach[m - 1];
        zero += (1.0 - present) + present * (q[m - 1] * (1.0 - eps_s2) + (1.0 - q[m - 1]));
    }
    mass[0] = zero / mf;

    // Positive delay l: collision failure at trial m, then the secondary
    // fails through trials m+1 .. m+l-1 and resolves at m+l (success before
    // the last trial, or reaching the final trial unconditionally).
    for l in 1..m_total {
        let mut acc = 0.0;
        for m in 1..m_total - l {
            let mut run = reach[m - 1] * q[m - 1] * eps_s2;
            for i in (m + 1)..(m + l) {
                run *= thetas[i - 1];
            }
            acc += run * (1.0 - thetas[m + l - 1]);
        }
        let m = m_total - l;
        let mut run = reach[m - 1] * q[m - 1] * eps_s2;
        for i in (m + 1)..m_total {
            run *= thetas[i - 1];
        }
        acc += run;
        mass[l] = acc / mf;
    }

    let mut total = 0.0;
    for &p in &mass {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
        total += p;
    }
    Ok(DelayPmf {
        mass,
        residual: 1.0 - total,
    })
}

//! Slot-level Monte Carlo simulation of the shared channel, plus an
//! exhaustive small-M enumerator.
//!
//! The simulator draws the generative model directly: Bernoulli primary
//! arrivals, per-slot unit-mean exponential gains on both links, access
//! coins under primary activity, and decode outcomes as Bernoulli draws at
//! the conditional error of the instantaneous SINR. The base station buffers
//! a collided primary packet until the interfering secondary packet resolves
//! (success, or budget exhausted); it is then decoded interference-free
//! after successful cancellation and interfered otherwise, having waited the
//! recorded number of slots.
//!
//! Every noise source owns a dedicated ChaCha12 stream derived from the one
//! seed, so adding or removing a source never perturbs the others.

use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::arq::{AccessPolicy, DelayPmf, OutageProfile, TrafficModel};
use crate::error::{Error, Result};
use crate::fbl::{conditional_error, LinkConfig};

/// How secondary packets arrive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuArrivals {
    /// Back-to-back packets every M slots - the worst case for the primary.
    ConstantInterarrival,
    /// Bernoulli(lambda_s) arrivals into a FIFO queue, with the per-packet
    /// trial budget drawn from the (m_hi, m_lo, alpha) schedule.
    Bernoulli,
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_slots: u64,
    pub seed: u64,
    pub link: LinkConfig,
    pub traffic: TrafficModel,
    pub policy: AccessPolicy,
    pub su_arrivals: SuArrivals,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.num_slots < 1 {
            return Err(Error::Domain("simulation needs at least one slot"));
        }
        if self.su_arrivals == SuArrivals::Bernoulli
            && self.policy.trials() != self.traffic.m_hi as usize
        {
            return Err(Error::Domain(
                "policy length must equal the m_hi trial budget under Bernoulli arrivals",
            ));
        }
        Ok(())
    }
}

/// Aggregated counts of one run (or of several pooled runs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub slots: u64,
    pub seed: u64,
    /// Secondary packets that ran to resolution inside the horizon.
    pub su_completed: u64,
    /// Of those, packets lost after exhausting their budget.
    pub su_lost: u64,
    /// Actual transmissions summed over completed packets.
    pub su_transmissions: u64,
    /// Sum of squared per-packet transmission counts (for the phi CI).
    pub su_transmissions_sq: u64,
    /// Primary packets whose decode resolved inside the horizon.
    pub pu_completed: u64,
    pub pu_failed: u64,
    /// Histogram of primary waiting delays, l = 0 .. M-1 slots.
    pub delay_counts: Vec<u64>,
    /// Delays that exceeded M-1 and were capped (none are expected; a
    /// nonzero count flags broken bookkeeping).
    pub excess_delay: u64,
}

/// Two-sided 95% normal half-width for a Bernoulli rate.
fn bernoulli_half_width(successes: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = successes as f64 / n as f64;
    1.96 * libm::sqrt(p * (1.0 - p) / n as f64)
}

impl SimReport {
    fn empty(seed: u64, trials: usize) -> Self {
        SimReport {
            slots: 0,
            seed,
            su_completed: 0,
            su_lost: 0,
            su_transmissions: 0,
            su_transmissions_sq: 0,
            pu_completed: 0,
            pu_failed: 0,
            delay_counts: alloc::vec![0; trials],
            excess_delay: 0,
        }
    }

    pub fn su_outage_rate(&self) -> f64 {
        self.su_lost as f64 / self.su_completed as f64
    }

    pub fn su_outage_ci(&self) -> f64 {
        bernoulli_half_width(self.su_lost, self.su_completed)
    }

    pub fn pu_outage_rate(&self) -> f64 {
        self.pu_failed as f64 / self.pu_completed as f64
    }

    pub fn pu_outage_ci(&self) -> f64 {
        bernoulli_half_width(self.pu_failed, self.pu_completed)
    }

    /// Mean transmissions per completed secondary packet.
    pub fn phi_mean(&self) -> f64 {
        self.su_transmissions as f64 / self.su_completed as f64
    }

    pub fn phi_ci(&self) -> f64 {
        let n = self.su_completed as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mean = self.phi_mean();
        let var = (self.su_transmissions_sq as f64 - n * mean * mean) / (n - 1.0);
        1.96 * libm::sqrt(var.max(0.0) / n)
    }

    /// Empirical P(delta = l) over completed primary packets.
    pub fn delay_fraction(&self, l: usize) -> f64 {
        self.delay_counts[l] as f64 / self.pu_completed as f64
    }

    pub fn delay_ci(&self, l: usize) -> f64 {
        bernoulli_half_width(self.delay_counts[l], self.pu_completed)
    }

    /// Pool another run's counts into this one (count-weighted).
    pub fn merge(&mut self, other: &SimReport) -> Result<()> {
        if self.delay_counts.len() != other.delay_counts.len() {
            return Err(Error::Domain("cannot merge reports with different budgets"));
        }
        self.slots += other.slots;
        self.su_completed += other.su_completed;
        self.su_lost += other.su_lost;
        self.su_transmissions += other.su_transmissions;
        self.su_transmissions_sq += other.su_transmissions_sq;
        self.pu_completed += other.pu_completed;
        self.pu_failed += other.pu_failed;
        for (a, b) in self.delay_counts.iter_mut().zip(&other.delay_counts) {
            *a += b;
        }
        self.excess_delay += other.excess_delay;
        Ok(())
    }
}

/// One independent ChaCha12 stream per noise source.
struct Streams {
    pu_arrival: ChaCha12Rng,
    su_arrival: ChaCha12Rng,
    budget: ChaCha12Rng,
    access: ChaCha12Rng,
    fade_su: ChaCha12Rng,
    fade_pu: ChaCha12Rng,
    decode_su: ChaCha12Rng,
    decode_pu: ChaCha12Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let make = |stream: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        Streams {
            pu_arrival: make(0),
            su_arrival: make(1),
            budget: make(2),
            access: make(3),
            fade_su: make(4),
            fade_pu: make(5),
            decode_su: make(6),
            decode_pu: make(7),
        }
    }
}

#[inline]
fn uniform01(rng: &mut ChaCha12Rng) -> f64 {
    // 53 random bits in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

#[inline]
fn bernoulli(rng: &mut ChaCha12Rng, p: f64) -> bool {
    uniform01(rng) < p
}

/// Unit-mean exponential draw.
#[inline]
fn exponential(rng: &mut ChaCha12Rng) -> f64 {
    -libm::log1p(-uniform01(rng))
}

/// A collided primary packet waiting for the secondary packet to resolve.
struct Waiter {
    arrival_slot: u64,
    fade_pu: f64,
    fade_su: f64,
}

/// Run the slot-level simulation. Deterministic given the config and seed.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut streams = Streams::new(cfg.seed);
    let policy_len = cfg.policy.trials();
    let q = cfg.policy.q();
    let link = &cfg.link;
    let lambda_p = cfg.traffic.lambda_p;
    let lambda_s = cfg.traffic.lambda_s;

    let mut report = SimReport::empty(cfg.seed, policy_len);
    report.slots = cfg.num_slots;

    let mut su_active = false;
    let mut su_trial = 0usize; // 1-based while active
    let mut su_budget = 0usize;
    let mut su_txs = 0u64;
    let mut queue = 0u64;
    let mut waiters: Vec<Waiter> = Vec::new();

    for slot in 0..cfg.num_slots {
        match cfg.su_arrivals {
            SuArrivals::ConstantInterarrival => {
                if slot % policy_len as u64 == 0 {
                    debug_assert!(!su_active, "previous packet must resolve within its cycle");
                    su_active = true;
                    su_trial = 1;
                    su_budget = policy_len;
                    su_txs = 0;
                }
            }
            SuArrivals::Bernoulli => {
                if bernoulli(&mut streams.su_arrival, lambda_s) {
                    queue += 1;
                }
                if !su_active && queue > 0 {
                    queue -= 1;
                    su_active = true;
                    su_trial = 1;
                    su_txs = 0;
                    su_budget = if bernoulli(&mut streams.budget, cfg.traffic.alpha) {
                        cfg.traffic.m_hi as usize
                    } else {
                        cfg.traffic.m_lo as usize
                    };
                }
            }
        }

        let pu_active = bernoulli(&mut streams.pu_arrival, lambda_p);
        let fade_su = exponential(&mut streams.fade_su);
        let fade_pu = exponential(&mut streams.fade_pu);

        let su_tx = su_active && (!pu_active || bernoulli(&mut streams.access, q[su_trial - 1]));
        let mut su_ok = false;
        if su_tx {
            su_txs += 1;
            let sinr = if pu_active {
                link.su_snr * fade_su / (link.pu_snr * fade_pu + 1.0)
            } else {
                link.su_snr * fade_su
            };
            su_ok = !bernoulli(
                &mut streams.decode_su,
                conditional_error(sinr, link.n, link.rate),
            );
        }

        if pu_active {
            if su_tx && !su_ok {
                // SIC pending: buffer the received slot for later decoding.
                waiters.push(Waiter {
                    arrival_slot: slot,
                    fade_pu,
                    fade_su,
                });
            } else {
                // Clean slot, silent secondary, or interference cancelled
                // immediately: decode now, zero delay.
                report.pu_completed += 1;
                report.delay_counts[0] += 1;
                let eps = conditional_error(link.pu_snr * fade_pu, link.n, link.rate);
                if bernoulli(&mut streams.decode_pu, eps) {
                    report.pu_failed += 1;
                }
            }
        }

        if su_active {
            let success = su_tx && su_ok;
            let exhausted = !success && su_trial == su_budget;
            if success || exhausted {
                su_active = false;
                report.su_completed += 1;
                report.su_transmissions += su_txs;
                report.su_transmissions_sq += su_txs * su_txs;
                if exhausted {
                    report.su_lost += 1;
                }
                for w in waiters.drain(..) {
                    report.pu_completed += 1;
                    let mut delay = (slot - w.arrival_slot) as usize;
                    if delay >= policy_len {
                        report.excess_delay += 1;
                        delay = policy_len - 1;
                    }
                    report.delay_counts[delay] += 1;
                    let eps = if exhausted {
                        // Cancellation never happened; decode interfered.
                        conditional_error(
                            link.pu_snr * w.fade_pu / (link.su_snr * w.fade_su + 1.0),
                            link.n,
                            link.rate,
                        )
                    } else {
                        conditional_error(link.pu_snr * w.fade_pu, link.n, link.rate)
                    };
                    if bernoulli(&mut streams.decode_pu, eps) {
                        report.pu_failed += 1;
                    }
                }
            } else {
                su_trial += 1;
            }
        }
    }
    Ok(report)
}

/// Exact per-packet statistics from exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStats {
    pub eps_s: f64,
    pub phi: f64,
    pub delay: DelayPmf,
}

/// Largest trial budget `enumerate_exact` accepts.
pub const ENUMERATION_MAX_TRIALS: usize = 4;

/// Exhaustively expand the per-trial probability tree (primary arrival,
/// access coin, decode outcome) for the back-to-back traffic pattern.
///
/// Serves as the independent ground truth for the closed forms; the outcome
/// space grows exponentially, so budgets above
/// [`ENUMERATION_MAX_TRIALS`] are refused.
pub fn enumerate_exact(profile: &OutageProfile, policy: &AccessPolicy) -> Result<ExactStats> {
    let m = policy.trials();
    if m > ENUMERATION_MAX_TRIALS {
        return Err(Error::Domain("exact enumeration supports at most 4 trials"));
    }
    let q = policy.q();
    let lp = profile.lambda_p();
    let e1 = profile.eps_s1();
    let e2 = profile.eps_s2();

    let mut eps_s = 0.0;
    let mut phi = 0.0;
    walk_packet(q, lp, e1, e2, 0, 1.0, 0, &mut eps_s, &mut phi);

    let mut mass = alloc::vec![0.0; m];
    for m0 in 0..m {
        walk_delay(q, lp, e1, e2, 0, m0, 1.0, false, &mut mass);
    }
    for entry in &mut mass {
        *entry /= m as f64;
    }
    Ok(ExactStats {
        eps_s,
        phi,
        delay: DelayPmf::from_mass(mass),
    })
}

/// Unconditioned packet tree: accumulate loss probability and expected
/// transmissions.
#[allow(clippy::too_many_arguments)]
fn walk_packet(
    q: &[f64],
    lp: f64,
    e1: f64,
    e2: f64,
    i: usize,
    prob: f64,
    txs: u32,
    eps_s: &mut f64,
    phi: &mut f64,
) {
    if prob == 0.0 {
        return;
    }
    if i == q.len() {
        *eps_s += prob;
        *phi += prob * txs as f64;
        return;
    }
    let qa = q[i];
    // primary active
    walk_packet(
        q,
        lp,
        e1,
        e2,
        i + 1,
        prob * lp * (1.0 - qa),
        txs,
        eps_s,
        phi,
    );
    walk_packet(
        q,
        lp,
        e1,
        e2,
        i + 1,
        prob * lp * qa * e2,
        txs + 1,
        eps_s,
        phi,
    );
    *phi += prob * lp * qa * (1.0 - e2) * (txs + 1) as f64;
    // primary silent: the secondary always transmits
    walk_packet(
        q,
        lp,
        e1,
        e2,
        i + 1,
        prob * (1.0 - lp) * e1,
        txs + 1,
        eps_s,
        phi,
    );
    *phi += prob * (1.0 - lp) * (1.0 - e1) * (txs + 1) as f64;
}

/// Delay tree with the marked primary arrival forced at slot `m0`
/// (0-based). `coll` marks that the arrival collided with a failed
/// secondary transmission and is waiting.
#[allow(clippy::too_many_arguments)]
fn walk_delay(
    q: &[f64],
    lp: f64,
    e1: f64,
    e2: f64,
    i: usize,
    m0: usize,
    prob: f64,
    coll: bool,
    mass: &mut [f64],
) {
    if prob == 0.0 {
        return;
    }
    let m = q.len();
    if i == m {
        // budget exhausted at the final trial; a pending collision waited to
        // the very end
        let d = if coll { (m - 1) - m0 } else { 0 };
        mass[d] += prob;
        return;
    }
    if i == m0 && !coll {
        // The marked arrival: the primary is active by construction.
        let qa = q[i];
        mass[0] += prob * (1.0 - qa); // secondary stays silent
        mass[0] += prob * qa * (1.0 - e2); // cancelled immediately
        walk_delay(q, lp, e1, e2, i + 1, m0, prob * qa * e2, true, mass);
        return;
    }
    // Secondary resolution before m0 pins the marked delay to zero; after
    // m0 it ends the wait at i - m0 slots.
    let resolve = |p: f64, mass: &mut [f64]| {
        if coll {
            mass[i - m0] += p;
        } else {
            debug_assert!(i < m0);
            mass[0] += p;
        }
    };
    let qa = q[i];
    walk_delay(q, lp, e1, e2, i + 1, m0, prob * lp * (1.0 - qa), coll, mass);
    walk_delay(q, lp, e1, e2, i + 1, m0, prob * lp * qa * e2, coll, mass);
    resolve(prob * lp * qa * (1.0 - e2), mass);
    walk_delay(q, lp, e1, e2, i + 1, m0, prob * (1.0 - lp) * e1, coll, mass);
    resolve(prob * (1.0 - lp) * (1.0 - e1), mass);
}

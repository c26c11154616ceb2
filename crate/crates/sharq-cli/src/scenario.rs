//! Scenario files: flat TOML with one section per concern. Powers are given
//! in dB here and converted to linear at the parsing boundary; everything
//! behind this module works in linear units.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sharq_core::{AccessPolicy, LinkConfig, TrafficModel};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub link: LinkSection,
    pub traffic: TrafficSection,
    pub targets: TargetSection,
    pub policy: PolicySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub n: u32,
    pub rate: f64,
    pub pu_snr_db: f64,
    pub su_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_p_sweep: Option<SweepSpec>,
    pub lambda_s: f64,
    /// Fraction of packets given the larger trial budget; defaults to the
    /// minimal stable value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub eps_s: f64,
    pub eps_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub mode: PolicyMode,
    /// Explicit access probabilities; required when mode = "explicit".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Trial count for derived policies; defaults to the m_hi budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Explicit,
    Equal,
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub num_slots: u64,
    pub seed: u64,
    pub arrivals: ArrivalMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalMode {
    Constant,
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: String,
}

impl Scenario {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).context("parsing scenario")?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn validate(&self) -> Result<()> {
        self.link()?;
        match (self.traffic.lambda_p, &self.traffic.lambda_p_sweep) {
            (None, None) => bail!("traffic needs lambda_p or lambda_p_sweep"),
            (Some(_), Some(_)) => bail!("lambda_p and lambda_p_sweep are exclusive"),
            (Some(lp), None) => {
                if !(0.0..=1.0).contains(&lp) {
                    bail!("lambda_p must lie in [0, 1]");
                }
            }
            (None, Some(sweep)) => {
                if sweep.start.is_nan() || sweep.stop.is_nan() || sweep.start > sweep.stop {
                    bail!("sweep start must not exceed stop");
                }
                if sweep.step.is_nan() || sweep.step <= 0.0 {
                    bail!("sweep step must be positive");
                }
                if sweep.start < 0.0 || sweep.stop > 1.0 {
                    bail!("sweep must stay within [0, 1]");
                }
            }
        }
        if !(0.0..=1.0).contains(&self.targets.eps_s) || !(0.0..=1.0).contains(&self.targets.eps_p)
        {
            bail!("outage targets must lie in [0, 1]");
        }
        if self.policy.mode == PolicyMode::Explicit && self.policy.q.is_none() {
            bail!("explicit policy mode needs a q vector");
        }
        // lambda_s / alpha checked by the core constructor
        self.traffic_model(self.sweep_points()[0])?;
        Ok(())
    }

    pub fn link(&self) -> Result<LinkConfig> {
        LinkConfig::new(
            self.link.n,
            self.link.rate,
            db_to_linear(self.link.pu_snr_db),
            db_to_linear(self.link.su_snr_db),
        )
        .map_err(|e| anyhow::anyhow!("link: {e}"))
    }

    pub fn traffic_model(&self, lambda_p: f64) -> Result<TrafficModel> {
        let model = match self.traffic.alpha {
            Some(alpha) => TrafficModel::new(lambda_p, self.traffic.lambda_s, alpha),
            None => TrafficModel::with_min_alpha(lambda_p, self.traffic.lambda_s),
        };
        model.map_err(|e| anyhow::anyhow!("traffic: {e}"))
    }

    /// The lambda_p values this scenario covers, in sweep order.
    pub fn sweep_points(&self) -> Vec<f64> {
        match (&self.traffic.lambda_p, &self.traffic.lambda_p_sweep) {
            (Some(lp), _) => vec![*lp],
            (None, Some(sweep)) => {
                let mut points = Vec::new();
                let mut k = 0u64;
                loop {
                    let value = sweep.start + k as f64 * sweep.step;
                    if value > sweep.stop + 1e-12 {
                        break;
                    }
                    points.push(value.min(1.0));
                    k += 1;
                }
                points
            }
            (None, None) => Vec::new(),
        }
    }

    /// Trial count for derived policies.
    pub fn trials(&self) -> Result<usize> {
        if let Some(t) = self.policy.trials {
            if t < 1 {
                bail!("trials must be at least 1");
            }
            return Ok(t as usize);
        }
        if let Some(q) = &self.policy.q {
            if self.policy.mode == PolicyMode::Explicit {
                return Ok(q.len());
            }
        }
        let model = self.traffic_model(0.5)?;
        Ok(model.m_hi as usize)
    }

    pub fn explicit_policy(&self) -> Result<Option<AccessPolicy>> {
        match (&self.policy.mode, &self.policy.q) {
            (PolicyMode::Explicit, Some(q)) => {
                let policy =
                    AccessPolicy::new(q.clone()).map_err(|e| anyhow::anyhow!("policy: {e}"))?;
                Ok(Some(policy))
            }
            _ => Ok(None),
        }
    }

    pub fn grid_step(&self) -> f64 {
        self.policy.grid_step.unwrap_or(0.01)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[link]
n = 500
rate = 0.25
pu_snr_db = 30.0
su_snr_db = 32.0

[traffic]
lambda_p_sweep = { start = 0.1, stop = 0.9, step = 0.1 }
lambda_s = 0.3333333333333333

[targets]
eps_s = 0.001
eps_p = 0.001

[policy]
mode = "equal"

[sim]
num_slots = 100000
seed = 7
arrivals = "constant"
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        let echoed = s.to_toml();
        let again = Scenario::from_toml(&echoed).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn sweep_points_cover_grid() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        let points = s.sweep_points();
        assert_eq!(points.len(), 9);
        assert!((points[0] - 0.1).abs() < 1e-12);
        assert!((points[8] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_conflicting_lambda() {
        let bad = SAMPLE.replace(
            "lambda_p_sweep = { start = 0.1, stop = 0.9, step = 0.1 }",
            "lambda_p = 0.5\nlambda_p_sweep = { start = 0.1, stop = 0.9, step = 0.1 }",
        );
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_explicit_without_q() {
        let bad = SAMPLE.replace("mode = \"equal\"", "mode = \"explicit\"");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_backwards_sweep() {
        let bad = SAMPLE.replace(
            "{ start = 0.1, stop = 0.9, step = 0.1 }",
            "{ start = 0.9, stop = 0.1, step = 0.1 }",
        );
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn derived_trial_count_follows_schedule() {
        let s = Scenario::from_toml(SAMPLE).unwrap();
        assert_eq!(s.trials().unwrap(), 3);
    }
}

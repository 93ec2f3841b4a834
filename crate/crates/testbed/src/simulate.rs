use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::population::Population;
use crate::TestbedError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Wear iff a uniform draw falls below the decision probability.
    #[default]
    Probabilistic,
    /// Wear iff the decision probability is at least one half.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdoptionParams {
    pub family_weight: f64,
    pub work_school_weight: f64,
    pub community_weight: f64,
    pub risk_weight: f64,
    pub habit_weight: f64,
    pub info_weight: f64,
    pub threshold: f64,
    /// EMA factor: `habit <- memory * habit + (1 - memory) * wore_yesterday`.
    pub habit_memory: f64,
    pub intervention_day: u32,
    /// Fraction of agents, by descending total connections, informed on the
    /// intervention day.
    pub seed_fraction: f64,
    /// Per-edge, per-day probability that an informed agent informs a neighbour.
    pub spread_probability: f64,
    pub decision_rule: DecisionRule,
}

impl Default for AdoptionParams {
    fn default() -> Self {
        Self {
            family_weight: 0.5,
            work_school_weight: 0.3,
            community_weight: 0.2,
            risk_weight: 1.0,
            habit_weight: 0.6,
            info_weight: 0.8,
            threshold: 1.2,
            habit_memory: 0.8,
            intervention_day: 10,
            seed_fraction: 0.05,
            spread_probability: 0.1,
            decision_rule: DecisionRule::Probabilistic,
        }
    }
}

impl AdoptionParams {
    /// Heightened perceived risk.
    pub fn high_risk() -> Self {
        Self {
            risk_weight: 1.6,
            ..Self::default()
        }
    }

    /// Stronger information seeding and spread.
    pub fn intervention() -> Self {
        Self {
            info_weight: 1.2,
            seed_fraction: 0.15,
            spread_probability: 0.2,
            ..Self::default()
        }
    }

    pub fn validate(&self, horizon_days: u32) -> Result<(), TestbedError> {
        let finite = [
            self.family_weight,
            self.work_school_weight,
            self.community_weight,
            self.risk_weight,
            self.habit_weight,
            self.info_weight,
            self.threshold,
        ];
        if finite.iter().any(|w| !w.is_finite()) {
            return Err(TestbedError::InvalidParams("weights and threshold must be finite".into()));
        }
        for (name, v) in [
            ("habit_memory", self.habit_memory),
            ("seed_fraction", self.seed_fraction),
            ("spread_probability", self.spread_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TestbedError::InvalidParams(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.intervention_day >= horizon_days {
            return Err(TestbedError::InvalidParams(format!(
                "intervention day {} is outside the {horizon_days}-day horizon",
                self.intervention_day
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day: u32,
    pub agent_id: u32,
    pub wearing_mask: bool,
    pub received_info: bool,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn wearing_fraction(neighbours: &[u32], wearing: &[bool]) -> f64 {
    if neighbours.is_empty() {
        return 0.0;
    }
    neighbours.iter().filter(|&&n| wearing[n as usize]).count() as f64 / neighbours.len() as f64
}

/// Runs the daily adoption process; returns one record per (day, agent),
/// ordered by day then agent id.
///
/// Day 0 reflects each agent's initial wearing state. Every later day uses
/// the previous day's neighbour states (synchronous update).
pub fn simulate_adoption(
    population: &Population,
    params: &AdoptionParams,
    horizon_days: u32,
    seed: u64,
) -> Result<Vec<DailyRecord>, TestbedError> {
    if horizon_days == 0 {
        return Err(TestbedError::InvalidParams("horizon must be at least one day".into()));
    }
    params.validate(horizon_days)?;

    let n = population.agents.len();
    let ties = &population.network.ties;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by(|&a, &b| {
        population.agents[b]
            .total_connections
            .cmp(&population.agents[a].total_connections)
            .then(a.cmp(&b))
    });
    seeds.truncate((params.seed_fraction * n as f64).ceil() as usize);

    let mut wearing: Vec<bool> = population.agents.iter().map(|a| a.initial_mask_wearing).collect();
    let mut habit: Vec<f64> = wearing.iter().map(|&w| if w { 1.0 } else { 0.0 }).collect();
    let mut informed = vec![false; n];
    let mut records = Vec::with_capacity(n * horizon_days as usize);

    for day in 0..horizon_days {
        if day == params.intervention_day {
            for &s in &seeds {
                informed[s] = true;
            }
        } else if day > params.intervention_day {
            let yesterday = informed.clone();
            for (agent, _) in yesterday.iter().enumerate().filter(|(_, &i)| i) {
                for &nb in &ties[agent].all {
                    if !informed[nb as usize] && rng.gen_bool(params.spread_probability) {
                        informed[nb as usize] = true;
                    }
                }
            }
        }

        if day > 0 {
            let previous = wearing.clone();
            for agent in 0..n {
                habit[agent] = params.habit_memory * habit[agent]
                    + (1.0 - params.habit_memory) * if previous[agent] { 1.0 } else { 0.0 };
                let t = &ties[agent];
                let z = params.family_weight * wearing_fraction(&t.family, &previous)
                    + params.work_school_weight * wearing_fraction(&t.work_school, &previous)
                    + params.community_weight * wearing_fraction(&t.community, &previous)
                    + params.risk_weight * population.agents[agent].risk_perception
                    + params.habit_weight * habit[agent]
                    + params.info_weight * if informed[agent] { 1.0 } else { 0.0 }
                    - params.threshold;
                let p = sigmoid(z);
                wearing[agent] = match params.decision_rule {
                    DecisionRule::Probabilistic => rng.gen::<f64>() < p,
                    DecisionRule::Threshold => p >= 0.5,
                };
            }
        }

        records.extend((0..n).map(|agent| DailyRecord {
            day,
            agent_id: agent as u32,
            wearing_mask: wearing[agent],
            received_info: informed[agent],
        }));
    }
    Ok(records)
}

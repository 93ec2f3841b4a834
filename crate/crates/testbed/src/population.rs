use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: u32,
    pub age: u32,
    pub age_group: String,
    pub occupation: String,
    pub risk_perception: f64,
    pub initial_mask_wearing: bool,
    pub family_connections: u32,
    pub work_school_connections: u32,
    pub community_connections: u32,
    pub total_connections: u32,
}

/// One agent's neighbours per tie class; `all` is the sorted union.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ties {
    pub family: Vec<u32>,
    pub work_school: Vec<u32>,
    pub community: Vec<u32>,
    pub all: Vec<u32>,
}

/// Adjacency indexed by agent id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialNetwork {
    pub ties: Vec<Ties>,
}

impl SocialNetwork {
    pub fn len(&self) -> usize {
        self.ties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ties.is_empty()
    }

    /// Checks symmetry per class, absence of self-edges and `all` = union.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, ties) in self.ties.iter().enumerate() {
            let id = id as u32;
            for (class, list) in [
                ("family", &ties.family),
                ("work_school", &ties.work_school),
                ("community", &ties.community),
            ] {
                for &other in list {
                    if other == id {
                        return Err(format!("agent {id} has a {class} self-edge"));
                    }
                    let back = match class {
                        "family" => &self.ties[other as usize].family,
                        "work_school" => &self.ties[other as usize].work_school,
                        _ => &self.ties[other as usize].community,
                    };
                    if !back.contains(&id) {
                        return Err(format!("{class} edge {id}->{other} is not symmetric"));
                    }
                }
            }
            let union: BTreeSet<u32> = ties
                .family
                .iter()
                .chain(&ties.work_school)
                .chain(&ties.community)
                .copied()
                .collect();
            if union.into_iter().collect::<Vec<_>>() != ties.all {
                return Err(format!("agent {id}: `all` is not the union of the class lists"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub agents: Vec<AgentRecord>,
    pub network: SocialNetwork,
}

const HOUSEHOLD_SIZES: [(usize, f64); 5] = [(1, 0.25), (2, 0.30), (3, 0.20), (4, 0.15), (5, 0.10)];
const ADULT_OCCUPATIONS: [(&str, f64); 4] = [
    ("White Collar", 0.40),
    ("Blue Collar", 0.30),
    ("Service", 0.20),
    ("Healthcare", 0.10),
];

fn weighted<T: Copy>(rng: &mut ChaCha8Rng, table: &[(T, f64)]) -> T {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut draw = rng.gen::<f64>() * total;
    for (value, w) in table {
        if draw < *w {
            return *value;
        }
        draw -= w;
    }
    table[table.len() - 1].0
}

fn age_group(age: u32) -> &'static str {
    match age {
        0..=17 => "Youth",
        18..=34 => "Young Adult",
        35..=59 => "Middle Age",
        _ => "Senior",
    }
}

fn occupation(rng: &mut ChaCha8Rng, age: u32) -> &'static str {
    match age {
        0..=17 => "Student",
        18..=24 if rng.gen_bool(0.5) => "Student",
        65.. => "Retired",
        _ => weighted(rng, &ADULT_OCCUPATIONS),
    }
}

fn work_degree_target(rng: &mut ChaCha8Rng, occupation: &str) -> usize {
    match occupation {
        "Retired" => rng.gen_range(0..=2),
        "Student" => rng.gen_range(3..=8),
        _ => rng.gen_range(2..=7),
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Random matching of degree stubs, skipping self-pairs and pairs already
/// connected in any class so that `all` never double counts a neighbour.
fn match_stubs(rng: &mut ChaCha8Rng, targets: &[usize], existing: &[BTreeSet<u32>]) -> Vec<BTreeSet<u32>> {
    let mut stubs: Vec<u32> = targets
        .iter()
        .enumerate()
        .flat_map(|(id, &d)| std::iter::repeat_n(id as u32, d))
        .collect();
    stubs.shuffle(rng);
    let mut edges = vec![BTreeSet::new(); targets.len()];
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b || existing[a as usize].contains(&b) || edges[a as usize].contains(&b) {
            continue;
        }
        edges[a as usize].insert(b);
        edges[b as usize].insert(a);
    }
    edges
}

/// Builds `n` agents and their three-class social network from `seed`.
pub fn generate_population(n: usize, seed: u64) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let risk_noise = Normal::new(0.0, 0.15).expect("valid normal");

    let mut ages = Vec::with_capacity(n);
    let mut occupations = Vec::with_capacity(n);
    let mut risks = Vec::with_capacity(n);
    let mut initial = Vec::with_capacity(n);
    for _ in 0..n {
        let age = rng.gen_range(5..=85u32);
        let occ = occupation(&mut rng, age);
        let mean = 0.45 + 0.003 * (f64::from(age) - 40.0) + if occ == "Healthcare" { 0.1 } else { 0.0 };
        let risk = round4((mean + risk_noise.sample(&mut rng)).clamp(0.0, 1.0));
        let p_wear = 1.0 / (1.0 + (-8.0 * (risk - 0.6)).exp());
        ages.push(age);
        occupations.push(occ);
        risks.push(risk);
        initial.push(rng.gen_bool(p_wear));
    }

    // family: households as cliques over a shuffled order
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut family = vec![BTreeSet::new(); n];
    let mut cursor = 0;
    while cursor < n {
        let size = weighted(&mut rng, &HOUSEHOLD_SIZES).min(n - cursor);
        let household = &order[cursor..cursor + size];
        for &a in household {
            for &b in household {
                if a != b {
                    family[a as usize].insert(b);
                }
            }
        }
        cursor += size;
    }

    let work_targets: Vec<usize> = occupations.iter().map(|o| work_degree_target(&mut rng, o)).collect();
    let work = match_stubs(&mut rng, &work_targets, &family);

    let taken: Vec<BTreeSet<u32>> = family.iter().zip(&work).map(|(f, w)| f.union(w).copied().collect()).collect();
    let community_targets: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let community = match_stubs(&mut rng, &community_targets, &taken);

    let mut agents = Vec::with_capacity(n);
    let mut ties = Vec::with_capacity(n);
    for id in 0..n {
        let all: BTreeSet<u32> = family[id].iter().chain(&work[id]).chain(&community[id]).copied().collect();
        let (f, w, c) = (family[id].len() as u32, work[id].len() as u32, community[id].len() as u32);
        agents.push(AgentRecord {
            agent_id: id as u32,
            age: ages[id],
            age_group: age_group(ages[id]).to_string(),
            occupation: occupations[id].to_string(),
            risk_perception: risks[id],
            initial_mask_wearing: initial[id],
            family_connections: f,
            work_school_connections: w,
            community_connections: c,
            total_connections: f + w + c,
        });
        ties.push(Ties {
            family: family[id].iter().copied().collect(),
            work_school: work[id].iter().copied().collect(),
            community: community[id].iter().copied().collect(),
            all: all.into_iter().collect(),
        });
    }
    Population {
        agents,
        network: SocialNetwork { ties },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_agents_satisfy_identities() {
        let pop = generate_population(1000, 42);
        assert_eq!(pop.agents.len(), 1000);
        for (i, a) in pop.agents.iter().enumerate() {
            assert_eq!(a.agent_id as usize, i);
            assert_eq!(
                a.total_connections,
                a.family_connections + a.work_school_connections + a.community_connections
            );
            assert_eq!(a.total_connections as usize, pop.network.ties[i].all.len());
            assert!((0.0..=1.0).contains(&a.risk_perception));
        }
        pop.network.check_invariants().unwrap();
    }

    #[test]
    fn empty_population() {
        let pop = generate_population(0, 1);
        assert!(pop.agents.is_empty());
        assert!(pop.network.is_empty());
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(generate_population(200, 9), generate_population(200, 9));
        assert_ne!(generate_population(200, 9), generate_population(200, 10));
    }

    #[test]
    fn demographics_are_consistent() {
        let pop = generate_population(500, 3);
        for a in &pop.agents {
            assert_eq!(a.age_group, age_group(a.age));
            if a.age < 18 {
                assert_eq!(a.occupation, "Student");
            }
            if a.age >= 65 {
                assert_eq!(a.occupation, "Retired");
            }
        }
        let wearing = pop.agents.iter().filter(|a| a.initial_mask_wearing).count();
        assert!(wearing > 0 && wearing < 500);
    }

    #[test]
    fn invariant_checker_catches_asymmetry() {
        let mut pop = generate_population(20, 5);
        let victim = pop.network.ties.iter().position(|t| !t.family.is_empty()).unwrap();
        pop.network.ties[victim].family.clear();
        assert!(pop.network.check_invariants().is_err());
    }
}

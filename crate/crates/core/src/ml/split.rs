//! Stratified train/validation/test assignment.
//!
//! Each class gets exact per-partition quotas by the largest-remainder rule.
//! The class is then sorted by health utility and walked in strata of three:
//! a smooth interleaved sequence of partition slots (meeting the quotas
//! exactly) is laid over the sorted members, and the slots inside each
//! stratum are shuffled with the seeded generator. Every partition therefore
//! spans the class's whole utility range.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledVector, MlError, Severity};

const STRATUM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Self::Train, Self::Validation, Self::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Validation => "validation",
            Self::Test => "test",
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "validation" | "valid" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            _ => Err(format!("unknown partition {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SplitRatios([f64; 3]);

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, MlError> {
        let r = [train, validation, test];
        if r.iter().any(|x| !(x.is_finite() && *x > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MlError::BadRatios(r));
        }
        Ok(Self(r))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self([0.5, 0.25, 0.25])
    }
}

impl TryFrom<[f64; 3]> for SplitRatios {
    type Error = MlError;

    fn try_from(r: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(r[0], r[1], r[2])
    }
}

impl From<SplitRatios> for [f64; 3] {
    fn from(r: SplitRatios) -> Self {
        r.0
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c] => Self::new(a, b, c).map_err(|e| e.to_string()),
            _ => Err(format!("expected three comma-separated ratios, got {s:?}")),
        }
    }
}

/// Integer quotas summing to `n`, each within one of `n * ratio`. Leftover
/// units go to the largest fractional parts, earlier partitions first on ties.
pub fn largest_remainder(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let raw = ratios.0.map(|r| n as f64 * r);
    let mut quotas = raw.map(|x| x.floor() as usize);
    let assigned: usize = quotas.iter().sum();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

/// Evenly interleaved slot sequence with exactly `quotas[p]` entries of p.
fn slot_sequence(quotas: [usize; 3]) -> Vec<usize> {
    let n: usize = quotas.iter().sum();
    let mut taken = [0usize; 3];
    let mut slots = Vec::with_capacity(n);
    for k in 1..=n {
        let next = (0..3)
            .filter(|&p| taken[p] < quotas[p])
            .max_by(|&a, &b| {
                let da = (quotas[a] * k) as f64 / n as f64 - taken[a] as f64;
                let db = (quotas[b] * k) as f64 / n as f64 - taken[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("quotas sum to n");
        taken[next] += 1;
        slots.push(next);
    }
    slots
}

/// Assigns each item, given as (class, health utility, id), to a partition.
pub fn stratified_assignment(
    items: &[(Severity, f64, &str)],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<Vec<Partition>, MlError> {
    for (i, (_, _, id)) in items.iter().enumerate() {
        if items[..i].iter().any(|(_, _, other)| other == id) {
            return Err(MlError::DuplicateId((*id).to_string()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Partition::Train; items.len()];
    for class in [Severity::Mild, Severity::Severe] {
        let mut members: Vec<usize> = (0..items.len()).filter(|&i| items[i].0 == class).collect();
        let quotas = largest_remainder(members.len(), ratios);
        if quotas.contains(&0) {
            return Err(MlError::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.sort_by(|&a, &b| items[a].1.total_cmp(&items[b].1).then(items[a].2.cmp(items[b].2)));
        let mut slots = slot_sequence(quotas);
        for (stratum, stratum_slots) in members.chunks(STRATUM).zip(slots.chunks_mut(STRATUM)) {
            stratum_slots.shuffle(&mut rng);
            for (&member, &slot) in stratum.iter().zip(stratum_slots.iter()) {
                out[member] = Partition::ALL[slot];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<LabeledVector>,
    pub validation: Vec<LabeledVector>,
    pub test: Vec<LabeledVector>,
}

impl Split {
    /// Groups `vectors` by a precomputed assignment, keeping input order.
    pub fn from_assignment(vectors: &[LabeledVector], assignment: &[Partition]) -> Self {
        let pick = |p: Partition| {
            vectors
                .iter()
                .zip(assignment)
                .filter(|(_, a)| **a == p)
                .map(|(v, _)| v.clone())
                .collect()
        };
        Self {
            train: pick(Partition::Train),
            validation: pick(Partition::Validation),
            test: pick(Partition::Test),
        }
    }

    pub fn partition(&self, p: Partition) -> &[LabeledVector] {
        match p {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }
}

pub fn stratified_split(
    vectors: &[LabeledVector],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<Split, MlError> {
    let items: Vec<(Severity, f64, &str)> = vectors
        .iter()
        .map(|v| (v.label, v.hu, v.example_id.as_str()))
        .collect();
    let assignment = stratified_assignment(&items, ratios, seed)?;
    Ok(Split::from_assignment(vectors, &assignment))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors(mild: usize, severe: usize) -> Vec<LabeledVector> {
        (0..mild + severe)
            .map(|i| LabeledVector {
                example_id: format!("c{i:03}"),
                label: if i < mild { Severity::Mild } else { Severity::Severe },
                hu: if i < mild { 0.6 + 0.01 * i as f64 } else { 0.5 - 0.01 * (i - mild) as f64 },
                features: vec![i as f64],
            })
            .collect()
    }

    fn class_count(part: &[LabeledVector], class: Severity) -> usize {
        part.iter().filter(|v| v.label == class).count()
    }

    #[test]
    fn thirty_thirty_half_quarter_quarter() {
        let split = stratified_split(&vectors(30, 30), &SplitRatios::default(), 9).unwrap();
        for class in [Severity::Mild, Severity::Severe] {
            assert_eq!(class_count(&split.train, class), 15);
            let v = class_count(&split.validation, class);
            let t = class_count(&split.test, class);
            assert!((7..=8).contains(&v) && (7..=8).contains(&t) && v + t == 15);
        }
    }

    #[test]
    fn six_vectors_in_thirds() {
        let r = SplitRatios::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        let split = stratified_split(&vectors(3, 3), &r, 1).unwrap();
        for p in Partition::ALL {
            assert_eq!(class_count(split.partition(p), Severity::Mild), 1);
            assert_eq!(class_count(split.partition(p), Severity::Severe), 1);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let v = vectors(17, 23);
        let a = stratified_split(&v, &SplitRatios::default(), 5).unwrap();
        let b = stratified_split(&v, &SplitRatios::default(), 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn too_small_class_is_rejected() {
        let r = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        assert!(matches!(
            stratified_split(&vectors(3, 30), &r, 0),
            Err(MlError::ClassTooSmall { class: Severity::Mild, count: 3 })
        ));
    }

    #[test]
    fn partitions_spread_over_utility_range() {
        let split = stratified_split(&vectors(30, 30), &SplitRatios::default(), 3).unwrap();
        for p in Partition::ALL {
            let hus: Vec<f64> = split
                .partition(p)
                .iter()
                .filter(|v| v.label == Severity::Mild)
                .map(|v| v.hu)
                .collect();
            let lo = hus.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = hus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo < 0.66 && hi > 0.83, "{p:?}: {lo}..{hi}");
        }
    }

    #[test]
    fn quota_arithmetic() {
        assert_eq!(largest_remainder(30, &SplitRatios::default()), [15, 8, 7]);
        assert_eq!(largest_remainder(3, &SplitRatios::default()), [1, 1, 1]);
        assert_eq!(largest_remainder(0, &SplitRatios::default()), [0, 0, 0]);
        let thirds = SplitRatios::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(largest_remainder(7, &thirds), [3, 2, 2]);
    }

    #[test]
    fn ratio_validation_and_parsing() {
        assert!(SplitRatios::new(0.5, 0.5, 0.0).is_err());
        assert!(SplitRatios::new(0.5, 0.3, 0.3).is_err());
        let r: SplitRatios = "0.6, 0.2,0.2".parse().unwrap();
        assert_eq!(r.as_array(), [0.6, 0.2, 0.2]);
        assert!("0.5,0.5".parse::<SplitRatios>().is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut v = vectors(5, 5);
        v[1].example_id = v[0].example_id.clone();
        assert!(matches!(
            stratified_split(&v, &SplitRatios::default(), 0),
            Err(MlError::DuplicateId(_))
        ));
    }
}

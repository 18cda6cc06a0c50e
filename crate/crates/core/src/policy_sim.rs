//! Stochastic stand-in for the learned dexterous policy.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{PrimitiveGroup, RobotPrimitive};
use crate::tabletop::{Facing, LoopStage, OutcomeLevel, TableState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("{primitive} cannot act on this table: {reason}")]
    EffectInapplicable { primitive: RobotPrimitive, reason: String },
    #[error("invalid outcome profile: {0}")]
    InvalidProfile(String),
    #[error("unknown outcome profile `{0}`")]
    UnknownProfile(String),
}

/// Outcome probabilities (p_SP, p_DC, p_TF, p_DF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub sp: f64,
    pub dc: f64,
    pub tf: f64,
    pub df: f64,
}

impl Quad {
    pub const ALL_SP: Quad = Quad { sp: 1.0, dc: 0.0, tf: 0.0, df: 0.0 };

    pub fn new(sp: f64, dc: f64, tf: f64, df: f64) -> Quad {
        Quad { sp, dc, tf, df }
    }

    pub fn from_counts(sp: u32, dc: u32, tf: u32, df: u32) -> Quad {
        let n = f64::from(sp + dc + tf + df);
        Quad::new(f64::from(sp) / n, f64::from(dc) / n, f64::from(tf) / n, f64::from(df) / n)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let parts = [self.sp, self.dc, self.tf, self.df];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SimError::InvalidProfile(format!("negative probability in {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidProfile(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }

    pub fn probability(&self, level: OutcomeLevel) -> f64 {
        match level {
            OutcomeLevel::SP => self.sp,
            OutcomeLevel::DC => self.dc,
            OutcomeLevel::TF => self.tf,
            OutcomeLevel::DF => self.df,
        }
    }
}

fn default_settle_delay() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProfile {
    pub default: Quad,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<PrimitiveGroup, Quad>,
    /// Per-primitive overrides keyed by primitive name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub primitives: BTreeMap<String, Quad>,
    /// Captures the scene stays unstable after an applied effect.
    #[serde(default = "default_settle_delay")]
    pub settle_delay: u32,
    /// Treat DC as continuable instead of handing the scene to a human.
    #[serde(default)]
    pub dc_continuable: bool,
}

impl OutcomeProfile {
    pub fn uniform(q: Quad) -> OutcomeProfile {
        OutcomeProfile {
            default: q,
            groups: BTreeMap::new(),
            primitives: BTreeMap::new(),
            settle_delay: 1,
            dc_continuable: false,
        }
    }

    pub fn all_sp() -> OutcomeProfile {
        OutcomeProfile::uniform(Quad::ALL_SP)
    }

    pub fn quad_for(&self, prim: RobotPrimitive) -> Quad {
        self.primitives
            .get(&prim.name())
            .or_else(|| self.groups.get(&prim.group()))
            .copied()
            .unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.default.validate()?;
        self.groups.values().try_for_each(Quad::validate)?;
        for (name, q) in &self.primitives {
            name.parse::<RobotPrimitive>()
                .map_err(|e| SimError::InvalidProfile(e.to_string()))?;
            q.validate()?;
        }
        Ok(())
    }
}

/// (SP, DC, TF, DF) counts over 80 trials per policy.
pub const AGGREGATE_COUNTS: [(&str, [u32; 4]); 9] = [
    ("pi05", [38, 11, 31, 0]),
    ("pi0", [38, 8, 33, 1]),
    ("rdt", [24, 13, 40, 3]),
    ("dp-dino", [21, 8, 48, 3]),
    ("dp-transformer", [11, 5, 46, 18]),
    ("rdt-small", [11, 3, 59, 7]),
    ("act", [8, 4, 67, 1]),
    ("baku", [5, 5, 67, 3]),
    ("dp-unet", [1, 0, 79, 0]),
];

/// Per-group (SPSR, TCR) percentages: pickup, push, pull, put-down/show.
pub const GROUP_RATES: [(&str, [(f64, f64); 4]); 9] = [
    ("pi05", [(100.0, 100.0), (25.0, 35.0), (15.0, 30.0), (50.0, 80.0)]),
    ("pi0", [(100.0, 100.0), (25.0, 30.0), (15.0, 20.0), (50.0, 80.0)]),
    ("rdt", [(75.0, 80.0), (15.0, 25.0), (5.0, 10.0), (25.0, 70.0)]),
    ("dp-dino", [(50.0, 50.0), (25.0, 45.0), (10.0, 20.0), (20.0, 30.0)]),
    ("dp-transformer", [(25.0, 25.0), (10.0, 15.0), (15.0, 20.0), (5.0, 20.0)]),
    ("rdt-small", [(25.0, 25.0), (15.0, 20.0), (5.0, 5.0), (10.0, 20.0)]),
    ("act", [(25.0, 30.0), (5.0, 5.0), (0.0, 0.0), (10.0, 25.0)]),
    ("baku", [(20.0, 30.0), (0.0, 0.0), (0.0, 10.0), (5.0, 10.0)]),
    ("dp-unet", [(0.0, 0.0), (0.0, 0.0), (5.0, 5.0), (0.0, 0.0)]),
];

/// Names accepted by [`named_profile`].
pub fn profile_names() -> Vec<String> {
    let mut names = vec!["all-sp".to_string()];
    for (policy, _) in AGGREGATE_COUNTS {
        names.push(format!("{policy}-aggregate"));
        names.push(format!("{policy}-groups"));
    }
    names
}

/// Built-in profiles: `all-sp`, `<policy>-aggregate` and `<policy>-groups`.
///
/// Group profiles split each group's failures between TF and DF in the
/// policy's aggregate TF:DF ratio.
pub fn named_profile(name: &str) -> Result<OutcomeProfile, SimError> {
    if name == "all-sp" {
        return Ok(OutcomeProfile::all_sp());
    }
    let unknown = || SimError::UnknownProfile(name.to_string());
    let (policy, kind) = name.rsplit_once('-').ok_or_else(unknown)?;
    let [sp, dc, tf, df] = AGGREGATE_COUNTS
        .iter()
        .find(|(p, _)| *p == policy)
        .map(|(_, c)| *c)
        .ok_or_else(unknown)?;
    let aggregate = Quad::from_counts(sp, dc, tf, df);
    match kind {
        "aggregate" => Ok(OutcomeProfile::uniform(aggregate)),
        "groups" => {
            let rates = GROUP_RATES.iter().find(|(p, _)| *p == policy).map(|(_, r)| r).ok_or_else(unknown)?;
            let tf_share = if tf + df == 0 { 1.0 } else { f64::from(tf) / f64::from(tf + df) };
            let mut profile = OutcomeProfile::uniform(aggregate);
            for (group, (spsr, tcr)) in PrimitiveGroup::ALL.iter().zip(rates.iter()) {
                let p_sp = spsr / 100.0;
                let p_dc = (tcr - spsr) / 100.0;
                let fail = 1.0 - tcr / 100.0;
                profile
                    .groups
                    .insert(*group, Quad::new(p_sp, p_dc, fail * tf_share, fail * (1.0 - tf_share)));
            }
            Ok(profile)
        }
        _ => Err(unknown()),
    }
}

/// Draws one outcome level for `prim`.
pub fn sample_outcome<R: Rng + ?Sized>(prim: RobotPrimitive, prof: &OutcomeProfile, rng: &mut R) -> OutcomeLevel {
    let q = prof.quad_for(prim);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for level in OutcomeLevel::ALL {
        acc += q.probability(level);
        if u < acc {
            return level;
        }
    }
    // Rounding slack: fall back to the last level with mass.
    OutcomeLevel::ALL
        .into_iter()
        .rev()
        .find(|&l| q.probability(l) > 0.0)
        .unwrap_or(OutcomeLevel::SP)
}

/// Applies the nominal effect of `prim` in place.
pub fn apply_effect(t: &mut TableState, prim: RobotPrimitive) -> Result<(), SimError> {
    let inapplicable = |reason: &str| SimError::EffectInapplicable {
        primitive: prim,
        reason: reason.to_string(),
    };
    match prim {
        RobotPrimitive::PickUp(side) => {
            let h = t.hole_mut(side).ok_or_else(|| inapplicable("no card in the slot"))?;
            if h.facing == Facing::InHand {
                return Err(inapplicable("card already held"));
            }
            h.facing = Facing::InHand;
        }
        RobotPrimitive::PutDown(side) => {
            let h = t.hole_mut(side).ok_or_else(|| inapplicable("no card in the slot"))?;
            if h.facing != Facing::InHand {
                return Err(inapplicable("card is not held"));
            }
            h.facing = Facing::Down;
        }
        RobotPrimitive::Show(side) => {
            let h = t.hole_mut(side).ok_or_else(|| inapplicable("no card in the slot"))?;
            if h.facing == Facing::Up {
                return Err(inapplicable("card already face up"));
            }
            h.facing = Facing::Up;
        }
        RobotPrimitive::Push(d) => {
            t.robot_inventory
                .take(d)
                .map_err(|_| inapplicable("no such chip in the robot inventory"))?;
            t.robot_bet_zone.add(d, 1);
        }
        RobotPrimitive::Pull(d) => {
            if t.robot_bet_zone.take(d).is_err() {
                t.opponent_bet_zone
                    .take(d)
                    .map_err(|_| inapplicable("no such chip in either bet zone"))?;
            }
            t.robot_inventory.add(d, 1);
        }
    }
    Ok(())
}

/// Executes one atom under a given outcome level.
///
/// SP and DC apply the nominal effect; TF and DF leave the table untouched.
pub fn execute_atom(
    truth: &TableState,
    prim: RobotPrimitive,
    outcome: OutcomeLevel,
    dc_continuable: bool,
) -> Result<(TableState, LoopStage), SimError> {
    let mut next = truth.clone();
    apply_effect(&mut next, prim)?;
    Ok(match outcome {
        OutcomeLevel::SP => (next, LoopStage::AtomIdle),
        OutcomeLevel::DC if dc_continuable => (next, LoopStage::AtomIdle),
        OutcomeLevel::DC => (next, LoopStage::Down),
        OutcomeLevel::TF => (truth.clone(), LoopStage::ToRecover),
        OutcomeLevel::DF => (truth.clone(), LoopStage::Down),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabletop::{new_initial_table, Denomination, TableConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn push_moves_one_chip() {
        let t = new_initial_table(&TableConfig::default());
        let push = RobotPrimitive::Push(Denomination::D10);
        let (n, stage) = execute_atom(&t, push, OutcomeLevel::SP, false).unwrap();
        assert_eq!(n.robot_inventory.get(Denomination::D10), 2);
        assert_eq!(n.robot_bet_zone.get(Denomination::D10), 1);
        assert_eq!(n.chip_totals(), t.chip_totals());
        assert_eq!(stage, LoopStage::AtomIdle);
    }

    #[test]
    fn failures_leave_the_table_alone() {
        let t = new_initial_table(&TableConfig::default());
        let push = RobotPrimitive::Push(Denomination::D100);
        assert_eq!(execute_atom(&t, push, OutcomeLevel::TF, false).unwrap(), (t.clone(), LoopStage::ToRecover));
        assert_eq!(execute_atom(&t, push, OutcomeLevel::DF, false).unwrap(), (t.clone(), LoopStage::Down));
        let (n, stage) = execute_atom(&t, push, OutcomeLevel::DC, false).unwrap();
        assert_ne!(n, t);
        assert_eq!(stage, LoopStage::Down);
    }

    #[test]
    fn inapplicable_effect_is_an_error() {
        let t = new_initial_table(&TableConfig::default());
        assert!(matches!(
            execute_atom(&t, RobotPrimitive::Pull(Denomination::D5), OutcomeLevel::SP, false),
            Err(SimError::EffectInapplicable { .. })
        ));
    }

    #[test]
    fn degenerate_profile_and_determinism() {
        let prof = OutcomeProfile::all_sp();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in RobotPrimitive::all() {
            assert_eq!(sample_outcome(p, &prof, &mut rng), OutcomeLevel::SP);
        }
        let prof = named_profile("pi05-aggregate").unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_outcome(RobotPrimitive::Push(Denomination::D5), &prof, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn every_named_profile_is_valid() {
        for name in profile_names() {
            named_profile(&name).unwrap().validate().unwrap();
        }
        assert!(matches!(named_profile("octo-aggregate"), Err(SimError::UnknownProfile(_))));
    }

    #[test]
    fn profile_documents_round_trip() {
        let p = named_profile("rdt-groups").unwrap();
        let text = crate::codec::encode(&p);
        let back: OutcomeProfile = crate::codec::decode(&text).unwrap();
        assert_eq!(crate::codec::encode(&back), text);
    }
}

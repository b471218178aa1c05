use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::TaskId;
use crate::worldsim::{quantize, SkillId, SkillParams, WorldState};

/// Where a transition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Provenance {
    Bootstrap,
    Planner { task: TaskId, round: u32 },
    /// Uniformly sampled exploration data (baseline for planner-collected data).
    Random { round: u32 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Bootstrap => f.write_str("bootstrap"),
            Provenance::Planner { task, round } => write!(f, "planner:task{task}:round{round}"),
            Provenance::Random { round } => write!(f, "random:round{round}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::contract(format!("unknown provenance '{s}'"));
        if s == "bootstrap" {
            return Ok(Provenance::Bootstrap);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let round = |p: &str| p.strip_prefix("round").and_then(|r| r.parse().ok()).ok_or_else(bad);
        match parts.as_slice() {
            ["planner", task, r] => {
                let task = task.strip_prefix("task").ok_or_else(bad)?.parse()?;
                Ok(Provenance::Planner { task, round: round(r)? })
            }
            ["random", r] => Ok(Provenance::Random { round: round(r)? }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Provenance {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Provenance> for String {
    fn from(p: Provenance) -> String {
        p.to_string()
    }
}

/// One executed skill: start state, parameters, terminal state and cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub skill: SkillId,
    pub x0: WorldState,
    pub theta: SkillParams,
    #[serde(rename = "xT")]
    pub xt: WorldState,
    pub cost: f64,
    pub provenance: Provenance,
}

impl TransitionRecord {
    pub fn new(x0: WorldState, theta: SkillParams, xt: WorldState, cost: f64, provenance: Provenance) -> Result<Self> {
        let r = TransitionRecord { skill: theta.skill(), x0, theta, xt, cost, provenance };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(Error::contract(format!("transition cost must be positive, got {}", self.cost)));
        }
        if self.theta.skill() != self.skill {
            return Err(Error::contract("record parameters belong to another skill"));
        }
        let same = self.x0.len() == self.xt.len()
            && self.x0.blocks.iter().zip(&self.xt.blocks).all(|(a, b)| a.color == b.color && a.index == b.index);
        if !same {
            return Err(Error::contract("start and terminal states describe different blocks"));
        }
        Ok(())
    }

    /// Positions at 1 mm; parameters at 1 mm, tilt angles at 0.1 degree.
    pub fn dedup_key(&self) -> Vec<i64> {
        let mm = 1e-3;
        let mut key = vec![self.skill as i64];
        key.extend(self.x0.quantized_key(mm));
        key.extend(self.xt.quantized_key(mm));
        match self.theta {
            SkillParams::PickPlace { block_index, place } => {
                key.push(block_index as i64);
                key.extend(place.map(|v| quantize(v, mm)));
            }
            SkillParams::TraySlide { bin_x } => key.push(quantize(bin_x, mm)),
            SkillParams::TraySweep { start_x } => key.push(quantize(start_x, mm)),
            SkillParams::BinTilt { angle_deg } => key.push(quantize(angle_deg, 0.1)),
        }
        key
    }
}

/// Deduplicated transitions of one skill.
#[derive(Clone, Debug)]
pub struct SkillDataset {
    pub skill: SkillId,
    records: Vec<TransitionRecord>,
    keys: HashSet<Vec<i64>>,
}

impl SkillDataset {
    pub fn new(skill: SkillId) -> Self {
        SkillDataset { skill, records: Vec::new(), keys: HashSet::new() }
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inserts unless a record with the same quantized key exists.
    pub fn insert(&mut self, record: TransitionRecord) -> Result<bool> {
        if record.skill != self.skill {
            return Err(Error::contract(format!("{} record offered to the {} dataset", record.skill, self.skill)));
        }
        record.check()?;
        if !self.keys.insert(record.dedup_key()) {
            return Ok(false);
        }
        self.records.push(record);
        Ok(true)
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = TransitionRecord>) -> Result<usize> {
        let mut n = 0;
        for r in records {
            n += self.insert(r)? as usize;
        }
        Ok(n)
    }

    /// Writes one JSON object per line.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(skill: SkillId, path: &Path) -> Result<Self> {
        let mut ds = SkillDataset::new(skill);
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TransitionRecord = serde_json::from_str(&line)
                .map_err(|e| Error::contract(format!("{}:{}: {e}", path.display(), i + 1)))?;
            ds.insert(r)?;
        }
        Ok(ds)
    }
}

/// Convenience: dedup-insert into the dataset matching each record's skill.
pub fn dedup_insert(dataset: &mut SkillDataset, record: TransitionRecord) -> Result<bool> {
    dataset.insert(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::{apply, BlockFeature, Geometry};

    fn record(dx: f64) -> TransitionRecord {
        let g = Geometry::default();
        let s = WorldState::new(vec![
            BlockFeature { position: [0.40 + dx, -0.20, g.table_rest_z()], color: 0, index: 0 },
            BlockFeature { position: [0.55, -0.05, g.table_rest_z()], color: 1, index: 1 },
        ])
        .unwrap();
        let p = SkillParams::PickPlace { block_index: 0, place: [0.85, -0.15, g.bin_rest_z()] };
        let (n, c) = apply(&s, &p, &g).unwrap();
        TransitionRecord::new(s, p, n, c, Provenance::Bootstrap).unwrap()
    }

    #[test]
    fn duplicates_rejected() {
        let mut d = SkillDataset::new(SkillId::PickPlace);
        assert!(d.insert(record(0.0)).unwrap());
        assert!(!d.insert(record(0.0)).unwrap());
        assert!(d.insert(record(0.005)).unwrap());
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn provenance_strings() {
        for p in [Provenance::Bootstrap, Provenance::Planner { task: TaskId::C, round: 12 }, Provenance::Random { round: 3 }] {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert_eq!(Provenance::Planner { task: TaskId::B, round: 4 }.to_string(), "planner:taskB:round4");
        assert!("planner:taskZ:round1".parse::<Provenance>().is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pp.jsonl");
        let mut d = SkillDataset::new(SkillId::PickPlace);
        d.insert(record(0.0)).unwrap();
        d.insert(record(0.01)).unwrap();
        d.save_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["provenance"], "bootstrap");
        assert_eq!(first["theta"]["type"], "pick_place");
        assert!(first["xT"].is_array());
        let back = SkillDataset::load_jsonl(SkillId::PickPlace, &path).unwrap();
        assert_eq!(back.records(), d.records());
    }

    #[test]
    fn invalid_records_rejected() {
        let r = record(0.0);
        assert!(TransitionRecord::new(r.x0.clone(), r.theta, r.xt.clone(), 0.0, Provenance::Bootstrap).is_err());
        let mut other = r.xt.clone();
        other.blocks[1].color = 0;
        assert!(TransitionRecord::new(r.x0, r.theta, other, 1.0, Provenance::Bootstrap).is_err());
    }
}

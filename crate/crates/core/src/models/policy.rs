use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::instance::LotSizingInstance;
use super::milp::MilpModel;
use super::solver::{SolveStatus, SolverSolution};
use crate::error::{Error, Result};

/// Review periods (1-based) with their order-up-to levels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    levels: BTreeMap<usize, f64>,
}

impl Policy {
    pub fn new(levels: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (t, s) in levels {
            if t == 0 {
                return Err(Error::Policy("review periods are 1-based".into()));
            }
            if !s.is_finite() {
                return Err(Error::Policy(format!("order-up-to level at {t} is not finite")));
            }
            if map.insert(t, s).is_some() {
                return Err(Error::Policy(format!("period {t} listed twice")));
            }
        }
        Ok(Self { levels: map })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn reviews(&self) -> Vec<usize> {
        self.levels.keys().copied().collect()
    }

    pub fn level(&self, t: usize) -> Option<f64> {
        self.levels.get(&t).copied()
    }

    pub fn levels(&self) -> &BTreeMap<usize, f64> {
        &self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Latest review at or before `t`, if any.
    pub fn cycle_start(&self, t: usize) -> Option<usize> {
        self.levels.range(..=t).next_back().map(|(&k, _)| k)
    }

    /// Checks that every review lies within `1..=horizon`.
    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if let Some(&t) = self.levels.keys().next_back() {
            if t > horizon {
                return Err(Error::Policy(format!(
                    "review period {t} exceeds the horizon {horizon}"
                )));
            }
        }
        Ok(())
    }

    /// Parses the display form `{1: 400, 3: 250.5}` or the JSON form
    /// `{"1": 400}`.
    pub fn parse(text: &str) -> Result<Self> {
        let body = text.trim();
        let inner = body
            .strip_prefix('{')
            .and_then(|b| b.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("policy must be wrapped in braces: {text:?}")))?;
        let mut pairs = Vec::new();
        for item in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("policy entry {item:?} lacks ':'")))?;
            let k = k.trim().trim_matches('"');
            let t: usize = k
                .parse()
                .map_err(|_| Error::Parse(format!("bad review period {k:?}")))?;
            let s: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad order-up-to level {:?}", v.trim())))?;
            pairs.push((t, s));
        }
        Self::new(pairs).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (t, s)) in self.levels.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}: {}", format_level(*s))?;
        }
        f.write_str("}")
    }
}

fn format_level(s: f64) -> String {
    let r = (s * 1000.0).round() / 1000.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

const BINARY_THRESHOLD: f64 = 0.5;

/// Reads reviews from `δ` and levels `S_t = Ĩ_t + d̃_t`, after checking that
/// `P_jt` marks the latest review at or before each `t`.
pub fn extract_policy(
    model: &MilpModel,
    sol: &SolverSolution,
    inst: &LotSizingInstance,
) -> Result<Policy> {
    if sol.status != SolveStatus::Optimal && !sol.has_incumbent() {
        return Err(Error::Consistency(format!(
            "no assignment to read a policy from (status {})",
            sol.status
        )));
    }
    let layout = &model.layout;
    let n = layout.horizon;
    if n != inst.horizon() || sol.values.len() != model.variables.len() {
        return Err(Error::ModelIntegrity(
            "solution does not belong to this model and instance".into(),
        ));
    }
    let x = &sol.values;
    let means = inst.means();
    let on = |i: usize| x[i] > BINARY_THRESHOLD;
    let mut latest = None;
    let mut levels = Vec::new();
    for t in 1..=n {
        if on(layout.delta(t)) {
            latest = Some(t);
            levels.push((t, x[layout.inventory(t)] + means[t - 1]));
        }
        // without any review yet the initial stock forms the cycle starting at 1
        let expect = latest.unwrap_or(1);
        for j in 1..=t {
            if on(layout.p(j, t)) != (j == expect) {
                return Err(Error::ModelIntegrity(format!(
                    "P_{j}_{t} = {} disagrees with latest review {expect}",
                    x[layout.p(j, t)]
                )));
            }
        }
    }
    Policy::new(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse_round_trip() {
        let p = Policy::new([(1, 400.0), (3, 116.4485)]).unwrap();
        assert_eq!(p.to_string(), "{1: 400, 3: 116.449}");
        assert_eq!(Policy::parse("{1: 400}").unwrap().to_string(), "{1: 400}");
        assert_eq!(Policy::parse("{\"2\": 5.5, \"4\": 1}").unwrap().reviews(), vec![2, 4]);
        assert_eq!(Policy::parse("{}").unwrap(), Policy::empty());
        assert!(Policy::parse("1: 4").is_err());
        assert!(Policy::parse("{0: 4}").is_err());
    }

    #[test]
    fn json_form_uses_string_keys() {
        let p = Policy::new([(1, 400.0)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "{\"1\":400.0}");
        assert_eq!(serde_json::from_str::<Policy>(&s).unwrap(), p);
    }

    #[test]
    fn cycle_start_finds_latest_review() {
        let p = Policy::new([(2, 1.0), (5, 1.0)]).unwrap();
        assert_eq!(p.cycle_start(1), None);
        assert_eq!(p.cycle_start(4), Some(2));
        assert_eq!(p.cycle_start(9), Some(5));
    }
}

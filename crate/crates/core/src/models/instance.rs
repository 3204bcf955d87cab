use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probdist::DemandProcess;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceMeasure {
    Alpha,
    Penalty,
    BetaCyc,
    Beta,
}

impl ServiceMeasure {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Penalty => "penalty",
            Self::BetaCyc => "beta_cyc",
            Self::Beta => "beta",
        }
    }

    pub const ALL: [ServiceMeasure; 4] = [Self::Alpha, Self::Penalty, Self::BetaCyc, Self::Beta];
}

impl fmt::Display for ServiceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shortage {
    Backorder,
    LostSales,
}

impl Shortage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Backorder => "backorder",
            Self::LostSales => "lost_sales",
        }
    }
}

impl fmt::Display for Shortage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of the optimal objective a model bounds: cost for backorder
/// models, profit for lost-sales models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    LowerBound,
    UpperBound,
}

impl BoundDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LowerBound => "lb",
            Self::UpperBound => "ub",
        }
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyBasis {
    #[default]
    PerPeriod,
    PerUnitShort,
}

/// Target service, or the penalty scheme that replaces it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Service {
    Alpha(f64),
    Penalty,
    BetaCyc(f64),
    Beta(f64),
}

impl Service {
    pub fn measure(self) -> ServiceMeasure {
        match self {
            Self::Alpha(_) => ServiceMeasure::Alpha,
            Self::Penalty => ServiceMeasure::Penalty,
            Self::BetaCyc(_) => ServiceMeasure::BetaCyc,
            Self::Beta(_) => ServiceMeasure::Beta,
        }
    }

    pub fn level(self) -> Option<f64> {
        match self {
            Self::Alpha(x) | Self::BetaCyc(x) | Self::Beta(x) => Some(x),
            Self::Penalty => None,
        }
    }

    pub fn from_parts(measure: ServiceMeasure, level: Option<f64>) -> Result<Self> {
        let need = |l: Option<f64>| {
            l.ok_or_else(|| Error::Config(format!("service measure {measure} needs a level")))
        };
        Ok(match measure {
            ServiceMeasure::Alpha => Self::Alpha(need(level)?),
            ServiceMeasure::BetaCyc => Self::BetaCyc(need(level)?),
            ServiceMeasure::Beta => Self::Beta(need(level)?),
            ServiceMeasure::Penalty => {
                if level.is_some() {
                    return Err(Error::Config("penalty measure takes no level".into()));
                }
                Self::Penalty
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Costs {
    /// Fixed cost per order.
    pub a: f64,
    /// Unit purchase cost.
    pub v: f64,
    /// Holding cost per unit per period.
    pub h: f64,
    /// Shortage penalty per unit per period, or per unit short.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub b: f64,
    /// Selling price, lost sales only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct LotSizingInstance {
    pub costs: Costs,
    pub initial_inventory: f64,
    pub service: Service,
    pub shortage: Shortage,
    pub penalty_basis: PenaltyBasis,
    pub demand: DemandProcess,
}

impl LotSizingInstance {
    pub fn new(
        costs: Costs,
        initial_inventory: f64,
        service: Service,
        shortage: Shortage,
        demand: DemandProcess,
    ) -> Result<Self> {
        let inst = Self {
            costs,
            initial_inventory,
            service,
            shortage,
            penalty_basis: PenaltyBasis::PerPeriod,
            demand,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_penalty_basis(mut self, basis: PenaltyBasis) -> Result<Self> {
        self.penalty_basis = basis;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.costs;
        for (name, x) in [("a", c.a), ("v", c.v), ("h", c.h), ("b", c.b)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::Domain(format!("cost {name} must be finite and >= 0 (got {x})")));
            }
        }
        if !self.initial_inventory.is_finite() {
            return Err(Error::Domain("initial inventory must be finite".into()));
        }
        if let Some(level) = self.service.level() {
            // a zero fill-rate target is allowed and simply switches the cap off
            let lowest_ok = self.service.measure() != ServiceMeasure::Alpha && level == 0.0;
            if !(lowest_ok || (level > 0.0 && level < 1.0)) {
                return Err(Error::Domain(format!(
                    "service level must lie in (0,1) (got {level})"
                )));
            }
        }
        match self.shortage {
            Shortage::LostSales => {
                let s = c.s.ok_or_else(|| {
                    Error::Config("lost-sales instances need a selling price s".into())
                })?;
                if !(s.is_finite() && s >= c.v) {
                    return Err(Error::Domain(format!(
                        "selling price {s} must be at least the unit cost {}",
                        c.v
                    )));
                }
                if self.initial_inventory < 0.0 {
                    return Err(Error::Domain(
                        "lost-sales instances cannot start with backorders".into(),
                    ));
                }
            }
            Shortage::Backorder => {
                if self.penalty_basis == PenaltyBasis::PerUnitShort {
                    return Err(Error::Config(
                        "per-unit-short penalties apply to lost sales only".into(),
                    ));
                }
            }
        }
        if self.penalty_basis == PenaltyBasis::PerUnitShort
            && self.service.measure() != ServiceMeasure::Penalty
        {
            return Err(Error::Config(
                "per-unit-short penalties need the penalty measure".into(),
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.demand.horizon()
    }

    /// Expected demand per period.
    pub fn means(&self) -> Vec<f64> {
        self.demand.means()
    }

    /// Margin `s − v` (lost sales).
    pub fn margin(&self) -> f64 {
        self.costs.s.unwrap_or(0.0) - self.costs.v
    }

    pub fn variant(&self, direction: BoundDirection) -> ModelVariant {
        ModelVariant {
            measure: self.service.measure(),
            shortage: self.shortage,
            direction,
            penalty_basis: self.penalty_basis,
        }
    }
}

/// One cell of the model matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelVariant {
    pub measure: ServiceMeasure,
    pub shortage: Shortage,
    pub direction: BoundDirection,
    pub penalty_basis: PenaltyBasis,
}

impl ModelVariant {
    pub fn validate(&self) -> Result<()> {
        if self.penalty_basis == PenaltyBasis::PerUnitShort
            && (self.shortage != Shortage::LostSales || self.measure != ServiceMeasure::Penalty)
        {
            return Err(Error::Config(
                "per-unit-short penalties need lost sales and the penalty measure".into(),
            ));
        }
        Ok(())
    }

    /// Objective is maximized profit rather than minimized cost.
    pub fn maximizes(&self) -> bool {
        self.shortage == Shortage::LostSales
    }

    /// Whether the model carries the upper (Edmundson-Madanski) inventory
    /// family. Cost lower bounds and profit upper bounds use the Jensen family.
    pub fn uses_upper_family(&self) -> bool {
        match self.shortage {
            Shortage::Backorder => self.direction == BoundDirection::UpperBound,
            Shortage::LostSales => self.direction == BoundDirection::LowerBound,
        }
    }

    pub fn has_backorder_vars(&self) -> bool {
        self.measure != ServiceMeasure::Alpha
    }

    pub fn has_cycle_vars(&self) -> bool {
        self.measure == ServiceMeasure::Beta || self.penalty_basis == PenaltyBasis::PerUnitShort
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}{}",
            self.measure,
            self.shortage,
            self.direction.as_str(),
            if self.penalty_basis == PenaltyBasis::PerUnitShort {
                "/per_unit_short"
            } else {
                ""
            }
        )
    }
}

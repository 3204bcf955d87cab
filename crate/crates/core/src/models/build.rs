//! Certainty-equivalent MILP builders for every cell of the model matrix.

use super::instance::{
    BoundDirection, LotSizingInstance, ModelVariant, PenaltyBasis, Service, ServiceMeasure,
    Shortage,
};
use super::milp::{MilpModel, Sense, VarLayout};
use crate::error::{Error, Result};
use crate::linloss::{LinearizationSet, LossLinearization};
use crate::probdist::ConvolutionTable;

/// How the lost-sales row tying the inventory jump to `Q̃_t` is written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OrderLink {
    /// `Ĩ_t + d̃_t − Ĩ_{t−1} <= Q̃_t·M`.
    #[default]
    Quantity,
    /// `Ĩ_t + d̃_t − Ĩ_{t−1} <= δ_t·M`.
    Review,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    pub order_link: OrderLink,
}

/// Everything a builder reads: the instance, its range sums and their
/// linearizations.
#[derive(Clone, Copy)]
pub struct ModelInputs<'a> {
    pub instance: &'a LotSizingInstance,
    pub convolutions: &'a ConvolutionTable,
    pub linearizations: &'a LinearizationSet,
    pub options: BuildOptions,
}

impl<'a> ModelInputs<'a> {
    pub fn new(
        instance: &'a LotSizingInstance,
        convolutions: &'a ConvolutionTable,
        linearizations: &'a LinearizationSet,
    ) -> Self {
        Self {
            instance,
            convolutions,
            linearizations,
            options: BuildOptions::default(),
        }
    }

    pub fn lin(&self, j: usize, t: usize) -> Result<&'a LossLinearization> {
        self.linearizations.get(j, t).ok_or_else(|| {
            Error::Construction(format!("missing linearization for range ({j}, {t})"))
        })
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.instance.horizon();
        if self.convolutions.horizon() != n || self.linearizations.horizon() != n {
            return Err(Error::Construction(format!(
                "horizon mismatch: instance {n}, convolutions {}, linearizations {}",
                self.convolutions.horizon(),
                self.linearizations.horizon()
            )));
        }
        for t in 1..=n {
            for j in 1..=t {
                self.lin(j, t)?;
            }
        }
        Ok(())
    }

    /// Horizon-wide big-M for the reorder and order-linking rows: exceeds any
    /// inventory jump an optimal plan can need.
    pub fn big_m(&self) -> f64 {
        let n = self.instance.horizon();
        let means = self.instance.means();
        let mut reach = 0.0_f64;
        let quantile_level = match self.instance.service {
            Service::Alpha(a) => a.max(0.9999),
            _ => 0.9999,
        };
        for t in 1..=n {
            for j in 1..=t {
                let law = self.convolutions.law(j, t);
                reach = reach.max(law.quantile_unchecked(quantile_level));
                if let Some(l) = self.linearizations.get(j, t) {
                    let top = l.conditional_means.last().copied().unwrap_or(0.0);
                    reach = reach.max(top + l.max_error);
                }
            }
        }
        let scale = self.instance.initial_inventory.abs() + means.iter().map(|m| m.abs()).sum::<f64>();
        (scale + reach.max(0.0)).max(1.0)
    }

    /// Relaxation constant for the end-of-cycle backorder rows at period `t`.
    pub fn cycle_big_m(&self, t: usize) -> f64 {
        let i0 = self.instance.initial_inventory;
        let spread: f64 = self.instance.demand.periods()[..t]
            .iter()
            .map(|d| d.mean().abs() + d.stdev())
            .sum();
        let worst_error = (1..=t)
            .filter_map(|j| self.linearizations.get(j, t))
            .map(|l| l.max_error)
            .fold(0.0, f64::max);
        (-i0).max(0.0) + spread + worst_error
    }
}

pub fn build_alpha_model(inputs: &ModelInputs, direction: BoundDirection) -> Result<MilpModel> {
    expect_measure(inputs, ServiceMeasure::Alpha, Shortage::Backorder)?;
    assemble(inputs, inputs.instance.variant(direction))
}

pub fn build_penalty_model(inputs: &ModelInputs, direction: BoundDirection) -> Result<MilpModel> {
    expect_measure(inputs, ServiceMeasure::Penalty, Shortage::Backorder)?;
    assemble(inputs, inputs.instance.variant(direction))
}

pub fn build_beta_cyc_model(inputs: &ModelInputs, direction: BoundDirection) -> Result<MilpModel> {
    expect_measure(inputs, ServiceMeasure::BetaCyc, Shortage::Backorder)?;
    assemble(inputs, inputs.instance.variant(direction))
}

pub fn build_beta_model(inputs: &ModelInputs, direction: BoundDirection) -> Result<MilpModel> {
    expect_measure(inputs, ServiceMeasure::Beta, Shortage::Backorder)?;
    assemble(inputs, inputs.instance.variant(direction))
}

pub fn build_lost_sales_model(inputs: &ModelInputs, variant: ModelVariant) -> Result<MilpModel> {
    if variant.shortage != Shortage::LostSales || inputs.instance.shortage != Shortage::LostSales {
        return Err(Error::Config("lost-sales builder needs a lost-sales instance".into()));
    }
    if variant.measure != inputs.instance.service.measure()
        || variant.penalty_basis != inputs.instance.penalty_basis
    {
        return Err(Error::Config(format!(
            "variant {} does not match the instance",
            variant.label()
        )));
    }
    assemble(inputs, variant)
}

/// Dispatches on the instance's measure and shortage setting.
pub fn build_model(inputs: &ModelInputs, direction: BoundDirection) -> Result<MilpModel> {
    assemble(inputs, inputs.instance.variant(direction))
}

fn expect_measure(inputs: &ModelInputs, measure: ServiceMeasure, shortage: Shortage) -> Result<()> {
    let inst = inputs.instance;
    if inst.service.measure() != measure || inst.shortage != shortage {
        return Err(Error::Config(format!(
            "instance has measure {} with {}, builder expects {measure} with {shortage}",
            inst.service.measure(),
            inst.shortage
        )));
    }
    Ok(())
}

fn assemble(inputs: &ModelInputs, variant: ModelVariant) -> Result<MilpModel> {
    variant.validate()?;
    inputs.check()?;
    let inst = inputs.instance;
    let n = inst.horizon();
    let c = inst.costs;
    let means = inst.means();
    let range_mean = |j: usize, t: usize| -> f64 { means[j - 1..t].iter().sum() };
    let i0 = inst.initial_inventory;
    let lost = variant.shortage == Shortage::LostSales;
    let upper = variant.uses_upper_family();
    let fam = if upper { "ub" } else { "lb" };
    let w = inputs.linearizations.segments();
    let big_m = inputs.big_m();
    // objective signs: costs are minimized, profit maximized
    let sign = if lost { -1.0 } else { 1.0 };
    let penalty = inst.service.measure() == ServiceMeasure::Penalty;
    let per_unit_short = variant.penalty_basis == PenaltyBasis::PerUnitShort;

    let mut m = MilpModel::new(if lost { Sense::Maximize } else { Sense::Minimize });
    m.variant = Some(variant);
    m.big_m = big_m;
    m.objective_constant = if lost {
        c.s.unwrap_or(0.0) * i0
    } else {
        -c.v * i0 + c.v * means.iter().sum::<f64>()
    };

    let mut layout = VarLayout {
        horizon: n,
        ..Default::default()
    };
    for t in 1..=n {
        layout.delta.push(m.add_binary(format!("delta_{t}"), sign * c.a));
    }
    for t in 1..=n {
        for j in 1..=t {
            layout.p.push(m.add_binary(format!("P_{j}_{t}"), 0.0));
        }
    }
    for t in 1..=n {
        let obj = if !lost && t == n { c.v } else { 0.0 };
        layout
            .inventory
            .push(m.add_var(format!("I_{t}"), f64::NEG_INFINITY, f64::INFINITY, obj));
    }
    for t in 1..=n {
        let mut obj = sign * c.h;
        if lost && t == n {
            obj -= c.s.unwrap_or(0.0);
        }
        layout
            .on_hand
            .push(m.add_var(format!("I{fam}_{t}"), 0.0, f64::INFINITY, obj));
    }
    if variant.has_backorder_vars() {
        let obj = if penalty && !per_unit_short { sign * c.b } else { 0.0 };
        layout.backorders = Some(
            (1..=n)
                .map(|t| m.add_var(format!("B{fam}_{t}"), 0.0, f64::INFINITY, obj))
                .collect(),
        );
    }
    if variant.has_cycle_vars() {
        let obj = if per_unit_short { sign * c.b } else { 0.0 };
        layout.cycle_backorders = Some(
            (1..=n)
                .map(|t| m.add_var(format!("C{fam}_{t}"), 0.0, f64::INFINITY, obj))
                .collect(),
        );
    }
    if lost {
        let margin = inst.margin();
        layout.orders = Some(
            (1..=n)
                .map(|t| m.add_var(format!("Q_{t}"), 0.0, f64::INFINITY, margin))
                .collect(),
        );
    }

    let delta = |t: usize| layout.delta(t);
    let p = |j: usize, t: usize| layout.p(j, t);
    let inv = |t: usize| layout.inventory(t);
    let on_hand = |t: usize| layout.on_hand(t);

    for t in 1..=n {
        let d = means[t - 1];
        // Ĩ_t − Ĩ_{t−1} >= −d̃_t, with Ĩ_0 = I0 moved to the right-hand side
        let (prev_terms, prev_const) = if t == 1 {
            (vec![], i0)
        } else {
            (vec![(inv(t - 1), -1.0)], 0.0)
        };
        let mut terms = vec![(inv(t), 1.0)];
        terms.extend(prev_terms.iter().copied());
        m.ge(format!("balance_{t}"), terms.clone(), prev_const - d);

        if lost {
            let q = layout.orders.as_ref().unwrap()[t - 1];
            let (prev_oh_terms, prev_oh_const) = if t == 1 {
                (vec![], i0.max(0.0))
            } else {
                (vec![(on_hand(t - 1), 1.0)], 0.0)
            };
            // Q̃_t − (Ĩ_t + d̃_t − Ĩ^x_{t−1}) within ±(1−δ_t)M
            let mut link = vec![(q, 1.0), (inv(t), -1.0)];
            link.extend(prev_oh_terms.iter().copied());
            let base = d - prev_oh_const;
            let mut lo = link.clone();
            lo.push((delta(t), -big_m));
            m.ge(format!("order_lo_{t}"), lo, base - big_m);
            let mut hi = link;
            hi.push((delta(t), big_m));
            m.le(format!("order_hi_{t}"), hi, base + big_m);

            let mut jump = terms.clone();
            match inputs.options.order_link {
                OrderLink::Quantity => jump.push((q, -big_m)),
                OrderLink::Review => jump.push((delta(t), -big_m)),
            }
            m.le(format!("reorder_{t}"), jump, prev_const - d);
            m.le(format!("order_gate_{t}"), vec![(q, 1.0), (delta(t), -big_m)], 0.0);
        } else {
            let mut jump = terms;
            jump.push((delta(t), -big_m));
            m.le(format!("reorder_{t}"), jump, prev_const - d);
        }

        // replenishment-cycle selectors
        m.eq(
            format!("cycle_{t}"),
            (1..=t).map(|j| (p(j, t), 1.0)).collect(),
            1.0,
        );
        for j in 1..=t {
            let mut row = vec![(p(j, t), 1.0), (delta(j), -1.0)];
            row.extend((j + 1..=t).map(|k| (delta(k), 1.0)));
            m.ge(format!("latest_{j}_{t}"), row, 0.0);
            if j >= 2 {
                m.le(format!("reviewed_{j}_{t}"), vec![(p(j, t), 1.0), (delta(j), -1.0)], 0.0);
            }
        }

        if let Service::Alpha(alpha) = inst.service {
            let mut row = vec![(inv(t), 1.0)];
            for j in 1..=t {
                let q = inputs.convolutions.law(j, t).quantile(alpha)?;
                row.push((p(j, t), -(q - range_mean(j, t))));
            }
            m.ge(format!("alpha_{t}"), row, 0.0);
        }

        // piecewise bounds on E[max(I_t, 0)] and, through the loss identity,
        // on E[max(−I_t, 0)]
        let backorder = layout.backorders.as_ref().map(|b| b[t - 1]);
        for i in 1..=w {
            let mut row_terms: Vec<(usize, f64)> = Vec::with_capacity(t + 1);
            let mut slope = 0.0;
            for j in 1..=t {
                let lin = inputs.lin(j, t)?;
                let (cj, mj) = lin.segment_coefficients()[i - 1];
                slope = cj;
                let mut coef = cj * range_mean(j, t) - mj;
                if upper {
                    coef += lin.max_error;
                }
                row_terms.push((p(j, t), -coef));
            }
            let mut row = vec![(on_hand(t), 1.0), (inv(t), -slope)];
            row.extend(row_terms.iter().copied());
            m.ge(format!("piece{fam}_I_{t}_{i}"), row, 0.0);
            if let Some(b) = backorder {
                let mut row = vec![(b, 1.0), (inv(t), 1.0 - slope)];
                row.extend(row_terms.iter().copied());
                m.ge(format!("piece{fam}_B_{t}_{i}"), row, 0.0);
            }
        }
        let floor: Vec<(usize, f64)> = if upper {
            (1..=t)
                .map(|j| Ok((p(j, t), -inputs.lin(j, t)?.max_error)))
                .collect::<Result<_>>()?
        } else {
            vec![]
        };
        if upper {
            let mut row = vec![(on_hand(t), 1.0)];
            row.extend(floor.iter().copied());
            m.ge(format!("piece{fam}_I_{t}_0"), row, 0.0);
        }
        if let Some(b) = backorder {
            let mut row = vec![(b, 1.0), (inv(t), 1.0)];
            row.extend(floor.iter().copied());
            m.ge(format!("piece{fam}_B_{t}_0"), row, 0.0);
        }

        if let Service::BetaCyc(beta) = inst.service {
            let mut row = vec![(backorder.unwrap(), 1.0)];
            row.extend((1..=t).map(|j| (p(j, t), -(1.0 - beta) * range_mean(j, t))));
            m.le(format!("fill_{t}"), row, 0.0);
        }
    }

    if let Some(cyc) = layout.cycle_backorders.clone() {
        let back = layout.backorders.clone().unwrap();
        for t in 1..n {
            let mc = inputs.cycle_big_m(t);
            m.ge(
                format!("cycle_end_{t}"),
                vec![(cyc[t - 1], 1.0), (back[t - 1], -1.0), (delta(t + 1), -mc)],
                -mc,
            );
        }
        m.eq(
            format!("cycle_end_{n}"),
            vec![(cyc[n - 1], 1.0), (back[n - 1], -1.0)],
            0.0,
        );
        if let Service::Beta(beta) = inst.service {
            m.le(
                "fill_horizon",
                cyc.iter().map(|&k| (k, 1.0)).collect(),
                (1.0 - beta) * means.iter().sum::<f64>(),
            );
        }
    }

    m.layout = layout;
    Ok(m)
}

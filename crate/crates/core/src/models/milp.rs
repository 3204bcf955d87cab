use std::fmt::Write as _;

use super::instance::ModelVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub objective: f64,
}

/// `lower <= Σ coef·x <= upper`.
#[derive(Clone, Debug)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * values[i]).sum()
    }
}

/// Column indices of the structured variable families, periods 1-based.
#[derive(Clone, Debug, Default)]
pub struct VarLayout {
    pub horizon: usize,
    pub delta: Vec<usize>,
    /// `P_jt` stored at `t(t−1)/2 + j − 1`.
    pub p: Vec<usize>,
    pub inventory: Vec<usize>,
    /// `Ĩ^lb_t` or `Ĩ^ub_t`, depending on the family in use.
    pub on_hand: Vec<usize>,
    pub backorders: Option<Vec<usize>>,
    pub cycle_backorders: Option<Vec<usize>>,
    pub orders: Option<Vec<usize>>,
}

impl VarLayout {
    pub fn delta(&self, t: usize) -> usize {
        self.delta[t - 1]
    }

    pub fn p(&self, j: usize, t: usize) -> usize {
        self.p[t * (t - 1) / 2 + j - 1]
    }

    pub fn inventory(&self, t: usize) -> usize {
        self.inventory[t - 1]
    }

    pub fn on_hand(&self, t: usize) -> usize {
        self.on_hand[t - 1]
    }
}

#[derive(Clone, Debug)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub sense: Sense,
    pub objective_constant: f64,
    pub layout: VarLayout,
    pub variant: Option<ModelVariant>,
    /// Big-M used by the reorder and linking rows.
    pub big_m: f64,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            rows: Vec::new(),
            sense,
            objective_constant: 0.0,
            layout: VarLayout::default(),
            variant: None,
            big_m: 0.0,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
            objective,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
            objective,
        });
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, lower: f64, upper: f64) {
        // merge duplicate columns and drop zeros
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.iter_mut().find(|(k, _)| *k == i) {
                Some(slot) => slot.1 += c,
                None => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.rows.push(Row {
            name: name.into(),
            terms: merged,
            lower,
            upper,
        });
    }

    pub fn ge(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(name, terms, rhs, f64::INFINITY);
    }

    pub fn le(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(name, terms, f64::NEG_INFINITY, rhs);
    }

    pub fn eq(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(name, terms, rhs, rhs);
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.binary).count()
    }

    pub fn rows_with_prefix(&self, prefix: &str) -> usize {
        self.rows.iter().filter(|r| r.name.starts_with(prefix)).count()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Objective value including the constant term.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.objective * x)
                .sum::<f64>()
    }

    /// Largest bound or row violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in &self.rows {
            let a = r.activity(values);
            worst = worst.max(r.lower - a).max(a - r.upper);
        }
        worst
    }

    /// CPLEX LP text; the objective constant appears as a comment.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::new();
        let name = |i: usize| self.variables[i].name.as_str();
        let expr = |terms: &[(usize, f64)]| -> String {
            if terms.is_empty() {
                return "0 x_zero".into();
            }
            let mut out = String::new();
            for (k, &(i, c)) in terms.iter().enumerate() {
                let sign = match (k, c < 0.0) {
                    (0, true) => "-",
                    (0, false) => "",
                    (_, true) => " - ",
                    (_, false) => " + ",
                };
                let _ = write!(out, "{sign}{} {}", c.abs(), name(i));
            }
            out
        };
        let _ = writeln!(s, "\\ objective constant: {}", self.objective_constant);
        let _ = writeln!(
            s,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        );
        let obj: Vec<(usize, f64)> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.objective != 0.0)
            .map(|(i, v)| (i, v.objective))
            .collect();
        let _ = writeln!(s, " obj: {}", expr(&obj));
        let _ = writeln!(s, "Subject To");
        for r in &self.rows {
            let e = expr(&r.terms);
            if r.lower == r.upper {
                let _ = writeln!(s, " {}: {e} = {}", r.name, r.lower);
            } else {
                if r.lower.is_finite() {
                    let _ = writeln!(s, " {}_lo: {e} >= {}", r.name, r.lower);
                }
                if r.upper.is_finite() {
                    let _ = writeln!(s, " {}_up: {e} <= {}", r.name, r.upper);
                }
            }
        }
        let _ = writeln!(s, "Bounds");
        for v in self.variables.iter().filter(|v| !v.binary) {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(s, " {} free", v.name);
                }
                (true, false) => {
                    let _ = writeln!(s, " {} >= {}", v.name, v.lower);
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= {} <= {}", v.name, v.upper);
                }
                (true, true) => {
                    let _ = writeln!(s, " {} <= {} <= {}", v.lower, v.name, v.upper);
                }
            }
        }
        let bins: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.binary)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(s, "Binaries");
            for chunk in bins.chunks(10) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        let _ = writeln!(s, "End");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicate_terms() {
        let mut m = MilpModel::new(Sense::Minimize);
        let x = m.add_var("x", 0.0, 10.0, 1.0);
        let y = m.add_binary("y", 2.0);
        m.ge("r", vec![(x, 1.0), (y, 2.0), (x, 0.5), (y, -2.0)], 1.0);
        assert_eq!(m.rows[0].terms, vec![(x, 1.5)]);
        assert_eq!(m.num_binaries(), 1);
        assert_eq!(m.objective_value(&[1.0, 1.0]), 3.0);
        assert!(m.max_violation(&[0.0, 0.0]) > 0.9);
    }

    #[test]
    fn lp_export_lists_sections() {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = m.add_binary("y", -3.0);
        m.le("cap", vec![(x, 1.0), (y, -5.0)], 0.0);
        let lp = m.to_lp_format();
        for needle in ["Maximize", "obj: 1 x - 3 y", "cap_up: 1 x - 5 y <= 0", "x free", "Binaries", "End"] {
            assert!(lp.contains(needle), "missing {needle:?} in\n{lp}");
        }
    }
}

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Where a constraint row came from.
///
/// Sampled rows are the unit of account for support and complexity counting:
/// removing sample `i` removes every row tagged with `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    Structural,
    Sample(usize),
    SampleHull { sample: usize, point: usize },
}

impl RowOrigin {
    pub fn sample(&self) -> Option<usize> {
        match *self {
            RowOrigin::Structural => None,
            RowOrigin::Sample(i) => Some(i),
            RowOrigin::SampleHull { sample, .. } => Some(sample),
        }
    }

    pub fn is_sampled(&self) -> bool {
        !matches!(self, RowOrigin::Structural)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Sparse coefficients, sorted by variable index, no duplicates.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub origin: RowOrigin,
}

impl Row {
    pub fn new(mut coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, origin: RowOrigin) -> Self {
        coeffs.sort_by_key(|&(j, _)| j);
        coeffs.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        coeffs.retain(|&(_, a)| a != 0.0);
        Row {
            coeffs,
            sense,
            rhs,
            origin,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }

    /// Signed distance to the boundary, non-negative when satisfied.
    pub fn slack(&self, activity: f64) -> f64 {
        match self.sense {
            Sense::Le => self.rhs - activity,
            Sense::Ge => activity - self.rhs,
            Sense::Eq => -(activity - self.rhs).abs(),
        }
    }

    /// Left-hand side pattern: rows sharing it differ only in sense/rhs.
    pub(crate) fn pattern_key(&self) -> (Sense, Vec<(usize, u64)>) {
        (
            self.sense,
            self.coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect(),
        )
    }

    /// Content key that ignores the origin tag.
    pub(crate) fn content_key(&self) -> (Sense, Vec<(usize, u64)>, u64) {
        let (sense, pattern) = self.pattern_key();
        (sense, pattern, self.rhs.to_bits())
    }
}

/// A linear program `min c·x` over box-bounded variables and tagged rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    /// Weights of the second-stage tie-break objective; `None` means all ones.
    pub tie_break: Option<Vec<f64>>,
    pub var_names: Vec<String>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
            tie_break: None,
            var_names: (0..num_vars).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, origin: RowOrigin) {
        self.rows.push(Row::new(coeffs, sense, rhs, origin));
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        ensure(self.lower.len() == n && self.upper.len() == n, || {
            "bound vectors do not match the objective length".into()
        })?;
        ensure(self.var_names.len() == n, || "variable names do not match".into())?;
        if let Some(w) = &self.tie_break {
            ensure(w.len() == n, || "tie-break weights do not match".into())?;
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            ensure(!l.is_nan() && !u.is_nan() && l <= u && l < f64::INFINITY && u > f64::NEG_INFINITY, || {
                format!("variable {j} has invalid bounds [{l}, {u}]")
            })?;
        }
        ensure(self.objective.iter().all(|c| c.is_finite()), || {
            "objective has non-finite coefficients".into()
        })?;
        for (r, row) in self.rows.iter().enumerate() {
            ensure(row.rhs.is_finite(), || format!("row {r} has a non-finite rhs"))?;
            for &(j, a) in &row.coeffs {
                ensure(j < n && a.is_finite(), || format!("row {r} references bad column {j}"))?;
            }
        }
        Ok(())
    }

    pub fn sampled_rows(&self, sample: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.origin.sample() == Some(sample))
            .map(|(i, _)| i)
    }

    /// Writes the program in CPLEX LP text format for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ generated by vess\nMinimize\n obj:");
        write_linear(&mut out, self.objective.iter().copied().enumerate(), &self.var_names);
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let tag = match row.origin {
                RowOrigin::Structural => format!("c{r}"),
                RowOrigin::Sample(i) => format!("s{i}_c{r}"),
                RowOrigin::SampleHull { sample, point } => format!("s{sample}_h{point}_c{r}"),
            };
            let _ = write!(out, " {tag}:");
            write_linear(&mut out, row.coeffs.iter().copied(), &self.var_names);
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {:?}", row.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = &self.var_names[j];
            match (l.is_finite(), u.is_finite()) {
                (true, true) if l == u => {
                    let _ = writeln!(out, " {name} = {l:?}");
                }
                (true, true) => {
                    let _ = writeln!(out, " {l:?} <= {name} <= {u:?}");
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {l:?}");
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {u:?}");
                }
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

fn write_linear(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut any = false;
    for (j, a) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?} {}", a.abs(), names[j]);
        any = true;
    }
    if !any {
        out.push_str(" 0 x0");
    }
}

use crate::SolverError;

/// Coefficients larger than this in magnitude are rejected.
const SCALE_GUARD: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program in row form: `opt c·x` s.t. `rows`, `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: ObjectiveSense,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(objective: ObjectiveSense) -> Self {
        Self { objective, columns: Vec::new(), rows: Vec::new() }
    }

    pub fn add_column(&mut self, lower: f64, upper: f64, cost: f64, integer: bool) -> usize {
        self.columns.push(Column { lower, upper, cost, integer });
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn has_integers(&self) -> bool {
        self.columns.iter().any(|c| c.integer)
    }

    /// Copy with every integrality flag cleared.
    pub fn relaxed(&self) -> Self {
        let mut lp = self.clone();
        for c in &mut lp.columns {
            c.integer = false;
        }
        lp
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.columns.iter().zip(values).map(|(c, v)| c.cost * v).sum()
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(values)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.columns.is_empty() {
            return Err(SolverError::InvalidModel("model has no variables".into()));
        }
        for (j, c) in self.columns.iter().enumerate() {
            if c.lower.is_nan() || c.upper.is_nan() || !c.cost.is_finite() {
                return Err(SolverError::InvalidModel(format!("column {j} has NaN data")));
            }
            if c.lower > c.upper {
                return Err(SolverError::InvalidModel(format!(
                    "column {j} has lower bound {} above upper bound {}",
                    c.lower, c.upper
                )));
            }
            if c.lower == f64::INFINITY || c.upper == f64::NEG_INFINITY {
                return Err(SolverError::InvalidModel(format!("column {j} has an empty domain")));
            }
            if c.integer && !(c.lower.is_finite() && c.upper.is_finite()) {
                return Err(SolverError::InvalidModel(format!(
                    "integer column {j} needs finite bounds"
                )));
            }
            let big = |v: f64| v.is_finite() && v.abs() > SCALE_GUARD;
            if c.cost.abs() > SCALE_GUARD || big(c.lower) || big(c.upper) {
                return Err(SolverError::InvalidModel(format!("column {j} exceeds scale guard")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() || r.rhs.abs() > SCALE_GUARD {
                return Err(SolverError::InvalidModel(format!("row {i} has bad rhs {}", r.rhs)));
            }
            for &(j, a) in &r.coeffs {
                if j >= self.columns.len() {
                    return Err(SolverError::InvalidModel(format!(
                        "row {i} references undeclared column {j}"
                    )));
                }
                if !a.is_finite() || a.abs() > SCALE_GUARD {
                    return Err(SolverError::InvalidModel(format!(
                        "row {i} has coefficient {a} on column {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

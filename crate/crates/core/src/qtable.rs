//! Dense |S|×|A| action-value tables, comparison metrics and the text
//! persistence format.
//!
//! File format: a header line `qtable v1 <rows> <cols>` followed by one line
//! per state holding the action values separated by single spaces. Values
//! are written with the shortest representation that parses back to the
//! identical `f64`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: DMatrix<f64>,
}

impl QTable {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let rows = values.nrows().max(1);
            return Err(Error::NonFinite(format!(
                "q-table entry ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            values: DMatrix::zeros(states, actions),
        }
    }

    pub fn constant(states: usize, actions: usize, c: f64) -> Self {
        Self {
            values: DMatrix::from_element(states, actions, c),
        }
    }

    /// Entries drawn uniformly from [0, 1).
    pub fn random_uniform(states: usize, actions: usize, seed: u64) -> Self {
        let mut rng = seed::rng_from(seed);
        // fill row by row so the layout of the random stream matches the
        // on-disk order
        let mut values = DMatrix::zeros(states, actions);
        for s in 0..states {
            for a in 0..actions {
                values[(s, a)] = rng.random::<f64>();
            }
        }
        Self { values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Parse("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn states(&self) -> usize {
        self.values.nrows()
    }

    pub fn actions(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[(s, a)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    /// max_b Q(s, b) for every state.
    pub fn state_values(&self) -> Vec<f64> {
        (0..self.states())
            .map(|s| {
                self.values
                    .row(s)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Greedy action per state; ties go to the lowest action index.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.states())
            .map(|s| {
                let row = self.values.row(s);
                let mut best = 0;
                for a in 1..row.len() {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    pub fn max_value(&self) -> f64 {
        self.values.max()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20 + 32);
        let _ = writeln!(out, "qtable v1 {} {}", self.states(), self.actions());
        for s in 0..self.states() {
            for a in 0..self.actions() {
                if a > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{:?}", self.values[(s, a)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (rows, cols) = match fields.as_slice() {
            ["qtable", "v1", r, c] => (
                r.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("row count: {e}")))?,
                c.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("column count: {e}")))?,
            ),
            _ => return Err(Error::Parse(format!("bad header `{header}`"))),
        };
        let mut values = DMatrix::zeros(rows, cols);
        for s in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {s}")))?;
            let mut count = 0;
            for (a, tok) in line.split_whitespace().enumerate() {
                if a >= cols {
                    return Err(Error::Parse(format!("row {s} has too many values")));
                }
                values[(s, a)] = tok
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {s}, column {a}: {e}")))?;
                count += 1;
            }
            if count != cols {
                return Err(Error::Parse(format!(
                    "row {s} has {count} values, expected {cols}"
                )));
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after last row".into()));
        }
        Self::new(values)
    }
}

fn check_shapes(q1: &QTable, q2: &QTable) -> Result<()> {
    if q1.shape() != q2.shape() {
        return Err(Error::ShapeMismatch {
            left: q1.shape(),
            right: q2.shape(),
        });
    }
    Ok(())
}

/// Largest absolute entrywise difference.
pub fn sup_error(q1: &QTable, q2: &QTable) -> Result<f64> {
    check_shapes(q1, q2)?;
    Ok(q1
        .values
        .iter()
        .zip(q2.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn frobenius_error(q1: &QTable, q2: &QTable) -> Result<f64> {
    check_shapes(q1, q2)?;
    Ok(q1
        .values
        .iter()
        .zip(q2.values.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

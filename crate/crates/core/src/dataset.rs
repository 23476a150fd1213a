//! Factorial data in long format and as binomial cell counts.
//!
//! Cells are indexed B-major, A-minor: all primary levels of the first
//! stratum, then all primary levels of the second, and so on. Every
//! coefficient vector and contrast matrix in the crate uses this ordering.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

/// Label given to the single stratum of data without a secondary factor.
pub const PSEUDO_STRATUM: &str = "all";

/// Level structure shared by continuous and binomial data.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub a_levels: Vec<String>,
    pub b_levels: Vec<String>,
    /// `true` when the primary levels were ordered by the caller rather than by appearance.
    pub a_order_explicit: bool,
    cell_n: Vec<usize>,
}

impl Layout {
    pub fn new(
        a_levels: Vec<String>,
        b_levels: Vec<String>,
        cell_n: Vec<usize>,
        a_order_explicit: bool,
    ) -> Result<Self> {
        if cell_n.len() != a_levels.len() * b_levels.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} cell counts for {} x {} cells",
                cell_n.len(),
                a_levels.len(),
                b_levels.len()
            )));
        }
        Ok(Layout {
            a_levels,
            b_levels,
            a_order_explicit,
            cell_n,
        })
    }

    pub fn n_a(&self) -> usize {
        self.a_levels.len()
    }

    pub fn n_b(&self) -> usize {
        self.b_levels.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_n.len()
    }

    /// Column of cell (a, b) in every coefficient vector.
    pub fn cell(&self, a: usize, b: usize) -> usize {
        b * self.a_levels.len() + a
    }

    pub fn n(&self, a: usize, b: usize) -> usize {
        self.cell_n[self.cell(a, b)]
    }

    /// Counts in cell order.
    pub fn cell_n(&self) -> &[usize] {
        &self.cell_n
    }

    pub fn total(&self) -> usize {
        self.cell_n.iter().sum()
    }

    /// Per primary level totals over all strata.
    pub fn a_totals(&self) -> Vec<usize> {
        (0..self.n_a())
            .map(|a| (0..self.n_b()).map(|b| self.n(a, b)).sum())
            .collect()
    }

    pub fn non_empty_cells(&self) -> usize {
        self.cell_n.iter().filter(|&&n| n > 0).count()
    }

    /// `(a_level, b_level)` labels in coefficient order.
    pub fn cell_index(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.n_cells());
        for b in &self.b_levels {
            for a in &self.a_levels {
                out.push((a.clone(), b.clone()));
            }
        }
        out
    }

    /// Cell names of the form `b:a`, used as contrast matrix column headers.
    pub fn cell_names(&self) -> Vec<String> {
        self.cell_index()
            .into_iter()
            .map(|(a, b)| alloc::format!("{b}:{a}"))
            .collect()
    }

    pub fn a_position(&self, level: &str) -> Option<usize> {
        self.a_levels.iter().position(|l| l == level)
    }

    pub fn b_position(&self, level: &str) -> Option<usize> {
        self.b_levels.iter().position(|l| l == level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub response: f64,
    pub a: usize,
    pub b: usize,
}

/// Tidy continuous observations indexed by primary and secondary level.
#[derive(Debug, Clone, PartialEq)]
pub struct LongDataset {
    rows: Vec<Observation>,
    layout: Layout,
}

/// Resolve labels to level indices, either by first appearance or against an explicit order.
fn level_index<'a>(
    labels: impl Iterator<Item = &'a str>,
    explicit: Option<&[String]>,
    factor: &'static str,
) -> Result<(Vec<String>, Vec<usize>)> {
    let mut levels: Vec<String> = Vec::new();
    let mut lookup: BTreeMap<String, usize> = BTreeMap::new();
    if let Some(order) = explicit {
        for (i, l) in order.iter().enumerate() {
            if lookup.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLevel(l.clone()));
            }
            levels.push(l.clone());
        }
    }
    let mut idx = Vec::new();
    for label in labels {
        let i = match lookup.get(label) {
            Some(&i) => i,
            None if explicit.is_some() => {
                return Err(Error::UnknownLevel {
                    factor,
                    level: label.to_string(),
                })
            }
            None => {
                let i = levels.len();
                levels.push(label.to_string());
                lookup.insert(label.to_string(), i);
                i
            }
        };
        idx.push(i);
    }
    Ok((levels, idx))
}

impl LongDataset {
    /// Build from `(response, primary label, secondary label)` rows.
    ///
    /// Levels are ordered by first appearance unless an explicit order is given;
    /// with an explicit order, unknown labels are an error and unused levels
    /// become empty cells. `None` for the secondary label collapses the data to
    /// a single pseudo-stratum.
    pub fn from_rows<'a, I>(
        rows: I,
        a_order: Option<&[String]>,
        b_order: Option<&[String]>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a str, Option<&'a str>)>,
    {
        let rows: Vec<_> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, (y, _, _)) in rows.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFiniteResponse { row: i, value: *y });
            }
        }
        let (a_levels, a_idx) = level_index(rows.iter().map(|r| r.1), a_order, "primary")?;
        let (b_levels, b_idx) = level_index(
            rows.iter().map(|r| r.2.unwrap_or(PSEUDO_STRATUM)),
            b_order,
            "secondary",
        )?;
        let obs: Vec<Observation> = rows
            .iter()
            .zip(a_idx.iter().zip(b_idx.iter()))
            .map(|(r, (&a, &b))| Observation {
                response: r.0,
                a,
                b,
            })
            .collect();
        Self::from_observations(obs, a_levels, b_levels, a_order.is_some())
    }

    /// Build from already-indexed observations.
    pub fn from_observations(
        rows: Vec<Observation>,
        a_levels: Vec<String>,
        b_levels: Vec<String>,
        a_order_explicit: bool,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let na = a_levels.len();
        let mut cell_n = alloc::vec![0usize; na * b_levels.len()];
        for (i, r) in rows.iter().enumerate() {
            if !r.response.is_finite() {
                return Err(Error::NonFiniteResponse {
                    row: i,
                    value: r.response,
                });
            }
            if r.a >= na || r.b >= b_levels.len() {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "observation {i} refers to a level index outside the layout"
                )));
            }
            cell_n[r.b * na + r.a] += 1;
        }
        let layout = Layout::new(a_levels, b_levels, cell_n, a_order_explicit)?;
        Ok(LongDataset { rows, layout })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Labels of every cell in coefficient order.
    pub fn cell_index(&self) -> Vec<(String, String)> {
        self.layout.cell_index()
    }

    /// Responses grouped by cell, in coefficient order.
    pub fn cell_samples(&self) -> Vec<Vec<f64>> {
        let mut out = alloc::vec![Vec::new(); self.layout.n_cells()];
        for r in &self.rows {
            out[self.layout.cell(r.a, r.b)].push(r.response);
        }
        out
    }

    /// Per-cell size, mean and unbiased variance.
    pub fn summarize(&self) -> Vec<CellSummary> {
        let samples = self.cell_samples();
        self.layout
            .cell_index()
            .into_iter()
            .zip(samples)
            .map(|((a_level, b_level), ys)| {
                let n = ys.len();
                let mean = (n > 0).then(|| ys.iter().sum::<f64>() / n as f64);
                let variance = match (n, mean) {
                    (n, Some(m)) if n >= 2 => {
                        Some(ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1) as f64)
                    }
                    _ => None,
                };
                CellSummary {
                    a_level,
                    b_level,
                    n,
                    mean,
                    variance,
                }
            })
            .collect()
    }

    /// Observations of one stratum as a single-stratum dataset.
    pub fn restrict_to_stratum(&self, b_level: &str) -> Result<LongDataset> {
        let b = self
            .layout
            .b_position(b_level)
            .ok_or_else(|| Error::UnknownStratum(b_level.to_string()))?;
        let rows: Vec<Observation> = self
            .rows
            .iter()
            .filter(|r| r.b == b)
            .map(|r| Observation { b: 0, ..*r })
            .collect();
        Self::from_observations(
            rows,
            self.layout.a_levels.clone(),
            alloc::vec![b_level.to_string()],
            self.layout.a_order_explicit,
        )
    }

    /// The same observations with the secondary factor dropped.
    pub fn collapse_strata(&self) -> LongDataset {
        let rows = self
            .rows
            .iter()
            .map(|r| Observation { b: 0, ..*r })
            .collect();
        Self::from_observations(
            rows,
            self.layout.a_levels.clone(),
            alloc::vec![PSEUDO_STRATUM.to_string()],
            self.layout.a_order_explicit,
        )
        .expect("collapsing a valid dataset stays valid")
    }

    /// Copy with every response replaced by `f(response)`.
    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Result<LongDataset> {
        let rows = self
            .rows
            .iter()
            .map(|r| Observation {
                response: f(r.response),
                ..*r
            })
            .collect();
        Self::from_observations(
            rows,
            self.layout.a_levels.clone(),
            self.layout.b_levels.clone(),
            self.layout.a_order_explicit,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub a_level: String,
    pub b_level: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// `None` when the cell has fewer than two observations.
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialCell {
    pub successes: u64,
    pub trials: u64,
}

/// Aggregated success counts per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialDataset {
    layout: Layout,
    /// In cell order; absent cells have zero trials.
    cells: Vec<BinomialCell>,
}

impl BinomialDataset {
    /// Build from `(primary label, secondary label, successes, trials)` records.
    ///
    /// Repeated records for the same cell are summed.
    pub fn from_records<'a, I>(
        records: I,
        a_order: Option<&[String]>,
        b_order: Option<&[String]>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>, u64, u64)>,
    {
        let recs: Vec<_> = records.into_iter().collect();
        if recs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (a_levels, a_idx) = level_index(recs.iter().map(|r| r.0), a_order, "primary")?;
        let (b_levels, b_idx) = level_index(
            recs.iter().map(|r| r.1.unwrap_or(PSEUDO_STRATUM)),
            b_order,
            "secondary",
        )?;
        let na = a_levels.len();
        let mut cells = alloc::vec![
            BinomialCell {
                successes: 0,
                trials: 0
            };
            na * b_levels.len()
        ];
        for (r, (&a, &b)) in recs.iter().zip(a_idx.iter().zip(b_idx.iter())) {
            let (s, t) = (r.2, r.3);
            if t == 0 || s > t {
                return Err(Error::InvalidCounts {
                    a_level: a_levels[a].clone(),
                    b_level: b_levels[b].clone(),
                    successes: s,
                    trials: t,
                });
            }
            let c = &mut cells[b * na + a];
            c.successes += s;
            c.trials += t;
        }
        Self::from_cells(cells, a_levels, b_levels, a_order.is_some())
    }

    pub fn from_cells(
        cells: Vec<BinomialCell>,
        a_levels: Vec<String>,
        b_levels: Vec<String>,
        a_order_explicit: bool,
    ) -> Result<Self> {
        let cell_n = cells.iter().map(|c| c.trials as usize).collect();
        let layout = Layout::new(a_levels, b_levels, cell_n, a_order_explicit)?;
        for (i, c) in cells.iter().enumerate() {
            if c.successes > c.trials {
                let (a, b) = (i % layout.n_a(), i / layout.n_a());
                return Err(Error::InvalidCounts {
                    a_level: layout.a_levels[a].clone(),
                    b_level: layout.b_levels[b].clone(),
                    successes: c.successes,
                    trials: c.trials,
                });
            }
        }
        if layout.total() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(BinomialDataset { layout, cells })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn cells(&self) -> &[BinomialCell] {
        &self.cells
    }

    pub fn cell_index(&self) -> Vec<(String, String)> {
        self.layout.cell_index()
    }

    pub fn restrict_to_stratum(&self, b_level: &str) -> Result<BinomialDataset> {
        let b = self
            .layout
            .b_position(b_level)
            .ok_or_else(|| Error::UnknownStratum(b_level.to_string()))?;
        let na = self.layout.n_a();
        let cells = self.cells[b * na..(b + 1) * na].to_vec();
        Self::from_cells(
            cells,
            self.layout.a_levels.clone(),
            alloc::vec![b_level.to_string()],
            self.layout.a_order_explicit,
        )
    }

    /// Counts summed over strata.
    pub fn collapse_strata(&self) -> BinomialDataset {
        let na = self.layout.n_a();
        let mut cells = alloc::vec![
            BinomialCell {
                successes: 0,
                trials: 0
            };
            na
        ];
        for (i, c) in self.cells.iter().enumerate() {
            cells[i % na].successes += c.successes;
            cells[i % na].trials += c.trials;
        }
        Self::from_cells(
            cells,
            self.layout.a_levels.clone(),
            alloc::vec![PSEUDO_STRATUM.to_string()],
            self.layout.a_order_explicit,
        )
        .expect("collapsing a valid dataset stays valid")
    }
}

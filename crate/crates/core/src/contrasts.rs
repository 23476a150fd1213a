//! Multiple-contrast families over the primary factor and their expansion
//! into the joint per-stratum plus pooled matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dataset::Layout;
use crate::{Error, Result};

const ZERO_SUM_TOL: f64 = 1e-12;

/// Where a contrast row belongs in the joint family.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "kind", content = "level"))]
pub enum RowTag {
    /// Comparison inside one level of the secondary factor.
    Stratum(String),
    /// Comparison pooled over strata with sample-size weights.
    Pooled,
    /// Comparison from a model with the strata collapsed.
    Global,
    /// One-way family over primary levels only.
    Marginal,
    /// Imported row without a recognizable tag.
    User,
}

impl RowTag {
    pub fn describe(&self) -> String {
        match self {
            RowTag::Stratum(b) => format!("stratum:{b}"),
            RowTag::Pooled => "pooled".into(),
            RowTag::Global => "global".into(),
            RowTag::Marginal => "marginal".into(),
            RowTag::User => "user".into(),
        }
    }

    pub fn parse(s: &str) -> RowTag {
        match s {
            "pooled" => RowTag::Pooled,
            "global" => RowTag::Global,
            "marginal" => RowTag::Marginal,
            "user" | "" => RowTag::User,
            other => match other.strip_prefix("stratum:") {
                Some(b) => RowTag::Stratum(b.to_string()),
                None => RowTag::User,
            },
        }
    }
}

/// Labeled contrast rows over a set of columns (cells or primary levels).
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    pub coefficients: DMatrix<f64>,
    pub labels: Vec<String>,
    pub tags: Vec<RowTag>,
    pub columns: Vec<String>,
}

impl ContrastMatrix {
    /// Assemble rows; duplicate labels get an index suffix.
    pub fn new(
        coefficients: DMatrix<f64>,
        labels: Vec<String>,
        tags: Vec<RowTag>,
        columns: Vec<String>,
    ) -> Result<Self> {
        let (q, p) = coefficients.shape();
        if labels.len() != q || tags.len() != q || columns.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{q}x{p} contrast matrix with {} labels, {} tags, {} columns",
                labels.len(),
                tags.len(),
                columns.len()
            )));
        }
        Ok(ContrastMatrix {
            coefficients,
            labels: dedupe_labels(labels),
            tags,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.coefficients.row(i).iter().cloned().collect()
    }

    /// Stack several matrices over the same columns.
    pub fn stack(parts: &[ContrastMatrix]) -> Result<ContrastMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidFamily("no contrast rows".into()))?;
        let p = first.n_columns();
        let q: usize = parts.iter().map(|m| m.n_rows()).sum();
        let mut k = DMatrix::<f64>::zeros(q, p);
        let mut labels = Vec::with_capacity(q);
        let mut tags = Vec::with_capacity(q);
        let mut r = 0;
        for m in parts {
            if m.n_columns() != p {
                return Err(Error::DimensionMismatch(
                    "stacked contrast matrices have different columns".into(),
                ));
            }
            for i in 0..m.n_rows() {
                k.row_mut(r).copy_from(&m.coefficients.row(i));
                r += 1;
            }
            labels.extend(m.labels.iter().cloned());
            tags.extend(m.tags.iter().cloned());
        }
        ContrastMatrix::new(k, labels, tags, first.columns.clone())
    }

    /// Error if any row puts weight on a cell without observations.
    pub fn check_cells(&self, layout: &Layout) -> Result<()> {
        if self.n_columns() != layout.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "contrast matrix has {} columns for {} cells",
                self.n_columns(),
                layout.n_cells()
            )));
        }
        for i in 0..self.n_rows() {
            for j in 0..self.n_columns() {
                if self.coefficients[(i, j)] != 0.0 && layout.cell_n()[j] == 0 {
                    let (a, b) = (j % layout.n_a(), j / layout.n_a());
                    return Err(Error::EmptyCell {
                        label: self.labels[i].clone(),
                        a_level: layout.a_levels[a].clone(),
                        b_level: layout.b_levels[b].clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn dedupe_labels(labels: Vec<String>) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    labels
        .into_iter()
        .map(|l| {
            if counts[&l] > 1 {
                let c = seen.entry(l.clone()).or_default();
                *c += 1;
                format!("{l} #{c}")
            } else {
                l
            }
        })
        .collect()
}

/// Built-in multiple-contrast families over the primary factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// Each level against a control (the first level when `None`).
    Dunnett { control: Option<String> },
    /// Weighted top-dose means against the first (control) level.
    Williams,
    /// All pairwise differences.
    Tukey,
    /// Each level against the weighted grand mean.
    GrandMean,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Dunnett { .. } => "dunnett",
            Family::Williams => "williams",
            Family::Tukey => "tukey",
            Family::GrandMean => "grand-mean",
        }
    }

    pub fn parse(name: &str, control: Option<String>) -> Result<Family> {
        match name.to_ascii_lowercase().as_str() {
            "dunnett" => Ok(Family::Dunnett { control }),
            "williams" => Ok(Family::Williams),
            "tukey" => Ok(Family::Tukey),
            "grand-mean" | "grand_mean" | "grandmean" | "anom" => Ok(Family::GrandMean),
            other => Err(Error::InvalidFamily(format!("unknown family `{other}`"))),
        }
    }
}

/// Single-stratum prototype over the primary levels.
///
/// `n` are the per-level sample sizes used by the size-weighted families
/// (Williams and grand mean). `ordered` says whether `levels` carries a
/// caller-supplied dose order, which Williams requires.
pub fn build_family(
    family: &Family,
    levels: &[String],
    n: &[usize],
    ordered: bool,
) -> Result<ContrastMatrix> {
    let k1 = levels.len();
    if k1 < 2 {
        return Err(Error::InvalidFamily(
            "need at least two primary levels".into(),
        ));
    }
    if n.len() != k1 {
        return Err(Error::DimensionMismatch(format!(
            "{} sample sizes for {k1} levels",
            n.len()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    match family {
        Family::Dunnett { control } => {
            let c = match control {
                Some(name) => levels
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| Error::UnknownControl(name.clone()))?,
                None => 0,
            };
            for i in (0..k1).filter(|&i| i != c) {
                let mut r = alloc::vec![0.0; k1];
                r[c] = -1.0;
                r[i] = 1.0;
                rows.push(r);
                labels.push(format!("{} - {}", levels[i], levels[c]));
            }
        }
        Family::Williams => {
            if !ordered {
                return Err(Error::WilliamsNeedsOrder);
            }
            for m in 1..k1 {
                let top = k1 - m..k1;
                let total: usize = n[top.clone()].iter().sum();
                if total == 0 {
                    return Err(Error::EmptyLevel(levels[k1 - 1].clone()));
                }
                let mut r = alloc::vec![0.0; k1];
                r[0] = -1.0;
                for j in top.clone() {
                    r[j] = n[j] as f64 / total as f64;
                }
                rows.push(r);
                let label = if m == 1 {
                    format!("{} - {}", levels[k1 - 1], levels[0])
                } else {
                    let names: Vec<&str> = top.rev().map(|j| levels[j].as_str()).collect();
                    format!("({})/{} - {}", names.join("+"), m, levels[0])
                };
                labels.push(label);
            }
        }
        Family::Tukey => {
            for i in 0..k1 {
                for j in i + 1..k1 {
                    let mut r = alloc::vec![0.0; k1];
                    r[i] = -1.0;
                    r[j] = 1.0;
                    rows.push(r);
                    labels.push(format!("{} - {}", levels[j], levels[i]));
                }
            }
        }
        Family::GrandMean => {
            let total: usize = n.iter().sum();
            if total == 0 {
                return Err(Error::EmptyDataset);
            }
            for i in 0..k1 {
                let mut r: Vec<f64> = n.iter().map(|&nj| -(nj as f64) / total as f64).collect();
                r[i] += 1.0;
                rows.push(r);
                labels.push(format!("{} - mean", levels[i]));
            }
        }
    }
    let q = rows.len();
    let k = DMatrix::from_fn(q, k1, |i, j| rows[i][j]);
    ContrastMatrix::new(
        k,
        labels,
        alloc::vec![RowTag::Marginal; q],
        levels.to_vec(),
    )
}

/// Which blocks the joint matrix contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointBlocks {
    pub per_stratum: bool,
    pub pooled: bool,
}

impl Default for JointBlocks {
    fn default() -> Self {
        JointBlocks {
            per_stratum: true,
            pooled: true,
        }
    }
}

/// Per-stratum rows placed into each stratum's cells, labeled `b:label`.
fn per_stratum_block(proto: &ContrastMatrix, layout: &Layout) -> Result<ContrastMatrix> {
    let (k, na) = proto.coefficients.shape();
    let nb = layout.n_b();
    let mut m = DMatrix::<f64>::zeros(k * nb, layout.n_cells());
    let mut labels = Vec::with_capacity(k * nb);
    let mut tags = Vec::with_capacity(k * nb);
    for b in 0..nb {
        for i in 0..k {
            let label = format!("{}:{}", layout.b_levels[b], proto.labels[i]);
            for a in 0..na {
                let c = proto.coefficients[(i, a)];
                if c == 0.0 {
                    continue;
                }
                if layout.n(a, b) == 0 {
                    return Err(Error::EmptyCell {
                        label,
                        a_level: layout.a_levels[a].clone(),
                        b_level: layout.b_levels[b].clone(),
                    });
                }
                m[(b * k + i, layout.cell(a, b))] = c;
            }
            labels.push(label);
            tags.push(RowTag::Stratum(layout.b_levels[b].clone()));
        }
    }
    ContrastMatrix::new(m, labels, tags, layout.cell_names())
}

/// Stratification weights `n_ab / Σ_b' n_ab'`, indexed `[a][b]`.
pub fn pooling_weights(layout: &Layout) -> Vec<Vec<f64>> {
    let totals = layout.a_totals();
    (0..layout.n_a())
        .map(|a| {
            (0..layout.n_b())
                .map(|b| {
                    if totals[a] == 0 {
                        0.0
                    } else {
                        layout.n(a, b) as f64 / totals[a] as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Pooled rows: each level's coefficient spread over strata by the level's
/// stratification weights, labeled `p: label`.
fn pooled_block(proto: &ContrastMatrix, layout: &Layout) -> Result<ContrastMatrix> {
    let (k, na) = proto.coefficients.shape();
    let w = pooling_weights(layout);
    let totals = layout.a_totals();
    let mut m = DMatrix::<f64>::zeros(k, layout.n_cells());
    let mut labels = Vec::with_capacity(k);
    for i in 0..k {
        for a in 0..na {
            let c = proto.coefficients[(i, a)];
            if c == 0.0 {
                continue;
            }
            if totals[a] == 0 {
                return Err(Error::EmptyLevel(layout.a_levels[a].clone()));
            }
            for b in 0..layout.n_b() {
                m[(i, layout.cell(a, b))] = c * w[a][b];
            }
        }
        labels.push(format!("p: {}", proto.labels[i]));
    }
    ContrastMatrix::new(
        m,
        labels,
        alloc::vec![RowTag::Pooled; k],
        layout.cell_names(),
    )
}

/// Expand a primary-level prototype into the joint cell-level matrix.
///
/// With `J` strata and `k` prototype rows the full expansion has `(J + 1)·k`
/// rows: the per-stratum blocks in stratum order followed by the pooled block.
pub fn expand_joint(
    proto: &ContrastMatrix,
    layout: &Layout,
    blocks: JointBlocks,
) -> Result<ContrastMatrix> {
    if proto.n_columns() != layout.n_a() {
        return Err(Error::DimensionMismatch(format!(
            "prototype has {} columns for {} primary levels",
            proto.n_columns(),
            layout.n_a()
        )));
    }
    let mut parts = Vec::new();
    if blocks.per_stratum {
        parts.push(per_stratum_block(proto, layout)?);
    }
    if blocks.pooled {
        parts.push(pooled_block(proto, layout)?);
    }
    if parts.is_empty() {
        return Err(Error::InvalidFamily(
            "joint family needs per-stratum or pooled rows".into(),
        ));
    }
    ContrastMatrix::stack(&parts)
}

/// Place a primary-level prototype on the first columns of a wider coefficient
/// vector (the additive model's level effects).
pub fn embed_prototype(proto: &ContrastMatrix, n_coefficients: usize, tag: RowTag) -> ContrastMatrix {
    let (k, na) = proto.coefficients.shape();
    let mut m = DMatrix::<f64>::zeros(k, n_coefficients);
    m.view_mut((0, 0), (k, na)).copy_from(&proto.coefficients);
    let mut columns = proto.columns.clone();
    for j in na..n_coefficients {
        columns.push(format!("shift{}", j - na + 1));
    }
    ContrastMatrix {
        coefficients: m,
        labels: proto.labels.clone(),
        tags: alloc::vec![tag; k],
        columns,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Rows whose coefficients do not sum to zero.
    pub zero_sum_violations: Vec<usize>,
    /// Rows whose positive part does not sum to +1 (negative part to -1).
    pub unnormalized_rows: Vec<usize>,
    pub zero_rows: Vec<usize>,
    pub duplicate_rows: Vec<(usize, usize)>,
    pub rank: usize,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.zero_sum_violations.is_empty() && self.zero_rows.is_empty() && self.duplicate_rows.is_empty()
    }
}

pub fn validate(cm: &ContrastMatrix) -> Diagnostics {
    let (q, p) = cm.coefficients.shape();
    let mut d = Diagnostics::default();
    for i in 0..q {
        let row = cm.coefficients.row(i);
        let scale = row.iter().map(|c| c.abs()).fold(1.0, f64::max);
        let (pos, neg) = row.iter().fold((0.0, 0.0), |(p, n), &c| {
            if c > 0.0 {
                (p + c, n)
            } else {
                (p, n + c)
            }
        });
        if row.iter().all(|&c| c == 0.0) {
            d.zero_rows.push(i);
            continue;
        }
        if (pos + neg).abs() > ZERO_SUM_TOL * scale {
            d.zero_sum_violations.push(i);
        }
        if (pos - 1.0).abs() > 1e-9 || (neg + 1.0).abs() > 1e-9 {
            d.unnormalized_rows.push(i);
        }
        for j in 0..i {
            if (0..p).all(|c| cm.coefficients[(i, c)] == cm.coefficients[(j, c)]) {
                d.duplicate_rows.push((j, i));
                break;
            }
        }
    }
    d.rank = if q == 0 || p == 0 {
        0
    } else {
        let svd = cm.coefficients.clone().svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let tol = smax * f64::EPSILON * q.max(p) as f64;
        svd.singular_values.iter().filter(|&&s| s > tol).count()
    };
    d
}

//! Monte Carlo comparison of the joint test with interaction pre-testing.
//!
//! Strategy A runs the joint per-stratum plus pooled family. Strategy B
//! first runs the interaction F test; when it is significant each stratum is
//! analysed separately (each at level alpha), otherwise the pooled family is
//! tested in the additive model. A replication commits a familywise error
//! when any row whose hypothesis is true is rejected.
//!
//! Replication `r` draws from a ChaCha8 stream selected by `r`, so results
//! do not depend on how replications are scheduled. [`run_scenario`] runs
//! them in order; parallel drivers can call [`run_replication`] directly and
//! reduce with [`summarize`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::contrasts::{build_family, embed_prototype, expand_joint, ContrastMatrix, Family, JointBlocks, RowTag};
use crate::dataset::{Layout, LongDataset, Observation};
use crate::models::{coefficient_covariance, fit_additive, fit_gaussian_cell_means, CovarianceKind};
use crate::mvt::{
    covariance_to_correlation, equicoordinate_quantile, single_adjusted_p, univariate_p,
    MvtOptions, Tail,
};
use crate::special::f_sf;
use crate::{Alternative, Df, Error, Result};

const TRUTH_TOL: f64 = 1e-12;

/// Design, truth and test settings of one simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Number of primary levels (control plus `k` treatments).
    pub n_a: usize,
    /// Number of strata.
    pub n_b: usize,
    /// Cell sizes in cell order (stratum-major).
    pub n: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub family: Family,
    pub alternative: Alternative,
    pub alpha: f64,
    pub pretest_alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub covariance: CovarianceKind,
    /// Integration precision for adjusted p-values and critical values.
    pub mvt_precision: f64,
}

impl Scenario {
    /// Balanced homoscedastic global null with `k` treatments, `j` strata and `n` per cell.
    pub fn global_null(k: usize, j: usize, n: usize, replications: usize, seed: u64) -> Scenario {
        let cells = (k + 1) * j;
        Scenario {
            n_a: k + 1,
            n_b: j,
            n: vec![n; cells],
            means: vec![0.0; cells],
            sds: vec![1.0; cells],
            family: Family::Dunnett { control: None },
            alternative: Alternative::Greater,
            alpha: 0.05,
            pretest_alpha: 0.05,
            replications,
            seed,
            covariance: CovarianceKind::Model,
            mvt_precision: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.n_a * self.n_b;
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_a < 2 || self.n_b < 1 {
            return bad("need at least two primary levels and one stratum".into());
        }
        if self.n.len() != cells || self.means.len() != cells || self.sds.len() != cells {
            return bad(format!(
                "{cells} cells but {} sizes, {} means, {} sds",
                self.n.len(),
                self.means.len(),
                self.sds.len()
            ));
        }
        if self.n.iter().any(|&n| n < 2) {
            return bad("every cell needs at least two observations".into());
        }
        if self.sds.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return bad("standard deviations must be positive".into());
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return bad("means must be finite".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.pretest_alpha) {
            return bad(format!("pre-test alpha must lie in [0, 1], got {}", self.pretest_alpha));
        }
        if self.replications == 0 {
            return bad("replications must be at least one".into());
        }
        if !(self.mvt_precision > 0.0) {
            return bad("integration precision must be positive".into());
        }
        Ok(())
    }

    fn layout(&self) -> Result<Layout> {
        Layout::new(
            (0..self.n_a).map(|a| a.to_string()).collect(),
            (1..=self.n_b).map(|b| format!("s{b}")).collect(),
            self.n.clone(),
            true,
        )
    }
}

/// Contrast family with its truth and, when the correlation is fixed by the
/// design, its precomputed critical value.
#[derive(Debug, Clone)]
struct PlannedFamily {
    cm: ContrastMatrix,
    true_null: Vec<bool>,
    critical: Option<f64>,
}

/// Quantities fixed by the scenario's design.
#[derive(Debug, Clone)]
pub struct SimPlan {
    scenario: Scenario,
    layout: Layout,
    joint: PlannedFamily,
    separate: Vec<PlannedFamily>,
    additive: PlannedFamily,
    /// Joint row index matched by each separate row, per stratum.
    separate_rows: Vec<Vec<usize>>,
    /// Joint row index matched by each additive row.
    additive_rows: Vec<usize>,
    opts: MvtOptions,
}

fn is_true_null(value: f64, alt: Alternative) -> bool {
    match alt {
        Alternative::Greater => value <= TRUTH_TOL,
        Alternative::Less => value >= -TRUTH_TOL,
        Alternative::TwoSided => value.abs() <= TRUTH_TOL,
    }
}

fn fixed_critical(cov: &DMatrix<f64>, df: Df, s: &Scenario, opts: &MvtOptions) -> Result<Option<f64>> {
    if s.alpha >= 1.0 {
        return Ok(None);
    }
    let corr = covariance_to_correlation(cov).ok_or_else(|| Error::ZeroStandardError("planned contrast".into()))?;
    let q = equicoordinate_quantile(&corr, df, s.alpha, Tail::from(s.alternative), opts, s.seed ^ 0xc0ffee)?;
    Ok(Some(q.value))
}

/// Validate a scenario and precompute its contrast families.
pub fn plan(s: &Scenario) -> Result<SimPlan> {
    s.validate()?;
    let layout = s.layout()?;
    let opts = MvtOptions::with_precision(s.mvt_precision);
    let fixed = s.covariance == CovarianceKind::Model;
    let n_total: usize = s.n.iter().sum();
    let means = nalgebra::DVector::from_vec(s.means.clone());

    let proto = build_family(&s.family, &layout.a_levels, &layout.a_totals(), true)?;
    let joint_cm = expand_joint(&proto, &layout, JointBlocks::default())?;
    let truth = &joint_cm.coefficients * &means;
    let inv_n = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        s.n.len(),
        s.n.iter().map(|&n| 1.0 / n as f64),
    ));
    let df_joint = Df::Finite((n_total - layout.n_cells()) as f64);
    let joint = PlannedFamily {
        true_null: truth.iter().map(|&v| is_true_null(v, s.alternative)).collect(),
        critical: if fixed {
            fixed_critical(&(&joint_cm.coefficients * &inv_n * joint_cm.coefficients.transpose()), df_joint, s, &opts)?
        } else {
            None
        },
        cm: joint_cm,
    };

    let k = proto.n_rows();
    let mut separate = Vec::with_capacity(s.n_b);
    let mut separate_rows = Vec::with_capacity(s.n_b);
    for b in 0..s.n_b {
        let nb: Vec<usize> = (0..s.n_a).map(|a| layout.n(a, b)).collect();
        let p = build_family(&s.family, &layout.a_levels, &nb, true)?;
        let cm = ContrastMatrix::new(
            p.coefficients.clone(),
            p.labels.iter().map(|l| format!("{}:{l}", layout.b_levels[b])).collect(),
            vec![RowTag::Stratum(layout.b_levels[b].clone()); k],
            p.columns.clone(),
        )?;
        let mu_b = nalgebra::DVector::from_iterator(s.n_a, (0..s.n_a).map(|a| s.means[layout.cell(a, b)]));
        let truth = &cm.coefficients * mu_b;
        let inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(s.n_a, nb.iter().map(|&n| 1.0 / n as f64)));
        let df = Df::Finite((nb.iter().sum::<usize>() - s.n_a) as f64);
        let critical = if fixed {
            fixed_critical(&(&cm.coefficients * inv * cm.coefficients.transpose()), df, s, &opts)?
        } else {
            None
        };
        separate.push(PlannedFamily {
            true_null: truth.iter().map(|&v| is_true_null(v, s.alternative)).collect(),
            critical,
            cm,
        });
        separate_rows.push((0..k).map(|i| b * k + i).collect());
    }

    // the additive model's level effects: truth taken from the pooled rows
    let n_coef = s.n_a + s.n_b - 1;
    let add_cm = embed_prototype(&proto, n_coef, RowTag::Pooled);
    let additive_rows: Vec<usize> = (0..k).map(|i| s.n_b * k + i).collect();
    let additive_truth: Vec<bool> = additive_rows.iter().map(|&r| joint.true_null[r]).collect();
    let add_critical = if fixed && s.alpha < 1.0 {
        // (XᵀX)⁻¹ of the additive design depends only on the cell sizes
        let mut obs = Vec::with_capacity(n_total);
        for b in 0..s.n_b {
            for a in 0..s.n_a {
                for _ in 0..layout.n(a, b) {
                    obs.push(Observation { response: 0.0, a, b });
                }
            }
        }
        let ds = LongDataset::from_observations(obs, layout.a_levels.clone(), layout.b_levels.clone(), true)?;
        let (x, _) = crate::models::additive_design(&ds);
        let xtx = x.transpose() * &x;
        let inv = xtx
            .try_inverse()
            .ok_or_else(|| Error::InvalidScenario("additive design is rank deficient".into()))?;
        let df = Df::Finite((n_total - n_coef) as f64);
        fixed_critical(&(&add_cm.coefficients * inv * add_cm.coefficients.transpose()), df, s, &opts)?
    } else {
        None
    };
    let additive = PlannedFamily {
        cm: add_cm,
        true_null: additive_truth,
        critical: add_critical,
    };

    Ok(SimPlan {
        scenario: s.clone(),
        layout,
        joint,
        separate,
        additive,
        separate_rows,
        additive_rows,
        opts,
    })
}

/// Decisions of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    /// Rejections of the joint family, one per joint row.
    pub joint: Vec<bool>,
    pub pretest_significant: bool,
    /// Rejections of strategy B mapped onto joint rows; `None` when the row
    /// was not tested in this replication.
    pub pretest: Vec<Option<bool>>,
}

/// Reject rows by the single-step max-t rule.
///
/// With a fixed critical value the comparison is direct. Otherwise each row
/// first tries the cheap bounds `p_raw ≤ p_adj ≤ q·p_raw` and integrates only
/// when they straddle alpha.
fn decide(
    tstats: &[f64],
    corr: &DMatrix<f64>,
    df: Df,
    critical: Option<f64>,
    s: &Scenario,
    opts: &MvtOptions,
    seed: u64,
) -> Vec<bool> {
    if s.alpha >= 1.0 {
        return vec![true; tstats.len()];
    }
    if let Some(c) = critical {
        return tstats
            .iter()
            .map(|&t| match s.alternative {
                Alternative::Greater => t > c,
                Alternative::Less => t < -c,
                Alternative::TwoSided => t.abs() > c,
            })
            .collect();
    }
    let q = tstats.len() as f64;
    tstats
        .iter()
        .map(|&t| {
            let raw = univariate_p(t, df, s.alternative);
            if raw > s.alpha {
                false
            } else if q * raw <= s.alpha {
                true
            } else {
                single_adjusted_p(t, corr, df, s.alternative, opts, seed).value <= s.alpha
            }
        })
        .collect()
}

fn statistics(cm: &ContrastMatrix, beta: &nalgebra::DVector<f64>, vcov: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let est = &cm.coefficients * beta;
    let cov = &cm.coefficients * vcov * cm.coefficients.transpose();
    let corr = covariance_to_correlation(&cov).ok_or_else(|| Error::ZeroStandardError(cm.labels[0].clone()))?;
    let t = (0..cm.n_rows()).map(|i| est[i] / libm::sqrt(cov[(i, i)])).collect();
    Ok((t, corr))
}

fn generate(plan: &SimPlan, rep: u64) -> Result<LongDataset> {
    let s = &plan.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(rep);
    let mut obs = Vec::with_capacity(s.n.iter().sum());
    for b in 0..s.n_b {
        for a in 0..s.n_a {
            let c = plan.layout.cell(a, b);
            for _ in 0..s.n[c] {
                let z: f64 = StandardNormal.sample(&mut rng);
                obs.push(Observation {
                    response: s.means[c] + s.sds[c] * z,
                    a,
                    b,
                });
            }
        }
    }
    LongDataset::from_observations(obs, plan.layout.a_levels.clone(), plan.layout.b_levels.clone(), true)
}

/// Generate and analyse replication `rep`.
pub fn run_replication(plan: &SimPlan, rep: u64) -> Result<RepOutcome> {
    let s = &plan.scenario;
    let ds = generate(plan, rep)?;
    let mvt_seed = s.seed ^ rep.wrapping_mul(0x9e37_79b9_7f4a_7c15);

    let fit = fit_gaussian_cell_means(&ds)?;
    let vcov = coefficient_covariance(&ds, &fit, s.covariance)?;
    let (t, corr) = statistics(&plan.joint.cm, &fit.beta, &vcov)?;
    let joint = decide(&t, &corr, fit.df_resid, plan.joint.critical, s, &plan.opts, mvt_seed);

    let add = fit_additive(&ds)?;
    let pretest_significant = if s.n_b >= 2 {
        let df2 = match fit.df_resid {
            Df::Finite(v) => v,
            Df::Infinite => unreachable!("gaussian fits have finite df"),
        };
        let rss_full = fit.sigma2.unwrap_or(0.0) * df2;
        let df1 = (plan.layout.non_empty_cells() - add.ols.rank) as f64;
        let f = ((add.ols.rss - rss_full).max(0.0) / df1) / (rss_full / df2);
        f_sf(f, df1, df2) <= s.pretest_alpha
    } else {
        false
    };

    let mut pretest = vec![None; plan.joint.cm.n_rows()];
    if pretest_significant {
        for (b, fam) in plan.separate.iter().enumerate() {
            let sub = ds.restrict_to_stratum(&plan.layout.b_levels[b])?;
            let sfit = fit_gaussian_cell_means(&sub)?;
            let sv = coefficient_covariance(&sub, &sfit, s.covariance)?;
            let (t, corr) = statistics(&fam.cm, &sfit.beta, &sv)?;
            let d = decide(&t, &corr, sfit.df_resid, fam.critical, s, &plan.opts, mvt_seed ^ (b as u64 + 1));
            for (i, &r) in plan.separate_rows[b].iter().enumerate() {
                pretest[r] = Some(d[i]);
            }
        }
    } else {
        let av = add.covariance(s.covariance)?;
        let (t, corr) = statistics(&plan.additive.cm, &add.ols.coefficients, &av)?;
        let df = Df::Finite(add.df_resid() as f64);
        let d = decide(&t, &corr, df, plan.additive.critical, s, &plan.opts, mvt_seed ^ 0xadd);
        for (i, &r) in plan.additive_rows.iter().enumerate() {
            pretest[r] = Some(d[i]);
        }
    }
    Ok(RepOutcome {
        joint,
        pretest_significant,
        pretest,
    })
}

/// Rejection rates of one joint row under both strategies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RowRates {
    pub label: String,
    pub tag: RowTag,
    pub true_null: bool,
    pub power_joint: f64,
    /// Fraction of replications in which strategy B tested and rejected this row.
    pub power_pretest: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimReport {
    pub replications: usize,
    pub fwer_joint: f64,
    pub fwer_pretest: f64,
    /// `sqrt(r (1 - r) / reps)` of `fwer_joint`.
    pub mc_se: f64,
    pub mc_se_pretest: f64,
    pub pretest_rate: f64,
    pub rows: Vec<RowRates>,
}

fn mc_se(r: f64, reps: usize) -> f64 {
    libm::sqrt(r * (1.0 - r) / reps as f64)
}

/// Reduce replication outcomes, in replication order, to a report.
pub fn summarize(plan: &SimPlan, outcomes: &[RepOutcome]) -> SimReport {
    let reps = outcomes.len();
    let q = plan.joint.cm.n_rows();
    let nulls = &plan.joint.true_null;
    let mut fw_a = 0usize;
    let mut fw_b = 0usize;
    let mut pre = 0usize;
    let mut rej_a = vec![0usize; q];
    let mut rej_b = vec![0usize; q];
    for o in outcomes {
        if (0..q).any(|i| nulls[i] && o.joint[i]) {
            fw_a += 1;
        }
        let false_b = if o.pretest_significant {
            plan.separate.iter().enumerate().any(|(b, fam)| {
                plan.separate_rows[b]
                    .iter()
                    .enumerate()
                    .any(|(i, &r)| fam.true_null[i] && o.pretest[r] == Some(true))
            })
        } else {
            plan.additive_rows
                .iter()
                .enumerate()
                .any(|(i, &r)| plan.additive.true_null[i] && o.pretest[r] == Some(true))
        };
        if false_b {
            fw_b += 1;
        }
        pre += usize::from(o.pretest_significant);
        for i in 0..q {
            rej_a[i] += usize::from(o.joint[i]);
            rej_b[i] += usize::from(o.pretest[i] == Some(true));
        }
    }
    let rate = |c: usize| c as f64 / reps.max(1) as f64;
    let fwer_joint = rate(fw_a);
    let fwer_pretest = rate(fw_b);
    SimReport {
        replications: reps,
        fwer_joint,
        fwer_pretest,
        mc_se: mc_se(fwer_joint, reps),
        mc_se_pretest: mc_se(fwer_pretest, reps),
        pretest_rate: rate(pre),
        rows: (0..q)
            .map(|i| RowRates {
                label: plan.joint.cm.labels[i].clone(),
                tag: plan.joint.cm.tags[i].clone(),
                true_null: nulls[i],
                power_joint: rate(rej_a[i]),
                power_pretest: rate(rej_b[i]),
            })
            .collect(),
    }
}

impl SimPlan {
    pub fn replications(&self) -> usize {
        self.scenario.replications
    }

    pub fn joint_labels(&self) -> &[String] {
        &self.joint.cm.labels
    }
}

/// Run every replication in order and summarize.
pub fn run_scenario(s: &Scenario) -> Result<SimReport> {
    let plan = plan(s)?;
    let outcomes = (0..s.replications as u64)
        .map(|r| run_replication(&plan, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&plan, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_one_rejects_everything() {
        let mut s = Scenario::global_null(2, 2, 4, 20, 3);
        s.alpha = 1.0;
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.fwer_joint, 1.0);
        assert_eq!(r.fwer_pretest, 1.0);
        assert_eq!(r.mc_se, 0.0);
    }

    #[test]
    fn same_seed_same_report() {
        let s = Scenario::global_null(2, 2, 5, 40, 11);
        assert_eq!(run_scenario(&s).unwrap(), run_scenario(&s).unwrap());
    }

    #[test]
    fn rejects_invalid() {
        let mut s = Scenario::global_null(2, 2, 5, 10, 1);
        s.sds[0] = 0.0;
        assert!(matches!(run_scenario(&s), Err(Error::InvalidScenario(_))));
        let mut s = Scenario::global_null(2, 2, 5, 0, 1);
        s.replications = 0;
        assert!(s.validate().is_err());
    }
}

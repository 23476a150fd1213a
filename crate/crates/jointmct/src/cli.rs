//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on data or model errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jointmct_core::contrasts::{build_family, expand_joint, ContrastMatrix, Family, JointBlocks, RowTag};
use jointmct_core::dataset::{BinomialDataset, LongDataset};
use jointmct_core::inference::{
    analyze_binomial, interaction_f_test, run_additive_test, run_binomial_global_test, run_global_test,
    run_joint_test, run_separate_test, JointResult, TestSettings, DEFAULT_SEED,
};
use jointmct_core::models::{coefficient_covariance, fit_binomial_logit, fit_gaussian_cell_means, AddTwo, CovarianceKind};
use jointmct_core::mvt::{equicoordinate_quantile, MvtOptions, Tail};
use jointmct_core::nonpar::run_joint_nonpar;
use jointmct_core::{Alternative, Df};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures::{FixtureData, Manifest};
use crate::io::{load_binomial_csv, load_contrast_csv, load_long_csv, write_contrast_csv, BinomialColumns, LongColumns};
use crate::report::{self, Format, Report, Section};
use crate::scenario::{parse_covariance, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "jointmct", version, about = "Joint per-stratum and pooled multiple contrast tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian joint test on a long-format CSV.
    Test(TestArgs),
    /// Rank-based joint test of relative effects.
    Nonpar(NonparArgs),
    /// Joint test of log odds ratios from aggregated binomial counts.
    Glm(GlmArgs),
    /// Equicoordinate critical value of an equicorrelated family.
    Quantile(QuantileArgs),
    /// FWER and power of the joint test versus interaction pre-testing.
    Simulate(SimulateArgs),
    /// Interaction F test of the two-factor ANOVA.
    Pretest(PretestArgs),
}

fn parse_alternative(s: &str) -> std::result::Result<Alternative, String> {
    s.parse().map_err(|e: jointmct_core::Error| e.to_string())
}

fn parse_df(s: &str) -> std::result::Result<Df, String> {
    match s {
        "inf" | "Inf" | "infinite" => Ok(Df::Infinite),
        _ => {
            let v: f64 = s.parse().map_err(|_| format!("`{s}` is neither a number nor `inf`"))?;
            if v > 0.0 && v.is_finite() {
                Ok(Df::Finite(v))
            } else {
                Err("degrees of freedom must be positive".into())
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format CSV with a header row.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub data: Option<PathBuf>,
    /// Named fixture from the bundled manifest instead of --data.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Response column.
    #[arg(long, default_value = "response")]
    pub response: String,
    /// Primary factor column (the compared levels).
    #[arg(long, default_value = "primary")]
    pub primary: String,
    /// Secondary factor column (strata); omit for a single stratum.
    #[arg(long)]
    pub secondary: Option<String>,
    /// Comma-separated primary level order; the first level is the control.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    /// Comma-separated secondary level order.
    #[arg(long, value_delimiter = ',')]
    pub secondary_order: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// Contrast family: dunnett, williams, tukey or grand-mean.
    #[arg(long, default_value = "dunnett")]
    pub family: String,
    /// Control level for Dunnett contrasts (default: first level).
    #[arg(long)]
    pub control: Option<String>,
    /// Blocks to report: per-stratum, pooled, global, separate, additive.
    #[arg(long, value_delimiter = ',', default_value = "per-stratum,pooled")]
    pub include: Vec<String>,
    /// Contrast matrix CSV (label[,tag],<cell>...) replacing the joint family.
    #[arg(long)]
    pub contrasts: Option<PathBuf>,
    /// Write the joint contrast matrix to this CSV file.
    #[arg(long)]
    pub export_contrasts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Direction of the alternative: greater, less or two-sided.
    #[arg(long, value_parser = parse_alternative)]
    pub alternative: Alternative,
    /// Familywise error rate.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Seed of the randomized integration.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Target absolute error of adjusted p-values and critical values.
    #[arg(long, default_value_t = 1e-4)]
    pub precision: f64,
    /// Skip simultaneous intervals (faster).
    #[arg(long)]
    pub no_intervals: bool,
    /// Output format: text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: Format,
    /// Write (section, label, estimate, lower, upper) rows to this CSV file.
    #[arg(long)]
    pub emit_ci_plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Covariance of the cell means: model, hc0, hc1 or hc3.
    #[arg(long, default_value = "model", value_parser = parse_covariance)]
    pub covariance: CovarianceKind,
}

#[derive(Debug, Args)]
pub struct NonparArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct GlmArgs {
    /// Aggregated CSV with one row per cell.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub data: Option<PathBuf>,
    /// Named fixture from the bundled manifest instead of --data.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Primary factor column (the compared levels).
    #[arg(long, default_value = "a_level")]
    pub primary: String,
    /// Secondary factor column; pass an empty string for a single stratum.
    #[arg(long, default_value = "b_level")]
    pub secondary: String,
    /// Column of success counts.
    #[arg(long, default_value = "successes")]
    pub successes: String,
    /// Column of trial counts.
    #[arg(long, default_value = "trials")]
    pub trials: String,
    /// Comma-separated primary level order; the first level is the control.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    /// Comma-separated secondary level order.
    #[arg(long, value_delimiter = ',')]
    pub secondary_order: Option<Vec<String>>,
    /// Add one success and one failure per cell: auto (only with a zero cell), on or off.
    #[arg(long, default_value = "auto")]
    pub add_two: String,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    /// Number of comparisons.
    #[arg(long)]
    pub k: usize,
    /// Common correlation between the statistics.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Degrees of freedom, or `inf` for the normal.
    #[arg(long, default_value = "inf", value_parser = parse_df)]
    pub df: Df,
    /// Familywise error rate.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// One-sided critical value (default is two-sided).
    #[arg(long, conflicts_with = "two_sided")]
    pub one_sided: bool,
    /// Two-sided critical value.
    #[arg(long)]
    pub two_sided: bool,
    /// Seed of the randomized integration.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Target absolute error of the coverage probability.
    #[arg(long, default_value_t = 1e-4)]
    pub precision: f64,
    /// Output format: text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format: text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PretestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output format: text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: Format,
}

/// Blocks requested with `--include`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Include {
    per_stratum: bool,
    pooled: bool,
    global: bool,
    separate: bool,
    additive: bool,
}

impl Include {
    fn parse(items: &[String]) -> Result<Include> {
        let mut inc = Include::default();
        for it in items {
            match it.as_str() {
                "per-stratum" | "per_stratum" | "strata" => inc.per_stratum = true,
                "pooled" => inc.pooled = true,
                "global" => inc.global = true,
                "separate" => inc.separate = true,
                "additive" => inc.additive = true,
                other => {
                    return Err(Error::Usage(format!(
                        "unknown --include item `{other}` (expected per-stratum, pooled, global, separate or additive)"
                    )))
                }
            }
        }
        Ok(inc)
    }

    fn joint(&self) -> Option<JointBlocks> {
        (self.per_stratum || self.pooled).then_some(JointBlocks {
            per_stratum: self.per_stratum,
            pooled: self.pooled,
        })
    }
}

fn family_of(args: &FamilyArgs, order: &Option<Vec<String>>, fixture_ordered: bool) -> Result<Family> {
    let family = Family::parse(&args.family, args.control.clone()).map_err(|e| Error::Usage(e.to_string()))?;
    if family == Family::Williams && order.is_none() && !fixture_ordered {
        return Err(Error::Usage(
            "williams contrasts need the dose order: pass --order, e.g. --order 0,1,10".into(),
        ));
    }
    if args.control.is_some() && !matches!(family, Family::Dunnett { .. }) {
        return Err(Error::Usage("--control applies to dunnett contrasts only".into()));
    }
    Ok(family)
}

fn settings(run: &RunArgs) -> Result<TestSettings> {
    if !(run.alpha > 0.0 && run.alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha must lie in (0, 1), got {}", run.alpha)));
    }
    if !(run.precision > 0.0) {
        return Err(Error::Usage("--precision must be positive".into()));
    }
    let mut s = TestSettings::new(run.alpha, run.alternative).with_seed(run.seed);
    s.mvt = MvtOptions::with_precision(run.precision);
    s.intervals = !run.no_intervals;
    Ok(s)
}

fn load_long(d: &DataArgs) -> Result<(LongDataset, bool)> {
    match (&d.data, &d.fixture) {
        (Some(path), _) => {
            let cols = LongColumns {
                response: d.response.clone(),
                primary: d.primary.clone(),
                secondary: d.secondary.clone(),
                primary_order: d.order.clone(),
                secondary_order: d.secondary_order.clone(),
            };
            Ok((load_long_csv(path, &cols)?, false))
        }
        (None, Some(name)) => {
            let m = Manifest::bundled();
            let entry = m.get(name)?;
            match entry.load()? {
                FixtureData::Long(ds) => Ok((ds, entry.primary_order.is_some())),
                FixtureData::Binomial(_) => Err(Error::Usage(format!("fixture `{name}` holds binomial counts; use glm"))),
            }
        }
        (None, None) => Err(Error::Usage("pass --data or --fixture".into())),
    }
}

fn load_binomial(a: &GlmArgs) -> Result<(BinomialDataset, bool)> {
    match (&a.data, &a.fixture) {
        (Some(path), _) => {
            let cols = BinomialColumns {
                primary: a.primary.clone(),
                secondary: (!a.secondary.is_empty()).then(|| a.secondary.clone()),
                successes: a.successes.clone(),
                trials: a.trials.clone(),
                primary_order: a.order.clone(),
                secondary_order: a.secondary_order.clone(),
            };
            Ok((load_binomial_csv(path, &cols)?, false))
        }
        (None, Some(name)) => {
            let m = Manifest::bundled();
            let entry = m.get(name)?;
            match entry.load()? {
                FixtureData::Binomial(ds) => Ok((ds, entry.primary_order.is_some())),
                FixtureData::Long(_) => Err(Error::Usage(format!("fixture `{name}` holds a continuous response; use test"))),
            }
        }
        (None, None) => Err(Error::Usage("pass --data or --fixture".into())),
    }
}

/// Joint contrast matrix: imported, or built from the family.
fn joint_matrix(
    fam: &FamilyArgs,
    family: &Family,
    layout: &jointmct_core::dataset::Layout,
    blocks: JointBlocks,
) -> Result<ContrastMatrix> {
    let cm = match &fam.contrasts {
        Some(path) => load_contrast_csv(path, layout)?,
        None => {
            let proto = build_family(family, &layout.a_levels, &layout.a_totals(), layout.a_order_explicit)?;
            expand_joint(&proto, layout, blocks)?
        }
    };
    if let Some(path) = &fam.export_contrasts {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_contrast_csv(&cm, f)?;
    }
    Ok(cm)
}

fn joint_title(blocks: JointBlocks, user: bool) -> String {
    if user {
        return "Joint test (user contrasts)".into();
    }
    match (blocks.per_stratum, blocks.pooled) {
        (true, true) => "Joint test (per-stratum and pooled rows)".into(),
        (true, false) => "Joint test (per-stratum rows)".into(),
        _ => "Joint test (pooled rows)".into(),
    }
}

/// Relabel a single-stratum analysis of collapsed data as global rows.
fn as_global(mut r: JointResult) -> JointResult {
    for row in &mut r.rows {
        let base = row.label.split_once(':').map_or(row.label.as_str(), |(_, l)| l).to_string();
        row.label = format!("g: {base}");
        row.tag = RowTag::Global;
    }
    r
}

fn write_outputs(report: &Report, run: &RunArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &run.emit_ci_plot {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        report::write_ci_plot(report, f)?;
    }
    let text = report::render(report, run.format)?;
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_test(a: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let inc = Include::parse(&a.family.include)?;
    let s = settings(&a.run)?;
    let (ds, fixture_ordered) = load_long(&a.data)?;
    let family = family_of(&a.family, &a.data.order, fixture_ordered)?;
    let mut rep = Report::default();
    if let Some(blocks) = inc.joint().or(a.family.contrasts.as_ref().map(|_| JointBlocks::default())) {
        let fit = fit_gaussian_cell_means(&ds)?;
        let vcov = coefficient_covariance(&ds, &fit, a.covariance)?;
        let cm = joint_matrix(&a.family, &family, ds.layout(), blocks)?;
        let r = run_joint_test(&fit, &vcov, &cm, &s, a.covariance)?;
        rep.sections.push(Section::from_result(joint_title(blocks, a.family.contrasts.is_some()), &r));
        if fit.degenerate_variance {
            rep.notes.push("residual variance is zero; statistics are degenerate".into());
        }
    }
    if inc.global {
        let r = run_global_test(&ds, &family, a.covariance, &s)?;
        rep.sections.push(Section::from_result("Global test (strata collapsed)", &r));
    }
    if inc.additive {
        let r = run_additive_test(&ds, &family, a.covariance, &s)?;
        rep.sections.push(Section::from_result("Pooled test in the additive model", &r));
    }
    if inc.separate {
        for b in &ds.layout().b_levels {
            let r = run_separate_test(&ds, b, &family, a.covariance, &s)?;
            rep.sections.push(Section::from_result(format!("Separate test, stratum {b}"), &r));
        }
    }
    if rep.sections.is_empty() {
        return Err(Error::Usage("--include selected nothing to report".into()));
    }
    write_outputs(&rep, &a.run, out)
}

fn cmd_nonpar(a: &NonparArgs, out: &mut dyn Write) -> Result<()> {
    let inc = Include::parse(&a.family.include)?;
    if inc.additive {
        return Err(Error::Usage("the additive model has no rank-based counterpart; drop `additive`".into()));
    }
    let s = settings(&a.run)?;
    let (ds, fixture_ordered) = load_long(&a.data)?;
    let family = family_of(&a.family, &a.data.order, fixture_ordered)?;
    let mut rep = Report::default();
    let one_stratum = |d: &LongDataset| -> Result<JointResult> {
        let l = d.layout();
        let proto = build_family(&family, &l.a_levels, &l.a_totals(), l.a_order_explicit)?;
        let cm = expand_joint(
            &proto,
            l,
            JointBlocks {
                per_stratum: true,
                pooled: false,
            },
        )?;
        Ok(run_joint_nonpar(d, &cm, &s)?)
    };
    if let Some(blocks) = inc.joint().or(a.family.contrasts.as_ref().map(|_| JointBlocks::default())) {
        let cm = joint_matrix(&a.family, &family, ds.layout(), blocks)?;
        let r = run_joint_nonpar(&ds, &cm, &s)?;
        rep.sections.push(Section::from_result(joint_title(blocks, a.family.contrasts.is_some()), &r));
    }
    if inc.global {
        let r = as_global(one_stratum(&ds.collapse_strata())?);
        rep.sections.push(Section::from_result("Global test (strata collapsed)", &r));
    }
    if inc.separate {
        for b in &ds.layout().b_levels {
            let r = one_stratum(&ds.restrict_to_stratum(b)?)?;
            rep.sections.push(Section::from_result(format!("Separate test, stratum {b}"), &r));
        }
    }
    if rep.sections.is_empty() {
        return Err(Error::Usage("--include selected nothing to report".into()));
    }
    write_outputs(&rep, &a.run, out)
}

fn cmd_glm(a: &GlmArgs, out: &mut dyn Write) -> Result<()> {
    let inc = Include::parse(&a.family.include)?;
    if inc.additive {
        return Err(Error::Usage("`additive` is available for the gaussian test only".into()));
    }
    let add_two = match a.add_two.as_str() {
        "auto" => AddTwo::Auto,
        "on" => AddTwo::On,
        "off" => AddTwo::Off,
        other => return Err(Error::Usage(format!("--add-two must be auto, on or off, got `{other}`"))),
    };
    let s = settings(&a.run)?;
    let (ds, fixture_ordered) = load_binomial(a)?;
    let family = family_of(&a.family, &a.order, fixture_ordered)?;
    let mut rep = Report::default();
    let fit = fit_binomial_logit(&ds, add_two)?;
    if fit.add_two && add_two == AddTwo::Auto {
        rep.notes
            .push("add-two adjustment applied: some cell has no successes or no failures".into());
    }
    if let Some(blocks) = inc.joint().or(a.family.contrasts.as_ref().map(|_| JointBlocks::default())) {
        let cm = joint_matrix(&a.family, &family, ds.layout(), blocks)?;
        let r = run_joint_test(&fit, &fit.vcov_model, &cm, &s, CovarianceKind::Model)?;
        rep.sections.push(Section::from_result(joint_title(blocks, a.family.contrasts.is_some()), &r));
    }
    if inc.global {
        let r = run_binomial_global_test(&ds, &family, add_two, &s)?;
        rep.sections.push(Section::from_result("Global test (strata collapsed)", &r));
    }
    if inc.separate {
        for b in &ds.layout().b_levels {
            let sub = ds.restrict_to_stratum(b)?;
            let r = analyze_binomial(
                &sub,
                &family,
                JointBlocks {
                    per_stratum: true,
                    pooled: false,
                },
                add_two,
                &s,
            )?;
            rep.sections.push(Section::from_result(format!("Separate test, stratum {b}"), &r));
        }
    }
    if rep.sections.is_empty() {
        return Err(Error::Usage("--include selected nothing to report".into()));
    }
    write_outputs(&rep, &a.run, out)
}

#[derive(Debug, Serialize)]
struct QuantileOut {
    k: usize,
    rho: f64,
    df: Option<f64>,
    alpha: f64,
    tail: &'static str,
    value: f64,
    coverage: f64,
    coverage_error: f64,
    seed: u64,
}

fn cmd_quantile(a: &QuantileArgs, out: &mut dyn Write) -> Result<()> {
    if a.k == 0 {
        return Err(Error::Usage("--k must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if !(a.precision > 0.0) {
        return Err(Error::Usage("--precision must be positive".into()));
    }
    let lo = if a.k > 1 { -1.0 / (a.k as f64 - 1.0) } else { -1.0 };
    if !(a.rho >= lo && a.rho <= 1.0) {
        return Err(Error::Usage(format!("--rho must lie in [{lo}, 1] for k = {}", a.k)));
    }
    let corr = DMatrix::from_fn(a.k, a.k, |i, j| if i == j { 1.0 } else { a.rho });
    let tail = if a.one_sided { Tail::OneSided } else { Tail::TwoSided };
    let q = equicoordinate_quantile(&corr, a.df, a.alpha, tail, &MvtOptions::with_precision(a.precision), a.seed)?;
    let res = QuantileOut {
        k: a.k,
        rho: a.rho,
        df: a.df.finite(),
        alpha: a.alpha,
        tail: if a.one_sided { "one-sided" } else { "two-sided" },
        value: q.value,
        coverage: q.coverage.value,
        coverage_error: q.coverage.mc_error,
        seed: a.seed,
    };
    let text = match a.format {
        Format::Text => format!(
            "{}\n{} critical value for k = {}, rho = {}, df = {}, alpha = {}; coverage {} (error {})\n",
            report::fmt_text(res.value),
            res.tail,
            res.k,
            res.rho,
            a.df,
            res.alpha,
            report::fmt_text(res.coverage),
            report::fmt_full(res.coverage_error)
        ),
        Format::Csv => {
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.serialize(&res)?;
                w.flush().map_err(|e| Error::io("<output>", e))?;
            }
            String::from_utf8(buf).expect("csv output is UTF-8")
        }
        Format::Json => serde_json::to_string_pretty(&res)? + "\n",
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut s = ScenarioConfig::load(&a.scenario)?.to_scenario()?;
    if let Some(r) = a.replications {
        s.replications = r;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if a.threads == Some(0) {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    let r = crate::sim::run_parallel(&s, a.threads)?;
    let text = report::render_simulation(&r, a.format)?;
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_pretest(a: &PretestArgs, out: &mut dyn Write) -> Result<()> {
    let (ds, _) = load_long(&a.data)?;
    let f = interaction_f_test(&ds)?;
    let text = report::render_f_test(&f, a.format)?;
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a, out),
        Command::Nonpar(a) => cmd_nonpar(a, out),
        Command::Glm(a) => cmd_glm(a, out),
        Command::Quantile(a) => cmd_quantile(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Pretest(a) => cmd_pretest(a, out),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                2
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}


//! Text, CSV and JSON renderings of test results.
//!
//! All three renderings are produced from the same [`Report`]. Text rounds
//! to four decimals; CSV and JSON print the shortest representation that
//! round-trips. Infinite interval bounds are written as `inf` / `-inf`.

use std::io::Write;

use jointmct_core::inference::{EffectScale, FTest, JointResult};
use jointmct_core::simulate::SimReport;
use jointmct_core::{Alternative, Df};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected text, csv or json)")),
        }
    }
}

/// Serialize non-finite floats as the strings `inf`, `-inf` and `nan`.
mod extended_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(super::fmt_full(*v).as_str())
        }
    }

    struct V;

    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of inf, -inf, nan")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.parse().map_err(E::custom)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(V)
    }
}

/// Full-precision rendering used by CSV and JSON.
pub fn fmt_full(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

/// Four-decimal rendering used by the text table.
pub fn fmt_text(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        fmt_full(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub tag: String,
    #[serde(with = "extended_f64")]
    pub estimate: f64,
    #[serde(with = "extended_f64")]
    pub se: f64,
    #[serde(with = "extended_f64")]
    pub statistic: f64,
    #[serde(with = "extended_f64")]
    pub p_raw: f64,
    #[serde(with = "extended_f64")]
    pub p_adj: f64,
    #[serde(with = "extended_f64")]
    pub p_adj_error: f64,
    #[serde(with = "extended_f64")]
    pub lower: f64,
    #[serde(with = "extended_f64")]
    pub upper: f64,
}

/// One jointly adjusted family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    pub scale: EffectScale,
    pub alternative: Alternative,
    pub alpha: f64,
    pub covariance: String,
    /// Residual degrees of freedom; absent for the normal reference.
    pub df: Option<f64>,
    /// Equicoordinate critical value; absent when intervals were skipped.
    pub critical_value: Option<f64>,
    pub null_value: f64,
    pub seed: u64,
    pub rows: Vec<Row>,
    /// Correlation of the test statistics, row-major.
    pub correlation: Vec<Vec<f64>>,
}

impl Section {
    pub fn from_result(title: impl Into<String>, r: &JointResult) -> Section {
        let rows = r
            .rows
            .iter()
            .map(|row| Row {
                label: row.label.clone(),
                tag: row.tag.describe(),
                estimate: row.estimate,
                se: row.se,
                statistic: row.tstat,
                p_raw: row.p_raw,
                p_adj: row.p_adj,
                p_adj_error: row.p_adj_error,
                lower: row.sci_lower,
                upper: row.sci_upper,
            })
            .collect();
        let q = r.corr_used.nrows();
        Section {
            title: title.into(),
            scale: r.scale,
            alternative: r.alternative,
            alpha: r.alpha,
            covariance: r.covariance_kind.as_str().to_string(),
            df: match r.df_used {
                Df::Finite(v) => Some(v),
                Df::Infinite => None,
            },
            critical_value: r.critical_value.is_finite().then_some(r.critical_value),
            null_value: r.null_value,
            seed: r.seed,
            rows,
            correlation: (0..q).map(|i| (0..q).map(|j| r.corr_used[(i, j)]).collect()).collect(),
        }
    }

    fn statistic_name(&self) -> &'static str {
        if self.df.is_some() {
            "t"
        } else {
            "z"
        }
    }
}

/// Everything one invocation prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Report {
    pub sections: Vec<Section>,
    pub interaction: Option<FTest>,
    pub notes: Vec<String>,
}

fn scale_name(s: EffectScale) -> &'static str {
    match s {
        EffectScale::Mean => "mean differences",
        EffectScale::LogOdds => "log odds ratios",
        EffectScale::RelativeEffect => "relative effects",
    }
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol)
        .map(|j| rows.iter().map(|r| r.get(j).map_or(0, |c| c.chars().count())).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j < 3 {
                    format!("{c:<w$}", w = widths[j])
                } else {
                    format!("{c:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn f_test_line(f: &FTest) -> String {
    format!(
        "Interaction F test: F = {} on {} and {} df, p = {}\n",
        fmt_text(f.f),
        f.df1,
        f.df2,
        fmt_text(f.p)
    )
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for (k, s) in report.sections.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{}\n", s.title));
        let df = s.df.map_or("inf".to_string(), |d| fmt_full(d));
        let crit = s.critical_value.map_or("not computed".to_string(), fmt_text);
        out.push_str(&format!(
            "{}, alternative {}, alpha {}, covariance {}, df {}, critical value {}, seed {}\n",
            scale_name(s.scale),
            s.alternative.as_str(),
            s.alpha,
            s.covariance,
            df,
            crit,
            s.seed
        ));
        if s.scale == EffectScale::RelativeEffect {
            out.push_str("statistics on the probit scale, null value 0.5\n");
        }
        let mut rows = vec![vec![
            "No".to_string(),
            "Type".to_string(),
            "Comparison".to_string(),
            "Estimate".to_string(),
            "Std.Err".to_string(),
            format!("{} value", s.statistic_name()),
            "p raw".to_string(),
            "p adj".to_string(),
            "lower".to_string(),
            "upper".to_string(),
        ]];
        for (i, r) in s.rows.iter().enumerate() {
            rows.push(vec![
                (i + 1).to_string(),
                r.tag.clone(),
                r.label.clone(),
                fmt_text(r.estimate),
                fmt_text(r.se),
                fmt_text(r.statistic),
                fmt_text(r.p_raw),
                fmt_text(r.p_adj),
                fmt_text(r.lower),
                fmt_text(r.upper),
            ]);
        }
        out.push_str(&pad_table(&rows));
    }
    if let Some(f) = &report.interaction {
        if !report.sections.is_empty() {
            out.push('\n');
        }
        out.push_str(&f_test_line(f));
    }
    for n in &report.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out
}

pub const CSV_HEADER: [&str; 12] = [
    "section", "no", "label", "tag", "estimate", "se", "statistic", "p_raw", "p_adj", "p_adj_error", "lower", "upper",
];

pub fn write_csv<W: Write>(report: &Report, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in &report.sections {
        for (i, r) in s.rows.iter().enumerate() {
            w.write_record([
                s.title.clone(),
                (i + 1).to_string(),
                r.label.clone(),
                r.tag.clone(),
                fmt_full(r.estimate),
                fmt_full(r.se),
                fmt_full(r.statistic),
                fmt_full(r.p_raw),
                fmt_full(r.p_adj),
                fmt_full(r.p_adj_error),
                fmt_full(r.lower),
                fmt_full(r.upper),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn render_csv(report: &Report) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn render_json(report: &Report) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Text => Ok(render_text(report)),
        Format::Csv => render_csv(report),
        Format::Json => render_json(report).map(|s| s + "\n"),
    }
}

/// `(section, label, estimate, lower, upper)` rows for interval plots.
pub fn write_ci_plot<W: Write>(report: &Report, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["section", "label", "estimate", "lower", "upper"])?;
    for s in &report.sections {
        for r in &s.rows {
            w.write_record([
                s.title.clone(),
                r.label.clone(),
                fmt_full(r.estimate),
                fmt_full(r.lower),
                fmt_full(r.upper),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn render_f_test(f: &FTest, format: Format) -> Result<String> {
    match format {
        Format::Text => Ok(f_test_line(f)),
        Format::Csv => {
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["f", "df1", "df2", "p"])?;
                w.write_record([fmt_full(f.f), f.df1.to_string(), f.df2.to_string(), fmt_full(f.p)])?;
                w.flush().map_err(|e| Error::io("<output>", e))?;
            }
            Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
        }
        Format::Json => Ok(serde_json::to_string_pretty(f)? + "\n"),
    }
}

pub fn render_simulation(r: &SimReport, format: Format) -> Result<String> {
    match format {
        Format::Text => {
            let mut out = format!(
                "replications {}\nFWER joint {} (mc se {})\nFWER pre-test {} (mc se {})\npre-test significant in {}\n",
                r.replications,
                fmt_text(r.fwer_joint),
                fmt_text(r.mc_se),
                fmt_text(r.fwer_pretest),
                fmt_text(r.mc_se_pretest),
                fmt_text(r.pretest_rate)
            );
            let mut rows = vec![vec![
                "Comparison".to_string(),
                "Type".to_string(),
                "True null".to_string(),
                "Joint".to_string(),
                "Pre-test".to_string(),
            ]];
            for row in &r.rows {
                rows.push(vec![
                    row.label.clone(),
                    row.tag.describe(),
                    row.true_null.to_string(),
                    fmt_text(row.power_joint),
                    fmt_text(row.power_pretest),
                ]);
            }
            out.push_str(&pad_table(&rows));
            Ok(out)
        }
        Format::Csv => {
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["label", "tag", "true_null", "rate_joint", "rate_pretest"])?;
                w.write_record([
                    "FWER".to_string(),
                    "family".to_string(),
                    "true".to_string(),
                    fmt_full(r.fwer_joint),
                    fmt_full(r.fwer_pretest),
                ])?;
                for row in &r.rows {
                    w.write_record([
                        row.label.clone(),
                        row.tag.describe(),
                        row.true_null.to_string(),
                        fmt_full(row.power_joint),
                        fmt_full(row.power_pretest),
                    ])?;
                }
                w.flush().map_err(|e| Error::io("<output>", e))?;
            }
            Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
        }
        Format::Json => Ok(serde_json::to_string_pretty(r)? + "\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            sections: vec![Section {
                title: "joint".into(),
                scale: EffectScale::Mean,
                alternative: Alternative::Greater,
                alpha: 0.05,
                covariance: "hc0".into(),
                df: Some(359.0),
                critical_value: Some(2.5),
                null_value: 0.0,
                seed: 7,
                rows: vec![Row {
                    label: "m:1 - 0".into(),
                    tag: "stratum:m".into(),
                    estimate: 0.1 + 0.2,
                    se: 1.0 / 3.0,
                    statistic: 0.9000000000000001,
                    p_raw: 0.18,
                    p_adj: 0.43,
                    p_adj_error: 1e-4,
                    lower: -0.533,
                    upper: f64::INFINITY,
                }],
                correlation: vec![vec![1.0]],
            }],
            interaction: None,
            notes: vec![],
        }
    }

    #[test]
    fn json_round_trips_exactly() {
        let r = sample();
        let back: Report = serde_json::from_str(&render_json(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_keeps_full_precision() {
        let csv = render_csv(&sample()).unwrap();
        assert!(csv.contains("0.30000000000000004"));
        assert!(csv.contains(",inf\n"));
    }

    #[test]
    fn text_rounds_to_four_decimals() {
        let t = render_text(&sample());
        assert!(t.contains("0.3000"));
        assert!(t.contains("0.3333"));
        assert!(t.contains("inf"));
    }
}

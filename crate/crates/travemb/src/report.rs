//! Tables, charts and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use travemb_core::mds::{layout_encoder, MdsLayout};
use travemb_core::mnl::EstimationResult;
use travemb_core::projection::{filter_report, project_all, ProjectedCoefficient};

use crate::config::{ExperimentConfig, ModelKind};
use crate::error::Result;
use crate::harness::{Comparison, ComparisonRow, Metrics, SweepPoint};
use crate::io::{csv_string, trace_csv, write_json, write_text};

pub fn stars(p: f64) -> &'static str {
    if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

const SUMMARY_HEADER: [&str; 11] = [
    "model", "n_params", "train_ll", "train_r2", "train_rbar2", "train_aic", "test_ll", "test_r2", "test_rbar2",
    "test_aic", "error",
];

fn metric_cells(m: Option<Metrics>, fmt: impl Fn(f64) -> String) -> [String; 4] {
    match m {
        Some(m) => [
            fmt(m.log_likelihood),
            fmt(m.rho_squared),
            fmt(m.rho_bar_squared),
            fmt(m.aic),
        ],
        None => Default::default(),
    }
}

fn summary_cells(r: &ComparisonRow, fmt: impl Fn(f64) -> String + Copy) -> Vec<String> {
    let mut cells = vec![r.model.clone(), r.n_params.map_or_else(String::new, |k| k.to_string())];
    cells.extend(metric_cells(r.train, fmt));
    cells.extend(metric_cells(r.test, fmt));
    cells.push(r.error.clone().unwrap_or_default());
    cells
}

pub fn summary_csv(rows: &[ComparisonRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| summary_cells(r, |x| x.to_string())).collect();
    csv_string(&SUMMARY_HEADER, &body)
}

pub fn summary_markdown(rows: &[ComparisonRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| summary_cells(r, |x| format!("{x:.3}"))).collect();
    markdown(&SUMMARY_HEADER, &body)
}

pub fn markdown(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| c.replace('|', "\\|")).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

const COEF_HEADER: [&str; 6] = ["parameter", "coefficient", "std_error", "z", "p_value", "stars"];

fn coefficient_rows(result: &EstimationResult, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
    (0..result.n_params())
        .map(|i| {
            vec![
                result.columns[i].label.clone(),
                fmt(result.coefficients[i]),
                fmt(result.std_errors[i]),
                fmt(result.z_scores[i]),
                fmt(result.p_values[i]),
                stars(result.p_values[i]).to_owned(),
            ]
        })
        .collect()
}

pub fn coefficients_csv(result: &EstimationResult) -> String {
    csv_string(&COEF_HEADER, &coefficient_rows(result, |x| x.to_string()))
}

/// Coefficient table followed by the fit statistics.
pub fn coefficients_markdown(result: &EstimationResult) -> String {
    let mut out = markdown(&COEF_HEADER, &coefficient_rows(result, |x| format!("{x:.4}")));
    let f = &result.fit;
    let _ = writeln!(
        out,
        "\nObservations: {}  Parameters: {}  Log-likelihood: {:.3}  LL0: {:.3}  Pseudo R2: {:.3}  Adj. pseudo R2: {:.3}  AIC: {:.3}",
        f.n_obs, f.n_params, f.log_likelihood, f.null_log_likelihood, f.rho_squared, f.rho_bar_squared, f.aic
    );
    out
}

const PROJ_HEADER: [&str; 8] = [
    "variable", "category", "alternative", "coefficient", "std_error", "z", "p_value", "significant",
];

pub fn projection_csv(table: &[ProjectedCoefficient], alternatives: &[String]) -> String {
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.variable.clone(),
                r.category.clone(),
                alternatives.get(r.alternative).cloned().unwrap_or_else(|| r.alternative.to_string()),
                r.coefficient.to_string(),
                r.std_error.to_string(),
                r.z.to_string(),
                r.p_value.to_string(),
                r.significant.to_string(),
            ]
        })
        .collect();
    csv_string(&PROJ_HEADER, &rows)
}

pub fn mds_csv(layout: &MdsLayout) -> String {
    let rows: Vec<Vec<String>> = layout
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut r = vec![l.clone()];
            r.extend((0..layout.coordinates.cols()).map(|d| layout.coordinates[(i, d)].to_string()));
            r
        })
        .collect();
    csv_string(&["category", "x", "y"][..1 + layout.coordinates.cols().min(2)], &rows)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 50.0;

fn scale(v: f64, (lo, hi): (f64, f64), out_lo: f64, out_hi: f64) -> f64 {
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

pub fn mds_svg(layout: &MdsLayout, title: &str) -> String {
    let n = layout.labels.len();
    let x = |i: usize| layout.coordinates[(i, 0)];
    let y = |i: usize| if layout.coordinates.cols() > 1 { layout.coordinates[(i, 1)] } else { 0.0 };
    let bx = bounds((0..n).map(x));
    let by = bounds((0..n).map(y));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    for i in 0..n {
        let px = scale(x(i), bx, PAD, W - PAD);
        let py = scale(y(i), by, H - PAD, PAD);
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="steelblue"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px + 4.0, py - 4.0, escape(&layout.labels[i]));
    }
    s.push_str("</svg>\n");
    s
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let models: Vec<ModelKind> = points.first().map(|p| p.r2.iter().map(|(m, _)| *m).collect()).unwrap_or_default();
    let mut header = vec!["scenario", "fraction", "n_detailed"];
    header.extend(models.iter().map(|m| m.as_str()));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = vec![p.scenario.as_str().to_owned(), p.fraction.to_string(), p.n_detailed.to_string()];
            r.extend(models.iter().map(|m| opt(p.get(*m))));
            r
        })
        .collect();
    csv_string(&header, &rows)
}

const PALETTE: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

/// Line chart of test pseudo R² by fraction; absent points break the line.
pub fn sweep_svg(points: &[SweepPoint], title: &str) -> String {
    let models: Vec<ModelKind> = points.first().map(|p| p.r2.iter().map(|(m, _)| *m).collect()).unwrap_or_default();
    let bx = bounds(points.iter().map(|p| p.fraction));
    let by = bounds(points.iter().flat_map(|p| p.r2.iter().filter_map(|(_, v)| *v)).chain([0.0]));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x2 = W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">detailed survey fraction</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">test pseudo R2</text>"#, H / 2.0, H / 2.0);
    for (j, m) in models.iter().enumerate() {
        let colour = PALETTE[j % PALETTE.len()];
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let flush = |seg: &mut Vec<(f64, f64)>, s: &mut String| {
            if seg.len() > 1 {
                let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, pts.join(" "));
            }
            seg.clear();
        };
        for p in points {
            match p.get(*m) {
                Some(v) => {
                    let (px, py) = (scale(p.fraction, bx, PAD, W - PAD), scale(v, by, H - PAD, PAD));
                    let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{colour}"/>"#);
                    segment.push((px, py));
                }
                None => flush(&mut segment, &mut s),
            }
        }
        flush(&mut segment, &mut s);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - PAD - 90.0,
            PAD + 14.0 * j as f64,
            m.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn repeats_csv(c: &Comparison) -> Option<String> {
    let e = c.embeddings.as_ref()?;
    let rows: Vec<Vec<String>> = e
        .repeats
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                r.dev_log_likelihood.to_string(),
                opt(r.train.map(|m| m.log_likelihood)),
                opt(r.test.map(|m| m.log_likelihood)),
                opt(r.test.map(|m| m.rho_squared)),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    Some(csv_string(
        &["seed", "net_dev_ll", "train_ll", "test_ll", "test_r2", "error"],
        &rows,
    ))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config_hash: String,
    pub seed: u64,
    pub embedding_seeds: Vec<u64>,
    pub diverged_seeds: Vec<u64>,
    pub best_seed: Option<u64>,
    pub test_ll_spread: Option<crate::harness::Spread>,
    pub failures: BTreeMap<String, String>,
    pub dropped_columns: BTreeMap<String, Vec<String>>,
    pub sweep: &'a str,
    pub seconds: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub config: &'a ExperimentConfig,
}

fn save(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> Result<()> {
    write_text(&dir.join(name), text)?;
    files.push(name.to_owned());
    Ok(())
}

/// Writes all comparison and sweep artefacts under `dir`; returns the file names.
pub fn export_report(
    config: &ExperimentConfig,
    comparison: Option<&Comparison>,
    sweep: &[SweepPoint],
    alternatives: &[String],
    seconds: &[(String, f64)],
    dir: &Path,
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut failures = BTreeMap::new();
    let mut dropped = BTreeMap::new();
    if let Some(c) = comparison {
        save(dir, "summary.csv", &summary_csv(&c.rows), &mut files)?;
        save(dir, "summary.md", &summary_markdown(&c.rows), &mut files)?;
        for row in c.rows.iter().filter(|r| r.error.is_some()) {
            failures.insert(row.model.clone(), row.error.clone().unwrap_or_default());
        }
        for m in &c.models {
            let stem = file_stem(&m.name);
            save(dir, &format!("coefficients_{stem}.csv"), &coefficients_csv(&m.result), &mut files)?;
            save(dir, &format!("coefficients_{stem}.md"), &coefficients_markdown(&m.result), &mut files)?;
            if !m.dropped.is_empty() {
                dropped.insert(m.name.clone(), m.dropped.clone());
            }
            if m.encoders.iter().any(|e| e.kind != travemb_core::encoders::EncoderKind::Dummy) {
                let table = project_all(&m.result, &m.encoders, config.independent_projection)?;
                save(dir, &format!("projected_{stem}.csv"), &projection_csv(&table, alternatives), &mut files)?;
                let filtered = filter_report(&table, 0.0, travemb_core::projection::SIGNIFICANCE);
                save(dir, &format!("projected_{stem}_significant.csv"), &projection_csv(&filtered, alternatives), &mut files)?;
            }
        }
        if let Some(e) = &c.embeddings {
            save(dir, "embedding_repeats.csv", &repeats_csv(c).unwrap_or_default(), &mut files)?;
            save(dir, "embedding_trace.csv", &trace_csv(&e.best_run), &mut files)?;
            for enc in travemb_core::embed::export(&e.best_run) {
                let layout = layout_encoder(&enc)?;
                let stem = file_stem(&enc.variable);
                save(dir, &format!("mds_{stem}.csv"), &mds_csv(&layout), &mut files)?;
                save(dir, &format!("mds_{stem}.svg"), &mds_svg(&layout, &format!("{} embeddings", enc.variable)), &mut files)?;
                write_json(&dir.join(format!("encoder_{stem}.json")), &enc)?;
                files.push(format!("encoder_{stem}.json"));
            }
        }
    }
    if !sweep.is_empty() {
        save(dir, "sweep.csv", &sweep_csv(sweep), &mut files)?;
        let mut scenarios: Vec<_> = sweep.iter().map(|p| p.scenario).collect();
        scenarios.dedup();
        for s in scenarios {
            let pts: Vec<SweepPoint> = sweep.iter().filter(|p| p.scenario == s).cloned().collect();
            save(dir, &format!("sweep_{}.svg", s.as_str()), &sweep_svg(&pts, &format!("{} survey", s.as_str())), &mut files)?;
        }
    }
    let emb = comparison.and_then(|c| c.embeddings.as_ref());
    let manifest = Manifest {
        config_hash: config.hash(),
        seed: config.seed,
        embedding_seeds: travemb_core::embed::repeat_seeds(&config.embedding).collect(),
        diverged_seeds: emb.map(|e| e.diverged.clone()).unwrap_or_default(),
        best_seed: emb.map(|e| e.best_run.seed),
        test_ll_spread: emb.and_then(|e| e.test_log_likelihood),
        failures,
        dropped_columns: dropped,
        sweep: if sweep.is_empty() { "omitted" } else { "sweep.csv" },
        seconds: seconds.iter().cloned().collect(),
        files: files.clone(),
        config,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    files.push("manifest.json".into());
    Ok(files)
}

pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

//! The four workflows and their reports.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use dtl_core::characteristics::{
    full_report_with, multiarm_power, power_lfc_estimate, pwer_estimate, ReportOptions, DEFAULT_SEED,
};
use dtl_core::events::{integrate_sets, recommendation_problems, rejection_problems};
use dtl_core::mvn::{CALIBRATION_TOL, REPORTING_TOL};
use dtl_core::{
    calibrate_boundaries, comparator_multiarm, comparator_separate_trials, estimate_characteristics,
    find_sample_size, normal, stop_stage_problems, BoundaryShape, CalibrationConfig, EffectConfig,
    NormalEffectSpec, OperatingCharacteristics, TrialDesign,
};
use serde::{Deserialize, Serialize};

use crate::config::{check_calibration, parse_config, DesignInputs, EndpointInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Evaluate,
    Simulate,
    Compare,
}

/// Command-line overrides of configuration values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub tol: Option<f64>,
    pub alpha: Option<f64>,
    pub power: Option<f64>,
    pub omega: Option<f64>,
}

pub const DEFAULT_REPS: u64 = 100_000;

/// A calibrated design together with everything needed to evaluate it
/// again. This is what `design` writes; `evaluate`, `simulate` and
/// `compare` accept it in place of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub design: TrialDesign,
    pub shape: BoundaryShape,
    pub endpoint: EndpointInput,
    pub normal: NormalEffectSpec,
    pub calibration: CalibrationConfig,
    pub effects: BTreeMap<String, EffectConfig>,
    pub pwer: f64,
    pub power_lfc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub record: DesignRecord,
    pub characteristics: OperatingCharacteristics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: String,
    pub analytic: f64,
    pub simulated: f64,
    pub standard_error: f64,
    /// `(simulated - analytic) / standard_error`, or 0 when both agree
    /// exactly.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub record: DesignRecord,
    pub replicates: u64,
    pub seed: u64,
    pub focal_arm: usize,
    pub configs: BTreeMap<String, Vec<MetricComparison>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub design: String,
    pub in_scope: bool,
    pub n_per_stage: Option<u32>,
    /// `None` entries are infinite boundaries.
    pub boundaries: Option<Vec<Option<f64>>>,
    pub power: Option<f64>,
    pub type_i: Option<f64>,
    pub pwer: Option<f64>,
    pub max_n: Option<u64>,
    pub ess: BTreeMap<String, f64>,
}

impl CompareRow {
    fn out_of_scope(design: &str) -> Self {
        Self {
            design: design.to_string(),
            in_scope: false,
            n_per_stage: None,
            boundaries: None,
            power: None,
            type_i: None,
            pwer: None,
            max_n: None,
            ess: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub configs: Vec<String>,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Design(DesignRecord),
    Evaluate(EvaluationReport),
    Simulate(SimulationReport),
    Compare(CompareReport),
}

/// Input file contents: either a configuration or a design record.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Config(DesignInputs),
    Record(Box<DesignRecord>),
}

pub fn load_input(text: &str) -> Result<Input> {
    if text.trim_start().starts_with('{') {
        let record: DesignRecord = serde_json::from_str(text).context("reading design record")?;
        Ok(Input::Record(Box::new(record)))
    } else {
        Ok(Input::Config(parse_config(text)?))
    }
}

pub fn run(command: Command, input: Input, o: &Overrides) -> Result<Report> {
    if let Some(t) = o.tol {
        if !(t > 0.0 && t < 1.0) {
            bail!("invalid value for `--tol`: {t} is not in (0, 1)");
        }
    }
    if o.reps == Some(0) {
        bail!("invalid value for `--reps`: must be at least 1");
    }
    let inputs = apply_overrides(input, o)?;
    Ok(match command {
        Command::Design => Report::Design(design_record(&inputs)?),
        Command::Evaluate => Report::Evaluate(evaluate(&inputs, o)?),
        Command::Simulate => Report::Simulate(simulate(&inputs, o)?),
        Command::Compare => Report::Compare(compare(&inputs, o)?),
    })
}

/// Settings for a run: a configuration still to be designed, or a finished
/// design whose settings were not overridden.
enum Resolved {
    Fresh(DesignInputs),
    Fixed(Box<DesignRecord>),
}

impl Resolved {
    fn inputs(&self) -> DesignInputs {
        match self {
            Resolved::Fresh(i) => i.clone(),
            Resolved::Fixed(r) => DesignInputs {
                arms: r.design.arms(),
                shape: r.shape.clone(),
                n_per_stage: None,
                endpoint: r.endpoint,
                calibration: r.calibration,
                effects: r.effects.clone(),
            },
        }
    }
}

fn apply_overrides(input: Input, o: &Overrides) -> Result<Resolved> {
    let touches_design = o.alpha.is_some() || o.power.is_some() || o.omega.is_some();
    let mut inputs = match input {
        Input::Record(r) if !touches_design && o.seed.is_none() => return Ok(Resolved::Fixed(r)),
        Input::Record(r) if !touches_design => {
            let mut r = *r;
            r.calibration.seed = o.seed.expect("checked above");
            return Ok(Resolved::Fixed(Box::new(r)));
        }
        Input::Record(r) => Resolved::Fixed(r).inputs(),
        Input::Config(c) => c,
    };
    let cal = &mut inputs.calibration;
    if let Some(a) = o.alpha {
        cal.alpha = a;
    }
    if let Some(p) = o.power {
        cal.power_target = p;
    }
    if let Some(w) = o.omega {
        cal.omega = w;
    }
    if let Some(s) = o.seed {
        cal.seed = s;
    }
    check_calibration(cal, &|_| None)?;
    Ok(Resolved::Fresh(inputs))
}

fn calibrated(inputs: &DesignInputs, shape: &BoundaryShape) -> Result<TrialDesign> {
    let normal = inputs.endpoint.normal();
    let template = TrialDesign::new(
        inputs.arms,
        inputs.n_per_stage.unwrap_or(1),
        shape.boundaries(inputs.arms, 1.0)?,
        inputs.calibration.alpha,
        normal.sigma(),
    )?;
    let design = calibrate_boundaries(&template, shape, &inputs.calibration).context("calibrating boundaries")?;
    if inputs.n_per_stage.is_some() {
        return Ok(design);
    }
    find_sample_size(&design, normal.theta_prime, normal.theta_zero, &inputs.calibration).context("searching for the sample size")
}

fn record_for(inputs: &DesignInputs, shape: &BoundaryShape, design: TrialDesign) -> Result<DesignRecord> {
    let normal = inputs.endpoint.normal();
    let seed = inputs.calibration.seed;
    let pwer = pwer_estimate(&design, CALIBRATION_TOL.min(inputs.calibration.pwer_tol()), seed)?.value;
    let power = power_lfc_estimate(&design, normal.theta_prime, normal.theta_zero, inputs.calibration.power_tol, seed)?.value;
    Ok(DesignRecord {
        design,
        shape: shape.clone(),
        endpoint: inputs.endpoint,
        normal,
        calibration: inputs.calibration,
        effects: inputs.effects.clone(),
        pwer,
        power_lfc: power,
    })
}

fn design_record(r: &Resolved) -> Result<DesignRecord> {
    let inputs = r.inputs();
    let design = calibrated(&inputs, &inputs.shape)?;
    record_for(&inputs, &inputs.shape, design)
}

fn resolve_record(r: Resolved) -> Result<DesignRecord> {
    match r {
        Resolved::Fixed(rec) => Ok(*rec),
        fresh => design_record(&fresh),
    }
}

fn report_options(record: &DesignRecord, o: &Overrides) -> ReportOptions {
    ReportOptions {
        target_abs_error: o.tol.unwrap_or(REPORTING_TOL),
        seed: record.calibration.seed,
    }
}

fn evaluate(r: &Resolved, o: &Overrides) -> Result<EvaluationReport> {
    let record = resolve_record(clone_resolved(r))?;
    let characteristics = full_report_with(&record.design, &record.normal, &record.effects, &report_options(&record, o))?;
    Ok(EvaluationReport { record, characteristics })
}

fn clone_resolved(r: &Resolved) -> Resolved {
    match r {
        Resolved::Fresh(i) => Resolved::Fresh(i.clone()),
        Resolved::Fixed(rec) => Resolved::Fixed(rec.clone()),
    }
}

fn compare_metric(metric: &str, analytic: f64, mc: dtl_core::simulate::McEstimate) -> MetricComparison {
    let diff = mc.value - analytic;
    MetricComparison {
        metric: metric.to_string(),
        analytic,
        simulated: mc.value,
        standard_error: mc.se,
        z: if diff == 0.0 { 0.0 } else { diff / mc.se },
    }
}

fn simulate(r: &Resolved, o: &Overrides) -> Result<SimulationReport> {
    let record = resolve_record(clone_resolved(r))?;
    let reps = o.reps.unwrap_or(DEFAULT_REPS);
    let seed = record.calibration.seed;
    let tol = o.tol.unwrap_or(REPORTING_TOL);
    let d = &record.design;
    let mut configs = BTreeMap::new();
    for (name, effects) in &record.effects {
        let sim = estimate_characteristics(d, effects, reps, seed, 1)?;
        let get = |m: &str| sim.get(m).expect("simulator reports every metric");
        let mut rows = Vec::new();
        let psi = integrate_sets(&stop_stage_problems(d, effects)?, tol, seed)?;
        let probs: Vec<f64> = psi.iter().map(|p| p.value).collect();
        let phi = integrate_sets(&recommendation_problems(d, effects, 1)?, tol, seed)?;
        rows.push(compare_metric("power", phi.iter().map(|p| p.value).sum(), get("power")));
        let nu = integrate_sets(&rejection_problems(d, effects, 1)?, tol, seed)?;
        rows.push(compare_metric("type_i", nu.iter().map(|p| p.value).sum(), get("type_i")));
        for (j, p) in probs.iter().enumerate() {
            let m = format!("stop_stage_{}", j + 1);
            rows.push(compare_metric(&m, *p, get(&m)));
        }
        let early: f64 = probs[..probs.len() - 1].iter().sum();
        rows.push(compare_metric("early_stop", early, get("early_stop")));
        let ess = dtl_core::characteristics::ess_from_stop_probs(d, &probs);
        rows.push(compare_metric("ess", ess, get("ess")));
        configs.insert(name.clone(), rows);
    }
    Ok(SimulationReport {
        record,
        replicates: reps,
        seed,
        focal_arm: 1,
        configs,
    })
}

fn boundaries_of(d: &TrialDesign) -> Vec<Option<f64>> {
    d.boundaries().iter().map(|u| u.is_finite().then_some(*u)).collect()
}

fn multistage_row(record: &DesignRecord, name: &str, o: &Overrides) -> Result<CompareRow> {
    let c = full_report_with(&record.design, &record.normal, &record.effects, &report_options(record, o))?;
    Ok(CompareRow {
        design: name.to_string(),
        in_scope: true,
        n_per_stage: Some(record.design.n_per_stage()),
        boundaries: Some(boundaries_of(&record.design)),
        power: Some(c.power_lfc),
        type_i: Some(c.type_i_global_null),
        pwer: Some(c.pwer),
        max_n: Some(c.max_n),
        ess: c.ess,
    })
}

fn single_stage_row(name: &str, n: u32, max_n: u64, power: f64, alpha: f64, configs: &[String]) -> CompareRow {
    let c = normal::quantile(1.0 - alpha);
    CompareRow {
        design: name.to_string(),
        in_scope: true,
        n_per_stage: Some(n),
        boundaries: Some(vec![Some(c)]),
        power: Some(power),
        type_i: Some(alpha),
        pwer: Some(alpha),
        max_n: Some(max_n),
        ess: configs.iter().map(|k| (k.clone(), max_n as f64)).collect(),
    }
}

fn compare(r: &Resolved, o: &Overrides) -> Result<CompareReport> {
    let inputs = r.inputs();
    let proposed = resolve_record(clone_resolved(r))?;
    let normal = proposed.normal;
    let cal = proposed.calibration;
    let arms = proposed.design.arms();
    let configs: Vec<String> = proposed.effects.keys().cloned().collect();

    let mut rows = vec![multistage_row(&proposed, "superiority drop-the-loser", o)?];

    let mut dtl_multipliers = vec![f64::INFINITY; arms];
    dtl_multipliers[arms - 1] = 1.0;
    let dtl_shape = BoundaryShape::Custom(dtl_multipliers);
    let dtl_inputs = DesignInputs {
        n_per_stage: None,
        ..inputs.clone()
    };
    let dtl = record_for(&dtl_inputs, &dtl_shape, calibrated(&dtl_inputs, &dtl_shape)?)?;
    rows.push(multistage_row(&dtl, "drop-the-loser", o)?);

    let (alpha, power) = (cal.alpha, cal.power_target);
    let sigma = normal.sigma();
    let ma = comparator_multiarm(arms, alpha, power, normal.theta_prime, normal.theta_zero, sigma)?;
    let ma_power = multiarm_power(
        arms,
        ma.n_per_group,
        alpha,
        normal.theta_prime,
        normal.theta_zero,
        sigma,
        o.tol.unwrap_or(REPORTING_TOL),
        DEFAULT_SEED,
    )?
    .value;
    rows.push(single_stage_row("multi-arm", ma.n_per_group, ma.max_n, ma_power, alpha, &configs));
    rows.push(CompareRow::out_of_scope("MAMS symmetric futility"));
    rows.push(CompareRow::out_of_scope("MAMS zero futility"));

    let st = comparator_separate_trials(arms, alpha, power, normal.theta_prime, sigma)?;
    let z = (normal.theta_prime * (f64::from(st.n_per_group) / 2.0).sqrt() / sigma) - normal::quantile(1.0 - alpha);
    rows.push(single_stage_row("separate trials", st.n_per_group, st.max_n, normal::cdf(z), alpha, &configs));
    rows.push(CompareRow::out_of_scope("multi-stage separate trials symmetric futility"));
    rows.push(CompareRow::out_of_scope("multi-stage separate trials zero futility"));
    Ok(CompareReport { configs, rows })
}

fn fmt_opt(v: Option<f64>, dp: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.dp$}"))
}

fn fmt_boundaries(b: &[Option<f64>]) -> String {
    let parts: Vec<String> = b.iter().map(|u| u.map_or_else(|| "inf".to_string(), |x| format!("{x:.2}"))).collect();
    format!("({})", parts.join(", "))
}

/// Left-aligned first column, right-aligned others.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |r: &[String], out: &mut String| {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    };
    line(header, &mut out);
    let total: usize = width.iter().sum::<usize>() + 2 * (cols - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(r, &mut out);
    }
    out
}

fn design_lines(r: &DesignRecord) -> String {
    format!(
        "boundaries {}\nn per stage {}\nmax N {}\nPWER {:.5}\npower {:.3}\ntheta' {:.4}  theta0 {:.4}  sigma^2 {:.4}\n",
        fmt_boundaries(&boundaries_of(&r.design)),
        r.design.n_per_stage(),
        r.design.max_sample_size(),
        r.pwer,
        r.power_lfc,
        r.normal.theta_prime,
        r.normal.theta_zero,
        r.normal.sigma_sq
    )
}

/// Plain-text rendering: boundaries to 2 decimals, probabilities to 3 and
/// expected sample sizes to 1.
pub fn render_table(report: &Report) -> String {
    match report {
        Report::Design(r) => design_lines(r),
        Report::Evaluate(e) => {
            let c = &e.characteristics;
            let mut s = design_lines(&e.record);
            s.push_str(&format!("type I error (global null) {:.3}\n\n", c.type_i_global_null));
            let mut header = vec!["effects".to_string(), "ESS".to_string(), "early stop".to_string()];
            let stages = e.record.design.stages();
            header.extend((1..=stages).map(|j| format!("P(stop {j})")));
            let rows: Vec<Vec<String>> = c
                .ess
                .iter()
                .map(|(name, ess)| {
                    let mut r = vec![name.clone(), format!("{ess:.1}"), fmt_opt(c.early_stop(name), 3)];
                    r.extend(c.stop_probs[name].iter().map(|p| format!("{p:.3}")));
                    r
                })
                .collect();
            s.push_str(&table(&header, &rows));
            s
        }
        Report::Simulate(sr) => {
            let mut s = format!("{} replicates, seed {}, focal arm {}\n\n", sr.replicates, sr.seed, sr.focal_arm);
            let header: Vec<String> = ["effects", "metric", "analytic", "simulated", "se", "z"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = sr
                .configs
                .iter()
                .flat_map(|(name, ms)| {
                    ms.iter().map(move |m| {
                        let dp = if m.metric == "ess" { 1 } else { 3 };
                        vec![
                            name.clone(),
                            m.metric.clone(),
                            format!("{:.dp$}", m.analytic),
                            format!("{:.dp$}", m.simulated),
                            format!("{:.dp$}", m.standard_error, dp = dp + 1),
                            format!("{:.2}", m.z),
                        ]
                    })
                })
                .collect();
            s.push_str(&table(&header, &rows));
            s
        }
        Report::Compare(cr) => {
            let mut header: Vec<String> =
                ["design", "boundaries", "n", "power", "type I", "PWER", "max N"].map(String::from).to_vec();
            header.extend(cr.configs.iter().map(|c| format!("ESS {c}")));
            let rows: Vec<Vec<String>> = cr
                .rows
                .iter()
                .map(|r| {
                    if !r.in_scope {
                        let mut v = vec![r.design.clone(), "out of scope".to_string()];
                        v.extend(std::iter::repeat_n("-".to_string(), header.len() - 2));
                        return v;
                    }
                    let mut v = vec![
                        r.design.clone(),
                        r.boundaries.as_deref().map_or_else(|| "-".to_string(), fmt_boundaries),
                        r.n_per_stage.map_or_else(|| "-".to_string(), |n| n.to_string()),
                        fmt_opt(r.power, 3),
                        fmt_opt(r.type_i, 3),
                        fmt_opt(r.pwer, 3),
                        r.max_n.map_or_else(|| "-".to_string(), |n| n.to_string()),
                    ];
                    v.extend(cr.configs.iter().map(|c| fmt_opt(r.ess.get(c).copied(), 1)));
                    v
                })
                .collect();
            table(&header, &rows)
        }
    }
}

pub fn render_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

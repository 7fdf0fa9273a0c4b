//! Spectroscopy datasets and least-squares fits of both Hamiltonians.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::circuit::{BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder};
use crate::error::{domain, Error, Result};
use crate::fluxon::{fluxon_energies, FluxonBasisConfig, FluxonParams};
use crate::simplex::{multi_start, MultiStart, SimplexOptions};

/// Relative model disagreement above which a report row is flagged.
pub const DUAL_FLAG_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyPoint {
    pub phi_ext_over_2pi: f64,
    /// GHz
    pub frequency: f64,
    pub transition: (usize, usize),
    pub weight: f64,
}

impl SpectroscopyPoint {
    pub fn new(phi_ext_over_2pi: f64, frequency: f64, i: usize, j: usize, weight: f64) -> Result<Self> {
        let p = SpectroscopyPoint { phi_ext_over_2pi, frequency, transition: (i, j), weight };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.phi_ext_over_2pi.is_finite() {
            return domain("flux must be finite");
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return domain(format!("frequency must be positive, got {}", self.frequency));
        }
        if self.transition.0 >= self.transition.1 {
            return domain(format!("transition needs i < j, got {}-{}", self.transition.0, self.transition.1));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return domain(format!("weight must be non-negative, got {}", self.weight));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    phi_ext_over_2pi: f64,
    frequency_ghz: f64,
    i: usize,
    j: usize,
    weight: Option<f64>,
}

/// Read CSV `phi_ext_over_2pi,frequency_ghz,i,j[,weight]`.
///
/// Points come back sorted by flux then transition. Rows sharing flux and
/// transition are merged into their weighted mean with the summed weight.
pub fn load_dataset<R: Read>(input: R) -> Result<Vec<SpectroscopyPoint>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    // (flux, sum w*f, sum w, sum f, count)
    let mut merged: BTreeMap<(u64, usize, usize), (f64, f64, f64, f64, usize)> = BTreeMap::new();
    let parse_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse { line, msg: e.to_string() }
    };
    let headers = reader.headers().map_err(parse_err)?.clone();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(parse_err)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let w = row.weight.unwrap_or(1.0);
        SpectroscopyPoint::new(row.phi_ext_over_2pi, row.frequency_ghz, row.i, row.j, w)
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let key = (ordered_bits(row.phi_ext_over_2pi), row.i, row.j);
        let entry = merged.entry(key).or_insert((row.phi_ext_over_2pi, 0.0, 0.0, 0.0, 0));
        entry.1 += w * row.frequency_ghz;
        entry.2 += w;
        entry.3 += row.frequency_ghz;
        entry.4 += 1;
    }
    if merged.is_empty() {
        return domain("dataset contains no points");
    }
    Ok(merged
        .into_iter()
        .map(|((_, i, j), (phi, swf, w, sf, n))| {
            let frequency = if w > 0.0 { swf / w } else { sf / n as f64 };
            SpectroscopyPoint { phi_ext_over_2pi: phi, frequency, transition: (i, j), weight: w }
        })
        .collect())
}

/// Order-preserving integer key for a finite float.
fn ordered_bits(x: f64) -> u64 {
    let b = (x + 0.0).to_bits();
    if b >> 63 == 1 { !b } else { b | (1 << 63) }
}

/// Write a dataset in the format read by [`load_dataset`].
pub fn write_dataset<W: Write>(data: &[SpectroscopyPoint], mut out: W) -> Result<()> {
    writeln!(out, "phi_ext_over_2pi,frequency_ghz,i,j,weight")?;
    for p in data {
        writeln!(out, "{},{:.12},{},{},{}", p.phi_ext_over_2pi, p.frequency, p.transition.0, p.transition.1, p.weight)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Full,
    Fluxon,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Model::Full),
            "fluxon" => Ok(Model::Fluxon),
            other => domain(format!("unknown model {other:?}; expected full or fluxon")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    Full(CircuitParams),
    Fluxon(FluxonParams),
}

impl ModelParams {
    pub fn model(&self) -> Model {
        match self {
            ModelParams::Full(_) => Model::Full,
            ModelParams::Fluxon(_) => Model::Fluxon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Full(p) => p.validate(),
            ModelParams::Fluxon(p) => p.validate(),
        }
    }

    fn to_vec(self) -> [f64; 3] {
        match self {
            ModelParams::Full(p) => [p.e_j, p.e_c, p.e_l],
            ModelParams::Fluxon(p) => [p.e_l_sigma, p.eps1, p.eps2],
        }
    }

    fn from_vec(model: Model, v: [f64; 3]) -> Self {
        match model {
            Model::Full => ModelParams::Full(CircuitParams { e_j: v[0], e_c: v[1], e_l: v[2] }),
            Model::Fluxon => ModelParams::Fluxon(FluxonParams { e_l_sigma: v[0], eps1: v[1], eps2: v[2] }),
        }
    }

    /// Parse `--init` JSON for the given model.
    pub fn from_json(model: Model, json: &str) -> Result<Self> {
        let p = match model {
            Model::Full => ModelParams::Full(serde_json::from_str(json)?),
            Model::Fluxon => ModelParams::Fluxon(serde_json::from_str(json)?),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Oscillator basis size for the full model.
    pub dim: usize,
    pub fluxon_basis: FluxonBasisConfig,
    pub starts: usize,
    pub spread: f64,
    pub seed: u64,
    pub max_evals: usize,
    /// Fluxon fits drop points above this frequency (GHz).
    pub max_frequency: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            dim: 60,
            fluxon_basis: FluxonBasisConfig::default(),
            starts: 8,
            spread: 0.15,
            seed: 0,
            max_evals: 2000,
            max_frequency: None,
        }
    }
}

/// Spectrum evaluator for one parameter set.
enum Evaluator {
    Full(HamiltonianBuilder, usize),
    Fluxon(FluxonParams, FluxonBasisConfig),
}

impl Evaluator {
    fn new(params: &ModelParams, opts: &FitOptions) -> Result<Self> {
        params.validate()?;
        Ok(match params {
            ModelParams::Full(p) => {
                let basis = BasisConfig::new(p, opts.dim)?;
                Evaluator::Full(HamiltonianBuilder::new(p, &basis)?, opts.dim / 2)
            }
            ModelParams::Fluxon(p) => Evaluator::Fluxon(*p, opts.fluxon_basis),
        })
    }

    fn level_limit(&self) -> usize {
        match self {
            Evaluator::Full(_, n) => *n,
            Evaluator::Fluxon(_, cfg) => cfg.size(),
        }
    }

    fn energies(&self, x: f64) -> Result<Vec<f64>> {
        let bias = FluxBias::new(2.0 * PI * x)?;
        match self {
            Evaluator::Full(b, _) => b.energies(&bias),
            Evaluator::Fluxon(p, cfg) => fluxon_energies(p, &bias, cfg),
        }
    }
}

/// Model frequency for every point; flux values are evaluated once each.
pub fn model_frequencies(params: &ModelParams, data: &[SpectroscopyPoint], opts: &FitOptions) -> Result<Vec<f64>> {
    let eval = Evaluator::new(params, opts)?;
    let limit = eval.level_limit();
    if let Some(p) = data.iter().find(|p| p.transition.1 >= limit) {
        return Err(Error::Index(format!(
            "level {} is beyond the {limit} trusted levels of the {:?} model",
            p.transition.1,
            params.model()
        )));
    }
    let mut out = Vec::with_capacity(data.len());
    let mut cache: Option<(f64, Vec<f64>)> = None;
    for p in data {
        let e = match &cache {
            Some((x, e)) if *x == p.phi_ext_over_2pi => e,
            _ => {
                cache = Some((p.phi_ext_over_2pi, eval.energies(p.phi_ext_over_2pi)?));
                &cache.as_ref().expect("just set").1
            }
        };
        out.push(e[p.transition.1] - e[p.transition.0]);
    }
    Ok(out)
}

/// `sqrt(w) * (f_model - f_data)` per point, GHz.
pub fn residuals(params: &ModelParams, data: &[SpectroscopyPoint], opts: &FitOptions) -> Result<Vec<f64>> {
    let f = model_frequencies(params, data, opts)?;
    Ok(f.iter().zip(data).map(|(fm, p)| p.weight.sqrt() * (fm - p.frequency)).collect())
}

/// Noise-free dataset generated from `params`.
pub fn synthetic_dataset(params: &ModelParams, grid: &[f64], transitions: &[(usize, usize)], opts: &FitOptions) -> Result<Vec<SpectroscopyPoint>> {
    let mut data = Vec::new();
    for &x in grid {
        for &(i, j) in transitions {
            data.push(SpectroscopyPoint { phi_ext_over_2pi: x, frequency: 1.0, transition: (i, j), weight: 1.0 });
        }
    }
    let f = model_frequencies(params, &data, opts)?;
    for (p, v) in data.iter_mut().zip(f) {
        p.frequency = v;
        p.validate()?;
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: Model,
    pub params: ModelParams,
    /// Weighted RMS, GHz.
    pub rms_residual: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Points entering a fit of `model`.
pub fn fit_domain(model: Model, data: &[SpectroscopyPoint], opts: &FitOptions) -> Vec<SpectroscopyPoint> {
    match (model, opts.max_frequency) {
        (Model::Fluxon, Some(max)) => data.iter().copied().filter(|p| p.frequency < max).collect(),
        _ => data.to_vec(),
    }
}

/// Weighted least-squares fit by multi-start simplex in log-parameter space.
///
/// The objective is normalized by the total weight, so rescaling all weights
/// leaves the result unchanged. Zero parameters in `init` (allowed for the
/// fluxon tunneling energies) are replaced by a small positive seed.
pub fn fit(model: Model, data: &[SpectroscopyPoint], init: &ModelParams, opts: &FitOptions) -> Result<FitResult> {
    if init.model() != model {
        return domain(format!("initial parameters are for the {:?} model", init.model()));
    }
    init.validate()?;
    let points = fit_domain(model, data, opts);
    if points.len() < 3 {
        return domain(format!("fit needs at least 3 points, got {}", points.len()));
    }
    let total_w: f64 = points.iter().map(|p| p.weight).sum();
    if total_w <= 0.0 {
        return domain("all weights are zero");
    }
    // trusted-level check at the starting point
    model_frequencies(init, &points[..1], opts)?;
    let x0: Vec<f64> = init.to_vec().iter().map(|&v| v.max(1e-6).ln()).collect();
    let objective = |x: &[f64]| -> f64 {
        let p = ModelParams::from_vec(model, [x[0].exp(), x[1].exp(), x[2].exp()]);
        match residuals(&p, &points, opts) {
            Ok(r) => r.iter().map(|v| v * v).sum::<f64>() / total_w,
            Err(_) => f64::INFINITY,
        }
    };
    let simplex = SimplexOptions { max_evals: opts.max_evals, x_tol: 1e-7, f_tol: 1e-18, f_rel_tol: 1e-9, restarts: 1 };
    let ms = MultiStart { starts: opts.starts, spread: opts.spread, seed: opts.seed };
    let best = multi_start(objective, &x0, &[0.05, 0.05, 0.05], &ms, &simplex);
    if !best.f.is_finite() {
        return Err(Error::Numerical("objective is not finite anywhere on the simplex".into()));
    }
    let params = ModelParams::from_vec(model, [best.x[0].exp(), best.x[1].exp(), best.x[2].exp()]);
    Ok(FitResult { model, params, rms_residual: best.f.sqrt(), n_points: points.len(), iterations: best.evals, converged: best.converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualRow {
    pub phi_ext_over_2pi: f64,
    pub i: usize,
    pub j: usize,
    pub frequency_ghz: f64,
    pub full_ghz: f64,
    pub fluxon_ghz: f64,
    pub relative_difference: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualFitReport {
    pub full: FitResult,
    pub fluxon: FitResult,
    pub rows: Vec<DualRow>,
    pub flagged: usize,
}

/// Compare two fitted models on every point of `data`.
pub fn compare_models(full: &FitResult, fluxon: &FitResult, data: &[SpectroscopyPoint], opts: &FitOptions) -> Result<DualFitReport> {
    let ff = model_frequencies(&full.params, data, opts)?;
    let fx = model_frequencies(&fluxon.params, data, opts)?;
    let rows: Vec<DualRow> = data
        .iter()
        .zip(ff.iter().zip(&fx))
        .map(|(p, (&a, &b))| {
            let rel = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
            DualRow {
                phi_ext_over_2pi: p.phi_ext_over_2pi,
                i: p.transition.0,
                j: p.transition.1,
                frequency_ghz: p.frequency,
                full_ghz: a,
                fluxon_ghz: b,
                relative_difference: rel,
                flagged: rel > DUAL_FLAG_THRESHOLD,
            }
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(DualFitReport { full: full.clone(), fluxon: fluxon.clone(), rows, flagged })
}

/// Fit both models to `data` and tabulate where they disagree.
pub fn dual_fit_report(data: &[SpectroscopyPoint], full_init: &CircuitParams, fluxon_init: &FluxonParams, opts: &FitOptions) -> Result<DualFitReport> {
    let full = fit(Model::Full, data, &ModelParams::Full(*full_init), opts)?;
    let fluxon = fit(Model::Fluxon, data, &ModelParams::Fluxon(*fluxon_init), opts)?;
    for r in [&full, &fluxon] {
        if !r.converged {
            return Err(Error::NotConverged(format!("{:?} fit hit the evaluation cap", r.model)));
        }
    }
    compare_models(&full, &fluxon, data, opts)
}

/// CSV of report rows.
pub fn write_dual_csv<W: Write>(report: &DualFitReport, mut out: W) -> Result<()> {
    writeln!(out, "phi_ext_over_2pi,i,j,frequency_ghz,full_ghz,fluxon_ghz,relative_difference,flagged")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{:.9},{:.9},{:.9},{:.6e},{}",
            r.phi_ext_over_2pi, r.i, r.j, r.frequency_ghz, r.full_ghz, r.fluxon_ghz, r.relative_difference, r.flagged as u8
        )?;
    }
    Ok(())
}

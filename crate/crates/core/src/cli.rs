//! Command-line front end.
//!
//! Every subcommand prints one document (JSON or CSV) to `--output` or
//! stdout. JSON documents carry a `metadata` object and CSV files start with
//! `#`-prefixed metadata lines.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{self, Cavity, DesignSweep, NoiseEnvironment, Q2Formula};
use crate::circuit::{self, BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder, OperatorKind};
use crate::devices::{self, Device};
use crate::error::{domain, Error, Result};
use crate::fluxon::{self, DualFitOptions, FluxonParams};
use crate::pulse::{self, DriveSystem, ErrorSweepOptions};
use crate::rb::{self, GateSet, IdentityConvention, IncoherentModel, RbOptions};
use crate::spectro::{self, FitOptions, Model, ModelParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "iflux", version, about = "Integer-fluxonium spectra, budgets, gates, benchmarking and fits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Energies, transition frequencies and matrix elements at one bias.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// External flux in flux quanta.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Transition frequencies and charge elements versus flux (CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Signed matrix elements between the lowest levels.
    Melem {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = OperatorArg::N)]
        operator: OperatorArg,
    },
    /// Relaxation and dephasing budget at one bias.
    Budget {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
        /// Readout cavity frequency (GHz); enables the thermal-photon estimate.
        #[arg(long)]
        cavity_ghz: Option<f64>,
        /// Cavity linewidth kappa/2pi (MHz).
        #[arg(long)]
        kappa_mhz: Option<f64>,
        /// Dispersive shift chi01/2pi (MHz).
        #[arg(long)]
        chi_mhz: Option<f64>,
        #[arg(long, default_value_t = devices::DEVICE_D_CAVITY_TEMPERATURE_K)]
        temperature_k: f64,
        #[arg(long, value_enum, default_value_t = FormulaArg::Text)]
        formula: FormulaArg,
    },
    /// Q2 versus E_J/E_C at fixed E_C and E_L (CSV).
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 2.0)]
        ratio_min: f64,
        #[arg(long, default_value_t = 15.0)]
        ratio_max: f64,
        #[arg(long, default_value_t = 48)]
        points: usize,
        #[arg(long, value_enum, default_value_t = FormulaArg::Text)]
        formula: FormulaArg,
    },
    /// Calibrated pi-pulse error components versus gate time and flux offset (CSV).
    Pulse {
        #[command(flatten)]
        common: Common,
        /// Gate times in ns.
        #[arg(long, value_delimiter = ',', default_value = "25,40,88,200")]
        t_pi_ns: Vec<f64>,
        /// Flux offsets in flux quanta.
        #[arg(long, value_delimiter = ',', default_value = "0,1e-5,3e-5", allow_negative_numbers = true)]
        delta_phi: Vec<f64>,
        #[arg(long, default_value_t = pulse::DEFAULT_LEVELS)]
        levels: usize,
        /// 1/f amplitude for the incoherent column.
        #[arg(long)]
        a1f: Option<f64>,
    },
    /// Simulated Clifford randomized benchmarking.
    Rb {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 88.0)]
        t_pi_ns: f64,
        /// Flux offset in flux quanta.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta_phi: f64,
        /// Ramsey time for the incoherent channel (us).
        #[arg(long)]
        t2_star_us: Option<f64>,
        /// Derive T2* from 1/f noise of this amplitude instead.
        #[arg(long, conflicts_with = "t2_star_us")]
        a1f: Option<f64>,
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        #[arg(long, default_value_t = pulse::DEFAULT_LEVELS)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = IdentityArg::Skip)]
        identity: IdentityArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Least-squares fit of a spectroscopy dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        /// Starting parameters as JSON; defaults to the device values.
        #[arg(long)]
        init: Option<String>,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        /// Fluxon fits ignore points above this frequency (GHz).
        #[arg(long)]
        max_freq: Option<f64>,
    },
    /// Full-model versus fluxon-model comparison (CSV).
    Duality {
        #[command(flatten)]
        common: Common,
        /// Half-width of the flux window in flux quanta.
        #[arg(long, default_value_t = 0.25)]
        window: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Fit both models to this dataset instead of to the full-model doublet.
        #[arg(long)]
        data: Option<PathBuf>,
        /// With `--data`, the fluxon fit ignores points above this frequency (GHz).
        #[arg(long, requires = "data")]
        max_freq: Option<f64>,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Builtin device name.
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long, requires_all = ["ec", "el"])]
    pub ej: Option<f64>,
    #[arg(long, requires_all = ["ej", "el"])]
    pub ec: Option<f64>,
    #[arg(long, requires_all = ["ej", "ec"])]
    pub el: Option<f64>,
    /// Oscillator basis size.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NoiseArgs {
    /// Dielectric quality factor; defaults to the device value.
    #[arg(long)]
    pub qdiel: Option<f64>,
    /// 1/f flux-noise amplitude in flux quanta.
    #[arg(long)]
    pub a1f: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorArg {
    N,
    Phi,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaArg {
    Text,
    Caption,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityArg {
    Skip,
    Idle,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Full,
    Fluxon,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: Option<String>,
    pub params: Option<CircuitParams>,
    pub environment: Option<EnvironmentConfig>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub q_diel: Option<f64>,
    pub a_1f: Option<f64>,
}

/// Identification embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Metadata {
    fn csv_header(&self) -> String {
        format!(
            "# tool={} version={} command={} config_hash={} seed={}\n",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }
}

/// Resolved inputs shared by all subcommands.
struct Context {
    metadata: Metadata,
    device: Option<&'static Device>,
    params: CircuitParams,
    dim: usize,
    env: Option<EnvironmentConfig>,
    output: Option<PathBuf>,
}

impl Context {
    fn resolve(command: &Command) -> Result<Self> {
        let (name, common) = command.common();
        let config: RunConfig = match &common.config {
            Some(path) => serde_json::from_reader(File::open(path)?)?,
            None => RunConfig::default(),
        };
        let device = match common.device.as_deref().or(config.device.as_deref()) {
            Some(n) => Some(devices::device(n)?),
            None => None,
        };
        let inline = match (common.ej, common.ec, common.el) {
            (Some(e_j), Some(e_c), Some(e_l)) => Some(CircuitParams::new(e_j, e_c, e_l)?),
            _ => None,
        };
        let params = match (inline, common.device.as_ref(), config.params) {
            (Some(p), _, _) => p,
            (None, Some(_), _) => device.expect("resolved above").circuit,
            (None, None, Some(p)) => p,
            (None, None, None) => match device {
                Some(d) => d.circuit,
                None => return domain(format!("give --device ({}) or --ej/--ec/--el", devices::device_names().join(", "))),
            },
        };
        params.validate()?;
        let dim = common.dim.or(config.dim).unwrap_or(circuit::DEFAULT_DIM);
        let seed = common.seed.or(config.seed).unwrap_or(0);
        let resolved = serde_json::json!({
            "command": command,
            "config": config,
            "params": params,
            "dim": dim,
            "seed": seed,
        });
        let digest = Sha256::digest(serde_json::to_vec(&resolved)?);
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Context {
            metadata: Metadata { tool: "iflux", version: env!("CARGO_PKG_VERSION"), command: name.to_string(), config_hash, seed },
            device,
            params,
            dim,
            env: config.environment,
            output: common.output.clone().or(config.output),
        })
    }

    fn basis(&self) -> Result<BasisConfig> {
        BasisConfig::new(&self.params, self.dim)
    }

    fn builder(&self) -> Result<HamiltonianBuilder> {
        HamiltonianBuilder::new(&self.params, &self.basis()?)
    }

    fn q_diel(&self, flag: Option<f64>) -> Result<f64> {
        flag.or(self.env.and_then(|e| e.q_diel))
            .or(self.device.map(|d| d.inferred.q_diel))
            .ok_or_else(|| Error::Domain("give --qdiel or a builtin --device".into()))
    }

    fn a_1f(&self, flag: Option<f64>) -> f64 {
        flag.or(self.env.and_then(|e| e.a_1f)).unwrap_or(devices::DEVICE_D_A_1F)
    }

    fn fluxon_params(&self) -> Result<FluxonParams> {
        fluxon_estimate(&self.params, self.device)
    }

    fn emit(&self, body: &[u8]) -> Result<()> {
        match &self.output {
            Some(path) => {
                let mut f = BufWriter::new(File::create(path)?);
                f.write_all(body)?;
                f.flush()?;
            }
            None => std::io::stdout().write_all(body)?,
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut doc = serde_json::to_value(value)?;
        match &mut doc {
            serde_json::Value::Object(map) => {
                map.insert("metadata".into(), serde_json::to_value(&self.metadata)?);
            }
            other => {
                *other = serde_json::json!({ "metadata": self.metadata, "result": other.clone() });
            }
        }
        let mut body = serde_json::to_vec_pretty(&doc)?;
        body.push(b'\n');
        self.emit(&body)
    }

    fn emit_csv(&self, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut body = self.metadata.csv_header().into_bytes();
        write(&mut body)?;
        self.emit(&body)
    }
}

/// Builtin fluxon parameters, or a crude estimate from the circuit.
fn fluxon_estimate(params: &CircuitParams, device: Option<&Device>) -> Result<FluxonParams> {
    if let Some(fp) = device.and_then(|d| d.fluxon) {
        return Ok(fp);
    }
    let e_l_sigma = fluxon::e_l_sigma_from_circuit(params)?;
    FluxonParams::new(e_l_sigma, params.fluxon_estimate().max(1e-3), 0.1 * params.fluxon_estimate().max(1e-3))
}

impl Command {
    fn common(&self) -> (&'static str, &Common) {
        match self {
            Command::Spectrum { common, .. } => ("spectrum", common),
            Command::Sweep { common, .. } => ("sweep", common),
            Command::Melem { common, .. } => ("melem", common),
            Command::Budget { common, .. } => ("budget", common),
            Command::Optimize { common, .. } => ("optimize", common),
            Command::Pulse { common, .. } => ("pulse", common),
            Command::Rb { common, .. } => ("rb", common),
            Command::Fit { common, .. } => ("fit", common),
            Command::Duality { common, .. } => ("duality", common),
        }
    }
}

#[derive(Serialize)]
struct SpectrumOut {
    params: CircuitParams,
    phi_ext_over_2pi: f64,
    dim: usize,
    reliable_levels: usize,
    energies_ghz: Vec<f64>,
    frequencies_from_ground_ghz: Vec<f64>,
    charge_elements: Vec<f64>,
    phase_elements: Vec<f64>,
}

#[derive(Serialize)]
struct MelemOut {
    params: CircuitParams,
    phi_ext_over_2pi: f64,
    operator: OperatorArg,
    /// Row `i`, column `j`: `<i|op|j>` (imaginary part for the charge operator).
    elements: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct BudgetOut {
    params: CircuitParams,
    phi_ext_over_2pi: f64,
    environment: NoiseEnvironment,
    formula: Q2Formula,
    budget: budget::BudgetResult,
}

#[derive(Serialize)]
struct RbOut {
    fit: rb::DecayFit,
    f_clifford: f64,
    f_physical: f64,
    rb: rb::RbMetadata,
    m_values: Vec<usize>,
    survival_mean: Vec<f64>,
    survival_sem: Vec<f64>,
}

fn run_command(command: &Command) -> Result<()> {
    let ctx = Context::resolve(command)?;
    match command {
        Command::Spectrum { phi, levels, .. } => {
            check_levels(*levels)?;
            let spec = ctx.builder()?.solve(&FluxBias::from_flux_quanta(*phi)?)?;
            let reliable = spec.reliable_levels();
            if *levels > reliable {
                return Err(Error::Index(format!("{levels} levels requested but only {reliable} are converged at dim {}", ctx.dim)));
            }
            let mut charge = Vec::new();
            let mut phase = Vec::new();
            for k in 1..*levels {
                charge.push(spec.matrix_element(OperatorKind::ChargeN, 0, k)?.abs());
                phase.push(spec.matrix_element(OperatorKind::PhasePhi, 0, k)?.abs());
            }
            ctx.emit_json(&SpectrumOut {
                params: ctx.params,
                phi_ext_over_2pi: *phi,
                dim: ctx.dim,
                reliable_levels: reliable,
                energies_ghz: spec.energies[..*levels].to_vec(),
                frequencies_from_ground_ghz: spec.frequencies_from_ground(*levels)?,
                charge_elements: charge,
                phase_elements: phase,
            })
        }
        Command::Sweep { from, to, points, levels, .. } => {
            check_levels(*levels)?;
            if *points < 2 || !(to > from) {
                return domain("sweep needs --to > --from and at least 2 points");
            }
            let grid: Vec<f64> = (0..*points).map(|k| from + (to - from) * k as f64 / (*points - 1) as f64).collect();
            let sweep = circuit::flux_sweep(&ctx.params, &grid, *levels, &ctx.basis()?)?;
            ctx.emit_csv(|out| circuit::write_sweep_csv(&sweep, out))
        }
        Command::Melem { phi, levels, operator, .. } => {
            check_levels(*levels)?;
            let spec = ctx.builder()?.solve(&FluxBias::from_flux_quanta(*phi)?)?;
            let kind = match operator {
                OperatorArg::N => OperatorKind::ChargeN,
                OperatorArg::Phi => OperatorKind::PhasePhi,
            };
            let m = spec.operator_in_eigenbasis(kind, *levels)?;
            let elements = (0..*levels).map(|i| (0..*levels).map(|j| m[(i, j)]).collect()).collect();
            ctx.emit_json(&MelemOut { params: ctx.params, phi_ext_over_2pi: *phi, operator: *operator, elements })
        }
        Command::Budget { noise, phi, cavity_ghz, kappa_mhz, chi_mhz, temperature_k, formula, .. } => {
            let mut env = NoiseEnvironment::new(ctx.q_diel(noise.qdiel)?, ctx.a_1f(noise.a1f))?;
            if let Some(f_cavity) = cavity_ghz {
                let (Some(kappa), Some(chi)) = (kappa_mhz, chi_mhz) else {
                    return domain("--cavity-ghz needs --kappa-mhz and --chi-mhz");
                };
                let to_rad = |mhz: f64| 2.0 * std::f64::consts::PI * mhz * 1e6;
                env = env.with_cavity(Cavity { f_cavity: *f_cavity, kappa: to_rad(*kappa), chi01: to_rad(*chi), temperature: *temperature_k })?;
            }
            let formula = q2_formula(*formula);
            let result = budget::budget_with(&ctx.builder()?, &FluxBias::from_flux_quanta(*phi)?, &env, formula)?;
            ctx.emit_json(&BudgetOut { params: ctx.params, phi_ext_over_2pi: *phi, environment: env, formula, budget: result })
        }
        Command::Optimize { noise, ratio_min, ratio_max, points, formula, .. } => {
            let env = NoiseEnvironment::new(ctx.q_diel(noise.qdiel)?, ctx.a_1f(noise.a1f))?;
            let sweep = DesignSweep {
                ratio_min: *ratio_min,
                ratio_max: *ratio_max,
                points: *points,
                dim: ctx.dim,
                formula: q2_formula(*formula),
                ..DesignSweep::new(ctx.params.e_c, ctx.params.e_l)
            };
            let curve = budget::optimize_design(&sweep, &env)?;
            ctx.emit_csv(|out| {
                writeln!(
                    out,
                    "# argmax_ej_over_ec={:.6} max_q2={:.6e} interior_maximum={}",
                    curve.argmax_ej_over_ec, curve.max_q2, curve.interior_maximum
                )?;
                budget::write_design_csv(&curve, out)
            })
        }
        Command::Pulse { t_pi_ns, delta_phi, levels, a1f, .. } => {
            let opts = ErrorSweepOptions { levels: *levels, dim: ctx.dim, a_1f: *a1f, ..Default::default() };
            let rows = pulse::error_vs_gate_time(&ctx.params, delta_phi, t_pi_ns, &opts)?;
            ctx.emit_csv(|out| pulse::write_error_csv(&rows, out))
        }
        Command::Rb { t_pi_ns, delta_phi, t2_star_us, a1f, seeds, m_list, levels, identity, format, .. } => {
            let builder = ctx.builder()?;
            let reference = DriveSystem::from_builder(&builder, 0.0, *levels)?;
            let operating = DriveSystem::from_builder(&builder, *delta_phi, *levels)?;
            let gates = GateSet::calibrate(&reference, &operating, *t_pi_ns, &Default::default())?;
            let t2_star = match (t2_star_us, a1f) {
                (Some(us), _) => Some(us * 1e-6),
                (None, Some(a)) => Some(budget::ramsey_t2_star(&builder, 2.0 * std::f64::consts::PI * delta_phi, *a)?),
                (None, None) => None,
            };
            let opts = RbOptions {
                m_values: m_list.clone().unwrap_or_else(rb::default_m_values),
                n_seeds: *seeds,
                seed: ctx.metadata.seed,
                incoherent: t2_star.map(|t2_star| IncoherentModel { t2_star }),
                identity: match identity {
                    IdentityArg::Skip => IdentityConvention::Skip,
                    IdentityArg::Idle => IdentityConvention::Idle,
                },
            };
            let result = rb::simulate_rb(&gates, &opts)?;
            match format {
                FormatArg::Csv => ctx.emit_csv(|out| rb::write_rb_csv(&result, out)),
                FormatArg::Json => ctx.emit_json(&RbOut {
                    fit: result.fit,
                    f_clifford: result.f_clifford,
                    f_physical: result.f_physical,
                    rb: result.metadata.clone(),
                    m_values: result.m_values.clone(),
                    survival_mean: result.survival.clone(),
                    survival_sem: result.survival_sem.clone(),
                }),
            }
        }
        Command::Fit { model, data, init, starts, max_freq, .. } => {
            let data = spectro::load_dataset(File::open(data)?)?;
            let model = match model {
                ModelArg::Full => Model::Full,
                ModelArg::Fluxon => Model::Fluxon,
            };
            let init = match init {
                Some(json) => ModelParams::from_json(model, json)?,
                None => match model {
                    Model::Full => ModelParams::Full(ctx.params),
                    Model::Fluxon => ModelParams::Fluxon(ctx.fluxon_params()?),
                },
            };
            let opts = FitOptions {
                starts: *starts,
                seed: ctx.metadata.seed,
                max_frequency: Some(max_freq.unwrap_or_else(|| ctx.params.plasmon_estimate())),
                ..Default::default()
            };
            ctx.emit_json(&spectro::fit(model, &data, &init, &opts)?)
        }
        Command::Duality { window, points, data, max_freq, .. } => match data {
            Some(path) => {
                let data = spectro::load_dataset(File::open(path)?)?;
                let opts = FitOptions {
                    seed: ctx.metadata.seed,
                    max_frequency: Some(max_freq.unwrap_or_else(|| ctx.params.plasmon_estimate())),
                    ..Default::default()
                };
                let report = spectro::dual_fit_report(&data, &ctx.params, &ctx.fluxon_params()?, &opts)?;
                ctx.emit_csv(|out| {
                    writeln!(out, "# full={} fluxon={}", serde_json::to_string(&report.full.params)?, serde_json::to_string(&report.fluxon.params)?)?;
                    spectro::write_dual_csv(&report, out)
                })
            }
            None => {
                let opts = DualFitOptions { window: *window, points: *points, dim: ctx.dim.min(100), seed: ctx.metadata.seed, ..Default::default() };
                let fit = fluxon::fit_fluxon_to_full(&ctx.params, &opts)?;
                let grid = fluxon::symmetric_grid(opts.window, opts.points);
                let targets = fluxon::full_model_doublet(&ctx.params, &grid, opts.dim)?;
                ctx.emit_csv(|out| write_duality_csv(&fit, &targets, &opts, out))
            }
        },
    }
}

fn write_duality_csv(fit: &fluxon::FluxonFit, targets: &[(f64, f64, f64)], opts: &DualFitOptions, out: &mut Vec<u8>) -> Result<()> {
    writeln!(
        out,
        "# e_l_sigma={:.9} eps1={:.9} eps2={:.9} rms_residual={:.3e} max_relative_error={:.3e}",
        fit.e_l_sigma, fit.eps1, fit.eps2, fit.rms_residual, fit.max_relative_error
    )?;
    writeln!(out, "phi_ext_over_2pi,f01_full_ghz,f02_full_ghz,f01_fluxon_ghz,f02_fluxon_ghz,rel_diff_01,rel_diff_02")?;
    let fp = fit.params();
    for &(x, f01, f02) in targets {
        let e = fluxon::fluxon_energies(&fp, &FluxBias::from_flux_quanta(x)?, &opts.basis)?;
        let (g01, g02) = (e[1] - e[0], e[2] - e[0]);
        writeln!(
            out,
            "{x},{f01:.9},{f02:.9},{g01:.9},{g02:.9},{:.6e},{:.6e}",
            (g01 - f01).abs() / f01,
            (g02 - f02).abs() / f02
        )?;
    }
    Ok(())
}

fn check_levels(levels: usize) -> Result<()> {
    if levels < 2 {
        return domain("need at least 2 levels");
    }
    Ok(())
}

fn q2_formula(f: FormulaArg) -> Q2Formula {
    match f {
        FormulaArg::Text => Q2Formula::Text,
        FormulaArg::Caption => Q2Formula::Caption,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("IFLUX_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Domain(format!("IFLUX_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return domain("IFLUX_THREADS must be at least 1");
        }
        // a pool that is already initialized keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|_| run_command(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

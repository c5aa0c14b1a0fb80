//! `qt`: command-line front end for the quantum-transistor toolkit.
//!
//! Batch in, tables out: every subcommand reads parameters from flags (or a
//! JSON config that overrides them), writes JSON or CSV to stdout or `--out`,
//! and drops a `<out>.manifest.json` next to every output file so the run can
//! be reproduced byte for byte.

mod args;
mod emit;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use args::{
    domain, get_f64, get_str, get_usize, network_from_value, overlay_config, parse_float_range,
    parse_int_range, resolve_workers, usage, CliError, NetworkArgs,
};
use emit::{fmt_f64, json_body, RunContext};
use qtrans::design::{design_gate, parse_rational, plan_transfer, GateFixing, SolvedParameter};
use qtrans::dispersive::{simulate_dispersive, DispersiveConfig};
use qtrans::dynamics::{Propagator, QubitState};
use qtrans::network::blocking_margin_with;
use qtrans::open_system::{
    exchange_exponent, fidelity_avg_with_measure, fidelity_map_with_workers, fidelity_point,
    kbt_over_hnu_from_nbar, nbar_from_kbt_over_hnu, optimal_kappa, planck_nbar, MapGrid,
    SecondAxis, MAP_CSV_HEADER,
};
use qtrans::oracle::StateMeasure;
use qtrans::spectral::analytic_spectrum;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Parser)]
#[command(
    name = "qt",
    version,
    about = "Coupled-oscillator quantum-transistor toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form eigenvalues and eigenvectors of the network
    Spectrum(SpectrumCmd),
    /// Time evolution: survival probabilities and transfer amplitudes
    Evolve(EvolveCmd),
    /// Check the blocking-regime margin lambda/|delta| * 3 sqrt(N)
    BlockCheck(BlockCheckCmd),
    /// Solve the odd-ratio simultaneous-transfer condition exactly
    PlanTransfer(PlanTransferCmd),
    /// Solve the phase-gate condition for omega or kappa
    DesignGate(DesignGateCmd),
    /// Simulate the dispersive atom-field detuning control
    Dispersive(DispersiveCmd),
    /// Evaluate the analytic gate fidelity (pointwise or averaged)
    Fidelity(FidelityCmd),
    /// Sweep the averaged fidelity over a parameter grid (CSV)
    FidelityMap(FidelityMapCmd),
    /// Exhaustive search for the bus size maximizing the averaged fidelity
    OptimalKappa(OptimalKappaCmd),
    /// Run the oracle-equivalence validation suite
    Validate(ValidateCmd),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Spectrum(cmd) => cmd.run(),
        Command::Evolve(cmd) => cmd.run(),
        Command::BlockCheck(cmd) => cmd.run(),
        Command::PlanTransfer(cmd) => cmd.run(),
        Command::DesignGate(cmd) => cmd.run(),
        Command::Dispersive(cmd) => cmd.run(),
        Command::Fidelity(cmd) => cmd.run(),
        Command::FidelityMap(cmd) => cmd.run(),
        Command::OptimalKappa(cmd) => cmd.run(),
        Command::Validate(cmd) => cmd.run(),
    }
}

#[derive(Args)]
struct IoArgs {
    /// JSON parameter file overriding the flags (a run manifest also works)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the output here (plus `<out>.manifest.json`) instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

// --- spectrum ----------------------------------------------------------------

#[derive(Args)]
struct SpectrumCmd {
    #[command(flatten)]
    network: NetworkArgs,
    #[command(flatten)]
    io: IoArgs,
}

impl SpectrumCmd {
    fn run(self) -> Result<(), CliError> {
        let params = overlay_config(self.network.to_map(), self.io.config.as_deref())?;
        let cfg = network_from_value(&params)?;
        let spectrum = analytic_spectrum(&cfg);
        let vectors: Vec<Vec<f64>> = (0..spectrum.dim())
            .map(|l| spectrum.vectors().column(l).iter().copied().collect())
            .collect();
        let body = json_body(&json!({
            "eigenvalues": spectrum.eigenvalues(),
            "families": spectrum.families().iter().map(|f| f.name()).collect::<Vec<_>>(),
            "vectors": vectors,
        }));
        RunContext::new("spectrum", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- evolve ------------------------------------------------------------------

#[derive(Args)]
struct EvolveCmd {
    #[command(flatten)]
    network: NetworkArgs,
    /// |0> amplitude of the source qubit (default 1/sqrt(2))
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative phase of the |1> amplitude (default 0)
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    t_start: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    t_end: Option<f64>,
    /// Number of grid points (default 201)
    #[arg(long)]
    t_steps: Option<usize>,
    /// Emit a JSON array instead of CSV
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    io: IoArgs,
}

impl EvolveCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = self.network.to_map();
        if let Some(v) = self.alpha {
            map.insert("alpha".into(), json!(v));
        }
        if let Some(v) = self.theta {
            map.insert("theta".into(), json!(v));
        }
        if let Some(v) = self.t_start {
            map.insert("t_start".into(), json!(v));
        }
        if let Some(v) = self.t_end {
            map.insert("t_end".into(), json!(v));
        }
        if let Some(v) = self.t_steps {
            map.insert("t_steps".into(), json!(v));
        }
        let params = overlay_config(map, self.io.config.as_deref())?;
        let cfg = network_from_value(&params)?;
        let alpha = params
            .get("alpha")
            .and_then(Value::as_f64)
            .unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
        let theta = params.get("theta").and_then(Value::as_f64).unwrap_or(0.0);
        if !(0.0..=1.0).contains(&alpha) {
            return Err(domain("alpha must lie in [0, 1]"));
        }
        let t_start = params.get("t_start").and_then(Value::as_f64).unwrap_or(0.0);
        let t_end = get_f64(&params, "t_end")?;
        let steps = params
            .get("t_steps")
            .and_then(Value::as_u64)
            .unwrap_or(201)
            .max(1) as usize;
        if t_start < 0.0 || t_end < t_start {
            return Err(usage("need 0 <= t_start <= t_end"));
        }

        let psi = QubitState::from_polar(alpha, theta);
        let prop = Propagator::new(&cfg);
        let mut rows = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = if steps == 1 {
                t_start
            } else {
                t_start + (t_end - t_start) * k as f64 / (steps - 1) as f64
            };
            let u = prop.u_exact(t);
            let (p_s, p_d) = prop.survival_probabilities(&psi, t);
            rows.push((t, p_s, p_d, u));
        }

        let body = if self.json {
            let items: Vec<Value> = rows
                .iter()
                .map(|(t, p_s, p_d, u)| {
                    json!({
                        "t": t, "p_s": p_s, "p_d": p_d,
                        "re_u_plus": u.u_plus.re, "im_u_plus": u.u_plus.im,
                        "re_u_minus": u.u_minus.re, "im_u_minus": u.u_minus.im,
                    })
                })
                .collect();
            json_body(&Value::Array(items))
        } else {
            let mut out = String::from("t,p_s,p_d,re_u_plus,im_u_plus,re_u_minus,im_u_minus\n");
            for (t, p_s, p_d, u) in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt_f64(*t),
                    fmt_f64(*p_s),
                    fmt_f64(*p_d),
                    fmt_f64(u.u_plus.re),
                    fmt_f64(u.u_plus.im),
                    fmt_f64(u.u_minus.re),
                    fmt_f64(u.u_minus.im),
                ));
            }
            out
        };
        RunContext::new("evolve", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- block-check ---------------------------------------------------------------

#[derive(Args)]
struct BlockCheckCmd {
    #[command(flatten)]
    network: NetworkArgs,
    /// Threshold standing in for "much smaller than" (default 0.1)
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    io: IoArgs,
}

impl BlockCheckCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = self.network.to_map();
        if let Some(v) = self.threshold {
            map.insert("threshold".into(), json!(v));
        }
        let params = overlay_config(map, self.io.config.as_deref())?;
        let cfg = network_from_value(&params)?;
        let threshold = params
            .get("threshold")
            .and_then(Value::as_f64)
            .unwrap_or(0.1);
        let margin = blocking_margin_with(&cfg, threshold).map_err(domain)?;
        let body = json_body(&json!({
            "ratio": margin.ratio,
            "threshold": margin.threshold,
            "in_blocking_regime": margin.in_blocking_regime,
        }));
        RunContext::new("block-check", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- plan-transfer ---------------------------------------------------------------

#[derive(Args)]
struct PlanTransferCmd {
    /// omega as an exact rational in rad/s (decimal, scientific or p/q)
    #[arg(
        long = "omega-rad",
        value_name = "RATIONAL",
        conflicts_with = "omega_hz"
    )]
    omega_rad: Option<String>,
    /// omega as an exact rational in Hz
    #[arg(long = "omega-hz", value_name = "RATIONAL")]
    omega_hz: Option<String>,
    /// lambda as an exact rational in rad/s
    #[arg(
        long = "lambda-rad",
        value_name = "RATIONAL",
        conflicts_with = "lambda_hz"
    )]
    lambda_rad: Option<String>,
    /// lambda as an exact rational in Hz
    #[arg(long = "lambda-hz", value_name = "RATIONAL")]
    lambda_hz: Option<String>,
    /// Odd multiplier scaling the bus size (default 1)
    #[arg(long)]
    u: Option<u64>,
    #[command(flatten)]
    io: IoArgs,
}

impl PlanTransferCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        let hz_given = self.omega_hz.is_some() || self.lambda_hz.is_some();
        let rad_given = self.omega_rad.is_some() || self.lambda_rad.is_some();
        if hz_given && rad_given {
            return Err(usage(
                "omega and lambda must use the same unit form (both -hz or both -rad)",
            ));
        }
        if let Some(v) = self.omega_rad.or(self.omega_hz) {
            map.insert("omega".into(), json!(v));
        }
        if let Some(v) = self.lambda_rad.or(self.lambda_hz) {
            map.insert("lambda".into(), json!(v));
        }
        map.insert(
            "units".into(),
            json!(if hz_given { "hz" } else { "angular" }),
        );
        map.insert("u".into(), json!(self.u.unwrap_or(1)));
        let params = overlay_config(map, self.io.config.as_deref())?;

        let omega = parse_rational(get_str(&params, "omega")?).map_err(domain)?;
        let lambda = parse_rational(get_str(&params, "lambda")?).map_err(domain)?;
        let u = params.get("u").and_then(Value::as_u64).unwrap_or(1);
        let units = get_str(&params, "units")?.to_string();
        let plan = plan_transfer(&omega, &lambda, u).map_err(domain)?;

        // tau = C2 pi / omega_angular; Hz inputs mean omega_angular = 2 pi f,
        // i.e. tau = (C2 / f) / 2.
        let tau_seconds = match units.as_str() {
            "hz" => plan.tau_trans / std::f64::consts::PI / 2.0,
            _ => plan.tau_trans,
        };
        let body = json_body(&json!({
            "m": big_to_json(&plan.m),
            "kappa": big_to_json(&plan.kappa),
            "c1": big_to_json(&plan.c1),
            "c2": big_to_json(&plan.c2),
            "j": big_to_json(&plan.j),
            "j_prime": big_to_json(&plan.j_prime),
            "tau_over_pi_input_units": plan.tau_over_pi.to_string(),
            "tau_trans_s": tau_seconds,
        }));
        RunContext::new("plan-transfer", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

/// Exact integers as JSON numbers when they fit, decimal strings otherwise.
fn big_to_json(v: &num_bigint::BigUint) -> Value {
    use num_traits::ToPrimitive;
    match v.to_u64().filter(|&n| n <= (1u64 << 53)) {
        Some(n) => json!(n),
        None => json!(v.to_string()),
    }
}

// --- design-gate ---------------------------------------------------------------

#[derive(Args)]
struct DesignGateCmd {
    /// Target phase in radians, in (-pi, pi]
    #[arg(long)]
    phi: Option<f64>,
    #[arg(
        long = "omega-rad",
        value_name = "RAD_PER_S",
        conflicts_with = "omega_hz"
    )]
    omega_rad: Option<f64>,
    #[arg(long = "omega-hz", value_name = "HZ")]
    omega_hz: Option<f64>,
    #[arg(
        long = "lambda-rad",
        value_name = "RAD_PER_S",
        conflicts_with = "lambda_hz"
    )]
    lambda_rad: Option<f64>,
    #[arg(long = "lambda-hz", value_name = "HZ")]
    lambda_hz: Option<f64>,
    /// Bus size (fix it to solve for omega)
    #[arg(long)]
    kappa: Option<usize>,
    /// Largest odd ell scanned when solving for kappa (default 99)
    #[arg(long)]
    ell_max: Option<u64>,
    #[command(flatten)]
    io: IoArgs,
}

impl DesignGateCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        if let Some(v) = self.phi {
            map.insert("phi".into(), json!(v));
        }
        if let Some(v) = self.omega_rad.or(self.omega_hz.map(|f| f * TAU)) {
            map.insert("omega".into(), json!(v));
        }
        if let Some(v) = self.lambda_rad.or(self.lambda_hz.map(|f| f * TAU)) {
            map.insert("lambda".into(), json!(v));
        }
        if let Some(v) = self.kappa {
            map.insert("kappa".into(), json!(v));
        }
        if let Some(v) = self.ell_max {
            map.insert("ell_max".into(), json!(v));
        }
        let params = overlay_config(map, self.io.config.as_deref())?;

        let phi = get_f64(&params, "phi")?;
        let lambda = get_f64(&params, "lambda")?;
        let omega = params.get("omega").and_then(Value::as_f64);
        let kappa = params
            .get("kappa")
            .and_then(Value::as_u64)
            .map(|v| v as usize);
        let ell_max = params.get("ell_max").and_then(Value::as_u64);
        let fixing = match (omega, kappa) {
            (None, Some(kappa)) => GateFixing::LambdaKappa { lambda, kappa },
            (Some(omega), None) => GateFixing::OmegaLambda { omega, lambda },
            (Some(_), Some(_)) => {
                return Err(usage(
                    "give either --kappa (solve omega) or --omega-* (solve kappa), not both",
                ))
            }
            (None, None) => return Err(usage("need --kappa or --omega-* alongside --lambda-*")),
        };
        let plan = design_gate(phi, fixing, ell_max).map_err(domain)?;
        let body = json_body(&json!({
            "phi": plan.phi,
            "ell": plan.ell,
            "omega": plan.omega,
            "lambda": plan.lambda,
            "kappa": plan.kappa,
            "t_ex_s": plan.t_ex,
            "solved": match plan.solved {
                SolvedParameter::Omega => "omega",
                SolvedParameter::Kappa => "kappa",
            },
        }));
        RunContext::new("design-gate", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- dispersive ---------------------------------------------------------------

#[derive(Args)]
struct DispersiveCmd {
    /// Field frequency (rad/s)
    #[arg(long)]
    omega0: Option<f64>,
    /// Atom frequency (rad/s)
    #[arg(long)]
    nu: Option<f64>,
    /// Atom-field coupling (rad/s)
    #[arg(long)]
    g: Option<f64>,
    /// Spontaneous emission rate (1/s)
    #[arg(long)]
    gamma_spont: Option<f64>,
    /// Mean photon number for the validity check
    #[arg(long)]
    nbar_field: Option<f64>,
    /// |0> amplitude of the field qubit (default 1/sqrt(2))
    #[arg(long)]
    field_alpha: Option<f64>,
    /// Relative phase of the field |1> amplitude (default 0)
    #[arg(long)]
    field_theta: Option<f64>,
    /// Evolution time (seconds)
    #[arg(long)]
    t: Option<f64>,
    #[command(flatten)]
    io: IoArgs,
}

impl DispersiveCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        for (key, value) in [
            ("omega0", self.omega0),
            ("nu", self.nu),
            ("g", self.g),
            ("gamma_spont", self.gamma_spont),
            ("nbar_field", self.nbar_field),
            ("field_alpha", self.field_alpha),
            ("field_theta", self.field_theta),
            ("t", self.t),
        ] {
            if let Some(v) = value {
                map.insert(key.into(), json!(v));
            }
        }
        let params = overlay_config(map, self.io.config.as_deref())?;
        let cfg = DispersiveConfig {
            omega0: get_f64(&params, "omega0")?,
            nu: get_f64(&params, "nu")?,
            g: get_f64(&params, "g")?,
            gamma_spont: params
                .get("gamma_spont")
                .and_then(Value::as_f64)
                .unwrap_or(0.0),
            nbar_field: params
                .get("nbar_field")
                .and_then(Value::as_f64)
                .unwrap_or(0.0),
        };
        let alpha = params
            .get("field_alpha")
            .and_then(Value::as_f64)
            .unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
        let theta = params
            .get("field_theta")
            .and_then(Value::as_f64)
            .unwrap_or(0.0);
        let t = get_f64(&params, "t")?;
        let field = QubitState::from_polar(alpha, theta);
        let out = simulate_dispersive(&cfg, &field, t).map_err(domain)?;
        if !out.regime_valid {
            eprintln!(
                "warning: dispersive approximation outside its domain \
                 (g^2 nbar >= delta_af^2 + gamma^2)"
            );
        }
        let body = json_body(&json!({
            "purity": out.field_purity,
            "phase_error": out.phase_error,
            "validity": out.regime_valid,
        }));
        RunContext::new("dispersive", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- fidelity ---------------------------------------------------------------

#[derive(Args)]
struct FidelityCmd {
    /// Number of (resonant) bus oscillators; the formula assumes kappa = N
    #[arg(long)]
    kappa: Option<usize>,
    /// gamma / lambda directly
    #[arg(long)]
    gamma_over_lambda: Option<f64>,
    /// Emission rate (1/s), together with --lambda-rad
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "lambda-rad", value_name = "RAD_PER_S")]
    lambda_rad: Option<f64>,
    /// Mean thermal photon number
    #[arg(long)]
    nbar: Option<f64>,
    /// Temperature through kB T / h nu
    #[arg(long)]
    kbt_over_hnu: Option<f64>,
    /// Temperature in kelvin, together with --nu-hz
    #[arg(long)]
    temperature: Option<f64>,
    /// Reservoir frequency in Hz for --temperature
    #[arg(long)]
    nu_hz: Option<f64>,
    /// Input-state amplitude for the pointwise fidelity
    #[arg(long)]
    alpha: Option<f64>,
    /// Average over input states instead of evaluating at --alpha
    #[arg(long)]
    avg: bool,
    /// Input ensemble for --avg: alpha-uniform | haar
    #[arg(long)]
    measure: Option<String>,
    /// Total bus size; must equal kappa unless --allow-kappa-ne-n is set
    #[arg(long = "n")]
    cap_n: Option<usize>,
    /// Evaluate even though kappa != N (the formula is stated for kappa = N)
    #[arg(long)]
    allow_kappa_ne_n: bool,
    #[command(flatten)]
    io: IoArgs,
}

impl FidelityCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        if let Some(v) = self.kappa {
            map.insert("kappa".into(), json!(v));
        }
        let gol = match (self.gamma_over_lambda, self.gamma, self.lambda_rad) {
            (Some(v), _, _) => Some(v),
            (None, Some(g), Some(l)) => Some(g / l),
            (None, None, None) => None,
            _ => {
                return Err(usage(
                    "give --gamma-over-lambda or both --gamma and --lambda-rad",
                ))
            }
        };
        if let Some(v) = gol {
            map.insert("gamma_over_lambda".into(), json!(v));
        }
        let nbar = match (self.nbar, self.kbt_over_hnu, self.temperature, self.nu_hz) {
            (Some(v), _, _, _) => Some(v),
            (None, Some(kbt), _, _) => Some(nbar_from_kbt_over_hnu(kbt)),
            (None, None, Some(t), Some(nu)) => Some(planck_nbar(t, nu).map_err(domain)?),
            (None, None, None, None) => None,
            _ => {
                return Err(usage(
                    "give --nbar, --kbt-over-hnu, or --temperature with --nu-hz",
                ))
            }
        };
        if let Some(v) = nbar {
            map.insert("nbar".into(), json!(v));
        }
        if let Some(v) = self.alpha {
            map.insert("alpha".into(), json!(v));
        }
        map.insert("avg".into(), json!(self.avg));
        map.insert(
            "measure".into(),
            json!(self.measure.unwrap_or_else(|| "alpha-uniform".into())),
        );
        if let Some(v) = self.cap_n {
            map.insert("N".into(), json!(v));
        }
        let params = overlay_config(map, self.io.config.as_deref())?;

        let kappa = get_usize(&params, "kappa")?;
        if let Some(cap_n) = params.get("N").and_then(Value::as_u64) {
            if cap_n as usize != kappa && !self.allow_kappa_ne_n {
                return Err(domain(
                    "the closed-form fidelity is stated for kappa = N; \
                     pass --allow-kappa-ne-n to evaluate anyway",
                ));
            }
        }
        let gol = get_f64(&params, "gamma_over_lambda")?;
        let nbar = get_f64(&params, "nbar")?;
        let measure = StateMeasure::parse(get_str(&params, "measure")?)
            .ok_or_else(|| usage("measure must be alpha-uniform or haar"))?;
        let avg = params.get("avg").and_then(Value::as_bool).unwrap_or(false);
        let x = exchange_exponent(gol, 1.0, kappa);

        let body = if avg {
            let fbar = fidelity_avg_with_measure(kappa, x, nbar, measure).map_err(domain)?;
            json_body(&json!({
                "kappa": kappa, "x": x, "nbar": nbar,
                "measure": measure.name(), "fbar": fbar,
            }))
        } else {
            let alpha = get_f64(&params, "alpha")?;
            let f = fidelity_point(kappa, x, nbar, alpha).map_err(domain)?;
            json_body(&json!({
                "kappa": kappa, "x": x, "nbar": nbar, "alpha": alpha, "f": f,
            }))
        };
        RunContext::new("fidelity", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- fidelity-map ---------------------------------------------------------------

#[derive(Args)]
struct FidelityMapCmd {
    /// Damping axis as `start:end:count`
    #[arg(long, value_name = "RANGE")]
    gamma_over_lambda: Option<String>,
    /// Bus-size axis `a:b` (or a single value to hold it fixed)
    #[arg(long, value_name = "RANGE")]
    kappa: Option<String>,
    /// Temperature axis `start:end:count` (or a single value to hold it fixed)
    #[arg(long, value_name = "RANGE")]
    kbt_over_hnu: Option<String>,
    /// Fixed parameter of the panel, e.g. `kbt-over-hnu=0.5` or `kappa=8`
    #[arg(long, value_name = "KEY=VALUE")]
    panel: Option<String>,
    /// Worker threads (default: QT_WORKERS or 1); output is order-independent
    #[arg(long)]
    workers: Option<usize>,
    /// Input ensemble: alpha-uniform | haar
    #[arg(long)]
    measure: Option<String>,
    /// Emit a JSON array (with validity flags) instead of CSV
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    io: IoArgs,
}

impl FidelityMapCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        if let Some(v) = &self.gamma_over_lambda {
            map.insert("gamma_over_lambda".into(), json!(v));
        }
        if let Some(v) = &self.kappa {
            map.insert("kappa".into(), json!(v));
        }
        if let Some(v) = &self.kbt_over_hnu {
            map.insert("kbt_over_hnu".into(), json!(v));
        }
        if let Some(v) = &self.panel {
            let (key, value) = v
                .split_once('=')
                .ok_or_else(|| usage("--panel takes key=value, e.g. kbt-over-hnu=0.5"))?;
            match key {
                "kbt-over-hnu" | "kbt_over_hnu" => {
                    map.insert("kbt_over_hnu".into(), json!(value));
                }
                "kappa" => {
                    map.insert("kappa".into(), json!(value));
                }
                other => return Err(usage(format!("unknown panel parameter `{other}`"))),
            }
        }
        map.insert(
            "measure".into(),
            json!(self
                .measure
                .clone()
                .unwrap_or_else(|| "alpha-uniform".into())),
        );
        if let Some(v) = self.workers {
            map.insert("workers".into(), json!(v));
        }
        let params = overlay_config(map, self.io.config.as_deref())?;

        let gammas = parse_float_range(get_str(&params, "gamma_over_lambda")?)?;
        let kappas = params
            .get("kappa")
            .and_then(Value::as_str)
            .map(parse_int_range)
            .transpose()?;
        let kbts = params
            .get("kbt_over_hnu")
            .and_then(Value::as_str)
            .map(parse_float_range)
            .transpose()?;
        let second_axis = match (kappas, kbts) {
            (Some(ks), Some(kbts)) if kbts.len() == 1 => SecondAxis::Kappa {
                values: ks,
                kbt_over_hnu: kbts[0],
            },
            (Some(ks), Some(kbts)) if ks.len() == 1 => SecondAxis::KbtOverHnu {
                values: kbts,
                kappa: ks[0],
            },
            (Some(ks), None) if ks.len() > 1 => {
                return Err(usage(
                    "a kappa range needs a fixed kbt (--panel kbt-over-hnu=...)",
                ))
            }
            (None, Some(kbts)) if kbts.len() > 1 => {
                return Err(usage("a kbt range needs a fixed kappa (--panel kappa=...)"))
            }
            _ => {
                return Err(usage(
                    "give a kappa range with fixed kbt, or a kbt range with fixed kappa",
                ))
            }
        };
        let measure = StateMeasure::parse(get_str(&params, "measure")?)
            .ok_or_else(|| usage("measure must be alpha-uniform or haar"))?;
        let workers = resolve_workers(
            params
                .get("workers")
                .and_then(Value::as_u64)
                .map(|v| v as usize),
        );

        let grid = MapGrid {
            gamma_over_lambda: gammas,
            second_axis,
        };
        let rows = fidelity_map_with_workers(&grid, measure, workers);

        let body = if self.json {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "gamma_over_lambda": r.gamma_over_lambda,
                        "kBT_over_hnu": r.kbt_over_hnu,
                        "kappa": r.kappa,
                        "nbar": r.nbar,
                        "fbar": r.fbar,
                        "valid": r.valid,
                    })
                })
                .collect();
            json_body(&Value::Array(items))
        } else {
            let mut out = String::with_capacity(rows.len() * 96 + 64);
            out.push_str(MAP_CSV_HEADER);
            out.push('\n');
            for row in &rows {
                out.push_str(&row.csv_row());
                out.push('\n');
            }
            out
        };
        RunContext::new("fidelity-map", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- optimal-kappa ---------------------------------------------------------------

#[derive(Args)]
struct OptimalKappaCmd {
    #[arg(long)]
    gamma_over_lambda: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    kbt_over_hnu: Option<f64>,
    /// Largest bus size scanned (default 60)
    #[arg(long)]
    kappa_max: Option<usize>,
    #[command(flatten)]
    io: IoArgs,
}

impl OptimalKappaCmd {
    fn run(self) -> Result<(), CliError> {
        let mut map = Map::new();
        if let Some(v) = self.gamma_over_lambda {
            map.insert("gamma_over_lambda".into(), json!(v));
        }
        let nbar = match (self.nbar, self.kbt_over_hnu) {
            (Some(v), _) => Some(v),
            (None, Some(kbt)) => Some(nbar_from_kbt_over_hnu(kbt)),
            (None, None) => None,
        };
        if let Some(v) = nbar {
            map.insert("nbar".into(), json!(v));
        }
        map.insert("kappa_max".into(), json!(self.kappa_max.unwrap_or(60)));
        let params = overlay_config(map, self.io.config.as_deref())?;

        let gol = get_f64(&params, "gamma_over_lambda")?;
        let nbar = get_f64(&params, "nbar")?;
        let kappa_max = get_usize(&params, "kappa_max")?.max(1);
        if nbar > 1.0 {
            return Err(domain(format!(
                "the averaged fidelity is stated for nbar <= 1 (got {nbar})"
            )));
        }
        let (kappa_star, fbar_star) = optimal_kappa(gol, nbar, kappa_max);
        let body = json_body(&json!({
            "kappa_star": kappa_star,
            "fbar_star": fbar_star,
            "nbar": nbar,
            "kbt_over_hnu": kbt_over_hnu_from_nbar(nbar),
        }));
        RunContext::new("optimal-kappa", params, self.io.out).finish(&body)?;
        Ok(())
    }
}

// --- validate ---------------------------------------------------------------

#[derive(Args)]
struct ValidateCmd {
    #[command(flatten)]
    io: IoArgs,
}

impl ValidateCmd {
    fn run(self) -> Result<(), CliError> {
        let rows = validate::run_suite();
        let failed = rows.iter().filter(|r| !r.pass()).count();
        let body = json_body(&Value::Array(rows.iter().map(|r| r.to_json()).collect()));
        RunContext::new("validate", json!({}), self.io.out).finish(&body)?;
        if failed > 0 {
            return Err(domain(format!(
                "{failed} of {} validation checks failed",
                rows.len()
            )));
        }
        Ok(())
    }
}

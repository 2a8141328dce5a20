//! Batch command-line frontend: every pipeline, file-based in and out.
//!
//! Exit codes: 0 success, 1 validation error (including bad flags),
//! 2 numerical-contract violation (an identity or certified bound failed
//! beyond tolerance). JSON outputs are byte-identical for the same
//! `RunConfig`; wall-clock metadata goes to a separate `.meta.json` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use psqha::error::PsqhaError;
use psqha::finite_ps::{self, FiniteOp};
use psqha::fock_core::{
    number_state, slit_state, DensityOperator, FockOperator, PhasePoint, PureState,
};
use psqha::phase_grid::{integrate, symplectic_fourier, PSFunction, PSGrid};
use psqha::qconv::{
    convolve_op_op, duality_check, verify_plancherel, weyl_transform, weyl_transform_at,
};
use psqha::tomography::{
    indistinguishable_pair, outcome_density, reconstruct_with, sample_outcomes, trace_distance,
    BumpSpec, CovariantObservable, MeasurementRecord, Regularization,
};
use psqha::zeroset::{
    default_epsilon, default_r_probe, locate_zero_circles, wiener_construction_with_base,
    zero_set_report, Grid1D, WienerBase,
};

#[derive(Parser)]
#[command(name = "psqha", version, about = "Phase-space quantum harmonic analysis pipelines")]
struct Cli {
    /// Directory for JSON/CSV outputs
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArg {
    /// Grid as q_max,p_max,nq,np (symmetric extents, powers of two)
    #[arg(long, default_value = "12,12,256,256")]
    grid: String,
}

impl GridArg {
    fn parse(&self) -> Result<PSGrid, PsqhaError> {
        let parts: Vec<&str> = self.grid.split(',').collect();
        if parts.len() != 4 {
            return Err(PsqhaError::invalid("--grid expects q_max,p_max,nq,np"));
        }
        let q: f64 = parts[0].parse().map_err(|_| PsqhaError::invalid("bad q_max"))?;
        let p: f64 = parts[1].parse().map_err(|_| PsqhaError::invalid("bad p_max"))?;
        let nq: usize = parts[2].parse().map_err(|_| PsqhaError::invalid("bad nq"))?;
        let np: usize = parts[3].parse().map_err(|_| PsqhaError::invalid("bad np"))?;
        PSGrid::new(q, p, nq, np)
    }
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Weyl transform of a state, as JSON table plus |T̂| CSV heat map
    Transform {
        /// State: vacuum | n=K | slit:a | file:path
        #[arg(long, default_value = "vacuum")]
        state: String,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 48)]
        cutoff: usize,
    },
    /// Zero-set classification report for a state's transform
    Zeroset {
        #[arg(long, default_value = "n=1")]
        state: String,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 48)]
        cutoff: usize,
        /// Zero threshold (default: scale-aware heuristic)
        #[arg(long)]
        epsilon: Option<f64>,
        /// Density-probe radius (default: 8 grid steps)
        #[arg(long)]
        r_probe: Option<f64>,
    },
    /// Tomographic reconstruction by deconvolution
    Reconstruct {
        /// Observable generator: vacuum | n=K | slit:a | file:path
        #[arg(long, default_value = "vacuum")]
        observable: String,
        /// True state to measure: vacuum | n=K | slit:a | file:path
        #[arg(long, default_value = "n=1")]
        state: String,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 16)]
        cutoff: usize,
        /// Number of i.i.d. samples; 0 means use the exact density
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        reg_eps: f64,
        /// Use the Tikhonov filter instead of a hard cutoff
        #[arg(long)]
        tikhonov: bool,
    },
    /// Indistinguishable state pair for the slit-generated observable
    Counterexample {
        /// Slit half-width
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 11.0)]
        q_center: f64,
        #[arg(long, default_value_t = 8.0)]
        q_width: f64,
        #[arg(long, default_value_t = 8.0)]
        p_width: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        grid: GridArg,
        #[arg(long, default_value_t = 64)]
        cutoff: usize,
    },
    /// Nonnegative φ with null-but-dense-complement zero set
    WienerBuild {
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        /// 1-D sampling grid as x_min,x_max,n
        #[arg(long, default_value = "-8,8,65536")]
        grid_1d: String,
        /// Base bump: triangle | triangle-squared
        #[arg(long, default_value = "triangle")]
        base: String,
    },
    /// Exact zero-set/regularity/injectivity equivalences on Z_d × Z_d
    FiniteCheck {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// maximally-mixed | basis=k | random-pure | random-mixed
        #[arg(long, default_value = "random-mixed")]
        state: String,
    },
    /// Randomized identity suite for the transform and convolutions
    Identities {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        grid: GridArg,
    },
}

/// Echoed into every output so a run is reproducible from the file alone.
#[derive(Serialize)]
struct RunConfig {
    subcommand: String,
    flags: BTreeMap<String, serde_json::Value>,
    out_dir: String,
    seed: Option<u64>,
}

fn write_outputs(
    out_dir: &Path,
    stem: &str,
    config: &RunConfig,
    result: serde_json::Value,
    csvs: &[(&str, String)],
) -> Result<(), PsqhaError> {
    std::fs::create_dir_all(out_dir).map_err(PsqhaError::Io)?;
    let body = serde_json::json!({ "config": config, "result": result });
    let path = out_dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&body)? + "\n").map_err(PsqhaError::Io)?;
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({ "timestamp_unix_secs": ts });
    std::fs::write(
        out_dir.join(format!("{stem}.meta.json")),
        serde_json::to_string_pretty(&meta)? + "\n",
    )
    .map_err(PsqhaError::Io)?;
    for (name, content) in csvs {
        std::fs::write(out_dir.join(name), content).map_err(PsqhaError::Io)?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Parse a state spec into a density operator at the given cutoff.
fn parse_density(spec: &str, cutoff: usize) -> Result<DensityOperator, PsqhaError> {
    if spec == "vacuum" {
        return Ok(DensityOperator::from_pure(&number_state(0, cutoff)?));
    }
    if let Some(k) = spec.strip_prefix("n=") {
        let k: usize = k.parse().map_err(|_| PsqhaError::invalid("bad n=K"))?;
        return Ok(DensityOperator::from_pure(&number_state(k, cutoff)?));
    }
    if let Some(a) = spec.strip_prefix("slit:") {
        let a: f64 = a.parse().map_err(|_| PsqhaError::invalid("bad slit:a"))?;
        return Ok(DensityOperator::from_pure(&slit_state(a, cutoff)?));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(PsqhaError::Io)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let op = FockOperator::from_json(&v)?;
        return DensityOperator::new(op);
    }
    Err(PsqhaError::invalid(format!(
        "unknown state spec '{spec}' (expected vacuum | n=K | slit:a | file:path)"
    )))
}

fn abs_csv(f: &PSFunction) -> String {
    let grid = *f.grid();
    let mut out = String::with_capacity(grid.nq * grid.np * 24);
    out.push_str("q,p,abs\n");
    for j in 0..grid.nq {
        for k in 0..grid.np {
            out.push_str(&format!(
                "{},{},{}\n",
                grid.q_at(j),
                grid.p_at(k),
                f.value(j, k).norm()
            ));
        }
    }
    out
}

fn flags(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// Random operator of the given rank from Gaussian pure states.
fn random_operator(levels: usize, rank: usize, rng: &mut ChaCha8Rng) -> FockOperator {
    let gauss = |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut op = FockOperator::zero(levels);
    for _ in 0..rank {
        let mut v = DVector::from_fn(levels, |_, _| C64::new(gauss(rng), gauss(rng)));
        let norm = v.norm();
        v /= C64::new(norm, 0.0);
        let state = PureState::new(v).expect("normalized");
        let w = C64::new(gauss(rng), gauss(rng));
        op = op.add(&state.projector().scale(w)).expect("same cutoff");
    }
    op
}

fn run(cli: Cli) -> Result<(), PsqhaError> {
    if let Ok(s) = std::env::var("PSQHA_THREADS") {
        if let Ok(n) = s.parse::<usize>() {
            // ignore failure: the global pool may already exist
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Transform { state, grid, cutoff } => {
            let g = grid.parse()?;
            let rho = parse_density(&state, cutoff)?;
            let table = weyl_transform(rho.op(), g)?;
            let config = RunConfig {
                subcommand: "transform".into(),
                flags: flags(&[
                    ("state", state.clone().into()),
                    ("grid", grid.grid.clone().into()),
                    ("cutoff", cutoff.into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: None,
            };
            let csv = abs_csv(table.values());
            write_outputs(&out_dir, "transform", &config, table.to_json(), &[(
                "transform_abs.csv",
                csv,
            )])
        }
        Command::Zeroset { state, grid, cutoff, epsilon, r_probe } => {
            let g = grid.parse()?;
            let rho = parse_density(&state, cutoff)?;
            let table = weyl_transform(rho.op(), g)?;
            let eps = epsilon.unwrap_or_else(|| default_epsilon(&table));
            let rp = r_probe.unwrap_or_else(|| default_r_probe(&g));
            let report = zero_set_report(&table, eps, rp)?;
            let circles = locate_zero_circles(&table).ok();
            let config = RunConfig {
                subcommand: "zeroset".into(),
                flags: flags(&[
                    ("state", state.clone().into()),
                    ("grid", grid.grid.clone().into()),
                    ("cutoff", cutoff.into()),
                    ("epsilon", eps.into()),
                    ("r_probe", rp.into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: None,
            };
            let result = serde_json::json!({
                "report": report.to_json(),
                "zero_circles_r_squared": circles,
            });
            let csv = abs_csv(table.values());
            write_outputs(&out_dir, "zeroset", &config, result, &[("zeroset_abs.csv", csv)])
        }
        Command::Reconstruct {
            observable,
            state,
            grid,
            cutoff,
            samples,
            seed,
            reg_eps,
            tikhonov,
        } => {
            let g = grid.parse()?;
            let obs = if let Some(a) = observable.strip_prefix("slit:") {
                let a: f64 = a.parse().map_err(|_| PsqhaError::invalid("bad slit:a"))?;
                CovariantObservable::slit(a, cutoff.max(32), g)?
            } else {
                CovariantObservable::new(parse_density(&observable, cutoff.max(8))?, g)?
            };
            let rho = parse_density(&state, cutoff)?;
            let record = if samples == 0 {
                MeasurementRecord::Density(outcome_density(&rho, &obs)?)
            } else {
                sample_outcomes(&rho, &obs, samples, seed)?
            };
            let reg = if tikhonov { Regularization::Tikhonov } else { Regularization::HardCutoff };
            let result = reconstruct_with(&record, &obs, cutoff, reg_eps, reg)?;
            let td = trace_distance(&result.rho_hat, &rho)?;
            let config = RunConfig {
                subcommand: "reconstruct".into(),
                flags: flags(&[
                    ("observable", observable.clone().into()),
                    ("state", state.clone().into()),
                    ("grid", grid.grid.clone().into()),
                    ("cutoff", cutoff.into()),
                    ("samples", samples.into()),
                    ("reg_eps", reg_eps.into()),
                    ("tikhonov", tikhonov.into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: Some(seed),
            };
            let body = serde_json::json!({
                "reconstruction": result.to_json(),
                "trace_distance_to_true_state": td,
            });
            let mut csvs: Vec<(&str, String)> = Vec::new();
            if let MeasurementRecord::Density(f) = &record {
                csvs.push(("measured_density.csv", f.to_csv()));
            }
            let f_hat = outcome_density(&result.rho_hat, &obs);
            if let Ok(f_hat) = f_hat {
                csvs.push(("reconstructed_density.csv", f_hat.to_csv()));
            }
            write_outputs(&out_dir, "reconstruct", &config, body, &csvs)
        }
        Command::Counterexample { a, q_center, q_width, p_width, eps, grid, cutoff } => {
            let g = grid.parse()?;
            let obs = CovariantObservable::slit(a, cutoff, g)?;
            let bump = BumpSpec { q_center, q_width, p_width };
            let (rho1, rho2, report) = indistinguishable_pair(&obs, bump, eps)?;
            let config = RunConfig {
                subcommand: "counterexample".into(),
                flags: flags(&[
                    ("a", a.into()),
                    ("q_center", q_center.into()),
                    ("q_width", q_width.into()),
                    ("p_width", p_width.into()),
                    ("eps", eps.into()),
                    ("grid", grid.grid.clone().into()),
                    ("cutoff", cutoff.into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: None,
            };
            let diff = rho1.op().sub(rho2.op())?;
            let diff_table = weyl_transform(&diff, g)?;
            let result = serde_json::json!({
                "report": report,
                "rho1": rho1.op().to_json(),
                "rho2": rho2.op().to_json(),
            });
            let csv = abs_csv(diff_table.values());
            write_outputs(&out_dir, "counterexample", &config, result, &[(
                "pair_transform_diff_abs.csv",
                csv,
            )])?;
            if report.trace_norm_diff < 0.01 || report.sup_density_diff > 1e-6 {
                return Err(PsqhaError::ContractViolation(format!(
                    "pair not certifiably indistinguishable: trace diff {:.3e}, density diff {:.3e}",
                    report.trace_norm_diff, report.sup_density_diff
                )));
            }
            Ok(())
        }
        Command::WienerBuild { n_max, grid_1d, base } => {
            let parts: Vec<&str> = grid_1d.split(',').collect();
            if parts.len() != 3 {
                return Err(PsqhaError::invalid("--grid-1d expects x_min,x_max,n"));
            }
            let x_min: f64 = parts[0].parse().map_err(|_| PsqhaError::invalid("bad x_min"))?;
            let x_max: f64 = parts[1].parse().map_err(|_| PsqhaError::invalid("bad x_max"))?;
            let n: usize = parts[2].parse().map_err(|_| PsqhaError::invalid("bad n"))?;
            let base_kind = match base.as_str() {
                "triangle" => WienerBase::Triangle,
                "triangle-squared" => WienerBase::TriangleSquared,
                other => {
                    return Err(PsqhaError::invalid(format!(
                        "unknown base '{other}' (triangle | triangle-squared)"
                    )))
                }
            };
            let built = wiener_construction_with_base(n_max, Grid1D::new(x_min, x_max, n)?, base_kind)?;
            let min_phi = built.phi.values.iter().copied().fold(f64::INFINITY, f64::min);
            let config = RunConfig {
                subcommand: "wiener-build".into(),
                flags: flags(&[
                    ("n_max", n_max.into()),
                    ("grid_1d", grid_1d.clone().into()),
                    ("base", base.clone().into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: None,
            };
            let result = serde_json::json!({
                "zero_set": built.zeros.to_json(),
                "min_phi": min_phi,
            });
            let mut phi_csv = String::from("t,phi\n");
            for (i, v) in built.phi.values.iter().enumerate() {
                phi_csv.push_str(&format!("{},{}\n", built.phi.grid.x_at(i), v));
            }
            let mut hat_csv = String::from("q,phi_hat\n");
            for (i, v) in built.phi_hat.values.iter().enumerate() {
                hat_csv.push_str(&format!("{},{}\n", built.phi_hat.grid.x_at(i), v));
            }
            write_outputs(&out_dir, "wiener_build", &config, result, &[
                ("wiener_phi.csv", phi_csv),
                ("wiener_phi_hat.csv", hat_csv),
            ])
        }
        Command::FiniteCheck { d, trials, seed, state } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut reports = Vec::new();
            let mut disagreements = 0usize;
            let randomized = matches!(state.as_str(), "random-pure" | "random-mixed");
            let runs = if randomized { trials.max(1) } else { 1 };
            for _ in 0..runs {
                let t: FiniteOp = match state.as_str() {
                    "maximally-mixed" => FiniteOp::maximally_mixed(d),
                    "random-pure" => finite_ps::random_pure(d, &mut rng),
                    "random-mixed" => finite_ps::random_mixed(d, &mut rng),
                    s => {
                        if let Some(k) = s.strip_prefix("basis=") {
                            let k: usize =
                                k.parse().map_err(|_| PsqhaError::invalid("bad basis=k"))?;
                            FiniteOp::basis_state(d, k)?
                        } else if s == "basis" {
                            FiniteOp::basis_state(d, 0)?
                        } else {
                            return Err(PsqhaError::invalid(format!(
                                "unknown finite state '{s}'"
                            )));
                        }
                    }
                };
                let report = finite_ps::check_equivalences(&t)?;
                if !report.agree {
                    disagreements += 1;
                }
                reports.push(report.to_json());
            }
            let config = RunConfig {
                subcommand: "finite-check".into(),
                flags: flags(&[
                    ("d", d.into()),
                    ("trials", trials.into()),
                    ("state", state.clone().into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: Some(seed),
            };
            let result = serde_json::json!({
                "runs": runs,
                "disagreements": disagreements,
                "reports": reports,
            });
            write_outputs(&out_dir, "finite_check", &config, result, &[])?;
            if disagreements > 0 {
                return Err(PsqhaError::ContractViolation(format!(
                    "{disagreements} equivalence disagreements out of {runs} runs"
                )));
            }
            Ok(())
        }
        Command::Identities { trials, seed, grid } => {
            let g = grid.parse()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let levels = 8;
            let mut worst_trace = 0.0f64;
            let mut worst_plancherel = 0.0f64;
            let mut worst_integral = 0.0f64;
            let mut worst_duality = 0.0f64;
            let mut worst_convolution = 0.0f64;
            for _ in 0..trials.max(1) {
                let a = random_operator(levels, 3, &mut rng);
                let b = random_operator(levels, 3, &mut rng);
                // trace normalization T̂(0,0) = tr T
                let at_zero = weyl_transform_at(&a, PhasePoint { q: 0.0, p: 0.0 });
                worst_trace = worst_trace.max((at_zero - a.trace()).norm());
                // quantum Plancherel
                worst_plancherel = worst_plancherel.max(verify_plancherel(&a, g)?.rel_dev);
                // integral identity ∫ A*B = tr A · tr B
                let conv = convolve_op_op(&a, &b, g)?;
                let lhs = integrate(&conv);
                let rhs = a.trace() * b.trace();
                let scale = rhs.norm().max(1e-4 / 1e-3);
                worst_integral = worst_integral.max((lhs - rhs).norm() / scale);
                // duality ∫ f_−(A*B) = tr{A_− (f*B)}
                let f = PSFunction::from_fn(g, |q, p| {
                    C64::new((-(q * q + p * p) / 4.0).exp(), 0.0)
                });
                worst_duality = worst_duality.max(duality_check(&f, &a, &b)?.rel_err);
                // convolution theorem SF(A*B) = Â·B̂
                let ahat = weyl_transform(&a, g)?;
                let bhat = weyl_transform(&b, g)?;
                let product = ahat.values().mul_pointwise(bhat.values())?;
                let sf = symplectic_fourier(&conv);
                let denom = product.max_abs().max(1e-12);
                worst_convolution =
                    worst_convolution.max(sf.sub(&product)?.max_abs() / denom);
            }
            let config = RunConfig {
                subcommand: "identities".into(),
                flags: flags(&[
                    ("trials", trials.into()),
                    ("grid", grid.grid.clone().into()),
                ]),
                out_dir: out_dir.display().to_string(),
                seed: Some(seed),
            };
            let pass = worst_trace <= 1e-8
                && worst_plancherel <= 1e-3
                && worst_integral <= 1e-3
                && worst_duality <= 1e-3
                && worst_convolution <= 1e-4;
            let result = serde_json::json!({
                "worst_trace_normalization": worst_trace,
                "worst_plancherel_rel": worst_plancherel,
                "worst_integral_identity_rel": worst_integral,
                "worst_duality_rel": worst_duality,
                "worst_convolution_theorem_rel": worst_convolution,
                "pass": pass,
            });
            write_outputs(&out_dir, "identities", &config, result, &[])?;
            if !pass {
                return Err(PsqhaError::ContractViolation(
                    "identity suite exceeded tolerance".into(),
                ));
            }
            println!("all identity checks passed ({} trials)", trials.max(1));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help; --help and --version are success
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ PsqhaError::ContractViolation(_)) => {
            eprintln!("numerical contract violation: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

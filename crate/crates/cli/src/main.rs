//! Command-line pipeline: build model, prepare product state, filter,
//! measure, report — plus exact-diagonalization and sweep drivers.
//!
//! Exit codes: 0 success, 2 config error, 3 norm collapse, 4 infeasible
//! parameters / violated assumptions, 5 size guard, 1 other failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use varmps::config::{RunConfig, SweepConfig};
use varmps::diagnostics::{entropy_vs_bond_report, fit_power_law, run_sweep};
use varmps::error::Error;
use varmps::filter::{apply_filter_mps, FilterParams};
use varmps::hamiltonian::DENSE_SITE_LIMIT;
use varmps::oracle::{
    berry_esseen_error, characteristic_function, diagonalize, exact_filtered_moments,
    DEFAULT_S_RATIO_FLOOR,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const OUT_ENV: &str = "VARMPS_OUT";

#[derive(Parser)]
#[command(name = "varmps", version, about = "Energy-variance filtering for 1D spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config (or sweep plan) path.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and VARMPS_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the truncated cosine filter to a product state and report.
    Filter,
    /// Exact diagonalization: spectrum, Berry-Esseen error, characteristic
    /// function, and (with a filter section) ground-truth moments.
    Oracle,
    /// Run a parameter sweep plan.
    Sweep,
    /// Parse and validate a config without running anything.
    Validate,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::NormCollapse(_) => 3,
        Error::InfeasibleParams(_) | Error::AssumptionViolated(_) => 4,
        Error::SizeGuard(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let Some(config_path) = cli.config.clone() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let result = match cli.command {
        Command::Filter => cmd_filter(&cli, &config_path),
        Command::Oracle => cmd_oracle(&cli, &config_path),
        Command::Sweep => cmd_sweep(&cli, &config_path),
        Command::Validate => cmd_validate(&config_path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code_for(&err);
            eprintln!("error: {err}");
            // structured failure record next to the outputs when possible
            if let Ok(dir) = resolve_out_dir(&cli, &config_path) {
                let payload = serde_json::json!({
                    "error": err.to_string(),
                    "exit_code": code,
                });
                let _ = std::fs::write(
                    dir.join("error.json"),
                    serde_json::to_string_pretty(&payload).unwrap_or_default(),
                );
            }
            ExitCode::from(code)
        }
    }
}

fn file_hash(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_digest(&hasher.finalize()[..])[..16].to_string())
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_out_dir(cli: &Cli, config_path: &Path) -> Result<PathBuf, Error> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        return Ok(dir.clone());
    }
    if let Ok(cfg) = RunConfig::load(config_path) {
        if let Some(dir) = cfg.output.directory {
            let p = PathBuf::from(dir);
            std::fs::create_dir_all(&p)?;
            return Ok(p);
        }
    }
    if let Ok(cfg) = SweepConfig::load(config_path) {
        if let Some(dir) = cfg.output.directory {
            let p = PathBuf::from(dir);
            std::fs::create_dir_all(&p)?;
            return Ok(p);
        }
    }
    let dir = std::env::var(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from("varmps_out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn meta_json(config_hash: &str, schema: &str) -> serde_json::Value {
    serde_json::json!({
        "config_hash": config_hash,
        "version": VERSION,
        "schema": schema,
    })
}

fn csv_header(config_hash: &str, columns: &str) -> String {
    format!("# config_hash: {config_hash}\n# version: {VERSION}\n# columns: {columns}\n")
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value).map_err(io_err)?)?;
    Ok(())
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Config {
        field: "<serialize>".into(),
        message: e.to_string(),
    }
}

/// Shared setup for filter/oracle runs.
struct RunSetup {
    cfg: RunConfig,
    hash: String,
    spec: varmps::HamiltonianSpec,
    state: varmps::MpsState,
    policy: varmps::TruncationPolicy,
    seed: u64,
}

fn load_run(cli: &Cli, config_path: &Path) -> Result<RunSetup, Error> {
    let cfg = RunConfig::load(config_path)?;
    cfg.output.validate()?;
    let hash = file_hash(config_path)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let spec = cfg.model.build()?;
    let state = cfg.state.build(spec.n_sites(), seed)?;
    let policy = cfg.truncation.build()?;
    Ok(RunSetup {
        cfg,
        hash,
        spec,
        state,
        policy,
        seed,
    })
}

fn cmd_filter(cli: &Cli, config_path: &Path) -> Result<(), Error> {
    let setup = load_run(cli, config_path)?;
    let out_dir = resolve_out_dir(cli, config_path)?;
    let filter_cfg = setup.cfg.filter.as_ref().ok_or_else(|| Error::Config {
        field: "filter".into(),
        message: "filter section is required for the filter command".into(),
    })?;
    let n = setup.spec.n_sites();
    let (m, y, eps) = filter_cfg.resolve(n)?;

    let h_mpo = setup.spec.build_mpo()?;
    let e_measured = setup.state.expectation(&h_mpo)?.re;
    let e2 = setup.state.expectation_squared(&h_mpo)?.re;
    let sigma2 = e2 - e_measured * e_measured;

    // the variance-target route presumes maximal-order energy
    // fluctuations of the input state
    if filter_cfg.target_delta.is_some() {
        let floor = setup
            .cfg
            .oracle
            .as_ref()
            .map(|o| o.s_ratio_floor)
            .unwrap_or(DEFAULT_S_RATIO_FLOOR);
        let s_ratio = sigma2.max(0.0).sqrt() / (n as f64).sqrt();
        if s_ratio < floor {
            return Err(Error::AssumptionViolated(format!(
                "s ratio sigma/sqrt(N) = {s_ratio:.4} below floor {floor}"
            )));
        }
    }
    let e_center = filter_cfg.e_center_override()?.unwrap_or(e_measured);
    let params = FilterParams::new(m, y, e_center, eps)?;

    let (filtered, report) = apply_filter_mps(&setup.state, &params, &setup.spec, &setup.policy)?;
    let entropy = entropy_vs_bond_report(&filtered)?;

    filtered.save(&out_dir.join("state.mps"))?;
    let report_json = serde_json::json!({
        "meta": meta_json(&setup.hash, "filter_report"),
        "seed": setup.seed,
        "sigma2_initial": sigma2,
        "report": report,
        "entropy_vs_bond": entropy,
    });
    write_json(&out_dir.join("report.json"), &report_json)?;

    let summary = format!(
        "model: {} (N = {n})\nM = {m}, y = {y:.6}, E_center = {e_center:.12}\n\
         mu = {:.12}\ndelta2 = {:.12}\npre-normalization log-norm = {:.6}\n\
         max bond = {}\nmidpoint S1 = {:.6}\ndiscarded weight = {:.3e}\n",
        setup.spec.model().name(),
        report.mu,
        report.delta2,
        report.pre_norm_log,
        report.max_bond,
        entropy
            .rows
            .get((n - 1) / 2)
            .map(|r| r.s1)
            .unwrap_or(0.0),
        report.discarded_weight,
    );
    std::fs::write(out_dir.join("summary.txt"), summary)?;
    println!(
        "filter done: mu = {:.6}, delta2 = {:.6}, max bond = {}",
        report.mu, report.delta2, report.max_bond
    );
    Ok(())
}

fn cmd_oracle(cli: &Cli, config_path: &Path) -> Result<(), Error> {
    let setup = load_run(cli, config_path)?;
    let out_dir = resolve_out_dir(cli, config_path)?;
    let n = setup.spec.n_sites();
    if n > DENSE_SITE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "oracle command needs n_sites <= {DENSE_SITE_LIMIT}"
        )));
    }
    let data = diagonalize(&setup.spec, &setup.state)?;

    let mut spectrum = csv_header(&setup.hash, "eigenvalue,population");
    spectrum.push_str(&data.to_csv());
    std::fs::write(out_dir.join("spectrum.csv"), spectrum)?;

    let (zeta, argmax) = berry_esseen_error(&data)?;
    write_json(
        &out_dir.join("zeta.json"),
        &serde_json::json!({
            "meta": meta_json(&setup.hash, "berry_esseen"),
            "zeta": zeta,
            "argmax_x": argmax,
            "zeta_sqrt_n": zeta * (n as f64).sqrt(),
            "mean": data.mean,
            "sigma": data.sigma,
            "s_ratio": data.s_ratio,
        }),
    )?;

    let oracle_cfg = setup.cfg.oracle.clone().unwrap_or_default();
    let phi_points = oracle_cfg.phi_points.max(2);
    let t_max = data.sigma / 2.0;
    let grid: Vec<f64> = (0..phi_points)
        .map(|i| t_max * i as f64 / (phi_points as f64 - 1.0))
        .collect();
    let phi = characteristic_function(&data, &grid)?;
    let mut phi_csv = csv_header(&setup.hash, "t,phi_re,phi_im");
    for (t, v) in grid.iter().zip(&phi) {
        phi_csv.push_str(&format!("{t:.17e},{:.17e},{:.17e}\n", v.re, v.im));
    }
    std::fs::write(out_dir.join("phi.csv"), phi_csv)?;

    if let Some(filter_cfg) = &setup.cfg.filter {
        let (m, y, eps) = filter_cfg.resolve(n)?;
        let e_center = filter_cfg.e_center_override()?.unwrap_or(data.mean);
        let params = FilterParams::new(m, y, e_center, eps)?;
        let (mu, delta2, norm2) = exact_filtered_moments(&data, &params)?;
        write_json(
            &out_dir.join("moments.json"),
            &serde_json::json!({
                "meta": meta_json(&setup.hash, "exact_filtered_moments"),
                "m": m,
                "y": y,
                "e_center": e_center,
                "mu": mu,
                "delta2": delta2,
                "norm2": norm2,
            }),
        )?;
    }
    println!("oracle done: zeta = {zeta:.6} at x = {argmax:.6}");
    Ok(())
}

fn cmd_sweep(cli: &Cli, config_path: &Path) -> Result<(), Error> {
    let cfg = SweepConfig::load(config_path)?;
    let hash = file_hash(config_path)?;
    let plan = cfg.build_plan()?;
    let base = resolve_out_dir(cli, config_path)?;
    let out_dir = base.join(format!("sweep_{hash}"));
    std::fs::create_dir_all(&out_dir)?;

    let table = run_sweep(&plan)?;
    let csv = table.to_csv(&[
        ("config_hash", hash.clone()),
        ("version", VERSION.to_string()),
    ]);
    std::fs::write(out_dir.join("results.csv"), csv)?;

    // delta^2 vs M power-law fits per (model, policy, seed) group
    let mut fits = Vec::new();
    for (model_idx, _) in plan.models.iter().enumerate() {
        for (policy_idx, _) in plan.policies.iter().enumerate() {
            for &seed in &plan.seeds {
                let cells: Vec<(f64, f64)> = table
                    .rows
                    .iter()
                    .filter(|r| {
                        r.ok && r.seed == seed
                            && r.model == plan.models[model_idx].model().name()
                            && r.max_bond_cap == plan.policies[policy_idx].max_bond
                    })
                    .filter_map(|r| {
                        let d2 = r.delta2_dense.or(r.delta2_mps)?;
                        (d2 > 0.0).then_some((r.m_power as f64, d2))
                    })
                    .collect();
                if cells.len() >= 4 {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = cells.into_iter().unzip();
                    if let Ok(fit) = fit_power_law(&xs, &ys) {
                        fits.push(serde_json::json!({
                            "model_index": model_idx,
                            "policy_index": policy_idx,
                            "seed": seed,
                            "quantity": "delta2_vs_m",
                            "fit": fit,
                        }));
                    }
                }
            }
        }
    }
    write_json(
        &out_dir.join("fits.json"),
        &serde_json::json!({
            "meta": meta_json(&hash, "scaling_fits"),
            // finite-size drift absorbed by these exponent tolerances
            "tolerances": {
                "delta2_vs_m_exponent": [-1.15, -0.85],
                "zeta_vs_n_exponent_max": -0.4,
            },
            "fits": fits,
        }),
    )?;

    let ok = table.n_ok();
    let total = table.rows.len();
    println!("sweep done: {ok}/{total} cells ok, outputs in {}", out_dir.display());
    if ok == 0 {
        return Err(Error::InvalidArgument("every sweep cell failed".into()));
    }
    Ok(())
}

fn cmd_validate(config_path: &Path) -> Result<(), Error> {
    let text = std::fs::read_to_string(config_path)?;
    let hash = file_hash(config_path)?;
    let is_sweep = text.contains("[[models]]");
    if is_sweep {
        let cfg = SweepConfig::parse(&text)?;
        let plan = cfg.build_plan()?;
        plan.validate()?;
        println!("OK sweep plan {hash}: {} cells", {
            plan.models.len() * plan.m_grid.len() * plan.policies.len() * plan.seeds.len()
        });
    } else {
        let cfg = RunConfig::parse(&text)?;
        cfg.output.validate()?;
        let spec = cfg.model.build()?;
        let n = spec.n_sites();
        cfg.state.build(n, cfg.seed)?;
        cfg.truncation.build()?;
        if let Some(f) = &cfg.filter {
            f.resolve(n)?;
            f.e_center_override()?;
        }
        println!("OK config {hash}: {} with N = {n}", spec.model().name());
    }
    Ok(())
}

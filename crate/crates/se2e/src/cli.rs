//! Batch command-line interface. All outputs are files; commands are
//! deterministic functions of (config, seed).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use forecast::Dataset;
use gridflow::{ieee33_file, Injections, NetworkFile};

use crate::chain::ModelSet;
use crate::config::RunConfig;
use crate::context::RunContext;
use crate::evaluate::Evaluator;
use crate::train::{pretrain, train_hsgd, train_mse_baseline};
use crate::PipelineError;

#[derive(Parser, Debug)]
#[command(name = "se2e", about = "Volt/var-aware training of PV and load predictors", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for per-timestep solves (default: logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic benchmark dataset.
    GenData {
        #[arg(long, default_value_t = 250)]
        days: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// MSE pretraining of all prediction models.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hybrid training from pretrained checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also train an MSE-only baseline for the same number of epochs.
        #[arg(long, default_value_t = true)]
        baseline: bool,
    },
    /// Evaluate checkpoints on the test split and write the report.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Which checkpoints to score: train, baseline, or pretrain.
        #[arg(long, default_value = "train")]
        checkpoints: String,
    },
    /// Solve one dispatch instance and print the solution.
    Solve {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        injections: PathBuf,
        #[arg(long, default_value_t = 0)]
        t: usize,
        #[arg(long, default_value = "safety")]
        scenario: String,
    },
    /// Finite-difference verification of both conic derivative paths.
    DiffCheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        cases: usize,
        /// Test hook: force a failing row.
        #[arg(long, hide = true, default_value_t = false)]
        force_fail: bool,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "validation".into(),
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "runtime".into(),
            message: message.into(),
        }
    }

    fn check_failure(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "check-failure".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind, "message": self.message, "code": self.code }
        })
        .to_string()
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Config(_) | PipelineError::MissingArtifact(_) => {
                CliError::validation(e.to_string())
            }
            PipelineError::Forecast(forecast::ForecastError::SchemaVersion { .. })
            | PipelineError::Forecast(forecast::ForecastError::MissingColumn(_))
            | PipelineError::Forecast(forecast::ForecastError::MalformedRow { .. })
            | PipelineError::Forecast(forecast::ForecastError::Invalid(_)) => {
                CliError::validation(e.to_string())
            }
            _ => CliError::runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionsFile {
    p_pv_kw: Vec<Vec<f64>>,
    p_d_kw: Vec<Vec<f64>>,
    q_d_kvar: Vec<Vec<f64>>,
}

fn load_network(path: &Option<PathBuf>) -> Result<NetworkFile, CliError> {
    match path {
        None => Ok(ieee33_file()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::validation(format!("cannot read network {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("network schema error: {e}")))
        }
    }
}

fn apply_overrides(
    cfg: &mut RunConfig,
    scenario: &Option<String>,
    seed: &Option<u64>,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(s) = scenario {
        cfg.train.scenario = s
            .parse()
            .map_err(|e: gridflow::GridError| CliError::validation(e.to_string()))?;
    }
    if let Some(s) = seed {
        cfg.train.seed = *s;
    }
    if let Some(o) = out {
        cfg.out = o.clone();
    }
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    if !cfg.dataset.join("manifest.json").exists() {
        return Err(CliError::validation(format!(
            "missing dataset at {} (run gen-data first)",
            cfg.dataset.display()
        )));
    }
    Ok(forecast::dataset::load(&cfg.dataset).map_err(PipelineError::from)?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::GenData { days, seed, out } => cmd_gen_data(days, seed, &out),
        Command::Pretrain {
            config,
            scenario,
            seed,
            out,
        } => {
            let mut cfg = RunConfig::from_file(&config).map_err(CliError::from)?;
            apply_overrides(&mut cfg, &scenario, &seed, &out)?;
            cmd_pretrain(&cfg)
        }
        Command::Train {
            config,
            scenario,
            seed,
            out,
            baseline,
        } => {
            let mut cfg = RunConfig::from_file(&config).map_err(CliError::from)?;
            apply_overrides(&mut cfg, &scenario, &seed, &out)?;
            cmd_train(&cfg, baseline)
        }
        Command::Eval {
            config,
            scenario,
            seed,
            out,
            checkpoints,
        } => {
            let mut cfg = RunConfig::from_file(&config).map_err(CliError::from)?;
            apply_overrides(&mut cfg, &scenario, &seed, &out)?;
            cmd_eval(&cfg, &checkpoints)
        }
        Command::Solve {
            network,
            injections,
            t,
            scenario,
        } => cmd_solve(&network, &injections, t, &scenario),
        Command::DiffCheck {
            seed,
            cases,
            force_fail,
        } => cmd_diff_check(seed, cases, force_fail),
    }
}

fn cmd_gen_data(days: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if days < 20 {
        return Err(CliError::validation(format!(
            "--days must be at least 20, got {days}"
        )));
    }
    let file = ieee33_file();
    let net = gridflow::Network::from_file(&file, gridflow::Scenario::Safety)
        .map_err(PipelineError::from)?;
    let dev = gridflow::DeviceSet::from_file(&file.devices, &net).map_err(PipelineError::from)?;
    let dataset =
        forecast::generate_synthetic(seed, days, &dev).map_err(PipelineError::from)?;
    forecast::dataset::save(&dataset, out).map_err(PipelineError::from)?;
    println!("{}", out.join("manifest.json").display());
    Ok(())
}

fn cmd_pretrain(cfg: &RunConfig) -> Result<(), CliError> {
    let dataset = load_dataset(cfg)?;
    let file = load_network(&cfg.network)?;
    let _ctx = RunContext::new(&file, &cfg.train).map_err(CliError::from)?;
    let mut models = ModelSet::new(&dataset, &cfg.train).map_err(CliError::from)?;
    let curves = pretrain(&mut models, &dataset, cfg.train.pretrain_epochs).map_err(CliError::from)?;
    models
        .save_all(&cfg.out.join("pretrain"))
        .map_err(CliError::from)?;
    let mut s = String::from("epoch");
    for m in 0..models.model_count() {
        s.push_str(&format!(",mse_model{m}"));
    }
    s.push('\n');
    for (e, row) in curves.iter().enumerate() {
        s.push_str(&e.to_string());
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    std::fs::create_dir_all(&cfg.out).map_err(PipelineError::from)?;
    std::fs::write(cfg.out.join("pretrain_curves.csv"), s).map_err(PipelineError::from)?;
    println!("{}", cfg.out.join("pretrain").display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, with_baseline: bool) -> Result<(), CliError> {
    let dataset = load_dataset(cfg)?;
    let file = load_network(&cfg.network)?;
    let ctx = RunContext::new(&file, &cfg.train).map_err(CliError::from)?;
    let pre_dir = cfg.out.join("pretrain");
    let mut models = ModelSet::load_all(&pre_dir, dataset.n_sites()).map_err(CliError::from)?;
    let stats = train_hsgd(&ctx, &mut models, &dataset).map_err(CliError::from)?;
    models
        .save_all(&cfg.out.join("train"))
        .map_err(CliError::from)?;
    let mut s = String::from("epoch,mean_reg_loss_pu,mean_loss_kw,violation_rate,days_skipped\n");
    for e in &stats {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.mean_reg_loss_pu, e.mean_loss_kw, e.violation_rate, e.days_skipped
        ));
    }
    std::fs::write(cfg.out.join("train_curves.csv"), s).map_err(PipelineError::from)?;
    serde_json::to_writer(
        std::fs::File::create(cfg.out.join("train_stats.json")).map_err(PipelineError::from)?,
        &stats,
    )
    .map_err(PipelineError::from)?;
    if with_baseline {
        let mut baseline = ModelSet::load_all(&pre_dir, dataset.n_sites()).map_err(CliError::from)?;
        train_mse_baseline(&ctx, &mut baseline, &dataset).map_err(CliError::from)?;
        baseline
            .save_all(&cfg.out.join("baseline"))
            .map_err(CliError::from)?;
    }
    println!("{}", cfg.out.join("train").display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, checkpoints: &str) -> Result<(), CliError> {
    if !matches!(checkpoints, "train" | "baseline" | "pretrain") {
        return Err(CliError::validation(format!(
            "--checkpoints must be one of train, baseline, pretrain; got '{checkpoints}'"
        )));
    }
    let dataset = load_dataset(cfg)?;
    let file = load_network(&cfg.network)?;
    let ctx = RunContext::new(&file, &cfg.train).map_err(CliError::from)?;
    let dir = cfg.out.join(checkpoints);
    let models = ModelSet::load_all(&dir, dataset.n_sites()).map_err(CliError::from)?;
    let per_epoch = {
        let p = cfg.out.join("train_stats.json");
        if checkpoints == "train" && p.exists() {
            serde_json::from_str(&std::fs::read_to_string(&p).map_err(PipelineError::from)?)
                .map_err(PipelineError::from)?
        } else {
            Vec::new()
        }
    };
    let evaluator = Evaluator::new(&ctx, &dataset).map_err(CliError::from)?;
    let report = evaluator
        .evaluate(&ctx, &models, &dataset, checkpoints, per_epoch)
        .map_err(CliError::from)?;
    let report_path = cfg.out.join(format!("report_{checkpoints}.json"));
    report.save(&report_path).map_err(CliError::from)?;
    report
        .write_plot_csvs(&cfg.out.join("plots").join(checkpoints))
        .map_err(CliError::from)?;
    eprintln!(
        "evaluated {checkpoints}: avg loss {:.2} kW, regret {:.3} kW, violations {:.2}% ({:.1}s)",
        report.average.power_loss_kw,
        report.average.regret_kw,
        report.average.violation_rate * 100.0,
        report.wall_seconds
    );
    println!("{}", report_path.display());
    Ok(())
}

fn cmd_solve(
    network: &Option<PathBuf>,
    injections: &Path,
    t: usize,
    scenario: &str,
) -> Result<(), CliError> {
    let file = load_network(network)?;
    let scenario: gridflow::Scenario = scenario
        .parse()
        .map_err(|e: gridflow::GridError| CliError::validation(e.to_string()))?;
    let net = gridflow::Network::from_file(&file, scenario).map_err(PipelineError::from)?;
    let dev = gridflow::DeviceSet::from_file(&file.devices, &net).map_err(PipelineError::from)?;
    let text = std::fs::read_to_string(injections)
        .map_err(|e| CliError::validation(format!("cannot read injections: {e}")))?;
    let inj_file: InjectionsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("injection schema error: {e}")))?;
    let horizon = inj_file
        .p_d_kw
        .first()
        .map(|s| s.len())
        .ok_or_else(|| CliError::validation("injections need at least one bus series"))?;
    let inj = Injections::new(inj_file.p_pv_kw, inj_file.p_d_kw, inj_file.q_d_kvar, horizon)
        .map_err(PipelineError::from)?;
    if t >= horizon {
        return Err(CliError::validation(format!(
            "--t {t} outside horizon {horizon}"
        )));
    }
    let (problem, map) =
        gridflow::build_decision_problem(&net, &dev, &inj, t).map_err(PipelineError::from)?;
    let mut settings = conic::SolverSettings::default();
    settings.tolerance = 1e-8;
    settings.max_iters = 400_000;
    let solution = conic::solve(&problem, &settings).map_err(PipelineError::from)?;
    if solution.status != conic::SolveStatus::Optimal {
        return Err(CliError::runtime(format!(
            "dispatch did not reach optimality: {:?}",
            solution.status
        )));
    }
    let out = gridflow::extract_outcome(&solution, &map, &net).map_err(PipelineError::from)?;
    println!(
        "{}",
        serde_json::json!({
            "status": "optimal",
            "objective_pu": solution.objective(&problem),
            "power_loss_kw": out.power_loss_kw,
            "q_reg_kvar": out.q_reg_kvar,
            "v_pu": out.v.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
            "relaxation_gap": out.relaxation_gap,
            "iterations": solution.iterations,
            "voltage_box": [net.v_min, net.v_max],
        })
    );
    Ok(())
}

fn cmd_diff_check(seed: u64, cases: usize, force_fail: bool) -> Result<(), CliError> {
    use conic::{solve, SolutionGradients, SolverSettings};
    use rand::prelude::*;

    let mut rng = crate::rng_for(seed, "diff-check");
    let mut failures = 0usize;
    println!("{:<28} {:>12} {:>8}", "check", "max rel err", "status");
    let mut oracle = SolverSettings::default();
    oracle.tolerance = 1e-10;
    oracle.max_iters = 400_000;
    let h = 3e-5;
    for case in 0..cases {
        // random feasible SOCP, b-direction FD check of the vjp
        let n = rng.gen_range(3..=6);
        let cones = conic::ConeSpec::new(rng.gen_range(0..=2), rng.gen_range(1..=4), vec![3]).unwrap();
        let m = cones.total_dim();
        let mut triplets = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.gen_bool(0.8) || i % n == j {
                    triplets.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let a = conic::SparseMatrix::from_triplets(m, n, &triplets).unwrap();
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut s0 = vec![0.0; m];
        let mut y0 = vec![0.0; m];
        {
            let mut off = cones.zero_dim;
            for i in 0..cones.nonneg_dim {
                s0[off + i] = rng.gen_range(0.3..1.5);
                y0[off + i] = rng.gen_range(0.3..1.5);
            }
            off += cones.nonneg_dim;
            for &d in &cones.soc_dims {
                for v in [&mut s0, &mut y0] {
                    let x: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-0.7..0.7)).collect();
                    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v[off] = norm + rng.gen_range(0.3..1.0);
                    v[off + 1..off + d].copy_from_slice(&x);
                }
                off += d;
            }
            for i in 0..cones.zero_dim {
                y0[i] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut b = vec![0.0; m];
        a.matvec(&x0, &mut b);
        for (bi, si) in b.iter_mut().zip(&s0) {
            *bi += si;
        }
        let mut c = vec![0.0; n];
        a.matvec_t(&y0, &mut c);
        for ci in c.iter_mut() {
            *ci = -*ci;
        }
        let p = conic::ConicProblem::new(a, b, c, cones).unwrap();
        let sol = solve(&p, &oracle).map_err(PipelineError::from)?;
        let g = SolutionGradients {
            dx: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            dy: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ds: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let vjp = conic::vjp_solution_map(&p, &sol, &g).map_err(PipelineError::from)?;
        let dir: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe = |prob: &conic::ConicProblem| -> Result<f64, CliError> {
            let s = solve(prob, &oracle).map_err(PipelineError::from)?;
            Ok(g.dx.iter().zip(&s.x).map(|(a, b)| a * b).sum::<f64>()
                + g.dy.iter().zip(&s.y).map(|(a, b)| a * b).sum::<f64>()
                + g.ds.iter().zip(&s.s).map(|(a, b)| a * b).sum::<f64>())
        };
        let mut pp = p.clone();
        let mut pm = p.clone();
        for i in 0..m {
            pp.b[i] += h * dir[i];
            pm.b[i] -= h * dir[i];
        }
        let fd = (probe(&pp)? - probe(&pm)?) / (2.0 * h);
        let an: f64 = vjp.db.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut rel = (an - fd).abs() / fd.abs().max(an.abs()).max(1e-3);
        if force_fail {
            rel += 1.0;
        }
        let ok = rel <= 1e-4;
        if !ok {
            failures += 1;
        }
        println!(
            "{:<28} {:>12.3e} {:>8}",
            format!("vjp b-direction case {case}"),
            rel,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    // one full-chain check on the toy feeder
    let checks = crate::toy::full_chain_fd_checks(seed, 1, 1e-4, 1e-10).map_err(CliError::from)?;
    for chk in checks {
        let ok = chk.rel_err <= 1e-3;
        if !ok {
            failures += 1;
        }
        println!(
            "{:<28} {:>12.3e} {:>8}",
            format!("full-chain draw {}", chk.draw),
            chk.rel_err,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failures > 0 {
        return Err(CliError::check_failure(format!(
            "{failures} derivative check(s) failed"
        )));
    }
    Ok(())
}

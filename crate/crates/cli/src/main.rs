use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fracwalk::gauge::{check_conditions, recover_interaction, solve_gauge};
use fracwalk::graph::{all_pairs_distances, check_admissibility, random_admissible_graph};
use fracwalk::io::{
    canonical_to_value, empirical_to_value, matrix_to_value, observation_data_to_value, parse_graph,
    read_matrix, read_observation_data, reconstruction_to_value, report_to_value, resolve_seed,
    to_json, write_graph, ExperimentConfig,
};
use fracwalk::matrix::Matrix;
use fracwalk::reconstruct::{kernel_from_interaction, ratio_spread, reconstruct_full, KernelMatrix};
use fracwalk::recovery::{
    recover_canonical_with_diagnostics, recovered_vertex_count, verify_redundancy, RankDiagnostics,
};
use fracwalk::simulate::{estimate_observation_data, simulate_observations};
use fracwalk::walk::{build_interaction, exact_observation_data, normalize};
use fracwalk::{Conductivity, Error, Graph};

/// Maximum absolute entry allowed between the recovered transition matrix
/// and the truth once the gauge is undone.
const GAUGE_TOL: f64 = 1e-8;
const SPREAD_TOL: f64 = 1e-8;
const CONDITION_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "fracwalk", version, about = "Fractional-conductivity random walks: forward model and reconstruction")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Distance exponent of the kernel
    #[arg(long, global = true, default_value_t = 2.5)]
    alpha: f64,
    /// Weight of the diagonal term theta·gamma(x)
    #[arg(long, global = true, default_value_t = 1.0)]
    theta: f64,
    /// Random seed (falls back to FRACWALK_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trajectory length for `simulate`
    #[arg(long, global = true, default_value_t = 1_000_000)]
    steps: usize,
    /// Number of powers K in the observation data
    #[arg(long, global = true, default_value_t = 3)]
    horizon: usize,
    #[arg(long, global = true, default_value_t = fracwalk::DEFAULT_RANK_TOL)]
    rank_tol: f64,
    #[arg(long, global = true, default_value_t = fracwalk::DEFAULT_INT_TOL)]
    int_tol: f64,
    /// Write artifacts into this directory instead of printing to stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Random admissible graph
    Generate {
        /// Number of hidden vertices
        #[arg(long, default_value_t = 2)]
        hidden: usize,
    },
    /// Transition matrix and exact observation data of a graph
    Forward {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Simulated observation stream and its empirical observation data
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = fracwalk::simulate::DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
    /// Canonical representative from observation data
    Recover {
        #[arg(long)]
        data: PathBuf,
    },
    /// Distances, edges and conductivity from a matrix
    Reconstruct {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = MatrixKind::Interaction)]
        kind: MatrixKind,
    },
    /// Conditions (P1)-(P3) of a matrix and admissibility of a graph
    Verify {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Forward model, recovery and reconstruction compared with the truth
    Roundtrip {
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Interaction,
    Kernel,
    Transition,
}

/// Named outputs, written only after the whole command succeeded.
struct Artifacts(Vec<(&'static str, String)>);

impl Artifacts {
    fn json(name: &'static str, v: &Value) -> Self {
        Artifacts(vec![(name, to_json(v))])
    }

    fn emit(self, out: Option<&Path>) -> anyhow::Result<()> {
        match out {
            None => {
                for (_, text) in self.0.iter().filter(|(n, _)| n.ends_with(".json")) {
                    print!("{text}");
                }
            }
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for (name, text) in &self.0 {
                    let path = dir.join(name);
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                }
            }
        }
        Ok(())
    }
}

fn config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        alpha: c.alpha,
        theta: c.theta,
        rank_tol: c.rank_tol,
        int_tol: c.int_tol,
        seed: resolve_seed(c.seed)?.unwrap_or(0),
        steps: c.steps,
        horizon: c.horizon,
        burn_in: fracwalk::simulate::DEFAULT_BURN_IN,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_graph(path: &Path) -> anyhow::Result<(Graph, Conductivity)> {
    let (g, gamma) = parse_graph(path)?;
    let gamma = gamma.unwrap_or_else(|| Conductivity::uniform(g.n()));
    Ok((g, gamma))
}

fn diagnostics_to_value(d: &RankDiagnostics) -> Value {
    json!({
        "singular_values": d.singular_values,
        "rank": d.rank,
        "cutoff": d.cutoff,
        "gap_ratio": d.gap_ratio,
        "small_gap": d.small_gap(),
        "noise_floor": d.noise_floor,
        "noise_rank": d.noise_rank,
    })
}

fn run(cli: Cli) -> anyhow::Result<Artifacts> {
    let cfg = config(&cli.common)?;
    match cli.command {
        Command::Generate { hidden } => {
            let g = random_admissible_graph(hidden, cfg.alpha, cfg.seed)?;
            Ok(Artifacts(vec![("graph.json", write_graph(&g, None))]))
        }
        Command::Forward { graph } => {
            let (g, gamma) = load_graph(&graph)?;
            let t = normalize(&build_interaction(&g, &gamma, cfg.alpha, cfg.theta)?)?;
            let data = exact_observation_data(&t.p, g.observable_count(), cfg.horizon)?;
            let mut v = observation_data_to_value(&data);
            v["P"] = matrix_to_value(&t.p);
            v["alpha"] = json!(cfg.alpha);
            v["theta"] = json!(cfg.theta);
            Ok(Artifacts::json("forward.json", &v))
        }
        Command::Simulate { graph, burn_in, start } => {
            let (g, gamma) = load_graph(&graph)?;
            let t = normalize(&build_interaction(&g, &gamma, cfg.alpha, cfg.theta)?)?;
            let stream = simulate_observations(&t.p, g.observable_count(), start, cfg.steps, burn_in, cfg.seed)?;
            let emp = estimate_observation_data(&stream, cfg.horizon)?;
            let mut v = empirical_to_value(&emp);
            v["seed"] = json!(cfg.seed);
            v["steps"] = json!(cfg.steps);
            Ok(Artifacts(vec![
                ("empirical.json", to_json(&v)),
                ("stream.txt", stream.to_text()),
            ]))
        }
        Command::Recover { data } => {
            cfg.validate_for_recovery()?;
            let data = read_observation_data(&data)?;
            let (rep, diag) = recover_canonical_with_diagnostics(&data, cfg.rank_tol)?;
            let count = recovered_vertex_count(&rep);
            let mut v = canonical_to_value(&rep);
            v["vertex_count"] = json!(count.count);
            v["lower_bound"] = json!(count.lower_bound);
            v["diagnostics"] = diagnostics_to_value(&diag);
            Ok(Artifacts::json("canonical.json", &v))
        }
        Command::Reconstruct { matrix, kind } => {
            let key = match kind {
                MatrixKind::Transition => "P",
                _ => "matrix",
            };
            let m = read_matrix(&matrix, key)?;
            let fm = kernel_of(&m, kind, &cfg)?;
            let res = reconstruct_full(&fm, cfg.int_tol)?;
            let mut v = reconstruction_to_value(&res);
            v["conductivity"] = json!(res.conductivity(cfg.alpha));
            Ok(Artifacts::json("reconstruction.json", &v))
        }
        Command::Verify { graph, matrix } => {
            if graph.is_none() && matrix.is_none() {
                bail!(Error::InvalidParameter("verify needs --graph and/or --matrix".into()));
            }
            let mut v = json!({});
            if let Some(path) = matrix {
                let m = read_matrix(&path, "P")?;
                if !m.is_square() {
                    bail!(Error::DimensionMismatch(format!("matrix {:?} is not square", m.shape())));
                }
                v["conditions"] = report_to_value(&check_conditions(&m, false, CONDITION_TOL));
            }
            if let Some(path) = graph {
                let (g, _) = load_graph(&path)?;
                let report = check_admissibility(&g, cfg.alpha, cfg.rank_tol)?;
                v["admissibility"] = report_to_value(&report);
                v["admissible"] = json!(report.admissible());
            }
            Ok(Artifacts::json("verify.json", &v))
        }
        Command::Roundtrip { graph } => {
            cfg.validate_for_recovery()?;
            let (g, gamma) = load_graph(&graph)?;
            roundtrip(&g, &gamma, &cfg).map(|v| Artifacts::json("roundtrip.json", &v))
        }
    }
}

fn kernel_of(m: &Matrix, kind: MatrixKind, cfg: &ExperimentConfig) -> anyhow::Result<KernelMatrix> {
    let ones = vec![1.0; m.nrows()];
    Ok(match kind {
        MatrixKind::Kernel => KernelMatrix::new(m.clone())?,
        MatrixKind::Interaction => kernel_from_interaction(m, cfg.alpha, &ones, &ones)?,
        MatrixKind::Transition => {
            let rec = recover_interaction(m, 1e-8)?;
            kernel_from_interaction(&rec.c, cfg.alpha, &ones, &ones)?
        }
    })
}

fn roundtrip(g: &Graph, gamma: &Conductivity, cfg: &ExperimentConfig) -> anyhow::Result<Value> {
    let n_obs = g.observable_count();
    let t = normalize(&build_interaction(g, gamma, cfg.alpha, cfg.theta)?)?;
    let data = exact_observation_data(&t.p, n_obs, cfg.horizon)?;
    let (rep, diag) = recover_canonical_with_diagnostics(&data, cfg.rank_tol)?;
    let count = recovered_vertex_count(&rep);
    let redundancy = verify_redundancy(&t.p, &rep.q, n_obs, 10)?;
    if rep.size() != g.n() {
        bail!(Error::RankDeficient {
            rank: rep.rank,
            expected: g.hidden_count(),
        });
    }
    // Any representative with (P1)-(P3) reconstructs the same graph; the
    // truth is used only to choose one from the gauge orbit.
    let a = solve_gauge(&rep.q, &t.p, n_obs, GAUGE_TOL)?;
    let back = fracwalk::gauge::gauge_action(&a.inverted(), &rep.q, n_obs)?;
    let gauge_residual = fracwalk::matrix::max_abs_diff(&back, &t.p);
    let rec = recover_interaction(&back, 1e-8)?;
    let ones = vec![1.0; g.n()];
    let fm = kernel_from_interaction(&rec.c, cfg.alpha, &ones, &ones)?;
    let res = reconstruct_full(&fm, cfg.int_tol)?;

    let truth: Vec<(usize, usize)> = g.edges().collect();
    let missing: Vec<_> = truth.iter().filter(|e| !res.edges.contains(e)).collect();
    let extra: Vec<_> = res.edges.iter().filter(|e| !truth.contains(e)).collect();
    let ratios: Vec<f64> = res
        .conductivity(cfg.alpha)
        .iter()
        .zip(gamma.values())
        .map(|(a, b)| a / b)
        .collect();
    let spread = ratio_spread(&ratios);
    let distances_exact = res.distances == all_pairs_distances(g)?;
    let report = json!({
        "n": g.n(),
        "observable": n_obs,
        "rank": rep.rank,
        "vertex_count": count.count,
        "lower_bound": count.lower_bound,
        "rank_diagnostics": diagnostics_to_value(&diag),
        "redundancy_residual": redundancy,
        "gauge_residual": gauge_residual,
        "edges_exact": missing.is_empty() && extra.is_empty(),
        "missing_edges": missing,
        "extra_edges": extra,
        "distances_exact": distances_exact,
        "gamma_ratio_spread": spread,
        "reconstruction": reconstruction_to_value(&res),
    });
    if !missing.is_empty() || !extra.is_empty() || !distances_exact {
        bail!(Error::MetricViolation(format!(
            "reconstructed graph differs from the input: missing {missing:?}, extra {extra:?}"
        )));
    }
    if spread.is_nan() || spread > SPREAD_TOL {
        bail!(Error::RankDefect(spread));
    }
    Ok(report)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    match run(cli).and_then(|a| a.emit(out.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

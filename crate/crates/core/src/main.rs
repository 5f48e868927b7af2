use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coregmm::geom::DEFAULT_EIGEN_FLOOR;
use coregmm::gmm::{neg_log_likelihood, phi_cost, GmmModel, PhiConfig};
use coregmm::pipeline::{
    em_fit_weighted, kgmm_coreset, read_points_csv, run_experiment, synthesize, write_points_csv, EmConfig,
    ExperimentConfig, KgmmConfig, KgmmReducer, SchemeChoice, SynthConfig,
};
use coregmm::streaming::{HalvingFunction, StreamConfig, StreamState};
use coregmm::{Result, WeightedPointSet};

#[derive(Parser)]
#[command(name = "coregmm", version, about = "Coresets for Gaussian mixture models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Projective,
    Kcenter,
}

#[derive(Subcommand)]
enum Command {
    /// Build a weighted coreset from a CSV of points.
    Coreset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Fixed coreset size; derived from the sensitivities when omitted.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        xi: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Kcenter)]
        scheme: SchemeArg,
        /// Inputs longer than this go through the merge-reduce stream in chunks of this size.
        #[arg(long)]
        stream_chunk: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Weighted EM on a CSV of points; prints the model as JSON.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Likelihood of a data set under a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        xi: f64,
    },
    /// Size-versus-error comparison driven by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample points from a random ground-truth mixture.
    Synth {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Also write the ground-truth model here.
        #[arg(long)]
        model_output: Option<PathBuf>,
    },
}

fn stream_coreset(data: &WeightedPointSet, chunk: usize, reducer: &KgmmReducer, cfg: &KgmmConfig) -> Result<WeightedPointSet> {
    let mut scfg = StreamConfig::new(cfg.epsilon, cfg.delta, HalvingFunction::Constant { size: chunk })?;
    scfg.seed = cfg.seed;
    let mut state = StreamState::new(scfg)?;
    for (p, w) in data.iter() {
        state.insert_weighted(p, w, reducer)?;
    }
    state.query(reducer)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Coreset {
            input,
            k,
            size,
            epsilon,
            delta,
            xi,
            scheme,
            stream_chunk,
            seed,
            output,
        } => {
            PhiConfig::new(xi)?;
            let data = read_points_csv(&input)?;
            let scheme = match scheme {
                SchemeArg::Projective => SchemeChoice::Projective,
                SchemeArg::Kcenter => SchemeChoice::Kcenter,
            };
            let mut cfg = KgmmConfig::new(k, scheme);
            cfg.epsilon = epsilon;
            cfg.delta = delta;
            cfg.seed = seed;
            cfg.m_override = size;
            let set = match stream_chunk {
                Some(chunk) if data.len() > chunk => {
                    let reducer = KgmmReducer {
                        config: cfg.clone(),
                        m: size.unwrap_or(chunk).min(chunk),
                    };
                    stream_coreset(&data, chunk, &reducer, &cfg)?
                }
                _ => kgmm_coreset(&data, &cfg)?.set,
            };
            write_points_csv(&output, &set)?;
            eprintln!(
                "coreset: {} of {} points, weight {} (input {})",
                set.len(),
                data.len(),
                set.total_weight(),
                data.total_weight()
            );
        }
        Command::Fit {
            input,
            k,
            restarts,
            iters,
            tol,
            seed,
            output,
        } => {
            let data = read_points_csv(&input)?;
            let mut cfg = EmConfig::new(k);
            cfg.restarts = restarts;
            cfg.max_iters = iters;
            cfg.tol = tol;
            cfg.seed = seed;
            let fit = em_fit_weighted(&data, &cfg)?;
            eprintln!("fit: nll {} after {} iterations", fit.nll, fit.iterations);
            match output {
                Some(path) => fit.model.save(&path)?,
                None => println!("{}", serde_json::to_string_pretty(&fit.model.to_json())?),
            }
        }
        Command::Eval { model, data, xi } => {
            let theta = GmmModel::load(&model, DEFAULT_EIGEN_FLOOR)?;
            let data = read_points_csv(&data)?;
            let nll = neg_log_likelihood(&data, &theta)?;
            let phi = phi_cost(&data, &theta, &PhiConfig::new(xi)?)?;
            let out = serde_json::json!({
                "points": data.len(),
                "total_weight": data.total_weight(),
                "nll": nll,
                "mean_nll": nll / data.total_weight(),
                "phi": phi,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Experiment { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)?;
            let report = run_experiment(&cfg)?;
            println!("l_org {:.6}  l_trg {:.6}  l_opt {:.6}", report.l_org, report.l_trg, report.l_opt);
            println!("{:<14} {:>6} {:>4} {:>12} {:>12} {:>12}", "scheme", "size", "ok", "median", "q1", "q3");
            for r in &report.summary {
                println!(
                    "{:<14} {:>6} {:>4} {:>12.5} {:>12.5} {:>12.5}",
                    r.scheme.label(),
                    r.size,
                    r.succeeded,
                    r.median_error,
                    r.q1_error,
                    r.q3_error
                );
            }
        }
        Command::Synth {
            k,
            d,
            n,
            seed,
            output,
            model_output,
        } => {
            let s = synthesize(&SynthConfig::new(k, d, n, seed))?;
            write_points_csv(&output, &s.data)?;
            if let Some(path) = model_output {
                s.model.save(&path)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("COREGMM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

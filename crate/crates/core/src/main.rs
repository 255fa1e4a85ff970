use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vvsym::autograph::SearchConfig;
use vvsym::cli::{self, ExperimentSpec, SymmetryKind, Truth};
use vvsym::domains::{gen_curriculum, gen_ring, CurriculumSpec, RingSpec};
use vvsym::model::{write_model, ExactOptions, HardMode, DEFAULT_HARD_WEIGHT};
use vvsym::permgroup::DEFAULT_ORBIT_CAP;
use vvsym::samplers::{Algorithm, ChainConfig, OrbitStrategy};
use vvsym::Result;

#[derive(Parser)]
#[command(
    name = "vvsym",
    version,
    about = "Variable-value symmetries and orbital MCMC for discrete graphical models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a symmetry group and print generators and taxonomy labels.
    Symmetries {
        model: PathBuf,
        /// variable | vv | nec
        #[arg(long, default_value = "vv")]
        kind: SymmetryKind,
        /// Print the searched colored graph instead.
        #[arg(long)]
        dump_graph: bool,
        #[arg(long)]
        node_budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a model by its value-swap classes.
    Reduce {
        model: PathBuf,
        /// Reduced model path; classes go to `<out>.classes`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one chain and write its snapshot CSV.
    Sample {
        model: PathBuf,
        #[arg(long, default_value = "gibbs")]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        snapshot_every: Option<u64>,
        #[arg(long, default_value = "exact-bfs")]
        orbit_strategy: OrbitStrategy,
        /// Largest state orbit enumerated by the exact strategy.
        #[arg(long, default_value_t = DEFAULT_ORBIT_CAP)]
        orbit_cap: usize,
        #[arg(long, default_value_t = DEFAULT_HARD_WEIGHT)]
        hard_weight: f64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        /// Write 0 in the wall_ms column.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several algorithms over several seeds and write KL curves.
    Run {
        model: PathBuf,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', default_value = "gibbs,orbital,vv-orbital,nec-orbital")]
        algorithms: Vec<Algorithm>,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Single seed, overriding --seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        snapshot_every: Option<u64>,
        /// exact | long-gibbs:<steps>
        #[arg(long, default_value = "exact")]
        truth: Truth,
        #[arg(long, default_value = "exact-bfs")]
        orbit_strategy: OrbitStrategy,
        /// Largest state orbit enumerated by the exact strategy.
        #[arg(long, default_value_t = DEFAULT_ORBIT_CAP)]
        orbit_cap: usize,
        #[arg(long, default_value_t = DEFAULT_HARD_WEIGHT)]
        hard_weight: f64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long)]
        no_timing: bool,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Exact marginals by enumeration.
    Exact {
        model: PathBuf,
        /// Score hard features with this finite weight instead of excluding violations.
        #[arg(long)]
        hard_weight: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark model.
    Gen {
        #[command(subcommand)]
        domain: Domain,
    },
    /// Rewrite a model with one Boolean per value and exactly-one constraints.
    Binarize {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Domain {
    /// Ring of implications X_i -> X_{i+1} with alternating weights.
    Ring {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = std::f64::consts::LN_2)]
        w1: f64,
        #[arg(long, default_value_t = 3f64.ln())]
        w2: f64,
        #[arg(long, default_value_t = 0.0)]
        rename_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Students satisfying a breadth requirement across course areas.
    Curriculum {
        #[arg(long, default_value_t = 2)]
        students: usize,
        /// Comma-separated course counts per area.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        areas: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print(text: &str, out: Option<&Path>) -> Result<()> {
    if let Some(t) = cli::emit(text, out)? {
        print!("{t}");
    }
    Ok(())
}

fn snapshot_default(steps: u64, given: Option<u64>) -> u64 {
    given.unwrap_or_else(|| (steps / 100).max(1))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Symmetries {
            model,
            kind,
            dump_graph,
            node_budget,
            out,
        } => {
            let m = cli::read_model(&model)?;
            let mut cfg = SearchConfig::default();
            if let Some(b) = node_budget {
                cfg.node_budget = b;
            }
            let text = if dump_graph {
                cli::cmd_dump_graph(&m, kind)?
            } else {
                cli::cmd_symmetries(&m, kind, cfg)?
            };
            print(&text, out.as_deref())
        }
        Command::Reduce { model, out } => {
            let m = cli::read_model(&model)?;
            let (reduced, classes) = cli::cmd_reduce(&m, SearchConfig::default())?;
            match out {
                Some(p) => {
                    std::fs::write(&p, reduced)?;
                    let mut sidecar = p.into_os_string();
                    sidecar.push(".classes");
                    std::fs::write(sidecar, classes)?;
                }
                None => {
                    print!("{reduced}");
                    for line in classes.lines() {
                        println!("# {line}");
                    }
                }
            }
            Ok(())
        }
        Command::Sample {
            model,
            algorithm,
            steps,
            seed,
            snapshot_every,
            orbit_strategy,
            orbit_cap,
            hard_weight,
            burn_in,
            no_timing,
            out,
        } => {
            let m = cli::read_model(&model)?;
            let mut cfg = ChainConfig::new(algorithm, steps, seed);
            cfg.snapshot_every = snapshot_default(steps, snapshot_every);
            cfg.orbit_strategy = orbit_strategy;
            cfg.orbit_cap = orbit_cap;
            cfg.hard_weight = hard_weight;
            cfg.burn_in = burn_in;
            cfg.timing = !no_timing;
            let csv = cli::cmd_sample(&m, &cfg, SearchConfig::default())?;
            print(&csv, out.as_deref())
        }
        Command::Run {
            model,
            algorithms,
            steps,
            seeds,
            seed,
            snapshot_every,
            truth,
            orbit_strategy,
            orbit_cap,
            hard_weight,
            burn_in,
            no_timing,
            out,
        } => {
            let m = cli::read_model(&model)?;
            let seeds = seed.map(|s| vec![s]).unwrap_or(seeds);
            let mut spec = ExperimentSpec::new(algorithms, steps, seeds);
            spec.snapshot_every = snapshot_default(steps, snapshot_every);
            spec.truth = truth;
            spec.orbit_strategy = orbit_strategy;
            spec.orbit_cap = orbit_cap;
            spec.hard_weight = hard_weight;
            spec.burn_in = burn_in;
            spec.timing = !no_timing;
            spec.out_dir = Some(out.clone());
            let report = cli::cmd_run(&m, &spec, SearchConfig::default())?;
            for (a, ms) in &report.symmetry_ms {
                eprintln!("{a}: symmetry time {} ms", cli::fmt_g(*ms));
            }
            eprintln!("wrote {}", out.join("kl.csv").display());
            Ok(())
        }
        Command::Exact {
            model,
            hard_weight,
            out,
        } => {
            let m = cli::read_model(&model)?;
            let mut opts = ExactOptions::default();
            if let Some(h) = hard_weight {
                opts.hard = HardMode::Soft(h);
            }
            print(&cli::cmd_exact(&m, opts)?, out.as_deref())
        }
        Command::Gen { domain } => match domain {
            Domain::Ring {
                n,
                w1,
                w2,
                rename_prob,
                seed,
                out,
            } => {
                let m = gen_ring(&RingSpec {
                    n_people: n,
                    w_male: w1,
                    w_female: w2,
                    rename_prob,
                    seed,
                })?;
                print(&write_model(&m), out.as_deref())
            }
            Domain::Curriculum {
                students,
                areas,
                seed,
                out,
            } => {
                let m = gen_curriculum(&CurriculumSpec::new(students, areas, seed))?;
                print(&write_model(&m), out.as_deref())
            }
        },
        Command::Binarize { model, out } => {
            let m = cli::read_model(&model)?;
            print(&cli::cmd_binarize(&m), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command line front end: tree enumeration, single-map queries and the
//! symbolic / numeric identity suites with machine-readable reports.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_rational::BigRational;

use dectree::config::{Config, NoiseChoice};
use dectree::error::TreeError;
use dectree::hopf::{coaction, d_xi, delta_hat0};
use dectree::params::DegreeKind;
use dectree::plus::TensorElem;
use dectree::rules::enumerate_t0;
use dectree::suite::{run_numeric_suite, run_symbolic_suite, Report};
use dectree::tree::{comb_string, parse_tree, rational_string};

#[derive(Parser)]
#[command(name = "dectree", about = "Decorated-tree identity checker", version)]
struct Cli {
    /// Key=value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Rule set: qua, qua_c, gkpz, phi43.
    #[arg(long, global = true)]
    rule: Option<String>,
    /// Preparation map preset: trivial, qua_c, adversarial.
    #[arg(long, global = true)]
    prep: Option<String>,
    /// Noise degree as a rational P/Q.
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    max_noises: Option<u64>,
    #[arg(long, global = true)]
    max_edges: Option<u64>,
    /// Grid sizes, time first, e.g. 48x32.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Relative tolerance for numeric identities.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for random noise; omitted means deterministic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the structured report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Worker thread count; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the trees generated by the rule set within the bounds.
    Enumerate,
    /// Print the coaction of a tree.
    Coact {
        /// Truncation degree: 0 or 1.
        #[arg(long, default_value_t = 0)]
        which: u8,
        #[arg(long)]
        tree: String,
    },
    /// Print the deformed coaction of a tree.
    DeltaHat {
        #[arg(long)]
        tree: String,
    },
    /// Print the noise derivative of a tree.
    Dxi {
        #[arg(long)]
        tree: String,
    },
    /// Apply the preparation map to a tree.
    ApplyR {
        #[arg(long)]
        tree: String,
    },
    /// Run the exact identity suite and print a summary.
    Symbolic,
    /// Run the grid identity suite and print a summary.
    Numeric,
}

fn main() {
    let cli = Cli::parse();
    let code = match try_run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}

fn build_config(cli: &Cli) -> Result<Config, TreeError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| TreeError::Config(format!("{}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    if let Some(v) = &cli.rule {
        cfg.set("rule", v)?;
    }
    if let Some(v) = &cli.prep {
        cfg.set("prep", v)?;
    }
    if let Some(v) = &cli.alpha {
        cfg.set("alpha", v)?;
    }
    if let Some(v) = cli.max_noises {
        cfg.max_noises = v;
    }
    if let Some(v) = cli.max_edges {
        cfg.max_edges = v;
    }
    if let Some(v) = &cli.grid {
        cfg.set("grid", v)?;
    }
    if let Some(v) = cli.tol {
        cfg.tol_rel = v;
    }
    if let Some(v) = cli.seed {
        cfg.noise = NoiseChoice::Seeded(v);
    }
    Ok(cfg)
}

/// Render a coaction-style tensor: leading (largest left tree) term first,
/// unit coefficients omitted.
fn render_tensor(t: &TensorElem) -> String {
    if t.is_zero() {
        return "0".to_string();
    }
    let one = BigRational::from_integer(1.into());
    let mut terms: Vec<(u64, String)> = t
        .iter()
        .map(|((tt, m), c)| {
            let body = format!("{tt} (x) {m}");
            let s = if c == &one {
                body
            } else {
                format!("{}*{}", rational_string(c), body)
            };
            (tt.size(), s)
        })
        .collect();
    terms.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    terms
        .into_iter()
        .map(|(_, s)| s)
        .collect::<Vec<_>>()
        .join(" + ")
}

fn emit_report(report: &Report, path: &Option<PathBuf>) -> Result<i32, TreeError> {
    print!("{}", report.summary());
    if let Some(path) = path {
        let mut f = std::fs::File::create(path)
            .map_err(|e| TreeError::Config(format!("{}: {e}", path.display())))?;
        f.write_all(report.to_json().as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| TreeError::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn try_run(cli: Cli) -> Result<i32, TreeError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| TreeError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = build_config(&cli)?;
    let params = cfg.params()?;
    match &cli.cmd {
        Cmd::Enumerate => {
            let rules = cfg.rules();
            let trees = enumerate_t0(&rules, cfg.max_noises, cfg.max_edges, cfg.cap)?;
            for t in &trees {
                println!("{t}");
            }
            Ok(0)
        }
        Cmd::Coact { which, tree } => {
            if *which > 1 {
                return Err(TreeError::Config("--which must be 0 or 1".into()));
            }
            let t = parse_tree(tree, params.d)?;
            let co = coaction(DegreeKind::from_index(*which), &t, &params);
            println!("{}", render_tensor(&co));
            Ok(0)
        }
        Cmd::DeltaHat { tree } => {
            let t = parse_tree(tree, params.d)?;
            println!("{}", render_tensor(&delta_hat0(&t, &params)));
            Ok(0)
        }
        Cmd::Dxi { tree } => {
            let t = parse_tree(tree, params.d)?;
            println!("{}", comb_string(&d_xi(&t)));
            Ok(0)
        }
        Cmd::ApplyR { tree } => {
            let prep = cfg.prep_map()?;
            let t = parse_tree(tree, params.d)?;
            println!("{}", comb_string(&prep.apply(&t)?));
            Ok(0)
        }
        Cmd::Symbolic => {
            let report = run_symbolic_suite(
                &cfg.rules(),
                &cfg.prep_map()?,
                &params,
                &cfg.symbolic_options(),
            )?;
            emit_report(&report, &cli.report)
        }
        Cmd::Numeric => {
            let report = run_numeric_suite(
                &cfg.rules(),
                &cfg.prep_map()?,
                &params,
                &cfg.numeric_options(params.d),
            )?;
            emit_report(&report, &cli.report)
        }
    }
}

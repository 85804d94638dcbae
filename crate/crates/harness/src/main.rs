use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ceitr_core::dgp::{assemble_cohort, EffectModification, HteMode};
use ceitr_core::error::{Error, Result};
use ceitr_core::io::{read_cohort, write_cohort, write_potentials};
use ceitr_core::{Cohort, PartitionGrid};
use ceitr_harness::analysis::{self, AnalysisSettings};
use ceitr_harness::boundary::{column_means, export_boundary_grid, write_boundary_csv};
use ceitr_harness::pipeline::{fit_cohort_nuisance, method_weights};
use ceitr_harness::scenario::{run_benchmark, scenario_grid, write_results_csv, RunSettings};
use ceitr_harness::{train_rule, Config, LearnerSettings, MethodSpec};
use ceitr_learners::{predict_rule, rule_from_json, rule_to_json};

#[derive(Parser)]
#[command(name = "ceitr", version, about = "Cost-effective individualized treatment rules")]
struct Cli {
    /// TOML file with [ce], [dgp], [nuisance], [tree], [forest] and [harness] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CeArgs {
    /// Willingness to pay per life-year.
    #[arg(long)]
    lambda: Option<f64>,
    /// Restriction horizon in years.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    discount_rate: Option<f64>,
    /// Equal-width cost intervals on (0, tau].
    #[arg(long)]
    intervals: Option<usize>,
    /// Drop (true) or keep (false) the treatment-by-X1 outcome interaction.
    #[arg(long)]
    misspecified: Option<bool>,
}

#[derive(Args, Default)]
struct LearnerArgs {
    #[arg(long)]
    trees: Option<usize>,
    /// Fixed forest mtry; unset selects it by cross-validation.
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    mtry_folds: Option<usize>,
    #[arg(long)]
    mincriterion: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic cohort and its potential outcomes.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        potentials: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        em_mode: Option<String>,
        #[arg(long)]
        hte_mode: Option<String>,
        #[arg(long)]
        censor_rate: Option<f64>,
        /// Randomize treatment with this probability.
        #[arg(long)]
        randomized: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        ce: CeArgs,
    },
    /// NMB classification weights of a cohort.
    Weights {
        #[arg(long)]
        cohort: PathBuf,
        /// reg, aipw-np, ipw-p or aipw-p.
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ce: CeArgs,
    },
    /// Train a rule on a cohort and save it as JSON.
    Fit {
        #[arg(long)]
        cohort: PathBuf,
        /// One of Reg-naive, DT-AIPW-NP, DT-IPW-P, DT-AIPW-P, CRF-AIPW-NP, CRF-IPW-P, CRF-AIPW-P.
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        ce: CeArgs,
        #[command(flatten)]
        learners: LearnerArgs,
    },
    /// Apply a saved rule to a cohort.
    Predict {
        #[arg(long)]
        rule: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ce: CeArgs,
    },
    /// Monte Carlo benchmark over the scenario grid.
    Benchmark {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        em_modes: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        hte_modes: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        wtp: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        censor_rates: Option<Vec<f64>>,
        #[command(flatten)]
        ce: CeArgs,
        #[command(flatten)]
        learners: LearnerArgs,
    },
    /// Rule labels over an (x1, x2) lattice.
    Boundary {
        #[arg(long)]
        rule: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cohort whose covariate means fix the other coordinates (zeros otherwise).
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', num_args = 2)]
        x1_range: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 2)]
        x2_range: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        ce: CeArgs,
    },
    /// Cross-validated rule, value estimates, bootstrap intervals and importance.
    Analyze {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        method: String,
        /// Report CSV.
        #[arg(long)]
        out: PathBuf,
        /// Text summary (stdout when omitted).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Out-of-fold labels per subject.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Resample the evaluation of the fixed cross-validated rule only.
        #[arg(long)]
        fast_bootstrap: bool,
        #[arg(long)]
        no_importance: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        ce: CeArgs,
        #[command(flatten)]
        learners: LearnerArgs,
    },
    /// Conditional permutation importance of a forest fit to a method's weights.
    Importance {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        ce: CeArgs,
        #[command(flatten)]
        learners: LearnerArgs,
    },
}

fn apply_ce(cfg: &mut Config, a: &CeArgs) {
    if let Some(v) = a.lambda {
        cfg.ce.lambda = v;
    }
    if let Some(v) = a.tau {
        cfg.ce.tau = v;
    }
    if let Some(v) = a.discount_rate {
        cfg.ce.discount_rate = v;
    }
    if let Some(v) = a.intervals {
        cfg.dgp.intervals = v;
    }
    if let Some(v) = a.misspecified {
        cfg.nuisance.misspecified = v;
    }
}

/// Forest settings; outside the benchmark the forest size defaults to `analysis_trees`.
fn learner_settings(cfg: &Config, a: &LearnerArgs, analysis: bool) -> LearnerSettings {
    let mut forest = cfg.forest.clone();
    if analysis {
        forest.n_trees = cfg.harness.analysis_trees;
    }
    if let Some(v) = a.trees {
        forest.n_trees = v;
    }
    if a.mtry.is_some() {
        forest.mtry = a.mtry;
    }
    if let Some(v) = a.mincriterion {
        forest.mincriterion = v;
    }
    LearnerSettings { tree: cfg.tree.clone(), forest, mtry_folds: a.mtry_folds.unwrap_or(cfg.harness.mtry_folds) }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads a cohort file; interval columns get a uniform grid with as many intervals.
fn load_cohort(path: &Path, cfg: &Config) -> Result<Cohort> {
    let mut header = String::new();
    BufReader::new(open(path)?).read_line(&mut header)?;
    let j = header.trim().split(',').filter(|c| c.trim().starts_with("m_")).count();
    let grid = if j > 0 { Some(PartitionGrid::uniform(cfg.ce.tau, j)?) } else { None };
    read_cohort(open(path)?, cfg.ce.tau, grid)
}

fn pair(v: &Option<Vec<f64>>, default: [f64; 2]) -> (f64, f64) {
    match v {
        Some(p) if p.len() == 2 => (p[0], p[1]),
        _ => (default[0], default[1]),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let default_seed = cfg.harness.seed.unwrap_or(1);
    match cli.command {
        Command::Simulate { out, potentials, n, em_mode, hte_mode, censor_rate, randomized, seed, ce } => {
            apply_ce(&mut cfg, &ce);
            if let Some(v) = n {
                cfg.dgp.n = v;
            }
            if let Some(v) = em_mode {
                cfg.dgp.em_mode = v;
            }
            if let Some(v) = hte_mode {
                cfg.dgp.hte_mode = v;
            }
            if let Some(v) = censor_rate {
                cfg.dgp.censor_rate = v;
            }
            if randomized.is_some() {
                cfg.dgp.randomized = randomized;
            }
            if let Some(v) = seed {
                cfg.dgp.seed = v;
            }
            let sim = assemble_cohort(&cfg.scenario()?, &cfg.ce()?, &cfg.grid()?)?;
            write_cohort(create(&out)?, &sim.cohort)?;
            if let Some(p) = potentials {
                let ids: Vec<u64> = sim.cohort.subjects.iter().map(|s| s.id).collect();
                write_potentials(create(&p)?, &ids, &sim.potentials)?;
            }
            log::info!("censoring fraction {:.3}", sim.cohort.censoring_fraction());
        }
        Command::Weights { cohort, method, out, ce } => {
            apply_ce(&mut cfg, &ce);
            let c = load_cohort(&cohort, &cfg)?;
            let wm = ceitr_core::WeightMethod::parse(&method)?;
            // any method with these weights shares the input checks
            let m = match wm {
                ceitr_core::WeightMethod::RegBased => MethodSpec::RegNaive,
                weight => MethodSpec::Learned { learner: ceitr_harness::Learner::Tree, weight },
            };
            let ce = cfg.ce()?;
            let nuisance = fit_cohort_nuisance(&c, &ce, &cfg.nuisance.spec())?;
            let w = method_weights(m, &c, &nuisance, &ce)?;
            let mut wr = csv::Writer::from_writer(create(&out)?);
            wr.write_record(["id", "delta_t", "delta_m", "w", "z", "abs_w"])?;
            for i in 0..w.len() {
                wr.write_record([
                    w.ids[i].to_string(),
                    w.delta_t[i].to_string(),
                    w.delta_m[i].to_string(),
                    w.w[i].to_string(),
                    w.z[i].to_string(),
                    w.abs_w[i].to_string(),
                ])?;
            }
            wr.flush()?;
        }
        Command::Fit { cohort, method, out, seed, ce, learners } => {
            apply_ce(&mut cfg, &ce);
            let c = load_cohort(&cohort, &cfg)?;
            let m = MethodSpec::parse(&method)?;
            let ls = learner_settings(&cfg, &learners, true);
            let rule = train_rule(m, &c, &cfg.ce()?, &cfg.nuisance.spec(), &ls, seed.unwrap_or(default_seed))?;
            let mut f = create(&out)?;
            f.write_all(rule_to_json(&rule)?.as_bytes())?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        Command::Predict { rule, cohort, out, ce } => {
            apply_ce(&mut cfg, &ce);
            let r = rule_from_json(&std::fs::read_to_string(&rule).map_err(|e| Error::Io(format!("{}: {e}", rule.display())))?)?;
            let c = load_cohort(&cohort, &cfg)?;
            let labels = predict_rule(&r, &c.covariates())?;
            let ids: Vec<u64> = c.subjects.iter().map(|s| s.id).collect();
            analysis::write_labels_csv(create(&out)?, &ids, &labels)?;
        }
        Command::Benchmark { seed, out, reps, n, methods, em_modes, hte_modes, wtp, censor_rates, ce, learners } => {
            apply_ce(&mut cfg, &ce);
            let h = &mut cfg.harness;
            if let Some(v) = reps {
                h.reps = v;
            }
            if let Some(v) = n {
                cfg.dgp.n = v;
            }
            if let Some(v) = methods {
                h.methods = v;
            }
            if let Some(v) = em_modes {
                h.em_modes = v;
            }
            if let Some(v) = hte_modes {
                h.hte_modes = v;
            }
            if let Some(v) = wtp {
                h.wtp = v;
            }
            if let Some(v) = censor_rates {
                h.censor_rates = v;
            }
            let em = cfg.harness.em_modes.iter().map(|s| EffectModification::parse(s)).collect::<Result<Vec<_>>>()?;
            let hte = cfg.harness.hte_modes.iter().map(|s| HteMode::parse(s)).collect::<Result<Vec<_>>>()?;
            let cells = scenario_grid(&em, &hte, &cfg.harness.wtp, &cfg.harness.censor_rates);
            let settings = RunSettings {
                n: cfg.dgp.n,
                reps: cfg.harness.reps,
                methods: MethodSpec::parse_list(&cfg.harness.methods)?,
                spec: cfg.nuisance.spec(),
                learners: learner_settings(&cfg, &learners, false),
                tau: cfg.ce.tau,
                discount_rate: cfg.ce.discount_rate,
                intervals: cfg.dgp.intervals,
                treatment: cfg.treatment(),
            };
            let results = run_benchmark(&cells, &settings, seed)?;
            write_results_csv(create(&out)?, &results)?;
            let secs: f64 = results.iter().map(|r| r.runtime_secs).sum();
            eprintln!("{} scenario cells, {:.1}s", results.len(), secs);
        }
        Command::Boundary { rule, out, cohort, x1_range, x2_range, resolution, ce } => {
            apply_ce(&mut cfg, &ce);
            let r = rule_from_json(&std::fs::read_to_string(&rule).map_err(|e| Error::Io(format!("{}: {e}", rule.display())))?)?;
            let fixed = match cohort {
                Some(p) => column_means(&load_cohort(&p, &cfg)?.covariates()),
                None => vec![0.0; r.n_features()],
            };
            let cells = export_boundary_grid(
                &r,
                pair(&x1_range, cfg.harness.x1_range),
                pair(&x2_range, cfg.harness.x2_range),
                resolution.unwrap_or(cfg.harness.resolution),
                &fixed,
            )?;
            write_boundary_csv(create(&out)?, &cells)?;
        }
        Command::Analyze {
            cohort,
            method,
            out,
            summary,
            labels,
            folds,
            bootstrap,
            fast_bootstrap,
            no_importance,
            seed,
            ce,
            learners,
        } => {
            apply_ce(&mut cfg, &ce);
            let c = load_cohort(&cohort, &cfg)?;
            let seed = seed.unwrap_or(default_seed);
            let settings = AnalysisSettings {
                method: MethodSpec::parse(&method)?,
                ce: cfg.ce()?,
                spec: cfg.nuisance.spec(),
                learners: learner_settings(&cfg, &learners, true),
                folds: folds.unwrap_or(cfg.harness.folds),
                bootstrap: bootstrap.unwrap_or(cfg.harness.bootstrap),
                fast_bootstrap: fast_bootstrap || cfg.harness.fast_bootstrap,
                seed,
                importance: (!no_importance).then(|| cfg.importance(seed)),
            };
            let report = analysis::analyze_external(&c, &settings)?;
            analysis::write_report_csv(create(&out)?, &report)?;
            if let Some(p) = labels {
                analysis::write_labels_csv(create(&p)?, &report.ids, &report.labels)?;
            }
            let text = analysis::summary_text(&report);
            match summary {
                Some(p) => {
                    let mut f = create(&p)?;
                    f.write_all(text.as_bytes())?;
                    f.flush()?;
                }
                None => print!("{text}"),
            }
        }
        Command::Importance { cohort, method, out, repeats, seed, ce, learners } => {
            apply_ce(&mut cfg, &ce);
            if let Some(v) = repeats {
                cfg.harness.importance_repeats = v;
            }
            let c = load_cohort(&cohort, &cfg)?;
            let imp = analysis::cohort_importance(
                &c,
                MethodSpec::parse(&method)?,
                &cfg.ce()?,
                &cfg.nuisance.spec(),
                &learner_settings(&cfg, &learners, true),
                &cfg.importance(seed.unwrap_or(default_seed)),
            )?;
            analysis::write_importance_csv(create(&out)?, &imp)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

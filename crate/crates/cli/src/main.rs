use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use metaprio_core::centrality::{mr_quality_score, ProgramAnalysis};
use metaprio_core::evaluate::{baseline_average, evaluate};
use metaprio_core::exec::{Runner, DEFAULT_STEP_LIMIT};
use metaprio_core::formats::{
    curve_csv, from_json, to_json, MrProfile, MutantDoc, MutantsDoc, OrderingFile, ProfilesDoc, ReportDoc,
    ScoreDoc, ScoresDoc,
};
use metaprio_core::minilang::{parse_labeled, parse_unchecked, Program};
use metaprio_core::mt::{run_mr_with, MrSpec, TestSuite};
use metaprio_core::mutation::{
    build_kill_matrix, generate_mutants_with, screen_mutants, AorMode, KillMatrix, MatrixRole, Mutant,
    MutantStatus, MutationOperator,
};
use metaprio_core::pipeline::pipeline;
use metaprio_core::prioritize::{
    centrality_order, coverage_order, fault_based_order, random_orders, CoverageUnit, Ordering,
};
use metaprio_core::rational::{from_f64, Rational};
use metaprio_core::report::comparison_table;

#[derive(Parser)]
#[command(name = "metaprio", version, about = "Prioritize metamorphic relations by statement centrality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build control-flow and dependence graphs for every function.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run relations over a source suite and record coverage.
    Run {
        file: PathBuf,
        #[arg(long)]
        mrs: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Score relations from an analysis and their coverage.
    Score {
        #[arg(long)]
        pdg: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Restrict scoring to the relations in this catalog.
        #[arg(long)]
        mrs: Option<PathBuf>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Generate first-order mutants.
    Mutate {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "AOR,ROR,LOR,CRP,SDL")]
        ops: Vec<MutationOperator>,
        #[arg(long)]
        full_aor: bool,
        /// Screen the mutants against this source suite.
        #[arg(long)]
        screen_with: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run every relation against every mutant that was not screened out.
    KillMatrix {
        file: PathBuf,
        #[arg(long)]
        mutants: PathBuf,
        #[arg(long)]
        mrs: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long, value_enum, default_value_t = RoleArg::Validation)]
        role: RoleArg,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Order relations.
    Prioritize {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        kill_matrix: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Measure an ordering (or the mean of several) against a kill matrix.
    Evaluate {
        #[arg(long)]
        ordering: PathBuf,
        #[arg(long)]
        kill_matrix: PathBuf,
        #[arg(long = "threshold", default_values_t = [5.0, 2.5])]
        thresholds: Vec<f64>,
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long)]
        emit_csv: Option<PathBuf>,
    },
    /// Run the whole experiment described by a configuration file.
    Pipeline {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Prioritizing,
    Validation,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Centrality,
    Fault,
    StmtCov,
    BranchCov,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn analysis(message: impl ToString) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }

    fn execution(message: impl ToString) -> Self {
        Failure {
            code: 4,
            message: message.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read(path)?).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_program(path: &Path) -> Result<Program> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "v0".into());
    parse_labeled(&read(path)?, &label).map_err(|e| Failure::analysis(format!("{}: {e}", path.display())))
}

fn load_mrs(path: &Path) -> Result<Vec<MrSpec>> {
    let mrs: Vec<MrSpec> = load(path)?;
    for mr in &mrs {
        mr.validate().map_err(|e| Failure::config(format!("{}: {e}", mr.id)))?;
    }
    Ok(mrs)
}

fn thresholds(values: &[f64]) -> Result<Vec<Rational>> {
    values
        .iter()
        .map(|&t| {
            from_f64(t)
                .filter(|_| t > 0.0)
                .ok_or_else(|| Failure::config(format!("bad threshold {t}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { file, emit: out } => {
            let p = load_program(&file)?;
            emit(out.as_deref(), &to_json(&ProgramAnalysis::of(&p)))
        }
        Command::Run {
            file,
            mrs,
            tests,
            step_limit,
            emit: out,
        } => {
            let p = load_program(&file)?;
            let mrs = load_mrs(&mrs)?;
            let suite: TestSuite = load(&tests)?;
            let mut runner = Runner::new(&p, step_limit);
            let runs = mrs
                .iter()
                .map(|mr| {
                    run_mr_with(&mut runner, mr, &suite)
                        .map(|r| MrProfile::from(&r))
                        .map_err(|e| Failure::execution(format!("{}: {e}", mr.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            let doc = ProfilesDoc {
                program_digest: p.source_digest.clone(),
                suite: suite.role,
                mrs: runs,
            };
            emit(out.as_deref(), &to_json(&doc))
        }
        Command::Score {
            pdg,
            profiles,
            mrs,
            emit: out,
        } => {
            let analysis: ProgramAnalysis = load(&pdg)?;
            let profiles: ProfilesDoc = load(&profiles)?;
            let keep: Option<BTreeSet<String>> = match mrs {
                Some(path) => Some(load_mrs(&path)?.into_iter().map(|m| m.id).collect()),
                None => None,
            };
            let scores = profiles
                .mrs
                .iter()
                .filter(|m| keep.as_ref().is_none_or(|k| k.contains(&m.mr)))
                .map(|m| {
                    mr_quality_score(&analysis, &m.mr, &m.coverage)
                        .map(|s| ScoreDoc::from(&s))
                        .map_err(Failure::analysis)
                })
                .collect::<Result<Vec<_>>>()?;
            let doc = ScoresDoc {
                program_digest: analysis.program_digest.clone(),
                scores,
            };
            emit(out.as_deref(), &to_json(&doc))
        }
        Command::Mutate {
            file,
            ops,
            full_aor,
            screen_with,
            step_limit,
            emit: out,
        } => {
            let p = load_program(&file)?;
            let aor = if full_aor { AorMode::Full } else { AorMode::Pairwise };
            let operators: BTreeSet<MutationOperator> = ops.into_iter().collect();
            let mut mutants = generate_mutants_with(&p, &operators, aor);
            if let Some(path) = screen_with {
                let suite: TestSuite = load(&path)?;
                let s = screen_mutants(mutants, &suite, step_limit);
                mutants = s.viable.into_iter().chain(s.screened_out).collect();
                mutants.sort_by(|a, b| a.id.cmp(&b.id));
            }
            let doc = MutantsDoc {
                program_digest: p.source_digest.clone(),
                operators: operators.into_iter().collect(),
                aor,
                mutants: mutants.iter().map(MutantDoc::from).collect(),
            };
            emit(out.as_deref(), &to_json(&doc))
        }
        Command::KillMatrix {
            file,
            mutants,
            mrs,
            tests,
            role,
            step_limit,
            emit: out,
        } => {
            let p = load_program(&file)?;
            let doc: MutantsDoc = load(&mutants)?;
            if doc.program_digest != p.source_digest {
                return Err(Failure::config(format!(
                    "{} was generated from a different program",
                    mutants.display()
                )));
            }
            let mrs = load_mrs(&mrs)?;
            let suite: TestSuite = load(&tests)?;
            let mutants = doc
                .mutants
                .iter()
                .filter(|m| m.status != MutantStatus::ScreenedOut)
                .map(|m| {
                    let program = parse_unchecked(&m.source, &m.id).map_err(|e| Failure::analysis(format!("{}: {e}", m.id)))?;
                    Ok(Mutant {
                        id: m.id.clone(),
                        operator: m.operator,
                        location: metaprio_core::mutation::MutationSite {
                            statement: m.statement,
                            path: m.path.clone(),
                        },
                        variant: 0,
                        description: m.description.clone(),
                        mutated_program: program,
                        status: m.status,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let role = match role {
                RoleArg::Prioritizing => MatrixRole::Prioritizing,
                RoleArg::Validation => MatrixRole::Validation,
            };
            let km = build_kill_matrix(&p, &mutants, &mrs, &suite, role, step_limit).map_err(Failure::execution)?;
            emit(out.as_deref(), &to_json(&km))
        }
        Command::Prioritize {
            strategy,
            scores,
            kill_matrix,
            profiles,
            seed,
            count,
            emit: out,
        } => {
            let need = |p: Option<PathBuf>, flag: &str| p.ok_or_else(|| Failure::config(format!("--{flag} is required")));
            let text = match strategy {
                StrategyArg::Centrality => {
                    let doc: ScoresDoc = load(&need(scores, "scores")?)?;
                    let scores = doc
                        .scores
                        .iter()
                        .map(|s| s.to_breakdown().map_err(Failure::config))
                        .collect::<Result<Vec<_>>>()?;
                    to_json(&centrality_order(&scores).map_err(Failure::config)?)
                }
                StrategyArg::Fault => {
                    let km: KillMatrix = load(&need(kill_matrix, "kill-matrix")?)?;
                    to_json(&fault_based_order(&km).map_err(Failure::config)?)
                }
                StrategyArg::StmtCov | StrategyArg::BranchCov => {
                    let doc: ProfilesDoc = load(&need(profiles, "profiles")?)?;
                    let unit = if matches!(strategy, StrategyArg::StmtCov) {
                        CoverageUnit::Statement
                    } else {
                        CoverageUnit::Branch
                    };
                    let cov: Vec<_> = doc.mrs.into_iter().map(|m| (m.mr, m.coverage)).collect();
                    to_json(&coverage_order(&cov, unit, seed).map_err(Failure::config)?)
                }
                StrategyArg::Random => {
                    let ids: Vec<String> = if let Some(path) = profiles {
                        load::<ProfilesDoc>(&path)?.mrs.into_iter().map(|m| m.mr).collect()
                    } else if let Some(path) = kill_matrix {
                        load::<KillMatrix>(&path)?.mrs
                    } else {
                        return Err(Failure::config("--profiles or --kill-matrix is required"));
                    };
                    if count == 0 {
                        return Err(Failure::config("--count must be at least 1"));
                    }
                    to_json(&random_orders(&ids, count, seed))
                }
            };
            emit(out.as_deref(), &text)
        }
        Command::Evaluate {
            ordering,
            kill_matrix,
            thresholds: ts,
            emit: out,
            emit_csv,
        } => {
            let orders: Vec<Ordering> = load::<OrderingFile>(&ordering)?.into_vec();
            let km: KillMatrix = load(&kill_matrix)?;
            let ts = thresholds(&ts)?;
            let report = if orders.len() == 1 {
                evaluate(&orders[0], &km, &ts)
            } else {
                baseline_average(&orders, &km, &ts)
            }
            .map_err(Failure::execution)?;
            if let Some(csv) = emit_csv {
                emit(Some(&csv), &curve_csv(&report.curve))?;
            }
            emit(out.as_deref(), &to_json(&ReportDoc::from(&report)))
        }
        Command::Pipeline { config, out, format } => {
            let (run, dir) = pipeline(&config, out.as_deref()).map_err(|e| Failure {
                code: e.exit_code() as u8,
                message: e.to_string(),
            })?;
            match format {
                FormatArg::Text => {
                    print!("{}", comparison_table(&run.reports));
                    eprintln!("artifacts written to {}", dir.display());
                }
                FormatArg::Json => print!("{}", to_json(&run.summary())),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

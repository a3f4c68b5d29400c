use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use facetmag::error::{AppError, Kind};
use facetmag::service::{router, AppState};
use facetmag::WORKSPACE_ENV;
use facetmag_core::artifacts::{compose_report, generate_survey, persona_cards, ReportFormat};
use facetmag_core::store::{self, validate_workspace};
use facetmag_core::{
    evaluate, join_all, merge_all, partition, sampling_baseline, verify_composition, Dimension, EvalResult,
    FacetId, SamplingWeights,
};

mod exit {
    pub const COMPOSITION: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INVALID: u8 = 3;
    pub const DOMAIN: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Parser)]
#[command(name = "facetmag", version, about = "Facet-type inclusivity walkthroughs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every file in a workspace and report integrity problems.
    Validate {
        #[arg(env = WORKSPACE_ENV)]
        workspace: PathBuf,
    },
    /// Join dimensions into one.
    Join {
        #[arg(required = true)]
        dims: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the all-minimum and all-maximum persona cards.
    Personas {
        dim: PathBuf,
        #[arg(long, value_enum, default_value_t = CardFormat::Md)]
        format: CardFormat,
    },
    /// Evaluate a dimension over a use case with a rule set.
    Eval {
        dim: PathBuf,
        usecase: PathBuf,
        rules: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Merge evaluation results.
    Merge {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that evaluating the join equals merging separate evaluations.
    Verify {
        dim_a: PathBuf,
        dim_b: PathBuf,
        usecase: PathBuf,
        rules: PathBuf,
    },
    /// Split a dimension into parts, e.g. `--groups a=f1,f2;b=f3`.
    Partition {
        dim: PathBuf,
        #[arg(long)]
        groups: String,
        /// Directory to write the part files into.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a facet survey as CSV.
    Survey {
        #[arg(required = true)]
        dims: Vec<PathBuf>,
        #[arg(short, default_value_t = 1)]
        q: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render results as a report.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the sampling baseline: `baseline <dim>... <usecase> <rules>`.
    Baseline {
        #[arg(required = true, num_args = 3..)]
        inputs: Vec<PathBuf>,
        /// Sampled users; defaults to the type-based cost 2*facets*states.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API over a workspace.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = WORKSPACE_ENV)]
        workspace: PathBuf,
        /// Built UI bundle served under `/app`.
        #[arg(long)]
        app_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CardFormat {
    Md,
    Json,
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), AppError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| AppError::new(Kind::Io, "io", format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_dims(paths: &[PathBuf]) -> Result<Vec<Dimension>, AppError> {
    paths.iter().map(|p| Ok(store::load_dimension(p)?)).collect()
}

fn load_results(paths: &[PathBuf]) -> Result<Vec<EvalResult>, AppError> {
    paths.iter().map(|p| Ok(store::load_result(p)?)).collect()
}

fn parse_groups(spec: &str) -> Result<BTreeMap<FacetId, String>, AppError> {
    let mut out = BTreeMap::new();
    for group in spec.split(';').map(str::trim).filter(|g| !g.is_empty()) {
        let (name, facets) = group
            .split_once('=')
            .ok_or_else(|| AppError::invalid(format!("group `{group}` must look like name=facet,facet")))?;
        for f in facets.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            let id = FacetId::new(f)?;
            if out.insert(id, name.trim().to_owned()).is_some() {
                return Err(AppError::invalid(format!("facet `{f}` is listed in more than one group")));
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<u8, AppError> {
    match cli.command {
        Command::Validate { workspace } => {
            let diags = validate_workspace(&workspace)?;
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
                Ok(0)
            } else {
                Ok(exit::INVALID)
            }
        }
        Command::Join { dims, output } => {
            let joined = join_all(&load_dims(&dims)?)?;
            emit(&store::to_canonical_json(&joined), output.as_deref())?;
            Ok(0)
        }
        Command::Personas { dim, format } => {
            let cards = persona_cards(&load_dims(&[dim])?)?;
            let text = match format {
                CardFormat::Md => cards.iter().map(|c| c.to_markdown()).collect::<Vec<_>>().join("\n"),
                CardFormat::Json => store::to_canonical_json(&cards),
            };
            emit(&text, None)?;
            Ok(0)
        }
        Command::Eval {
            dim,
            usecase,
            rules,
            output,
        } => {
            let d = store::load_dimension(&dim)?;
            let u = store::load_use_case(&usecase)?;
            let r = store::load_rules(&rules)?;
            let result = evaluate(&d, &u, &r)?;
            emit(&store::to_canonical_json(&result), output.as_deref())?;
            Ok(0)
        }
        Command::Merge { results, output } => {
            let merged = merge_all(&load_results(&results)?)?.expect("at least one result");
            emit(&store::to_canonical_json(&merged), output.as_deref())?;
            Ok(0)
        }
        Command::Verify {
            dim_a,
            dim_b,
            usecase,
            rules,
        } => {
            let a = store::load_dimension(&dim_a)?;
            let b = store::load_dimension(&dim_b)?;
            let u = store::load_use_case(&usecase)?;
            let r = store::load_rules(&rules)?;
            let report = verify_composition(&a, &b, &u, &r)?;
            println!(
                "spot calls: joined {}, separate {}",
                report.joined_invocations, report.separate_invocations
            );
            if report.equal {
                println!("equal: evaluation of the join matches the merged evaluations");
                Ok(0)
            } else {
                println!("NOT equal");
                for k in &report.only_joined {
                    println!("  only in joined: {} @ {}", k.code, k.state_id);
                }
                for k in &report.only_merged {
                    println!("  only in merged: {} @ {}", k.code, k.state_id);
                }
                Ok(exit::COMPOSITION)
            }
        }
        Command::Partition { dim, groups, output } => {
            let d = store::load_dimension(&dim)?;
            let parts = partition(&d, &parse_groups(&groups)?)?;
            for p in &parts {
                let ids: Vec<String> = p.facet_ids().iter().map(|f| f.to_string()).collect();
                println!("{}: {}", p.id(), ids.join(", "));
                if let Some(dir) = &output {
                    store::save_dimension(p, &dir.join(format!("{}{}", p.id(), store::DIMENSION_EXT)))?;
                }
            }
            Ok(0)
        }
        Command::Survey { dims, q, output } => {
            let survey = generate_survey(&load_dims(&dims)?, q)?;
            emit(&survey.to_csv()?, output.as_deref())?;
            Ok(0)
        }
        Command::Report {
            results,
            format,
            output,
        } => {
            let format = match format {
                Format::Md => ReportFormat::Markdown,
                Format::Csv => ReportFormat::Csv,
            };
            let doc = compose_report(&load_results(&results)?, format)?;
            emit(&doc.content, output.as_deref())?;
            Ok(0)
        }
        Command::Baseline { inputs, budget, seed } => {
            let (dim_paths, rest) = inputs.split_at(inputs.len() - 2);
            let dims = load_dims(dim_paths)?;
            let u = store::load_use_case(&rest[0])?;
            let r = store::load_rules(&rest[1])?;
            let budget = match budget {
                Some(b) => b,
                None => 2 * join_all(&dims)?.len() as u64 * u.len() as u64,
            };
            let report = sampling_baseline(&dims, &u, &r, budget, seed, &SamplingWeights::Uniform)?;
            emit(&store::to_canonical_json(&report), None)?;
            Ok(0)
        }
        Command::Serve {
            port,
            host,
            workspace,
            app_dir,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let app = router(AppState::new(&workspace), app_dir.as_deref());
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("serving {} on http://{}", workspace.display(), listener.local_addr()?);
                axum::serve(listener, app).await?;
                Ok::<_, std::io::Error>(())
            })?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error [{}]: {}", e.code, e.message);
            ExitCode::from(match e.kind {
                Kind::Invalid => exit::INVALID,
                Kind::Domain | Kind::Conflict => exit::DOMAIN,
                Kind::NotFound | Kind::Io => exit::IO,
            })
        }
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdl_compass::graph::{
    enumerate_mec, parse_constraints, parse_edge_list, Dag, IndependenceSet, Pdag, Variable,
    DEFAULT_MEC_CAP,
};
use cdl_compass::lattice::KnowledgeState;
use cdl_compass::pipeline::{
    audit_transitions, plan_pipeline, render_audit, render_grid, render_validation,
    validate_pipeline, Pipeline,
};
use cdl_compass::registry::{load_catalog, query_catalog, Catalog, CatalogFilter, MethodCard, StateBound};
use cdl_compass::scm::{sample_scm, NoiseSpec, Scm};
use cdl_compass::stats::{
    anm_direction_with_seed, cusum_linearity_test, jarque_bera, ks_test,
    partial_correlation_ci_test, residual_independence_test_with_seed, testability_tier, Dataset,
    LevelTag, Testability, TestReport, DEFAULT_PERMUTATION_SEED,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

const SEED_ENV: &str = "CDL_COMPASS_SEED";

#[derive(Parser, Debug)]
#[command(name = "cdl-compass", version, about = "Knowledge-aware causal pipeline toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Method catalog (JSON array of cards); the built-in seed catalog by default.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// d-separation query on an edge-list graph.
    Dsep {
        graph: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Conditioning set, comma-separated or repeated.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Every DAG agreeing with a constraint file.
    Mec {
        constraints: PathBuf,
        /// Variables to enumerate over; those in the constraints by default.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MEC_CAP)]
        cap: usize,
    },
    /// Ancestral sampling from an SCM file.
    Simulate {
        scm: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assumption test on a CSV column set.
    Test(TestArgs),
    /// Additive-noise direction check between two columns.
    Anm {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Permutation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Browse the method catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Check that a pipeline of card ids can run from a starting state.
    Validate {
        pipeline: PathBuf,
        #[arg(long)]
        start: KnowledgeState,
    },
    /// Shortest card sequences from one knowledge state to another.
    Plan {
        #[arg(long)]
        start: KnowledgeState,
        #[arg(long)]
        goal: KnowledgeState,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        /// Exit 1 when no plan exists.
        #[arg(long)]
        strict: bool,
    },
    /// Transition kind of every card.
    Audit {
        /// Only list cards whose output lowers some tag.
        #[arg(long)]
        relaxing: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TestKind {
    Ks,
    Jb,
    Cusum,
    Resid,
    Pcorr,
}

#[derive(Args, Debug)]
struct TestArgs {
    csv: PathBuf,
    #[arg(long = "test", value_enum)]
    kind: TestKind,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Sample column (ks, jb).
    #[arg(long)]
    column: Option<String>,
    /// Reference distribution for ks, e.g. "Normal(0, 1)" or "Uniform(0, 1)".
    #[arg(long, default_value = "Normal(0, 1)")]
    reference: String,
    /// Regressor column (cusum, resid, pcorr).
    #[arg(long)]
    x: Option<String>,
    /// Response column (cusum, pcorr).
    #[arg(long)]
    y: Option<String>,
    /// Residual column (resid).
    #[arg(long)]
    residual: Option<String>,
    /// Conditioning columns (pcorr).
    #[arg(long, value_delimiter = ',')]
    given: Vec<String>,
    /// Permutation seed (resid).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum CatalogAction {
    List {
        #[arg(long)]
        temporal: Option<cdl_compass::lattice::TemporalFlag>,
        /// Cards whose output meets this bound, e.g. "causal:*:*".
        #[arg(long)]
        min_out: Option<StateBound>,
        /// Cards runnable with this much knowledge.
        #[arg(long)]
        max_in: Option<StateBound>,
        #[arg(long)]
        tag: Option<String>,
    },
    Show { id: String },
}

/// Failure classes: bad input is 2, a well-formed request that fails is 1.
enum Failure {
    Usage(String),
    Domain(String),
    /// Output already written; only the exit code remains.
    Reported,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Serialize, Deserialize)]
struct DsepOutput {
    x: String,
    y: String,
    given: Vec<String>,
    d_separated: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct DagOutput {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MecOutput {
    vars: Vec<String>,
    count: usize,
    dags: Vec<DagOutput>,
    /// Shared skeleton with edges directed where every member agrees.
    cpdag: Option<PdagOutput>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PdagOutput {
    directed: Vec<(String, String)>,
    undirected: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateOutput {
    rows: usize,
    columns: Vec<String>,
    seed: u64,
    out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CardWarning {
    id: String,
    axis: String,
    message: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorOutput {
    error: String,
    reason: String,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn seed_or(flag: Option<u64>, default: u64) -> Result<u64, Failure> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(default),
    })
}

fn json<T: Serialize>(out: &mut impl Write, v: &T) -> Outcome {
    let text = serde_json::to_string_pretty(v).map_err(domain)?;
    writeln!(out, "{text}").map_err(domain)
}

fn names(vs: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<String> {
    vs.into_iter().map(|v| v.as_ref().to_string()).collect()
}

fn dag_output(g: &Dag) -> DagOutput {
    DagOutput {
        nodes: names(g.nodes().iter().map(Variable::as_str)),
        edges: g.edge_names(),
    }
}

fn pair_names(edges: &std::collections::BTreeSet<(Variable, Variable)>) -> Vec<(String, String)> {
    edges
        .iter()
        .map(|(a, b)| (a.as_str().to_string(), b.as_str().to_string()))
        .collect()
}

fn load(cli: &Cli) -> Result<Catalog, Failure> {
    match &cli.catalog {
        Some(p) => load_catalog(p).map_err(usage),
        None => Ok(Catalog::seed()),
    }
}

fn dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::from_csv_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn col<'a>(d: &'a Dataset, name: &Option<String>, flag: &str) -> Result<&'a [f64], Failure> {
    let name = name
        .as_deref()
        .ok_or_else(|| usage(format!("this test needs --{flag}")))?;
    d.column(name).map_err(usage)
}

/// Axes of a card's a priori knowledge that no data test can check.
fn untestable(card: &MethodCard) -> Vec<CardWarning> {
    let (s, p, _) = card.a_priori.tags();
    [LevelTag::Structural(s), LevelTag::Parametric(p)]
        .into_iter()
        .filter(|l| testability_tier(*l) == Testability::Untestable)
        .map(|l| CardWarning {
            id: card.id.clone(),
            axis: l.to_string(),
            message: format!("{} assumes {l}, which data cannot confirm", card.id),
        })
        .collect()
}

fn report(out: &mut impl Write, format: Format, r: &impl Serialize, text: &str) -> Outcome {
    match format {
        Format::Json => json(out, r),
        Format::Text => write!(out, "{text}").map_err(domain),
    }
}

fn run_test(a: &TestArgs, seed_flag: Option<u64>) -> Result<TestReport, Failure> {
    let d = dataset(&a.csv)?;
    let r = match a.kind {
        TestKind::Ks => {
            let sample = col(&d, &a.column, "column")?;
            let reference: NoiseSpec = a.reference.parse().map_err(usage)?;
            let cdf: Box<dyn Fn(f64) -> f64> = match reference {
                NoiseSpec::Normal { mean, sd } => {
                    Box::new(move |v| cdl_compass::stats::normal_cdf((v - mean) / sd))
                }
                NoiseSpec::Uniform { lo, hi } => Box::new(cdl_compass::stats::uniform_cdf(lo, hi)),
            };
            ks_test(sample, &*cdf, a.alpha)
        }
        TestKind::Jb => jarque_bera(col(&d, &a.column, "column")?, a.alpha),
        TestKind::Cusum => cusum_linearity_test(col(&d, &a.x, "x")?, col(&d, &a.y, "y")?, a.alpha),
        TestKind::Resid => {
            let seed = seed_or(seed_flag, DEFAULT_PERMUTATION_SEED)?;
            residual_independence_test_with_seed(
                col(&d, &a.x, "x")?,
                col(&d, &a.residual, "residual")?,
                a.alpha,
                seed,
            )
        }
        TestKind::Pcorr => {
            let x = a.x.as_deref().ok_or_else(|| usage("this test needs --x"))?;
            let y = a.y.as_deref().ok_or_else(|| usage("this test needs --y"))?;
            for c in [x, y].into_iter().chain(a.given.iter().map(String::as_str)) {
                d.column(c).map_err(usage)?;
            }
            partial_correlation_ci_test(&d, x, y, &a.given, a.alpha)
        }
    };
    r.map_err(domain)
}

fn execute(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> Outcome {
    let format = cli.format;
    match &cli.command {
        Command::Dsep { graph, x, y, given } => {
            let g = parse_edge_list(&read(graph)?)
                .and_then(|e| e.into_dag())
                .map_err(usage)?;
            let sep = g.d_separated(x, y, given).map_err(domain)?;
            let r = DsepOutput {
                x: x.clone(),
                y: y.clone(),
                given: given.clone(),
                d_separated: sep,
            };
            report(out, format, &r, &format!("d-separated: {sep}\n"))
        }
        Command::Mec {
            constraints,
            vars,
            cap,
        } => {
            let lines = parse_constraints(&read(constraints)?).map_err(usage)?;
            let vars: Vec<Variable> = if vars.is_empty() {
                let mut all: Vec<Variable> = lines.iter().flat_map(|l| [l.x.clone(), l.y.clone()]).collect();
                for l in &lines {
                    if let cdl_compass::graph::Conditioning::Set(z) = &l.given {
                        all.extend(z.iter().cloned());
                    }
                }
                all.sort();
                all.dedup();
                all
            } else {
                vars.iter().map(|v| Variable::new(v.as_str())).collect::<Result<_, _>>().map_err(usage)?
            };
            let set = IndependenceSet::from_constraints(&lines, &vars).map_err(domain)?;
            let dags = enumerate_mec(vars.iter().cloned(), &set, *cap).map_err(domain)?;
            let cpdag = if dags.is_empty() {
                None
            } else {
                Pdag::from_dags(&dags).ok()
            };
            let r = MecOutput {
                vars: names(vars.iter().map(Variable::as_str)),
                count: dags.len(),
                dags: dags.iter().map(dag_output).collect(),
                cpdag: cpdag.as_ref().map(|p| PdagOutput {
                    directed: pair_names(p.directed()),
                    undirected: pair_names(p.undirected()),
                }),
            };
            let mut text = format!("{} DAG(s) over {}\n", dags.len(), r.vars.join(", "));
            for (i, d) in r.dags.iter().enumerate() {
                let edges: Vec<String> = d.edges.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
                let shown = if edges.is_empty() { "(no edges)".to_string() } else { edges.join(", ") };
                text.push_str(&format!("{}: {shown}\n", i + 1));
            }
            if let Some(p) = &cpdag {
                text.push_str("shared pattern:\n");
                text.push_str(&p.to_edge_list());
                if !text.ends_with('\n') {
                    text.push('\n');
                }
            }
            report(out, format, &r, &text)
        }
        Command::Simulate { scm, n, seed, out: path } => {
            let m = Scm::parse(&read(scm)?).map_err(usage)?;
            let seed = seed_or(*seed, 0)?;
            let d = sample_scm(&m, *n, seed).map_err(domain)?;
            let summary = SimulateOutput {
                rows: d.n_rows(),
                columns: names(d.names().iter().map(Variable::as_str)),
                seed,
                out: path.as_ref().map(|p| p.display().to_string()),
            };
            match path {
                Some(p) => {
                    let f = fs::File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                    d.write_csv(io::BufWriter::new(f)).map_err(domain)?;
                    let text = format!("wrote {} rows of {} to {}\n", summary.rows, summary.columns.join(","), p.display());
                    report(out, format, &summary, &text)
                }
                None => d.write_csv(&mut *out).map_err(domain),
            }
        }
        Command::Test(a) => {
            let r = run_test(a, a.seed)?;
            report(out, format, &r, &r.to_string())
        }
        Command::Anm { csv, x, y, alpha, seed } => {
            let d = dataset(csv)?;
            let seed = seed_or(*seed, DEFAULT_PERMUTATION_SEED)?;
            let r = anm_direction_with_seed(
                d.column(x).map_err(usage)?,
                d.column(y).map_err(usage)?,
                *alpha,
                seed,
            )
            .map_err(domain)?;
            let text = format!(
                "direction: {}\nwindow: {} (degree {})\nforward {x} -> {y}: statistic {:.4}, p-value {}\nbackward {y} -> {x}: statistic {:.4}, p-value {}\n",
                r.direction,
                r.window,
                r.degree,
                r.forward.statistic,
                r.forward.p_value.unwrap_or(f64::NAN),
                r.backward.statistic,
                r.backward.p_value.unwrap_or(f64::NAN),
            );
            report(out, format, &r, &text)
        }
        Command::Catalog { action } => {
            let c = load(cli)?;
            match action {
                CatalogAction::List {
                    temporal,
                    min_out,
                    max_in,
                    tag,
                } => {
                    let filter = CatalogFilter {
                        temporal: *temporal,
                        min_a_posteriori: *min_out,
                        max_a_priori: *max_in,
                        tag: tag.clone(),
                    };
                    let cards: Vec<&MethodCard> = query_catalog(&c, &filter);
                    let mut rows = vec![vec!["id".to_string(), "a priori".into(), "a posteriori".into(), "name".into()]];
                    for card in &cards {
                        rows.push(vec![
                            card.id.clone(),
                            card.a_priori.to_string(),
                            card.a_posteriori.to_string(),
                            card.name.clone(),
                        ]);
                    }
                    report(out, format, &cards, &table(&rows))
                }
                CatalogAction::Show { id } => {
                    let card = c.get(id).ok_or_else(|| domain(format!("unknown card id {id:?}")))?;
                    for w in untestable(card) {
                        let _ = writeln!(err, "warning: {}", w.message);
                    }
                    let mut text = format!(
                        "id: {}\nname: {}\ncitation: {}\na priori: {}\na posteriori: {}\ntransition: {}\n",
                        card.id,
                        card.name,
                        card.citation_key,
                        card.a_priori,
                        card.a_posteriori,
                        card.transition().kind
                    );
                    if !card.assumption_tags.is_empty() {
                        text.push_str(&format!("assumptions: {}\n", names(&card.assumption_tags).join(", ")));
                    }
                    if !card.notes.is_empty() {
                        text.push_str(&format!("notes: {}\n", card.notes));
                    }
                    text.push_str(&render_grid(&card.a_priori, &card.a_posteriori));
                    report(out, format, card, &text)
                }
            }
        }
        Command::Validate { pipeline, start } => {
            let c = load(cli)?;
            let p: Pipeline = serde_json::from_str(&read(pipeline)?)
                .map_err(|e| usage(format!("{}: {e}", pipeline.display())))?;
            let r = validate_pipeline(&c, &p, start).map_err(domain)?;
            for card in p.stages.iter().filter_map(|id| c.get(id)) {
                for w in untestable(card) {
                    let _ = writeln!(err, "warning: {}", w.message);
                }
            }
            report(out, format, &r, &render_validation(&r, &c))?;
            if r.overall {
                Ok(())
            } else {
                Err(Failure::Reported)
            }
        }
        Command::Plan {
            start,
            goal,
            max_len,
            strict,
        } => {
            let c = load(cli)?;
            let plans = plan_pipeline(&c, start, goal, *max_len);
            let ids: Vec<&Vec<String>> = plans.iter().map(|p| &p.stages).collect();
            let mut text = String::new();
            if plans.is_empty() {
                text.push_str("no plan found\n");
            } else {
                for p in &ids {
                    if p.is_empty() {
                        text.push_str("(empty: the start already satisfies the goal)\n");
                    } else {
                        text.push_str(&p.join(" -> "));
                        text.push('\n');
                    }
                }
            }
            report(out, format, &ids, &text)?;
            if plans.is_empty() && *strict {
                let reason = format!("no pipeline of at most {max_len} stages leads from {start} to {goal}");
                let e = ErrorOutput {
                    error: "no_plan".into(),
                    reason,
                };
                match format {
                    Format::Json => {
                        let _ = writeln!(err, "{}", serde_json::to_string(&e).unwrap_or_default());
                    }
                    Format::Text => {
                        let _ = writeln!(err, "error: {}", e.reason);
                    }
                }
                return Err(Failure::Reported);
            }
            Ok(())
        }
        Command::Audit { relaxing } => {
            let c = load(cli)?;
            let mut a = audit_transitions(&c);
            if *relaxing {
                a.transitions.retain(|_, t| t.relaxing);
            }
            report(out, format, &a, &render_audit(&a))
        }
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s.push_str(line.join("  ").trim_end());
        s.push('\n');
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut err = io::stderr();
    let result = execute(&cli, &mut out, &mut err);
    let _ = out.flush();
    let (code, kind, message) = match result {
        Ok(()) => return ExitCode::SUCCESS,
        Err(Failure::Reported) => return ExitCode::from(1),
        Err(Failure::Usage(m)) => (2, "input", m),
        Err(Failure::Domain(m)) => (1, "domain", m),
    };
    match cli.format {
        Format::Json => {
            let e = ErrorOutput {
                error: kind.into(),
                reason: message,
            };
            let _ = writeln!(err, "{}", serde_json::to_string(&e).unwrap_or_default());
        }
        Format::Text => {
            let _ = writeln!(err, "error: {message}");
        }
    }
    ExitCode::from(code)
}

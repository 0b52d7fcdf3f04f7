//! Command-line front end. `run` takes the argument list and output streams
//! so the binary stays a one-liner and the commands can be tested in-process.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bayesnet::{bn_to_dot, enumerate_family, random_cpts};
use crate::circuit::Circuit;
use crate::compiler::{bn2spn_with, internal_variables, Normalization};
use crate::decompiler::{spn2bn_with, RegionMode};
use crate::error::{Error, Result};
use crate::graph::{NodeId, Ordering};
use crate::verify::{
    roundtrip_with, run_table_experiment, MarginalizationPolicy, OrderingMode, RoundtripOptions,
    TableConfig,
};
use crate::BayesNet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bnspn", version, about = "Compile Bayesian networks to sum-product networks and back")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a BN (JSON) into an SPN (JSON).
    Compile {
        #[arg(long)]
        bn: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Decompile an SPN (JSON) into a BN (JSON).
    Decompile {
        #[arg(long)]
        spn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, default_value = "layer-local")]
        regions: String,
    },
    /// Compile then decompile a BN and print the recovered edges.
    Roundtrip {
        #[arg(long)]
        bn: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = "layer-local")]
        regions: String,
        /// Also write the decompiled BN here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verification experiments.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Write every family network of size n, with seeded random CPTs.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Render a BN or SPN JSON file as DOT.
    ExportDot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Comma-separated variable names, or `reverse-topo`.
    #[arg(long, default_value = "reverse-topo")]
    order: String,
    /// Comma-separated variable names, `internal` or `none`.
    #[arg(long, default_value = "internal")]
    marginalize: String,
    /// Renormalize sum weights instead of rejecting orders that leave
    /// them unnormalized.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Roundtrip every family network of size n and compare with its moral
    /// closure.
    Table {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "node1-last")]
        orderings: String,
        #[arg(long, default_value = "internal")]
        policy: String,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        report: PathBuf,
        /// Run this many randomly drawn trials instead of the full sweep.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Compile {
            bn,
            pipeline,
            out,
            dot,
        } => {
            let bn = read_bn(&bn)?;
            let spn = compile(&bn, &pipeline)?;
            write_file(&out, &spn.to_json())?;
            if let Some(dot) = dot {
                write_file(&dot, &spn.to_dot())?;
            }
            let _ = writeln!(stderr, "{} nodes, {} sums", spn.len(), spn.sums().count());
            Ok(EXIT_OK)
        }
        Command::Decompile {
            spn,
            out,
            dot,
            regions,
        } => {
            let spn = read_spn(&spn)?;
            let d = spn2bn_with(&spn, regions.parse()?)?;
            write_file(&out, &d.bn.to_json())?;
            if let Some(dot) = dot {
                write_file(&dot, &bn_to_dot(&d.bn))?;
            }
            let _ = writeln!(
                stderr,
                "{} latents, {} observables, {} edges",
                d.regions.len(),
                d.bn.len() - d.regions.len(),
                d.dag().edge_count()
            );
            Ok(EXIT_OK)
        }
        Command::Roundtrip {
            bn,
            pipeline,
            regions,
            out,
        } => {
            let bn = read_bn(&bn)?;
            let sigma = parse_order(&bn, &pipeline.order)?;
            let policy = parse_policy(&bn, &pipeline.marginalize)?;
            let options = RoundtripOptions {
                normalization: normalization(pipeline.renormalize),
                regions: regions.parse::<RegionMode>()?,
            };
            let rt = roundtrip_with(&bn, &sigma, &policy, options)?;
            let names = bn.names();
            for &(a, b) in &rt.edges {
                let _ = writeln!(stdout, "{} -> {}", names[a.0], names[b.0]);
            }
            if let Some(out) = out {
                write_file(&out, &rt.decompilation.bn.to_json())?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify {
            what:
                VerifyCommand::Table {
                    n,
                    orderings,
                    policy,
                    jobs,
                    report,
                    sample,
                    seed,
                },
        } => {
            let config = TableConfig {
                n,
                orderings: orderings.parse::<OrderingMode>()?,
                policy: match policy.as_str() {
                    "internal" => MarginalizationPolicy::InternalOnly,
                    "none" => MarginalizationPolicy::None,
                    other => return Err(Error::Format(format!("unknown policy `{other}`"))),
                },
                jobs,
                sample,
                seed,
            };
            let summary = run_table_experiment(&config)?;
            let file = std::fs::File::create(&report).map_err(|e| Error::io(&report, e))?;
            summary.write_csv(std::io::BufWriter::new(file))?;
            let orders = summary
                .ordering_count
                .map_or_else(|| "reverse-topological".to_string(), |o| o.to_string());
            let _ = writeln!(
                stdout,
                "n={}: {} BNs, {} orderings, {} trials, {} matches",
                summary.n, summary.bn_count, orders, summary.trial_count, summary.match_count
            );
            let _ = writeln!(
                stdout,
                "reverse-topological: {} trials, {} matches",
                summary.rev_topo_trials, summary.rev_topo_matches
            );
            if summary.must_pass_ok() {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(
                    stderr,
                    "{} reverse-topological trials did not return the moral closure",
                    summary.rev_topo_trials - summary.rev_topo_matches
                );
                Ok(EXIT_VERIFICATION)
            }
        }
        Command::Enumerate { n, out, seed } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let family = enumerate_family(n)?;
            let width = family.len().to_string().len();
            for (i, dag) in family.iter().enumerate() {
                let bn = random_cpts(dag, &vec![2; n], crate::verify::trial_seed(seed, i as u64))?;
                write_file(&out.join(format!("n{n}_{i:0width$}.json")), &bn.to_json())?;
            }
            let _ = writeln!(stderr, "wrote {} networks to {}", family.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::ExportDot { input, out } => {
            let text = read_file(&input)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let dot = if value.get("nodes").is_some() {
                Circuit::from_json(&text)?.to_dot()
            } else if value.get("cpts").is_some() {
                bn_to_dot(&BayesNet::from_json(&text)?)
            } else {
                return Err(Error::Format(format!(
                    "{}: neither a BN (`cpts`) nor an SPN (`nodes`)",
                    input.display()
                )));
            };
            match out {
                Some(out) => write_file(&out, &dot)?,
                None => {
                    let _ = stdout.write_all(dot.as_bytes());
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn normalization(renormalize: bool) -> Normalization {
    if renormalize {
        Normalization::Renormalize
    } else {
        Normalization::Strict
    }
}

fn compile(bn: &BayesNet, args: &PipelineArgs) -> Result<Circuit> {
    let sigma = parse_order(bn, &args.order)?;
    let marg = parse_policy(bn, &args.marginalize)?.variables(bn);
    bn2spn_with(bn, &sigma, &marg, normalization(args.renormalize))
}

fn lookup(bn: &BayesNet, name: &str) -> Result<NodeId> {
    bn.index_of(name)
        .ok_or_else(|| Error::Format(format!("unknown variable `{name}`")))
}

fn split_names(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// `reverse-topo` or a comma-separated list of variable names.
pub fn parse_order(bn: &BayesNet, text: &str) -> Result<Ordering> {
    if text == "reverse-topo" {
        return Ok(bn.dag().default_reverse_topological());
    }
    let seq = split_names(text)
        .map(|name| lookup(bn, name))
        .collect::<Result<Vec<_>>>()?;
    Ordering::new(seq, bn.len())
}

/// `internal`, `none`, or a comma-separated list of variable names.
pub fn parse_policy(bn: &BayesNet, text: &str) -> Result<MarginalizationPolicy> {
    Ok(match text {
        "internal" => MarginalizationPolicy::InternalOnly,
        "none" => MarginalizationPolicy::None,
        list => {
            let vars = split_names(list)
                .map(|name| lookup(bn, name))
                .collect::<Result<BTreeSet<_>>>()?;
            if vars == internal_variables(bn) {
                MarginalizationPolicy::InternalOnly
            } else {
                MarginalizationPolicy::Explicit(vars)
            }
        }
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_bn(path: &Path) -> Result<BayesNet> {
    BayesNet::from_json(&read_file(path)?)
}

fn read_spn(path: &Path) -> Result<Circuit> {
    Circuit::from_json(&read_file(path)?)
}

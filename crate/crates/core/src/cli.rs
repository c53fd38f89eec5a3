//! Command-line front end. Every subcommand is a thin adapter over the
//! library; data goes to `--out` (standard output by default) and
//! diagnostics to standard error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{mesh_csv, sweep_mesh, sweep_trees, trees_csv};
use crate::delivery::{
    build_delivery_tree, double_feed, extraneous_edges, feed_report, mark_traffic,
    shortest_path_tree, DeliveryTree,
};
use crate::graph::{Edge, NodeId, OverlayGraph};
use crate::mesh::{build_mesh, prune_redundant, repair_failure, PolicyKind, TieBreakPolicy};
use crate::sim::{generate_script, run_with, trace_to_jsonl, ChurnScript, CheckLevel, RunOptions, SimError};
use crate::tree::{augment, build_full_binary_tree, tree_to_graph, Approach, RootedTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bimesh", version, about = "Biconnected overlay multicast topologies")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Debug, Subcommand)]
enum Group {
    /// Least-degree mesh: build, prune redundant links, fail a node
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Distribution trees and their biconnectivity augmentations
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Delivery tree over a mesh and double-feed backup paths
    #[command(subcommand)]
    Delivery(DeliveryCmd),
    /// Churn scripts: generate and replay
    #[command(subcommand)]
    Sim(SimCmd),
    /// Metric sweeps as CSV
    #[command(subcommand)]
    Sweep(SweepCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    LowestId,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ApproachArg {
    LeafChain,
    Grandparent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    None,
    Biconnectivity,
    Full,
}

#[derive(Debug, Args)]
struct Output {
    /// Output path, `-` for standard output
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct Policy {
    #[arg(long, value_enum, default_value = "lowest-id")]
    policy: PolicyArg,
    #[arg(long)]
    seed: Option<u64>,
}

impl Policy {
    fn resolve(&self) -> Result<TieBreakPolicy, CliError> {
        match (self.policy, self.seed) {
            (PolicyArg::LowestId, seed) => Ok(PolicyKind::LowestId.with_seed(seed.unwrap_or(0))),
            (PolicyArg::Random, Some(seed)) => Ok(PolicyKind::Random.with_seed(seed)),
            (PolicyArg::Random, None) => {
                Err(CliError::Usage("--policy random requires an explicit --seed".into()))
            }
        }
    }
}

#[derive(Debug, Subcommand)]
enum MeshCmd {
    /// Join nodes 1..=N one by one
    Build {
        #[arg(long)]
        nodes: u64,
        #[command(flatten)]
        policy: Policy,
        #[command(flatten)]
        output: Output,
    },
    /// Remove idle redundant links
    Prune {
        #[arg(long = "in")]
        input: String,
        #[command(flatten)]
        output: Output,
    },
    /// Fail a node and repair the ring around it
    Fail {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        node: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum TreeCmd {
    /// Full binary tree with breadth-first ids
    Build {
        #[arg(long)]
        levels: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Links that make a tree biconnected
    Augment {
        /// Full binary tree depth (ignored when --in is given)
        #[arg(long, required_unless_present = "input")]
        levels: Option<u32>,
        #[arg(long = "in")]
        input: Option<String>,
        #[arg(long, value_enum)]
        approach: ApproachArg,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum DeliveryCmd {
    /// Shortest-path delivery tree; marks its links as carrying traffic
    Tree {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        source: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Primary and backup path for every member
    Feeds {
        #[arg(long = "in")]
        input: String,
        /// Source for a shortest-path tree (ignored when --tree is given)
        #[arg(long, required_unless_present = "tree")]
        source: Option<u64>,
        /// Explicit delivery tree JSON
        #[arg(long)]
        tree: Option<String>,
        /// One text line per destination instead of JSON
        #[arg(long)]
        explain: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum SimCmd {
    /// Generate a churn script
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        joins: usize,
        #[arg(long, default_value_t = 0)]
        fails: usize,
        #[arg(long, default_value_t = 0)]
        prune_every: usize,
        #[arg(long, value_enum, default_value = "lowest-id")]
        policy: PolicyArg,
        #[command(flatten)]
        output: Output,
    },
    /// Replay a churn script and emit its trace as JSON lines
    Run {
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum, default_value = "biconnectivity")]
        check: CheckArg,
        /// Skip per-event all-pairs hop averages
        #[arg(long)]
        no_hops: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum SweepCmd {
    /// Join-only mesh metrics for N = from, from+step, ..., to
    Mesh {
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        policy: Policy,
        #[command(flatten)]
        output: Output,
    },
    /// Augmentation link counts for full binary trees
    Trees {
        #[arg(long, default_value_t = 2)]
        from: u32,
        #[arg(long, default_value_t = 10)]
        to: u32,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

struct Ctx<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, out: &str, data: &str) -> Result<(), CliError> {
        if out == "-" {
            self.stdout.write_all(data.as_bytes())?;
            self.stdout.flush()?;
        } else {
            fs::write(PathBuf::from(out), data)?;
        }
        Ok(())
    }

    fn note(&mut self, msg: &str) {
        let _ = writeln!(self.stderr, "{msg}");
    }
}

fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut buf = String::new();
        io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{path}: {e}")))
    }
}

fn pick_format(requested: Option<Format>, allowed: &[Format]) -> Result<Format, CliError> {
    let format = requested.unwrap_or(allowed[0]);
    if allowed.contains(&format) {
        Ok(format)
    } else {
        Err(CliError::Usage(format!(
            "--format {} is not supported here",
            format.to_possible_value().expect("named").get_name()
        )))
    }
}

fn render_graph(g: &OverlayGraph, format: Option<Format>) -> Result<String, CliError> {
    Ok(match pick_format(format, &[Format::Json, Format::Dot])? {
        Format::Dot => g.to_dot(),
        _ => g.to_json() + "\n",
    })
}

fn edge_list(edges: &[Edge]) -> String {
    edges.iter().map(Edge::to_string).collect::<Vec<_>>().join(" ")
}

/// Runs the CLI against `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let mut ctx = Ctx { stdout, stderr };
    match dispatch(cli.group, &mut ctx) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            ctx.note(&format!("error: {msg}"));
            EXIT_USAGE
        }
        Err(CliError::Domain(msg)) => {
            ctx.note(&format!("error: {msg}"));
            EXIT_DOMAIN
        }
    }
}

fn dispatch(group: Group, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match group {
        Group::Mesh(cmd) => mesh_cmd(cmd, ctx),
        Group::Tree(cmd) => tree_cmd(cmd, ctx),
        Group::Delivery(cmd) => delivery_cmd(cmd, ctx),
        Group::Sim(cmd) => sim_cmd(cmd, ctx),
        Group::Sweep(cmd) => sweep_cmd(cmd, ctx),
    }
}

fn mesh_cmd(cmd: MeshCmd, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match cmd {
        MeshCmd::Build { nodes, policy, output } => {
            let g = build_mesh(nodes, policy.resolve()?);
            let text = render_graph(&g, output.format)?;
            ctx.emit(&output.out, &text)
        }
        MeshCmd::Prune { input, output } => {
            let mut g = OverlayGraph::from_json(&read_input(&input)?)?;
            let removed = prune_redundant(&mut g);
            ctx.note(&format!("removed {} link(s): {}", removed.len(), edge_list(&removed)));
            let text = render_graph(&g, output.format)?;
            ctx.emit(&output.out, &text)
        }
        MeshCmd::Fail { input, node, output } => {
            let mut g = OverlayGraph::from_json(&read_input(&input)?)?;
            let out = repair_failure(&mut g, NodeId(node))?;
            ctx.note(&format!(
                "removed {}; added {}",
                edge_list(&out.removed),
                edge_list(&out.added)
            ));
            let text = render_graph(&g, output.format)?;
            ctx.emit(&output.out, &text)
        }
    }
}

fn tree_cmd(cmd: TreeCmd, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match cmd {
        TreeCmd::Build { levels, output } => {
            let t = build_full_binary_tree(levels)?;
            let text = match pick_format(output.format, &[Format::Json, Format::Dot])? {
                Format::Dot => tree_to_graph(&t, None)?.to_dot(),
                _ => t.to_json() + "\n",
            };
            ctx.emit(&output.out, &text)
        }
        TreeCmd::Augment {
            levels,
            input,
            approach,
            output,
        } => {
            let t = match (&input, levels) {
                (Some(path), _) => RootedTree::from_json(&read_input(path)?)?,
                (None, Some(levels)) => build_full_binary_tree(levels)?,
                (None, None) => return Err(CliError::Usage("--levels or --in is required".into())),
            };
            let approach = match approach {
                ApproachArg::LeafChain => Approach::LeafChain,
                ApproachArg::Grandparent => Approach::Grandparent,
            };
            let aug = augment(&t, approach);
            let text = match pick_format(output.format, &[Format::Json, Format::Dot])? {
                Format::Dot => tree_to_graph(&t, Some(&aug))?.to_dot(),
                _ => aug.to_json() + "\n",
            };
            ctx.emit(&output.out, &text)
        }
    }
}

#[derive(Serialize)]
struct FeedJson {
    dest: NodeId,
    primary: Vec<NodeId>,
    backup: Option<Vec<NodeId>>,
}

#[derive(Serialize)]
struct FeedsJson {
    source: NodeId,
    feeds: Vec<FeedJson>,
    extraneous: Vec<Edge>,
}

fn delivery_cmd(cmd: DeliveryCmd, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match cmd {
        DeliveryCmd::Tree { input, source, output } => {
            let mut g = OverlayGraph::from_json(&read_input(&input)?)?;
            let tree = build_delivery_tree(&mut g, NodeId(source))?;
            let text = match pick_format(output.format, &[Format::Json, Format::Dot])? {
                Format::Dot => g.to_dot(),
                _ => tree.to_json() + "\n",
            };
            ctx.emit(&output.out, &text)
        }
        DeliveryCmd::Feeds {
            input,
            source,
            tree,
            explain,
            output,
        } => {
            pick_format(output.format, &[Format::Json])?;
            let mut g = OverlayGraph::from_json(&read_input(&input)?)?;
            let tree = match (tree, source) {
                (Some(path), _) => DeliveryTree::from_json(&g, &read_input(&path)?)?,
                (None, Some(s)) => shortest_path_tree(&g, NodeId(s))?,
                (None, None) => return Err(CliError::Usage("--source or --tree is required".into())),
            };
            mark_traffic(&mut g, &tree)?;
            let text = if explain {
                feed_report(&g, &tree)?
            } else {
                let mut feeds = Vec::new();
                for dest in tree.destinations() {
                    let feed = double_feed(&g, &tree, dest)?;
                    feeds.push(FeedJson {
                        dest,
                        primary: tree.path_to(dest)?,
                        backup: feed.map(|f| f.backup),
                    });
                }
                let doc = FeedsJson {
                    source: tree.source(),
                    feeds,
                    extraneous: extraneous_edges(&g, &tree)?.into_iter().collect(),
                };
                serde_json::to_string(&doc)? + "\n"
            };
            ctx.emit(&output.out, &text)
        }
    }
}

fn sim_cmd(cmd: SimCmd, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match cmd {
        SimCmd::Gen {
            seed,
            joins,
            fails,
            prune_every,
            policy,
            output,
        } => {
            pick_format(output.format, &[Format::Json])?;
            let mut script = generate_script(seed, joins, fails, prune_every)?;
            if policy == PolicyArg::Random {
                script.policy = PolicyKind::Random.with_seed(seed);
            }
            ctx.emit(&output.out, &script.to_string())
        }
        SimCmd::Run {
            input,
            check,
            no_hops,
            output,
        } => {
            pick_format(output.format, &[Format::Json])?;
            let script = ChurnScript::parse(&read_input(&input)?)?;
            let check = match check {
                CheckArg::None => CheckLevel::None,
                CheckArg::Biconnectivity => CheckLevel::Biconnectivity,
                CheckArg::Full => CheckLevel::Full,
            };
            let mut opts = RunOptions::new(check);
            if no_hops {
                opts = opts.without_hops();
            }
            match run_with(&script, opts) {
                Ok(trace) => ctx.emit(&output.out, &trace_to_jsonl(&trace)),
                Err(SimError::Violation(v)) => {
                    ctx.emit(&output.out, &trace_to_jsonl(&v.trace))?;
                    ctx.note(&format!("reproduction script ({} events):", v.reproduction.events.len()));
                    ctx.note(v.reproduction.to_string().trim_end());
                    Err(CliError::Domain(format!(
                        "invariant violated at step {}: {}",
                        v.step, v.message
                    )))
                }
                Err(other) => Err(other.into()),
            }
        }
    }
}

fn sweep_cmd(cmd: SweepCmd, ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    match cmd {
        SweepCmd::Mesh {
            from,
            to,
            step,
            policy,
            output,
        } => {
            pick_format(output.format, &[Format::Csv])?;
            if from == 0 || step == 0 || from > to {
                return Err(CliError::Usage("need 0 < --from <= --to and --step > 0".into()));
            }
            let ns: Vec<usize> = (from..=to).step_by(step).collect();
            let records = sweep_mesh(&ns, policy.resolve()?)?;
            ctx.emit(&output.out, &mesh_csv(&records))
        }
        SweepCmd::Trees { from, to, output } => {
            pick_format(output.format, &[Format::Csv])?;
            if from < 2 || from > to {
                return Err(CliError::Usage("need 2 <= --from <= --to".into()));
            }
            let levels: Vec<u32> = (from..=to).collect();
            let records = sweep_trees(&levels)?;
            ctx.emit(&output.out, &trees_csv(&records))
        }
    }
}

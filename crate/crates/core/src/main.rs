use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use uavcheck::checker::Checker;
use uavcheck::ctl::{parse_formula, print_formula, ParseError};
use uavcheck::dubins::{plan_with, Pose, Words};
use uavcheck::kripke::kmv::load_kmv;
use uavcheck::kripke::Kripke;
use uavcheck::mission::smv::{emit_smv, load_smv};
use uavcheck::mission::{build_mission_kripke, builtin_specs, parse_catalogue, CatalogueEntry, MissionConfig};
use uavcheck::sim::{export_csv, export_json, replay, run, ReplayOptions, Scenario};

// stdout writes that tolerate a closed pipe
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const OUT_DIR_VAR: &str = "UAVCHECK_OUT_DIR";
const SMV_MAX_CORES: usize = 1 << 20;

#[derive(Parser)]
#[command(name = "uavcheck", version, about = "CTL model checking of a cooperative UAV search mission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check CTL specs against a .kmv / .smv model or the mission model.
    Check(CheckArgs),
    #[command(subcommand)]
    Mission(MissionCommand),
    /// Plan a Dubins path and print samples as CSV (s,x,y,theta).
    Dubins(DubinsArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Cells per side.
    #[arg(long)]
    grid: Option<usize>,
    /// key = value mission configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl GridArgs {
    fn load(&self) -> Result<MissionConfig> {
        let mut cfg = match &self.config {
            Some(p) => MissionConfig::from_config_text(&read(p)?).with_context(|| format!("{}", p.display()))?,
            None => MissionConfig::default(),
        };
        if let Some(n) = self.grid {
            cfg.grid.cells_per_side = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Print results as JSON.
    #[arg(long)]
    json: bool,
    /// Directory for trace files (default: $UAVCHECK_OUT_DIR or the current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Model file (.kmv, or .smv in the emitted dialect).
    model: Option<PathBuf>,
    /// Check the mission model instead of a file.
    #[arg(long, conflicts_with = "model")]
    mission: bool,
    #[command(flatten)]
    grid: GridArgs,
    /// A CTL formula; may be repeated.
    #[arg(long)]
    spec: Vec<String>,
    /// Spec catalogue: `id: formula # expected` lines.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// Add self-loops to states without successors instead of rejecting the model.
    #[arg(long)]
    allow_deadlock_selfloop: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Subcommand)]
enum MissionCommand {
    /// Build the mission model; optionally emit it as SMV text.
    Build {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        emit_smv: Option<PathBuf>,
    },
    /// Check the builtin mission specs.
    Verify {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, required_unless_present = "spec_id")]
        all: bool,
        #[arg(long, conflicts_with = "all")]
        spec_id: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the multi-UAV simulator on a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; the JSON export goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a counterexample trace as a trajectory.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DubinsArgs {
    /// x,y,theta (radians)
    #[arg(long, allow_hyphen_values = true)]
    start: String,
    #[arg(long, allow_hyphen_values = true)]
    end: String,
    #[arg(long, default_value_t = 25.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// all | four
    #[arg(long, default_value = "all")]
    words: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
}

fn default_out(name: &str) -> PathBuf {
    out_dir(&None).join(name)
}

fn formula_error(label: &str, text: &str, e: &ParseError) -> anyhow::Error {
    let shown = text.get(e.span.start..e.span.end).unwrap_or("");
    anyhow!("{label}: {e} (near `{shown}` in `{}`)", text.trim())
}

#[derive(Serialize)]
struct SpecResult {
    id: String,
    formula: String,
    holds: bool,
    expected: Option<bool>,
    trace: Option<String>,
}

#[derive(Serialize)]
struct Report {
    results: Vec<SpecResult>,
    /// Every verdict matched its expectation (TRUE when none was given).
    ok: bool,
}

fn check_all<K: Kripke + ?Sized>(model: &K, specs: &[CatalogueEntry], out: &OutputArgs) -> Result<ExitCode> {
    let dir = out_dir(&out.out_dir);
    let mut checker = Checker::new(model);
    let mut results = Vec::new();
    for spec in specs {
        let verdict = checker.verify(&spec.formula).with_context(|| format!("spec {}", spec.id))?;
        let mut trace_path = None;
        if let Some(trace) = &verdict.trace {
            let safe: String = spec
                .id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect();
            let path = dir.join(format!("trace_{safe}.json"));
            write(&path, &trace.to_json())?;
            trace_path = Some(path.display().to_string());
        }
        results.push(SpecResult {
            id: spec.id.clone(),
            formula: print_formula(&spec.formula),
            holds: verdict.holds,
            expected: spec.expected,
            trace: trace_path,
        });
    }
    let ok = results.iter().all(|r| r.holds == r.expected.unwrap_or(true));
    if out.json {
        out!("{}", serde_json::to_string_pretty(&Report { results, ok })?);
    } else {
        for r in &results {
            let verdict = if r.holds { "TRUE" } else { "FALSE" };
            match &r.trace {
                Some(p) => out!("SPEC {} {} : {verdict} [trace written to {p}]", r.id, r.formula),
                None => out!("SPEC {} {} : {verdict}", r.id, r.formula),
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn collect_specs(inline: &[String], file: &Option<PathBuf>) -> Result<Vec<CatalogueEntry>> {
    let mut specs = Vec::new();
    for (i, text) in inline.iter().enumerate() {
        let formula = parse_formula(text).map_err(|e| formula_error(&format!("--spec {}", i + 1), text, &e))?;
        specs.push(CatalogueEntry { id: (i + 1).to_string(), formula, expected: None });
    }
    if let Some(path) = file {
        let text = read(path)?;
        let entries = parse_catalogue(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        for mut e in entries {
            if specs.iter().any(|s: &CatalogueEntry| s.id == e.id) {
                e.id = format!("{}.{}", path.file_stem().and_then(|s| s.to_str()).unwrap_or("file"), e.id);
            }
            specs.push(e);
        }
    }
    Ok(specs)
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let mut specs = collect_specs(&a.spec, &a.spec_file)?;
    if a.mission {
        if specs.is_empty() {
            bail!("no specs given (use --spec or --spec-file)");
        }
        let model = build_mission_kripke(&a.grid.load()?)?;
        return check_all(model.kripke(), &specs, &a.out);
    }
    let Some(path) = &a.model else {
        bail!("give a model file or --mission");
    };
    let text = read(path)?;
    let is_smv = path.extension().is_some_and(|e| e == "smv");
    if is_smv {
        let model = load_smv(&text, SMV_MAX_CORES).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        if specs.is_empty() {
            specs = model.specs.clone();
        }
        if specs.is_empty() {
            bail!("no specs given and {} has no SPEC lines", path.display());
        }
        return check_all(model.kripke(), &specs, &a.out);
    }
    if specs.is_empty() {
        bail!("no specs given (use --spec or --spec-file)");
    }
    let model = load_kmv(&text, a.allow_deadlock_selfloop).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    check_all(&model, &specs, &a.out)
}

fn cmd_mission(cmd: MissionCommand) -> Result<ExitCode> {
    match cmd {
        MissionCommand::Build { grid, emit_smv: smv_path } => {
            let cfg = grid.load()?;
            let model = build_mission_kripke(&cfg)?;
            out!(
                "mission model: {n}x{n} grid, {} states, {} initial, {} propositions",
                model.state_count(),
                model.initial_states().len(),
                model.props().len(),
                n = cfg.grid.cells_per_side
            );
            if let Some(path) = smv_path {
                write(&path, &emit_smv(&cfg)?)?;
                out!("smv written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        MissionCommand::Verify { grid, all, spec_id, out } => {
            let model = build_mission_kripke(&grid.load()?)?;
            let catalogue = builtin_specs();
            let specs: Vec<CatalogueEntry> = if all {
                catalogue
            } else {
                spec_id
                    .iter()
                    .map(|id| {
                        catalogue.iter().find(|s| s.id == *id).cloned().ok_or_else(|| {
                            let known: Vec<_> = catalogue.iter().map(|s| s.id.as_str()).collect();
                            anyhow!("unknown spec id `{id}` (known: {})", known.join(", "))
                        })
                    })
                    .collect::<Result<_>>()?
            };
            check_all(model.kripke(), &specs, &out)
        }
        MissionCommand::Simulate { scenario, seed, out } => {
            let mut sc = Scenario::from_json(&read(&scenario)?).with_context(|| format!("{}", scenario.display()))?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let result = run(&sc)?;
            let csv_path = out.unwrap_or_else(|| default_out("simulation.csv"));
            write(&csv_path, &export_csv(&result.tracks))?;
            let json_path = csv_path.with_extension("json");
            write(&json_path, &export_json(&result.tracks, &result.map))?;
            for t in &result.tracks {
                out!(
                    "uav {}: {} decisions{}",
                    t.uav,
                    t.decisions.len(),
                    if t.deadlocked { ", deadlocked" } else { "" }
                );
            }
            out!("cells visited: {}/{}", result.map.visited_count(), result.map.cells.len());
            out!("tracks written to {} and {}", csv_path.display(), json_path.display());
            Ok(ExitCode::SUCCESS)
        }
        MissionCommand::Replay { trace, grid, out } => {
            let text = read(&trace)?;
            let t = uavcheck::checker::Trace::from_json(&text).map_err(|e| anyhow!("{}: {e}", trace.display()))?;
            let model = build_mission_kripke(&grid.load()?)?;
            let r = replay(&t, &model, &ReplayOptions::default()).map_err(|e| anyhow!("{}: {e}", trace.display()))?;
            let csv_path = out.unwrap_or_else(|| default_out("replay.csv"));
            write(&csv_path, &export_csv(std::slice::from_ref(&r.track)))?;
            let json_path = csv_path.with_extension("json");
            write(&json_path, &serde_json::to_string_pretty(&r)?)?;
            let cells: Vec<String> = r.cells.iter().map(|c| c.to_string()).collect();
            out!("replayed {} steps: {}", t.len(), cells.join(" -> "));
            if r.track.deadlocked {
                out!("UAV deadlocked: no free neighbour cell");
            }
            out!(
                "{} threat markers; trajectory written to {} and {}",
                r.markers.len(),
                csv_path.display(),
                json_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_dubins(a: DubinsArgs) -> Result<ExitCode> {
    let start: Pose = a.start.parse().context("--start")?;
    let end: Pose = a.end.parse().context("--end")?;
    let words: Words = a.words.parse()?;
    let path = plan_with(start, end, a.radius, words)?;
    let mut csv = String::from("s,x,y,theta\n");
    for s in path.sample(a.step)? {
        csv.push_str(&format!("{:.6},{:.6},{:.6},{:.6}\n", s.s, s.pose.x, s.pose.y, s.pose.theta));
    }
    match a.out {
        Some(p) => {
            write(&p, &csv)?;
            out!("{} path, length {:.6}, written to {}", path.word, path.length(), p.display());
        }
        None => {
            use std::io::Write as _;
            let _ = std::io::stdout().write_all(csv.as_bytes());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Mission(m) => cmd_mission(m),
        Command::Dubins(a) => cmd_dubins(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

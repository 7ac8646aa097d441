use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmwpc::channel::generate_scenario;
use mmwpc::complexity::complexity_report;
use mmwpc::experiment::{
    emit_results, run_experiment, Emit, ExperimentSpec, ResultTable, RowStatus, Sweep,
};
use mmwpc::model::Mode;
use mmwpc::optimizer::{run_variant, OptimizerSettings, Variant};
use std::path::PathBuf;
use std::process::ExitCode;

/// Max-min rate design for relay and active-IRS wireless powered links.
#[derive(Parser)]
#[command(name = "mmwpc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant per seed and write results plus traces.
    Run(Common),
    /// Run the sweep described by a spec file.
    Sweep(Common),
    /// Print per-step cost orders for the scenario.
    Complexity {
        #[command(flatten)]
        common: Common,
        /// Also time one run of each variant on the first seed.
        #[arg(long)]
        measure: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec. Without it the built-in profile is used.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory (overrides the spec).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds as `a..b`, `a,b,c` or a single number.
    #[arg(long)]
    seeds: Option<String>,
    /// full, t_static, t_f_static (relay only), baseline1 or baseline2.
    #[arg(long)]
    variant: Option<Variant>,
    /// relay or irs. With --spec only the mode field of the scenario changes.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    #[arg(long, value_enum)]
    emit: Option<EmitArg>,
    /// Fill the ms column (makes outputs run dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitArg {
    Csv,
    Json,
    Both,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        (a..b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("seed list `{s}` is empty");
    }
    Ok(seeds)
}

fn load_spec(c: &Common, need_file: bool) -> Result<ExperimentSpec> {
    let mut spec = match &c.spec {
        Some(p) => ExperimentSpec::from_file(p)?,
        None if need_file => bail!("`sweep` needs --spec"),
        None => {
            let mode = c.mode.unwrap_or(Mode::Relay);
            match c.profile {
                Profile::Desk => ExperimentSpec::desk(mode),
                Profile::Full => ExperimentSpec::full_scale(mode),
            }
        }
    };
    if let Some(m) = c.mode {
        spec.scenario.mode = m;
    }
    if let Some(s) = &c.seeds {
        spec.seeds = parse_seeds(s).with_context(|| format!("bad --seeds `{s}`"))?;
    }
    if let Some(v) = c.variant {
        spec.variant = v;
    }
    if let Some(o) = &c.out {
        spec.outputs = o.clone();
    }
    if let Some(e) = c.emit {
        spec.emit = match e {
            EmitArg::Csv => Emit::Csv,
            EmitArg::Json => Emit::Json,
            EmitArg::Both => Emit::Both,
        };
    }
    spec.emit_timing |= c.timing;
    Ok(spec)
}

fn finish(spec: &ExperimentSpec, table: &ResultTable) -> Result<ExitCode> {
    let files = emit_results(table, spec.emit, &spec.outputs, spec.traces)?;
    for a in table.aggregates() {
        let mean = a.mean.map_or("-".to_string(), |m| format!("{m:.6}"));
        let se = a.stderr.map_or("-".to_string(), |s| format!("{s:.6}"));
        println!(
            "{}={}: mean min-rate {} (stderr {}, {}/{} feasible)",
            table.axis, a.sweep, mean, se, a.feasible, a.seeds
        );
    }
    for r in table.rows.iter().filter(|r| r.status != RowStatus::Ok) {
        eprintln!(
            "{} seed {}: {:?}: {}",
            r.sweep,
            r.seed,
            r.status,
            r.message.as_deref().unwrap_or("")
        );
    }
    println!("wrote {} files to {}", files.len(), spec.outputs.display());
    let ok = table.count(RowStatus::Ok);
    Ok(if ok > 0 {
        ExitCode::SUCCESS
    } else if table.count(RowStatus::Error) == 0 {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    })
}

fn complexity(c: &Common, measure: bool) -> Result<ExitCode> {
    let spec = load_spec(c, false)?;
    let cfg = spec.scenario.to_config()?;
    let mut traces = Vec::new();
    if measure {
        let ch = generate_scenario(&cfg, &spec.geometry, spec.seeds[0]);
        for v in Variant::ALL {
            if v == Variant::TFStatic && cfg.mode == Mode::ActiveIrs {
                continue;
            }
            let s = OptimizerSettings {
                variant: v,
                ..spec.optimizer
            };
            match run_variant(&ch, &cfg, &s) {
                Ok((_, t)) => traces.push((v, t)),
                Err(e) => eprintln!("{}: {e}", v.name()),
            }
        }
    }
    let refs: Vec<(Variant, &_)> = traces.iter().map(|(v, t)| (*v, t)).collect();
    print!("{}", complexity_report(&cfg, &refs));
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Run(c) => {
            let mut spec = load_spec(&c, false)?;
            spec.sweep = Sweep::Variant(vec![spec.variant]);
            spec.traces = true;
            let table = run_experiment(&spec)?;
            finish(&spec, &table)
        }
        Command::Sweep(c) => {
            let spec = load_spec(&c, true)?;
            let table = run_experiment(&spec)?;
            finish(&spec, &table)
        }
        Command::Complexity { common, measure } => complexity(&common, measure),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

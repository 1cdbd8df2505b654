//! Command-line driver: configuration, study dispatch and output files.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use log::info;
use sewave::ensemble::{
    mms_study, noise_stats_study, single_run, spatial_convergence_study, temporal_convergence_study, write_gnuplot,
    write_rate_csv, StudyConfig, StudyKind, StudyReport, COLUMNS,
};
use sewave::stepper::Trajectory;

pub const THREADS_ENV: &str = "SEWAVE_THREADS";
pub const MANIFEST: &str = "manifest.txt";
pub const LOG: &str = "sewave.log";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("study failed: {0}")]
    Study(sewave::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Study(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<sewave::Error> for CliError {
    fn from(e: sewave::Error) -> Self {
        match e {
            sewave::Error::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Study(other),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Subcommand name and the study it runs.
pub const COMMANDS: &[(&str, StudyKind, &str)] = &[
    ("converge-time", StudyKind::Temporal, "temporal convergence table on a fixed mesh"),
    ("converge-space", StudyKind::Spatial, "spatial convergence table at a fixed step"),
    ("mms", StudyKind::Mms, "manufactured-solution check against an exact field"),
    ("noise-stats", StudyKind::NoiseStats, "moment laws of the per-step increments"),
    ("single-run", StudyKind::SingleRun, "one trajectory with checkpoints and energy diagnostics"),
];

pub fn command() -> Command {
    let mut root = Command::new("sewave")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Monte Carlo convergence studies for a stochastic elastic wave equation")
        .after_help(format!(
            "Environment: {THREADS_ENV}=N sets the worker count (default: all cores).\n\
             Exit codes: 0 ok, 1 configuration error, 2 study failure, 3 i/o error."
        ))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, _, about) in COMMANDS {
        root = root.subcommand(subcommand(name, about));
    }
    root
}

fn subcommand(name: &'static str, about: &'static str) -> Command {
    let mut c = Command::new(name)
        .about(about)
        .after_help(
            "Configuration files hold one `key = value` per line with the keys above \
             (underscores instead of dashes); `#` starts a comment. Flags override the file. \
             Steps are written 1/N with N a power of two.",
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value configuration file; a manifest of an earlier run works too"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .default_value("sewave-out")
                .help("output directory, created if missing"),
        );
    for key in config::SCHEMA {
        c = c.arg(
            Arg::new(key.name)
                .long(config::flag_name(key.name))
                .value_name(key.syntax)
                .action(ArgAction::Set)
                .help(key.help),
        );
    }
    c
}

/// Parses `args` (program name first), runs the study and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sewave: {e}");
            log::error!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(m: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = m.subcommand().ok_or_else(|| CliError::Config("missing command".into()))?;
    let &(_, kind, _) = COMMANDS
        .iter()
        .find(|c| c.0 == name)
        .ok_or_else(|| CliError::Config(format!("unknown command {name}")))?;
    let file = match sub.get_one::<String>("config") {
        Some(p) => config::read_file(Path::new(p))?,
        None => Default::default(),
    };
    let overrides: Vec<(String, String)> = config::SCHEMA
        .iter()
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let mut cfg = config::resolve(kind, &file, &overrides)?;
    cfg.threads = threads_from_env()?;
    let out = PathBuf::from(sub.get_one::<String>("out").expect("has default"));
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    init_logging(&out.join(LOG))?;
    run(name, &cfg, &out)
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} = '{v}' is not a thread count"))),
        Err(_) => Ok(0),
    }
}

struct Tee(File);

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        self.0.write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()?;
        self.0.flush()
    }
}

fn init_logging(path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .parse_env("SEWAVE_LOG")
        .target(env_logger::Target::Pipe(Box::new(Tee(file))))
        .try_init();
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Runs study `name` with `cfg` and writes its files and manifest into `out`.
pub fn run(name: &str, cfg: &StudyConfig, out: &Path) -> Result<(), CliError> {
    info!("sewave {} {name}: output to {}", env!("CARGO_PKG_VERSION"), out.display());
    for line in config::render(cfg).lines() {
        info!("  {line}");
    }
    let outputs = match cfg.kind {
        StudyKind::Temporal => {
            let r = temporal_convergence_study(cfg)?;
            rate_outputs(&r, out)?
        }
        StudyKind::Spatial => {
            let r = spatial_convergence_study(cfg)?;
            rate_outputs(&r, out)?
        }
        StudyKind::Mms => {
            let r = mms_study(cfg)?;
            rate_outputs(&r, out)?
        }
        StudyKind::NoiseStats => {
            let r = noise_stats_study(cfg)?;
            write_file(&out.join("noise_stats.csv"), |w| r.write_csv(w))?;
            for row in &r.rows {
                info!(
                    "{}: slope {:.3} target [{}, {}] {}",
                    row.name,
                    row.slope,
                    row.target.0,
                    row.target.1,
                    if row.pass { "ok" } else { "outside" }
                );
            }
            info!("tilde ratio per level {:?}, cross ratio per level {:?}", r.tilde_ratio, r.cross_ratio);
            vec!["noise_stats.csv".to_string()]
        }
        StudyKind::SingleRun => {
            let diag = out.join("diagnostics.csv");
            let mut w = create(&diag)?;
            let traj = single_run(cfg, Some(&mut w))?;
            w.flush().map_err(io_err(&diag))?;
            write_file(&out.join("checkpoints.csv"), |w| write_checkpoints(&traj, w))?;
            let last = traj.reports.last().map(|r| r.energies.j).unwrap_or(f64::NAN);
            info!("{} steps, final J = {last:.6e}", traj.reports.len());
            vec!["checkpoints.csv".to_string(), "diagnostics.csv".to_string()]
        }
    };
    write_manifest(name, cfg, &outputs, &out.join(MANIFEST))?;
    info!("done");
    Ok(())
}

fn rate_outputs(r: &StudyReport, out: &Path) -> Result<Vec<String>, CliError> {
    info!("reference: {}", r.reference);
    info!("max Picard iterations per level: {:?}", r.max_picard);
    for (k, c) in COLUMNS.iter().enumerate() {
        match r.table.observed_order(k) {
            Some(o) => info!("{c} observed order {o:.3}"),
            None => info!("{c} observed order unavailable"),
        }
    }
    if r.table.failed_samples > 0 {
        info!("{} of {} samples failed and were dropped", r.table.failed_samples, r.table.samples + r.table.failed_samples);
    }
    write_file(&out.join("rates.csv"), |w| write_rate_csv(&r.table, w))?;
    write_file(&out.join("rates.dat"), |w| write_gnuplot(&r.table, w))?;
    let mut files = vec!["rates.csv".to_string(), "rates.dat".to_string()];
    if !r.energy.is_empty() {
        write_file(&out.join("energy.csv"), |w| {
            writeln!(w, "tau,step,t,mean_J")?;
            for e in &r.energy {
                for (i, j) in e.mean_j.iter().enumerate() {
                    let n = i + 1;
                    writeln!(w, "{},{n},{:.10e},{j:.10e}", e.step, n as f64 * e.step.tau())?;
                }
            }
            Ok(())
        })?;
        files.push("energy.csv".to_string());
    }
    Ok(files)
}

fn write_checkpoints(traj: &Trajectory, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "step,t,vertex,x,y,u1,u2,v1,v2")?;
    for c in &traj.checkpoints {
        let mesh = c.u.dofmap().mesh().clone();
        for (i, p) in mesh.vertices().iter().enumerate() {
            let (u, v) = (c.u.at_vertex(i), c.v.at_vertex(i));
            writeln!(
                w,
                "{},{:.10e},{i},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                c.n, c.t, p[0], p[1], u[0], u[1], v[0], v[1]
            )?;
        }
    }
    Ok(())
}

/// The resolved configuration as `key = value` lines, preceded by comment
/// lines with version, command, timestamp and outputs. Passing it back with
/// `--config` reproduces the outputs.
pub fn manifest_text(name: &str, cfg: &StudyConfig, outputs: &[String]) -> String {
    format!(
        "# sewave {}\n# command: {name}\n# timestamp: {}\n# outputs: {}\n{}",
        env!("CARGO_PKG_VERSION"),
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        outputs.join(" "),
        config::render(cfg)
    )
}

fn write_manifest(name: &str, cfg: &StudyConfig, outputs: &[String], path: &Path) -> Result<(), CliError> {
    let text = manifest_text(name, cfg, outputs);
    std::fs::write(path, text).map_err(io_err(path))
}

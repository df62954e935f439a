//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/parse/I-O error, 2 simulation abort,
//! 3 failed validation. Metrics go to standard output as `key = value` lines.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::scenario::{emit_plot_script, parse_scenario, write_csv, Preset};
use crate::sim::{metrics, run_closed_loop, Metrics, Scenario, TimeSeriesRecord};
use crate::validate::{self, ValidateOptions};

/// Relative output paths are resolved under this directory when it is set.
pub const OUT_DIR_ENV: &str = "BOOST_IPI_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "boost-ipi",
    version,
    about = "Model-free control of a boost DC-DC converter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file and write its time series as CSV.
    Run {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long)]
        plot: bool,
        /// Relative settling band.
        #[arg(long, default_value_t = 0.02)]
        band: f64,
    },
    /// Run a built-in scenario (fig2..fig5), or export it as a scenario file.
    Preset {
        name: String,
        #[arg(
            short,
            long,
            required_unless_present = "export",
            conflicts_with = "export"
        )]
        out: Option<PathBuf>,
        /// Write the preset as a scenario file instead of running it.
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long, conflicts_with = "export")]
        plot: bool,
        #[arg(long, default_value_t = 0.02, conflicts_with = "export")]
        band: f64,
    },
    /// Run a scenario over evenly spaced values of one parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        band: f64,
    },
    /// Run the built-in cross-model oracle checks.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    R,
    Alpha,
    Kp,
    Ki,
    E,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::R => "r",
            SweepParam::Alpha => "alpha",
            SweepParam::Kp => "kp",
            SweepParam::Ki => "ki",
            SweepParam::E => "e",
        }
    }

    pub fn apply(self, scenario: &mut Scenario, value: f64) {
        match self {
            SweepParam::R => scenario.plant.resistance = value,
            SweepParam::Alpha => scenario.controller.alpha = value,
            SweepParam::Kp => scenario.controller.kp = value,
            SweepParam::Ki => scenario.controller.ki = value,
            SweepParam::E => scenario.plant.input_voltage = value,
        }
    }
}

/// Process-level context that commands read instead of global state.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub out_dir: Option<PathBuf>,
    pub validate: ValidateOptions,
}

impl Context {
    pub fn from_env() -> Self {
        Self {
            out_dir: std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
            validate: ValidateOptions::default(),
        }
    }

    fn output_path(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, ctx: &Context, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_PARSE
            } else {
                EXIT_OK
            };
            let rendered = err.render().to_string();
            if err.use_stderr() {
                let _ = write!(io.err, "{rendered}");
            } else {
                let _ = write!(io.out, "{rendered}");
            }
            return code;
        }
    };
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            plot,
            band,
        } => cmd_run(ctx, io, &scenario, &out, plot, band),
        Command::Preset {
            name,
            out,
            export,
            plot,
            band,
        } => match (out, export) {
            (_, Some(path)) => cmd_export(ctx, io, &name, &path),
            (Some(out), None) => cmd_preset(ctx, io, &name, &out, plot, band),
            (None, None) => EXIT_PARSE,
        },
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            steps,
            out_dir,
            band,
        } => cmd_sweep(ctx, io, &scenario, param, from, to, steps, &out_dir, band),
        Command::Validate => cmd_validate(ctx, io),
    };
    let _ = io.out.flush();
    code
}

fn fail(io: &mut Io<'_>, code: i32, message: impl std::fmt::Display) -> i32 {
    let _ = writeln!(io.err, "error: {message}");
    code
}

fn simulation_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } | Error::NonFinite(_) => EXIT_SIMULATION,
        _ => EXIT_PARSE,
    }
}

fn read_scenario(path: &Path) -> Result<Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_series(path: &Path, series: &[TimeSeriesRecord]) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    write_csv(series, file).map_err(|e| match e {
        Error::Io(io) => io,
        other => std::io::Error::other(other.to_string()),
    })?;
    Ok(())
}

fn write_plot(csv: &Path, scenario: &Scenario) -> std::io::Result<PathBuf> {
    let script = csv.with_extension("gp");
    let svg = csv.with_extension("svg");
    let events: Vec<f64> = scenario.events.iter().map(|e| e.time).collect();
    let text = emit_plot_script(&csv.to_string_lossy(), &svg.to_string_lossy(), &events);
    fs::write(&script, text)?;
    Ok(script)
}

fn fmt_option(value: Option<f64>) -> String {
    value.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn print_metrics(out: &mut dyn Write, m: &Metrics) -> std::io::Result<()> {
    writeln!(out, "steady_state_error = {}", m.steady_state_error)?;
    writeln!(out, "settled = {}", m.settled())?;
    writeln!(out, "settling_time = {}", fmt_option(m.settling_time))?;
    writeln!(out, "max_deviation = {}", m.max_deviation)?;
    for event in &m.events {
        writeln!(
            out,
            "max_deviation_after_{} = {}",
            event.time, event.max_deviation
        )?;
    }
    writeln!(out, "mode_switches = {}", m.mode_switches)
}

fn simulate_and_report(
    ctx: &Context,
    io: &mut Io<'_>,
    scenario: &Scenario,
    out: &Path,
    plot: bool,
    band: f64,
) -> i32 {
    let series = match run_closed_loop(scenario) {
        Ok(s) => s,
        Err(err) => return fail(io, simulation_code(&err), err),
    };
    let summary = match metrics(&series, band) {
        Ok(m) => m,
        Err(err) => return fail(io, EXIT_PARSE, err),
    };
    let out = ctx.output_path(out);
    if let Err(err) = write_series(&out, &series) {
        return fail(io, EXIT_PARSE, format!("{}: {err}", out.display()));
    }
    if plot {
        match write_plot(&out, scenario) {
            Ok(script) => {
                let _ = writeln!(io.out, "plot_script = {}", script.display());
            }
            Err(err) => return fail(io, EXIT_PARSE, err),
        }
    }
    let _ = writeln!(io.out, "csv = {}", out.display());
    let _ = writeln!(io.out, "records = {}", series.len());
    let _ = print_metrics(io.out, &summary);
    EXIT_OK
}

pub fn cmd_run(
    ctx: &Context,
    io: &mut Io<'_>,
    scenario: &Path,
    out: &Path,
    plot: bool,
    band: f64,
) -> i32 {
    match read_scenario(scenario) {
        Ok(sc) => simulate_and_report(ctx, io, &sc, out, plot, band),
        Err(msg) => fail(io, EXIT_PARSE, msg),
    }
}

pub fn cmd_preset(
    ctx: &Context,
    io: &mut Io<'_>,
    name: &str,
    out: &Path,
    plot: bool,
    band: f64,
) -> i32 {
    match name.parse::<Preset>() {
        Ok(p) => simulate_and_report(ctx, io, &p.scenario(), out, plot, band),
        Err(err) => fail(io, EXIT_PARSE, err),
    }
}

pub fn cmd_export(ctx: &Context, io: &mut Io<'_>, name: &str, path: &Path) -> i32 {
    let preset = match name.parse::<Preset>() {
        Ok(p) => p,
        Err(err) => return fail(io, EXIT_PARSE, err),
    };
    let path = ctx.output_path(path);
    let text = format!("# preset {preset}\n{}", preset.scenario());
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(err) = fs::create_dir_all(parent) {
            return fail(io, EXIT_PARSE, err);
        }
    }
    match fs::write(&path, text) {
        Ok(()) => {
            let _ = writeln!(io.out, "scenario = {}", path.display());
            EXIT_OK
        }
        Err(err) => fail(io, EXIT_PARSE, format!("{}: {err}", path.display())),
    }
}

/// Evenly spaced sweep values, ending exactly at `to`.
pub fn sweep_values(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    ctx: &Context,
    io: &mut Io<'_>,
    scenario: &Path,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: usize,
    out_dir: &Path,
    band: f64,
) -> i32 {
    if steps < 2 {
        return fail(io, EXIT_PARSE, "a sweep needs at least 2 steps");
    }
    if !(from.is_finite() && to.is_finite()) {
        return fail(io, EXIT_PARSE, "sweep bounds must be finite");
    }
    let base = match read_scenario(scenario) {
        Ok(sc) => sc,
        Err(msg) => return fail(io, EXIT_PARSE, msg),
    };
    let values = sweep_values(from, to, steps);
    let mut runs = Vec::with_capacity(values.len());
    for &value in &values {
        let mut sc = base.clone();
        param.apply(&mut sc, value);
        if let Err(err) = sc.validate() {
            return fail(io, EXIT_PARSE, format!("{} = {value}: {err}", param.name()));
        }
        runs.push(sc);
    }

    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|sc| {
                scope.spawn(move || {
                    let series = run_closed_loop(sc)?;
                    let summary = metrics(&series, band)?;
                    Ok::<_, Error>((series, summary))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let dir = ctx.output_path(out_dir);
    if let Err(err) = fs::create_dir_all(&dir) {
        return fail(io, EXIT_PARSE, format!("{}: {err}", dir.display()));
    }
    let mut summary = String::from(
        "param,value,steady_state_error,settled,settling_time,max_deviation,mode_switches\n",
    );
    let mut aborted = 0;
    let mut settled = 0;
    for (value, result) in values.iter().zip(results) {
        let name = param.name();
        match result {
            Ok((series, m)) => {
                let path = dir.join(format!("{name}_{value}.csv"));
                if let Err(err) = write_series(&path, &series) {
                    return fail(io, EXIT_PARSE, format!("{}: {err}", path.display()));
                }
                settled += usize::from(m.settled());
                summary.push_str(&format!(
                    "{name},{value},{},{},{},{},{}\n",
                    m.steady_state_error,
                    m.settled(),
                    m.settling_time.map_or_else(String::new, |t| t.to_string()),
                    m.max_deviation,
                    m.mode_switches
                ));
            }
            Err(err) => {
                aborted += 1;
                let _ = writeln!(io.err, "error: {name} = {value}: {err}");
            }
        }
    }
    let summary_path = dir.join("summary.csv");
    if let Err(err) = fs::write(&summary_path, summary) {
        return fail(io, EXIT_PARSE, format!("{}: {err}", summary_path.display()));
    }
    let _ = writeln!(io.out, "summary = {}", summary_path.display());
    let _ = writeln!(io.out, "runs = {}", values.len());
    let _ = writeln!(io.out, "settled_runs = {settled}");
    let _ = writeln!(io.out, "aborted_runs = {aborted}");
    if aborted > 0 {
        EXIT_SIMULATION
    } else {
        EXIT_OK
    }
}

pub fn cmd_validate(ctx: &Context, io: &mut Io<'_>) -> i32 {
    let results = validate::run_all(&ctx.validate);
    let mut failed = Vec::new();
    for check in &results {
        let verdict = if check.passed { "pass" } else { "FAIL" };
        let _ = writeln!(io.out, "{} = {verdict}  # {}", check.name, check.detail);
        if !check.passed {
            failed.push(check.name);
        }
    }
    let _ = writeln!(io.out, "passed = {}", results.len() - failed.len());
    let _ = writeln!(io.out, "failed = {}", failed.len());
    if failed.is_empty() {
        EXIT_OK
    } else {
        let _ = writeln!(io.err, "failed checks: {}", failed.join(", "));
        EXIT_VALIDATION
    }
}

/// Entry point for the binary.
pub fn run_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let mut io = Io {
        out: &mut out,
        err: &mut err,
    };
    main_with_args(std::env::args_os(), &Context::from_env(), &mut io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_are_even_and_hit_the_end() {
        assert_eq!(
            sweep_values(50.0, 200.0, 4),
            vec![50.0, 100.0, 150.0, 200.0]
        );
        assert_eq!(sweep_values(0.1, 0.3, 3).last(), Some(&0.3));
    }

    #[test]
    fn out_dir_override_only_for_relative_paths() {
        let ctx = Context {
            out_dir: Some(PathBuf::from("/tmp/base")),
            ..Context::default()
        };
        assert_eq!(
            ctx.output_path(Path::new("a.csv")),
            PathBuf::from("/tmp/base/a.csv")
        );
        assert_eq!(
            ctx.output_path(Path::new("/abs/a.csv")),
            PathBuf::from("/abs/a.csv")
        );
    }

    #[test]
    fn conflicting_preset_options_rejected() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut io = Io {
            out: &mut out,
            err: &mut err,
        };
        let code = main_with_args(
            [
                "boost-ipi",
                "preset",
                "fig2",
                "--out",
                "a.csv",
                "--export",
                "b.txt",
            ],
            &Context::default(),
            &mut io,
        );
        assert_eq!(code, EXIT_PARSE);
        let code = main_with_args(
            ["boost-ipi", "preset", "fig2"],
            &Context::default(),
            &mut io,
        );
        assert_eq!(code, EXIT_PARSE);
        let code = main_with_args(["boost-ipi"], &Context::default(), &mut io);
        assert_eq!(code, EXIT_PARSE);
    }
}

mod args;
mod commands;
mod dist;
mod error;
mod grid;
mod output;
mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use tailbound::lr_bounds::BoundConfig;

use args::{Cli, Command, Common, Format, SampleSizeCommand};
use error::{CliError, EXIT_OK, EXIT_USAGE, EXIT_VALIDITY};
use output::{write_report, Report};

fn leaf(matches: &ArgMatches) -> (Vec<String>, &ArgMatches) {
    let mut names = Vec::new();
    let mut current = matches;
    while let Some((name, sub)) = current.subcommand() {
        names.push(name.to_string());
        current = sub;
    }
    (names, current)
}

fn toml_token(key: &str, value: &toml::Value) -> Result<String, CliError> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(CliError::Usage(format!("config key {key:?} must be a string, number or boolean"))),
    }
}

/// Flags taken from the `--config` file for every key that was not given on
/// the command line.
fn config_flags(path: &Path, names: &[String], matches: &ArgMatches) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {} is not valid TOML: {e}", path.display())))?;
    let mut command = Cli::command();
    for name in names {
        command = command
            .find_subcommand(name)
            .cloned()
            .expect("subcommand names come from the parsed matches");
    }
    let mut flags = Vec::new();
    for (key, value) in &table {
        let id = key.replace('-', "_");
        let arg = command
            .get_arguments()
            .find(|a| a.get_id().as_str() == id && id != "config")
            .ok_or_else(|| CliError::Usage(format!("unknown config key {key:?} for `{}`", names.join(" "))))?;
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = arg.get_long().expect("every flag has a long form");
        flags.push(format!("--{long}").into());
        flags.push(toml_token(key, value)?.into());
    }
    Ok(flags)
}

enum Parsed {
    Run(Box<Cli>),
    Exit(i32),
}

fn clap_exit(err: clap::Error) -> Parsed {
    let _ = err.print();
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Parsed::Exit(EXIT_OK),
        _ => Parsed::Exit(EXIT_USAGE),
    }
}

/// The command tree with no required flags, for the pass that only looks
/// for `--config`.
fn lenient(command: clap::Command) -> clap::Command {
    let names: Vec<String> = command.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let mut command = command.mut_args(|a| a.required(false));
    for name in names {
        command = command.mut_subcommand(name, lenient);
    }
    command
}

fn parse(argv: Vec<OsString>) -> Result<Parsed, CliError> {
    let matches = match lenient(Cli::command()).try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return Ok(clap_exit(e)),
    };
    let (names, leaf_matches) = leaf(&matches);
    let config = leaf_matches.get_one::<std::path::PathBuf>("config").cloned();
    let mut full = argv;
    if let Some(path) = config {
        full.extend(config_flags(&path, &names, leaf_matches)?);
    }
    let matches = match Cli::command().try_get_matches_from(&full) {
        Ok(m) => m,
        Err(e) => return Ok(clap_exit(e)),
    };
    match Cli::from_arg_matches(&matches) {
        Ok(cli) => Ok(Parsed::Run(Box::new(cli))),
        Err(e) => Ok(clap_exit(e)),
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Bound(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::SampleSize(SampleSizeCommand::BinomialAbs(a)) => &a.common,
        Command::SampleSize(SampleSizeCommand::InverseBinomial(a)) => &a.common,
        Command::SampleSize(SampleSizeCommand::GammaRel(a)) => &a.common,
        Command::Ci(a) => &a.common,
        Command::Region(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Figure(a) => &a.common,
    }
}

fn execute(command: &Command, config: &BoundConfig) -> Result<Report, CliError> {
    match command {
        Command::Bound(a) => commands::bound(a, config),
        Command::Compare(a) => commands::compare(a, config),
        Command::SampleSize(SampleSizeCommand::BinomialAbs(a)) => commands::sample_size_binomial(a, config),
        Command::SampleSize(SampleSizeCommand::InverseBinomial(a)) => commands::sample_size_inverse(a, config),
        Command::SampleSize(SampleSizeCommand::GammaRel(a)) => commands::sample_size_gamma(a, config),
        Command::Ci(a) => commands::ci(a),
        Command::Region(a) => commands::region(a),
        Command::Verify(a) => verify::verify(a, config),
        Command::Figure(a) => commands::figure(a, config),
    }
}

fn run(argv: Vec<OsString>) -> Result<i32, CliError> {
    let cli = match parse(argv)? {
        Parsed::Run(cli) => cli,
        Parsed::Exit(code) => return Ok(code),
    };
    let (config, warning) = BoundConfig::from_env()?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    let default_format = match cli.command {
        Command::Figure(_) => Format::Csv,
        _ => Format::Json,
    };
    let format = common(&cli.command).format.unwrap_or(default_format);
    let report = execute(&cli.command, &config)?;
    let mut stdout = std::io::stdout().lock();
    write_report(&report, format, &mut stdout)?;
    stdout.flush()?;
    for line in &report.summary {
        eprintln!("{line}");
    }
    Ok(if report.validity_failed { EXIT_VALIDITY } else { EXIT_OK })
}

fn main() {
    let code = match run(std::env::args_os().collect()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == EXIT_USAGE {
                eprintln!("run `tailbound --help` for usage");
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}

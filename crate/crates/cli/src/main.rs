//! `ike-sim`: run handshakes, attack scenarios, the mode comparison and
//! test-vector generation from the command line.
//!
//! Exit codes: 0 expected outcome, 1 unexpected protocol outcome (or an
//! output error), 2 usage error.

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ike_ecc::codec::ExchangeMode;
use ike_ecc::curve::CurveId;
use ike_ecc::sim::{self, Adversary, Records, Scenario, COMPARE_HEADERS};
use ike_ecc::vectors;

#[derive(Parser, Debug)]
#[command(name = "ike-sim", version, about = "Phase-1 key exchange simulator over Koblitz curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// K-163, K-233, K-283, K-409 or K-571.
    #[arg(long, global = true, default_value = "K-233", value_parser = parse_curve)]
    curve: CurveId,

    /// baseline (6 messages) or improved (5 messages).
    #[arg(long, global = true, default_value = "improved", value_parser = parse_mode)]
    mode: ExchangeMode,

    /// Fixes every random choice of the run.
    #[arg(long, global = true, env = "IKE_SIM_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One honest exchange: transcript and key fingerprints.
    Handshake,
    /// Run an adversary scenario and check its expected outcome.
    Attack {
        /// none, passive_eavesdrop, mitm_ke_swap, tamper_sweep, flood[:N]
        #[arg(long, value_parser = parse_scenario)]
        scenario: Adversary,
    },
    /// Both modes side by side with live counters and scenario results.
    Compare,
    /// Hex vectors for field ops, scalar mults, SKEYID chains and HASHes.
    Vectors,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

fn parse_curve(s: &str) -> Result<CurveId, String> {
    match CurveId::from_name(s) {
        Ok(id) if CurveId::KOBLITZ.contains(&id) => Ok(id),
        _ => Err(format!("unknown curve {s:?} (expected K-163, K-233, K-283, K-409 or K-571)")),
    }
}

fn parse_mode(s: &str) -> Result<ExchangeMode, String> {
    s.parse()
}

fn parse_scenario(s: &str) -> Result<Adversary, String> {
    s.parse()
}

fn compare_output(cli: &Cli) -> String {
    let rows = sim::compare(cli.curve, cli.seed);
    match cli.format {
        Format::Records => {
            let mut out = Records::default();
            for row in &rows {
                let mut fields = vec![
                    ("record", "compare".to_string()),
                    ("mode", row.mode.to_string()),
                    ("curve", cli.curve.name().to_string()),
                    ("seed", cli.seed.to_string()),
                ];
                let keys = [
                    "protocol",
                    "key_exchange",
                    "signatures",
                    "hash_use",
                    "messages",
                    "public_key_applying",
                    "secret_key_use",
                    "id_protection",
                    "dos_prevention",
                    "sa_protection",
                    "ec_group",
                    "devices",
                ];
                fields.extend(keys.into_iter().zip(row.cells()).skip(1));
                out.line(&fields);
            }
            out.0
        }
        Format::Text => {
            let cells: Vec<[String; 12]> = rows.iter().map(|r| r.cells()).collect();
            let width = |i: usize| {
                cells
                    .iter()
                    .map(|c| c[i].chars().count())
                    .chain([COMPARE_HEADERS[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            };
            let widths: Vec<usize> = (0..12).map(width).collect();
            let line = |vals: Vec<&str>| {
                let padded: Vec<String> = vals
                    .iter()
                    .zip(&widths)
                    .map(|(v, w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
                    .collect();
                padded.join(" | ").trim_end().to_string() + "\n"
            };
            let mut out = format!("comparison on {} (seed {})\n", cli.curve.name(), cli.seed);
            out += &line(COMPARE_HEADERS.to_vec());
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out += &line(rule.iter().map(String::as_str).collect());
            for c in &cells {
                out += &line(c.iter().map(String::as_str).collect());
            }
            out
        }
    }
}

fn execute(cli: &Cli) -> (String, bool) {
    match &cli.command {
        Command::Handshake | Command::Attack { .. } => {
            let adversary = match cli.command {
                Command::Attack { scenario } => scenario,
                _ => Adversary::None,
            };
            let report = sim::run(Scenario { mode: cli.mode, curve: cli.curve, seed: cli.seed, adversary });
            let text = match cli.format {
                Format::Text => report.to_text(),
                Format::Records => report.to_records(),
            };
            (text, report.verdict().expected)
        }
        Command::Compare => (compare_output(cli), true),
        Command::Vectors => (vectors::generate(cli.seed), true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (text, expected) = execute(&cli);
    let written = match &cli.out {
        Some(path) => fs::write(path, &text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("ike-sim: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if expected {
        ExitCode::SUCCESS
    } else {
        eprintln!("ike-sim: unexpected protocol outcome");
        ExitCode::from(1)
    }
}

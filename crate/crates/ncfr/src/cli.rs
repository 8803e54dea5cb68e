//! Command-line front end. Every command writes one JSON document.
//!
//! Exit codes: 0 on success, 2 when a verification fails or a verdict is not
//! certified, 1 on input or library errors (reported as JSON on stderr).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{NcError, Result};
use crate::fejerriesz::{clark_moments, factor_toeplitz_detailed, herglotz_square, verify_factor};
use crate::focktrunc::{entropy_schur, realization_symbol};
use crate::ncparse::{parse, realize_expr};
use crate::realize::{mat_to_rows, RANK_TOL};
use crate::sarason::{classify, sarason, verify_column, Verdict};
use crate::{FMRealization, FreeSeries, MatrixTuple};

#[derive(Parser, Debug)]
#[command(name = "ncfr", version, about = "NC rational functions: realizations, Sarason functions, Fejer-Riesz factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expression to realization.
    Parse(Common),
    /// Evaluate a realization at a matrix point.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Point file in the matrix-tuple schema.
        #[arg(long, conflicts_with = "size")]
        point: Option<PathBuf>,
        /// Size of a seeded random strict row contraction used as the point.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Taylor coefficients up to order N.
    Coeffs(Common),
    /// Minimal realization.
    Minimize(Common),
    /// Inner / non-column-extreme classification.
    Classify(Common),
    /// Sarason outer function with its verification report.
    Sarason(Common),
    /// Fejer-Riesz factor of Re h (or of r*r with --square).
    Factor {
        #[command(flatten)]
        common: Common,
        /// Treat the input as r and factor r(R)*r(R).
        #[arg(long)]
        square: bool,
    },
    /// Entropy table eps_1..eps_N of a symbol.
    Entropy {
        #[command(flatten)]
        common: Common,
        /// Treat the input as b and use the symbol of I - b(R)*b(R).
        #[arg(long)]
        defect: bool,
    },
    /// Clark moments of b up to word length N.
    Clark(Common),
    /// Check that the column (b; a) is inner.
    Verify(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Alphabet size (inferred from the expression when omitted).
    #[arg(short = 'd')]
    d: Option<usize>,
    /// Truncation order.
    #[arg(short = 'N', default_value_t = 8)]
    order: usize,
    #[arg(long, default_value_t = 1e-8, allow_hyphen_values = true)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compact JSON (the default).
    #[arg(long, conflicts_with = "pretty")]
    json: bool,
    #[arg(long)]
    pretty: bool,
    /// Inline expression; `verify` takes "b ; a".
    #[arg(short = 'e', required_unless_present = "file", conflicts_with = "file", allow_hyphen_values = true)]
    expr: Option<String>,
    /// Input file: expression text or JSON (realization, series, or {"b", "a"}).
    #[arg(short = 'f')]
    file: Option<PathBuf>,
    /// Write the result here instead of standard output.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

enum Input {
    Text(String),
    Json(Value),
}

struct Outcome {
    value: Value,
    ok: bool,
}

impl Outcome {
    fn ok(value: Value) -> Self {
        Outcome { value, ok: true }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let detail = e.render().to_string();
            report_error("Usage", detail.trim(), None);
            return 1;
        }
    };
    let common = match &cli.command {
        Command::Parse(c)
        | Command::Coeffs(c)
        | Command::Minimize(c)
        | Command::Classify(c)
        | Command::Sarason(c)
        | Command::Clark(c)
        | Command::Verify(c) => c.clone(),
        Command::Eval { common, .. } | Command::Factor { common, .. } | Command::Entropy { common, .. } => {
            common.clone()
        }
    };
    let outcome = match dispatch(&cli.command, &common) {
        Ok(o) => o,
        Err(e) => {
            report_error(e.kind(), &e.to_string(), e.location());
            return 1;
        }
    };
    let text = if common.pretty {
        serde_json::to_string_pretty(&outcome.value)
    } else {
        serde_json::to_string(&outcome.value)
    }
    .expect("output serializes");
    let written = match &common.output {
        Some(path) => std::fs::write(path, format!("{text}\n")),
        None => writeln!(std::io::stdout(), "{text}"),
    };
    if let Err(e) = written {
        report_error("Io", &e.to_string(), None);
        return 1;
    }
    if outcome.ok {
        0
    } else {
        2
    }
}

fn report_error(kind: &str, detail: &str, location: Option<usize>) {
    let v = json!({ "error": kind, "detail": detail, "location": location });
    eprintln!("{v}");
}

fn dispatch(cmd: &Command, c: &Common) -> Result<Outcome> {
    validate(c)?;
    let input = read_input(c)?;
    match cmd {
        Command::Parse(_) => {
            let Input::Text(text) = &input else {
                return Err(NcError::InvalidInput("parse expects an expression".into()));
            };
            let d = alphabet(c, text);
            Ok(Outcome::ok(realize_expr(&parse(text, d)?, d)?.to_json()))
        }
        Command::Eval { point, size, .. } => {
            let r = realization(c, &input)?;
            let z = match (point, size) {
                (Some(p), _) => MatrixTuple::from_json(&read_json(p)?)?,
                (None, Some(n)) => {
                    let mut g = ChaCha8Rng::seed_from_u64(c.seed);
                    MatrixTuple::random_strict(&mut g, r.d(), *n, 0.9)
                }
                (None, None) => return Err(NcError::InvalidInput("eval needs --point or --size".into())),
            };
            if z.d() != r.d() {
                return Err(NcError::DimensionMismatch(format!("point has d = {}, realization d = {}", z.d(), r.d())));
            }
            let value = r.eval(&z)?;
            Ok(Outcome::ok(json!({ "point": z.to_json(), "value": mat_to_rows(&value) })))
        }
        Command::Coeffs(_) => Ok(Outcome::ok(realization(c, &input)?.series(c.order)?.to_json(false))),
        Command::Minimize(_) => Ok(Outcome::ok(realization(c, &input)?.minimize(RANK_TOL).to_json())),
        Command::Classify(_) => {
            let cl = classify(&realization(c, &input)?);
            let ok = matches!(cl.verdict, Verdict::Inner | Verdict::NonCE);
            Ok(Outcome { value: serde_json::to_value(&cl).expect("classification serializes"), ok })
        }
        Command::Sarason(_) => {
            let b = realization(c, &input)?;
            let a = sarason(&b)?;
            let report = verify_column(&b, &a, c.order, c.tol)?;
            Ok(Outcome { ok: report.pass, value: json!({ "a": a.to_json(), "report": report }) })
        }
        Command::Factor { square, .. } => {
            let r = realization(c, &input)?;
            let h = if *square { herglotz_square(&r)? } else { r };
            let f = factor_toeplitz_detailed(&h)?;
            let report = verify_factor(&h, &f.factor, c.order, c.tol)?;
            Ok(Outcome {
                ok: report.pass,
                value: json!({
                    "herglotz": h.to_json(),
                    "factor": f.factor.to_json(),
                    "sizes": f.sizes(&h),
                    "report": report,
                }),
            })
        }
        Command::Entropy { defect, .. } => {
            let t = symbol(c, &input, *defect)?;
            let table = (1..=c.order)
                .map(|n| {
                    let e = entropy_schur(&t, n)?;
                    Ok(json!({ "n": n, "eps": e.eps, "log_eps": e.log_eps }))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome::ok(json!({ "d": t.d(), "table": table })))
        }
        Command::Clark(_) => Ok(Outcome::ok(clark_moments(&realization(c, &input)?, c.order)?.to_json())),
        Command::Verify(_) => {
            let (b, a) = pair(c, &input)?;
            let report = verify_column(&b, &a, c.order, c.tol)?;
            Ok(Outcome { ok: report.pass, value: serde_json::to_value(&report).expect("report serializes") })
        }
    }
}

fn validate(c: &Common) -> Result<()> {
    if c.d == Some(0) {
        return Err(NcError::InvalidInput("alphabet size must be positive".into()));
    }
    if !(c.tol > 0.0 && c.tol.is_finite()) {
        return Err(NcError::InvalidInput(format!("tolerance must be positive, got {}", c.tol)));
    }
    Ok(())
}

fn read_json(path: &PathBuf) -> Result<Value> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| NcError::InvalidInput(format!("{}: {e}", path.display())))
}

fn read_file(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| NcError::InvalidInput(format!("{}: {e}", path.display())))
}

fn read_input(c: &Common) -> Result<Input> {
    match (&c.expr, &c.file) {
        (Some(e), None) => Ok(Input::Text(e.clone())),
        (None, Some(path)) => {
            let text = read_file(path)?;
            Ok(match serde_json::from_str::<Value>(&text) {
                Ok(v) if v.is_object() => Input::Json(v),
                _ => Input::Text(text.trim().to_string()),
            })
        }
        _ => Err(NcError::InvalidInput("exactly one of -e and -f is required".into())),
    }
}

/// `-d` when given, else the largest variable index in the text (at least 1).
fn alphabet(c: &Common, text: &str) -> usize {
    c.d.unwrap_or_else(|| {
        let bytes = text.as_bytes();
        let mut d = 1;
        for (i, _) in text.match_indices('z') {
            let digits: String = bytes[i + 1..].iter().take_while(|b| b.is_ascii_digit()).map(|&b| b as char).collect();
            if let Ok(j) = digits.parse::<usize>() {
                d = d.max(j);
            }
        }
        d
    })
}

fn check_d(c: &Common, d: usize) -> Result<()> {
    match c.d {
        Some(want) if want != d => Err(NcError::DimensionMismatch(format!("input has d = {d}, -d {want}"))),
        _ => Ok(()),
    }
}

fn realization_from_text(c: &Common, text: &str) -> Result<FMRealization> {
    let d = alphabet(c, text);
    realize_expr(&parse(text, d)?, d)
}

fn realization(c: &Common, input: &Input) -> Result<FMRealization> {
    match input {
        Input::Text(text) => realization_from_text(c, text),
        Input::Json(v) => {
            let r = FMRealization::from_json(v)?;
            check_d(c, r.d())?;
            Ok(r)
        }
    }
}

fn symbol(c: &Common, input: &Input, defect: bool) -> Result<FreeSeries> {
    if defect {
        let b = realization(c, input)?;
        let one = FreeSeries::unit(b.d(), c.order)?;
        return one.sub(&realization_symbol(&b, c.order)?);
    }
    match input {
        Input::Json(v) if v.get("coeffs").is_some() => {
            let s = FreeSeries::from_json(v)?;
            check_d(c, s.d())?;
            Ok(s)
        }
        _ => realization(c, input)?.series(c.order),
    }
}

/// Moves a text position by `off` bytes.
fn shift(e: NcError, off: usize) -> NcError {
    match e {
        NcError::SyntaxError { pos, msg } => NcError::SyntaxError { pos: pos + off, msg },
        NcError::UnknownVariable { name, pos, d } => NcError::UnknownVariable { name, pos: pos + off, d },
        e => e,
    }
}

fn pair(c: &Common, input: &Input) -> Result<(FMRealization, FMRealization)> {
    match input {
        Input::Text(text) => {
            let parts: Vec<&str> = text.split(';').collect();
            if parts.len() != 2 {
                return Err(NcError::InvalidInput("verify expects \"b ; a\"".into()));
            }
            let d = alphabet(c, text);
            let b = realize_expr(&parse(parts[0], d)?, d)?;
            let off = parts[0].len() + 1;
            let a = parse(parts[1], d).map_err(|e| shift(e, off))?;
            let a = realize_expr(&a, d)?;
            Ok((b, a))
        }
        Input::Json(v) => {
            let (Some(b), Some(a)) = (v.get("b"), v.get("a")) else {
                return Err(NcError::InvalidInput("verify file needs \"b\" and \"a\" realizations".into()));
            };
            let b = FMRealization::from_json(b)?;
            let a = FMRealization::from_json(a)?;
            if a.d() != b.d() {
                return Err(NcError::DimensionMismatch("b and a have different alphabets".into()));
            }
            check_d(c, b.d())?;
            Ok((b, a))
        }
    }
}

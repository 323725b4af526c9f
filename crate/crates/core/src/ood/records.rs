use std::fmt::Write as _;

use super::OodError;

pub const CSV_HEADER: &str = "scenario,severity,variant,beta,seed,error,loglik,brier,mi_xz,mi_zy";

/// One row of evaluation results. Information terms are in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub scenario: String,
    pub severity: f64,
    pub variant: String,
    pub beta: f64,
    pub seed: u64,
    pub error: f64,
    /// Mean `ln p(y | x)`, nats.
    pub loglik: f64,
    pub brier: f64,
    pub mi_xz: f64,
    pub mi_zy: f64,
}

/// CSV text: `# key: value` lines for `meta`, the header, then one row per
/// record. Floats use the shortest round-tripping form.
pub fn records_to_csv(records: &[EvalRecord], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario, r.severity, r.variant, r.beta, r.seed, r.error, r.loglik, r.brier, r.mi_xz, r.mi_zy
        );
    }
    out
}

/// Parses [`records_to_csv`] output. Comment lines and blank lines are
/// skipped; columns are located by header name.
pub fn parse_records(text: &str) -> Result<Vec<EvalRecord>, OodError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| OodError::MissingColumn("scenario".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| OodError::MissingColumn(name.into()))
    };
    let idx: Vec<usize> = CSV_HEADER.split(',').map(col).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |message: String| OodError::Csv { line: ln + 1, message };
        if fields.len() != names.len() {
            return Err(bad(format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let num = |i: usize| -> Result<f64, OodError> {
            let (name, s) = (names[idx[i]], fields[idx[i]]);
            s.parse().map_err(|_| bad(format!("{name} `{s}` is not a number")))
        };
        out.push(EvalRecord {
            scenario: fields[idx[0]].to_string(),
            severity: num(1)?,
            variant: fields[idx[2]].to_string(),
            beta: num(3)?,
            seed: fields[idx[4]]
                .parse()
                .map_err(|_| bad(format!("seed `{}` is not an integer", fields[idx[4]])))?,
            error: num(5)?,
            loglik: num(6)?,
            brier: num(7)?,
            mi_xz: num(8)?,
            mi_zy: num(9)?,
        });
    }
    Ok(out)
}

//! Machine-readable run reports.
//!
//! Every report carries the tool version, an echo of the configuration,
//! the result, and a list of claims, each labelled by how it was obtained:
//! exactly, as a rigorous interval, or statistically. Reports contain no
//! timestamps or worker counts, so identical configurations give
//! byte-identical output.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL: &str = "harmlab";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimKind {
    /// Established by exact rational or modular arithmetic.
    Exact,
    /// A rigorous enclosure of a quantity defined on an infinite object.
    Interval,
    /// A Monte Carlo estimate with a confidence interval.
    Statistical,
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim {
    pub kind: ClaimKind,
    pub statement: String,
    /// `true`, `false`, or `null` when the finite computation cannot decide.
    pub holds: Option<bool>,
}

impl Claim {
    pub fn exact(statement: impl Into<String>, holds: bool) -> Self {
        Claim { kind: ClaimKind::Exact, statement: statement.into(), holds: Some(holds) }
    }

    pub fn interval(statement: impl Into<String>, holds: Option<bool>) -> Self {
        Claim { kind: ClaimKind::Interval, statement: statement.into(), holds }
    }

    pub fn statistical(statement: impl Into<String>, holds: Option<bool>) -> Self {
        Claim { kind: ClaimKind::Statistical, statement: statement.into(), holds }
    }
}

/// How a run ended, from the caller's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// The finite computation could not decide; see `radius`.
    Inconclusive,
}

/// A flat table for CSV output.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|s| s.to_string()).collect());
    }

    /// `path,value` rows for every scalar leaf of a JSON value.
    pub fn flatten(v: &Value) -> Self {
        fn walk(prefix: &str, v: &Value, out: &mut Table) {
            match v {
                Value::Object(m) => {
                    for (k, x) in m {
                        walk(&join(prefix, k), x, out);
                    }
                }
                Value::Array(a) => {
                    for (i, x) in a.iter().enumerate() {
                        walk(&join(prefix, &i.to_string()), x, out);
                    }
                }
                Value::String(s) => out.push([prefix, s.as_str()]),
                other => out.push([prefix.to_string(), other.to_string()]),
            }
        }
        fn join(a: &str, b: &str) -> String {
            if a.is_empty() {
                b.to_string()
            } else {
                format!("{a}.{b}")
            }
        }
        let mut t = Table::new(["path", "value"]);
        walk("", v, &mut t);
        t
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Invariant(format!("csv: {e}"));
        w.write_record(&self.headers).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invariant(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Invariant(format!("csv: {e}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub status: Status,
    /// The radius or depth at which an inconclusive result was reached.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    pub claims: Vec<Claim>,
    pub result: Value,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value, result: &impl Serialize) -> Result<Self> {
        let result = serde_json::to_value(result).map_err(|e| Error::Invariant(format!("serialize: {e}")))?;
        Ok(Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            status: Status::Ok,
            radius: None,
            claims: Vec::new(),
            result,
            table: None,
        })
    }

    pub fn claim(mut self, c: Claim) -> Self {
        self.claims.push(c);
        self
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    pub fn inconclusive(mut self, radius: usize) -> Self {
        self.status = Status::Inconclusive;
        self.radius = Some(radius);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The command's own table, or the flattened result.
    pub fn to_csv(&self) -> Result<String> {
        match &self.table {
            Some(t) => t.to_csv(),
            None => Table::flatten(&self.result).to_csv(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn envelope_fields() {
        let r = Report::new("walk nstep", json!({"n": 2}), &json!({"x": "1/2"}))
            .unwrap()
            .claim(Claim::exact("mass is conserved", true));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["tool"], "harmlab");
        assert_eq!(v["claims"][0]["kind"], "exact");
        assert_eq!(v["status"], "ok");
        assert!(v.get("radius").is_none());
    }

    #[test]
    fn flattened_csv() {
        let t = Table::flatten(&json!({"a": [1, {"b": "x,y"}]}));
        assert_eq!(t.to_csv().unwrap(), "path,value\na.0,1\na.1.b,\"x,y\"\n");
    }
}

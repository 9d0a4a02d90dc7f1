//! JSON-lines run log.

use std::io::Write;

use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::pde::StepDiagnostic;

/// Writes one JSON object per line.
pub struct RunLog<W: Write> {
    out: W,
}

impl<W: Write> RunLog<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    /// Writes `{"event": event, ...fields}`; `fields` must serialize to a
    /// JSON object.
    pub fn event<S: Serialize>(&mut self, event: &str, fields: &S) -> Result<()> {
        let mut value = serde_json::to_value(fields)?;
        let record = match value.as_object_mut() {
            Some(map) => {
                let mut rec = serde_json::Map::new();
                rec.insert("event".into(), json!(event));
                rec.append(map);
                serde_json::Value::Object(rec)
            }
            None => json!({ "event": event, "value": value }),
        };
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    /// One `step` record per diagnostic, tagged with the solve label.
    pub fn steps(&mut self, solve: &str, diagnostics: &[StepDiagnostic]) -> Result<()> {
        for d in diagnostics {
            self.event(
                "step",
                &json!({
                    "solve": solve,
                    "step": d.step,
                    "t": d.t,
                    "iterations": d.iterations,
                    "residual": d.residual,
                }),
            )?;
        }
        Ok(())
    }

    /// A summary record of the iteration counts and residuals of one solve.
    pub fn summary(&mut self, solve: &str, diagnostics: &[StepDiagnostic]) -> Result<()> {
        let max_iter = diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0);
        let total: usize = diagnostics.iter().map(|d| d.iterations).sum();
        let max_res = diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max);
        self.event(
            "solve",
            &json!({
                "solve": solve,
                "steps": diagnostics.len(),
                "max_iterations": max_iter,
                "total_iterations": total,
                "max_residual": max_res,
            }),
        )
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_object_per_line() {
        let diags = [
            StepDiagnostic {
                step: 1,
                t: 0.5,
                iterations: 3,
                residual: 1e-13,
            },
            StepDiagnostic {
                step: 0,
                t: 0.0,
                iterations: 4,
                residual: 2e-13,
            },
        ];
        let mut log = RunLog::new(Vec::new());
        log.steps("seller", &diags).unwrap();
        log.summary("seller", &diags).unwrap();
        log.event("note", &"plain").unwrap();
        let text = String::from_utf8(log.into_inner()).unwrap();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0]["event"], "step");
        assert_eq!(lines[1]["iterations"], 4);
        assert_eq!(lines[2]["max_iterations"], 4);
        assert_eq!(lines[2]["total_iterations"], 7);
        assert_eq!(lines[3]["value"], "plain");
    }
}

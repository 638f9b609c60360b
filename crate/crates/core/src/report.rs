//! Machine-readable verification reports. With a fixed seed the JSON output
//! is byte-identical across runs, so wall-clock timings stay out of it and
//! are printed on the human side only.

use serde::Serialize;

use crate::graded::CohomologyReport;

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl CheckEntry {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckEntry {
            name: name.into(),
            status: "pass".into(),
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, witness: impl Into<String>) -> Self {
        CheckEntry {
            name: name.into(),
            status: "fail".into(),
            witness: Some(witness.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub status: String,
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohomology: Option<CohomologyReport>,
}

impl Report {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        Report {
            command: command.into(),
            seed,
            status: "pass".into(),
            checks: Vec::new(),
            cohomology: None,
        }
    }

    pub fn push(&mut self, entry: CheckEntry) {
        if !entry.passed() {
            self.status = "fail".into();
        }
        self.checks.push(entry);
    }

    pub fn push_bool(&mut self, name: impl Into<String>, ok: bool, witness: impl Into<String>) {
        if ok {
            self.push(CheckEntry::pass(name));
        } else {
            self.push(CheckEntry::fail(name, witness));
        }
    }

    pub fn set_cohomology(&mut self, c: CohomologyReport) {
        self.cohomology = Some(c);
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("== {} ==\n", self.command));
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {}{}\n",
                if c.passed() { "pass" } else { "FAIL" },
                c.name,
                c.witness
                    .as_ref()
                    .map(|w| format!("  ({w})"))
                    .unwrap_or_default()
            ));
        }
        if let Some(coh) = &self.cohomology {
            out.push_str("  degree  ker  im  H\n");
            for e in &coh.entries {
                out.push_str(&format!(
                    "  {:>6}  {:>3}  {:>2}  {:>2}\n",
                    e.degree, e.ker, e.im, e.h
                ));
            }
        }
        out.push_str(&format!("overall: {}\n", self.status));
        out
    }
}

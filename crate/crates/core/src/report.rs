use serde_json::{json, Value};

/// One named check with its achieved defect.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub defect: f64,
    pub tol: f64,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Result of a validator.  Every validator reports the achieved defect of
/// each check, never just a boolean.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub context: String,
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(context: impl Into<String>, tol: f64) -> Self {
        ValidationReport {
            context: context.into(),
            tol,
            checks: Vec::new(),
        }
    }

    /// Record a check against the report tolerance.
    pub fn check(&mut self, name: impl Into<String>, defect: f64) {
        let tol = self.tol;
        self.check_with_tol(name, defect, tol, None);
    }

    pub fn check_witness(&mut self, name: impl Into<String>, defect: f64, witness: String) {
        let tol = self.tol;
        self.check_with_tol(name, defect, tol, Some(witness));
    }

    pub fn check_with_tol(
        &mut self,
        name: impl Into<String>,
        defect: f64,
        tol: f64,
        witness: Option<String>,
    ) {
        self.checks.push(Check {
            name: name.into(),
            defect,
            tol,
            passed: defect <= tol,
            witness,
        });
    }

    /// Record a hard pass/fail condition (reported with defect 0 or infinity).
    pub fn require(&mut self, name: impl Into<String>, ok: bool, witness: Option<String>) {
        self.checks.push(Check {
            name: name.into(),
            defect: if ok { 0.0 } else { f64::INFINITY },
            tol: self.tol,
            passed: ok,
            witness,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_defect(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.defect))
    }

    /// First failing check, if any.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Largest defect among checks whose name contains `pattern`.
    pub fn max_defect_matching(&self, pattern: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.contains(pattern))
            .fold(0.0, |m, c| m.max(c.defect))
    }

    /// Merge another report's checks into this one, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: ValidationReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "context": self.context,
            "tol": crate::json::jnum(self.tol),
            "passed": self.passed(),
            "max_defect": crate::json::jnum(self.max_defect()),
            "checks": self.checks.iter().map(|c| {
                json!({
                    "name": c.name,
                    "defect": crate::json::jnum(c.defect),
                    "tol": crate::json::jnum(c.tol),
                    "passed": c.passed,
                    "witness": c.witness,
                })
            }).collect::<Vec<_>>(),
        })
    }
}

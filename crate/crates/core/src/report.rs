use std::fmt;

/// Outcome of a bounded law check: how many instances were examined and the
/// violations found, each with a human-readable witness.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub law: String,
    pub witness: String,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn fail(&mut self, law: impl Into<String>, witness: impl Into<String>) {
        self.violations.push(Violation { law: law.into(), witness: witness.into() });
    }

    pub fn merge(&mut self, other: Report) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }

    /// First violated law, if any.
    pub fn first_law(&self) -> Option<&str> {
        self.violations.first().map(|v| v.law.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violations.first() {
            None => write!(f, "PASS ({} checked)", self.checked),
            Some(v) => write!(f, "FAIL: {} ({} violations; first witness {})", v.law, self.violations.len(), v.witness),
        }
    }
}

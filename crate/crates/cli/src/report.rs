//! Single-line `key=value` reports. Line-oriented output keeps the bench
//! harness consumable by plotting scripts without a parser dependency.

use std::fmt::Display;

/// An ordered list of `key=value` fields rendered as one line.
#[derive(Clone, Debug, Default)]
pub struct Report {
    fields: Vec<(String, String)>,
}

impl Report {
    pub fn new(structure: &str) -> Report {
        let mut r = Report::default();
        r.push("structure", structure);
        r
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Report {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_ms(&mut self, key: &str, duration: std::time::Duration) -> &mut Report {
        self.push(key, format!("{:.3}", duration.as_secs_f64() * 1e3))
    }

    pub fn line(&self) -> String {
        self.fields
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.line())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut r = Report::new("oracle");
        r.push("answer", 2).push("k", "30");
        assert_eq!(r.line(), "structure=oracle answer=2 k=30");
    }
}

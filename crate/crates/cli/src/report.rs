use serde::Serialize;
use serde_json::Value;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Computed,
    InvalidInput,
    NotNested,
    Budget,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Computed => 0,
            Status::InvalidInput => 2,
            Status::NotNested => 3,
            Status::Budget => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliReport {
    pub command: &'static str,
    pub file: Option<String>,
    pub exit_code: i32,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CliReport {
    pub fn new(command: &'static str, file: Option<&str>) -> Self {
        CliReport {
            command,
            file: file.map(str::to_string),
            exit_code: 0,
            result: Value::Null,
            stats: None,
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn fail(mut self, status: Status, message: impl Into<String>) -> Self {
        self.exit_code = status.code();
        self.error = Some(message.into());
        self
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.exit_code = status.code();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain text rendering of the same content as the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = self.command.to_string();
        if let Some(f) = &self.file {
            out += &format!(" {f}");
        }
        out += "\n";
        if let Some(e) = &self.error {
            out += &format!("error: {e}\n");
        }
        flatten("", &self.result, &mut out);
        if let Some(s) = &self.stats {
            flatten("stats", s, &mut out);
        }
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Null => {}
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            if items.is_empty() {
                return;
            }
            out.push_str(&format!("{prefix}:\n"));
            for x in items {
                out.push_str(&format!("  {}\n", scalar(x)));
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        x => out.push_str(&format!("{prefix}: {}\n", scalar(x))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains('\n') => format!("\n{}", s.trim_end()),
        Value::String(s) => s.clone(),
        x => x.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn text_lists_nested_fields() {
        let mut r = CliReport::new("verify", Some("a.dlss"));
        r.result = json!({ "satisfiable": true, "trace": ["ε p.a", "0 p.b"] });
        let t = r.to_text();
        assert!(t.starts_with("verify a.dlss\n"));
        assert!(t.contains("satisfiable: true\n"));
        assert!(t.contains("trace:\n  ε p.a\n  0 p.b\n"));
    }

    #[test]
    fn exit_codes_are_stable() {
        let codes: Vec<i32> =
            [Status::Computed, Status::InvalidInput, Status::NotNested, Status::Budget].map(Status::code).to_vec();
        assert_eq!(codes, [0, 2, 3, 4]);
    }
}

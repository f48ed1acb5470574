use std::collections::BTreeMap;

use pauli_selftest::robustness::format_significant;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub invariant: &'static str,
    pub statement: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Everything a run emits. Wall time is reported on stderr only, so that the
/// report itself is byte-identical across runs with the same configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub config: BTreeMap<&'static str, Value>,
    pub metrics: BTreeMap<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub status: &'static str,
}

impl RunReport {
    pub fn new(command: &'static str, config: BTreeMap<&'static str, Value>) -> Self {
        RunReport {
            command,
            config,
            metrics: BTreeMap::new(),
            verdicts: Vec::new(),
            status: "pass",
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("metrics are plain data");
        self.metrics.insert(name.into(), v);
    }

    pub fn verdict(&mut self, invariant: &'static str, statement: &'static str, pass: bool, detail: String) {
        if !pass {
            self.status = "fail";
        }
        self.verdicts.push(Verdict {
            invariant,
            statement,
            pass,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Rows of `section,name,value`; arrays are joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,name,value\n");
        out.push_str(&format!("command,command,{}\n", self.command));
        for (k, v) in &self.config {
            out.push_str(&format!("config,{k},{}\n", csv_value(v)));
        }
        for (k, v) in &self.metrics {
            out.push_str(&format!("metric,{k},{}\n", csv_value(v)));
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "verdict,{},{}\n",
                v.invariant,
                if v.pass { "pass" } else { "fail" }
            ));
        }
        out.push_str(&format!("status,status,{}\n", self.status));
        out
    }
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format_significant(x, 12),
            _ => n.to_string(),
        },
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => {
            let joined = items.iter().map(csv_value).collect::<Vec<_>>().join(";");
            if joined.contains(',') {
                format!("\"{}\"", joined.replace('"', "\"\""))
            } else {
                joined
            }
        }
        Value::Object(_) => {
            let s = v.to_string();
            format!("\"{}\"", s.replace('"', "\"\""))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_verdict_flips_status() {
        let mut r = RunReport::new("selftest", BTreeMap::new());
        r.verdict("a", "x", true, String::new());
        assert!(r.passed());
        r.verdict("b", "y", false, "off".into());
        assert!(!r.passed());
        assert_eq!(r.status, "fail");
    }

    #[test]
    fn csv_rows() {
        let mut r = RunReport::new("certify", BTreeMap::from([("n", Value::from(1))]));
        r.metric("values", vec![0.5, -0.25]);
        r.metric("label", "a,b");
        let csv = r.to_csv();
        assert!(csv.contains("config,n,1\n"));
        assert!(csv.contains("metric,values,0.5;-0.25\n"));
        assert!(csv.contains("metric,label,\"a,b\"\n"));
    }
}

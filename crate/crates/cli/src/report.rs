use serde_json::{Map, Number, Value};

/// Ordered key/value run report, printed as `key=value` lines or as one
/// JSON object.
#[derive(Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
}

fn float_value(v: f64) -> Value {
    match Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None if v.is_nan() => Value::String("nan".into()),
        None if v > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

/// Decimal with at least six significant digits; scientific for very
/// small or very large magnitudes.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.000000".into();
    }
    let mag = v.abs();
    if !(1e-4..1e15).contains(&mag) {
        return format!("{v:.6e}");
    }
    let decimals = (5 - mag.log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

impl Report {
    pub fn text(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), Value::String(v.into())));
        self
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.fields.push((key.into(), float_value(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.fields.push((key.into(), Value::from(v as u64)));
        self
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.fields.push((key.into(), Value::Bool(v)));
        self
    }

    pub fn floats(&mut self, key: &str, v: &[f64]) -> &mut Self {
        let list = v.iter().map(|&x| float_value(x)).collect();
        self.fields.push((key.into(), Value::Array(list)));
        self
    }

    pub fn ints(&mut self, key: &str, v: &[usize]) -> &mut Self {
        let list = v.iter().map(|&x| Value::from(x as u64)).collect();
        self.fields.push((key.into(), Value::Array(list)));
        self
    }

    pub fn to_json(&self) -> String {
        let map: Map<String, Value> = self.fields.iter().cloned().collect();
        Value::Object(map).to_string()
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            out.push_str(k);
            out.push('=');
            out.push_str(&render(v));
            out.push('\n');
        }
        out
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => format_float(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::Array(items) => items.iter().map(render).collect::<Vec<_>>().join(","),
        Value::Null => String::new(),
        Value::Object(_) => v.to_string(),
    }
}

//! Experiment configuration from TOML or JSON files plus `key=value`
//! overrides.

use std::fmt::Write as _;
use std::path::Path;

use partnr::experiment::ExperimentConfig;
use serde_json::{Map, Value};

use crate::Failure;

fn parse_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e == "json");
    let parsed = if json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// A TOML literal when it parses as one, a bare string otherwise.
fn parse_value(text: &str) -> Value {
    toml::from_str::<Map<String, Value>>(&format!("v = {text}"))
        .ok()
        .and_then(|mut m| m.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), Failure> {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Err(Failure::Config(format!("empty override key in `{key}`")))
}

pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, Failure> {
    let mut root = match file {
        Some(p) => parse_file(p)?,
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        let (key, value) =
            o.split_once('=').ok_or_else(|| Failure::Config(format!("override `{o}` is not of the form key=value")))?;
        set_path(&mut root, key.trim(), parse_value(value.trim()))?;
    }
    let config: ExperimentConfig = serde_json::from_value(root).map_err(|e| Failure::Config(format!("config: {e}")))?;
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn inline(v: &Value) -> String {
    match v {
        Value::Null => "unset".into(),
        Value::Object(m) => {
            let fields: Vec<String> = m.iter().map(|(k, v)| format!("{k} = {}", inline(v))).collect();
            format!("{{ {} }}", fields.join(", "))
        }
        other => other.to_string(),
    }
}

fn walk(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) if m.len() > 1 => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                walk(&key, child, out);
            }
        }
        other => writeln!(out, "  {prefix} = {}", inline(other)).unwrap(),
    }
}

/// Every config key with its default, one per line.
pub fn key_listing() -> String {
    let mut out = String::from("Config keys (file or --set key=value) and defaults:\n");
    walk("", &serde_json::to_value(ExperimentConfig::default()).expect("config serializes"), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_typed() {
        let c = load(None, &["demo_budget=40".into(), "pick_threshold.p0=0.7".into(), "mode=unseen".into()]).unwrap();
        assert_eq!(c.demo_budget, 40);
        assert_eq!(c.pick_threshold.p0, 0.7);
        assert_eq!(c.mode.as_str(), "unseen");
        let c = load(None, &["seeds=[4, 5]".into(), "total_epochs=12".into()]).unwrap();
        assert_eq!((c.seeds, c.total_epochs), (vec![4, 5], Some(12)));
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        for o in ["demo_budget", "nonsense=1", "demo_budget=0", "pick_threshold.p0=2"] {
            assert!(matches!(load(None, &[o.to_string()]), Err(Failure::Config(_))), "{o}");
        }
    }

    #[test]
    fn listing_has_paper_defaults() {
        let l = key_listing();
        for line in [
            "pick_threshold.p0 = 0.5",
            "pick_threshold.s_des = 0.9",
            "pick_threshold.window = 50",
            "pick_threshold.rate = 0.005",
        ] {
            assert!(l.contains(line), "{line} missing from\n{l}");
        }
        assert!(l.contains("total_epochs = unset"));
    }
}

//! `key = value` configuration files covering [`ModelConfig`] and
//! [`TrainConfig`]. Blank lines and `#` comments are ignored; unknown keys
//! are errors.

use serde_json::{Map, Value};

use super::TrainConfig;
use crate::model::ModelConfig;
use crate::{Error, Result};

fn as_map<T: serde::Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("configs serialise to objects"),
    }
}

fn parse_value(old: &Value, raw: &str) -> Option<Value> {
    match old {
        Value::Bool(_) => match raw {
            "true" | "yes" | "1" => Some(Value::Bool(true)),
            "false" | "no" | "0" => Some(Value::Bool(false)),
            _ => None,
        },
        Value::Number(n) if n.is_u64() => raw.parse::<u64>().ok().map(Value::from),
        Value::Number(_) => raw.parse::<f64>().ok().map(Value::from),
        _ => Some(Value::String(raw.to_string())),
    }
}

/// Apply the settings in `text` on top of the given configs.
pub fn parse_config(
    text: &str,
    model: &ModelConfig,
    train: &TrainConfig,
) -> Result<(ModelConfig, TrainConfig)> {
    let mut model_map = as_map(model);
    let mut train_map = as_map(train);
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |column: usize, msg: String| Error::format(column, msg).at_line(k + 1);
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| err(0, format!("expected `key = value`, found `{line}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let target = if model_map.contains_key(key) {
            &mut model_map
        } else if train_map.contains_key(key) {
            &mut train_map
        } else {
            return Err(err(0, format!("unknown key `{key}`")));
        };
        let value = parse_value(&target[key], raw)
            .ok_or_else(|| err(line.find('=').unwrap_or(0) + 1, format!("bad value `{raw}` for `{key}`")))?;
        target.insert(key.to_string(), value);
    }
    let model: ModelConfig = serde_json::from_value(Value::Object(model_map))
        .map_err(|e| Error::Argument(e.to_string()))?;
    let train: TrainConfig = serde_json::from_value(Value::Object(train_map))
        .map_err(|e| Error::Argument(e.to_string()))?;
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

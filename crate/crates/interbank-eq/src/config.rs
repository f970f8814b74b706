//! JSON system configs.
//!
//! ```json
//! {"r": 0.01, "horizon": 1.0,
//!  "banks": [{"mu": 0.045, "phi": 0.4, "eta": 0.5, "theta": 0.1, "gamma": 1.0,
//!             "x0_wealth": 1.0, "shock": {"type": "exponential", "lambda": 1.0}}]}
//! ```
//!
//! `horizon`, `gamma` and `x0_wealth` default to 1. A top-level `"n"` copies
//! a single listed bank `n` times.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{validate_system, BankParams, SystemParams, Violation};
use crate::shock_dist::ShockDistribution;

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, bank: Option<usize>, field: &str, message: impl Into<String>) {
        self.0.push(Violation {
            bank,
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn number(&mut self, obj: &Map<String, Value>, bank: Option<usize>, field: &str, default: Option<f64>) -> f64 {
        // Nested fields are reported with their dotted path.
        let key = field.rsplit('.').next().unwrap_or(field);
        match obj.get(key) {
            Some(v) => v.as_f64().unwrap_or_else(|| {
                self.push(bank, field, format!("expected a number, got {v}"));
                f64::NAN
            }),
            None => default.unwrap_or_else(|| {
                self.push(bank, field, "missing");
                f64::NAN
            }),
        }
    }
}

fn parse_shock(c: &mut Collector, bank: usize, v: Option<&Value>) -> ShockDistribution {
    let fallback = ShockDistribution::exponential(f64::NAN);
    let Some(obj) = v.and_then(Value::as_object) else {
        c.push(Some(bank), "shock", if v.is_some() { "expected an object" } else { "missing" });
        return fallback;
    };
    match obj.get("type").and_then(Value::as_str) {
        Some("exponential") => ShockDistribution::exponential(c.number(obj, Some(bank), "shock.lambda", None)),
        Some("power") => {
            let alpha = c.number(obj, Some(bank), "shock.alpha", None);
            let x0 = c.number(obj, Some(bank), "shock.x0", None);
            ShockDistribution::power_law(alpha, x0)
        }
        Some(other) => {
            c.push(Some(bank), "shock.type", format!("unknown type {other:?}"));
            fallback
        }
        None => {
            c.push(Some(bank), "shock.type", "missing");
            fallback
        }
    }
}

/// Parses and validates a config; every problem is reported at once.
pub fn parse_config(text: &str) -> Result<SystemParams> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
    let Some(obj) = root.as_object() else {
        return Err(Error::Config("top level must be an object".into()));
    };
    let mut c = Collector(Vec::new());
    let r = c.number(obj, None, "r", None);
    let horizon = c.number(obj, None, "horizon", Some(1.0));
    let mut banks = Vec::new();
    let mut wealth = Vec::new();
    match obj.get("banks").and_then(Value::as_array) {
        None => c.push(None, "banks", "missing or not an array"),
        Some(list) => {
            for (i, v) in list.iter().enumerate() {
                let Some(b) = v.as_object() else {
                    c.push(Some(i), "bank", "expected an object");
                    continue;
                };
                let shock = parse_shock(&mut c, i, b.get("shock"));
                banks.push(BankParams {
                    mu: c.number(b, Some(i), "mu", None),
                    phi: c.number(b, Some(i), "phi", None),
                    eta: c.number(b, Some(i), "eta", None),
                    theta: c.number(b, Some(i), "theta", None),
                    gamma: c.number(b, Some(i), "gamma", Some(1.0)),
                    shock,
                });
                wealth.push(c.number(b, Some(i), "x0_wealth", Some(1.0)));
            }
        }
    }
    if let Some(v) = obj.get("n") {
        match v.as_u64() {
            Some(n) if banks.len() == 1 => {
                banks = vec![banks[0]; n as usize];
                wealth = vec![wealth[0]; n as usize];
            }
            Some(_) => c.push(None, "n", "needs exactly one template bank"),
            None => c.push(None, "n", format!("expected a non-negative integer, got {v}")),
        }
    }
    if !c.0.is_empty() {
        return Err(Error::Invalid(c.0));
    }
    let system = SystemParams {
        r,
        horizon,
        banks,
        initial_wealth: wealth,
    };
    let v = validate_system(&system);
    if v.is_empty() {
        Ok(system)
    } else {
        Err(Error::Invalid(v))
    }
}

/// The resolved config, with every default filled in.
pub fn config_json(system: &SystemParams) -> Value {
    let banks: Vec<Value> = system
        .banks
        .iter()
        .zip(&system.initial_wealth)
        .map(|(b, x)| {
            json!({
                "mu": b.mu, "phi": b.phi, "eta": b.eta, "theta": b.theta, "gamma": b.gamma,
                "x0_wealth": x, "shock": b.shock,
            })
        })
        .collect();
    json!({ "r": system.r, "horizon": system.horizon, "banks": banks })
}

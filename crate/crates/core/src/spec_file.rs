//! JSON system descriptions.
//!
//! Every file is an object with a `"kind"` key (default `"system"`):
//!
//! * `"system"`: `"state_pmf"`, `"channel"` as `[s][x][y]`, optional
//!   `"policy": {"u_given_s": [[..]], "g": [[..]]}`;
//! * `"stateless"`: `"channel"` as `[x][y]`, optional `"input_pmf"`;
//! * `"mixture"`: `"channel_mixture": [{"weight", "channel"}]`,
//!   `"state_mixture": [{"weight", "state_pmf"}]`, optional `"policy"`;
//! * `"sequence"`: `"pattern"` (`"stationary"`, `"j_blocks"`, `"j_odd_even"`,
//!   `"periodic"`) and `"systems": [{"channel", "state_pmf"}]`.
//!
//! Any kind may carry an `"options"` object with tuning values. Rows whose
//! mass is off by at most [`ROW_TOL`] are rescaled; larger deviations are
//! rejected with the key path of the row.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::capacity::StationarySystem;
use crate::capacity::SequenceSpec;
use crate::error::{Error, Result};
use crate::mixed::MixtureSpec;
use crate::prob::{ChannelKernel, ConditionalPmf, GpPolicy, Pmf};

/// Largest row-mass deviation that is silently renormalized.
pub const ROW_TOL: f64 = 1e-9;

/// Optional per-file tuning values; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOptions {
    pub u_size: Option<usize>,
    pub v_size: Option<usize>,
    pub restarts: Option<usize>,
    /// Code rate in nats, or a fraction of `I(U;Y)` via `rate_fraction`.
    pub rate: Option<f64>,
    pub rate_fraction: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub rd_grid: Option<Vec<f64>>,
    pub n_max: Option<usize>,
    pub inner_draws: Option<usize>,
    pub pi_draws: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    System {
        channel: ChannelKernel,
        state: Pmf,
        policy: Option<GpPolicy>,
    },
    Stateless {
        channel: ConditionalPmf,
        input: Option<Pmf>,
    },
    Mixture {
        mixture: MixtureSpec,
        policy: Option<GpPolicy>,
    },
    Sequence(SequenceSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub kind: SpecKind,
    pub options: SpecOptions,
}

/// Parses and validates a JSON system description.
pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("malformed JSON: {e}")))?;
    let obj = object(&root, "$")?;
    let kind = match obj.get("kind") {
        None => "system",
        Some(v) => v
            .as_str()
            .ok_or_else(|| Error::Parse("kind: expected a string".into()))?,
    };
    let options = match obj.get("options") {
        None => SpecOptions::default(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("options: {e}")))?,
    };
    let (allowed, kind): (&[&str], SpecKind) = match kind {
        "system" => {
            let channel = channel(field(obj, "channel", "channel")?, "channel")?;
            let state = pmf(field(obj, "state_pmf", "state_pmf")?, "state_pmf")?;
            let policy = optional_policy(obj, channel.n_s(), channel.n_x())?;
            (
                &["state_pmf", "channel", "policy"],
                SpecKind::System { channel, state, policy },
            )
        }
        "stateless" => {
            let channel = conditional(field(obj, "channel", "channel")?, "channel")?;
            let input = obj.get("input_pmf").map(|v| pmf(v, "input_pmf")).transpose()?;
            if let Some(p) = &input {
                if p.len() != channel.n_cond() {
                    return Err(Error::Parse(format!(
                        "input_pmf: {} entries, channel has {} inputs",
                        p.len(),
                        channel.n_cond()
                    )));
                }
            }
            (&["channel", "input_pmf"], SpecKind::Stateless { channel, input })
        }
        "mixture" => {
            let channels = weighted(obj, "channel_mixture", "channel", channel)?;
            let states = weighted(obj, "state_mixture", "state_pmf", pmf)?;
            let (n_s, n_x) = (channels[0].1.n_s(), channels[0].1.n_x());
            let policy = optional_policy(obj, n_s, n_x)?;
            let mixture = MixtureSpec::new(channels, states).map_err(|e| Error::Parse(format!("mixture: {e}")))?;
            (
                &["channel_mixture", "state_mixture", "policy"],
                SpecKind::Mixture { mixture, policy },
            )
        }
        "sequence" => (&["pattern", "systems"], SpecKind::Sequence(sequence(obj)?)),
        other => {
            return Err(Error::Parse(format!(
                "kind: unknown value {other:?} (expected system, stateless, mixture or sequence)"
            )))
        }
    };
    if let Some(k) = obj
        .keys()
        .find(|k| !allowed.contains(&k.as_str()) && *k != "kind" && *k != "options")
    {
        return Err(Error::Parse(format!("{k}: unknown key")));
    }
    Ok(SpecFile { kind, options })
}

fn object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{key}: expected an object")))
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, key: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::Parse(format!("{key}: missing")))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{key}: expected an array")))
}

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Parse(format!("{key}: expected a number")))
}

fn index(v: &Value, key: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("{key}: expected a non-negative integer")))
}

fn numbers(v: &Value, key: &str) -> Result<Vec<f64>> {
    array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{key}[{i}]")))
        .collect()
}

fn pmf(v: &Value, key: &str) -> Result<Pmf> {
    Pmf::renormalized(numbers(v, key)?, key, ROW_TOL)
}

fn rows(v: &Value, key: &str) -> Result<Vec<Vec<f64>>> {
    array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let k = format!("{key}[{i}]");
            pmf(r, &k).map(|p| p.probs().to_vec())
        })
        .collect()
}

fn conditional(v: &Value, key: &str) -> Result<ConditionalPmf> {
    ConditionalPmf::with_key(rows(v, key)?, key)
}

fn channel(v: &Value, key: &str) -> Result<ChannelKernel> {
    let slices = array(v, key)?
        .iter()
        .enumerate()
        .map(|(s, m)| rows(m, &format!("{key}[{s}]")))
        .collect::<Result<Vec<_>>>()?;
    ChannelKernel::with_key(slices, key)
}

fn optional_policy(obj: &Map<String, Value>, n_s: usize, n_x: usize) -> Result<Option<GpPolicy>> {
    let Some(v) = obj.get("policy") else {
        return Ok(None);
    };
    let p = object(v, "policy")?;
    if let Some(k) = p.keys().find(|k| *k != "u_given_s" && *k != "g") {
        return Err(Error::Parse(format!("policy.{k}: unknown key")));
    }
    let u_given_s = conditional(field(p, "u_given_s", "policy.u_given_s")?, "policy.u_given_s")?;
    if u_given_s.n_cond() != n_s {
        return Err(Error::Parse(format!(
            "policy.u_given_s: {} rows, expected one per state ({n_s})",
            u_given_s.n_cond()
        )));
    }
    let g = array(field(p, "g", "policy.g")?, "policy.g")?
        .iter()
        .enumerate()
        .map(|(u, row)| {
            let k = format!("policy.g[{u}]");
            array(row, &k)?
                .iter()
                .enumerate()
                .map(|(s, x)| index(x, &format!("{k}[{s}]")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    GpPolicy::deterministic(u_given_s, g, n_x)
        .map(Some)
        .map_err(|e| Error::Parse(format!("policy: {e}")))
}

fn weighted<X>(
    obj: &Map<String, Value>,
    name: &str,
    inner: &str,
    parse: impl Fn(&Value, &str) -> Result<X>,
) -> Result<Vec<(f64, X)>> {
    let items = array(field(obj, name, name)?, name)?;
    if items.is_empty() {
        return Err(Error::Parse(format!("{name}: needs at least one component")));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let key = format!("{name}[{i}]");
            let o = object(item, &key)?;
            if let Some(k) = o.keys().find(|k| *k != "weight" && *k != inner) {
                return Err(Error::Parse(format!("{key}.{k}: unknown key")));
            }
            let w = number(field(o, "weight", &format!("{key}.weight"))?, &format!("{key}.weight"))?;
            let x = parse(field(o, inner, &format!("{key}.{inner}"))?, &format!("{key}.{inner}"))?;
            Ok((w, x))
        })
        .collect()
}

fn sequence(obj: &Map<String, Value>) -> Result<SequenceSpec> {
    let pattern = field(obj, "pattern", "pattern")?
        .as_str()
        .ok_or_else(|| Error::Parse("pattern: expected a string".into()))?;
    let systems = array(field(obj, "systems", "systems")?, "systems")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key = format!("systems[{i}]");
            let o = object(v, &key)?;
            if let Some(k) = o.keys().find(|k| *k != "channel" && *k != "state_pmf") {
                return Err(Error::Parse(format!("{key}.{k}: unknown key")));
            }
            let c = channel(field(o, "channel", &format!("{key}.channel"))?, &format!("{key}.channel"))?;
            let s = pmf(field(o, "state_pmf", &format!("{key}.state_pmf"))?, &format!("{key}.state_pmf"))?;
            StationarySystem::new(c, s).map_err(|e| Error::Parse(format!("{key}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let expect = |n: usize| -> Result<()> {
        if systems.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "systems: pattern {pattern:?} takes {n} systems, found {}",
                systems.len()
            )))
        }
    };
    let mut it = systems.iter().cloned();
    Ok(match pattern {
        "stationary" => {
            expect(1)?;
            SequenceSpec::Stationary(it.next().unwrap())
        }
        "j_blocks" => {
            expect(2)?;
            SequenceSpec::JBlocks {
                inside: it.next().unwrap(),
                outside: it.next().unwrap(),
            }
        }
        "j_odd_even" => {
            expect(3)?;
            SequenceSpec::JOddEven {
                odd_inside: it.next().unwrap(),
                odd_outside: it.next().unwrap(),
                even: it.next().unwrap(),
            }
        }
        "periodic" => {
            if systems.is_empty() {
                return Err(Error::Parse("systems: periodic pattern needs at least one system".into()));
            }
            SequenceSpec::Periodic(systems)
        }
        other => return Err(Error::Parse(format!("pattern: unknown value {other:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_deviations_are_renormalized() {
        let f = parse_spec(r#"{"state_pmf": [0.5, 0.5000000001], "channel": [[[1, 0]], [[0.3, 0.7]]]}"#).unwrap();
        let SpecKind::System { state, .. } = f.kind else { panic!() };
        assert!((state.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_spec(r#"{"state_pmf": [1], "channel": [[[0.5, 0.6]]]}"#).unwrap_err();
        assert!(e.to_string().contains("channel[0][0]"), "{e}");
        let e = parse_spec(r#"{"kind": "stateless", "channel": [[1, 0], "x"]}"#).unwrap_err();
        assert!(e.to_string().contains("channel[1]"), "{e}");
        let e = parse_spec(r#"{"state_pmf": [1], "channel": [[[1]]], "extra": 1}"#).unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
        let e = parse_spec("{\n\"state_pmf\": [1,\n}").unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
    }
}

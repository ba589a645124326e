//! Flat key = value configuration for the `simulate` subcommand.
//!
//! Keys (all optional; command-line flags override the file):
//!
//! ```text
//! n_units = 20            # panel width
//! n_periods = 30          # panel length
//! n_treated = 10          # units 0..n-1 adopt
//! first_adoption = 15     # adoption period of unit 0
//! adoption_spacing = 0    # unit i adopts at first_adoption + i * spacing
//! adoption = 5,5,8,never  # explicit per-unit list, overrides the three above
//! tau = 0.5               # constant treatment effect
//! tau_table = 0.1,0.2,0.3 # effect by event time (last value held)
//! trend = 0.0             # extra drift for eventually-treated units
//! anticipation = 0        # effect onset this many periods before adoption
//! noise_sd = 0.1
//! seed = 42
//! unit_sd = 1.0           # sd of seeded unit effects
//! time_sd = 0.5           # sd of seeded time effects
//! unit_effects = ...      # explicit comma list, overrides unit_sd
//! time_effects = ...      # explicit comma list, overrides time_sd
//! ```

use std::collections::BTreeMap;

use anyhow::{Context, Result};

use paneltrial::sim::{DgpConfig, EffectProfile};
use paneltrial::Error;

use crate::SimulateArgs;

#[derive(Debug, Default)]
struct Settings {
    n_units: Option<usize>,
    n_periods: Option<usize>,
    n_treated: Option<usize>,
    first_adoption: Option<i64>,
    adoption_spacing: Option<i64>,
    adoption: Option<String>,
    tau: Option<f64>,
    tau_table: Option<String>,
    trend: Option<f64>,
    anticipation: Option<i64>,
    noise_sd: Option<f64>,
    seed: Option<u64>,
    unit_sd: Option<f64>,
    time_sd: Option<f64>,
    unit_effects: Option<String>,
    time_effects: Option<String>,
}

fn parse_file(text: &str) -> Result<Settings> {
    let mut seen: BTreeMap<&str, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1))
        })?;
        let key = key.trim();
        let known = [
            "n_units", "n_periods", "n_treated", "first_adoption", "adoption_spacing",
            "adoption", "tau", "tau_table", "trend", "anticipation", "noise_sd", "seed",
            "unit_sd", "time_sd", "unit_effects", "time_effects",
        ];
        let key = known
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Config(format!("line {}: unknown key {key:?}", i + 1)))?;
        if seen.insert(key, value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)).into());
        }
    }

    fn get<T: std::str::FromStr>(seen: &BTreeMap<&str, String>, key: &str) -> Result<Option<T>> {
        seen.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")).into())
            })
            .transpose()
    }

    Ok(Settings {
        n_units: get(&seen, "n_units")?,
        n_periods: get(&seen, "n_periods")?,
        n_treated: get(&seen, "n_treated")?,
        first_adoption: get(&seen, "first_adoption")?,
        adoption_spacing: get(&seen, "adoption_spacing")?,
        adoption: seen.get("adoption").cloned(),
        tau: get(&seen, "tau")?,
        tau_table: seen.get("tau_table").cloned(),
        trend: get(&seen, "trend")?,
        anticipation: get(&seen, "anticipation")?,
        noise_sd: get(&seen, "noise_sd")?,
        seed: get(&seen, "seed")?,
        unit_sd: get(&seen, "unit_sd")?,
        time_sd: get(&seen, "time_sd")?,
        unit_effects: seen.get("unit_effects").cloned(),
        time_effects: seen.get("time_effects").cloned(),
    })
}

fn parse_f64_list(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")).into())
        })
        .collect()
}

fn parse_adoption_list(text: &str) -> Result<Vec<Option<i64>>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if s.is_empty() || s == "never" {
                Ok(None)
            } else {
                s.parse::<i64>()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("adoption: cannot parse {s:?}")).into())
            }
        })
        .collect()
}

/// Merges the config file (if any) with command-line overrides and builds
/// the generator configuration.
pub fn build_config(args: &SimulateArgs) -> Result<DgpConfig<f64>> {
    let mut s = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot open config file {}", path.display()))?;
            parse_file(&text)?
        }
        None => Settings::default(),
    };
    // flags override file values
    s.n_units = args.n_units.or(s.n_units);
    s.n_periods = args.n_periods.or(s.n_periods);
    s.n_treated = args.n_treated.or(s.n_treated);
    s.first_adoption = args.first_adoption.or(s.first_adoption);
    s.adoption_spacing = args.adoption_spacing.or(s.adoption_spacing);
    s.adoption = args.adoption.clone().or(s.adoption);
    s.tau = args.tau.or(s.tau);
    s.tau_table = args.tau_table.clone().or(s.tau_table);
    s.trend = args.trend.or(s.trend);
    s.anticipation = args.anticipation.or(s.anticipation);
    s.noise_sd = args.noise_sd.or(s.noise_sd);
    s.seed = args.seed.or(s.seed);

    let n_units = s.n_units.unwrap_or(20);
    let n_periods = s.n_periods.unwrap_or(30);
    let mut config = DgpConfig::<f64>::new(n_units, n_periods);
    config.seed = s.seed.unwrap_or(0);
    config.noise_sd = s.noise_sd.unwrap_or(0.1);
    config.differential_trend_slope = s.trend.unwrap_or(0.0);
    config.anticipation_lead = s.anticipation.unwrap_or(0);

    config.adoption = match &s.adoption {
        Some(list) => {
            let adoption = parse_adoption_list(list)?;
            if adoption.len() != n_units {
                return Err(Error::Config(format!(
                    "adoption lists {} units, n_units is {n_units}",
                    adoption.len()
                ))
                .into());
            }
            adoption
        }
        None => {
            let n_treated = s.n_treated.unwrap_or(n_units / 2);
            if n_treated > n_units {
                return Err(
                    Error::Config(format!("n_treated {n_treated} exceeds n_units {n_units}")).into()
                );
            }
            let first = s.first_adoption.unwrap_or(n_periods as i64 / 2);
            let spacing = s.adoption_spacing.unwrap_or(0);
            (0..n_units)
                .map(|i| (i < n_treated).then(|| first + spacing * i as i64))
                .collect()
        }
    };

    config.treatment_effect = match (&s.tau_table, s.tau) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("set either tau or tau_table, not both".into()).into());
        }
        (Some(table), None) => EffectProfile::Table(parse_f64_list("tau_table", table)?),
        (None, tau) => EffectProfile::Constant(tau.unwrap_or(0.0)),
    };

    config = config.with_seeded_effects(s.unit_sd.unwrap_or(1.0), s.time_sd.unwrap_or(0.5));
    if let Some(list) = &s.unit_effects {
        config.unit_effects = parse_f64_list("unit_effects", list)?;
    }
    if let Some(list) = &s.time_effects {
        config.time_effects = parse_f64_list("time_effects", list)?;
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = "\
# comment
n_units = 6
n_periods = 10   # trailing comment
adoption = 4,4,6,never,never,never
tau = 0.5
noise_sd = 0
seed = 9
";
        let s = parse_file(text).unwrap();
        assert_eq!(s.n_units, Some(6));
        assert_eq!(s.noise_sd, Some(0.0));
        assert_eq!(s.adoption.as_deref(), Some("4,4,6,never,never,never"));
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let err = parse_file("n_units = 4\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_file("n_units 4\n").is_err());
        assert!(parse_file("n_units = four\n").is_err());
        assert!(parse_file("tau = 0.5\ntau = 0.6\n").is_err());
    }

    #[test]
    fn adoption_list_supports_never() {
        let a = parse_adoption_list("5, never, , 8").unwrap();
        assert_eq!(a, vec![Some(5), None, None, Some(8)]);
    }
}

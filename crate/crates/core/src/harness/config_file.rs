//! Flat `key = value` configuration files.
//!
//! One assignment per line, SI units, `#` starts a comment. Keys are the
//! [`ExperimentConfig`] field names; omitted keys keep their defaults.

use crate::planner::ExperimentConfig;

use super::HarnessError;

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, HarnessError> {
    value.parse::<f64>().map_err(|_| HarnessError::Parse {
        line,
        reason: format!("`{key}` expects a number, got `{value}`"),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, HarnessError> {
    value.parse::<u64>().map_err(|_| HarnessError::Parse {
        line,
        reason: format!("`{key}` expects a non-negative integer, got `{value}`"),
    })
}

pub fn load_config(source: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Parse {
            line,
            reason: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(HarnessError::Parse {
                line,
                reason: format!("`{key}` has no value"),
            });
        }
        if seen.iter().any(|k| k == key) {
            return Err(HarnessError::Parse {
                line,
                reason: format!("`{key}` assigned twice"),
            });
        }
        match key {
            "t_phys" => config.t_phys = parse_f64(line, key, value)?,
            "epsilon" => config.epsilon = parse_f64(line, key, value)?,
            "t_choice" => config.t_choice = parse_f64(line, key, value)?,
            "t_delay" => config.t_delay = parse_f64(line, key, value)?,
            "n_signal" => config.n_signal = parse_u64(line, key, value)?,
            "p_s" => config.p_s = parse_f64(line, key, value)?,
            "p_i" => config.p_i = parse_f64(line, key, value)?,
            "p_pair" => config.p_pair = parse_f64(line, key, value)?,
            "fidelity" => config.fidelity = parse_f64(line, key, value)?,
            "modes_per_photon" => config.modes_per_photon = parse_u64(line, key, value)?,
            "coherence_time" => config.coherence_time = parse_f64(line, key, value)?,
            "readout_time" => config.readout_time = parse_f64(line, key, value)?,
            "coherence_factor" => config.coherence_factor = parse_f64(line, key, value)?,
            "multi_pair_threshold" => config.multi_pair_threshold = parse_f64(line, key, value)?,
            "double_occupancy" => {
                config.double_occupancy = value
                    .parse()
                    .map_err(|reason| HarnessError::Parse { line, reason })?
            }
            other => {
                return Err(HarnessError::Parse {
                    line,
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        seen.push(key.to_string());
    }
    config.validate()?;
    Ok(config)
}

/// Serializes a config in the same format [`load_config`] reads.
pub fn write_config(config: &ExperimentConfig) -> String {
    format!(
        "t_phys = {:e}\nepsilon = {}\nt_choice = {:e}\nt_delay = {:e}\nn_signal = {}\np_s = {}\np_i = {}\n\
         p_pair = {}\nfidelity = {}\nmodes_per_photon = {}\ncoherence_time = {:e}\nreadout_time = {:e}\n\
         coherence_factor = {}\nmulti_pair_threshold = {:e}\ndouble_occupancy = {}\n",
        config.t_phys,
        config.epsilon,
        config.t_choice,
        config.t_delay,
        config.n_signal,
        config.p_s,
        config.p_i,
        config.p_pair,
        config.fidelity,
        config.modes_per_photon,
        config.coherence_time,
        config.readout_time,
        config.coherence_factor,
        config.multi_pair_threshold,
        config.double_occupancy.as_str(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{OccupancyPolicy, PlanError};

    #[test]
    fn empty_source_is_defaults() {
        assert_eq!(load_config("").unwrap(), ExperimentConfig::default());
        assert_eq!(load_config("# only a comment\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_si_values() {
        let c = load_config("t_phys = 400e-6\n").unwrap();
        assert_eq!(c.t_phys, 400e-6);
        let c = load_config("  fidelity=0.8   # measured\ndouble_occupancy = discard\n").unwrap();
        assert_eq!(c.fidelity, 0.8);
        assert_eq!(c.double_occupancy, OccupancyPolicy::Discard);
    }

    #[test]
    fn out_of_range_probability() {
        match load_config("p_s = 1.5") {
            Err(HarnessError::InvalidConfig(PlanError::InvalidConfig { field, .. })) => {
                assert_eq!(field, "p_s")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("\n\nbogus = 1", 3),
            ("t_phys 4", 1),
            ("p_i = x", 1),
            ("n_signal = -3", 1),
            ("p_i = 0.2\np_i = 0.3", 2),
            ("double_occupancy = maybe", 1),
            ("p_i =", 1),
        ];
        for (src, want) in cases {
            match load_config(src) {
                Err(HarnessError::Parse { line, .. }) => assert_eq!(line, want, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn written_config_reloads() {
        let c = ExperimentConfig {
            fidelity: 0.37,
            t_choice: 455e-6,
            double_occupancy: OccupancyPolicy::Discard,
            ..Default::default()
        };
        assert_eq!(load_config(&write_config(&c)).unwrap(), c);
    }
}

//! Scenario files: TOML on disk, embedded presets by name.
//!
//! Config handling distinguishes three failure classes so the binary can map
//! them to exit codes: unreadable input, syntax errors (reported with the
//! line and column straight from the TOML parser), and semantic violations
//! (each naming the offending field).
//!
//! One TOML caveat: integers are signed 64-bit, so `seed` values above
//! `i64::MAX` cannot be written in a config file even though the engine
//! accepts the full `u64` range programmatically.

use std::fmt;
use std::path::{Path, PathBuf};

use lfsim_core::model::Violation;
use lfsim_core::scenario::ScenarioConfig;

const FIGURE1: &str = include_str!("../presets/figure1.toml");
const FIGURE2: &str = include_str!("../presets/figure2.toml");

/// Names of the bundled presets, in the order `preset` resolves them.
pub const PRESET_NAMES: [&str; 2] = ["figure1", "figure2"];

/// The embedded scenario text for a bundled preset name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "figure1" => Some(FIGURE1),
        "figure2" => Some(FIGURE2),
        _ => None,
    }
}

#[derive(Debug)]
pub enum ConfigError {
    /// The input could not be read at all.
    Io { path: PathBuf, message: String },
    /// The text is not well-formed TOML or does not match the scenario
    /// schema; the message carries the parser's line/column diagnostics.
    Syntax { message: String },
    /// The scenario parsed but fails validation; every entry names the field
    /// it is about.
    Invalid { violations: Vec<Violation> },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => {
                write!(f, "cannot read {}: {message}", path.display())
            }
            ConfigError::Syntax { message } => write!(f, "config syntax error: {message}"),
            ConfigError::Invalid { violations } => {
                writeln!(f, "invalid scenario:")?;
                for v in violations {
                    writeln!(f, "  {}: {}", v.subject, v.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parse scenario TOML and validate it. Unknown keys are rejected by the
/// schema; semantic problems come back as named violations.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError::Syntax { message: e.to_string() })?;
    let violations = cfg.validate();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid { violations })
    }
}

/// Render a scenario as TOML that `parse_config` accepts back unchanged.
pub fn write_config(cfg: &ScenarioConfig) -> Result<String, ConfigError> {
    toml::to_string_pretty(cfg).map_err(|e| ConfigError::Syntax { message: e.to_string() })
}

/// Resolve a command-line scenario argument: an existing file wins, otherwise
/// the name of a bundled preset. Returns the parsed scenario plus a stem used
/// to derive default output file names.
pub fn load_config(arg: &str) -> Result<(ScenarioConfig, String), ConfigError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_owned());
        return Ok((parse_config(&text)?, stem));
    }
    if let Some(text) = preset(arg) {
        return Ok((parse_config(text)?, arg.to_owned()));
    }
    Err(ConfigError::Io {
        path: path.to_path_buf(),
        message: format!(
            "no such file and no bundled preset with this name (presets: {})",
            PRESET_NAMES.join(", ")
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lfsim_core::scenario::{Initializer, LeaderSpec, Termination};
    use lfsim_core::schedule::ScheduleSpec;
    use lfsim_core::model::Opinion;

    #[test]
    fn bundled_presets_parse_and_build() {
        for name in PRESET_NAMES {
            let (cfg, stem) = load_config(name).unwrap();
            assert_eq!(stem, name);
            cfg.build().unwrap();
        }
    }

    #[test]
    fn figure_presets_have_their_advertised_populations() {
        let (f1, _) = load_config("figure1").unwrap();
        assert!(f1.followers.is_none());
        assert_eq!(f1.leaders.len(), 1);
        assert_eq!(f1.leaders[0].size, Some(100));
        assert_eq!(f1.epsilon, 0.05);

        let (f2, _) = load_config("figure2").unwrap();
        assert_eq!(f2.followers.as_ref().unwrap().size, Some(100));
        assert_eq!(f2.leaders.len(), 1);
        assert_eq!(f2.leaders[0].size, Some(2));
        assert_eq!(f2.epsilon, 1.0);
        match &f2.leaders[0].init {
            Initializer::Explicit { opinions } => {
                assert_eq!(opinions, &[Opinion(vec![0.99]), Opinion(vec![-0.99])]);
            }
            other => panic!("unexpected initializer {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_positions() {
        let err = parse_config("dimension = 1\nepsilon = [oops\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "missing line anchor: {msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(
            "dimension = 1\nepsilon = 0.5\nbogus = 3\n[[leaders]]\nsize = 1\ntarget = [0.0]\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "unknown key not named: {msg}");
    }

    #[test]
    fn negative_epsilon_is_a_violation_naming_the_field() {
        let text = "dimension = 1\nepsilon = -1.0\n\n[[leaders]]\nsize = 2\ntarget = [0.0]\n\n[leaders.init]\nkind = \"uniform_box\"\nlo = [0.0]\nhi = [1.0]\n\n[leaders.alpha]\nkind = \"constant\"\nvalue = 0.5\n";
        match parse_config(text).unwrap_err() {
            ConfigError::Invalid { violations } => {
                assert!(violations.iter().any(|v| v.subject == "epsilon"), "{violations:?}");
            }
            other => panic!("expected violations, got {other}"),
        }
    }

    #[test]
    fn write_then_parse_round_trips() {
        let cfg = ScenarioConfig {
            dimension: 2,
            epsilon: 0.75,
            norm: Default::default(),
            mode: Default::default(),
            seed: 42,
            followers: Some(lfsim_core::scenario::FollowerSpec {
                size: Some(3),
                members: None,
                init: Initializer::UniformBox { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
                beta: vec![ScheduleSpec::Constant { value: 0.1 }],
            }),
            leaders: vec![LeaderSpec {
                size: Some(2),
                members: None,
                target: Opinion(vec![0.5, 0.5]),
                init: Initializer::Explicit {
                    opinions: vec![Opinion(vec![0.4, 0.4]), Opinion(vec![0.6, 0.6])],
                },
                alpha: Some(ScheduleSpec::Table { values: vec![0.9, 0.8] }),
                weight: None,
            }],
            legacy: None,
            termination: Termination { max_steps: 50, tol_disp: 0.0, tol_lim: None },
            output: Default::default(),
        };
        let text = write_config(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_path_mentions_the_presets() {
        let err = load_config("does-not-exist.toml").unwrap_err();
        assert!(err.to_string().contains("figure1"));
    }
}

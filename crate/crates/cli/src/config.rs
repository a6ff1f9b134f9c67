//! Scenario loading with command-line overrides.

use std::path::{Path, PathBuf};

use fris_core::scenario::{Scenario, SnrGrid, PRESETS};
use fris_core::FrisError;

/// Overrides shared by `run` and `compare`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub snr_db: Option<SnrGrid>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(t) = self.trials {
            s.mc.trials = t;
        }
        if let Some(seed) = self.seed {
            s.mc.seed = seed;
        }
        if let Some(g) = self.snr_db {
            s.snr_db = g;
        }
    }
}

/// Parses TOML or JSON by extension. Unknown keys and type errors are
/// reported with their location.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario, FrisError> {
    let shown = path.display();
    let mut s: Scenario = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| FrisError::Config(format!("{shown}: {e}")))?
        }
        _ => toml::from_str(text).map_err(|e| FrisError::Config(format!("{shown}: {e}")))?,
    };
    if s.name.is_empty() {
        s.name = path.file_stem().and_then(|n| n.to_str()).unwrap_or("scenario").to_string();
    }
    s.validate().map_err(|e| match e {
        FrisError::Config(m) => FrisError::Config(format!("{shown}: {m}")),
        other => other,
    })?;
    Ok(s)
}

/// Reads a scenario file. A bare preset name (`fris25`, `ris36`, …) that is
/// not an existing file selects the built-in scenario.
pub fn load_scenario(arg: &str, overrides: &Overrides) -> Result<Scenario, FrisError> {
    let path = PathBuf::from(arg);
    let mut s = if !path.is_file() && PRESETS.contains(&arg) {
        Scenario::preset(arg)?
    } else {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| FrisError::Config(format!("cannot read {}: {e}", path.display())))?;
        parse_scenario(&text, &path)?
    };
    overrides.apply(&mut s);
    s.validate()?;
    Ok(s)
}

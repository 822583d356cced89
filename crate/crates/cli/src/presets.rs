//! Parameter sets bundled with the binary, one per reproduced figure.

use crate::config::{ConfigError, ExperimentConfig};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../presets/", $name, ".json")))),*
        ];
    };
}

presets!("fig4", "fig5", "fig6", "fig7", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15");

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let text = preset_text(name).ok_or_else(|| ConfigError {
        source: format!("preset {name}"),
        line: None,
        message: format!("unknown preset; known: {}", preset_names().collect::<Vec<_>>().join(", ")),
    })?;
    ExperimentConfig::parse(text, &format!("preset {name}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_under_its_own_name() {
        for name in preset_names() {
            assert_eq!(load_preset(name).unwrap().name, name);
        }
        assert!(load_preset("fig99").is_err());
    }
}

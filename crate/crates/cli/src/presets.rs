//! Bundled run configurations, one per headline figure of the study.
//!
//! Each preset is an ordinary JSON config compiled into the binary; `locfim
//! preset <name>` behaves exactly like `run`/`compare` with that file, so a
//! preset is also a worked example of the schema.

/// Name, embedded config, and one-line description of every preset.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "fig2",
        include_str!("../presets/fig2.json"),
        "three-source quantum matrix elements against the scene scale",
    ),
    (
        "fig3",
        include_str!("../presets/fig3.json"),
        "three-source quantum eigenvalue collapse to rank two",
    ),
    (
        "fig4",
        include_str!("../presets/fig4.json"),
        "nine-source eigenvalue scaling ladder with slope fits",
    ),
    (
        "fig5",
        include_str!("../presets/fig5.json"),
        "quantum limit against the 20-mode sorter, nine sources",
    ),
    (
        "fig6",
        include_str!("../presets/fig6.json"),
        "three-source spectrum under the hard-aperture point-spread function",
    ),
    (
        "fig7",
        include_str!("../presets/fig7.json"),
        "five-source eigenvalue collapse",
    ),
    (
        "fig8",
        include_str!("../presets/fig8.json"),
        "three unequally bright sources",
    ),
    (
        "fig9",
        include_str!("../presets/fig9.json"),
        "mode sorter against direct imaging, rank collapse of both",
    ),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(preset, _, _)| *preset == name)
        .map(|(_, config, _)| *config)
}

/// Formatted list for error messages and help text.
pub fn catalogue() -> String {
    PRESETS
        .iter()
        .map(|(name, _, description)| format!("  {name}  {description}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, text, _) in PRESETS {
            let config: RunConfig = serde_json::from_str(text)
                .unwrap_or_else(|e| panic!("preset {name} does not parse: {e}"));
            let comparing = config.versus.is_some();
            crate::config::validate(&config, comparing)
                .unwrap_or_else(|e| panic!("preset {name} does not validate: {e}"));
            crate::config::resolve_pattern(&config)
                .unwrap_or_else(|e| panic!("preset {name} has a bad scene: {e}"));
        }
    }
}

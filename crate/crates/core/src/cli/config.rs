//! Experiment configuration files.
//!
//! A config is TOML with the top-level key `seed` and the tables `[surface]`, `[integrator]`,
//! `[fields]`, `[tolerances]` and `[[experiment]]`. Unknown keys are errors everywhere.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::surface::SurfaceKind;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub surface: SurfaceBlock,
    #[serde(default)]
    pub integrator: IntegratorBlock,
    /// Named expressions that map, form and arc parameters may refer to.
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBlock {
    #[serde(default = "default_kind")]
    pub kind: SurfaceKind,
    /// Strip half-width.
    pub w: Option<f64>,
    /// Collar depth of boundary extensions (default `w/4`).
    pub collar_depth: Option<f64>,
    /// Tube half-width of Poincaré duals (default 1/8).
    pub epsilon: Option<f64>,
}

fn default_kind() -> SurfaceKind {
    SurfaceKind::Mobius
}

impl Default for SurfaceBlock {
    fn default() -> Self {
        SurfaceBlock { kind: default_kind(), w: None, collar_depth: None, epsilon: None }
    }
}

/// Overrides for the per-experiment integrator defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    /// RK4 steps per unit time for `flow` and `extension` maps.
    pub steps: Option<usize>,
    pub order: Option<usize>,
    pub panels_x: Option<usize>,
    pub panels_y: Option<usize>,
    /// Circle quadrature: order and panel count.
    pub circle_order: Option<usize>,
    pub circle_panels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub flux: Option<f64>,
    pub calabi: Option<f64>,
    pub swept_area: Option<f64>,
    pub cocycle: Option<f64>,
    pub chi_cf: Option<f64>,
    pub rotation: Option<f64>,
    pub transgression: Option<f64>,
    pub area_preservation: Option<f64>,
    pub trace: Option<f64>,
    pub kernel: Option<f64>,
    pub cell_division: Option<f64>,
    pub sign_flip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Flux {
        name: Option<String>,
        map: Option<String>,
        lambda: Option<String>,
    },
    Calabi {
        name: Option<String>,
        map: Option<String>,
        /// `[x0, x1, y0, y1]` in cover coordinates; ignored on the disk.
        patch: Option<[f64; 4]>,
        e_sign: Option<f64>,
    },
    SweptArea {
        name: Option<String>,
        arc: Option<String>,
        isotopy: Option<String>,
    },
    Cocycle {
        name: Option<String>,
        triples: Option<usize>,
        pairs: Option<usize>,
        rotation_pairs: Option<usize>,
        n_iter: Option<usize>,
        amplitude: Option<f64>,
    },
    Transgression {
        name: Option<String>,
        pairs: Option<Vec<[String; 2]>>,
        lambda: Option<String>,
        steps: Option<usize>,
    },
    Flows {
        name: Option<String>,
        extensions: Option<Vec<String>>,
        grid: Option<usize>,
    },
    CellDivision {
        name: Option<String>,
        target: Option<f64>,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Flux { .. } => "flux",
            Experiment::Calabi { .. } => "calabi",
            Experiment::SweptArea { .. } => "swept-area",
            Experiment::Cocycle { .. } => "cocycle",
            Experiment::Transgression { .. } => "transgression",
            Experiment::Flows { .. } => "flows",
            Experiment::CellDivision { .. } => "cell-division",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Experiment::Flux { name, .. }
            | Experiment::Calabi { name, .. }
            | Experiment::SweptArea { name, .. }
            | Experiment::Cocycle { name, .. }
            | Experiment::Transgression { name, .. }
            | Experiment::Flows { name, .. }
            | Experiment::CellDivision { name, .. } => name.as_deref(),
        }
    }

    /// The experiment with every parameter at its default.
    pub fn default_of(kind: &str) -> Option<Experiment> {
        Some(match kind {
            "flux" => Experiment::Flux { name: None, map: None, lambda: None },
            "calabi" => Experiment::Calabi { name: None, map: None, patch: None, e_sign: None },
            "swept-area" => Experiment::SweptArea { name: None, arc: None, isotopy: None },
            "cocycle" => Experiment::Cocycle {
                name: None,
                triples: None,
                pairs: None,
                rotation_pairs: None,
                n_iter: None,
                amplitude: None,
            },
            "transgression" => Experiment::Transgression { name: None, pairs: None, lambda: None, steps: None },
            "flows" => Experiment::Flows { name: None, extensions: None, grid: None },
            "cell-division" => Experiment::CellDivision { name: None, target: None },
            _ => return None,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses() {
        let c = ExperimentConfig::from_toml(
            r#"
seed = 3
[surface]
kind = "annulus"
w = 0.5
[integrator]
order = 8
[fields]
H = "0.1*sin(2*pi*x)"
[tolerances]
flux = 1e-7
[[experiment]]
kind = "flux"
map = "shear:t=1"
[[experiment]]
kind = "cell-division"
target = 0.1
"#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.surface.kind, SurfaceKind::Annulus);
        assert_eq!(c.experiments.len(), 2);
        assert_eq!(c.experiments[1].kind(), "cell-division");
        assert_eq!(c.tolerances.flux, Some(1e-7));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for src in [
            "sed = 1",
            "[surface]\nkind = \"mobius\"\nwidth = 1",
            "[integrator]\norder = 8\nsteps_per = 1",
            "[tolerances]\nfluxx = 1",
            "[[experiment]]\nkind = \"flux\"\nmap = \"id\"\nlamda = \"dx\"",
            "[[experiment]]\nkind = \"fluxx\"",
        ] {
            let err = ExperimentConfig::from_toml(src).unwrap_err();
            assert!(err.span().is_some(), "{src}: {err}");
        }
    }

    #[test]
    fn defaults_exist_for_every_kind() {
        for k in ["flux", "calabi", "swept-area", "cocycle", "transgression", "flows", "cell-division"] {
            assert_eq!(Experiment::default_of(k).unwrap().kind(), k);
        }
        assert!(Experiment::default_of("nope").is_none());
    }
}

//! Named scenarios. Parameters are `f/2π` in MHz.

use crate::config::{Analysis, Numerics, OutputConfig, PerEmitter, ScenarioConfig, SweepConfig, SystemConfig};

/// Measured per-qubit couplings.
pub const DEVICE_N3: [f64; 3] = [83.7, 85.7, 85.1];
pub const DEVICE_N4: [f64; 4] = [69.4, 69.1, 68.6, 69.7];
pub const DEVICE_N5: [f64; 5] = [59.0, 59.4, 59.9, 60.9, 60.7];

#[derive(Clone, Copy, Debug)]
pub struct PresetInfo {
    pub name: &'static str,
    pub analysis: Analysis,
    pub description: &'static str,
}

pub const CATALOG: &[PresetInfo] = &[
    PresetInfo { name: "superradiance-n3", analysis: Analysis::Superradiance, description: "three transmons, bad cavity, emission from |0,eee>" },
    PresetInfo { name: "superradiance-n4", analysis: Analysis::Superradiance, description: "four transmons, bad cavity" },
    PresetInfo { name: "superradiance-n5", analysis: Analysis::Superradiance, description: "five transmons, bad cavity" },
    PresetInfo { name: "superradiance-kappa-sweep", analysis: Analysis::KappaSweep, description: "N=3 peak discrepancy at kappa/g = 10, 20, 40" },
    PresetInfo { name: "three-level-compare", analysis: Analysis::ThreeLevelCompare, description: "N=3 emission with and without the transmon f level" },
    PresetInfo { name: "bistability-q", analysis: Analysis::BistabilityQ, description: "closed-form single-qubit Q-function, kappa = 4 MHz" },
    PresetInfo { name: "bistability-peak-sweep", analysis: Analysis::PeakSweep, description: "single-qubit steady-state peaks for E = 45..117.6 MHz, kappa = 28.3 MHz" },
    PresetInfo { name: "multistability-n3-scaled", analysis: Analysis::Multistability, description: "N=3 at E/kappa = 2, g/kappa = 1, truncation 40" },
    PresetInfo { name: "multistability-n3-intermediate", analysis: Analysis::Multistability, description: "N=3 at E/kappa = 3, g/kappa = 1.5, truncation 66" },
    PresetInfo { name: "multistability-n3-full", analysis: Analysis::Multistability, description: "N=3 at E = 169.6, kappa = 42.4 MHz; needs numerics.allow_large" },
    PresetInfo { name: "custom", analysis: Analysis::Multistability, description: "config-driven; defaults to a single driven qubit" },
];

fn system(couplings: &[f64], kappa: f64, relaxation: f64) -> SystemConfig {
    SystemConfig {
        couplings: couplings.to_vec(),
        kappa,
        relaxation: PerEmitter::Uniform(relaxation),
        dephasing: PerEmitter::Uniform(0.0),
        cavity_detuning: 0.0,
        qubit_detuning: PerEmitter::Uniform(0.0),
        drive: 0.0,
        anharmonicity: None,
        upper_couplings: None,
    }
}

fn config(name: &str, analysis: Analysis, system: SystemConfig, numerics: Numerics, sweep: SweepConfig) -> ScenarioConfig {
    ScenarioConfig { scenario: name.into(), analysis, system, numerics, sweep, output: OutputConfig::default() }
}

fn with_truncation(truncation: usize) -> Numerics {
    Numerics { truncation: Some(truncation), ..Numerics::default() }
}

pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|p| p.name)
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let none = SweepConfig::default;
    let c = match name {
        "superradiance-n3" => config(name, Analysis::Superradiance, system(&DEVICE_N3, 2000.0, 0.19), with_truncation(8), none()),
        "superradiance-n4" => config(name, Analysis::Superradiance, system(&DEVICE_N4, 2000.0, 0.19), with_truncation(8), none()),
        "superradiance-n5" => config(name, Analysis::Superradiance, system(&DEVICE_N5, 2000.0, 0.19), with_truncation(8), none()),
        "superradiance-kappa-sweep" => config(
            name,
            Analysis::KappaSweep,
            system(&DEVICE_N3, 2000.0, 0.19),
            with_truncation(8),
            SweepConfig { bad_cavity_ratios: vec![10.0, 20.0, 40.0], drives: vec![] },
        ),
        "three-level-compare" => {
            let mut s = system(&DEVICE_N3, 2000.0, 0.19);
            s.anharmonicity = Some(660.0);
            config(name, Analysis::ThreeLevelCompare, s, with_truncation(8), none())
        }
        "bistability-q" => {
            // the main panel leaves E open; 2E/κ = 10 places the slice
            let mut s = system(&[85.0], 4.0, 0.19);
            s.drive = 20.0;
            config(name, Analysis::BistabilityQ, s, Numerics::default(), none())
        }
        "bistability-peak-sweep" => config(
            name,
            Analysis::PeakSweep,
            system(&[85.0], 28.3, 0.19),
            Numerics::default(),
            SweepConfig { bad_cavity_ratios: vec![], drives: vec![45.0, 54.0, 63.0, 72.0, 81.0, 90.0, 99.0, 108.0, 117.6] },
        ),
        "multistability-n3-scaled" => {
            let mut s = system(&[42.4; 3], 42.4, 0.19);
            s.drive = 84.8;
            config(name, Analysis::Multistability, s, with_truncation(40), none())
        }
        "multistability-n3-intermediate" => {
            // halfway to the full coupling ratio; the outer peaks resolve here
            let mut s = system(&[63.6; 3], 42.4, 0.19);
            s.drive = 127.2;
            config(name, Analysis::Multistability, s, with_truncation(66), none())
        }
        "multistability-n3-full" => {
            let mut s = system(&DEVICE_N3, 42.4, 0.19);
            s.drive = 169.6;
            config(name, Analysis::Multistability, s, with_truncation(120), none())
        }
        "custom" => {
            let mut s = system(&[20.0], 10.0, 0.5);
            s.drive = 40.0;
            config(name, Analysis::Multistability, s, Numerics::default(), none())
        }
        _ => return None,
    };
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_complete_and_resolvable() {
        assert!(CATALOG.len() >= 9);
        for info in CATALOG {
            let c = preset(info.name).unwrap();
            assert_eq!(c.scenario, info.name);
            assert_eq!(c.analysis, info.analysis);
            c.validate().unwrap();
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for name in names() {
            let c = preset(name).unwrap();
            let back: ScenarioConfig = toml::from_str(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{name}");
        }
    }

    #[test]
    fn five_qubit_couplings() {
        assert_eq!(preset("superradiance-n5").unwrap().system.couplings, vec![59.0, 59.4, 59.9, 60.9, 60.7]);
    }
}

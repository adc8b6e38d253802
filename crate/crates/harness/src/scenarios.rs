//! Built-in scenarios.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, LN_2};

use solnft::modem::ConstellationSpec;
use solnft::ssfm::Splitting;
use solnft::stats::Equalizer;

use crate::config::{
    AmplifierKind, ConstellationSection, LinkSection, Modulation, ReceiverSection, ScenarioConfig, ScenarioKind,
    SimulationSection,
};
use crate::error::HarnessError;

pub const SCENARIO_NAMES: [&str; 4] = [
    "first-order-independent",
    "first-order-differential",
    "second-order-qpsk",
    "raman-motivation",
];

/// 72 spans of 41.5 km with 10 dB EDFAs.
pub fn standard_link() -> LinkSection {
    LinkSection {
        gamma_per_w_km: 1.25,
        beta2_ps2_per_km: -21.67,
        alpha_per_km: 0.0459,
        span_length_km: 41.5,
        n_spans: 72,
        noise_figure_db: 10.0,
        carrier_frequency_thz: 193.55,
        amplification: AmplifierKind::Edfa,
        nsp: 1.1,
        noise: true,
    }
}

/// Every 8 spans (332 km), nine receivers.
pub fn standard_checkpoints() -> Vec<usize> {
    (1..=9).map(|i| 8 * i).collect()
}

fn first_order_constellation() -> ConstellationSection {
    let l = -LN_2 / 2.0;
    ConstellationSection {
        phases_rad: ConstellationSpec::psk(8),
        magnitudes_log: vec![vec![l - 1.0, l, l + 1.0]],
        delta_t_points: vec![-1.0, 0.0, 1.0],
        theta_points_rad: vec![FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8],
        rotation_offset_per_eigenvalue_rad: 0.0,
    }
}

fn receiver() -> ReceiverSection {
    ReceiverSection {
        lowpass_cutoff_factor: 1.0,
        truncation_factor: 1.5,
        upsample_factor: 4,
    }
}

fn simulation(step_size_m: f64) -> SimulationSection {
    SimulationSection {
        step_size_m,
        splitting: Splitting::Fourth,
        samples_per_scale: 8,
        frame_factor: 10.0,
        window_flat_fraction: 0.8,
        trace_points_per_span: 1,
    }
}

fn first_order(kind: ScenarioKind, modulation: Modulation) -> ScenarioConfig {
    ScenarioConfig {
        scenario: kind,
        modulation,
        t0_ps: 47.0,
        eigenvalues: vec![[0.0, 0.5]],
        n_pulses: 1000,
        master_seed: 1,
        checkpoint_spans: standard_checkpoints(),
        equalizers: vec![Equalizer::Mbr],
        ser_convention: Default::default(),
        output_dir: "out".into(),
        link: standard_link(),
        constellation: first_order_constellation(),
        receiver: receiver(),
        simulation: simulation(2000.0),
    }
}

/// Fully populated configuration of a named scenario.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = match name {
        "first-order-independent" => first_order(ScenarioKind::FirstOrderIndependent, Modulation::Independent),
        "first-order-differential" => first_order(ScenarioKind::FirstOrderDifferential, Modulation::Differential),
        "second-order-qpsk" => ScenarioConfig {
            scenario: ScenarioKind::SecondOrderQpsk,
            modulation: Modulation::Independent,
            eigenvalues: vec![[0.0, 0.3], [0.0, 0.6]],
            constellation: ConstellationSection {
                phases_rad: ConstellationSpec::psk(4),
                magnitudes_log: vec![vec![0.14f64.ln()], vec![5f64.ln()]],
                delta_t_points: vec![0.0],
                theta_points_rad: vec![FRAC_PI_4],
                rotation_offset_per_eigenvalue_rad: FRAC_PI_4,
            },
            ..first_order(ScenarioKind::SecondOrderQpsk, Modulation::Independent)
        },
        "raman-motivation" => ScenarioConfig {
            scenario: ScenarioKind::RamanMotivation,
            equalizers: vec![Equalizer::Mbr, Equalizer::Gae],
            link: LinkSection {
                amplification: AmplifierKind::Raman,
                ..standard_link()
            },
            n_pulses: 200,
            t0_ps: 20.0,
            simulation: simulation(500.0),
            ..first_order(ScenarioKind::RamanMotivation, Modulation::Independent)
        },
        other => return Err(HarnessError::UnknownScenario(other.to_string())),
    };
    cfg.output_dir = format!("out/{name}");
    cfg.validate()?;
    Ok(cfg)
}

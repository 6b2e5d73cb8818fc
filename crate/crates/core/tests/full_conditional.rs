//! Every full conditional must change exactly as the joint does when its own
//! variable moves; anything else means a factor is missing or spurious.

use battbayes_core::app::io::load_training_set;
use battbayes_core::app::synthetic::{drive_cycle, DriveCycleParams};
use battbayes_core::app::workflow::{cycling_observation, cycling_points};
use battbayes_core::model::ModelConfig;
use battbayes_core::sampler::init_state;
use battbayes_core::scenario::{
    compose_profile, scenario_observation, scenario_parameters, task_shares, DrivingSession,
    RepeatFrequency, ServiceProfile, Task,
};
use battbayes_core::{
    DailyTaskSchedule, Network, ObservationSet, ScenarioConfig, TaskShares, VarId, VehicleSpec,
};
use proptest::prelude::*;

fn data() -> ObservationSet {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_cycling.csv");
    let points = cycling_points(&load_training_set(&path).unwrap());
    let mut obs: Vec<_> = points.iter().step_by(10).map(cycling_observation).collect();

    let schedule = DailyTaskSchedule {
        driving_sessions: (0..2)
            .map(|s| {
                DrivingSession::from_velocity(drive_cycle(&DriveCycleParams {
                    duration_s: 1800,
                    cruise_speed: 11.0,
                    aggressiveness: 0.5,
                    seed: s,
                }))
            })
            .collect(),
        peak_shaving: Some(ServiceProfile::constant(6600.0, 0.4, RepeatFrequency::Daily)),
        freq_regulation: Some(ServiceProfile::constant(1500.0, 0.5, RepeatFrequency::EveryOtherDay)),
        ..Default::default()
    };
    let cfg = ScenarioConfig::default();
    let vehicle = VehicleSpec::default();
    let profile = compose_profile(&schedule, &vehicle, 30, &cfg).unwrap();
    let shares = task_shares(&profile).unwrap();
    let (_, base) = init_state(
        &ObservationSet::new(obs.clone()),
        &vehicle,
        &TaskShares::single(Task::ChargeL2),
        &ModelConfig::default(),
    )
    .unwrap();
    let params = scenario_parameters(&base, &shares, &vehicle, ModelConfig::default().priors.k_floor);
    obs.push(
        scenario_observation("drive", &profile, &schedule, vec![295.0, 300.0, 298.0], &params, &cfg, &ModelConfig::default())
            .unwrap(),
    );
    ObservationSet::new(obs)
}

fn perturbed(var: VarId, x: f64, step: f64) -> f64 {
    let y = if x.abs() > 1e-9 { x * (1.0 + step) } else { x + step };
    match var.family() {
        battbayes_core::Family::Beta => y.clamp(1e-6, 1.0 - 1e-6),
        _ => y,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_conditional_tracks_the_joint(step in prop_oneof![-0.05..-0.001f64, 0.001..0.05f64]) {
        let data = data();
        let cfg = ModelConfig::default();
        let (state, params) = init_state(&data, &VehicleSpec::default(), &TaskShares::single(Task::ChargeL2), &cfg).unwrap();
        let priors = cfg.priors.resolve(&params);
        let mut net = Network::new(&data, &cfg, state, params, priors).unwrap();
        let mut checked = 0;
        for var in net.nodes() {
            let x0 = net.get(var).unwrap();
            let fc0 = net.log_full_conditional(var).unwrap();
            let j0 = net.log_joint();
            net.set(var, perturbed(var, x0, step)).unwrap();
            let fc1 = net.log_full_conditional(var).unwrap();
            let j1 = net.log_joint();
            net.set(var, x0).unwrap();
            if !(fc0.is_finite() && fc1.is_finite() && j0.is_finite() && j1.is_finite()) {
                prop_assert_eq!(fc1.is_finite(), j1.is_finite(), "{} support mismatch", var);
                continue;
            }
            let d_fc = fc1 - fc0;
            let d_joint = j1 - j0;
            prop_assert!(
                (d_fc - d_joint).abs() <= 1e-7 * d_joint.abs().max(1.0),
                "{}: full conditional moved {} but the joint moved {}", var, d_fc, d_joint
            );
            checked += 1;
        }
        prop_assert!(checked > 40);
    }
}

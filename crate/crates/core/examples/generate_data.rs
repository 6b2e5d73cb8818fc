//! Regenerates the bundled files under `data/`.
//!
//! `cargo run -p battbayes-core --example generate_data -- data`

use std::path::{Path, PathBuf};

use battbayes_core::app::io::{write_time_series, write_training_set};
use battbayes_core::app::synthetic::{
    climate_series, cycling_dataset, drive_cycle, freq_regulation_profile, mean_abs_accel, solar_profile,
    reference_cells, true_parameters, DriveCycleParams,
};
use battbayes_core::scenario::{compose_profile, DailyTaskSchedule, DrivingSession, Task};
use battbayes_core::{ScenarioConfig, TimeSeries, VehicleSpec};

const SEED: u64 = 2024;
/// Two commutes of this length make up the reference day's 1.65 h of driving.
const SESSION_S: usize = 2970;
const TARGET_DRIVE_C: f64 = 0.2;

fn driving_c_rate(sessions: &[TimeSeries]) -> f64 {
    let schedule = DailyTaskSchedule {
        driving_sessions: sessions.iter().cloned().map(DrivingSession::from_velocity).collect(),
        ..Default::default()
    };
    let p = compose_profile(&schedule, &VehicleSpec::default(), 1, &ScenarioConfig::default())
        .expect("driving-only schedule composes");
    p.intensity(Task::Driving).expect("driving present").c_rate
}

fn commute(aggressiveness: f64, cruise: f64, seed: u64) -> TimeSeries {
    drive_cycle(&DriveCycleParams { duration_s: SESSION_S, cruise_speed: cruise, aggressiveness, seed })
}

/// Cruise speed at which the moderate driver's two commutes average 0.2C.
fn calibrate_cruise() -> f64 {
    let (mut lo, mut hi) = (3.0, 40.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let c = driving_c_rate(&[commute(0.5, mid, SEED), commute(0.5, mid, SEED + 1)]);
        if c < TARGET_DRIVE_C {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    let note = |s: &str| vec![s.to_string(), format!("generated by examples/generate_data.rs, seed {SEED}")];

    let params = true_parameters();
    let records = cycling_dataset(&params, &reference_cells(), 2, 0.3, SEED);
    write_training_set(
        &root.join("synthetic_cycling.csv"),
        &records,
        &note(&format!(
            "SYNTHETIC fade data: alpha={} beta={} Ea={} eta={} zeta={}, noise sd 0.3 percentage points",
            params.alpha, params.beta, params.activation_energy, params.eta, params.zeta
        )),
    )
    .unwrap();

    let cruise = calibrate_cruise();
    println!("cruise speed {cruise:.3} m/s");
    for (name, aggr) in [("gentle", 0.0), ("moderate", 0.5), ("aggressive", 1.0)] {
        for (leg, offset) in [("am", 0), ("pm", 1)] {
            let v = commute(aggr, cruise, SEED + offset);
            println!("{name} {leg}: mean |a| {:.3} m/s2", mean_abs_accel(&v));
            write_time_series(
                &root.join(format!("drive/{name}_{leg}.csv")),
                &v,
                &note(&format!("SYNTHETIC velocity (m/s), aggressiveness {aggr}")),
            )
            .unwrap();
        }
    }

    write_time_series(
        &root.join("profiles/solar.csv"),
        &solar_profile(2074.0, 1.174, 60.0),
        &note("SYNTHETIC solar absorption, pack W (negative charges)"),
    )
    .unwrap();
    write_time_series(
        &root.join("profiles/freq_regulation.csv"),
        &freq_regulation_profile(1717.0, 0.87, 4.0, SEED),
        &note("SYNTHETIC regulation signal, pack W"),
    )
    .unwrap();

    for (name, mean, amp) in [("cool", 8.0, 8.0), ("warm", 24.0, 6.0)] {
        write_time_series(
            &root.join(format!("climate/{name}.csv")),
            &climate_series(mean, amp, 365),
            &note("SYNTHETIC daily mean temperature (°C)"),
        )
        .unwrap();
    }

    let drive = |driver: &str| {
        format!("[[driving]]\nvelocity = \"../drive/{driver}_am.csv\"\n\n[[driving]]\nvelocity = \"../drive/{driver}_pm.csv\"\n")
    };
    let solar = "\n[solar]\nprofile = \"../profiles/solar.csv\"\nrepeat = \"daily\"\n";
    let freq = "\n[freq_regulation]\nprofile = \"../profiles/freq_regulation.csv\"\nrepeat = \"daily\"\n";
    let peak = "\n[peak_shaving]\npower_w = 6600.0\nduration_h = 0.374\nrepeat = \"daily\"\n";
    let header = "# Daily task schedule; see the README for the format.\n\n";
    for driver in ["gentle", "moderate", "aggressive"] {
        write(&root.join(format!("schedules/{driver}.toml")), &format!("{header}{}", drive(driver)));
    }
    write(&root.join("schedules/solar.toml"), &format!("{header}{}{solar}", drive("moderate")));
    write(&root.join("schedules/peak_shaving.toml"), &format!("{header}{}{peak}", drive("moderate")));
    write(
        &root.join("schedules/reference.toml"),
        &format!("{header}{}{solar}{freq}{peak}", drive("moderate")),
    );
}

use coclo::filter::FilterConfig;
use coclo::io::truth_trajectory;
use coclo::metrics::{drift_report, report_csv};
use coclo::model::RobotModel;
use coclo::replay::{default_calibration, replay_frames, run_imu_baseline};
use coclo::sim::{simulate, GaitParams, NoiseSpec, TerrainProfile};

#[test]
fn truth_rate_does_not_change_drift() {
    let model = RobotModel::reference_hexapod();
    let trace = simulate(
        &model,
        &GaitParams::default(),
        &TerrainProfile::flat(),
        &NoiseSpec::default(),
        20.0,
        11,
    )
    .unwrap();
    let config = FilterConfig::default();
    let calib = default_calibration(&model, &config);
    let truth = truth_trajectory(&trace);
    let est = replay_frames(&trace.frames, None, &model, &calib, &config)
        .unwrap()
        .trajectory;

    let full = drift_report(&est, &truth).unwrap();
    let mut half: Vec<_> = truth.iter().step_by(2).cloned().collect();
    if half.last().unwrap().timestamp != truth.last().unwrap().timestamp {
        half.push(truth.last().unwrap().clone());
    }
    let coarse = drift_report(&est, &half).unwrap();
    assert!(
        (full.drift_percent - coarse.drift_percent).abs() < 0.1,
        "{} vs {}",
        full.drift_percent,
        coarse.drift_percent
    );

    let dr = run_imu_baseline(&trace.frames, &model, &config).unwrap();
    assert!(drift_report(&dr, &truth).unwrap().drift_percent > full.drift_percent);
}

#[test]
fn identical_file_gives_a_single_zero_row() {
    let model = RobotModel::reference_hexapod();
    let trace = simulate(
        &model,
        &GaitParams::default(),
        &TerrainProfile::flat(),
        &NoiseSpec::zero(),
        3.0,
        1,
    )
    .unwrap();
    let truth = truth_trajectory(&trace);
    let r = drift_report(&truth, &truth).unwrap();
    assert_eq!(r.final_error, [0.0; 3]);
    assert_eq!(r.drift_percent, 0.0);
    assert_eq!(r.rmse, 0.0);
    let csv = report_csv(&[("truth".to_string(), r)]);
    assert_eq!(csv.lines().count(), 2);
}

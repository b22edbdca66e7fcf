use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pointmorph::io::{read_report, read_trajectory, write_ply, write_trajectory, TrajectoryManifest, MANIFEST_FILE};
use pointmorph::{chamfer, generate, SceneKind, SceneSpec, Trajectory};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointmorph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn small_hinge(dir: &Path) -> PathBuf {
    let spec = SceneSpec {
        points_per_part: 150,
        ..SceneSpec::new(SceneKind::Hinge)
    };
    fs::write(dir.join("spec.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let out = run(&["generate", "--spec", &path(dir, "spec.json"), "--out", &path(dir, "scene")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("scene")
}

#[test]
fn frozen_trajectory_metrics_equal_half_chamfer() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(&SceneSpec {
        points_per_part: 100,
        ..SceneSpec::new(SceneKind::Hinge)
    })
    .unwrap();
    let frozen = Trajectory::from_checkpoints((0..24).collect(), vec![scene.start.positions().to_vec(); 24]).unwrap();
    write_trajectory(&frozen, dir.path().join("traj")).unwrap();
    write_ply(&scene.start, dir.path().join("start.ply")).unwrap();
    write_ply(&scene.end, dir.path().join("end.ply")).unwrap();

    let out = run(&[
        "metrics",
        "--traj",
        &path(dir.path(), "traj"),
        "--gt-start",
        &path(dir.path(), "start.ply"),
        "--gt-end",
        &path(dir.path(), "end.ply"),
        "--distance",
        "cd",
        "--out",
        &path(dir.path(), "report.json"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path().join("report.json")).unwrap();
    // Positions pass through the PLY round trip exactly, so the oracle uses the in-memory clouds.
    let expected = chamfer(&scene.end, &scene.start).unwrap() / 2.0;
    assert!((report.aggregate - expected).abs() <= 1e-9);
    assert_eq!(report.per_checkpoint.len(), 24);
}

#[test]
fn zero_iterations_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_hinge(dir.path());
    let out = run(&[
        "fit",
        "--start",
        &path(&scene, "start.ply"),
        "--target",
        &path(&scene, "end.ply"),
        "--out",
        &path(dir.path(), "traj"),
        "--iters",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_iterations"));
}

#[test]
fn unknown_flag_and_missing_input_exit_codes() {
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sample",
        "--traj",
        &path(dir.path(), "nowhere"),
        "--alpha",
        "0.5",
        "--out",
        &path(dir.path(), "x.ply"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_fit_metrics_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_hinge(dir.path());
    let traj_dir = dir.path().join("traj");
    let out = run(&[
        "fit",
        "--start",
        &path(&scene, "start.ply"),
        "--target",
        &path(&scene, "end.ply"),
        "--out",
        &traj_dir.to_string_lossy(),
        "--k",
        "20",
        "--iters",
        "200",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let plys = fs::read_dir(&traj_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ply"))
        .count();
    assert_eq!(plys, 24);
    let log = fs::read_to_string(traj_dir.join("fit_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 200);

    for distance in ["cd", "emd", "emd-entropic"] {
        let report_path = path(dir.path(), &format!("report_{distance}.json"));
        let out = run(&[
            "metrics",
            "--traj",
            &traj_dir.to_string_lossy(),
            "--gt-start",
            &path(&scene, "start.ply"),
            "--gt-end",
            &path(&scene, "end.ply"),
            "--distance",
            distance,
            "--sinkhorn-iters",
            "50",
            "--out",
            &report_path,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report = read_report(&report_path).unwrap();
        assert_eq!(report.per_checkpoint.len(), 24);
        assert!(report.aggregate.is_finite() && report.aggregate >= 0.0);
    }
}

#[test]
fn smooth_and_sample_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_hinge(dir.path());
    let out = run(&[
        "fit",
        "--start",
        &path(&scene, "start.ply"),
        "--target",
        &path(&scene, "end.ply"),
        "--out",
        &path(dir.path(), "traj"),
        "--k",
        "10",
        "--iters",
        "60",
        "--checkpoints",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "smooth",
        "--traj",
        &path(dir.path(), "traj"),
        "--window",
        "3",
        "--out",
        &path(dir.path(), "smoothed"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let original = read_trajectory(dir.path().join("traj")).unwrap();
    let smoothed = read_trajectory(dir.path().join("smoothed")).unwrap();
    assert_eq!(smoothed.len(), 8);
    assert_eq!(smoothed.checkpoints[0].positions, original.checkpoints[0].positions);
    assert_eq!(smoothed.checkpoints[7].positions, original.checkpoints[7].positions);

    let out = run(&["smooth", "--traj", &path(dir.path(), "traj"), "--window", "4", "--out", &path(dir.path(), "bad")]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "sample",
        "--traj",
        &path(dir.path(), "traj"),
        "--alpha",
        "1",
        "--out",
        &path(dir.path(), "end_sample.ply"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sampled = pointmorph::io::read_ply(dir.path().join("end_sample.ply")).unwrap();
    assert_eq!(sampled.positions(), original.end_positions.as_slice());

    let out = run(&[
        "sample",
        "--traj",
        &path(dir.path(), "traj"),
        "--alpha",
        "1.5",
        "--out",
        &path(dir.path(), "x.ply"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(&SceneSpec {
        points_per_part: 20,
        ..SceneSpec::new(SceneKind::Hinge)
    })
    .unwrap();
    let traj = Trajectory::from_checkpoints(
        vec![0, 5, 10],
        vec![
            scene.start.positions().to_vec(),
            scene.start.positions().to_vec(),
            scene.end.positions().to_vec(),
        ],
    )
    .unwrap();
    write_trajectory(&traj, dir.path()).unwrap();
    fs::remove_file(dir.path().join("ckpt_001.ply")).unwrap();

    let err = read_trajectory(dir.path()).unwrap_err();
    assert!(err.to_string().contains("ckpt_001.ply"), "{err}");
    let out = run(&["smooth", "--traj", &path(dir.path(), ""), "--out", &path(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ckpt_001.ply"));
}

#[test]
fn trajectory_round_trip_preserves_alphas_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        points_per_part: 50,
        ..SceneSpec::new(SceneKind::Hinge)
    };
    let gt = pointmorph::ground_truth_trajectory(&spec, 24).unwrap();
    let manifest = write_trajectory(&gt, dir.path()).unwrap();
    assert_eq!(manifest.checkpoint_files.len(), 24);
    let back = read_trajectory(dir.path()).unwrap();
    assert_eq!(back.alphas(), gt.alphas());
    for (a, b) in back.checkpoints.iter().zip(&gt.checkpoints) {
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.iteration, b.iteration);
    }

    let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    let parsed: TrajectoryManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.alphas, gt.alphas());
}

#[test]
fn manifest_with_unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        points_per_part: 10,
        ..SceneSpec::new(SceneKind::RigidTranslate)
    };
    write_trajectory(&pointmorph::ground_truth_trajectory(&spec, 3).unwrap(), dir.path()).unwrap();
    let manifest_path = dir.path().join(MANIFEST_FILE);
    let mut value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    value["surprise"] = serde_json::json!(1);
    fs::write(&manifest_path, value.to_string()).unwrap();
    assert!(read_trajectory(dir.path()).is_err());
}

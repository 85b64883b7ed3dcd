use couette::cli::io::trajectory_csv;
use couette::cli::run::{initial_field, run};
use couette::cli::{RunConfig, Threads};
use couette::grid::GridSpec;
use couette::SystemKind;
use proptest::prelude::*;

fn small(seed: u64, t_end: f64) -> RunConfig {
    let mut c = RunConfig::minimal(1.4, 0.02, 0.8, t_end);
    c.grid = GridSpec::new(3, 6.0, 0.5).unwrap();
    c.data.seed = seed;
    c.output_interval = 0.25;
    c
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let mut c = small(11, 4.0);
    c.emit_snapshots = true;
    let runs: Vec<_> = [1, 2, 3, 5]
        .into_iter()
        .map(|n| {
            c.threads = Threads::Count(n);
            run(&c, None).unwrap()
        })
        .collect();
    let reference = trajectory_csv(&runs[0].trajectory.records);
    for r in &runs[1..] {
        assert_eq!(trajectory_csv(&r.trajectory.records), reference);
        assert_eq!(r.trajectory.snapshots, runs[0].trajectory.snapshots);
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let c = small(5, 3.0);
    let a = run(&c, None).unwrap();
    let b = run(&c, None).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(initial_field(&c).unwrap(), initial_field(&c).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn snapshots_stay_real_and_conserve(seed in 0u64..10_000, full in any::<bool>()) {
        let mut c = small(seed, 2.0);
        c.emit_snapshots = true;
        c.system = if full { SystemKind::Full } else { SystemKind::Reduced };
        let out = run(&c, None).unwrap();
        let scale = out.trajectory.initial_l2;
        for r in &out.trajectory.records {
            prop_assert!(r.conserved_r1_max <= 1e-12 * scale);
            prop_assert!(r.conserved_r2_max <= 1e-12 * scale);
            prop_assert!(r.norm_pvx.is_finite() && r.energy_sum >= 0.0);
        }
        for snap in out.trajectory.snapshots.as_ref().unwrap() {
            for f in snap.components() {
                prop_assert!(f.hermitian_defect() <= 1e-15 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn constrained_data_has_no_forcing(seed in 0u64..10_000) {
        let mut c = small(seed, 0.0);
        c.constraint = true;
        let out = run(&c, None).unwrap();
        prop_assert!(out.manifest.initial_constraint_defect <= 1e-14);
    }
}

use imcrawler_core::demo::{run_demo, DemoParams};

#[test]
fn small_demo_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_demo(&DemoParams::new(7, 300, dir.path().to_path_buf())).unwrap();
    assert_eq!(report.junk_after_reextraction, 0);
    assert!(report.junk_first_pass > 0);
    assert_eq!(report.stored_profiles, 300);
    assert_eq!(report.store_conflicts, 0);
    assert!(dir.path().join("stats.json").exists());
}

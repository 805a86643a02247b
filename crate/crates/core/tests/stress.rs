//! Small-slack runs where the defection trigger can actually fire.

use gossip_bandits::cli;
use gossip_bandits::engine::sweep;
use gossip_bandits::Strategy;

#[test]
fn pull_counts_stay_within_the_slack_of_each_other() {
    let mut cfg = cli::preset("stress-B").unwrap().sim;
    cfg.strategies = vec![Strategy::Equilibrium; cfg.arm_count()];
    cfg.record_stride = 0;
    let slack = cfg.slack.unwrap();
    assert!(cfg.horizon as f64 / cfg.arm_count() as f64 - slack > 0.0);
    let seeds = 20;
    let cells = sweep(&[cfg], seeds, 0);
    let within = cells
        .iter()
        .map(|c| c.result.as_ref().unwrap())
        .inspect(|r| assert!(r.conservation_holds()))
        .filter(|r| r.max_pull_spread as f64 <= slack)
        .count();
    assert!(within as f64 >= 0.95 * seeds as f64, "{within}/{seeds} seeds within B = {slack}");
}

#[test]
fn a_starved_truthful_arm_does_not_break_the_run() {
    let mut cfg = cli::preset("stress-B").unwrap().sim;
    cfg.horizon = 5_000;
    cfg.slack = Some(cfg.horizon as f64 / (4.0 * cfg.arm_count() as f64));
    cfg.record_stride = 0;
    let r = gossip_bandits::simulate(&cfg).unwrap();
    assert!(r.conservation_holds());
    assert_eq!(r.pull_counts.iter().sum::<u64>(), cfg.horizon);
    // Every defection is reported once and never undone.
    let mut arms: Vec<usize> = r.defections.iter().map(|d| d.arm).collect();
    arms.dedup();
    assert_eq!(arms.len(), r.defections.len());
}

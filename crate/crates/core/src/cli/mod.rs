//! Scenario files, presets and output emitters behind the `gossip-bandits` binary.
//!
//! A scenario is a TOML document: a few top-level keys select the experiment shape and
//! a `[sim]` table holds the simulation config. The manifest written next to every
//! run is itself a valid scenario file with all derived parameters filled in.

pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::arms::Strategy;
use crate::engine::{
    self, nash_audit, resolve, DeviationOutcome, SimConfig, SimResult, TopologySpec,
};
use crate::metrics::{audit, revenue_bound, AuditReport, AuditSettings};
use crate::player::PlayerSettings;

/// Overrides the output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "GOSSIP_BANDITS_OUT";

pub const SUMMARY_HEADER: &str = "label,seed,graph_seed,k,horizon,tau,lambda,delta,theta,slack,\
revenue,revenue_bound,bound_satisfied,balance,regret,regret_half,best_arm_share_last_half,\
max_prob_gap,defections,pull_counts,utilities";

pub const ROUNDS_HEADER: &str = "t,pulled,reward,x,disagreement,offers,p,p_hat";

pub const NASH_HEADER: &str = "seed,arm,mode,u_conform,u_deviate,gap,bound,ratio";

/// Documentation of every CSV the CLI writes, shown in `--help`.
pub const CSV_SCHEMAS: &str = "\
Output files (UTF-8, LF, '.' decimals; list cells are ';'-separated):
  summary.csv   one row per cell:
                label,seed,graph_seed,k,horizon,tau,lambda,delta,theta,slack,revenue,
                revenue_bound,bound_satisfied,balance,regret,regret_half,
                best_arm_share_last_half,max_prob_gap,defections,pull_counts,utilities
  rounds.csv    every --stride-th round: t,pulled,reward,x,disagreement,offers,p,p_hat
  decay.csv     final-round gossip trace: iteration,disagreement,bound
  nash.csv      deviation audits: seed,arm,mode,u_conform,u_deviate,gap,bound,ratio
  audit.txt     human-readable audit; audit.kv the same as key=value lines
  manifest.toml resolved scenario; re-run it with --config to reproduce summary.csv
  fig2.svg, decay.svg with --plot; topology.txt, weights.txt with --dump-topology";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// `replicas` runs of `sim` with seeds `seed, seed + 1, ...`.
    #[default]
    Run,
    /// Every `tau` in `taus`, each with `replicas` seeds.
    TauSweep,
    /// Conforming run plus each deviation in `modes` for each arm in `probe_arms`.
    NashAudit,
}

/// Reference numbers printed next to the observed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub revenue: f64,
    pub revenue_bound: f64,
}

/// Provenance recorded in a manifest; ignored when the file is loaded back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ManifestInfo {
    pub version: String,
    pub created_unix: u64,
    pub wall_seconds: f64,
    pub cell_seeds: Vec<u64>,
    pub graph_seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub kind: ScenarioKind,
    #[serde(default = "one")]
    pub replicas: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taus: Vec<usize>,
    /// Arms probed by a Nash audit; empty probes all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_arms: Vec<usize>,
    /// Deviations tried by a Nash audit; empty tries all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<Strategy>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.replicas == 0 {
            bail!("replicas must be at least 1");
        }
        if self.kind == ScenarioKind::TauSweep && self.taus.is_empty() {
            bail!("tau-sweep needs a non-empty `taus` list");
        }
        if let Some(&a) = self.probe_arms.iter().find(|&&a| a >= self.sim.arm_count()) {
            bail!("probe arm {a} out of range for {} arms", self.sim.arm_count());
        }
        Ok(())
    }

    /// Player parameters, `theta` and `B` made explicit so the file alone pins them.
    pub fn expanded(&self) -> anyhow::Result<Self> {
        let mut out = self.clone();
        let resolved = resolve(&self.sim)?;
        let p = &resolved.player;
        out.sim.player = PlayerSettings {
            algorithm: p.algorithm,
            rho: Some(p.rho),
            gamma: Some(p.gamma),
            eta: Some(p.eta),
            beta: Some(p.beta),
            delta: Some(p.delta),
            side_observation: p.side_observation,
        };
        out.sim.theta = Some(resolved.theta);
        out.sim.slack = Some(resolved.slack);
        Ok(out)
    }

    fn probe_arms(&self) -> Vec<usize> {
        if self.probe_arms.is_empty() {
            (0..self.sim.arm_count()).collect()
        } else {
            self.probe_arms.clone()
        }
    }

    fn modes(&self) -> Vec<Strategy> {
        if self.modes.is_empty() {
            Strategy::DEVIATIONS.to_vec()
        } else {
            self.modes.clone()
        }
    }
}

fn base(means: Vec<f64>, horizon: u64, tau: usize) -> SimConfig {
    SimConfig {
        means,
        horizon,
        tau,
        seed: 1,
        topology: TopologySpec::ErdosRenyi { p: 0.6, seed: None },
        player: PlayerSettings::default(),
        strategies: Vec::new(),
        slack: None,
        theta: None,
        record_stride: 100,
        skip_unchanged_consensus: false,
        audit: AuditSettings::default(),
    }
}

/// Ten arms: seven at 0.4 and three at 0.8, 0.85 and 0.9, best first.
pub fn table1_means() -> Vec<f64> {
    let mut m = vec![0.9, 0.85, 0.8];
    m.extend([0.4; 7]);
    m
}

pub fn nash_means() -> Vec<f64> {
    vec![0.9, 0.85, 0.8, 0.4, 0.4]
}

fn scenario(name: &str, kind: ScenarioKind, sim: SimConfig) -> Scenario {
    Scenario {
        name: name.into(),
        kind,
        replicas: 1,
        taus: Vec::new(),
        probe_arms: Vec::new(),
        modes: Vec::new(),
        plot: false,
        reference: None,
        sim,
        manifest: None,
    }
}

pub fn table1_config() -> SimConfig {
    let mut sim = base(table1_means(), 500_000, 50);
    sim.player.delta = Some(2778.0);
    sim
}

pub fn presets() -> Vec<Scenario> {
    let mut table1 = scenario("table1", ScenarioKind::Run, table1_config());
    table1.reference = Some(Reference {
        revenue: 105_169.0,
        revenue_bound: 117_838.0,
    });

    let mut fig2 = scenario("fig2", ScenarioKind::Run, table1_config());
    fig2.plot = true;

    let mut tau_sweep = scenario("tau-sweep", ScenarioKind::TauSweep, base(table1_means(), 20_000, 50));
    tau_sweep.taus = vec![1, 5, 10, 25, 50];
    tau_sweep.replicas = 10;

    let mut nash = scenario("nash-audit", ScenarioKind::NashAudit, base(nash_means(), 20_000, 50));
    nash.replicas = 10;

    let mut truthful = base(table1_means(), 100_000, 50);
    truthful.strategies = vec![Strategy::Truthful; truthful.means.len()];
    let truthful = scenario("truthful-baseline", ScenarioKind::Run, truthful);

    let mut stress = base(nash_means(), 20_000, 50);
    stress.slack = Some(stress.horizon as f64 / (4.0 * stress.means.len() as f64));
    stress.strategies = vec![Strategy::Equilibrium; stress.means.len()];
    stress.strategies[0] = Strategy::Truthful;
    stress.record_stride = 10;
    let mut stress = scenario("stress-B", ScenarioKind::Run, stress);
    stress.plot = true;

    let smoke = scenario("smoke", ScenarioKind::Run, {
        let mut s = base(vec![0.9, 0.85, 0.4], 1_000, 5);
        s.record_stride = 10;
        s
    });

    vec![table1, fig2, tau_sweep, nash, truthful, stress, smoke]
}

pub fn preset(name: &str) -> Option<Scenario> {
    presets().into_iter().find(|p| p.name == name)
}

/// Command-line knobs layered over a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub stride: Option<u64>,
    pub replicas: Option<u32>,
    pub plot: bool,
    pub strict: bool,
    pub jobs: usize,
    pub dump_topology: bool,
    pub out: PathBuf,
    pub quiet: bool,
}

impl RunOptions {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.sim.seed = seed;
        }
        if let Some(stride) = self.stride {
            scenario.sim.record_stride = stride;
        }
        if let Some(r) = self.replicas {
            scenario.replicas = r;
        }
        scenario.plot |= self.plot;
    }
}

/// One simulation in a scenario and where its files go.
struct Cell {
    label: String,
    config: SimConfig,
}

fn cells(s: &Scenario) -> Vec<Cell> {
    let seeds = (0..s.replicas).map(|r| s.sim.seed.wrapping_add(r as u64));
    match s.kind {
        ScenarioKind::Run | ScenarioKind::NashAudit => seeds
            .map(|seed| Cell {
                label: format!("seed-{seed}"),
                config: s.sim.with_seed(seed),
            })
            .collect(),
        ScenarioKind::TauSweep => s
            .taus
            .iter()
            .flat_map(|&tau| {
                (0..s.replicas).map(move |r| {
                    let seed = s.sim.seed.wrapping_add(r as u64);
                    let mut config = s.sim.with_seed(seed);
                    config.tau = tau;
                    Cell {
                        label: format!("tau-{tau}-seed-{seed}"),
                        config,
                    }
                })
            })
            .collect(),
    }
}

struct CellOutcome {
    label: String,
    result: SimResult,
    report: AuditReport,
    deviations: Vec<DeviationOutcome>,
}

fn run_cell(s: &Scenario, cell: &Cell) -> anyhow::Result<CellOutcome> {
    let (result, deviations) = match s.kind {
        ScenarioKind::NashAudit => nash_audit(&cell.config, &s.probe_arms(), &s.modes())?,
        _ => (engine::simulate(&cell.config)?, Vec::new()),
    };
    let report = audit(&result, &cell.config.audit).with_nash_gaps(&deviations);
    Ok(CellOutcome {
        label: cell.label.clone(),
        result,
        report,
        deviations,
    })
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn summary_row(label: &str, r: &SimResult) -> String {
    let bound = revenue_bound(r.arm_count(), r.horizon, r.delta);
    let revenue = r.revenue().to_f64();
    let utilities: Vec<f64> = r.utilities.iter().map(|u| u.to_f64()).collect();
    format!(
        "{label},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.seed,
        r.graph_seed.map(|s| s.to_string()).unwrap_or_default(),
        r.arm_count(),
        r.horizon,
        r.tau,
        r.lambda,
        r.delta,
        r.theta,
        r.slack,
        revenue,
        bound,
        revenue <= bound,
        crate::metrics::balance_statistic(&r.pull_counts),
        r.regret,
        r.regret_half,
        r.best_arm_share_last_half(),
        r.max_prob_gap(),
        r.defections.len(),
        join(&r.pull_counts),
        join(&utilities),
    )
}

pub fn rounds_csv(r: &SimResult) -> String {
    let mut s = String::from(ROUNDS_HEADER);
    s.push('\n');
    for rec in &r.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            rec.t,
            rec.pulled,
            rec.reward,
            rec.x,
            rec.disagreement,
            join(&rec.offers),
            join(&rec.p),
            join(&rec.p_hat)
        );
    }
    s
}

fn nash_rows(seed: u64, bound: f64, deviations: &[DeviationOutcome]) -> String {
    let mut s = String::new();
    for d in deviations {
        let _ = writeln!(
            s,
            "{seed},{},{},{},{},{},{bound},{}",
            d.arm,
            d.mode.name(),
            d.u_conform,
            d.u_deviate,
            d.gap,
            d.gap / bound
        );
    }
    s
}

/// Writes through a temporary file and a rename so readers never see partial files.
fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn write_cell(dir: &Path, s: &Scenario, cell: &Cell, out: &CellOutcome, opts: &RunOptions) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> anyhow::Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &contents).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    if cell.config.record_stride > 0 {
        put("rounds.csv", rounds_csv(&out.result))?;
    }
    if let Some(trace) = &out.result.last_trace {
        put("decay.csv", trace.to_csv())?;
    }
    put("audit.txt", out.report.summary())?;
    put("audit.kv", out.report.to_key_values())?;
    if s.plot {
        let r = &out.result;
        put(
            "fig2.svg",
            svg::bar_chart(
                &format!("pulls per arm ({})", out.label),
                &r.pull_counts,
                r.horizon as f64 / r.arm_count() as f64,
            ),
        )?;
        if let Some(trace) = &r.last_trace {
            let bound: Vec<f64> = (0..trace.disagreements.len()).map(|n| trace.bound(n)).collect();
            put(
                "decay.svg",
                svg::log_line_chart(
                    &format!("gossip disagreement, final round ({})", out.label),
                    &[
                        ("disagreement", "steelblue", trace.disagreements.clone()),
                        ("alpha lambda^2n", "firebrick", bound),
                    ],
                ),
            )?;
        }
    }
    if opts.dump_topology {
        let resolved = resolve(&cell.config)?;
        put("topology.txt", resolved.network.graph.to_text())?;
        put("weights.txt", resolved.network.weights.to_text())?;
    }
    Ok(written)
}

/// Runs a scenario into `opts.out`. Returns the process exit code.
pub fn run(mut scenario: Scenario, opts: &RunOptions) -> anyhow::Result<i32> {
    opts.apply(&mut scenario);
    scenario.validate()?;
    let scenario = scenario.expanded()?;
    let started = Instant::now();
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;

    let cells = cells(&scenario);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    let outcomes: Vec<anyhow::Result<CellOutcome>> = pool.install(|| {
        use rayon::prelude::*;
        cells.par_iter().map(|c| run_cell(&scenario, c)).collect()
    });

    let nested = cells.len() > 1;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut nash = format!("{NASH_HEADER}\n");
    let mut audit_text = String::new();
    let mut audit_kv = String::new();
    let mut outputs = Vec::new();
    let mut graph_seeds = Vec::new();
    let mut failures = 0;
    let mut all_passed = true;
    for (cell, outcome) in cells.iter().zip(outcomes) {
        let out = match outcome {
            Ok(o) => o,
            Err(e) => {
                failures += 1;
                eprintln!("cell {} failed: {e:#}", cell.label);
                continue;
            }
        };
        if out.result.graph_attempts > 1 && !opts.quiet {
            eprintln!(
                "cell {}: connected graph after {} draws (seed {})",
                out.label,
                out.result.graph_attempts,
                out.result.graph_seed.unwrap_or_default()
            );
        }
        let dir = if nested { opts.out.join("cells").join(&out.label) } else { opts.out.clone() };
        outputs.extend(write_cell(&dir, &scenario, cell, &out, opts)?);
        summary.push_str(&summary_row(&out.label, &out.result));
        summary.push('\n');
        let bound = out.report.revenue_bound;
        nash.push_str(&nash_rows(out.result.seed, bound, &out.deviations));
        let _ = writeln!(audit_text, "== {} ==\n{}", out.label, out.report.summary());
        for line in out.report.to_key_values().lines() {
            let _ = writeln!(audit_kv, "{}.{line}", out.label);
        }
        graph_seeds.extend(out.result.graph_seed);
        all_passed &= out.report.passed();
        if let Some(reference) = &scenario.reference {
            if !opts.quiet {
                print!("{}", reference_table(reference, &out.result));
            }
        }
    }

    let mut top = |name: &str, contents: &str| -> anyhow::Result<()> {
        let path = opts.out.join(name);
        write_atomic(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path);
        Ok(())
    };
    top("summary.csv", &summary)?;
    if scenario.kind == ScenarioKind::NashAudit {
        top("nash.csv", &nash)?;
    }
    if nested {
        top("audit.txt", &audit_text)?;
        top("audit.kv", &audit_kv)?;
    }

    let mut manifest = scenario.clone();
    manifest.manifest = Some(ManifestInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_seconds: started.elapsed().as_secs_f64(),
        cell_seeds: cells.iter().map(|c| c.config.seed).collect(),
        graph_seeds,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    });
    write_atomic(&opts.out.join("manifest.toml"), &manifest.to_toml()?)?;

    if !opts.quiet {
        print!("{summary}");
        if !nested {
            print!("{audit_text}");
        }
    }
    if failures > 0 {
        return Ok(1);
    }
    if opts.strict && !all_passed {
        return Ok(2);
    }
    Ok(0)
}

/// Side-by-side comparison against reference numbers.
pub fn reference_table(reference: &Reference, r: &SimResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>10} {:>8} {:>14} {:>14}", "", "T", "delta", "revenue", "sqrt(KTdelta)");
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>8} {:>14.0} {:>14.0}",
        "reference", r.horizon, r.delta, reference.revenue, reference.revenue_bound
    );
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>8} {:>14.0} {:>14.0}",
        format!("seed {}", r.seed),
        r.horizon,
        r.delta,
        r.revenue().to_f64(),
        revenue_bound(r.arm_count(), r.horizon, r.delta)
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names() {
        let names: Vec<String> = presets().into_iter().map(|p| p.name).collect();
        for n in ["table1", "fig2", "tau-sweep", "nash-audit", "truthful-baseline", "stress-B", "smoke"] {
            assert!(names.iter().any(|m| m == n), "missing {n}");
        }
    }

    #[test]
    fn table1_preset_parameters() {
        let t = preset("table1").unwrap();
        assert_eq!(t.sim.arm_count(), 10);
        assert_eq!(t.sim.tau, 50);
        assert_eq!(t.sim.horizon, 500_000);
        assert_eq!(t.sim.player.delta, Some(2778.0));
        assert_eq!(t.sim.topology, TopologySpec::ErdosRenyi { p: 0.6, seed: None });
        let mut sorted = t.sim.means.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.8, 0.85, 0.9]);
    }

    #[test]
    fn nash_audit_probes_one_arm_at_a_time() {
        let n = preset("nash-audit").unwrap();
        assert_eq!(n.kind, ScenarioKind::NashAudit);
        assert!(n.sim.strategies.iter().all(|&s| s == Strategy::Equilibrium));
        let probed = n.sim.with_strategy(2, Strategy::Overbid);
        for (k, s) in probed.strategies.iter().enumerate() {
            assert_eq!(*s == Strategy::Overbid, k == 2);
        }
    }

    #[test]
    fn stress_slack_makes_trigger_reachable() {
        let s = preset("stress-B").unwrap();
        let k = s.sim.arm_count() as f64;
        let b = s.sim.slack.unwrap();
        let t = s.sim.horizon as f64;
        assert!(t / 2.0 / k - b > 0.0);
    }

    #[test]
    fn scenario_toml_round_trip() {
        for p in presets() {
            let text = p.to_toml().unwrap();
            assert_eq!(Scenario::from_toml(&text).unwrap(), p, "{text}");
        }
    }

    #[test]
    fn parse_errors_name_the_key() {
        let err = Scenario::from_toml("name = \"x\"\nbogus = 1\n[sim]\n").unwrap_err();
        assert!(format!("{err:#}").contains("bogus"), "{err:#}");
        let err = Scenario::from_toml("name = \"x\"\n[sim]\nmeans = [0.5, 0.5]\nhorizon = \"ten\"\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 4") || msg.contains("horizon"), "{msg}");
    }

    #[test]
    fn expanded_pins_derived_parameters() {
        let s = preset("smoke").unwrap().expanded().unwrap();
        assert!(s.sim.player.gamma.is_some() && s.sim.theta.is_some() && s.sim.slack.is_some());
        let again = s.expanded().unwrap();
        assert_eq!(again, s);
    }
}

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use accuracytrader::cf::CfConfig;
use accuracytrader::dataset::partition;
use accuracytrader::effectiveness::{self, SectionProfile, SECTIONS};
use accuracytrader::sim::metrics::{write_metrics_rows, write_outcome_rows, METRICS_HEADER, OUTCOMES_HEADER};
use accuracytrader::sim::{self, ScenarioConfig, Workload, WorkloadKind};
use accuracytrader::synopsis::{self, create_timed, load_state, save_state, ChangeSet, SynopsisState};
use accuracytrader::synth::{self, CfSynthConfig, ChangeKind, SearchSynthConfig};
use accuracytrader::Error;

use crate::config::{self, BuildConfig};
use crate::data::{load_data, write_data, write_file, Data};
use crate::{CliError, CliResult, WorkloadArg};

const CONFIG_FILE: &str = "synopsis.cfg";

fn component_dir(root: &Path, c: usize) -> std::path::PathBuf {
    root.join(format!("component-{c}"))
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn consistent(state: &SynopsisState) -> CliResult<()> {
    state.check_consistency().map_err(|e| {
        CliError::Core(Error::Invariant(format!(
            "component {}: {e}",
            state.subset.component_id
        )))
    })
}

pub fn generate(workload: WorkloadArg, out: &Path, seed: u64, points: usize, requests: usize) -> CliResult<()> {
    let data = match workload {
        WorkloadArg::Cf => {
            let s = synth::generate_cf(&CfSynthConfig {
                users: points,
                active_users: requests,
                seed,
                ..CfSynthConfig::default()
            })?;
            Data::Cf {
                matrix: s.matrix,
                requests: s.requests,
                test: s.test,
            }
        }
        WorkloadArg::Search => {
            let s = synth::generate_search(&SearchSynthConfig {
                docs: points,
                queries: requests,
                seed,
                ..SearchSynthConfig::default()
            })?;
            Data::Search {
                corpus: s.corpus,
                requests: s.requests,
            }
        }
    };
    write_data(out, &data)?;
    println!("wrote {} points and {requests} requests to {}", points, out.display());
    Ok(())
}

fn build_states(data: &Data, components: usize, cfg: &BuildConfig, report: bool) -> CliResult<Vec<SynopsisState>> {
    let start = Instant::now();
    let parts = partition(&data.dataset(), components)?;
    if report {
        println!("partition: {components} components in {:.1} ms", ms(start));
        println!("component  points  aggregated  depth  reduce_ms  index_ms  aggregate_ms");
    }
    let mut states = Vec::with_capacity(parts.len());
    for part in &parts {
        let (state, t) = create_timed(part, &cfg.synopsis)?;
        consistent(&state)?;
        if report {
            println!(
                "{:>9}  {:>6}  {:>10}  {:>5}  {:>9.1}  {:>8.1}  {:>12.1}",
                part.component_id,
                part.len(),
                state.synopsis.len(),
                state.depth(),
                t.reduce.as_secs_f64() * 1e3,
                t.index.as_secs_f64() * 1e3,
                t.aggregate.as_secs_f64() * 1e3
            );
        }
        states.push(state);
    }
    Ok(states)
}

fn save_states(out: &Path, states: &[SynopsisState], cfg: &BuildConfig) -> CliResult<()> {
    let mut summary = String::from("component,points,aggregated_points,depth,version\n");
    for s in states {
        save_state(s, &component_dir(out, s.subset.component_id))?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            s.subset.component_id,
            s.subset.len(),
            s.synopsis.len(),
            s.depth(),
            s.synopsis.version
        );
    }
    write_file(out, CONFIG_FILE, &config::to_text(cfg))?;
    write_file(out, "synopses.csv", &summary)
}

fn load_states(dir: &Path) -> CliResult<(Vec<SynopsisState>, BuildConfig)> {
    let cfg = config::load(Some(&dir.join(CONFIG_FILE)))?;
    let mut states = Vec::new();
    while component_dir(dir, states.len()).is_dir() {
        let state = load_state(&component_dir(dir, states.len()))?;
        consistent(&state)?;
        states.push(state);
    }
    if states.is_empty() {
        return Err(Error::Invalid(format!("{}: no component-N directories", dir.display())).into());
    }
    Ok((states, cfg))
}

pub fn build_synopsis(
    data_dir: &Path,
    workload: WorkloadArg,
    components: usize,
    config_path: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let cfg = config::load(config_path)?;
    let start = Instant::now();
    let data = load_data(data_dir, workload, cfg.scale)?;
    println!("load: {:.1} ms", ms(start));
    let states = build_states(&data, components, &cfg, true)?;
    save_states(out, &states, &cfg)?;
    println!("total: {:.1} ms", ms(start));
    Ok(())
}

/// Sends modifications to the owning component and additions to the
/// currently smallest component (lowest id on ties).
fn route(states: &[SynopsisState], changes: ChangeSet) -> CliResult<Vec<ChangeSet>> {
    let mut per = vec![ChangeSet::default(); states.len()];
    for (id, content) in changes.modified {
        let owner = states
            .iter()
            .position(|s| s.subset.data.contains(id))
            .ok_or(Error::UnknownPoint(id))?;
        per[owner].modified.push((id, content));
    }
    let mut sizes: Vec<usize> = states.iter().map(|s| s.subset.len()).collect();
    for (id, content) in changes.added {
        if states.iter().any(|s| s.subset.data.contains(id)) {
            return Err(Error::Duplicate(format!("added point {id} already exists")).into());
        }
        let target = (0..sizes.len())
            .min_by_key(|c| (sizes[*c], *c))
            .expect("at least one component");
        sizes[target] += 1;
        per[target].added.push((id, content));
    }
    Ok(per)
}

pub fn update_from_file(states_dir: &Path, changes_path: &Path, out: &Path) -> CliResult<()> {
    let (states, cfg) = load_states(states_dir)?;
    let kind = states[0].subset.kind();
    let text = std::fs::read_to_string(changes_path).map_err(|e| Error::Io {
        path: changes_path.to_path_buf(),
        source: e,
    })?;
    let changes = ChangeSet::parse(&text, kind, changes_path)?;
    let mut report =
        String::from("component,added,modified,recomputed,influenced_nodes,depth_reselected,aggregated_points\n");
    let mut next = Vec::with_capacity(states.len());
    for (state, cs) in states.iter().zip(route(&states, changes)?) {
        let start = Instant::now();
        let (updated, r) = synopsis::update(state, &cs, &cfg.synopsis)?;
        consistent(&updated)?;
        println!(
            "component {}: {} changes, {} aggregated points recomputed in {:.1} ms",
            state.subset.component_id,
            cs.len(),
            r.recomputed,
            ms(start)
        );
        let _ = writeln!(
            report,
            "{},{},{},{},{},{},{}",
            state.subset.component_id,
            r.added,
            r.modified,
            r.recomputed,
            r.influenced_nodes,
            r.depth_reselected,
            updated.synopsis.len()
        );
        next.push(updated);
    }
    save_states(out, &next, &cfg)?;
    write_file(out, "update.csv", &report)
}

pub fn update_sweep(states_dir: &Path, seed: u64, out: &Path) -> CliResult<()> {
    let (states, cfg) = load_states(states_dir)?;
    let mut report = String::from("kind,percent,changed_points,recomputed,full_rebuild,depth_reselected\n");
    println!("kind    percent  changed  recomputed  full  update_ms  rebuild_ms");
    for kind in [ChangeKind::Add, ChangeKind::Modify] {
        let label = match kind {
            ChangeKind::Add => "add",
            ChangeKind::Modify => "modify",
        };
        for percent in 1..=10u64 {
            let (mut changed, mut recomputed, mut full, mut reselected) = (0, 0, 0, 0);
            let (mut update_ms, mut rebuild_ms) = (0.0, 0.0);
            for state in &states {
                let c = state.subset.component_id as u64;
                let changes =
                    synth::sweep_changes(state, percent as f64, kind, seed.wrapping_mul(1000) + percent * 100 + c)?;
                let start = Instant::now();
                let (updated, r) = synopsis::update(state, &changes, &cfg.synopsis)?;
                update_ms += ms(start);
                consistent(&updated)?;
                let start = Instant::now();
                let (rebuilt, _) = create_timed(&updated.subset, &cfg.synopsis)?;
                rebuild_ms += ms(start);
                changed += changes.len();
                recomputed += r.recomputed;
                full += rebuilt.synopsis.len();
                reselected += usize::from(r.depth_reselected);
            }
            println!("{label:<6}  {percent:>7}  {changed:>7}  {recomputed:>10}  {full:>4}  {update_ms:>9.1}  {rebuild_ms:>10.1}");
            let _ = writeln!(report, "{label},{percent},{changed},{recomputed},{full},{reselected}");
        }
    }
    write_file(out, "update_sweep.csv", &report)
}

pub fn rank_effectiveness(
    data_dir: &Path,
    workload: WorkloadArg,
    components: usize,
    config_path: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let cfg = config::load(config_path)?;
    let data = load_data(data_dir, workload, cfg.scale)?;
    let states = build_states(&data, components, &cfg, false)?;
    let profile: SectionProfile = match &data {
        Data::Cf { requests, .. } => effectiveness::cf_sections(&states, requests, &CfConfig::default())?,
        Data::Search { requests, .. } => effectiveness::search_sections(&states, requests, false)?,
    };
    write_file(out, "effectiveness.csv", &profile.to_csv())?;
    let ranks: Vec<f64> = (1..=SECTIONS).map(|s| s as f64).collect();
    for (s, v) in profile.values.iter().enumerate() {
        println!("section {:>2}: {v:.4}", s + 1);
    }
    println!(
        "spearman(section, value) = {:.3}",
        effectiveness::spearman(&ranks, &profile.values)
    );
    Ok(())
}

fn scenario_workload(cfg: &ScenarioConfig, data: Option<(&Path, WorkloadArg)>) -> CliResult<Workload> {
    let Some((dir, kind)) = data else {
        return Ok(sim::synthetic_workload(cfg)?);
    };
    let loaded = load_data(dir, kind, Default::default())?;
    let states = sim::build_states(&loaded.dataset(), cfg)?;
    Ok(match &loaded {
        Data::Cf { requests, test, .. } => Workload::cf(&states, requests, test, CfConfig::default())?,
        Data::Search { requests, .. } => Workload::search(&states, requests, cfg.global_stats)?,
    })
}

pub fn bench(
    scenario: &Path,
    data: Option<(&Path, WorkloadArg)>,
    components: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(n) = components {
        cfg.components = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some((_, kind)) = data {
        cfg.workload = match kind {
            WorkloadArg::Cf => WorkloadKind::Cf,
            WorkloadArg::Search => WorkloadKind::Search,
        };
    }
    cfg.validate()?;
    let start = Instant::now();
    let workload = scenario_workload(&cfg, data)?;
    println!(
        "workload: {} components, {} payloads, prepared in {:.1} ms",
        workload.components(),
        workload.request_ids.len(),
        ms(start)
    );

    let results = sim::run_scenario(&cfg, &workload)?;
    let runs = results.len() / cfg.strategies.len();
    let mut summary =
        String::from("run,rate_req_s,load_factor,strategy,p999_latency_ms,mean_accuracy_loss_pct,requests,reissues\n");
    println!("run  rate_req_s  load  strategy        p999_ms  loss_pct  reissues");
    for run in 0..runs {
        let mut metrics = format!("{METRICS_HEADER}\n");
        let mut outcomes = format!("{OUTCOMES_HEADER}\n");
        for r in &results[run * cfg.strategies.len()..(run + 1) * cfg.strategies.len()] {
            let rep = &r.report;
            write_metrics_rows(&mut metrics, rep, cfg.window_ms);
            write_outcome_rows(&mut outcomes, rep);
            let _ = writeln!(
                summary,
                "{run},{:.3},{:.3},{},{:.3},{:.4},{},{}",
                r.rate_per_s,
                r.load_factor,
                rep.strategy,
                rep.p999(),
                rep.mean_loss(),
                rep.records.len(),
                rep.reissues()
            );
            println!(
                "{run:>3}  {:>10.2}  {:>4.2}  {:<14}  {:>8.1}  {:>8.3}  {:>8}",
                r.rate_per_s,
                r.load_factor,
                rep.strategy,
                rep.p999(),
                rep.mean_loss(),
                rep.reissues()
            );
        }
        write_file(out, &format!("metrics_run{run}.csv"), &metrics)?;
        write_file(out, &format!("outcomes_run{run}.csv"), &outcomes)?;
    }
    write_file(out, "summary.csv", &summary)?;
    println!("total: {:.1} ms", ms(start));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use accuracytrader::dataset::{DataKind, Dataset, PointContent, RatingMatrix, RatingScale, Subset};
    use accuracytrader::synopsis::{create, SynopsisConfig};

    fn states() -> Vec<SynopsisState> {
        let mut m = RatingMatrix::new(RatingScale::default());
        for u in 0..12u64 {
            for i in 0..4u64 {
                m.insert(u, i, 1.0 + ((u * 3 + i) % 5) as f64).unwrap();
            }
        }
        partition(&Dataset::Ratings(m), 3)
            .unwrap()
            .iter()
            .map(|p: &Subset| {
                create(
                    p,
                    &SynopsisConfig {
                        compression_ratio: 2.0,
                        ..SynopsisConfig::default()
                    },
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn routing_follows_ownership_and_balance() {
        let states = states();
        let r = PointContent::Ratings([(0, 3.0), (1, 4.0)].into_iter().collect());
        let changes = ChangeSet {
            added: vec![(100, r.clone()), (101, r.clone()), (102, r.clone())],
            modified: vec![(4, r.clone())],
        };
        let per = route(&states, changes).unwrap();
        let owner = states.iter().position(|s| s.subset.data.contains(4)).unwrap();
        assert_eq!(per[owner].modified.len(), 1);
        assert_eq!(per.iter().map(|c| c.added.len()).collect::<Vec<_>>(), vec![1, 1, 1]);
        let unknown = ChangeSet {
            added: vec![],
            modified: vec![(999, r)],
        };
        assert!(matches!(
            route(&states, unknown),
            Err(CliError::Core(Error::UnknownPoint(999)))
        ));
        assert_eq!(states[0].subset.kind(), DataKind::Numeric);
    }
}

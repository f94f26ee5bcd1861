#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use gridforge::model::{GroupingMode, Job, JobId, Resource, ResourceId, UserId};
use gridforge::scenario::{builtin, JobSpec, KeySource, Scenario, UserSpec, BUILTIN_R16};
use gridforge::scheduler::GroupingOutcome;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn r16_scenario() -> Scenario {
    builtin(BUILTIN_R16).expect("builtin scenario")
}

/// R1..R16 with MIPS 10k, bandwidth 100 + 50(k-1), memory 100k.
pub fn r16_resources() -> Vec<Resource> {
    r16_scenario()
        .resources
        .iter()
        .map(|r| {
            Resource::new(
                ResourceId::new(r.name.clone()),
                r.name.clone(),
                r.mips,
                r.bandwidth_mbps,
                r.memory_mb,
                r.enter_time,
            )
            .unwrap()
        })
        .collect()
}

pub fn job(n: u32, mi: f64, mem: f64) -> Job {
    Job::new(JobId(n), UserId::from("U0001"), mi, mem, u64::from(n)).unwrap()
}

/// Integer-valued jobs so sums stay exact in f64.
pub fn random_jobs(rng: &mut impl Rng, max_jobs: usize) -> Vec<Job> {
    let n = rng.gen_range(0..=max_jobs);
    (1..=n as u32)
        .map(|i| {
            job(
                i,
                f64::from(rng.gen_range(1..=520u32)),
                f64::from(rng.gen_range(0..=1700u32)),
            )
        })
        .collect()
}

/// A nonempty random subset of the sixteen resources, in FCFS order.
pub fn random_resources(rng: &mut impl Rng) -> Vec<Resource> {
    let mut all = r16_resources();
    all.shuffle(rng);
    let k = rng.gen_range(1..=all.len());
    let mut chosen = all.split_off(all.len() - k);
    chosen.sort_by(|a, b| a.enter_time.total_cmp(&b.enter_time));
    chosen
}

pub fn by_id(resources: &[Resource]) -> BTreeMap<&ResourceId, &Resource> {
    resources.iter().map(|r| (&r.resource_id, r)).collect()
}

pub fn int_jobs(jobs: &[Job]) -> Vec<oracle::IntJob> {
    jobs.iter()
        .map(|j| oracle::IntJob {
            id: j.job_id.0,
            mi: j.length_mi as u64,
            memory: j.memory_mb as u64,
        })
        .collect()
}

pub fn int_resources(resources: &[Resource]) -> Vec<oracle::IntResource> {
    resources
        .iter()
        .map(|r| oracle::IntResource {
            name: r.resource_id.to_string(),
            mips: r.mips as u64,
            bandwidth: r.bandwidth_mbps as u64,
            memory: r.memory_mb as u64,
        })
        .collect()
}

pub fn as_packing(outcome: &GroupingOutcome) -> oracle::Packing {
    oracle::Packing {
        groups: outcome
            .groups
            .iter()
            .map(|g| {
                (
                    g.resource_id.to_string(),
                    g.members().iter().map(|j| j.0).collect(),
                )
            })
            .collect(),
        overflow: outcome.overflow.iter().map(|j| j.0).collect(),
        passes: outcome.passes,
    }
}

pub fn oracle_mode(mode: GroupingMode) -> oracle::Mode {
    match mode {
        GroupingMode::Jgs => oracle::Mode::Jgs,
        GroupingMode::Djg => oracle::Mode::Djg,
    }
}

/// Splits a sectioned report into `section -> rows`, each row a map from
/// column name to cell. Cells never contain commas in these reports.
pub fn report_sections(text: &str) -> BTreeMap<String, Vec<BTreeMap<String, String>>> {
    let mut out = BTreeMap::new();
    for block in text.split("\n\n") {
        let mut lines = block.lines().filter(|l| !l.is_empty());
        let Some(title) = lines.next() else { continue };
        let name = title
            .trim_start_matches('[')
            .trim_end_matches(']')
            .to_owned();
        let header: Vec<&str> = lines.next().expect("header row").split(',').collect();
        let rows = lines
            .map(|l| {
                header
                    .iter()
                    .map(|h| h.to_string())
                    .zip(l.split(',').map(str::to_owned))
                    .collect()
            })
            .collect();
        out.insert(name, rows);
    }
    out
}

/// Scenario with the sixteen reference resources owned by `admin` and extra
/// submitting users.
pub fn r16_with_users(names: &[&str]) -> Scenario {
    let mut sc = r16_scenario();
    sc.users.extend(names.iter().map(|n| UserSpec {
        name: (*n).to_owned(),
        key: KeySource::Ephemeral,
    }));
    sc
}

pub fn spec(user: &str, mi: f64, mem: f64, signer: Option<&str>) -> JobSpec {
    JobSpec {
        user: user.to_owned(),
        length_mi: mi,
        memory_mb: mem,
        signer: signer.map(str::to_owned),
    }
}

//! End-to-end run: register → authenticate → group → dispatch → refine →
//! simulate, and the side-by-side comparison of the two algorithms.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::auth::{self, deterministic_keypair, KeyPair, Payload, SignedEnvelope};
use crate::error::PipelineError;
use crate::model::{
    evaluate_conditions, Cluster, ClusterId, ConditionReport, GroupedJob, GroupingMode, Job, JobId,
    Resource, ResourceId, UserId,
};
use crate::registry::{
    resource_registration_payload, user_registration_payload, AuthVerdict, Availability, Registry,
    RejectReason,
};
use crate::scenario::{KeySource, Scenario};
use crate::scheduler::{
    dispatch, drain_overflow, group_jobs, local_refine, Assignment, ClusterState,
};
use crate::sim::{run_schedule, ScheduleMetrics};

/// Key size for `@ephemeral` users.
pub const EPHEMERAL_KEY_BITS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Authenticated scheduling with MI, memory and transfer constraints.
    Srjm,
    /// Dynamic job grouping baseline: MI constraint only, no submission checks.
    Djg,
}

impl Algorithm {
    pub fn mode(self) -> GroupingMode {
        match self {
            Algorithm::Srjm => GroupingMode::Jgs,
            Algorithm::Djg => GroupingMode::Djg,
        }
    }

    pub fn authenticates_submissions(self) -> bool {
        self == Algorithm::Srjm
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Srjm => "srjm",
            Algorithm::Djg => "djg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Private keys of the scenario's users, by user name.
#[derive(Debug, Clone, Default)]
pub struct Keyring(BTreeMap<String, KeyPair>);

impl Keyring {
    pub fn insert(&mut self, user: impl Into<String>, keys: KeyPair) {
        self.0.insert(user.into(), keys);
    }

    pub fn get(&self, user: &str) -> Option<&KeyPair> {
        self.0.get(user)
    }
}

/// Resolves every user's key. Relative key paths are looked up in `keydir`
/// when given, else next to the scenario file; a path without extension
/// gets `.priv` appended.
pub fn load_keys(scenario: &Scenario, keydir: Option<&Path>) -> Result<Keyring, PipelineError> {
    let mut ring = Keyring::default();
    for user in &scenario.users {
        let keys = match &user.key {
            KeySource::Ephemeral => {
                deterministic_keypair(&format!("gridforge:{}", user.name), EPHEMERAL_KEY_BITS)
            }
            KeySource::File(p) => {
                let mut path = if p.is_absolute() {
                    p.clone()
                } else {
                    keydir.unwrap_or(&scenario.base_dir).join(p)
                };
                if path.extension().is_none() {
                    path.set_extension("priv");
                }
                auth::read_private_key(&path)
            }
        }
        .map_err(|source| PipelineError::MissingKey {
            user: user.name.clone(),
            source,
        })?;
        ring.insert(user.name.clone(), keys);
    }
    Ok(ring)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectionReason {
    UnknownUser,
    BadSignature,
    /// Fits no resource even after the overflow list is drained.
    NoCapacity,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionReason::UnknownUser => "unknown-user",
            RejectionReason::BadSignature => "bad-signature",
            RejectionReason::NoCapacity => "no-capacity",
        })
    }
}

impl From<RejectReason> for RejectionReason {
    fn from(r: RejectReason) -> Self {
        match r {
            RejectReason::UnknownUser => RejectionReason::UnknownUser,
            RejectReason::BadSignature => RejectionReason::BadSignature,
        }
    }
}

impl RejectionReason {
    pub fn is_auth_failure(self) -> bool {
        matches!(
            self,
            RejectionReason::UnknownUser | RejectionReason::BadSignature
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedJob {
    pub job_id: JobId,
    pub user: String,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    /// Bound to its final resource, after local refinement.
    pub group: GroupedJob,
    pub assignment: Assignment,
    pub conditions: ConditionReport,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub jobs: Vec<Job>,
    pub groups: Vec<GroupReport>,
    /// Resources offered to the grouping step, in FCFS order.
    pub resources: Vec<Resource>,
    pub metrics: ScheduleMetrics,
    pub rejected: Vec<RejectedJob>,
    pub passes: usize,
    pub registry: Registry,
}

impl RunReport {
    pub fn has_auth_rejections(&self) -> bool {
        self.rejected.iter().any(|r| r.reason.is_auth_failure())
    }
}

fn submission_payload(job_id: JobId, user_id: &UserId, length_mi: f64, memory_mb: f64) -> Payload {
    Payload::new()
        .with("kind", "submit-job")
        .with("job_id", job_id)
        .with("user_id", user_id)
        .with("length_mi", length_mi)
        .with("memory_mb", memory_mb)
}

fn key_for<'k>(keys: &'k Keyring, user: &str) -> Result<&'k KeyPair, PipelineError> {
    keys.get(user)
        .ok_or_else(|| PipelineError::NoKey(user.to_owned()))
}

pub fn run_pipeline(
    scenario: &Scenario,
    keys: &Keyring,
    algorithm: Algorithm,
) -> Result<RunReport, PipelineError> {
    scenario.validate()?;
    let params = scenario.params()?;
    let hash = scenario.hash_alg;
    let mode = algorithm.mode();
    let mut registry = Registry::new();

    let mut user_ids: BTreeMap<&str, UserId> = BTreeMap::new();
    for (seq, user) in scenario.users.iter().enumerate() {
        let k = key_for(keys, &user.name)?;
        let request = SignedEnvelope::seal(
            &user_registration_payload(&user.name, k.public_part()).map_err(|source| {
                PipelineError::Registration {
                    entity: format!("user {}", user.name),
                    source,
                }
            })?,
            &user.name,
            hash,
            k.private_part(),
        )?;
        let id = registry
            .register_user(&request, seq as f64)
            .map_err(|source| PipelineError::Registration {
                entity: format!("user {}", user.name),
                source,
            })?;
        user_ids.insert(&user.name, id);
    }

    let mut resource_ids: BTreeMap<&str, ResourceId> = BTreeMap::new();
    for r in &scenario.resources {
        let k = key_for(keys, &r.owner)?;
        let payload = resource_registration_payload(
            &r.name,
            r.enter_time,
            r.mips,
            r.bandwidth_mbps,
            r.memory_mb,
        );
        let request = SignedEnvelope::seal(&payload, &r.owner, hash, k.private_part())?;
        let id = registry
            .register_resource(&request, &user_ids[r.owner.as_str()])
            .map_err(|source| PipelineError::Registration {
                entity: format!("resource {}", r.name),
                source,
            })?;
        resource_ids.insert(&r.name, id);
    }

    let clusters = scenario
        .clusters
        .iter()
        .map(|c| {
            Cluster::new(
                ClusterId::new(c.cluster_id.clone()),
                c.resources
                    .iter()
                    .map(|n| resource_ids[n.as_str()].clone())
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut all_jobs = Vec::with_capacity(scenario.jobs.len());
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (i, spec) in scenario.jobs.iter().enumerate() {
        let seq = i as u32 + 1;
        let job_id = JobId(seq);
        let user_id = user_ids[spec.user.as_str()].clone();
        let job = Job::new(
            job_id,
            user_id.clone(),
            spec.length_mi,
            spec.memory_mb,
            u64::from(seq),
        )?;
        all_jobs.push(job.clone());
        if algorithm.authenticates_submissions() {
            let signer = key_for(keys, spec.signer())?;
            let payload = submission_payload(job_id, &user_id, spec.length_mi, spec.memory_mb);
            let envelope =
                SignedEnvelope::seal(&payload, user_id.as_str(), hash, signer.private_part())?;
            if let AuthVerdict::Reject(reason) =
                registry.authenticate_submission(&envelope, &user_id)
            {
                rejected.push(RejectedJob {
                    job_id,
                    user: spec.user.clone(),
                    reason: reason.into(),
                });
                continue;
            }
        }
        accepted.push(job);
    }

    let resources = registry.available_resources();
    let outcome = group_jobs(&accepted, &resources, &params, mode);
    let outcome = drain_overflow(outcome, &accepted, &resources, &params, mode);
    for job_id in &outcome.rejected {
        let job = &all_jobs[job_id.0 as usize - 1];
        let user = registry
            .user(&job.user_id)
            .map(|u| u.user_name.clone())
            .unwrap_or_default();
        rejected.push(RejectedJob {
            job_id: *job_id,
            user,
            reason: RejectionReason::NoCapacity,
        });
    }
    rejected.sort_by_key(|r| r.job_id);

    let mut assignments = dispatch(&outcome.groups, &clusters, &mut registry)?;
    for cluster in &clusters {
        let state = ClusterState::observe(cluster, &assignments, &registry);
        assignments = local_refine(&assignments, &state, &outcome.groups, &params, mode);
    }

    let groups: Vec<GroupReport> = outcome
        .groups
        .iter()
        .zip(&assignments)
        .map(|(g, a)| {
            let group = g.rebound(a.resource_id.clone());
            let resource = registry
                .resource_characteristics(&a.resource_id)
                .expect("assigned resources are registered");
            GroupReport {
                conditions: evaluate_conditions(
                    group.total_mi(),
                    group.total_memory_mb(),
                    resource,
                    &params,
                ),
                group,
                assignment: a.clone(),
            }
        })
        .collect();
    let bound: Vec<GroupedJob> = groups.iter().map(|g| g.group.clone()).collect();
    let mut metrics = run_schedule(&assignments, &bound, &resources, scenario.overhead_s);
    metrics.rejected_jobs = rejected.iter().map(|r| r.job_id).collect();

    // every group has completed in simulated time
    for a in &assignments {
        registry
            .set_availability(&a.resource_id, Availability::Available)
            .expect("assigned resources are registered");
    }

    Ok(RunReport {
        algorithm,
        jobs: all_jobs,
        groups,
        resources,
        metrics,
        rejected,
        passes: outcome.passes,
        registry,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub total_processing_s: f64,
    pub makespan_s: f64,
    pub mean_utilization: f64,
    pub groups: usize,
    pub rejected: usize,
}

impl ComparisonRow {
    fn from_report(r: &RunReport) -> Self {
        Self {
            algorithm: r.algorithm,
            total_processing_s: r.metrics.total_processing_s,
            makespan_s: r.metrics.makespan_s,
            mean_utilization: r.metrics.mean_utilization(),
            groups: r.groups.len(),
            rejected: r.rejected.len(),
        }
    }
}

/// Runs both algorithms on identical inputs; SRJM first, then DJG.
pub fn compare_algorithms(
    scenario: &Scenario,
    keys: &Keyring,
) -> Result<[ComparisonRow; 2], PipelineError> {
    let (srjm, djg) = std::thread::scope(|s| {
        let djg = s.spawn(|| run_pipeline(scenario, keys, Algorithm::Djg));
        let srjm = run_pipeline(scenario, keys, Algorithm::Srjm);
        (srjm, djg.join().expect("DJG run panicked"))
    });
    Ok([
        ComparisonRow::from_report(&srjm?),
        ComparisonRow::from_report(&djg?),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonLevel {
    pub jobs: usize,
    pub srjm: ComparisonRow,
    pub djg: ComparisonRow,
}

/// One comparison per job count, each on a generated workload.
pub fn compare_job_counts(
    scenario: &Scenario,
    keys: &Keyring,
    job_counts: &[usize],
) -> Result<Vec<ComparisonLevel>, PipelineError> {
    job_counts
        .iter()
        .map(|&n| {
            let [srjm, djg] = compare_algorithms(&scenario.with_generated_jobs(n), keys)?;
            Ok(ComparisonLevel { jobs: n, srjm, djg })
        })
        .collect()
}

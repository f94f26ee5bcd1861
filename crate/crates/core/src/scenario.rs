//! Scenario files: sectioned plain text with `|`-separated fields.
//!
//! ```text
//! # comment
//! [params]
//! granularity_s|3
//! tcomm_s|3            (optional, defaults to granularity_s)
//! overhead_s|1         (optional, defaults to 1)
//! hash_alg|md5         (optional, md5 or sha256, defaults to sha256)
//! [users]
//! alice|alice.priv     (key file, relative to the key directory, or @ephemeral)
//! [resources]
//! R1|0|10|100|100|alice   (name|enter_time|mips|bandwidth_mbps|memory_mb|owner)
//! [clusters]
//! C1|R1,R2
//! [jobs]
//! alice|20|30          (user|length_mi|memory_mb[|signer])
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::auth::HashAlg;
use crate::error::ScenarioError;
use crate::model::SchedulingParams;
use crate::registry::is_valid_name;
use crate::sim::DEFAULT_OVERHEAD_S;

pub const BUILTIN_PREFIX: &str = "builtin:";
pub const BUILTIN_R16: &str = "paper-r16";
pub const EPHEMERAL_KEY: &str = "@ephemeral";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeySource {
    File(PathBuf),
    /// Reproducible in-memory key derived from the user name.
    Ephemeral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub name: String,
    pub key: KeySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceSpec {
    pub name: String,
    pub enter_time: f64,
    pub mips: f64,
    pub bandwidth_mbps: f64,
    pub memory_mb: f64,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub cluster_id: String,
    pub resources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub user: String,
    pub length_mi: f64,
    pub memory_mb: f64,
    /// User whose key signs the submission; the submitting user when absent.
    pub signer: Option<String>,
}

impl JobSpec {
    pub fn signer(&self) -> &str {
        self.signer.as_deref().unwrap_or(&self.user)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub granularity_s: f64,
    pub tcomm_s: Option<f64>,
    pub overhead_s: f64,
    pub hash_alg: HashAlg,
    pub users: Vec<UserSpec>,
    pub resources: Vec<ResourceSpec>,
    pub clusters: Vec<ClusterSpec>,
    pub jobs: Vec<JobSpec>,
    /// Directory used to resolve relative key paths when no key directory is given.
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn params(&self) -> Result<SchedulingParams, ScenarioError> {
        Ok(SchedulingParams::new(
            self.granularity_s,
            self.tcomm_s.unwrap_or(self.granularity_s),
        )?)
    }

    /// Replaces the job list with `count` generated jobs. Job `i` (1-based)
    /// has `20 + 7·(i mod 9)` MI and `30 + 11·(i mod 13)` Mb and is
    /// submitted by the users in round-robin order.
    pub fn with_generated_jobs(&self, count: usize) -> Scenario {
        let mut out = self.clone();
        out.jobs = generate_workload(count, &self.users);
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params()?;
        if !(self.overhead_s.is_finite() && self.overhead_s >= 0.0) {
            return Err(invalid(
                "params",
                format!("overhead_s must be >= 0, got {}", self.overhead_s),
            ));
        }

        let mut users = BTreeSet::new();
        for u in &self.users {
            if !is_valid_name(&u.name) {
                return Err(invalid(
                    format!("user {}", u.name),
                    "name must match [A-Za-z0-9_-]+",
                ));
            }
            if !users.insert(u.name.as_str()) {
                return Err(invalid(format!("user {}", u.name), "declared twice"));
            }
        }

        let mut resources = BTreeSet::new();
        for r in &self.resources {
            let entity = format!("resource {}", r.name);
            if !is_valid_name(&r.name) {
                return Err(invalid(entity, "name must match [A-Za-z0-9_-]+"));
            }
            if !resources.insert(r.name.as_str()) {
                return Err(invalid(entity, "declared twice"));
            }
            if !users.contains(r.owner.as_str()) {
                return Err(invalid(
                    entity,
                    format!("owner {} is not a declared user", r.owner),
                ));
            }
            for (field, v) in [
                ("mips", r.mips),
                ("bandwidth_mbps", r.bandwidth_mbps),
                ("memory_mb", r.memory_mb),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(invalid(
                        entity,
                        format!("{field} must be positive, got {v}"),
                    ));
                }
            }
        }

        let mut clustered = BTreeSet::new();
        let mut cluster_ids = BTreeSet::new();
        for c in &self.clusters {
            let entity = format!("cluster {}", c.cluster_id);
            if !cluster_ids.insert(c.cluster_id.as_str()) {
                return Err(invalid(entity, "declared twice"));
            }
            if c.resources.is_empty() {
                return Err(invalid(entity, "has no resources"));
            }
            for r in &c.resources {
                if !resources.contains(r.as_str()) {
                    return Err(invalid(entity, format!("unknown resource {r}")));
                }
                if !clustered.insert(r.as_str()) {
                    return Err(invalid(
                        entity,
                        format!("resource {r} already belongs to a cluster"),
                    ));
                }
            }
        }
        if let Some(r) = resources.difference(&clustered).next() {
            return Err(invalid(format!("resource {r}"), "belongs to no cluster"));
        }

        for (i, j) in self.jobs.iter().enumerate() {
            let entity = format!("job {}", i + 1);
            if !users.contains(j.user.as_str()) {
                return Err(invalid(entity, format!("unknown user {}", j.user)));
            }
            if !users.contains(j.signer()) {
                return Err(invalid(entity, format!("unknown signer {}", j.signer())));
            }
            if !(j.length_mi.is_finite() && j.length_mi > 0.0) {
                return Err(invalid(
                    entity,
                    format!("length_mi must be positive, got {}", j.length_mi),
                ));
            }
            if !(j.memory_mb.is_finite() && j.memory_mb >= 0.0) {
                return Err(invalid(
                    entity,
                    format!("memory_mb must be >= 0, got {}", j.memory_mb),
                ));
            }
        }
        Ok(())
    }
}

fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        entity: entity.into(),
        reason: reason.into(),
    }
}

pub fn generate_workload(count: usize, users: &[UserSpec]) -> Vec<JobSpec> {
    if users.is_empty() {
        return Vec::new();
    }
    (1..=count)
        .map(|i| JobSpec {
            user: users[(i - 1) % users.len()].name.clone(),
            length_mi: (20 + 7 * (i % 9)) as f64,
            memory_mb: (30 + 11 * (i % 13)) as f64,
            signer: None,
        })
        .collect()
}

/// Loads `builtin:<name>` or a scenario file, validating it.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let scenario = match source.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => builtin(name)?,
        None => {
            let path = Path::new(source);
            let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
                path: path.to_owned(),
                source: e,
            })?;
            let base = path.parent().map(Path::to_owned).unwrap_or_default();
            parse_scenario(&text, base)?
        }
    };
    scenario.validate()?;
    Ok(scenario)
}

/// The sixteen-resource reference grid: R`k` has
/// `10k` MIPS, `100 + 50(k-1)` Mb/s, `100k` Mb and enters at `k-1` s,
/// split into four clusters of four. Granularity and Tcomm are 3 s and
/// signatures use MD5.
pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    if name != BUILTIN_R16 {
        return Err(ScenarioError::UnknownBuiltin(name.to_owned()));
    }
    let users = ["admin", "alice"]
        .into_iter()
        .map(|n| UserSpec {
            name: n.to_owned(),
            key: KeySource::Ephemeral,
        })
        .collect();
    let resources = (1..=16u32)
        .map(|k| {
            let k_f = f64::from(k);
            ResourceSpec {
                name: format!("R{k}"),
                enter_time: k_f - 1.0,
                mips: 10.0 * k_f,
                bandwidth_mbps: 100.0 + 50.0 * (k_f - 1.0),
                memory_mb: 100.0 * k_f,
                owner: "admin".to_owned(),
            }
        })
        .collect();
    let clusters = (0..4u32)
        .map(|c| ClusterSpec {
            cluster_id: format!("C{}", c + 1),
            resources: (1..=4).map(|i| format!("R{}", c * 4 + i)).collect(),
        })
        .collect();
    Ok(Scenario {
        granularity_s: 3.0,
        tcomm_s: Some(3.0),
        overhead_s: DEFAULT_OVERHEAD_S,
        hash_alg: HashAlg::Md5,
        users,
        resources,
        clusters,
        jobs: Vec::new(),
        base_dir: PathBuf::new(),
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Params,
    Users,
    Resources,
    Clusters,
    Jobs,
}

pub fn parse_scenario(text: &str, base_dir: PathBuf) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario {
        granularity_s: SchedulingParams::DEFAULT_GRANULARITY_S,
        tcomm_s: None,
        overhead_s: DEFAULT_OVERHEAD_S,
        hash_alg: HashAlg::default(),
        users: Vec::new(),
        resources: Vec::new(),
        clusters: Vec::new(),
        jobs: Vec::new(),
        base_dir,
    };
    let mut section = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| ScenarioError::Parse { line, reason };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            section = Some(match trimmed {
                "[params]" => Section::Params,
                "[users]" => Section::Users,
                "[resources]" => Section::Resources,
                "[clusters]" => Section::Clusters,
                "[jobs]" => Section::Jobs,
                other => return Err(err(format!("unknown section {other}"))),
            });
            continue;
        }
        let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("{s:?} is not a number")))
        };
        let arity = |n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(err(format!("expected {n} fields, got {}", fields.len())))
            }
        };
        match section {
            None => return Err(err("entry before any section header".into())),
            Some(Section::Params) => {
                arity(2)?;
                match fields[0] {
                    "granularity_s" => sc.granularity_s = real(fields[1])?,
                    "tcomm_s" => sc.tcomm_s = Some(real(fields[1])?),
                    "overhead_s" => sc.overhead_s = real(fields[1])?,
                    "hash_alg" => {
                        sc.hash_alg = match fields[1].to_ascii_lowercase().as_str() {
                            "md5" => HashAlg::Md5,
                            "sha256" | "sha-256" => HashAlg::Sha256,
                            other => return Err(err(format!("unknown hash_alg {other}"))),
                        }
                    }
                    other => return Err(err(format!("unknown parameter {other}"))),
                }
            }
            Some(Section::Users) => {
                arity(2)?;
                let key = if fields[1] == EPHEMERAL_KEY {
                    KeySource::Ephemeral
                } else {
                    KeySource::File(PathBuf::from(fields[1]))
                };
                sc.users.push(UserSpec {
                    name: fields[0].to_owned(),
                    key,
                });
            }
            Some(Section::Resources) => {
                arity(6)?;
                sc.resources.push(ResourceSpec {
                    name: fields[0].to_owned(),
                    enter_time: real(fields[1])?,
                    mips: real(fields[2])?,
                    bandwidth_mbps: real(fields[3])?,
                    memory_mb: real(fields[4])?,
                    owner: fields[5].to_owned(),
                });
            }
            Some(Section::Clusters) => {
                arity(2)?;
                sc.clusters.push(ClusterSpec {
                    cluster_id: fields[0].to_owned(),
                    resources: fields[1]
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_owned)
                        .collect(),
                });
            }
            Some(Section::Jobs) => {
                if !(3..=4).contains(&fields.len()) {
                    return Err(err(format!("expected 3 or 4 fields, got {}", fields.len())));
                }
                sc.jobs.push(JobSpec {
                    user: fields[0].to_owned(),
                    length_mi: real(fields[1])?,
                    memory_mb: real(fields[2])?,
                    signer: fields.get(3).map(|s| (*s).to_owned()),
                });
            }
        }
    }
    Ok(sc)
}

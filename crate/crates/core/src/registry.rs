//! Grid Information Service: authenticated user and resource registration,
//! availability and characteristics queries, and snapshot persistence.
//!
//! The registry owns all mutable state. Mutations take `&mut self`; queries
//! take `&self`, so a cloned registry is a consistent read-only snapshot.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rsa::RsaPublicKey;

use crate::auth::{self, Payload, SignedEnvelope};
use crate::error::RegistryError;
use crate::model::{Resource, ResourceId, UserId};

pub const KIND_REGISTER_USER: &str = "register-user";
pub const KIND_REGISTER_RESOURCE: &str = "register-resource";

#[derive(Debug, Clone, PartialEq)]
pub struct UserAccount {
    pub user_id: UserId,
    pub user_name: String,
    pub public_key: RsaPublicKey,
    pub registered_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Availability {
    Available,
    Busy,
}

impl Availability {
    fn as_str(self) -> &'static str {
        match self {
            Availability::Available => "available",
            Availability::Busy => "busy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceEntry {
    pub resource: Resource,
    pub availability: Availability,
    pub owner_id: UserId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    UnknownUser,
    BadSignature,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::UnknownUser => "unknown-user",
            RejectReason::BadSignature => "bad-signature",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthVerdict {
    Accept,
    Reject(RejectReason),
}

impl AuthVerdict {
    pub fn is_accepted(self) -> bool {
        self == AuthVerdict::Accept
    }
}

/// Names become identifiers and snapshot fields, so they stay in a safe alphabet.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Canonical self-signed enrollment payload.
pub fn user_registration_payload(
    user_name: &str,
    public_key: &RsaPublicKey,
) -> Result<Payload, RegistryError> {
    Ok(Payload::new()
        .with("kind", KIND_REGISTER_USER)
        .with("public_key", auth::public_key_to_b64(public_key)?)
        .with("user_name", user_name))
}

pub fn resource_registration_payload(
    name: &str,
    enter_time: f64,
    mips: f64,
    bandwidth_mbps: f64,
    memory_mb: f64,
) -> Payload {
    Payload::new()
        .with("kind", KIND_REGISTER_RESOURCE)
        .with("name", name)
        .with("enter_time", enter_time)
        .with("mips", mips)
        .with("bandwidth_mbps", bandwidth_mbps)
        .with("memory_mb", memory_mb)
}

fn field<'p>(payload: &'p Payload, key: &str) -> Result<&'p str, RegistryError> {
    payload
        .get(key)
        .ok_or_else(|| RegistryError::MalformedRequest(format!("missing field {key}")))
}

fn real_field(payload: &Payload, key: &str) -> Result<f64, RegistryError> {
    let raw = field(payload, key)?;
    raw.parse()
        .map_err(|_| RegistryError::MalformedRequest(format!("{key}={raw:?} is not a number")))
}

fn expect_kind(payload: &Payload, kind: &str) -> Result<(), RegistryError> {
    let actual = field(payload, "kind")?;
    if actual == kind {
        Ok(())
    } else {
        Err(RegistryError::MalformedRequest(format!(
            "expected a {kind} request, got {actual}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    users: BTreeMap<UserId, UserAccount>,
    resources: BTreeMap<ResourceId, ResourceEntry>,
    next_user_seq: u32,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self {
            users: BTreeMap::new(),
            resources: BTreeMap::new(),
            next_user_seq: 1,
        }
    }

    pub fn users(&self) -> impl Iterator<Item = &UserAccount> {
        self.users.values()
    }

    pub fn user(&self, user_id: &UserId) -> Option<&UserAccount> {
        self.users.get(user_id)
    }

    pub fn user_by_name(&self, name: &str) -> Option<&UserAccount> {
        self.users.values().find(|u| u.user_name == name)
    }

    pub fn resource_entries(&self) -> impl Iterator<Item = &ResourceEntry> {
        self.resources.values()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    /// Self-signed enrollment: the envelope must verify under the public
    /// key it carries. Returns the assigned `U<nnnn>` identifier.
    pub fn register_user(
        &mut self,
        request: &SignedEnvelope,
        registered_at: f64,
    ) -> Result<UserId, RegistryError> {
        let payload = request
            .parsed_payload()
            .map_err(|_| RegistryError::BadSignature)?;
        expect_kind(&payload, KIND_REGISTER_USER)?;
        let public_key = auth::public_key_from_b64(field(&payload, "public_key")?)
            .map_err(|_| RegistryError::BadSignature)?;
        if !request.verify(&public_key) {
            return Err(RegistryError::BadSignature);
        }
        let user_name = field(&payload, "user_name")?;
        if !is_valid_name(user_name) {
            return Err(RegistryError::InvalidName(user_name.to_owned()));
        }
        if self.user_by_name(user_name).is_some() {
            return Err(RegistryError::DuplicateUser(user_name.to_owned()));
        }
        let user_id = UserId(format!("U{:04}", self.next_user_seq));
        self.next_user_seq += 1;
        self.users.insert(
            user_id.clone(),
            UserAccount {
                user_id: user_id.clone(),
                user_name: user_name.to_owned(),
                public_key,
                registered_at,
            },
        );
        Ok(user_id)
    }

    /// Registers a resource tuple signed by an already registered owner.
    pub fn register_resource(
        &mut self,
        request: &SignedEnvelope,
        owner: &UserId,
    ) -> Result<ResourceId, RegistryError> {
        let account = self
            .users
            .get(owner)
            .ok_or_else(|| RegistryError::UnknownUser(owner.to_string()))?;
        if !request.verify(&account.public_key) {
            return Err(RegistryError::BadSignature);
        }
        let payload = request
            .parsed_payload()
            .map_err(|e| RegistryError::MalformedRequest(e.to_string()))?;
        expect_kind(&payload, KIND_REGISTER_RESOURCE)?;
        let name = field(&payload, "name")?;
        if !is_valid_name(name) {
            return Err(RegistryError::InvalidName(name.to_owned()));
        }
        let resource_id = if self.resources.contains_key(name) {
            let mut seq = self.resources.len() + 1;
            loop {
                let candidate = format!("{name}-{seq}");
                if !self.resources.contains_key(candidate.as_str()) {
                    break ResourceId(candidate);
                }
                seq += 1;
            }
        } else {
            ResourceId::from(name)
        };
        let resource = Resource::new(
            resource_id.clone(),
            name,
            real_field(&payload, "mips")?,
            real_field(&payload, "bandwidth_mbps")?,
            real_field(&payload, "memory_mb")?,
            real_field(&payload, "enter_time")?,
        )?;
        self.resources.insert(
            resource_id.clone(),
            ResourceEntry {
                resource,
                availability: Availability::Available,
                owner_id: owner.clone(),
            },
        );
        Ok(resource_id)
    }

    /// Available resources in first-come-first-serve order: by enter time,
    /// ties broken by identifier.
    pub fn available_resources(&self) -> Vec<Resource> {
        let mut out: Vec<Resource> = self
            .resources
            .values()
            .filter(|e| e.availability == Availability::Available)
            .map(|e| e.resource.clone())
            .collect();
        out.sort_by(|a, b| {
            a.enter_time
                .total_cmp(&b.enter_time)
                .then_with(|| a.resource_id.cmp(&b.resource_id))
        });
        out
    }

    pub fn resource_characteristics(&self, id: &ResourceId) -> Result<&Resource, RegistryError> {
        self.resources
            .get(id)
            .map(|e| &e.resource)
            .ok_or_else(|| RegistryError::UnknownResource(id.to_string()))
    }

    pub fn availability(&self, id: &ResourceId) -> Option<Availability> {
        self.resources.get(id).map(|e| e.availability)
    }

    pub fn set_availability(
        &mut self,
        id: &ResourceId,
        availability: Availability,
    ) -> Result<(), RegistryError> {
        let entry = self
            .resources
            .get_mut(id)
            .ok_or_else(|| RegistryError::UnknownResource(id.to_string()))?;
        entry.availability = availability;
        Ok(())
    }

    pub fn authenticate_submission(
        &self,
        envelope: &SignedEnvelope,
        claimed_user: &UserId,
    ) -> AuthVerdict {
        match self.users.get(claimed_user) {
            None => AuthVerdict::Reject(RejectReason::UnknownUser),
            Some(u) if envelope.verify(&u.public_key) => AuthVerdict::Accept,
            Some(_) => AuthVerdict::Reject(RejectReason::BadSignature),
        }
    }

    /// Writes the snapshot atomically (temp file, then rename). Public keys
    /// go to `<snapshot>.keys/<user_id>.pub` beside it.
    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        let io = |p: &Path| {
            let p = p.to_owned();
            move |source| RegistryError::Io { path: p, source }
        };
        let key_dir = key_dir_for(path);
        fs::create_dir_all(&key_dir).map_err(io(&key_dir))?;
        let key_dir_name = key_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();

        let mut out = String::from("[users]\n");
        for u in self.users.values() {
            let key_file = key_dir.join(format!("{}.pub", u.user_id));
            auth::write_public_key(&key_file, &u.public_key, true)?;
            out.push_str(&format!(
                "{}|{}|{}|{}/{}.pub\n",
                u.user_id, u.user_name, u.registered_at, key_dir_name, u.user_id
            ));
        }
        out.push_str("[resources]\n");
        for e in self.resources.values() {
            let r = &e.resource;
            out.push_str(&format!(
                "{}|{}|{}|{}|{}|{}|{}|{}\n",
                r.resource_id,
                r.name,
                r.enter_time,
                r.mips,
                r.bandwidth_mbps,
                r.memory_mb,
                e.availability.as_str(),
                e.owner_id
            ));
        }

        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, out).map_err(io(&tmp))?;
        fs::rename(&tmp, path).map_err(io(path))
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut reg = Registry::new();
        let mut section = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let bad = |reason: String| RegistryError::Snapshot { line, reason };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.starts_with('[') {
                section = match trimmed {
                    "[users]" => Some(true),
                    "[resources]" => Some(false),
                    other => return Err(bad(format!("unknown section {other}"))),
                };
                continue;
            }
            let fields: Vec<&str> = trimmed.split('|').collect();
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number {s:?}")))
            };
            match section {
                None => return Err(bad("entry outside any section".into())),
                Some(true) => {
                    let [id, name, at, key] = fields[..] else {
                        return Err(bad(format!("expected 4 fields, got {}", fields.len())));
                    };
                    let public_key = auth::read_public_key(&base.join(key))?;
                    let user_id = UserId::from(id);
                    if let Some(seq) = id.strip_prefix('U').and_then(|s| s.parse::<u32>().ok()) {
                        reg.next_user_seq = reg.next_user_seq.max(seq + 1);
                    }
                    reg.users.insert(
                        user_id.clone(),
                        UserAccount {
                            user_id,
                            user_name: name.to_owned(),
                            public_key,
                            registered_at: real(at)?,
                        },
                    );
                }
                Some(false) => {
                    let [id, name, enter, mips, bw, mem, avail, owner] = fields[..] else {
                        return Err(bad(format!("expected 8 fields, got {}", fields.len())));
                    };
                    let availability = match avail {
                        "available" => Availability::Available,
                        "busy" => Availability::Busy,
                        other => return Err(bad(format!("bad availability {other:?}"))),
                    };
                    let resource = Resource::new(
                        ResourceId::from(id),
                        name,
                        real(mips)?,
                        real(bw)?,
                        real(mem)?,
                        real(enter)?,
                    )?;
                    reg.resources.insert(
                        ResourceId::from(id),
                        ResourceEntry {
                            resource,
                            availability,
                            owner_id: UserId::from(owner),
                        },
                    );
                }
            }
        }
        Ok(reg)
    }
}

fn key_dir_for(snapshot: &Path) -> PathBuf {
    let mut name = snapshot
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "registry".into());
    name.push(".keys");
    snapshot.with_file_name(name)
}

#[cfg(test)]
pub(crate) mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::auth::{deterministic_keypair, HashAlg, KeyPair};

    pub(crate) fn keys(i: usize) -> &'static KeyPair {
        static K: OnceLock<Vec<KeyPair>> = OnceLock::new();
        &K.get_or_init(|| {
            (0..3)
                .map(|i| deterministic_keypair(&format!("registry-{i}"), 1024).unwrap())
                .collect()
        })[i]
    }

    pub(crate) fn enroll(reg: &mut Registry, name: &str, k: &KeyPair) -> UserId {
        let env = SignedEnvelope::seal(
            &user_registration_payload(name, k.public_part()).unwrap(),
            name,
            HashAlg::Md5,
            k.private_part(),
        )
        .unwrap();
        reg.register_user(&env, 0.0).unwrap()
    }

    pub(crate) fn resource_request(
        k: &KeyPair,
        name: &str,
        mips: f64,
        bw: f64,
        mem: f64,
        t: f64,
    ) -> SignedEnvelope {
        SignedEnvelope::seal(
            &resource_registration_payload(name, t, mips, bw, mem),
            name,
            HashAlg::Md5,
            k.private_part(),
        )
        .unwrap()
    }

    fn with_r1_to_r4() -> (Registry, UserId) {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        for k in 1..=4u32 {
            let kf = f64::from(k);
            let env = resource_request(
                keys(0),
                &format!("R{k}"),
                10.0 * kf,
                50.0 + 50.0 * kf,
                100.0 * kf,
                kf,
            );
            reg.register_resource(&env, &owner).unwrap();
        }
        (reg, owner)
    }

    fn ids(rs: &[Resource]) -> Vec<&str> {
        rs.iter().map(|r| r.resource_id.as_str()).collect()
    }

    #[test]
    fn first_user_gets_u0001() {
        let mut reg = Registry::new();
        assert_eq!(enroll(&mut reg, "alice", keys(0)), UserId::from("U0001"));
        assert_eq!(reg.user_count(), 1);
        assert_eq!(enroll(&mut reg, "bob", keys(1)), UserId::from("U0002"));
    }

    #[test]
    fn duplicate_user_name_rejected() {
        let mut reg = Registry::new();
        enroll(&mut reg, "alice", keys(0));
        let env = SignedEnvelope::seal(
            &user_registration_payload("alice", keys(1).public_part()).unwrap(),
            "alice",
            HashAlg::Sha256,
            keys(1).private_part(),
        )
        .unwrap();
        assert!(matches!(
            reg.register_user(&env, 1.0),
            Err(RegistryError::DuplicateUser(_))
        ));
        assert_eq!(reg.user_count(), 1);
    }

    #[test]
    fn enrollment_signed_by_foreign_key_rejected() {
        let mut reg = Registry::new();
        let env = SignedEnvelope::seal(
            &user_registration_payload("mallory", keys(0).public_part()).unwrap(),
            "mallory",
            HashAlg::Md5,
            keys(1).private_part(),
        )
        .unwrap();
        assert!(matches!(
            reg.register_user(&env, 0.0),
            Err(RegistryError::BadSignature)
        ));
        assert_eq!(reg, Registry::new());
    }

    #[test]
    fn every_payload_byte_mutation_is_rejected() {
        let env = SignedEnvelope::seal(
            &user_registration_payload("alice", keys(0).public_part()).unwrap(),
            "alice",
            HashAlg::Md5,
            keys(0).private_part(),
        )
        .unwrap();
        let clean = Registry::new();
        for i in 0..env.payload.len() {
            let mut bad = env.clone();
            bad.payload[i] ^= 0x20;
            let mut reg = clean.clone();
            assert!(
                reg.register_user(&bad, 0.0).is_err(),
                "mutation at byte {i} accepted"
            );
            assert_eq!(reg, clean);
        }
    }

    #[test]
    fn register_r1_from_owner() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        let id = reg
            .register_resource(
                &resource_request(keys(0), "R1", 10.0, 100.0, 100.0, 0.0),
                &owner,
            )
            .unwrap();
        assert_eq!(id, ResourceId::from("R1"));
        let r = reg.resource_characteristics(&id).unwrap();
        assert_eq!(
            (r.mips, r.bandwidth_mbps, r.memory_mb),
            (10.0, 100.0, 100.0)
        );
        assert_eq!(reg.availability(&id), Some(Availability::Available));
    }

    #[test]
    fn resource_with_zero_mips_rejected() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        let res = reg.register_resource(
            &resource_request(keys(0), "R0", 0.0, 100.0, 100.0, 0.0),
            &owner,
        );
        assert!(matches!(res, Err(RegistryError::Model(_))));
        assert_eq!(reg.resource_count(), 0);
    }

    #[test]
    fn resource_from_unregistered_owner_rejected() {
        let mut reg = Registry::new();
        let res = reg.register_resource(
            &resource_request(keys(0), "R1", 10.0, 100.0, 100.0, 0.0),
            &UserId::from("U0042"),
        );
        assert!(matches!(res, Err(RegistryError::UnknownUser(_))));
    }

    #[test]
    fn resource_signed_by_someone_else_rejected() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        let res = reg.register_resource(
            &resource_request(keys(1), "R1", 10.0, 100.0, 100.0, 0.0),
            &owner,
        );
        assert!(matches!(res, Err(RegistryError::BadSignature)));
    }

    #[test]
    fn user_enrollment_cannot_be_replayed_as_resource() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        let env = SignedEnvelope::seal(
            &user_registration_payload("owner", keys(0).public_part()).unwrap(),
            "owner",
            HashAlg::Md5,
            keys(0).private_part(),
        )
        .unwrap();
        assert!(matches!(
            reg.register_resource(&env, &owner),
            Err(RegistryError::MalformedRequest(_))
        ));
    }

    #[test]
    fn duplicate_resource_name_gets_suffix() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        let env = resource_request(keys(0), "node", 10.0, 100.0, 100.0, 0.0);
        assert_eq!(
            reg.register_resource(&env, &owner).unwrap().as_str(),
            "node"
        );
        assert_eq!(
            reg.register_resource(&env, &owner).unwrap().as_str(),
            "node-2"
        );
    }

    #[test]
    fn availability_queries() {
        assert!(Registry::new().available_resources().is_empty());
        let (mut reg, _) = with_r1_to_r4();
        assert_eq!(ids(&reg.available_resources()), ["R1", "R2", "R3", "R4"]);
        reg.set_availability(&"R2".into(), Availability::Busy)
            .unwrap();
        assert_eq!(ids(&reg.available_resources()), ["R1", "R3", "R4"]);
        assert!(reg.resource_characteristics(&"R9".into()).is_err());
    }

    #[test]
    fn fcfs_order_follows_enter_time_not_registration() {
        let mut reg = Registry::new();
        let owner = enroll(&mut reg, "owner", keys(0));
        for (name, t) in [("late", 5.0), ("early", 1.0), ("b", 3.0), ("a", 3.0)] {
            reg.register_resource(&resource_request(keys(0), name, 1.0, 1.0, 1.0, t), &owner)
                .unwrap();
        }
        assert_eq!(ids(&reg.available_resources()), ["early", "a", "b", "late"]);
    }

    #[test]
    fn cross_key_matrix_only_diagonal_accepts() {
        let mut reg = Registry::new();
        let users: Vec<UserId> = (0..3)
            .map(|i| enroll(&mut reg, &format!("user{i}"), keys(i)))
            .collect();
        let payload = Payload::new()
            .with("kind", "submit-job")
            .with("length_mi", 10);
        for (ui, user) in users.iter().enumerate() {
            for ki in 0..3 {
                let env = SignedEnvelope::seal(
                    &payload,
                    user.as_str(),
                    HashAlg::Sha256,
                    keys(ki).private_part(),
                )
                .unwrap();
                let verdict = reg.authenticate_submission(&env, user);
                if ui == ki {
                    assert_eq!(verdict, AuthVerdict::Accept);
                } else {
                    assert_eq!(verdict, AuthVerdict::Reject(RejectReason::BadSignature));
                }
            }
        }
        let env = SignedEnvelope::seal(&payload, "ghost", HashAlg::Sha256, keys(0).private_part())
            .unwrap();
        assert_eq!(
            reg.authenticate_submission(&env, &"U0099".into()),
            AuthVerdict::Reject(RejectReason::UnknownUser)
        );
    }

    #[test]
    fn snapshot_round_trip() {
        let (mut reg, _) = with_r1_to_r4();
        enroll(&mut reg, "alice", keys(1));
        reg.set_availability(&"R3".into(), Availability::Busy)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gis.txt");
        reg.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("[users]\nU0001|owner|0|gis.txt.keys/U0001.pub\n"));
        assert!(text.contains("[resources]\nR1|R1|1|10|100|100|available|U0001\n"));
        assert!(text.contains("R3|R3|3|30|200|300|busy|U0001\n"));
        let loaded = Registry::load(&path).unwrap();
        assert_eq!(loaded, reg);

        // saving again over an existing snapshot works and stays identical
        loaded.save(&path).unwrap();
        assert_eq!(Registry::load(&path).unwrap(), reg);
    }

    #[test]
    fn snapshot_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gis.txt");
        fs::write(&path, "[users]\n[resources]\nR1|R1|0|10|100\n").unwrap();
        assert!(matches!(
            Registry::load(&path),
            Err(RegistryError::Snapshot { line: 3, .. })
        ));
        fs::write(&path, "[bogus]\n").unwrap();
        assert!(matches!(
            Registry::load(&path),
            Err(RegistryError::Snapshot { line: 1, .. })
        ));
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid job {job}: {reason}")]
    InvalidJob { job: String, reason: String },
    #[error("invalid resource {resource}: {reason}")]
    InvalidResource { resource: String, reason: String },
    #[error("invalid grouped job {group}: {reason}")]
    InvalidGroup { group: String, reason: String },
    #[error("invalid cluster {cluster}: {reason}")]
    InvalidCluster { cluster: String, reason: String },
    #[error("invalid scheduling parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("unsupported RSA key size {0} (expected 1024, 2048 or 3072)")]
    UnsupportedKeySize(usize),
    #[error("digest is {actual} bytes but {alg} digests are {expected} bytes")]
    DigestLength {
        alg: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("rsa: {0}")]
    Rsa(#[from] rsa::Error),
    #[error("key encoding: {0}")]
    KeyEncoding(String),
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} already exists (use --force to overwrite)")]
    KeyExists(PathBuf),
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("signature does not verify")]
    BadSignature,
    #[error("user name {0:?} is already registered")]
    DuplicateUser(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("unknown resource {0}")]
    UnknownResource(String),
    #[error("invalid name {0:?}: names are limited to [A-Za-z0-9_-]")]
    InvalidName(String),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("group {group} references unregistered resource {resource}")]
    UnknownResource { group: String, resource: String },
    #[error("resource {resource} of group {group} belongs to no cluster")]
    Unclustered { group: String, resource: String },
    #[error("resource {resource} belongs to more than one cluster")]
    MultipleClusters { resource: String },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{entity}: {reason}")]
    Invalid { entity: String, reason: String },
    #[error("unknown builtin scenario {0:?}")]
    UnknownBuiltin(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing key for user {user}: {source}")]
    MissingKey {
        user: String,
        #[source]
        source: AuthError,
    },
    #[error("no key loaded for user {0}")]
    NoKey(String),
    #[error("registration of {entity} failed: {source}")]
    Registration {
        entity: String,
        #[source]
        source: RegistryError,
    },
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("report: {0}")]
    Report(String),
}

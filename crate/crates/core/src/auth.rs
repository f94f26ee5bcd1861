//! Digest, sign and verify payloads with RSA PKCS#1 v1.5.
//!
//! A request is serialized into a canonical [`Payload`], hashed with
//! [`get_hash`], signed with [`create_signature`] and checked with
//! [`verify_signature`]. [`SignedEnvelope`] bundles the four together.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use md5::Md5;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsa::pkcs1::{
    DecodeRsaPrivateKey, DecodeRsaPublicKey, EncodeRsaPrivateKey, EncodeRsaPublicKey, LineEnding,
};
use rsa::traits::PublicKeyParts;
use rsa::{Pkcs1v15Sign, RsaPrivateKey, RsaPublicKey};
use sha2::{Digest, Sha256};

use crate::error::AuthError;

pub const SUPPORTED_KEY_BITS: [usize; 3] = [1024, 2048, 3072];
pub const DEFAULT_KEY_BITS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashAlg {
    Md5,
    #[default]
    Sha256,
}

impl HashAlg {
    pub fn digest_len(self) -> usize {
        match self {
            HashAlg::Md5 => 16,
            HashAlg::Sha256 => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Md5 => "MD5",
            HashAlg::Sha256 => "SHA-256",
        }
    }

    fn scheme(self) -> Pkcs1v15Sign {
        match self {
            HashAlg::Md5 => Pkcs1v15Sign::new::<Md5>(),
            HashAlg::Sha256 => Pkcs1v15Sign::new::<Sha256>(),
        }
    }
}

impl fmt::Display for HashAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone)]
pub struct KeyPair {
    private: RsaPrivateKey,
    public: RsaPublicKey,
    bits: usize,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("bits", &self.bits)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_private(private: RsaPrivateKey) -> Self {
        let public = private.to_public_key();
        let bits = public.n().bits();
        Self {
            private,
            public,
            bits,
        }
    }

    pub fn private_part(&self) -> &RsaPrivateKey {
        &self.private
    }

    pub fn public_part(&self) -> &RsaPublicKey {
        &self.public
    }

    pub fn bits(&self) -> usize {
        self.bits
    }
}

fn check_bits(bits: usize) -> Result<(), AuthError> {
    if SUPPORTED_KEY_BITS.contains(&bits) {
        Ok(())
    } else {
        Err(AuthError::UnsupportedKeySize(bits))
    }
}

/// Fresh keypair from the OS random source.
pub fn generate_keypair(bits: usize) -> Result<KeyPair, AuthError> {
    generate_keypair_with_rng(bits, &mut OsRng)
}

pub fn generate_keypair_with_rng<R: RngCore + CryptoRng>(
    bits: usize,
    rng: &mut R,
) -> Result<KeyPair, AuthError> {
    check_bits(bits)?;
    let private = RsaPrivateKey::new(rng, bits)?;
    Ok(KeyPair::from_private(private))
}

/// Reproducible keypair derived from a label. Only for fixtures and
/// builtin scenarios; never for keys that protect anything.
pub fn deterministic_keypair(label: &str, bits: usize) -> Result<KeyPair, AuthError> {
    let seed: [u8; 32] = Sha256::digest(label.as_bytes()).into();
    generate_keypair_with_rng(bits, &mut ChaCha20Rng::from_seed(seed))
}

pub fn get_hash(message: &[u8], alg: HashAlg) -> Vec<u8> {
    match alg {
        HashAlg::Md5 => Md5::digest(message).to_vec(),
        HashAlg::Sha256 => Sha256::digest(message).to_vec(),
    }
}

fn check_digest(digest: &[u8], alg: HashAlg) -> Result<(), AuthError> {
    if digest.len() == alg.digest_len() {
        Ok(())
    } else {
        Err(AuthError::DigestLength {
            alg: alg.name(),
            expected: alg.digest_len(),
            actual: digest.len(),
        })
    }
}

/// PKCS#1 v1.5 signature over an already computed digest.
pub fn create_signature(
    digest: &[u8],
    alg: HashAlg,
    private: &RsaPrivateKey,
) -> Result<Vec<u8>, AuthError> {
    check_digest(digest, alg)?;
    Ok(private.sign(alg.scheme(), digest)?)
}

/// Never errors: any malformed input simply fails verification.
pub fn verify_signature(
    digest: &[u8],
    alg: HashAlg,
    signature: &[u8],
    public: &RsaPublicKey,
) -> bool {
    check_digest(digest, alg).is_ok() && public.verify(alg.scheme(), digest, signature).is_ok()
}

/// Canonical request body: `key=value` lines sorted by key, each LF-terminated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Payload(BTreeMap<String, String>);

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.insert(key, value);
        self
    }

    /// Panics on keys outside `[a-z0-9_]` or values containing LF; both are
    /// programming errors since every payload is built by this crate.
    pub fn insert(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(
            !key.is_empty()
                && key
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'),
            "invalid payload key {key:?}"
        );
        assert!(!value.contains('\n'), "payload value contains LF");
        self.0.insert(key.to_owned(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out.into_bytes()
    }

    /// Strict inverse of [`Payload::to_bytes`]; anything non-canonical is rejected.
    pub fn parse(bytes: &[u8]) -> Result<Self, AuthError> {
        let text = std::str::from_utf8(bytes).map_err(|e| AuthError::Payload(e.to_string()))?;
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(AuthError::Payload("missing final LF".into()));
        }
        let mut map = BTreeMap::new();
        let mut prev: Option<&str> = None;
        for line in text.split_terminator('\n') {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| AuthError::Payload(format!("line without '=': {line:?}")))?;
            if prev.is_some_and(|p| p >= k) {
                return Err(AuthError::Payload("keys not strictly sorted".into()));
            }
            prev = Some(k);
            map.insert(k.to_owned(), v.to_owned());
        }
        Ok(Self(map))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedEnvelope {
    pub payload: Vec<u8>,
    pub digest: Vec<u8>,
    pub signature: Vec<u8>,
    pub signer_id: String,
    pub hash_alg: HashAlg,
}

impl SignedEnvelope {
    pub fn seal(
        payload: &Payload,
        signer_id: impl Into<String>,
        hash_alg: HashAlg,
        private: &RsaPrivateKey,
    ) -> Result<Self, AuthError> {
        let payload = payload.to_bytes();
        let digest = get_hash(&payload, hash_alg);
        let signature = create_signature(&digest, hash_alg, private)?;
        Ok(Self {
            payload,
            digest,
            signature,
            signer_id: signer_id.into(),
            hash_alg,
        })
    }

    /// Stored digest matches the payload and the signature verifies.
    pub fn verify(&self, public: &RsaPublicKey) -> bool {
        self.digest.len() == self.hash_alg.digest_len()
            && get_hash(&self.payload, self.hash_alg) == self.digest
            && verify_signature(&self.digest, self.hash_alg, &self.signature, public)
    }

    pub fn parsed_payload(&self) -> Result<Payload, AuthError> {
        Payload::parse(&self.payload)
    }
}

/// Single-line encoding used inside payloads: base64 of the PKCS#1 DER.
pub fn public_key_to_b64(public: &RsaPublicKey) -> Result<String, AuthError> {
    let der = public
        .to_pkcs1_der()
        .map_err(|e| AuthError::KeyEncoding(e.to_string()))?;
    Ok(B64.encode(der.as_bytes()))
}

pub fn public_key_from_b64(text: &str) -> Result<RsaPublicKey, AuthError> {
    let der = B64
        .decode(text)
        .map_err(|e| AuthError::KeyEncoding(e.to_string()))?;
    RsaPublicKey::from_pkcs1_der(&der).map_err(|e| AuthError::KeyEncoding(e.to_string()))
}

pub fn public_key_to_pem(public: &RsaPublicKey) -> Result<String, AuthError> {
    public
        .to_pkcs1_pem(LineEnding::LF)
        .map_err(|e| AuthError::KeyEncoding(e.to_string()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AuthError + '_ {
    move |source| AuthError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn read_private_key(path: &Path) -> Result<KeyPair, AuthError> {
    let pem = fs::read_to_string(path).map_err(io_err(path))?;
    let private = RsaPrivateKey::from_pkcs1_pem(&pem)
        .map_err(|e| AuthError::KeyEncoding(format!("{}: {e}", path.display())))?;
    Ok(KeyPair::from_private(private))
}

pub fn read_public_key(path: &Path) -> Result<RsaPublicKey, AuthError> {
    let pem = fs::read_to_string(path).map_err(io_err(path))?;
    RsaPublicKey::from_pkcs1_pem(&pem)
        .map_err(|e| AuthError::KeyEncoding(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8], force: bool) -> Result<(), AuthError> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::AlreadyExists {
            AuthError::KeyExists(path.to_owned())
        } else {
            AuthError::Io {
                path: path.to_owned(),
                source,
            }
        }
    })?;
    file.write_all(contents).map_err(io_err(path))
}

pub fn write_public_key(path: &Path, public: &RsaPublicKey, force: bool) -> Result<(), AuthError> {
    write_file(path, public_key_to_pem(public)?.as_bytes(), force)
}

/// Writes `<name>.priv` and `<name>.pub` into `dir` as PKCS#1 PEM.
/// Without `force`, refuses when either file already exists.
pub fn write_keypair_files(
    dir: &Path,
    name: &str,
    keys: &KeyPair,
    force: bool,
) -> Result<(PathBuf, PathBuf), AuthError> {
    let priv_path = dir.join(format!("{name}.priv"));
    let pub_path = dir.join(format!("{name}.pub"));
    if !force {
        for p in [&priv_path, &pub_path] {
            if p.exists() {
                return Err(AuthError::KeyExists(p.clone()));
            }
        }
    }
    let pem = keys
        .private
        .to_pkcs1_pem(LineEnding::LF)
        .map_err(|e| AuthError::KeyEncoding(e.to_string()))?;
    write_file(&priv_path, pem.as_bytes(), force)?;
    write_public_key(&pub_path, &keys.public, force)?;
    Ok((priv_path, pub_path))
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;

    pub(crate) fn key_a() -> &'static KeyPair {
        static K: OnceLock<KeyPair> = OnceLock::new();
        K.get_or_init(|| deterministic_keypair("unit-a", 1024).unwrap())
    }

    fn key_b() -> &'static KeyPair {
        static K: OnceLock<KeyPair> = OnceLock::new();
        K.get_or_init(|| deterministic_keypair("unit-b", 1024).unwrap())
    }

    fn hex(bytes: &[u8]) -> String {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn keygen_sizes() {
        assert_eq!(generate_keypair(1024).unwrap().bits(), 1024);
        assert_eq!(key_a().bits(), 1024);
        assert!(matches!(
            generate_keypair(999),
            Err(AuthError::UnsupportedKeySize(999))
        ));
    }

    #[test]
    fn keygen_2048_and_signature_length() {
        let k = generate_keypair(2048).unwrap();
        assert_eq!(k.bits(), 2048);
        let sig = create_signature(
            &get_hash(b"x", HashAlg::Sha256),
            HashAlg::Sha256,
            k.private_part(),
        )
        .unwrap();
        assert_eq!(sig.len(), 256);
    }

    #[test]
    fn fresh_keys_differ() {
        let a = generate_keypair(1024).unwrap();
        let b = generate_keypair(1024).unwrap();
        assert_ne!(a.public_part().n(), b.public_part().n());
    }

    #[test]
    fn md5_reference_digests() {
        assert_eq!(
            hex(&get_hash(b"abc", HashAlg::Md5)),
            "900150983cd24fb0d6963f7d28e17f72"
        );
        assert_eq!(
            hex(&get_hash(b"", HashAlg::Md5)),
            "d41d8cd98f00b204e9800998ecf8427e"
        );
        assert_eq!(get_hash(b"abc", HashAlg::Sha256).len(), 32);
    }

    #[test]
    fn sign_verify_and_wrong_key() {
        for alg in [HashAlg::Md5, HashAlg::Sha256] {
            let d = get_hash(b"register R1", alg);
            let sig = create_signature(&d, alg, key_a().private_part()).unwrap();
            assert_eq!(sig.len(), 128);
            assert!(verify_signature(&d, alg, &sig, key_a().public_part()));
            assert!(!verify_signature(&d, alg, &sig, key_b().public_part()));
        }
    }

    #[test]
    fn digest_algorithm_mismatch_is_an_error() {
        let d = get_hash(b"m", HashAlg::Sha256);
        assert!(matches!(
            create_signature(&d, HashAlg::Md5, key_a().private_part()),
            Err(AuthError::DigestLength {
                expected: 16,
                actual: 32,
                ..
            })
        ));
        let sig = create_signature(&d, HashAlg::Sha256, key_a().private_part()).unwrap();
        assert!(!verify_signature(
            &d,
            HashAlg::Md5,
            &sig,
            key_a().public_part()
        ));
    }

    #[test]
    fn malformed_signatures_are_false_not_errors() {
        let d = get_hash(b"m", HashAlg::Md5);
        assert!(!verify_signature(
            &d,
            HashAlg::Md5,
            &[],
            key_a().public_part()
        ));
        assert!(!verify_signature(
            &d,
            HashAlg::Md5,
            &[0u8; 3],
            key_a().public_part()
        ));
        assert!(!verify_signature(
            &d,
            HashAlg::Md5,
            &[0xff; 300],
            key_a().public_part()
        ));
    }

    #[test]
    fn every_single_bit_flip_in_signature_fails() {
        let d = get_hash(b"short", HashAlg::Md5);
        let sig = create_signature(&d, HashAlg::Md5, key_a().private_part()).unwrap();
        for bit in 0..sig.len() * 8 {
            let mut bad = sig.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert!(
                !verify_signature(&d, HashAlg::Md5, &bad, key_a().public_part()),
                "flip of bit {bit} still verified"
            );
        }
    }

    #[test]
    fn payload_is_sorted_lf_lines() {
        let p = Payload::new()
            .with("name", "R1")
            .with("mips", 10)
            .with("b", "x=y");
        assert_eq!(p.to_bytes(), b"b=x=y\nmips=10\nname=R1\n");
        assert_eq!(Payload::parse(&p.to_bytes()).unwrap(), p);
        assert!(Payload::parse(b"b=1\na=2\n").is_err());
        assert!(Payload::parse(b"a=1").is_err());
        assert!(Payload::parse(b"novalue\n").is_err());
        assert_eq!(Payload::parse(b"").unwrap(), Payload::new());
    }

    #[test]
    fn envelope_detects_payload_tampering() {
        let p = Payload::new().with("user_name", "alice");
        let env = SignedEnvelope::seal(&p, "alice", HashAlg::Md5, key_a().private_part()).unwrap();
        assert!(env.verify(key_a().public_part()));
        assert!(!env.verify(key_b().public_part()));

        let mut tampered = env.clone();
        tampered.payload[0] ^= 0x01;
        assert!(!tampered.verify(key_a().public_part()));

        // re-hashing the tampered payload does not help without the key
        tampered.digest = get_hash(&tampered.payload, HashAlg::Md5);
        assert!(!tampered.verify(key_a().public_part()));
    }

    #[test]
    fn public_key_encodings_round_trip() {
        let b64 = public_key_to_b64(key_a().public_part()).unwrap();
        assert!(!b64.contains('\n'));
        assert_eq!(&public_key_from_b64(&b64).unwrap(), key_a().public_part());
        assert!(public_key_from_b64("not base64!").is_err());
    }

    #[test]
    fn key_files_refuse_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let (priv_path, pub_path) =
            write_keypair_files(dir.path(), "alice", key_a(), false).unwrap();
        let loaded = read_private_key(&priv_path).unwrap();
        assert_eq!(loaded.public_part(), key_a().public_part());
        assert_eq!(&read_public_key(&pub_path).unwrap(), key_a().public_part());

        assert!(matches!(
            write_keypair_files(dir.path(), "alice", key_b(), false),
            Err(AuthError::KeyExists(_))
        ));
        write_keypair_files(dir.path(), "alice", key_b(), true).unwrap();
        assert_eq!(
            read_private_key(&priv_path).unwrap().public_part(),
            key_b().public_part()
        );
    }
}

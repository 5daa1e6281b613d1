//! Domain vocabulary shared by every pipeline stage.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::orchestrator::MemoryPool;

/// The ten secret families the screener knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SecretType {
    AWS,
    GitHub,
    Huggingface,
    JDBC,
    MongoDB,
    OpenAI,
    PostgreSQL,
    PrivateKey,
    Redis,
    URI,
}

impl SecretType {
    pub const ALL: [SecretType; 10] = [
        SecretType::AWS,
        SecretType::GitHub,
        SecretType::Huggingface,
        SecretType::JDBC,
        SecretType::MongoDB,
        SecretType::OpenAI,
        SecretType::PostgreSQL,
        SecretType::PrivateKey,
        SecretType::Redis,
        SecretType::URI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SecretType::AWS => "AWS",
            SecretType::GitHub => "GitHub",
            SecretType::Huggingface => "Huggingface",
            SecretType::JDBC => "JDBC",
            SecretType::MongoDB => "MongoDB",
            SecretType::OpenAI => "OpenAI",
            SecretType::PostgreSQL => "PostgreSQL",
            SecretType::PrivateKey => "PrivateKey",
            SecretType::Redis => "Redis",
            SecretType::URI => "URI",
        }
    }

    /// Types whose value is a URI that should carry a username and password.
    pub fn is_credentialed_uri(self) -> bool {
        matches!(
            self,
            SecretType::JDBC
                | SecretType::MongoDB
                | SecretType::PostgreSQL
                | SecretType::Redis
                | SecretType::URI
        )
    }

    /// Prefix-plus-random-body API tokens.
    pub fn is_token(self) -> bool {
        matches!(
            self,
            SecretType::AWS | SecretType::GitHub | SecretType::Huggingface | SecretType::OpenAI
        )
    }
}

impl fmt::Display for SecretType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown secret type `{0}`")]
pub struct UnknownSecretType(pub String);

impl FromStr for SecretType {
    type Err = UnknownSecretType;

    /// Case-insensitive match on the canonical names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SecretType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownSecretType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

impl ByteSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        ByteSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &ByteSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceLocation {
    /// Repository-relative, `/`-separated.
    pub file_path: String,
    /// 1-based.
    pub line: usize,
    pub byte_span: ByteSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Code,
    Document,
    Config,
    Data,
    KeyMaterial,
}

impl FileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FileKind::Code => "code",
            FileKind::Document => "document",
            FileKind::Config => "config",
            FileKind::Data => "data",
            FileKind::KeyMaterial => "key_material",
        }
    }
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify a repository path by its extension. Unknown or missing
/// extensions are treated as code.
pub fn classify_file_kind(path: &str) -> FileKind {
    let name = path.rsplit(['/', '\\']).next().unwrap_or("");
    let ext = match Path::new(name).extension().and_then(|e| e.to_str()) {
        Some(ext) => ext.to_ascii_lowercase(),
        // Dotfiles such as `.env` have no extension in `Path` terms.
        None => match name.strip_prefix('.') {
            Some(rest) if !rest.contains('.') => rest.to_ascii_lowercase(),
            _ => return FileKind::Code,
        },
    };
    match ext.as_str() {
        "md" | "txt" | "rst" | "adoc" => FileKind::Document,
        "env" | "json" | "yaml" | "yml" | "toml" | "ini" | "properties" | "conf" | "ipynb" => {
            FileKind::Config
        }
        "pem" | "key" | "crt" | "p12" => FileKind::KeyMaterial,
        "csv" | "tsv" | "sqlite" | "db" => FileKind::Data,
        _ => FileKind::Code,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub before: String,
    pub after: String,
    pub file_kind: FileKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSecret {
    pub id: String,
    pub secret_type: SecretType,
    pub raw_value: String,
    pub location: SourceLocation,
    pub context: ContextWindow,
    pub entropy_bits: f64,
    pub detector_rule: String,
}

impl CandidateSecret {
    pub fn file_kind(&self) -> FileKind {
        self.context.file_kind
    }
}

/// Stable candidate identifier: hex SHA-256 of (path, span, type), truncated
/// to 128 bits.
pub fn candidate_id(file_path: &str, span: ByteSpan, secret_type: SecretType) -> String {
    let mut hasher = Sha256::new();
    hasher.update(file_path.as_bytes());
    hasher.update([0u8]);
    hasher.update(span.start.to_le_bytes());
    hasher.update(span.end.to_le_bytes());
    hasher.update(secret_type.as_str().as_bytes());
    to_hex(&hasher.finalize()[..16])
}

/// Short digest used wherever a raw secret value must not appear verbatim.
pub fn redact(raw: &str) -> String {
    let digest = Sha256::digest(raw.as_bytes());
    format!("sha256:{}", to_hex(&digest[..6]))
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TrueLeak,
    FalsePositive,
    Undetermined,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::TrueLeak => "true_leak",
            Classification::FalsePositive => "false_positive",
            Classification::Undetermined => "undetermined",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Low,
}

/// Verification level: 1 intrinsic, 2 file context, 3 project references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Level {
    Intrinsic = 1,
    Context = 2,
    Reference = 3,
}

impl From<Level> for u8 {
    fn from(level: Level) -> u8 {
        level as u8
    }
}

impl TryFrom<u8> for Level {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Level::Intrinsic),
            2 => Ok(Level::Context),
            3 => Ok(Level::Reference),
            other => Err(format!("invalid level {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub candidate_id: String,
    pub classification: Classification,
    pub confidence: Confidence,
    pub reasons: Vec<String>,
    pub levels_used: BTreeSet<Level>,
    pub pool_snapshot: MemoryPool,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_kind_table() {
        assert_eq!(classify_file_kind("README.md"), FileKind::Document);
        assert_eq!(classify_file_kind("certs/server.pem"), FileKind::KeyMaterial);
        assert_eq!(classify_file_kind(""), FileKind::Code);
        assert_eq!(classify_file_kind("src/"), FileKind::Code);
        assert_eq!(classify_file_kind("app/.env"), FileKind::Config);
        assert_eq!(classify_file_kind("conf/settings.YAML"), FileKind::Config);
        assert_eq!(classify_file_kind("dump.sqlite"), FileKind::Data);
        assert_eq!(classify_file_kind("notes.ipynb"), FileKind::Config);
        assert_eq!(classify_file_kind("main.rs"), FileKind::Code);
        assert_eq!(classify_file_kind("Makefile"), FileKind::Code);
        assert_eq!(classify_file_kind(".gitignore"), FileKind::Code);
    }

    #[test]
    fn secret_type_parse_is_case_insensitive() {
        assert_eq!("aws".parse::<SecretType>().unwrap(), SecretType::AWS);
        assert_eq!("PrivateKey".parse::<SecretType>().unwrap(), SecretType::PrivateKey);
        assert!("FooCloud".parse::<SecretType>().is_err());
    }

    #[test]
    fn candidate_id_is_deterministic() {
        let a = candidate_id("a/b.py", ByteSpan::new(3, 9), SecretType::AWS);
        let b = candidate_id("a/b.py", ByteSpan::new(3, 9), SecretType::AWS);
        let c = candidate_id("a/b.py", ByteSpan::new(3, 9), SecretType::OpenAI);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 32);
    }

    #[test]
    fn level_serializes_as_number() {
        let set: BTreeSet<Level> = [Level::Reference, Level::Intrinsic].into_iter().collect();
        assert_eq!(serde_json::to_string(&set).unwrap(), "[1,3]");
    }
}

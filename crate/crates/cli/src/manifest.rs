//! Run manifests: everything needed to rerun a command and check its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FORMAT: &str = "trajart-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub subcommand: String,
    /// Arguments after the program name, exactly as given.
    pub argv: Vec<String>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    /// Output paths are relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}.manifest.json")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(CliError::user(format!(
                "{}: unsupported manifest `{}` v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Rejects paths that are absolute or climb out of the directory they are
/// joined to.
pub fn check_relative(path: &Path) -> Result<(), CliError> {
    let mut depth = 0usize;
    for c in path.components() {
        match c {
            Component::Normal(_) => depth += 1,
            Component::CurDir => {}
            Component::ParentDir if depth > 0 => depth -= 1,
            _ => {
                return Err(CliError::user(format!(
                    "output path `{}` escapes the output directory",
                    path.display()
                )))
            }
        }
    }
    if depth == 0 {
        return Err(CliError::user(format!(
            "output path `{}` does not name a file",
            path.display()
        )));
    }
    Ok(())
}

/// Collects inputs read and outputs written by one command.
pub struct Run {
    out_dir: PathBuf,
    quiet: bool,
    manifest: RunManifest,
}

impl Run {
    pub fn new(subcommand: &str, argv: &[String], out_dir: &Path, quiet: bool) -> Self {
        Self {
            out_dir: out_dir.to_owned(),
            quiet,
            manifest: RunManifest {
                format: MANIFEST_FORMAT.into(),
                version: MANIFEST_VERSION,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                subcommand: subcommand.into(),
                argv: argv.to_vec(),
                params: BTreeMap::new(),
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        }
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameter serializes");
        self.manifest.params.insert(name.into(), v);
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.into(), value);
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes =
            fs::read(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        self.manifest.inputs.push(FileDigest {
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::user(format!("{}: not UTF-8 text", path.display())))
    }

    pub fn write(&mut self, rel: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        check_relative(rel)?;
        let bytes = bytes.as_ref();
        let target = self.out_dir.join(rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::user(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&target, bytes)
            .map_err(|e| CliError::user(format!("{}: {e}", target.display())))?;
        self.manifest.outputs.push(FileDigest {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_hex(bytes),
        });
        self.log(format!("wrote {}", target.display()));
        Ok(())
    }

    /// Writes the manifest next to the outputs and returns it.
    pub fn finish(self) -> Result<RunManifest, CliError> {
        let name = RunManifest::file_name(&self.manifest.subcommand);
        let target = self.out_dir.join(&name);
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::user(format!("{}: {e}", self.out_dir.display())))?;
        fs::write(&target, self.manifest.to_json())
            .map_err(|e| CliError::user(format!("{}: {e}", target.display())))?;
        Ok(self.manifest)
    }
}

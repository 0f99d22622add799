//! Output files with a reproducibility header.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Failure, RunArgs};

/// Identifies the tool, seed and configuration that produced a file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    /// SHA-256 of the spec file contents and every result-affecting flag.
    pub config_sha256: String,
}

/// Everything that can change results; the worker count and paths cannot.
#[derive(Serialize)]
struct Digested<'a> {
    command: &'a str,
    spec_sha256: String,
    seed: u64,
    trials: Option<usize>,
    draws: Option<usize>,
    n: Option<usize>,
    delta: Option<f64>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Header {
    pub fn new(command: &'static str, args: &RunArgs, spec_text: &str) -> Self {
        let config = Digested {
            command,
            spec_sha256: hex(&Sha256::digest(spec_text.as_bytes())),
            seed: args.seed,
            trials: args.trials,
            draws: args.draws,
            n: args.n,
            delta: args.delta,
        };
        let json = serde_json::to_string(&config).expect("config serializes");
        Header {
            tool: "gelfand",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: args.seed,
            config_sha256: hex(&Sha256::digest(json.as_bytes())),
        }
    }

    /// `#`-prefixed line placed above the CSV header row.
    pub fn csv_line(&self) -> String {
        format!(
            "# {} {} {} seed={} config_sha256={}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

pub struct OutDir {
    dir: PathBuf,
    header: Header,
}

#[derive(Serialize)]
struct WithHeader<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

impl OutDir {
    pub fn create(dir: &Path, header: Header) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            header,
        })
    }

    /// Pretty JSON object whose first member is the header.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(&WithHeader {
            header: &self.header,
            body,
        })
        .map_err(|e| Failure::Invariant(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// CSV produced by `fill`, preceded by the header comment line.
    pub fn csv(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let mut buf = self.header.csv_line().into_bytes();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(bytes)?;
        Ok(path)
    }
}

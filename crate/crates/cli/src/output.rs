//! Artifact writers: CSV tables, key=value reports, EULB snapshots and the run manifest.
//! Every file is written to a temporary name in the output directory and renamed into
//! place, so readers never observe a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use euler_lab::snapshot::Snapshot;
use euler_lab::Result;
use sha2::{Digest, Sha256};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug)]
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(
            values.len(),
            self.header.len(),
            "row width must match the header"
        );
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.join(",");
        out.push('\n');
        out.push_str(&self.body);
        out.into_bytes()
    }
}

/// Ordered `key = value` block.
#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn text(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_f64(value))
    }

    pub fn opt(&mut self, key: &str, value: Option<f64>) -> &mut Self {
        match value {
            Some(v) => self.num(key, v),
            None => self.text(key, "none"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.lines
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses a rendered report back into key/value pairs.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Output directory that remembers the checksum of everything written into it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    fn atomic_write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, self.dir.join(name))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.atomic_write(name, bytes)?;
        let digest = hex::encode(Sha256::digest(bytes));
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), digest));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        self.write(name, &csv.to_bytes())
    }

    pub fn report(&mut self, name: &str, report: &Report) -> Result<()> {
        self.write(name, report.render().as_bytes())
    }

    /// Concatenated EULB blocks, e.g. a field followed by its particle set.
    pub fn snapshots(&mut self, name: &str, blocks: &[Snapshot]) -> Result<()> {
        let mut bytes = Vec::new();
        for b in blocks {
            bytes.extend_from_slice(&b.to_bytes());
        }
        self.write(name, &bytes)
    }

    /// Writes `manifest.txt`; it is not listed among its own checksums.
    pub fn manifest(&self, m: &Manifest) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "version = {}", m.version);
        let _ = writeln!(text, "system = {}", m.system);
        let _ = writeln!(text, "start_unix = {:.3}", m.start_unix);
        let _ = writeln!(text, "end_unix = {:.3}", m.end_unix);
        let _ = writeln!(text, "status = {}", m.status);
        for (name, digest) in &self.files {
            let _ = writeln!(text, "sha256.{name} = {digest}");
        }
        text.push_str("[config]\n");
        text.push_str(&m.config_echo);
        self.atomic_write("manifest.txt", text.as_bytes())
    }
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub version: String,
    pub system: String,
    pub start_unix: f64,
    pub end_unix: f64,
    pub status: String,
    pub config_echo: String,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut c = Csv::new(&["t", "x"]);
        c.row(&[0.1, -2.0]);
        let s = String::from_utf8(c.to_bytes()).unwrap();
        assert_eq!(s, "t,x\n1.0000000000000001e-1,-2.0000000000000000e0\n");
        let back: f64 = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn manifest_checksums_match_files() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path().join("run")).unwrap();
        out.write("a.txt", b"hello").unwrap();
        let mut r = Report::default();
        r.num("x", 1.5).text("flag", true);
        out.report("report.txt", &r).unwrap();
        let m = Manifest {
            version: "0".into(),
            system: "clm".into(),
            start_unix: 0.0,
            end_unix: 1.0,
            status: "completed".into(),
            config_echo: "system = clm\n".into(),
        };
        out.manifest(&m).unwrap();
        let text = fs::read_to_string(out.path().join("manifest.txt")).unwrap();
        for (name, digest) in out.files() {
            let bytes = fs::read(out.path().join(name)).unwrap();
            assert_eq!(&hex::encode(Sha256::digest(&bytes)), digest);
            assert!(text.contains(&format!("sha256.{name} = {digest}")));
        }
        let parsed = parse_report(&fs::read_to_string(out.path().join("report.txt")).unwrap());
        assert_eq!(parsed[1], ("flag".to_string(), "true".to_string()));
        assert!(fs::read_dir(out.path()).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .ends_with(".tmp")));
    }
}

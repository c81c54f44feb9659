//! Dual output: human text for stdout, machine files for the output directory.

use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

/// What a command produced. Machine files carry no timings so that they are
/// byte-identical across runs with the same config.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub text: String,
    pub files: Vec<OutputFile>,
    /// Set by `verify` when an invariant fails.
    pub failure: Option<String>,
}

impl Outcome {
    pub fn json(&mut self, name: &str, value: &Value) {
        let mut contents = serde_json::to_vec_pretty(value).expect("JSON values serialize");
        contents.push(b'\n');
        self.files.push(OutputFile {
            name: name.into(),
            contents,
        });
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(row).expect("in-memory write");
        }
        self.files.push(OutputFile {
            name: name.into(),
            contents: w.into_inner().expect("in-memory flush"),
        });
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        self.text.push_str(text.as_ref());
        self.text.push('\n');
    }

    pub fn write_files(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Shortest round-trip formatting, so CSV values parse back exactly.
/// Very small and very large magnitudes switch to exponent notation.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Header names `prefix0..prefix{len-1}` starting at `from`.
pub fn indexed(prefix: &str, from: usize, len: usize) -> Vec<String> {
    (from..from + len).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [
            0.0,
            1.0 / 3.0,
            -8.881784197001252e-16,
            1e20,
            123.5,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(-8.881784197001252e-16), "-8.881784197001252e-16");
        assert_eq!(indexed("d_", 1, 2), ["d_1", "d_2"]);
    }
}

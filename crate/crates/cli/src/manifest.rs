//! TOML manifest for the `correct` command.

use std::path::{Path, PathBuf};

use aglsec_core::scores::DEFAULT_MEDIAN_FRAMES;
use aglsec_core::windowing::WindowParams;
use serde::Deserialize;

use crate::corpus_io::toml_line;
use crate::error::{CliError, Result};
use crate::formats::read_text;

fn default_median() -> usize {
    DEFAULT_MEDIAN_FRAMES
}

fn default_window() -> usize {
    WindowParams::default().window_size
}

fn default_stride() -> usize {
    WindowParams::default().stride
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    posteriors: PathBuf,
    words: PathBuf,
    baseline: PathBuf,
    reference: Option<PathBuf>,
    model: Option<PathBuf>,
    output_dir: PathBuf,
    frame_rate: Option<f64>,
    #[serde(default = "default_median")]
    median_frames: usize,
    #[serde(default = "default_window")]
    window_size: usize,
    #[serde(default = "default_stride")]
    stride: usize,
}

/// Inputs and parameters of one correction run. Relative paths are
/// resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineManifest {
    pub posteriors: PathBuf,
    pub words: PathBuf,
    pub baseline: PathBuf,
    pub reference: Option<PathBuf>,
    /// Absent means the identity corrector.
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Overrides the rate in the posterior header when converting CTM times.
    pub frame_rate: Option<f64>,
    pub median_frames: usize,
    pub window: WindowParams,
}

impl PipelineManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let raw: RawManifest =
            toml::from_str(&text).map_err(|e| CliError::format(path, toml_line(&text, &e), e.message().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let existing = |key: &str, p: &Path| -> Result<PathBuf> {
            let full = resolve(p);
            if !full.is_file() {
                return Err(CliError::format(path, key_line(&text, key), format!("{key}: no such file {}", full.display())));
            }
            Ok(full)
        };
        let m = Self {
            posteriors: existing("posteriors", &raw.posteriors)?,
            words: existing("words", &raw.words)?,
            baseline: existing("baseline", &raw.baseline)?,
            reference: raw.reference.as_deref().map(|p| existing("reference", p)).transpose()?,
            model: raw.model.as_deref().map(|p| existing("model", p)).transpose()?,
            output_dir: resolve(&raw.output_dir),
            frame_rate: raw.frame_rate,
            median_frames: raw.median_frames,
            window: WindowParams {
                window_size: raw.window_size,
                stride: raw.stride,
            },
        };
        m.check_ranges().map_err(|msg| CliError::format(path, 1, msg))?;
        Ok(m)
    }

    fn check_ranges(&self) -> std::result::Result<(), String> {
        if let Some(r) = self.frame_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(format!("frame_rate must be positive, got {r}"));
            }
        }
        if self.median_frames == 0 || self.median_frames.is_multiple_of(2) {
            return Err(format!("median_frames must be odd and positive, got {}", self.median_frames));
        }
        self.window.validate().map_err(|e| e.to_string())
    }
}

fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().starts_with(key))
        .map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn setup() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for f in ["p.txt", "w.ctm", "b.txt"] {
            fs::write(d.path().join(f), "").unwrap();
        }
        d
    }

    #[test]
    fn relative_paths_and_defaults() {
        let d = setup();
        let mp = d.path().join("m.toml");
        fs::write(&mp, "posteriors = \"p.txt\"\nwords = \"w.ctm\"\nbaseline = \"b.txt\"\noutput_dir = \"out\"\n").unwrap();
        let m = PipelineManifest::load(&mp).unwrap();
        assert_eq!(m.posteriors, d.path().join("p.txt"));
        assert_eq!(m.output_dir, d.path().join("out"));
        assert_eq!(m.median_frames, 11);
        assert_eq!(m.window, WindowParams::default());
        assert!(m.model.is_none());
    }

    #[test]
    fn missing_file_and_bad_ranges() {
        let d = setup();
        let mp = d.path().join("m.toml");
        fs::write(&mp, "posteriors = \"p.txt\"\nwords = \"nope.ctm\"\nbaseline = \"b.txt\"\noutput_dir = \"o\"\n").unwrap();
        let err = PipelineManifest::load(&mp).unwrap_err();
        assert!(matches!(err, CliError::Format { line: 2, .. }), "{err}");
        fs::write(
            &mp,
            "posteriors = \"p.txt\"\nwords = \"w.ctm\"\nbaseline = \"b.txt\"\noutput_dir = \"o\"\nmedian_frames = 4\n",
        )
        .unwrap();
        assert!(PipelineManifest::load(&mp).is_err());
        fs::write(&mp, "posteriors = \"p.txt\"\nbogus = 1\n").unwrap();
        assert!(PipelineManifest::load(&mp).is_err());
    }
}

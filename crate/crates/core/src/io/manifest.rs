use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::grid::import_sai_grid;
use crate::io::lft::read_lft;
use crate::lightfield::LightField;

/// One dataset entry: a path and an optional split tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Option<String>,
}

/// Line-oriented list of light-field files. Each non-empty line that does
/// not start with `#` is `path` or `path<TAB>split`. Relative paths resolve
/// against the manifest's directory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str, base: Option<&Path>) -> Self {
        let entries = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|l| {
                let (p, split) = match l.split_once('\t') {
                    Some((p, s)) => (p.trim(), Some(s.trim().to_string()).filter(|s| !s.is_empty())),
                    None => (l.trim(), None),
                };
                let path = PathBuf::from(p);
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path,
                };
                ManifestEntry { path, split }
            })
            .collect();
        DatasetManifest { entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text, path.parent()))
    }

    pub fn with_split(&self, split: &str) -> Self {
        DatasetManifest {
            entries: self.entries.iter().filter(|e| e.split.as_deref() == Some(split)).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Loads an `.lft` container or an SAI-grid image of `angular` views.
pub fn load_light_field(path: &Path, angular: (usize, usize)) -> Result<LightField<f32>> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("lft") => read_lft(path),
        _ => import_sai_grid(path, angular.0, angular.1),
    }
}

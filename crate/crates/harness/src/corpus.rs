//! Ground-truth corpus: one PNG per (color, fractal, depth) plus a manifest.
//!
//! Layout under the corpus root:
//!
//! ```text
//! black/cantor_set_depth0_size500_y_spacing20.png
//! black/...
//! red/...
//! manifest.jsonl          one CorpusItem per line
//! manifest_summary.json   per-color counts
//! catalog.json            fractal definitions
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ifsbench_core::catalog::{self, generate_unchecked, spec, FractalKind, FractalSpec};
use ifsbench_core::parallel::map_slice;
use ifsbench_core::raster::{render, write_png, LineColor, RasterError, RenderConfig};
use ifsbench_core::PathSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "manifest_summary.json";
pub const CATALOG_FILE: &str = "catalog.json";

/// Corpus size per color quoted alongside the results tables; larger than
/// what the default depth table produces.
pub const DOCUMENTED_PER_COLOR: usize = 122;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("bad depth range for {fractal}: {lo}..={hi}")]
    DepthRange {
        fractal: &'static str,
        lo: u32,
        hi: u32,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    /// Relative path without the `.png` extension.
    pub id: String,
    pub fractal: FractalKind,
    pub depth: u32,
    pub color: LineColor,
    pub params: BTreeMap<String, f64>,
    pub relative_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl CorpusItem {
    pub fn new(fractal: FractalKind, depth: u32, color: LineColor) -> Self {
        let s = spec(fractal);
        let relative_path = format!("{}/{}", color.as_str(), file_name(s, depth));
        Self {
            id: relative_path.trim_end_matches(".png").to_string(),
            fractal,
            depth,
            color,
            params: s.extra_params.iter().cloned().collect(),
            relative_path,
            sha256: None,
        }
    }

    pub fn path_in(&self, root: &Path) -> PathBuf {
        root.join(&self.relative_path)
    }
}

/// `<fractal>_depth<d>_size<s0>[_<param><value>...].png`, parameters in
/// catalog order.
pub fn file_name(s: &FractalSpec, depth: u32) -> String {
    let mut name = format!("{}_depth{}_size{}", s.name, depth, s.base_size);
    for (k, v) in &s.extra_params {
        name.push_str(&format!("_{k}{v}"));
    }
    name.push_str(".png");
    name
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub colors: Vec<LineColor>,
    /// Inclusive depth ranges replacing the catalog default `0..=max_depth`.
    /// Ranges may exceed the catalog maximum.
    pub depths: BTreeMap<FractalKind, (u32, u32)>,
    pub render: RenderConfig,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        Self {
            colors: LineColor::ALL.to_vec(),
            depths: BTreeMap::new(),
            render: RenderConfig::default(),
        }
    }
}

impl CorpusPlan {
    pub fn with_colors(colors: &[LineColor]) -> Self {
        Self {
            colors: colors.to_vec(),
            ..Self::default()
        }
    }

    pub fn depth_range(&self, kind: FractalKind) -> (u32, u32) {
        self.depths
            .get(&kind)
            .copied()
            .unwrap_or((0, spec(kind).max_depth))
    }

    fn validate(&self) -> Result<(), CorpusError> {
        self.render.validate()?;
        for (&kind, &(lo, hi)) in &self.depths {
            if lo > hi {
                return Err(CorpusError::DepthRange {
                    fractal: kind.as_str(),
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Items ordered by color, then catalog order, then depth.
    pub fn items(&self) -> Vec<CorpusItem> {
        let mut out = Vec::new();
        for &color in &self.colors {
            for kind in FractalKind::ALL {
                let (lo, hi) = self.depth_range(kind);
                out.extend((lo..=hi).map(|d| CorpusItem::new(kind, d, color)));
            }
        }
        out
    }

    fn shapes(&self) -> Vec<(FractalKind, u32)> {
        FractalKind::ALL
            .into_iter()
            .flat_map(|k| {
                let (lo, hi) = self.depth_range(k);
                (lo..=hi).map(move |d| (k, d))
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    total: usize,
    per_color: BTreeMap<&'a str, usize>,
    per_fractal: BTreeMap<&'a str, usize>,
    documented_per_color: usize,
    note: String,
}

/// Renders every planned item to `root`, then writes the manifest files.
/// Returns the items with their content hashes filled in.
pub fn build_corpus(root: &Path, plan: &CorpusPlan) -> Result<Vec<CorpusItem>, CorpusError> {
    plan.validate()?;
    fs::create_dir_all(root).map_err(io_err(root))?;
    for color in &plan.colors {
        let dir = root.join(color.as_str());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let shapes = plan.shapes();
    let paths: BTreeMap<(FractalKind, u32), PathSet> = shapes
        .iter()
        .copied()
        .zip(map_slice(&shapes, |&(k, d)| generate_unchecked(k, d)))
        .collect();

    let items = plan.items();
    let written = map_slice(&items, |item| -> Result<CorpusItem, CorpusError> {
        let cfg = RenderConfig {
            line_color: item.color,
            ..plan.render.clone()
        };
        let img = render(&paths[&(item.fractal, item.depth)], &cfg);
        let bytes = write_png(&img, cfg.dpi)?;
        let path = item.path_in(root);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        let mut item = item.clone();
        item.sha256 = Some(hex::encode(Sha256::digest(&bytes)));
        Ok(item)
    });
    let items = written.into_iter().collect::<Result<Vec<_>, _>>()?;

    write_manifest(root, &items)?;
    write_summary(root, plan, &items)?;
    let cat = root.join(CATALOG_FILE);
    fs::write(&cat, catalog::manifest_json()).map_err(io_err(&cat))?;
    Ok(items)
}

fn write_manifest(root: &Path, items: &[CorpusItem]) -> Result<(), CorpusError> {
    let path = root.join(MANIFEST_FILE);
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    fs::write(&path, out).map_err(io_err(&path))
}

fn write_summary(root: &Path, plan: &CorpusPlan, items: &[CorpusItem]) -> Result<(), CorpusError> {
    let mut per_color = BTreeMap::new();
    let mut per_fractal = BTreeMap::new();
    for item in items {
        *per_color.entry(item.color.as_str()).or_insert(0) += 1;
        *per_fractal.entry(item.fractal.as_str()).or_insert(0) += 1;
    }
    let per_color_count = if plan.colors.is_empty() {
        0
    } else {
        items.len() / plan.colors.len()
    };
    let note = if per_color_count == DOCUMENTED_PER_COLOR {
        "per-color count matches the documented corpus size".to_string()
    } else {
        format!(
            "{per_color_count} items per color from the depth table vs {DOCUMENTED_PER_COLOR} \
             documented; the extra items are unspecified, use depth overrides to extend"
        )
    };
    let summary = Summary {
        total: items.len(),
        per_color,
        per_fractal,
        documented_per_color: DOCUMENTED_PER_COLOR,
        note,
    };
    let path = root.join(SUMMARY_FILE);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(&mut f, &summary).expect("summary serializes");
    f.write_all(b"\n").map_err(io_err(&path))
}

/// Reads `manifest.jsonl` from a built corpus.
pub fn load_manifest(root: &Path) -> Result<Vec<CorpusItem>, CorpusError> {
    let path = root.join(MANIFEST_FILE);
    let f = fs::File::open(&path).map_err(io_err(&path))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
            path: path.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

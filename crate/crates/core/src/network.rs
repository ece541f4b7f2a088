//! All-pairs multi-horizon causality tests on one panel, with heatmap export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{FittedSystem, TestConfig, TestMethod};
use crate::var::TimeSeriesPanel;

/// Result for one `(h, effect, cause)` cell; `None` fields mark a failed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCell {
    pub cause: String,
    pub effect: String,
    pub h: usize,
    pub wald: Option<f64>,
    pub df: Option<usize>,
    pub pvalue: Option<f64>,
    pub intensity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityNetwork {
    pub names: Vec<String>,
    pub horizons: Vec<usize>,
    pub method: String,
    pub p: usize,
    /// `intensity[k][effect][cause] = 1 - pvalue` at `horizons[k]`.
    pub intensity: Vec<Vec<Vec<Option<f64>>>>,
    pub cells: Vec<NetworkCell>,
}

impl CausalityNetwork {
    pub fn d(&self) -> usize {
        self.names.len()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.horizons.len(), self.d(), self.d())
    }

    pub fn cell(&self, h: usize, effect: usize, cause: usize) -> Option<&NetworkCell> {
        let k = self.horizons.iter().position(|&x| x == h)?;
        let d = self.d();
        self.cells.get((k * d + effect) * d + cause)
    }
}

/// Fits the VAR once and tests every ordered pair, diagonal included, at
/// every horizon. A failing pair becomes a missing cell.
pub fn run_network(
    panel: &TimeSeriesPanel,
    horizons: &[usize],
    method: TestMethod,
    cfg: &TestConfig,
) -> Result<CausalityNetwork> {
    let d = panel.d();
    if d < 2 {
        return Err(Error::InvalidInput("a network needs at least two series".into()));
    }
    let h_max = horizons
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidInput("no horizons given".into()))?;
    if horizons.contains(&0) {
        return Err(Error::InvalidInput("horizons must be >= 1".into()));
    }
    if panel.n() <= cfg.p + h_max {
        return Err(Error::SampleTooShort(format!(
            "n = {} must exceed p + max horizon = {}",
            panel.n(),
            cfg.p + h_max
        )));
    }
    let system = FittedSystem::new(panel, cfg, h_max)?;
    let names = panel.names().to_vec();
    let jobs: Vec<(usize, usize, usize)> = horizons
        .iter()
        .flat_map(|&h| (0..d).flat_map(move |effect| (0..d).map(move |cause| (h, effect, cause))))
        .collect();
    let cells: Vec<NetworkCell> = jobs
        .par_iter()
        .map(|&(h, effect, cause)| {
            let base = NetworkCell {
                cause: names[cause].clone(),
                effect: names[effect].clone(),
                h,
                wald: None,
                df: None,
                pvalue: None,
                intensity: None,
                error: None,
            };
            match system.test(cause, effect, h, method) {
                Ok((_, _, w)) => NetworkCell {
                    wald: Some(w.statistic),
                    df: Some(w.df),
                    pvalue: Some(w.pvalue),
                    intensity: Some(1.0 - w.pvalue),
                    ..base
                },
                Err(e) => {
                    log::warn!("{} -> {} at h={h} failed: {e}", names[cause], names[effect]);
                    NetworkCell {
                        error: Some(e.to_string()),
                        ..base
                    }
                }
            }
        })
        .collect();
    let intensity = (0..horizons.len())
        .map(|k| {
            (0..d)
                .map(|effect| {
                    (0..d)
                        .map(|cause| cells[(k * d + effect) * d + cause].intensity)
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(CausalityNetwork {
        names,
        horizons: horizons.to_vec(),
        method: method.label(),
        p: cfg.p,
        intensity,
        cells,
    })
}

/// Grey level for an intensity: 0 is white, 1 is black.
pub fn grey_hex(intensity: f64) -> String {
    let level = (255.0 * (1.0 - intensity.clamp(0.0, 1.0))).round() as u8;
    format!("#{level:02X}{level:02X}{level:02X}")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const CELL: usize = 32;
const MARGIN: usize = 96;

/// Heatmap of one horizon: rows are effects, columns are causes.
pub fn heatmap_svg(names: &[String], matrix: &[Vec<Option<f64>>], h: usize) -> String {
    let d = names.len();
    let size = MARGIN + d * CELL + 8;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<title>causality intensity, h = {h}</title>"#);
    for (j, name) in names.iter().enumerate() {
        let x = MARGIN + j * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="start" transform="rotate(-60 {x} {})">{}</text>"#,
            MARGIN - 6,
            MARGIN - 6,
            xml_escape(name)
        );
    }
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + i * CELL + CELL / 2 + 4;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN - 6,
            xml_escape(name)
        );
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, value) in row.iter().enumerate() {
            let (x, y) = (MARGIN + j * CELL, MARGIN + i * CELL);
            match value {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#BBBBBB" stroke-width="0.5"/>"##,
                        grey_hex(*v)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="none" stroke="#FF0000" stroke-dasharray="2,2"/>"##
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// `effect\cause` matrix with series names as headers; missing cells are empty.
pub fn heatmap_csv(names: &[String], matrix: &[Vec<Option<f64>>]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["effect\\cause".to_string()];
    header.extend(names.iter().cloned());
    writer.write_record(&header)?;
    for (name, row) in names.iter().zip(matrix) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Writes `heatmap_h<h>.csv`, `heatmap_h<h>.svg` and `network.json` into `dir`.
pub fn export_heatmap(net: &CausalityNetwork, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (k, &h) in net.horizons.iter().enumerate() {
        let csv_path = dir.join(format!("heatmap_h{h}.csv"));
        fs::write(&csv_path, heatmap_csv(&net.names, &net.intensity[k])?)?;
        let svg_path = dir.join(format!("heatmap_h{h}.svg"));
        fs::write(&svg_path, heatmap_svg(&net.names, &net.intensity[k], h))?;
        written.push(csv_path);
        written.push(svg_path);
    }
    let json_path = dir.join("network.json");
    let mut json = serde_json::to_string_pretty(net)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    written.push(json_path);
    Ok(written)
}

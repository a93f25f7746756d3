//! Dataset formats and report files.
//!
//! Three dataset formats are supported:
//!
//! * `long-tsv`: a header line `perceiver\tsender\treceiver\tweight` and one
//!   row per nonzero cell. Lines starting with `#` are comments. Labels and
//!   metadata live in an optional sidecar `<stem>.manifest.json`; without it
//!   labels are taken in order of first appearance.
//! * `layer-matrices`: a directory holding `manifest.json` and one
//!   `<layer label>.csv` per layer, each an `N × N` comma-separated matrix.
//! * `dense-json`: the dataset as one JSON document (the tensor as
//!   `{"dims": [..], "values": [..]}` in row-major order).
//!
//! Weights must be nonnegative integers. All text is UTF-8 with `\n` line
//! endings.
//!
//! [`save_report`] writes a fixed set of files per result kind:
//!
//! | result   | files |
//! |----------|-------|
//! | fit      | `model.json`, `fit.json`, `U.csv`, `V.csv`, `Y.csv`, `core.csv`, `U.svg`, `V.svg`, `Y.svg`, `core_<s>.svg` for each slice |
//! | relative | `relative.json`, `Y_star.csv`, `Y_star.svg`, `core_star_<s>.svg` for each slice |
//! | test     | `test.json`, `test.txt` |
//! | sweep    | `sweep.json`, `sweep.csv`, `sweep.svg` |
//!
//! JSON and CSV output is a pure function of the inputs. SVG files carry a
//! generator comment with the crate version.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::RelativeSpace;
use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::model::{ModelDocument, RegimeKind};
use crate::modelselect::SweepResult;
use crate::stats::TestResult;
use crate::tensor::Tensor3;

pub const LONG_TSV_HEADER: &str = "perceiver\tsender\treceiver\tweight";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Written into every SVG so figure diffs can ignore version bumps.
pub const GENERATOR_VERSION: &str = concat!("nntuck ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    LongTsv,
    LayerMatrices,
    DenseJson,
}

impl DataFormat {
    /// Directory → layer-matrices, `.json` → dense-json, anything else → long-tsv.
    pub fn infer(path: &Path) -> Self {
        if path.is_dir() {
            DataFormat::LayerMatrices
        } else if path.extension().is_some_and(|e| e == "json") {
            DataFormat::DenseJson
        } else {
            DataFormat::LongTsv
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long-tsv" => Ok(Self::LongTsv),
            "layer-matrices" => Ok(Self::LayerMatrices),
            "dense-json" => Ok(Self::DenseJson),
            other => Err(Error::arg(format!(
                "unknown data format `{other}` (expected long-tsv, layer-matrices or dense-json)"
            ))),
        }
    }
}

/// A multilayer network with labels. For a cognitive social structure the
/// layers are the perceivers and `layer_labels == node_labels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CssDataset {
    pub tensor: Tensor3,
    pub node_labels: Vec<String>,
    pub layer_labels: Vec<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default = "yes")]
    pub directed: bool,
}

fn yes() -> bool {
    true
}

fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl CssDataset {
    /// Dataset with labels `0..N` and `0..L`.
    pub fn unlabeled(tensor: Tensor3) -> Result<Self> {
        let [n, _, l] = tensor.dims();
        let ds = Self {
            tensor,
            node_labels: index_labels(n),
            layer_labels: index_labels(l),
            metadata: BTreeMap::new(),
            directed: true,
        };
        ds.check()?;
        Ok(ds)
    }

    pub fn is_css(&self) -> bool {
        self.node_labels == self.layer_labels
    }

    pub fn check(&self) -> Result<()> {
        let [n1, n2, l] = self.tensor.dims();
        if n1 != n2 {
            return Err(Error::arg(format!("network tensor must be N × N × L, got {n1} × {n2} × {l}")));
        }
        if self.node_labels.len() != n1 || self.layer_labels.len() != l {
            return Err(Error::arg(format!(
                "{} node and {} layer labels for a {n1} × {n2} × {l} tensor",
                self.node_labels.len(),
                self.layer_labels.len()
            )));
        }
        check_unique(&self.node_labels, "node")?;
        check_unique(&self.layer_labels, "layer")?;
        if let Some(bad) = self.tensor.values().iter().find(|x| x.fract() != 0.0) {
            return Err(Error::arg(format!("weights must be integers, found {bad}")));
        }
        Ok(())
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::new();
    for (idx, label) in labels.iter().enumerate() {
        if label.is_empty() || label.contains(['\t', '\n', '\r']) {
            return Err(Error::arg(format!("{what} label {idx} is empty or contains a tab or newline")));
        }
        if let Some(prev) = seen.insert(label.as_str(), idx) {
            return Err(Error::arg(format!("{what} label `{label}` appears at positions {prev} and {idx}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DatasetManifest {
    node_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer_labels: Option<Vec<String>>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default = "yes")]
    directed: bool,
}

impl DatasetManifest {
    fn of(ds: &CssDataset) -> Self {
        Self {
            node_labels: ds.node_labels.clone(),
            layer_labels: Some(ds.layer_labels.clone()),
            metadata: ds.metadata.clone(),
            directed: ds.directed,
        }
    }

    fn layers(&self) -> Vec<String> {
        self.layer_labels.clone().unwrap_or_else(|| self.node_labels.clone())
    }
}

/// `<dir>/<stem>.manifest.json` for a long-tsv file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

fn parse_weight(raw: &str, path: &Path, line: usize) -> Result<f64> {
    let w: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("weight `{raw}` is not a number")))?;
    if !w.is_finite() {
        return Err(Error::parse(path, line, format!("weight `{raw}` is not finite")));
    }
    if w < 0.0 {
        return Err(Error::parse(path, line, format!("negative weight {raw}")));
    }
    if w.fract() != 0.0 {
        return Err(Error::parse(path, line, format!("weight {raw} is not an integer")));
    }
    Ok(w)
}

pub fn load(path: &Path, format: DataFormat) -> Result<CssDataset> {
    let ds = match format {
        DataFormat::LongTsv => load_long_tsv(path)?,
        DataFormat::LayerMatrices => load_layer_matrices(path)?,
        DataFormat::DenseJson => load_dense_json(path)?,
    };
    ds.check()?;
    Ok(ds)
}

pub fn save(ds: &CssDataset, path: &Path, format: DataFormat) -> Result<()> {
    ds.check()?;
    match format {
        DataFormat::LongTsv => save_long_tsv(ds, path),
        DataFormat::LayerMatrices => save_layer_matrices(ds, path),
        DataFormat::DenseJson => write(path, &(serde_json::to_string_pretty(ds)? + "\n")),
    }
}

struct Labeler {
    fixed: bool,
    index: HashMap<String, usize>,
    order: Vec<String>,
}

impl Labeler {
    fn new(fixed: Option<Vec<String>>) -> Self {
        let (fixed, order) = match fixed {
            Some(labels) => (true, labels),
            None => (false, Vec::new()),
        };
        let index = order.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { fixed, index, order }
    }

    fn get(&mut self, label: &str, what: &str, path: &Path, line: usize) -> Result<usize> {
        if let Some(&idx) = self.index.get(label) {
            return Ok(idx);
        }
        if self.fixed {
            return Err(Error::parse(path, line, format!("unknown {what} label `{label}`")));
        }
        self.order.push(label.to_string());
        self.index.insert(label.to_string(), self.order.len() - 1);
        Ok(self.order.len() - 1)
    }
}

fn load_long_tsv(path: &Path) -> Result<CssDataset> {
    let text = read(path)?;
    let sidecar = sidecar_path(path);
    let manifest = if sidecar.exists() { Some(read_manifest(&sidecar)?) } else { None };
    let mut nodes = Labeler::new(manifest.as_ref().map(|m| m.node_labels.clone()));
    let mut layers = Labeler::new(manifest.as_ref().map(|m| m.layers()));
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut first_seen: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.starts_with('#') || (raw.trim().is_empty() && !header_seen) {
            continue;
        }
        if !header_seen {
            if raw.trim_end_matches('\r') != LONG_TSV_HEADER {
                return Err(Error::parse(path, line, format!("expected header `{}`", LONG_TSV_HEADER.replace('\t', "\\t"))));
            }
            header_seen = true;
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, line, format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let k = layers.get(fields[0], "perceiver", path, line)?;
        let i = nodes.get(fields[1], "sender", path, line)?;
        let j = nodes.get(fields[2], "receiver", path, line)?;
        let w = parse_weight(fields[3], path, line)?;
        if let Some(prev) = first_seen.insert((i, j, k), line) {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "duplicate triple ({}, {}, {}): first on line {prev}, again on line {line}",
                    fields[0], fields[1], fields[2]
                ),
            ));
        }
        entries.push((i, j, k, w));
    }
    if !header_seen {
        return Err(Error::parse(path, 1, "missing header line"));
    }
    let (n, l) = (nodes.order.len(), layers.order.len());
    if n == 0 || l == 0 {
        return Err(Error::parse(path, 1, "no rows and no manifest: cannot infer the network size"));
    }
    let mut values = vec![0.0; n * n * l];
    for (i, j, k, w) in entries {
        values[(i * n + j) * l + k] = w;
    }
    let (metadata, directed) = manifest.map_or_else(|| (BTreeMap::new(), true), |m| (m.metadata, m.directed));
    Ok(CssDataset {
        tensor: Tensor3::new([n, n, l], values)?,
        node_labels: nodes.order,
        layer_labels: layers.order,
        metadata,
        directed,
    })
}

fn save_long_tsv(ds: &CssDataset, path: &Path) -> Result<()> {
    let [n, _, l] = ds.tensor.dims();
    let mut out = String::new();
    for (key, value) in &ds.metadata {
        let _ = writeln!(out, "# {key}: {}", value.replace('\n', " "));
    }
    out.push_str(LONG_TSV_HEADER);
    out.push('\n');
    for k in 0..l {
        for i in 0..n {
            for j in 0..n {
                let w = ds.tensor.get(i, j, k);
                if w != 0.0 {
                    let _ = writeln!(out, "{}\t{}\t{}\t{w}", ds.layer_labels[k], ds.node_labels[i], ds.node_labels[j]);
                }
            }
        }
    }
    write(path, &out)?;
    write(&sidecar_path(path), &(serde_json::to_string_pretty(&DatasetManifest::of(ds))? + "\n"))
}

fn load_layer_matrices(dir: &Path) -> Result<CssDataset> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let layer_labels = manifest.layers();
    let n = manifest.node_labels.len();
    let l = layer_labels.len();
    let mut values = vec![0.0; n * n * l];
    for (k, label) in layer_labels.iter().enumerate() {
        check_file_label(label)?;
        let path = dir.join(format!("{label}.csv"));
        let text = read(&path)?;
        let rows: Vec<&str> = text.lines().filter(|r| !r.trim().is_empty()).collect();
        if rows.len() != n {
            return Err(Error::parse(&path, rows.len().min(n) + 1, format!("expected {n} rows, found {}", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            let line = i + 1;
            let cells: Vec<&str> = row.trim_end_matches('\r').split(',').collect();
            if cells.len() != n {
                return Err(Error::parse(&path, line, format!("expected {n} columns, found {}", cells.len())));
            }
            for (j, cell) in cells.iter().enumerate() {
                values[(i * n + j) * l + k] = parse_weight(cell, &path, line)?;
            }
        }
    }
    if n == 0 || l == 0 {
        return Err(Error::parse(dir.join(MANIFEST_FILE), 1, "manifest lists no nodes or no layers"));
    }
    Ok(CssDataset {
        tensor: Tensor3::new([n, n, l], values)?,
        node_labels: manifest.node_labels,
        layer_labels,
        metadata: manifest.metadata,
        directed: manifest.directed,
    })
}

fn check_file_label(label: &str) -> Result<()> {
    if label.contains(['/', '\\']) || label == "." || label == ".." || label.is_empty() {
        return Err(Error::arg(format!("layer label `{label}` cannot be used as a file name")));
    }
    Ok(())
}

fn save_layer_matrices(ds: &CssDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [n, _, l] = ds.tensor.dims();
    for k in 0..l {
        check_file_label(&ds.layer_labels[k])?;
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| ds.tensor.get(i, j, k).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        write(&dir.join(format!("{}.csv", ds.layer_labels[k])), &out)?;
    }
    write(&dir.join(MANIFEST_FILE), &(serde_json::to_string_pretty(&DatasetManifest::of(ds))? + "\n"))
}

fn load_dense_json(path: &Path) -> Result<CssDataset> {
    let text = read(path)?;
    let parse_err = |e: serde_json::Error| Error::parse(path, e.line(), e.to_string());
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    if value.get("tensor").is_some() {
        serde_json::from_value(value).map_err(|e| Error::parse(path, 1, e.to_string()))
    } else {
        let tensor: Tensor3 = serde_json::from_value(value).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        CssDataset::unlabeled(tensor)
    }
}

/// Matrix as CSV with a label column; `col_prefix` names the columns.
pub fn matrix_csv(m: &Array2<f64>, row_header: &str, row_labels: &[String], col_prefix: &str) -> String {
    let mut out = String::from(row_header);
    for c in 0..m.ncols() {
        let _ = write!(out, ",{col_prefix}{c}");
    }
    out.push('\n');
    for (r, row) in m.rows().into_iter().enumerate() {
        out.push_str(row_labels.get(r).map_or("", String::as_str));
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// Edge list `sender\treceiver` of the nonzero entries of a 0/1 matrix.
pub fn edge_list_tsv(m: &Array2<u8>, labels: &[String]) -> String {
    let mut out = String::from("sender\treceiver\n");
    for ((i, j), &x) in m.indexed_iter() {
        if x != 0 {
            let _ = writeln!(out, "{}\t{}", labels[i], labels[j]);
        }
    }
    out
}

fn core_csv(g: &Tensor3) -> String {
    let [k1, k2, c] = g.dims();
    let mut out = String::from("slice,row,col,value\n");
    for s in 0..c {
        for a in 0..k1 {
            for b in 0..k2 {
                let _ = writeln!(out, "{s},{a},{b},{}", g.get(a, b, s));
            }
        }
    }
    out
}

fn slice(g: &Tensor3, s: usize) -> Array2<f64> {
    let [k1, k2, _] = g.dims();
    Array2::from_shape_fn((k1, k2), |(a, b)| g.get(a, b, s))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_header(out: &mut String, width: usize, height: usize) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<!-- generator: {GENERATOR_VERSION} -->");
}

/// Heatmap with one `<rect class="cell">` per entry. Nonnegative values
/// shade white to blue; negative values shade white to red.
pub fn heatmap_svg(title: &str, m: &Array2<f64>, row_labels: &[String], col_labels: &[String]) -> String {
    const CELL: usize = 22;
    const LEFT: usize = 110;
    const TOP: usize = 50;
    let (rows, cols) = m.dim();
    let width = LEFT + cols * CELL + 20;
    let height = TOP + rows * CELL + 20;
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut out = String::new();
    svg_header(&mut out, width, height);
    let _ = writeln!(out, "<text x=\"{LEFT}\" y=\"16\" font-size=\"13\">{}</text>", escape(title));
    for (c, label) in col_labels.iter().enumerate().take(cols) {
        let x = LEFT + c * CELL + CELL / 2;
        let _ = writeln!(out, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>", TOP - 6, escape(label));
    }
    for r in 0..rows {
        let y = TOP + r * CELL;
        if let Some(label) = row_labels.get(r) {
            let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", LEFT - 6, y + CELL / 2 + 4, escape(label));
        }
        for c in 0..cols {
            let v = m[[r, c]];
            let t = if scale > 0.0 { (v.abs() / scale).min(1.0) } else { 0.0 };
            let fade = (255.0 * (1.0 - t)).round() as u8;
            let fill = if v < 0.0 {
                format!("#ff{fade:02x}{fade:02x}")
            } else {
                format!("#{fade:02x}{fade:02x}ff")
            };
            let _ = writeln!(
                out,
                "<rect class=\"cell\" x=\"{}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#dddddd\"><title>{}</title></rect>",
                LEFT + c * CELL,
                v
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Mean test AUC against `K`, one polyline per `(regime, C)` series.
pub fn sweep_svg(sweep: &SweepResult) -> String {
    const W: f64 = 520.0;
    const H: f64 = 320.0;
    const PAD: f64 = 50.0;
    let mut series: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
    for cell in &sweep.grid {
        if let Some(m) = cell.mean_auc {
            let c_label = match cell.regime {
                RegimeKind::Dependent => format!("C={}", cell.c),
                _ => String::new(),
            };
            series.entry((cell.regime.to_string(), c_label)).or_default().push((cell.k, m));
        }
    }
    let k_max = sweep.grid.iter().map(|c| c.k).max().unwrap_or(1).max(2);
    let (lo, hi) = sweep
        .grid
        .iter()
        .filter_map(|c| c.mean_auc)
        .fold((1.0f64, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (0.0, 1.0) };
    let x = |k: usize| PAD + (k as f64 - 1.0) / (k_max as f64 - 1.0) * (W - 2.0 * PAD);
    let y = |m: f64| H - PAD - (m - lo) / (hi - lo) * (H - 2.0 * PAD);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
    let mut out = String::new();
    svg_header(&mut out, W as usize, H as usize);
    let _ = writeln!(out, "<text x=\"{PAD}\" y=\"20\" font-size=\"13\">mean test AUC by K</text>");
    let _ = writeln!(
        out,
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>",
        b = H - PAD,
        r = W - PAD
    );
    for k in 1..=k_max {
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{k}</text>", x(k), H - PAD + 16.0);
    }
    for m in [lo, hi] {
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{m:.3}</text>", PAD - 6.0, y(m) + 4.0);
    }
    for (idx, ((regime, c_label), points)) in series.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let coords: Vec<String> = points.iter().map(|&(k, m)| format!("{:.2},{:.2}", x(k), y(m))).collect();
        let _ = writeln!(
            out,
            "<polyline class=\"series\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            coords.join(" ")
        );
        let name = if c_label.is_empty() { regime.clone() } else { format!("{regime} {c_label}") };
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            W - PAD + 4.0 - 100.0,
            PAD + 14.0 * idx as f64,
            escape(&name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Everything [`save_report`] can write. Absent parts produce no files.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReportBundle<'a> {
    pub node_labels: Option<&'a [String]>,
    pub layer_labels: Option<&'a [String]>,
    pub fit: Option<&'a FitResult>,
    pub relative: Option<&'a RelativeSpace>,
    pub test: Option<&'a TestResult>,
    pub sweep: Option<&'a SweepResult>,
}

/// Writes the bundle into `out_dir` and returns the written paths, sorted.
pub fn save_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    let labels = |given: Option<&[String]>, n: usize| given.map_or_else(|| index_labels(n), <[String]>::to_vec);
    if let Some(fit) = bundle.fit {
        let m = &fit.model;
        let nodes = labels(bundle.node_labels, m.n());
        let layers = labels(bundle.layer_labels, m.l());
        let k_labels: Vec<String> = (0..m.k()).map(|k| format!("k{k}")).collect();
        let c_labels: Vec<String> = (0..m.c()).map(|c| format!("c{c}")).collect();
        let doc = ModelDocument::new(m, fit.spec, Some(fit.seed_used), Some(fit.final_kl));
        files.push(("model.json".into(), doc.to_json()? + "\n"));
        files.push(("fit.json".into(), serde_json::to_string_pretty(fit)? + "\n"));
        files.push(("U.csv".into(), matrix_csv(m.u(), "node", &nodes, "k")));
        files.push(("V.csv".into(), matrix_csv(m.v(), "node", &nodes, "k")));
        files.push(("Y.csv".into(), matrix_csv(m.y(), "layer", &layers, "c")));
        files.push(("core.csv".into(), core_csv(m.core())));
        files.push(("U.svg".into(), heatmap_svg("U (sender memberships)", m.u(), &nodes, &k_labels)));
        files.push(("V.svg".into(), heatmap_svg("V (receiver memberships)", m.v(), &nodes, &k_labels)));
        files.push(("Y.svg".into(), heatmap_svg("Y (layer memberships)", m.y(), &layers, &c_labels)));
        for s in 0..m.c() {
            let title = format!("core slice {s}");
            files.push((format!("core_{s}.svg"), heatmap_svg(&title, &slice(m.core(), s), &k_labels, &k_labels)));
        }
    }
    if let Some(rel) = bundle.relative {
        let (l, c) = rel.y_star.dim();
        let layers = labels(bundle.layer_labels, l);
        let [k, _, _] = rel.g_star.dims();
        let k_labels: Vec<String> = (0..k).map(|k| format!("k{k}")).collect();
        let c_labels: Vec<String> = rel.basis_layers.iter().map(|&b| layers[b].clone()).collect();
        files.push(("relative.json".into(), serde_json::to_string_pretty(rel)? + "\n"));
        files.push(("Y_star.csv".into(), matrix_csv(&rel.y_star, "layer", &layers, "basis")));
        files.push(("Y_star.svg".into(), heatmap_svg("Y* (relative to basis layers)", &rel.y_star, &layers, &c_labels)));
        for s in 0..c {
            let title = format!("relative core slice {s} (basis {})", c_labels[s]);
            files.push((format!("core_star_{s}.svg"), heatmap_svg(&title, &slice(&rel.g_star, s), &k_labels, &k_labels)));
        }
    }
    if let Some(test) = bundle.test {
        files.push(("test.json".into(), serde_json::to_string_pretty(test)? + "\n"));
        files.push(("test.txt".into(), test.summary_line() + "\n"));
    }
    if let Some(sweep) = bundle.sweep {
        files.push(("sweep.json".into(), serde_json::to_string_pretty(sweep)? + "\n"));
        files.push(("sweep.csv".into(), sweep.to_csv()));
        files.push(("sweep.svg".into(), sweep_svg(sweep)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out_dir.join(name);
        write(&path, &contents)?;
        written.push(path);
    }
    written.sort();
    Ok(written)
}

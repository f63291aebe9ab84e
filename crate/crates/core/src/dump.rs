//! On-disk dumps of per-layer activations and conductances, and CSV export.
//!
//! A dump directory holds `manifest.json` plus one raw file per layer of
//! 32-bit little-endian floats in row-major `[N, d]` order, and a labels file
//! of 32-bit little-endian unsigned integers. An activation entry with index 0
//! is the network input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceRecord;
use crate::error::{Error, Result};
use crate::estimators::LabelSet;
use crate::ite::ITERow;
use crate::network::LayerTrace;
use crate::plane::PlaneRow;
use crate::tensor::Tensor;

pub const DUMP_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.u32";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Activation,
    Conductance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub index: usize,
    /// `[N, d_l]`
    pub dims: Vec<usize>,
    pub kind: LayerKind,
    /// Relative to the dump directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub version: u32,
    pub model_name: String,
    pub num_samples: usize,
    pub class_count: u32,
    pub layers: Vec<ManifestLayer>,
    pub labels_file: String,
}

impl DumpManifest {
    /// Structural checks that do not touch the referenced files.
    pub fn validate(&self) -> Result<()> {
        if self.version != DUMP_VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        if self.num_samples == 0 {
            return Err(Error::invalid("manifest declares zero samples"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("manifest lists no layers"));
        }
        check_relative(&self.labels_file)?;
        for kind in [LayerKind::Activation, LayerKind::Conductance] {
            let indices: Vec<usize> = self
                .layers
                .iter()
                .filter(|l| l.kind == kind)
                .map(|l| l.index)
                .collect();
            if indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "{kind:?} layer indices must be strictly increasing, got {indices:?}"
                )));
            }
        }
        for l in &self.layers {
            check_relative(&l.file)?;
            if l.kind == LayerKind::Conductance && l.index == 0 {
                return Err(Error::invalid("conductance layers start at index 1"));
            }
            if l.dims.len() != 2 || l.dims[0] != self.num_samples || l.dims[1] == 0 {
                return Err(Error::invalid(format!(
                    "layer `{}` dims {:?} do not match [{}, d]",
                    l.name, l.dims, self.num_samples
                )));
            }
            if l.name.contains([',', '"', '\n', '\r']) {
                return Err(Error::invalid(format!(
                    "layer name `{}` contains CSV metacharacters",
                    l.name
                )));
            }
        }
        Ok(())
    }
}

fn check_relative(file: &str) -> Result<()> {
    let p = Path::new(file);
    let ok = !file.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dump file `{file}` must be a plain relative path"
        )))
    }
}

/// Contents of a dump directory, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub manifest: DumpManifest,
    pub input: Option<Tensor>,
    pub activations: Vec<LayerTrace>,
    pub conductances: Vec<LayerTrace>,
    pub labels: LabelSet,
}

impl From<&ConductanceRecord> for LayerTrace {
    fn from(r: &ConductanceRecord) -> Self {
        LayerTrace {
            layer_index: r.layer_index,
            layer_name: r.layer_name.clone(),
            activations: r.values.clone(),
        }
    }
}

/// What to write; `activations` and `conductances` are each in layer order.
#[derive(Debug, Clone, Copy)]
pub struct DumpContents<'a> {
    pub model_name: &'a str,
    pub input: Option<&'a Tensor>,
    pub activations: &'a [LayerTrace],
    pub conductances: &'a [LayerTrace],
    pub labels: &'a LabelSet,
}

fn encode_f32(t: &Tensor) -> Vec<u8> {
    t.data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the data files, then the manifest, overwriting any previous dump.
pub fn write_dump(dir: &Path, contents: &DumpContents<'_>) -> Result<DumpManifest> {
    if contents.input.is_none()
        && contents.activations.is_empty()
        && contents.conductances.is_empty()
    {
        return Err(Error::invalid(
            "nothing to dump: no input, activation or conductance layers",
        ));
    }
    let n = contents.labels.len();
    let mut entries: Vec<(ManifestLayer, &Tensor)> = Vec::new();
    if let Some(x) = contents.input {
        entries.push((
            ManifestLayer {
                name: "input".into(),
                index: 0,
                dims: vec![x.rows(), x.cols()],
                kind: LayerKind::Activation,
                file: "input.f32".into(),
            },
            x,
        ));
    }
    for (kind, traces) in [
        (LayerKind::Activation, contents.activations),
        (LayerKind::Conductance, contents.conductances),
    ] {
        for t in traces {
            let prefix = match kind {
                LayerKind::Activation => "activation",
                LayerKind::Conductance => "conductance",
            };
            entries.push((
                ManifestLayer {
                    name: t.layer_name.clone(),
                    index: t.layer_index,
                    dims: vec![t.activations.rows(), t.activations.cols()],
                    kind,
                    file: format!("{prefix}_{:03}.f32", t.layer_index),
                },
                &t.activations,
            ));
        }
    }
    for (layer, t) in &entries {
        if t.rows() != n {
            return Err(Error::invalid(format!(
                "layer `{}` has {} samples but there are {n} labels",
                layer.name,
                t.rows()
            )));
        }
    }
    let manifest = DumpManifest {
        version: DUMP_VERSION,
        model_name: contents.model_name.to_string(),
        num_samples: n,
        class_count: contents.labels.class_count(),
        layers: entries.iter().map(|(l, _)| l.clone()).collect(),
        labels_file: LABELS_FILE.into(),
    };
    manifest.validate()?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (layer, t) in &entries {
        write_file(&dir.join(&layer.file), &encode_f32(t))?;
    }
    let labels: Vec<u8> = contents
        .labels
        .labels()
        .iter()
        .flat_map(|l| l.to_le_bytes())
        .collect();
    write_file(&dir.join(LABELS_FILE), &labels)?;
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

fn read_exact_len(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    Ok(bytes)
}

pub fn read_manifest(dir: &Path) -> Result<DumpManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DumpManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Loads and validates a dump written by [`write_dump`] or by an external exporter.
pub fn read_dump(dir: &Path) -> Result<Dump> {
    let manifest = read_manifest(dir)?;
    let n = manifest.num_samples;
    let mut input = None;
    let mut activations = Vec::new();
    let mut conductances = Vec::new();
    for layer in &manifest.layers {
        let d = layer.dims[1];
        let path = dir.join(&layer.file);
        let bytes = read_exact_len(&path, 4 * n * d)?;
        let data: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let tensor = Tensor::matrix(n, d, data).map_err(|e| Error::Corrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        match (layer.kind, layer.index) {
            (LayerKind::Activation, 0) => input = Some(tensor),
            (kind, index) => {
                let trace = LayerTrace {
                    layer_index: index,
                    layer_name: layer.name.clone(),
                    activations: tensor,
                };
                match kind {
                    LayerKind::Activation => activations.push(trace),
                    LayerKind::Conductance => conductances.push(trace),
                }
            }
        }
    }
    let labels_path = dir.join(&manifest.labels_file);
    let bytes = read_exact_len(&labels_path, 4 * n)?;
    let raw: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let labels = LabelSet::new(raw, manifest.class_count).map_err(|e| Error::Corrupt {
        path: labels_path,
        reason: e.to_string(),
    })?;
    Ok(Dump {
        manifest,
        input,
        activations,
        conductances,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl std::str::FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            other => Err(Error::invalid(format!(
                "unknown units `{other}` (expected nats|bits)"
            ))),
        }
    }
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

pub const PLANE_HEADER: &str = "layer_index,layer_name,basis,i_x,i_y,std_i_x,std_i_y";
pub const ITE_HEADER: &str = "layer_index,entropy,compression,preservation,usefulness,efficiency";

fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn plane_csv(rows: &[PlaneRow], units: Units) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("no plane rows to export"));
    }
    let mut out = String::from(PLANE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.layer_index,
            r.layer_name,
            r.basis,
            fixed6(units.convert(r.i_x)),
            fixed6(units.convert(r.i_y)),
            fixed6(units.convert(r.std_i_x)),
            fixed6(units.convert(r.std_i_y)),
        );
    }
    Ok(out)
}

/// Only the entropy column carries units; the components are ratios.
pub fn ite_csv(rows: &[ITERow], units: Units) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("no ITE rows to export"));
    }
    let mut out = String::from(ITE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.layer_index,
            fixed6(units.convert(r.entropy_nats)),
            fixed6(r.compression),
            fixed6(r.preservation),
            fixed6(r.usefulness),
            fixed6(r.efficiency),
        );
    }
    Ok(out)
}

pub fn export_plane_csv(rows: &[PlaneRow], path: &Path, units: Units) -> Result<()> {
    write_file(path, plane_csv(rows, units)?.as_bytes())
}

pub fn export_ite_csv(rows: &[ITERow], path: &Path, units: Units) -> Result<()> {
    write_file(path, ite_csv(rows, units)?.as_bytes())
}

//! The `model.json` + `model.bin` weight format.
//!
//! The manifest lists every tensor with its shape, byte offset into the
//! blob, and dtype tag; the blob is the concatenation of little-endian
//! 32-bit reals, tensors in manifest order, row-major in
//! `[out][in][kx][ky][kz]` index order. The manifest also carries a
//! fingerprint of the architecture so weights cannot be loaded into a
//! mismatched network.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mindgrab_core::net::{
    Activation, BnStats, ConvLayerSpec, LayerWeights, NetworkSpec, Norm, WeightStore,
    NORM_EPSILON,
};

#[derive(Debug)]
pub enum WeightsError {
    Io(std::io::Error),
    Json(serde_json::Error),
    ShapeMismatch { layer: usize, detail: String },
    OffsetOverlap { tensor: String },
    TruncatedBlob { expected: usize, got: usize },
    UnknownDtype(String),
    UnknownEnum(String),
    FingerprintMismatch { manifest: String, computed: String },
    Spec(mindgrab_core::Error),
}

impl fmt::Display for WeightsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsError::Io(e) => write!(f, "{e}"),
            WeightsError::Json(e) => write!(f, "manifest: {e}"),
            WeightsError::ShapeMismatch { layer, detail } => {
                write!(f, "layer {layer}: {detail}")
            }
            WeightsError::OffsetOverlap { tensor } => {
                write!(f, "tensor {tensor} overlaps another tensor in the blob")
            }
            WeightsError::TruncatedBlob { expected, got } => {
                write!(f, "blob truncated: need {expected} bytes, have {got}")
            }
            WeightsError::UnknownDtype(d) => write!(f, "unknown dtype tag {d:?}"),
            WeightsError::UnknownEnum(e) => write!(f, "unknown enum value {e:?}"),
            WeightsError::FingerprintMismatch { manifest, computed } => write!(
                f,
                "fingerprint mismatch: manifest says {manifest}, architecture hashes to {computed}"
            ),
            WeightsError::Spec(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for WeightsError {}

impl From<std::io::Error> for WeightsError {
    fn from(e: std::io::Error) -> Self {
        WeightsError::Io(e)
    }
}

impl From<serde_json::Error> for WeightsError {
    fn from(e: serde_json::Error) -> Self {
        WeightsError::Json(e)
    }
}

type Result<T> = std::result::Result<T, WeightsError>;

pub const MANIFEST_FORMAT: &str = "mindgrab-weights-v1";
const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    /// One of `weight`, `bias`, `bn_mean`, `bn_var`, `bn_scale`, `bn_shift`.
    pub role: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub bias: bool,
    /// `none`, `paramfree_layernorm`, or `batchnorm_stats`.
    pub norm: String,
    /// `none` or `relu`.
    pub activation: String,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// `sha256:<hex>` over the canonical architecture description.
    pub fingerprint: String,
    /// Epsilon used inside both normalization variants.
    pub epsilon: f64,
    /// Blob file name, relative to the manifest.
    pub blob_file: String,
    pub blob_bytes: usize,
    pub layers: Vec<LayerEntry>,
}

fn norm_tag(norm: Norm) -> &'static str {
    match norm {
        Norm::None => "none",
        Norm::ParamFreeLayerNorm => "paramfree_layernorm",
        Norm::BatchNormStats => "batchnorm_stats",
    }
}

fn norm_from_tag(tag: &str) -> Result<Norm> {
    Ok(match tag {
        "none" => Norm::None,
        "paramfree_layernorm" => Norm::ParamFreeLayerNorm,
        "batchnorm_stats" => Norm::BatchNormStats,
        other => return Err(WeightsError::UnknownEnum(other.to_string())),
    })
}

fn activation_tag(act: Activation) -> &'static str {
    match act {
        Activation::None => "none",
        Activation::Relu => "relu",
    }
}

fn activation_from_tag(tag: &str) -> Result<Activation> {
    Ok(match tag {
        "none" => Activation::None,
        "relu" => Activation::Relu,
        other => return Err(WeightsError::UnknownEnum(other.to_string())),
    })
}

/// Canonical architecture hash, `sha256:<hex>`.
pub fn fingerprint(spec: &NetworkSpec) -> String {
    let mut hasher = Sha256::new();
    for l in &spec.layers {
        let line = format!(
            "conv k{} d{} {}->{} bias{} norm={} act={};",
            l.kernel_size,
            l.dilation,
            l.in_channels,
            l.out_channels,
            u8::from(l.has_bias),
            norm_tag(l.norm),
            activation_tag(l.activation),
        );
        hasher.update(line.as_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(2 + 7 + digest.len() * 2);
    hex.push_str("sha256:");
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn push_tensor(blob: &mut Vec<u8>, entries: &mut Vec<TensorEntry>, role: &str, shape: Vec<usize>, data: &[f32]) {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let offset = blob.len();
    for v in data {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    entries.push(TensorEntry {
        role: role.to_string(),
        shape,
        offset,
        dtype: DTYPE_F32LE.to_string(),
    });
}

/// Serialize a weight store. The blob is laid out in layer order; each
/// layer contributes `weight`, then `bias`, then batchnorm statistics.
pub fn save_weights(spec: &NetworkSpec, store: &WeightStore) -> Result<(Manifest, Vec<u8>)> {
    store.validate_against(spec).map_err(WeightsError::Spec)?;
    let mut blob = Vec::new();
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, (l, lw)) in spec.layers.iter().zip(&store.layers).enumerate() {
        let mut tensors = Vec::new();
        let k = l.kernel_size;
        push_tensor(
            &mut blob,
            &mut tensors,
            "weight",
            vec![l.out_channels, l.in_channels, k, k, k],
            &lw.weight,
        );
        if let Some(bias) = &lw.bias {
            push_tensor(&mut blob, &mut tensors, "bias", vec![l.out_channels], bias);
        }
        if let Some(bn) = &lw.bn_stats {
            for (role, data) in [
                ("bn_mean", &bn.mean),
                ("bn_var", &bn.var),
                ("bn_scale", &bn.scale),
                ("bn_shift", &bn.shift),
            ] {
                push_tensor(&mut blob, &mut tensors, role, vec![l.out_channels], data);
            }
        }
        layers.push(LayerEntry {
            name: format!("conv{i:02}"),
            in_channels: l.in_channels,
            out_channels: l.out_channels,
            kernel_size: l.kernel_size,
            dilation: l.dilation,
            bias: l.has_bias,
            norm: norm_tag(l.norm).to_string(),
            activation: activation_tag(l.activation).to_string(),
            tensors,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        fingerprint: fingerprint(spec),
        epsilon: NORM_EPSILON,
        blob_file: "model.bin".to_string(),
        blob_bytes: blob.len(),
        layers,
    };
    Ok((manifest, blob))
}

fn spec_from_manifest(manifest: &Manifest) -> Result<NetworkSpec> {
    let layers = manifest
        .layers
        .iter()
        .map(|l| {
            Ok(ConvLayerSpec {
                in_channels: l.in_channels,
                out_channels: l.out_channels,
                kernel_size: l.kernel_size,
                dilation: l.dilation,
                has_bias: l.bias,
                norm: norm_from_tag(&l.norm)?,
                activation: activation_from_tag(&l.activation)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkSpec::new(layers).map_err(WeightsError::Spec)
}

fn read_tensor(blob: &[u8], entry: &TensorEntry, expect: &[usize], layer: usize) -> Result<Vec<f32>> {
    if entry.dtype != DTYPE_F32LE {
        return Err(WeightsError::UnknownDtype(entry.dtype.clone()));
    }
    if entry.shape != expect {
        return Err(WeightsError::ShapeMismatch {
            layer,
            detail: format!(
                "tensor {} has shape {:?}, expected {:?}",
                entry.role, entry.shape, expect
            ),
        });
    }
    let count: usize = entry.shape.iter().product();
    let end = entry.offset + count * 4;
    if end > blob.len() {
        return Err(WeightsError::TruncatedBlob {
            expected: end,
            got: blob.len(),
        });
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let at = entry.offset + 4 * i;
        out.push(f32::from_le_bytes(blob[at..at + 4].try_into().unwrap()));
    }
    Ok(out)
}

/// Deserialize and validate a weight store against its own manifest.
///
/// Every tensor shape is checked against the architecture, tensor spans
/// must not overlap, and the manifest fingerprint must equal the hash of
/// the architecture it describes.
pub fn load_weights(manifest: &Manifest, blob: &[u8]) -> Result<(NetworkSpec, WeightStore)> {
    let spec = spec_from_manifest(manifest)?;
    let computed = fingerprint(&spec);
    if manifest.fingerprint != computed {
        return Err(WeightsError::FingerprintMismatch {
            manifest: manifest.fingerprint.clone(),
            computed,
        });
    }

    // overlap check across all tensor spans
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    for l in &manifest.layers {
        for t in &l.tensors {
            let count: usize = t.shape.iter().product();
            spans.push((t.offset, t.offset + count * 4, format!("{}/{}", l.name, t.role)));
        }
    }
    spans.sort_by_key(|s| s.0);
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(WeightsError::OffsetOverlap {
                tensor: pair[1].2.clone(),
            });
        }
    }

    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, (entry, l)) in manifest.layers.iter().zip(&spec.layers).enumerate() {
        let find = |role: &str| entry.tensors.iter().find(|t| t.role == role);
        let k = l.kernel_size;
        let weight_entry = find("weight").ok_or_else(|| WeightsError::ShapeMismatch {
            layer: i,
            detail: "missing weight tensor".to_string(),
        })?;
        let weight = read_tensor(
            blob,
            weight_entry,
            &[l.out_channels, l.in_channels, k, k, k],
            i,
        )?;
        let bias = if l.has_bias {
            let e = find("bias").ok_or_else(|| WeightsError::ShapeMismatch {
                layer: i,
                detail: "missing bias tensor".to_string(),
            })?;
            Some(read_tensor(blob, e, &[l.out_channels], i)?)
        } else {
            None
        };
        let bn_stats = if l.norm == Norm::BatchNormStats {
            let grab = |role: &str| -> Result<Vec<f32>> {
                let e = find(role).ok_or_else(|| WeightsError::ShapeMismatch {
                    layer: i,
                    detail: format!("missing {role} tensor"),
                })?;
                read_tensor(blob, e, &[l.out_channels], i)
            };
            Some(BnStats {
                mean: grab("bn_mean")?,
                var: grab("bn_var")?,
                scale: grab("bn_scale")?,
                shift: grab("bn_shift")?,
            })
        } else {
            None
        };
        layers.push(LayerWeights {
            weight,
            bias,
            bn_stats,
        });
    }
    let store = WeightStore { layers };
    store.validate_against(&spec).map_err(WeightsError::Spec)?;
    Ok((spec, store))
}

/// Write `model.json` and its sibling blob next to it.
pub fn save_weight_files(spec: &NetworkSpec, store: &WeightStore, manifest_path: &Path) -> Result<PathBuf> {
    let (mut manifest, blob) = save_weights(spec, store)?;
    let blob_path = manifest_path.with_extension("bin");
    manifest.blob_file = blob_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model.bin".to_string());
    std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    std::fs::write(&blob_path, blob)?;
    Ok(blob_path)
}

/// Read `model.json` plus the blob it names.
pub fn load_weight_files(manifest_path: &Path) -> Result<(Manifest, NetworkSpec, WeightStore)> {
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob_file);
    let blob = std::fs::read(blob_path)?;
    let (spec, store) = load_weights(&manifest, &blob)?;
    Ok((manifest, spec, store))
}

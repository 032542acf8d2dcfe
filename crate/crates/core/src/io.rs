//! File formats: raw tensors with JSON manifests, 8-bit RGBA PNG, JSON
//! helpers, and content hashing.
//!
//! Raw tensors are little-endian, row-major, with a sidecar manifest at
//! `<path>.json` describing shape, dtype, and layout. All writers are
//! deterministic: identical inputs produce identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::img::Image;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: tensor payload holds {got} elements but shape {shape:?} needs {want}")]
    TensorShape { path: PathBuf, got: usize, want: usize, shape: Vec<usize> },
    #[error("{path}: manifest declares dtype {got:?}, expected {want:?}")]
    TensorDtype { path: PathBuf, got: String, want: String },
    #[error("png encode failed: {0}")]
    Encode(image::ImageError),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

/// Sidecar description of a raw tensor file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub order: String,
}

/// Manifest path for a tensor file: `<path>.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

fn write_tensor_bytes(
    path: &Path,
    shape: &[usize],
    dtype: &str,
    bytes: &[u8],
    elems: usize,
) -> Result<(), IoError> {
    let want: usize = shape.iter().product();
    if elems != want {
        return Err(IoError::TensorShape {
            path: path.to_path_buf(),
            got: elems,
            want,
            shape: shape.to_vec(),
        });
    }
    let mut f = BufWriter::new(File::create(path).map_err(file_err(path))?);
    f.write_all(bytes).map_err(file_err(path))?;
    f.flush().map_err(file_err(path))?;
    let manifest = TensorManifest {
        shape: shape.to_vec(),
        dtype: dtype.to_string(),
        order: "row-major".to_string(),
    };
    write_json_pretty(&manifest_path(path), &manifest)
}

fn read_tensor_bytes(path: &Path, dtype: &str, elem_size: usize) -> Result<(Vec<usize>, Vec<u8>), IoError> {
    let manifest: TensorManifest = read_json(&manifest_path(path))?;
    if manifest.dtype != dtype {
        return Err(IoError::TensorDtype {
            path: path.to_path_buf(),
            got: manifest.dtype,
            want: dtype.to_string(),
        });
    }
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(file_err(path))?)
        .read_to_end(&mut bytes)
        .map_err(file_err(path))?;
    let want: usize = manifest.shape.iter().product();
    if bytes.len() != want * elem_size {
        return Err(IoError::TensorShape {
            path: path.to_path_buf(),
            got: bytes.len() / elem_size,
            want,
            shape: manifest.shape.clone(),
        });
    }
    Ok((manifest.shape, bytes))
}

pub fn write_f32_tensor(path: &Path, shape: &[usize], data: &[f32]) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_tensor_bytes(path, shape, "f32", &bytes, data.len())
}

pub fn read_f32_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f32>), IoError> {
    let (shape, bytes) = read_tensor_bytes(path, "f32", 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect();
    Ok((shape, data))
}

pub fn write_f64_tensor(path: &Path, shape: &[usize], data: &[f64]) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_tensor_bytes(path, shape, "f64", &bytes, data.len())
}

pub fn read_f64_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>), IoError> {
    let (shape, bytes) = read_tensor_bytes(path, "f64", 8)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((shape, data))
}

pub fn write_i32_tensor(path: &Path, shape: &[usize], data: &[i32]) -> Result<(), IoError> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_tensor_bytes(path, shape, "i32", &bytes, data.len())
}

pub fn read_i32_tensor(path: &Path) -> Result<(Vec<usize>, Vec<i32>), IoError> {
    let (shape, bytes) = read_tensor_bytes(path, "i32", 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect();
    Ok((shape, data))
}

pub fn write_u8_tensor(path: &Path, shape: &[usize], data: &[u8]) -> Result<(), IoError> {
    write_tensor_bytes(path, shape, "u8", data, data.len())
}

pub fn read_u8_tensor(path: &Path) -> Result<(Vec<usize>, Vec<u8>), IoError> {
    read_tensor_bytes(path, "u8", 1)
}

fn to_rgba8(image: &Image) -> image::RgbaImage {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::RgbaImage::from_raw(w, h, bytes).expect("buffer sized from image")
}

/// Encodes the image as an 8-bit RGBA PNG in memory.
pub fn encode_png_bytes(image: &Image) -> Result<Vec<u8>, IoError> {
    let rgba = to_rgba8(image);
    let mut out = Cursor::new(Vec::new());
    rgba.write_to(&mut out, image::ImageFormat::Png).map_err(IoError::Encode)?;
    Ok(out.into_inner())
}

pub fn write_image_png(path: &Path, image: &Image) -> Result<(), IoError> {
    let bytes = encode_png_bytes(image)?;
    std::fs::write(path, bytes).map_err(file_err(path))
}

pub fn read_image_png(path: &Path) -> Result<Image, IoError> {
    let dynimg = image::open(path).map_err(|source| IoError::Png { path: path.to_path_buf(), source })?;
    let rgba = dynimg.to_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let data: Vec<f32> = rgba.into_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Ok(Image::from_raw(w, h, data).expect("decoder produced full buffer"))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut buf = serde_json::to_vec_pretty(value)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    buf.push(b'\n');
    std::fs::write(path, buf).map_err(file_err(path))
}

pub fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut buf = serde_json::to_vec(value)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    buf.push(b'\n');
    std::fs::write(path, buf).map_err(file_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let reader = BufReader::new(File::open(path).map_err(file_err(path))?);
    serde_json::from_reader(reader).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// Lowercase hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

/// Lowercase hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let mut reader = BufReader::new(File::open(path).map_err(file_err(path))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(file_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

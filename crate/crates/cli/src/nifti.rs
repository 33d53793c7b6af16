//! NIfTI-1 reading and writing.
//!
//! Reads single-file `.nii`/`.nii.gz` images in either byte order,
//! decoding all common datatypes to 32-bit reals with `scl_slope`/
//! `scl_inter` applied (slope 0 means "no scaling" per the standard) and
//! the affine chosen by sform > qform > pixdim-diagonal precedence.
//! Writing emits little-endian single-file images: the 348-byte header, a
//! zero 4-byte extension flag, and data at offset 352, with the affine
//! stored as sform (`sform_code = 1`). NIfTI-2 is detected and rejected.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;

use mindgrab_core::geom::{Affine, Grid};
use mindgrab_core::volume::{Mask, Volume};

const HEADER_SIZE: usize = 348;
/// Header + extension flag; where single-file data starts.
const DATA_OFFSET: usize = 352;

#[derive(Debug)]
pub enum NiftiError {
    /// Not a NIfTI-1 stream (wrong magic or unrecognizable header).
    BadMagic([u8; 4]),
    /// Recognized but unsupported container (NIfTI-2).
    UnsupportedFormat(&'static str),
    UnsupportedDatatype(i16),
    /// Buffer shorter than the header promises.
    Truncated { expected: usize, got: usize },
    NonFiniteVoxel { index: usize },
    /// Value not representable in the requested output datatype.
    UnrepresentableValue { index: usize, value: f32 },
    InvalidHeader(String),
    Io(std::io::Error),
}

impl fmt::Display for NiftiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NiftiError::BadMagic(m) => write!(f, "bad NIfTI magic {m:?}"),
            NiftiError::UnsupportedFormat(what) => write!(f, "unsupported format: {what}"),
            NiftiError::UnsupportedDatatype(code) => {
                write!(f, "unsupported NIfTI datatype code {code}")
            }
            NiftiError::Truncated { expected, got } => {
                write!(f, "truncated file: need {expected} bytes, have {got}")
            }
            NiftiError::NonFiniteVoxel { index } => {
                write!(f, "non-finite voxel value at index {index}")
            }
            NiftiError::UnrepresentableValue { index, value } => {
                write!(f, "voxel {index} = {value} not representable in output datatype")
            }
            NiftiError::InvalidHeader(msg) => write!(f, "invalid header: {msg}"),
            NiftiError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for NiftiError {}

impl From<std::io::Error> for NiftiError {
    fn from(e: std::io::Error) -> Self {
        NiftiError::Io(e)
    }
}

type Result<T> = std::result::Result<T, NiftiError>;

/// Datatype codes this reader decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8 = 2,
    I16 = 4,
    I32 = 8,
    F32 = 16,
    F64 = 64,
    I8 = 256,
    U16 = 512,
    U32 = 768,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            256 => DataType::I8,
            512 => DataType::U16,
            768 => DataType::U32,
            other => return Err(NiftiError::UnsupportedDatatype(other)),
        })
    }

    pub fn byte_size(self) -> usize {
        match self {
            DataType::U8 | DataType::I8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::U32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }
}

/// The NIfTI-1 header fields this toolkit consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    /// dim[0] is the rank (1..=7), dim[1..] the extents.
    pub dims: [u16; 8],
    pub datatype: DataType,
    pub pixdim: [f32; 8],
    pub vox_offset: u32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
    pub little_endian: bool,
}

macro_rules! read_scalar {
    ($fn_name:ident, $ty:ty) => {
        fn $fn_name(bytes: &[u8], at: usize, le: bool) -> $ty {
            let raw: [u8; core::mem::size_of::<$ty>()] =
                bytes[at..at + core::mem::size_of::<$ty>()].try_into().unwrap();
            if le {
                <$ty>::from_le_bytes(raw)
            } else {
                <$ty>::from_be_bytes(raw)
            }
        }
    };
}

read_scalar!(read_i16, i16);
read_scalar!(read_u16, u16);
read_scalar!(read_i32, i32);
read_scalar!(read_u32, u32);
read_scalar!(read_f32, f32);
read_scalar!(read_f64, f64);

impl NiftiHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(NiftiError::Truncated {
                expected: HEADER_SIZE,
                got: bytes.len(),
            });
        }
        // sizeof_hdr doubles as the version/endianness probe
        let sizeof_le = read_i32(bytes, 0, true);
        let sizeof_be = read_i32(bytes, 0, false);
        let little_endian = if sizeof_le == 348 {
            true
        } else if sizeof_be == 348 {
            false
        } else if sizeof_le == 540 || sizeof_be == 540 {
            return Err(NiftiError::UnsupportedFormat("NIfTI-2"));
        } else {
            return Err(NiftiError::BadMagic([
                bytes[344], bytes[345], bytes[346], bytes[347],
            ]));
        };

        let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
        if &magic != b"n+1\0" && &magic != b"ni1\0" {
            return Err(NiftiError::BadMagic(magic));
        }

        let mut dims = [0u16; 8];
        for (i, d) in dims.iter_mut().enumerate() {
            let raw = read_i16(bytes, 40 + 2 * i, little_endian);
            if raw < 0 {
                return Err(NiftiError::InvalidHeader(format!("dim[{i}] = {raw}")));
            }
            *d = raw as u16;
        }
        let rank = dims[0];
        if !(1..=7).contains(&rank) {
            return Err(NiftiError::InvalidHeader(format!("rank {rank} not in 1..=7")));
        }
        for i in 1..=rank as usize {
            if dims[i] == 0 {
                return Err(NiftiError::InvalidHeader(format!("extent dim[{i}] is 0")));
            }
        }

        let datatype = DataType::from_code(read_i16(bytes, 70, little_endian))?;
        let bitpix = read_i16(bytes, 72, little_endian);
        if bitpix as usize != datatype.byte_size() * 8 {
            return Err(NiftiError::InvalidHeader(format!(
                "bitpix {bitpix} does not match datatype"
            )));
        }

        let mut pixdim = [0.0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = read_f32(bytes, 76 + 4 * i, little_endian);
        }

        let vox_offset_raw = read_f32(bytes, 108, little_endian);
        if !vox_offset_raw.is_finite() || vox_offset_raw < 0.0 || vox_offset_raw.fract() != 0.0 {
            return Err(NiftiError::InvalidHeader(format!(
                "vox_offset {vox_offset_raw}"
            )));
        }
        let vox_offset = vox_offset_raw as u32;
        if &magic == b"n+1\0" && vox_offset < DATA_OFFSET as u32 {
            return Err(NiftiError::InvalidHeader(format!(
                "single-file vox_offset {vox_offset} < {DATA_OFFSET}"
            )));
        }

        let header = NiftiHeader {
            dims,
            datatype,
            pixdim,
            vox_offset,
            scl_slope: read_f32(bytes, 112, little_endian),
            scl_inter: read_f32(bytes, 116, little_endian),
            qform_code: read_i16(bytes, 252, little_endian),
            sform_code: read_i16(bytes, 254, little_endian),
            quatern: [
                read_f32(bytes, 256, little_endian),
                read_f32(bytes, 260, little_endian),
                read_f32(bytes, 264, little_endian),
            ],
            qoffset: [
                read_f32(bytes, 268, little_endian),
                read_f32(bytes, 272, little_endian),
                read_f32(bytes, 276, little_endian),
            ],
            srow: [
                [
                    read_f32(bytes, 280, little_endian),
                    read_f32(bytes, 284, little_endian),
                    read_f32(bytes, 288, little_endian),
                    read_f32(bytes, 292, little_endian),
                ],
                [
                    read_f32(bytes, 296, little_endian),
                    read_f32(bytes, 300, little_endian),
                    read_f32(bytes, 304, little_endian),
                    read_f32(bytes, 308, little_endian),
                ],
                [
                    read_f32(bytes, 312, little_endian),
                    read_f32(bytes, 316, little_endian),
                    read_f32(bytes, 320, little_endian),
                    read_f32(bytes, 324, little_endian),
                ],
            ],
            magic,
            little_endian,
        };
        Ok(header)
    }

    pub fn rank(&self) -> usize {
        self.dims[0] as usize
    }

    /// Product of all used extents.
    pub fn voxel_count(&self) -> usize {
        (1..=self.rank()).map(|i| self.dims[i] as usize).product()
    }

    /// Voxel-to-world affine: sform wins over qform, which wins over the
    /// pixdim diagonal.
    pub fn affine(&self) -> Affine {
        if self.sform_code > 0 {
            Affine::from_spatial_rows(
                self.srow[0].map(f64::from),
                self.srow[1].map(f64::from),
                self.srow[2].map(f64::from),
            )
        } else if self.qform_code > 0 {
            self.qform_affine()
        } else {
            Affine::scaling([
                f64::from(self.pixdim[1]),
                f64::from(self.pixdim[2]),
                f64::from(self.pixdim[3]),
            ])
        }
    }

    fn qform_affine(&self) -> Affine {
        let [b, c, d] = self.quatern.map(f64::from);
        let a = (1.0 - b * b - c * c - d * d).max(0.0).sqrt();
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let (i, j, k) = (
            f64::from(self.pixdim[1]).abs(),
            f64::from(self.pixdim[2]).abs(),
            f64::from(self.pixdim[3]).abs() * qfac,
        );
        Affine::from_spatial_rows(
            [
                (a * a + b * b - c * c - d * d) * i,
                2.0 * (b * c - a * d) * j,
                2.0 * (b * d + a * c) * k,
                f64::from(self.qoffset[0]),
            ],
            [
                2.0 * (b * c + a * d) * i,
                (a * a - b * b + c * c - d * d) * j,
                2.0 * (c * d - a * b) * k,
                f64::from(self.qoffset[1]),
            ],
            [
                2.0 * (b * d - a * c) * i,
                2.0 * (c * d + a * b) * j,
                (a * a - b * b - c * c + d * d) * k,
                f64::from(self.qoffset[2]),
            ],
        )
    }
}

/// A parsed image: header plus voxels decoded to 32-bit reals in x-fastest
/// order.
#[derive(Debug, Clone)]
pub struct RawImage {
    pub header: NiftiHeader,
    pub voxels: Vec<f32>,
}

impl RawImage {
    /// View as a 3D volume. Trailing dimensions must be 1.
    pub fn to_volume(&self) -> Result<Volume> {
        let rank = self.header.rank();
        for i in 4..=rank {
            if self.header.dims[i] != 1 {
                return Err(NiftiError::InvalidHeader(format!(
                    "volume is {rank}-D (dim[{i}] = {}); only 3-D images are supported",
                    self.header.dims[i]
                )));
            }
        }
        let shape = [
            self.header.dims[1] as usize,
            if rank >= 2 { self.header.dims[2] as usize } else { 1 },
            if rank >= 3 { self.header.dims[3] as usize } else { 1 },
        ];
        let affine = self.header.affine();
        let spacing = if self.header.sform_code > 0 || self.header.qform_code > 0 {
            affine.column_norms()
        } else {
            [
                f64::from(self.header.pixdim[1]),
                f64::from(self.header.pixdim[2]),
                f64::from(self.header.pixdim[3]),
            ]
        };
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(NiftiError::InvalidHeader(format!(
                "non-positive voxel spacing {spacing:?}"
            )));
        }
        Volume::new(Grid::new(shape, spacing, affine), self.voxels.clone())
            .map_err(|e| NiftiError::InvalidHeader(e.to_string()))
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

/// Parse a `.nii` or `.nii.gz` byte stream.
pub fn read_nifti_bytes(bytes: &[u8]) -> Result<RawImage> {
    if is_gzip(bytes) {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut inflated)?;
        return read_nifti_bytes(&inflated);
    }
    let header = NiftiHeader::parse(bytes)?;
    let n = header.voxel_count();
    let elem = header.datatype.byte_size();
    let start = header.vox_offset as usize;
    let expected = start + n * elem;
    if bytes.len() < expected {
        return Err(NiftiError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    let data = &bytes[start..expected];
    let le = header.little_endian;

    // slope 0 (or a non-finite slope) means "no scaling"
    let (slope, inter) = if header.scl_slope == 0.0 || !header.scl_slope.is_finite() {
        (1.0f32, 0.0f32)
    } else {
        (header.scl_slope, header.scl_inter)
    };

    let mut voxels = Vec::with_capacity(n);
    for i in 0..n {
        let at = i * elem;
        let raw: f32 = match header.datatype {
            DataType::U8 => data[at] as f32,
            DataType::I8 => data[at] as i8 as f32,
            DataType::I16 => read_i16(data, at, le) as f32,
            DataType::U16 => read_u16(data, at, le) as f32,
            DataType::I32 => read_i32(data, at, le) as f32,
            DataType::U32 => read_u32(data, at, le) as f32,
            DataType::F32 => read_f32(data, at, le),
            DataType::F64 => read_f64(data, at, le) as f32,
        };
        let v = slope * raw + inter;
        if !v.is_finite() {
            return Err(NiftiError::NonFiniteVoxel { index: i });
        }
        voxels.push(v);
    }
    Ok(RawImage { header, voxels })
}

/// Read a NIfTI-1 file; gzip is detected from content, not the extension.
pub fn read_nifti(path: &Path) -> Result<RawImage> {
    let bytes = std::fs::read(path)?;
    read_nifti_bytes(&bytes)
}

macro_rules! put {
    ($buf:expr, $at:expr, $value:expr) => {{
        let b = $value.to_le_bytes();
        $buf[$at..$at + b.len()].copy_from_slice(&b);
    }};
}

fn build_header(grid: &Grid, datatype: DataType) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_SIZE];
    put!(h, 0, 348i32);
    put!(h, 40, 3i16); // rank
    for (i, &e) in grid.shape.iter().enumerate() {
        put!(h, 42 + 2 * i, e as i16);
    }
    // unused dims stay 1
    for i in 4..=7 {
        put!(h, 40 + 2 * i, 1i16);
    }
    put!(h, 70, datatype as i16);
    put!(h, 72, (datatype.byte_size() * 8) as i16);
    put!(h, 76, 1.0f32); // qfac
    for (i, &s) in grid.spacing.iter().enumerate() {
        put!(h, 80 + 4 * i, s as f32);
    }
    put!(h, 108, DATA_OFFSET as f32); // vox_offset
    put!(h, 112, 1.0f32); // scl_slope
    put!(h, 116, 0.0f32); // scl_inter
    h[123] = 2; // spatial units: mm
    put!(h, 252, 0i16); // qform_code
    put!(h, 254, 1i16); // sform_code
    let rows = grid.affine.rows();
    for r in 0..3 {
        for c in 0..4 {
            put!(h, 280 + 16 * r + 4 * c, rows[r][c] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

fn assemble(header: Vec<u8>, data: &[u8]) -> Vec<u8> {
    let mut out = header;
    out.extend_from_slice(&[0u8; 4]); // no extensions
    debug_assert_eq!(out.len(), DATA_OFFSET);
    out.extend_from_slice(data);
    out
}

/// Serialized single-file image of a 32-bit real volume (uncompressed).
pub fn volume_to_bytes(volume: &Volume) -> Vec<u8> {
    let mut data = Vec::with_capacity(volume.data.len() * 4);
    for v in &volume.data {
        data.extend_from_slice(&v.to_le_bytes());
    }
    assemble(build_header(&volume.grid, DataType::F32), &data)
}

/// Serialized single-file image of a binary mask as u8.
pub fn mask_to_bytes(mask: &Mask) -> Result<Vec<u8>> {
    if let Some(index) = mask.data.iter().position(|&v| v > 1) {
        return Err(NiftiError::UnrepresentableValue {
            index,
            value: mask.data[index] as f32,
        });
    }
    Ok(assemble(build_header(&mask.grid, DataType::U8), &mask.data))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    let file = std::fs::File::create(path)?;
    if gz {
        let mut enc = GzEncoder::new(file, flate2::Compression::fast());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        let mut w = std::io::BufWriter::new(file);
        w.write_all(bytes)?;
        w.flush()?;
    }
    Ok(())
}

/// Write a volume as 32-bit reals; `.gz` paths are gzip-compressed.
pub fn write_nifti_volume(volume: &Volume, path: &Path) -> Result<()> {
    write_bytes(path, &volume_to_bytes(volume))
}

/// Write a mask as u8 voxels; `.gz` paths are gzip-compressed.
pub fn write_nifti_mask(mask: &Mask, path: &Path) -> Result<()> {
    write_bytes(path, &mask_to_bytes(mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled little-endian NIfTI-1 file, built byte by byte,
    /// independent of the writer under test.
    pub(crate) fn fixture_f32(
        shape: [usize; 3],
        voxels: &[f32],
        slope: f32,
        inter: f32,
    ) -> Vec<u8> {
        let mut h = vec![0u8; 352 + voxels.len() * 4];
        h[0..4].copy_from_slice(&348i32.to_le_bytes());
        h[40..42].copy_from_slice(&3i16.to_le_bytes());
        for (i, &e) in shape.iter().enumerate() {
            h[42 + 2 * i..44 + 2 * i].copy_from_slice(&(e as i16).to_le_bytes());
        }
        for i in 4..8 {
            h[40 + 2 * i..42 + 2 * i].copy_from_slice(&1i16.to_le_bytes());
        }
        h[70..72].copy_from_slice(&16i16.to_le_bytes()); // f32
        h[72..74].copy_from_slice(&32i16.to_le_bytes());
        for i in 0..4 {
            h[76 + 4 * i..80 + 4 * i].copy_from_slice(&1.0f32.to_le_bytes());
        }
        h[108..112].copy_from_slice(&352.0f32.to_le_bytes());
        h[112..116].copy_from_slice(&slope.to_le_bytes());
        h[116..120].copy_from_slice(&inter.to_le_bytes());
        h[344..348].copy_from_slice(b"n+1\0");
        for (i, v) in voxels.iter().enumerate() {
            h[352 + 4 * i..356 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        h
    }

    #[test]
    fn slope_and_intercept_are_applied() {
        // 2×2×2 f32 fixture with slope 2, inter 1: stored 3.0 decodes to 7.0
        let raw = fixture_f32([2, 2, 2], &[3.0; 8], 2.0, 1.0);
        let img = read_nifti_bytes(&raw).unwrap();
        assert!(img.voxels.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn zero_slope_means_no_scaling() {
        let raw = fixture_f32([2, 2, 2], &[3.0; 8], 0.0, 100.0);
        let img = read_nifti_bytes(&raw).unwrap();
        assert!(img.voxels.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn bad_magic_is_reported() {
        let mut raw = fixture_f32([1, 1, 1], &[0.0], 1.0, 0.0);
        raw[344..348].copy_from_slice(b"abcd");
        assert!(matches!(
            read_nifti_bytes(&raw).unwrap_err(),
            NiftiError::BadMagic(m) if &m == b"abcd"
        ));
    }

    #[test]
    fn nifti2_is_rejected_as_unsupported() {
        let mut raw = vec![0u8; 600];
        raw[0..4].copy_from_slice(&540i32.to_le_bytes());
        assert!(matches!(
            read_nifti_bytes(&raw).unwrap_err(),
            NiftiError::UnsupportedFormat("NIfTI-2")
        ));
    }

    #[test]
    fn truncated_data_is_reported() {
        let mut raw = fixture_f32([4, 4, 4], &[1.0; 64], 1.0, 0.0);
        raw.truncate(352 + 10);
        assert!(matches!(
            read_nifti_bytes(&raw).unwrap_err(),
            NiftiError::Truncated { .. }
        ));
    }

    #[test]
    fn nan_voxels_are_reported() {
        let mut vox = vec![1.0f32; 8];
        vox[5] = f32::NAN;
        let raw = fixture_f32([2, 2, 2], &vox, 1.0, 0.0);
        assert!(matches!(
            read_nifti_bytes(&raw).unwrap_err(),
            NiftiError::NonFiniteVoxel { index: 5 }
        ));
    }

    #[test]
    fn unsupported_datatype_is_reported() {
        let mut raw = fixture_f32([1, 1, 1], &[0.0], 1.0, 0.0);
        raw[70..72].copy_from_slice(&1024i16.to_le_bytes()); // i64
        raw[72..74].copy_from_slice(&64i16.to_le_bytes());
        assert!(matches!(
            read_nifti_bytes(&raw).unwrap_err(),
            NiftiError::UnsupportedDatatype(1024)
        ));
    }

    #[test]
    fn gzip_twin_decodes_identically() {
        let raw = fixture_f32([3, 2, 2], &(0..12).map(|i| i as f32).collect::<Vec<_>>(), 1.0, 0.0);
        let mut gz = GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(&raw).unwrap();
        let zipped = gz.finish().unwrap();
        let a = read_nifti_bytes(&raw).unwrap();
        let b = read_nifti_bytes(&zipped).unwrap();
        assert_eq!(a.voxels, b.voxels);
        assert_eq!(a.header, b.header);
    }

    #[test]
    fn sform_wins_over_qform() {
        let mut raw = fixture_f32([2, 2, 2], &[0.0; 8], 1.0, 0.0);
        // qform: identity-ish with offset 9
        raw[252..254].copy_from_slice(&1i16.to_le_bytes());
        raw[268..272].copy_from_slice(&9.0f32.to_le_bytes());
        // sform: scaling by 2 with offset 5
        raw[254..256].copy_from_slice(&1i16.to_le_bytes());
        for (r, row) in [[2.0f32, 0., 0., 5.], [0., 2., 0., 5.], [0., 0., 2., 5.]]
            .iter()
            .enumerate()
        {
            for (c, v) in row.iter().enumerate() {
                raw[280 + 16 * r + 4 * c..284 + 16 * r + 4 * c]
                    .copy_from_slice(&v.to_le_bytes());
            }
        }
        let img = read_nifti_bytes(&raw).unwrap();
        let aff = img.header.affine();
        assert_eq!(aff.rows()[0], [2.0, 0.0, 0.0, 5.0]);
        // drop sform: now qform decides
        let mut raw2 = raw.clone();
        raw2[254..256].copy_from_slice(&0i16.to_le_bytes());
        let img2 = read_nifti_bytes(&raw2).unwrap();
        assert_eq!(img2.header.affine().rows()[0][3], 9.0);
    }

    #[test]
    fn big_endian_files_decode() {
        let mut raw = vec![0u8; 352 + 4];
        raw[0..4].copy_from_slice(&348i32.to_be_bytes());
        raw[40..42].copy_from_slice(&3i16.to_be_bytes());
        for i in 1..8 {
            raw[40 + 2 * i..42 + 2 * i].copy_from_slice(&1i16.to_be_bytes());
        }
        raw[70..72].copy_from_slice(&16i16.to_be_bytes());
        raw[72..74].copy_from_slice(&32i16.to_be_bytes());
        for i in 0..4 {
            raw[76 + 4 * i..80 + 4 * i].copy_from_slice(&1.0f32.to_be_bytes());
        }
        raw[108..112].copy_from_slice(&352.0f32.to_be_bytes());
        raw[344..348].copy_from_slice(b"n+1\0");
        raw[352..356].copy_from_slice(&42.5f32.to_be_bytes());
        let img = read_nifti_bytes(&raw).unwrap();
        assert!(!img.header.little_endian);
        assert_eq!(img.voxels, vec![42.5]);
    }

    #[test]
    fn integer_datatypes_decode_with_scaling() {
        // i16 fixture: stored -7 with slope 0.5, inter 1 → -2.5
        let mut raw = vec![0u8; 352 + 2];
        raw[0..4].copy_from_slice(&348i32.to_le_bytes());
        raw[40..42].copy_from_slice(&3i16.to_le_bytes());
        for i in 1..8 {
            raw[40 + 2 * i..42 + 2 * i].copy_from_slice(&1i16.to_le_bytes());
        }
        raw[70..72].copy_from_slice(&4i16.to_le_bytes());
        raw[72..74].copy_from_slice(&16i16.to_le_bytes());
        for i in 0..4 {
            raw[76 + 4 * i..80 + 4 * i].copy_from_slice(&1.0f32.to_le_bytes());
        }
        raw[108..112].copy_from_slice(&352.0f32.to_le_bytes());
        raw[112..116].copy_from_slice(&0.5f32.to_le_bytes());
        raw[116..120].copy_from_slice(&1.0f32.to_le_bytes());
        raw[344..348].copy_from_slice(b"n+1\0");
        raw[352..354].copy_from_slice(&(-7i16).to_le_bytes());
        let img = read_nifti_bytes(&raw).unwrap();
        assert_eq!(img.voxels, vec![-2.5]);
    }

    #[test]
    fn written_file_has_exact_layout() {
        let grid = Grid::isotropic([4, 3, 2], 1.0);
        let v = Volume::new(grid, (0..24).map(|i| i as f32).collect()).unwrap();
        let bytes = volume_to_bytes(&v);
        assert_eq!(bytes.len(), 352 + 24 * 4);
        assert_eq!(&bytes[344..348], b"n+1\0");
        assert_eq!(&bytes[348..352], &[0, 0, 0, 0]);
    }

    #[test]
    fn mask_with_value_two_is_unrepresentable() {
        let grid = Grid::isotropic([2, 1, 1], 1.0);
        let mut m = Mask::zeros(grid);
        m.data[1] = 2; // bypass Mask::new validation deliberately
        assert!(matches!(
            mask_to_bytes(&m).unwrap_err(),
            NiftiError::UnrepresentableValue { index: 1, .. }
        ));
    }

    #[test]
    fn volume_roundtrip_is_bit_exact() {
        let grid = Grid::isotropic([5, 4, 3], 2.0);
        let v = Volume::new(grid, (0..60).map(|i| (i as f32).sin()).collect()).unwrap();
        let back = read_nifti_bytes(&volume_to_bytes(&v)).unwrap();
        assert_eq!(back.voxels, v.data);
        let vol = back.to_volume().unwrap();
        assert!(vol.grid.affine.max_abs_diff(&v.grid.affine) < 1e-5);
    }

    #[test]
    fn mask_roundtrip_is_exact() {
        let grid = Grid::isotropic([4, 4, 4], 1.0);
        let m = Mask::new(grid, (0..64).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let back = read_nifti_bytes(&mask_to_bytes(&m).unwrap()).unwrap();
        let as_u8: Vec<u8> = back.voxels.iter().map(|&v| v as u8).collect();
        assert_eq!(as_u8, m.data);
    }

    #[test]
    fn four_dimensional_image_is_rejected_as_volume() {
        let mut raw = fixture_f32([2, 2, 2], &[0.0; 16], 1.0, 0.0);
        raw[40..42].copy_from_slice(&4i16.to_le_bytes());
        raw[48..50].copy_from_slice(&2i16.to_le_bytes()); // dim[4] = 2
        let img = read_nifti_bytes(&raw).unwrap();
        assert!(img.to_volume().is_err());
    }
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::PnmDecoder;
use image::{ColorType, ImageDecoder};
use png::{BitDepth, ColorType as PngColor, Transformations};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::labels::{FluidMask, MAX_LABEL};

const U16_MAX: f64 = u16::MAX as f64;

/// Mask palette: background black, IRF red, SRF green, PED blue.
const MASK_PALETTE: [u8; 12] = [0, 0, 0, 255, 0, 0, 0, 255, 0, 0, 0, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RasterKind {
    Png,
    Pgm,
}

fn kind_of(path: &Path) -> Result<RasterKind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(RasterKind::Png),
        "pgm" | "pnm" => Ok(RasterKind::Pgm),
        _ => Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!("unknown extension `{ext}` (expected png or pgm)"),
        }),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode {
        path: path.into(),
        reason: e.to_string(),
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Raw decoded PNG: samples widened to `u16`, plus the colour type and depth.
struct PngRaster {
    width: usize,
    height: usize,
    color: PngColor,
    depth: BitDepth,
    samples: Vec<u16>,
}

fn read_png(path: &Path) -> Result<PngRaster> {
    let mut dec = png::Decoder::new(open(path)?);
    dec.set_transformations(Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| decode_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| decode_err(path, e))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let (color, depth) = (info.color_type, info.bit_depth);
    if !matches!(color, PngColor::Grayscale | PngColor::Indexed) {
        return Err(unsupported(path, format!("{color:?} PNG; expected single-channel")));
    }
    let mut samples = Vec::with_capacity(width * height);
    for r in 0..height {
        let row = &buf[r * info.line_size..(r + 1) * info.line_size];
        match depth {
            BitDepth::Sixteen => samples.extend(row.chunks_exact(2).take(width).map(|b| u16::from_be_bytes([b[0], b[1]]))),
            BitDepth::Eight => samples.extend(row[..width].iter().map(|&b| b as u16)),
            d => {
                let bits = d as usize;
                let mask = (1u16 << bits) - 1;
                samples.extend((0..width).map(|c| {
                    let bit = c * bits;
                    let shift = 8 - bits - bit % 8;
                    (row[bit / 8] as u16 >> shift) & mask
                }));
            }
        }
    }
    Ok(PngRaster {
        width,
        height,
        color,
        depth,
        samples,
    })
}

/// Reads an 8- or 16-bit single-channel PNG or PGM, scaled to `[0, 1]` by
/// the format's maximum value.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match kind_of(path)? {
        RasterKind::Png => {
            let raw = read_png(path)?;
            if raw.color != PngColor::Grayscale {
                return Err(unsupported(path, "indexed PNG is a mask, not an intensity image"));
            }
            let max = match raw.depth {
                BitDepth::Eight => 255.0,
                BitDepth::Sixteen => U16_MAX,
                d => return Err(unsupported(path, format!("{}-bit grayscale", d as u8))),
            };
            let data = raw.samples.iter().map(|&v| v as f64 / max).collect();
            Image::new(raw.height, raw.width, data)
        }
        RasterKind::Pgm => {
            let dec = PnmDecoder::new(open(path)?).map_err(|e| decode_err(path, e))?;
            let (w, h) = dec.dimensions();
            let color = dec.color_type();
            let mut buf = vec![0u8; dec.total_bytes() as usize];
            dec.read_image(&mut buf).map_err(|e| decode_err(path, e))?;
            let data = match color {
                ColorType::L8 => buf.iter().map(|&v| v as f64 / 255.0).collect(),
                ColorType::L16 => buf
                    .chunks_exact(2)
                    .map(|b| u16::from_ne_bytes([b[0], b[1]]) as f64 / U16_MAX)
                    .collect(),
                c => return Err(unsupported(path, format!("{c:?} PNM; expected grayscale"))),
            };
            Image::new(h as usize, w as usize, data)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn encode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Quantizes to 16 bits and writes PNG or binary PGM, chosen by extension.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let q: Vec<u16> = img.data().iter().map(|v| (v * U16_MAX).round() as u16).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    match kind_of(path)? {
        RasterKind::Png => {
            let mut enc = png::Encoder::new(create(path)?, w, h);
            enc.set_color(PngColor::Grayscale);
            enc.set_depth(BitDepth::Sixteen);
            let mut writer = enc.write_header().map_err(|e| encode_err(path, e))?;
            let bytes: Vec<u8> = q.iter().flat_map(|v| v.to_be_bytes()).collect();
            writer.write_image_data(&bytes).map_err(|e| encode_err(path, e))?;
            writer.finish().map_err(|e| encode_err(path, e))
        }
        RasterKind::Pgm => {
            let mut out = create(path)?;
            let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
            bytes.extend(q.iter().flat_map(|v| v.to_be_bytes()));
            out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
        }
    }
}

/// Reads an indexed (or 8-bit grayscale) PNG whose sample values are fluid labels.
pub fn load_mask(path: impl AsRef<Path>) -> Result<FluidMask> {
    let path = path.as_ref();
    if kind_of(path)? != RasterKind::Png {
        return Err(unsupported(path, "masks must be PNG"));
    }
    let raw = read_png(path)?;
    if raw.depth == BitDepth::Sixteen {
        return Err(unsupported(path, "16-bit mask"));
    }
    if let Some((i, &v)) = raw.samples.iter().enumerate().find(|(_, &v)| v > MAX_LABEL as u16) {
        return Err(Error::Input(format!(
            "{}: label {v} at row {}, column {} outside 0..={MAX_LABEL}",
            path.display(),
            i / raw.width,
            i % raw.width
        )));
    }
    let labels = raw.samples.iter().map(|&v| v as u8).collect();
    FluidMask::new(raw.height, raw.width, labels)
}

/// Writes an 8-bit indexed PNG with a four-colour palette.
pub fn write_mask(mask: &FluidMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut enc = png::Encoder::new(create(path)?, mask.width() as u32, mask.height() as u32);
    enc.set_color(PngColor::Indexed);
    enc.set_depth(BitDepth::Eight);
    enc.set_palette(&MASK_PALETTE[..]);
    let mut writer = enc.write_header().map_err(|e| encode_err(path, e))?;
    writer.write_image_data(mask.labels()).map_err(|e| encode_err(path, e))?;
    writer.finish().map_err(|e| encode_err(path, e))
}

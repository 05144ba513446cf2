//! PNG (8-bit) and binary PGM/PPM decoding, PNG encoding.

use std::io::Cursor;
use std::path::Path;

use super::{ImageError, ImageU8};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads and decodes an image file. Alpha is dropped; 16-bit data is rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageU8, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ImageError::FileNotFound(path.display().to_string()),
        _ => ImageError::Io(e),
    })?;
    decode_image(&bytes)
}

/// Decodes an in-memory PNG, PGM (P5) or PPM (P6) stream.
pub fn decode_image(bytes: &[u8]) -> Result<ImageU8, ImageError> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(ImageError::UnsupportedFormat("unrecognised signature (expected PNG, P5 or P6)".into()))
    }
}

fn decode_png(bytes: &[u8]) -> Result<ImageU8, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| ImageError::CorruptImage(e.to_string()))?;
    if reader.info().bit_depth == png::BitDepth::Sixteen {
        return Err(ImageError::UnsupportedFormat("16-bit PNG".into()));
    }
    let size = reader.output_buffer_size().ok_or_else(|| ImageError::CorruptImage("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| ImageError::CorruptImage(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    let (w, h) = (frame.width as usize, frame.height as usize);
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedFormat(format!("bit depth {:?}", frame.bit_depth)));
    }
    let (channels, data) = match frame.color_type {
        png::ColorType::Grayscale => (1, buf),
        png::ColorType::Rgb => (3, buf),
        png::ColorType::GrayscaleAlpha => (1, buf.chunks_exact(2).map(|p| p[0]).collect()),
        png::ColorType::Rgba => (3, buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect()),
        png::ColorType::Indexed => {
            return Err(ImageError::UnsupportedFormat("palette not expanded".into()));
        }
    };
    ImageU8::new(w, h, channels, data).map_err(|e| ImageError::CorruptImage(e.to_string()))
}

struct PnmHeader {
    channels: usize,
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader, ImageError> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and `#` comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(ImageError::CorruptImage("truncated PNM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::CorruptImage("malformed PNM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::CorruptImage("PNM header value out of range".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::CorruptImage("truncated PNM header".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!("PNM maxval {maxval} (only 255 supported)")));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::CorruptImage(format!("PNM dimensions {width}x{height}")));
    }
    Ok(PnmHeader { channels, width, height, data_start: pos })
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageU8, ImageError> {
    let h = parse_pnm_header(bytes)?;
    let len = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(h.channels))
        .ok_or_else(|| ImageError::CorruptImage("PNM dimensions overflow".into()))?;
    let raster =
        bytes.get(h.data_start..h.data_start + len).ok_or_else(|| ImageError::CorruptImage("truncated PNM raster".into()))?;
    ImageU8::new(h.width, h.height, h.channels, raster.to_vec())
}

/// Encodes an image as an 8-bit gray or RGB PNG.
pub fn encode_png(img: &ImageU8) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(if img.is_gray() { png::ColorType::Grayscale } else { png::ColorType::Rgb });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
        writer.write_image_data(img.data()).map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn save_png(img: &ImageU8, path: impl AsRef<Path>) -> Result<(), ImageError> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

//! Multichannel WAV reading and writing.
//!
//! The writer always emits 32-bit IEEE-float PCM. The reader additionally
//! accepts 16-bit integer PCM and the WAVE_FORMAT_EXTENSIBLE wrapper around
//! either, and skips unknown chunks. Parsing is fully bounds-checked: no input
//! byte pattern may panic or allocate beyond a small multiple of the input
//! size.

use crate::{Error, Result};
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded audio: one Vec per channel, samples as f64.
#[derive(Clone, Debug)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl WavData {
    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

fn get(bytes: &[u8], at: usize, len: usize) -> Result<&[u8]> {
    bytes
        .get(at..at.checked_add(len).ok_or_else(|| bad("offset overflow"))?)
        .ok_or_else(|| bad("truncated file"))
}

fn u16le(bytes: &[u8], at: usize) -> Result<u16> {
    let b = get(bytes, at, 2)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn u32le(bytes: &[u8], at: usize) -> Result<u32> {
    let b = get(bytes, at, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn bad(msg: &str) -> Error {
    Error::WavFormat(msg.into())
}

struct Fmt {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
    block_align: u16,
}

/// Parses a complete in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<WavData> {
    if get(bytes, 0, 4)? != b"RIFF" || get(bytes, 8, 4)? != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = get(bytes, pos, 4)?;
        let size = u32le(bytes, pos + 4)? as usize;
        let body_at = pos + 8;
        if size > bytes.len().saturating_sub(body_at) {
            return Err(bad("chunk size exceeds file"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let mut format = u16le(bytes, body_at)?;
                let channels = u16le(bytes, body_at + 2)?;
                let sample_rate = u32le(bytes, body_at + 4)?;
                let block_align = u16le(bytes, body_at + 12)?;
                let bits = u16le(bytes, body_at + 14)?;
                if format == FORMAT_EXTENSIBLE {
                    // cbSize (2) + valid bits (2) + channel mask (4) + GUID; the
                    // first two GUID bytes carry the real format tag.
                    if size < 40 {
                        return Err(bad("extensible fmt chunk too short"));
                    }
                    format = u16le(bytes, body_at + 24)?;
                }
                fmt = Some(Fmt { format, channels, sample_rate, bits, block_align });
            }
            b"data" => {
                data = Some(get(bytes, body_at, size)?);
            }
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_at + size + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad("missing data chunk"))?;

    if fmt.channels == 0 || fmt.channels > 1024 {
        return Err(bad("unsupported channel count"));
    }
    if fmt.sample_rate == 0 {
        return Err(bad("zero sample rate"));
    }
    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (FORMAT_IEEE_FLOAT, 32) => 4usize,
        (FORMAT_PCM, 16) => 2usize,
        _ => return Err(bad("only 32-bit float and 16-bit PCM are supported")),
    };
    let stride = bytes_per_sample * fmt.channels as usize;
    if fmt.block_align as usize != stride {
        return Err(bad("block alignment inconsistent with format"));
    }
    let frames = data.len() / stride;
    let mut channels = vec![Vec::with_capacity(frames); fmt.channels as usize];
    for frame in 0..frames {
        for (ch, out) in channels.iter_mut().enumerate() {
            let at = frame * stride + ch * bytes_per_sample;
            let v = match bytes_per_sample {
                4 => {
                    let b = &data[at..at + 4];
                    f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64
                }
                _ => {
                    let b = &data[at..at + 2];
                    i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0
                }
            };
            out.push(v);
        }
    }
    Ok(WavData { sample_rate: fmt.sample_rate, channels })
}

/// Serializes channels as 32-bit float PCM. All channels must share a length.
pub fn encode_wav(sample_rate: u32, channels: &[Vec<f64>]) -> Result<Vec<u8>> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > 1024 {
        return Err(Error::InvalidArgument("channel count must be in 1..=1024".into()));
    }
    let frames = channels[0].len();
    if channels.iter().any(|c| c.len() != frames) {
        return Err(Error::InvalidArgument("channels must have equal length".into()));
    }
    let data_len = frames * n_ch * 4;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * n_ch as u32 * 4).to_le_bytes());
    out.extend_from_slice(&(n_ch as u16 * 4).to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for frame in 0..frames {
        for ch in channels {
            out.extend_from_slice(&(ch[frame] as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    decode_wav(&std::fs::read(path)?)
}

pub fn write_wav(path: impl AsRef<Path>, sample_rate: u32, channels: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, encode_wav(sample_rate, channels)?)?;
    Ok(())
}

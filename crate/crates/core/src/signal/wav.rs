//! Minimal 16-bit PCM mono RIFF/WAVE reader and writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::AudioClip;

const BITS_PER_SAMPLE: u16 = 16;

/// Writes a clip as 16-bit PCM mono, little-endian. Samples are clamped to
/// [-1, 1] before quantization.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let n = clip.len();
    let data_len = (n * 2) as u32;
    let byte_rate = clip.sample_rate() * 2;

    let mut bytes = Vec::with_capacity(44 + data_len as usize);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes()); // PCM fmt chunk size
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&clip.sample_rate().to_le_bytes());
    bytes.extend_from_slice(&byte_rate.to_le_bytes());
    bytes.extend_from_slice(&2u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&BITS_PER_SAMPLE.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &s in clip.samples() {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }

    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads a 16-bit PCM mono WAV file written by [`write_wav`] or compatible
/// tools. Rejects other encodings.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = fs::read(path)?;
    if bytes.len() < 44 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format(format!("{}: not a RIFF/WAVE file", path.display())));
    }

    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Format("truncated fmt chunk".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format != 1 || channels != 1 || bits != BITS_PER_SAMPLE {
                    return Err(Error::Format(
                        "only 16-bit PCM mono is supported".into(),
                    ));
                }
                sample_rate = Some(rate);
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos += 8 + size + (size & 1);
    }

    let sample_rate =
        sample_rate.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32767.0)
        .collect();
    AudioClip::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_log_sweep, SweepSpec};

    #[test]
    fn wav_round_trip_within_quantization() {
        let spec = SweepSpec {
            duration: 0.05,
            ..SweepSpec::default()
        };
        let clip = generate_log_sweep(&spec, 44_100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.wav");
        write_wav(&path, &clip).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 44_100);
        assert_eq!(back.len(), clip.len());
        for (a, b) in back.samples().iter().zip(clip.samples()) {
            assert!((a - b).abs() <= 1.0 / 32767.0 + 1e-9);
        }
    }

    #[test]
    fn read_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(read_wav(&path).is_err());
    }
}

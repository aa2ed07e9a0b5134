//! 16-bit PCM mono WAV input and output.

use std::io::{Read, Seek, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const EXPECTED_SAMPLE_RATE: u32 = 16_000;

/// Decodes a PCM16 mono WAV with the given sample rate into samples in `[-1, 1)`.
pub fn decode_wav<R: Read>(reader: R, sample_rate: u32) -> Result<Vec<f32>> {
    let mut wav = hound::WavReader::new(reader).map_err(wav_err)?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "expected 16-bit PCM, got {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(Error::Format(format!("expected mono, got {} channels", spec.channels)));
    }
    if spec.sample_rate != sample_rate {
        return Err(Error::Format(format!(
            "wrong sample rate: expected {sample_rate} Hz, got {} Hz",
            spec.sample_rate
        )));
    }
    wav.samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0).map_err(wav_err))
        .collect()
}

pub fn read_wav(path: &Path, sample_rate: u32) -> Result<Vec<f32>> {
    let file = std::fs::File::open(path)?;
    decode_wav(std::io::BufReader::new(file), sample_rate)
        .map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
}

/// Encodes samples as PCM16 mono, saturating outside `[-1, 1)`. Inverse of
/// [`decode_wav`] on its outputs.
pub fn encode_wav<W: Write + Seek>(writer: W, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec).map_err(wav_err)?;
    for &s in samples {
        let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let file = std::fs::File::create(path)?;
    encode_wav(std::io::BufWriter::new(file), samples, sample_rate)
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Format(format!("truncated WAV data ({io})")),
        hound::Error::FormatError(m) => Error::Format(format!("bad WAV: {m}")),
        other => Error::Format(format!("bad WAV: {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn encode(samples: &[f32], rate: u32) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        encode_wav(&mut buf, samples, rate).unwrap();
        buf.into_inner()
    }

    #[test]
    fn roundtrip_within_one_lsb() {
        let samples: Vec<f32> = (0..1600).map(|i| (i as f32 * 0.01).sin() * 0.8).collect();
        let bytes = encode(&samples, 16_000);
        let back = decode_wav(Cursor::new(bytes), 16_000).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).abs() < 2.0 / 32768.0);
        }
    }

    #[test]
    fn wrong_rate_is_named() {
        let bytes = encode(&[0.0; 10], 8_000);
        let err = decode_wav(Cursor::new(bytes), 16_000).unwrap_err().to_string();
        assert!(err.contains("wrong sample rate"), "{err}");
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(decode_wav(Cursor::new(b"RIFX0000WAVE".to_vec()), 16_000), Err(Error::Format(_))));
        let mut bytes = encode(&[0.1; 100], 16_000);
        bytes.truncate(bytes.len() - 51);
        let r = decode_wav(Cursor::new(bytes), 16_000);
        assert!(matches!(r, Err(Error::Format(_))), "{r:?}");
    }

    #[test]
    fn stereo_rejected() {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut buf = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        for _ in 0..4 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = decode_wav(Cursor::new(buf.into_inner()), 16_000).unwrap_err().to_string();
        assert!(err.contains("mono"), "{err}");
    }
}

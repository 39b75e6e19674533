use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioBuffer, PIPELINE_SAMPLE_RATE};
use crate::error::{Error, Result};

fn check_spec(spec: &WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(Error::Format {
            field: "channels",
            found: spec.channels.to_string(),
            expected: "1 (mono)".into(),
        });
    }
    if spec.sample_rate != PIPELINE_SAMPLE_RATE {
        return Err(Error::Format {
            field: "sample_rate",
            found: spec.sample_rate.to_string(),
            expected: PIPELINE_SAMPLE_RATE.to_string(),
        });
    }
    if spec.sample_format != SampleFormat::Int {
        return Err(Error::Format {
            field: "sample_format",
            found: "float".into(),
            expected: "integer PCM".into(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Format {
            field: "bits_per_sample",
            found: spec.bits_per_sample.to_string(),
            expected: "16".into(),
        });
    }
    Ok(())
}

fn decode<R: std::io::Read>(reader: WavReader<R>, origin: &str) -> Result<AudioBuffer> {
    check_spec(&reader.spec())?;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse {
            context: origin.to_string(),
            location: "sample data".into(),
            message: e.to_string(),
        })?;
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: PIPELINE_SAMPLE_RATE,
    })
}

/// Reads a mono 16-bit 8 kHz PCM WAV file, scaling samples to [-1, 1).
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Parse {
            context: path.display().to_string(),
            location: "header".into(),
            message: other.to_string(),
        },
    })?;
    decode(reader, &path.display().to_string())
}

pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Parse {
        context: "wav bytes".into(),
        location: "header".into(),
        message: e.to_string(),
    })?;
    decode(reader, "wav bytes")
}

fn spec_for(audio: &AudioBuffer) -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn quantize(x: f32) -> i16 {
    (x * 32768.0).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16
}

fn hound_err(e: hound::Error) -> Error {
    Error::Validation(format!("wav encoding failed: {e}"))
}

/// Encodes audio as 16-bit PCM WAV bytes.
pub fn encode_wav(audio: &AudioBuffer) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut cursor, spec_for(audio)).map_err(hound_err)?;
        for &s in &audio.samples {
            w.write_sample(quantize(s)).map_err(hound_err)?;
        }
        w.finalize().map_err(hound_err)?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let bytes = encode_wav(audio)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

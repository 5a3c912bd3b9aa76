//! Line-oriented window files.
//!
//! ```text
//! # window_id=w0001,duration=5,audio_rate=8000,label.adl=standing,label.env=bedroom
//! accel,0,0.12,-0.03,9.79
//! audio,0,0.0012
//! gps,0,41.15,-8.61
//! ```
//!
//! Motion rows carry `t,x,y,z`, audio rows `t,amplitude`, gps rows `t,lat,lon`.
//! Blank lines and `#` lines after the header are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::labels::Labels;

use super::{AudioClip, GpsFix, SensorWindow, TriaxialSample};

pub fn parse_window(text: &str) -> Result<SensorWindow> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty document".into() })?;
    let mut window = parse_header(header_line, header)?;
    let audio_rate = window.audio.take().map(|a| a.sample_rate);

    let mut accel = Vec::new();
    let mut magnet = Vec::new();
    let mut gyro = Vec::new();
    let mut audio = Vec::new();
    let mut audio_last_t = f64::NEG_INFINITY;
    let mut gps = Vec::new();

    for (line, row) in lines {
        if row.starts_with('#') {
            continue;
        }
        let mut fields = row.split(',').map(str::trim);
        let stream = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| parse_number(line, f))
            .collect::<Result<Vec<f64>>>()?;
        let expect = |n: usize| -> Result<()> {
            if values.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    line,
                    msg: format!("`{stream}` row needs {n} values, found {}", values.len()),
                })
            }
        };
        match stream {
            "accel" | "magnet" | "gyro" => {
                expect(4)?;
                let sample = TriaxialSample { t: values[0], x: values[1], y: values[2], z: values[3] };
                match stream {
                    "accel" => accel.push(sample),
                    "magnet" => magnet.push(sample),
                    _ => gyro.push(sample),
                }
            }
            "audio" => {
                expect(2)?;
                if values[0] <= audio_last_t {
                    return Err(Error::Validation(format!(
                        "audio timestamps not strictly increasing at line {line}"
                    )));
                }
                audio_last_t = values[0];
                audio.push(values[1]);
            }
            "gps" => {
                expect(3)?;
                gps.push(GpsFix { t: values[0], lat: values[1], lon: values[2] });
            }
            other => {
                return Err(Error::Parse { line, msg: format!("unknown stream `{other}`") });
            }
        }
    }

    let non_empty = |v: Vec<TriaxialSample>| (!v.is_empty()).then_some(v);
    window.accel = non_empty(accel);
    window.magnet = non_empty(magnet);
    window.gyro = non_empty(gyro);
    window.gps_track = (!gps.is_empty()).then_some(gps);
    if !audio.is_empty() {
        let sample_rate = audio_rate.ok_or_else(|| Error::Parse {
            line: header_line,
            msg: "audio rows present but header has no audio_rate".into(),
        })?;
        window.audio = Some(AudioClip { samples: audio, sample_rate });
    }
    window.validate()?;
    Ok(window)
}

fn parse_number(line: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse { line, msg: format!("`{field}` is not a finite number") }),
    }
}

fn parse_header(line: usize, header: &str) -> Result<SensorWindow> {
    let bad = |msg: String| Error::Parse { line, msg };
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| bad("first line must be a `# window_id=...` header".into()))?;

    let mut id = None;
    let mut duration = None;
    let mut audio_rate = None;
    let mut labels = Labels::default();
    for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| bad(format!("header entry `{pair}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        let label_err = |e: Error| bad(e.to_string());
        match key {
            "window_id" => id = Some(value.to_string()),
            "duration" => duration = Some(parse_number(line, value)?),
            "audio_rate" => audio_rate = Some(parse_number(line, value)?),
            "label.adl" => labels.adl = Some(value.parse().map_err(label_err)?),
            "label.env" => labels.env = Some(value.parse().map_err(label_err)?),
            "label.standing" => labels.standing = Some(value.parse().map_err(label_err)?),
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }

    let mut window = SensorWindow::empty(id.filter(|s| !s.is_empty()).ok_or_else(|| bad("header lacks window_id".into()))?);
    if let Some(d) = duration {
        window.duration = d;
    }
    window.labels = labels;
    // Carried through to the caller until the audio rows are known.
    window.audio = audio_rate.map(|sample_rate| AudioClip { samples: Vec::new(), sample_rate });
    Ok(window)
}

/// Renders a window in the file format. Floats use the shortest
/// representation that parses back to the same bits.
pub fn serialize_window(window: &SensorWindow) -> String {
    let mut out = String::new();
    write!(out, "# window_id={},duration={}", window.window_id, window.duration).unwrap();
    if let Some(audio) = &window.audio {
        write!(out, ",audio_rate={}", audio.sample_rate).unwrap();
    }
    let labels = &window.labels;
    if let Some(l) = labels.adl {
        write!(out, ",label.adl={l}").unwrap();
    }
    if let Some(l) = labels.env {
        write!(out, ",label.env={l}").unwrap();
    }
    if let Some(l) = labels.standing {
        write!(out, ",label.standing={l}").unwrap();
    }
    out.push('\n');

    for (name, stream) in [("accel", &window.accel), ("magnet", &window.magnet), ("gyro", &window.gyro)] {
        for s in stream.iter().flatten() {
            writeln!(out, "{name},{},{},{},{}", s.t, s.x, s.y, s.z).unwrap();
        }
    }
    if let Some(audio) = &window.audio {
        for (i, a) in audio.samples.iter().enumerate() {
            writeln!(out, "audio,{},{a}", i as f64 / audio.sample_rate).unwrap();
        }
    }
    for fix in window.gps_track.iter().flatten() {
        writeln!(out, "gps,{},{},{}", fix.t, fix.lat, fix.lon).unwrap();
    }
    out
}

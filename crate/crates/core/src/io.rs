//! CSV artifacts. Every file starts with `#` comment lines carrying the
//! schema name and the configuration fingerprint.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bench::{FeedbackCycle, SweepResult};
use crate::dynamics::{PulseSequence, PulseStep};
use crate::error::{Error, Result};
use crate::ppo::CurvePoint;
use crate::rl_env::TraceRow;
use crate::waveform::{PhasePlan, WaveformSamples};

/// Header metadata written as `# key: value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    pub schema: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(schema: &str, fingerprint: &str) -> Self {
        Header {
            schema: schema.into(),
            entries: vec![("config_fingerprint".into(), fingerprint.into())],
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn render(&self) -> String {
        let mut s = format!("# schema: {}\n", self.schema);
        for (k, v) in &self.entries {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s
    }

    fn parse(text: &str) -> Header {
        let mut h = Header::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').split_once(':') {
                let (k, v) = (k.trim(), v.trim());
                if k == "schema" {
                    h.schema = v.into();
                } else {
                    h.entries.push((k.into(), v.into()));
                }
            }
        }
        h
    }
}

/// Full-precision decimal used for every numeric cell.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes header comments followed by CSV rows.
pub fn write_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = header.render().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(columns).map_err(io_err)?;
        for r in rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub const PULSE_SCHEMA: &str = "qflip-pulse/1";
pub const PULSE_COLUMNS: [&str; 3] = ["step_index", "delta_over_omega", "duration_s"];

pub fn write_pulse_csv(path: &Path, seq: &PulseSequence, header: Header) -> Result<()> {
    let header = header.with("omega_rad_s", num(seq.omega));
    let rows: Vec<Vec<String>> = seq
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), num(s.delta / seq.omega), num(s.duration)])
        .collect();
    write_csv(path, &header, &PULSE_COLUMNS, &rows)
}

/// Parses a pulse CSV. `omega` overrides the `omega_rad_s` header entry.
pub fn read_pulse_csv(path: &Path, omega: Option<f64>) -> Result<(PulseSequence, Header)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = Header::parse(&text);
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let omega = match omega {
        Some(w) => w,
        None => header
            .get("omega_rad_s")
            .ok_or_else(|| parse_err(0, "missing omega_rad_s header and no Rabi frequency given".into()))?
            .parse::<f64>()
            .map_err(|e| parse_err(0, format!("bad omega_rad_s header: {e}")))?,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let cols = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    if cols.iter().collect::<Vec<_>>() != PULSE_COLUMNS {
        return Err(parse_err(0, format!("expected columns {PULSE_COLUMNS:?}, found {:?}", cols)));
    }
    let mut steps = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_err(row, e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(row, format!("column {}: {e}", PULSE_COLUMNS[i])))
        };
        let index: usize = rec[0]
            .parse()
            .map_err(|e| parse_err(row, format!("column step_index: {e}")))?;
        if index != steps.len() + 1 {
            return Err(parse_err(row, format!("step_index {index} out of order")));
        }
        let step = PulseStep::new(field(1)? * omega, field(2)?).map_err(|e| parse_err(row, e.to_string()))?;
        steps.push(step);
    }
    let seq = PulseSequence::new(omega, steps).map_err(|e| parse_err(0, e.to_string()))?;
    Ok((seq, header))
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRow], header: Header) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|r| vec![r.step.to_string(), num(r.action), num(r.delta_over_omega), num(r.sz), num(r.reward)])
        .collect();
    write_csv(path, &header, &["step", "action", "delta_over_omega", "sz", "reward"], &rows)
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint], header: Header) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|c| {
            vec![
                c.batch_index.to_string(),
                format!("{:?}", c.phase).to_lowercase(),
                c.episodes.to_string(),
                num(c.mean_return),
                num(c.policy_loss),
                num(c.value_loss),
                num(c.entropy),
                opt(c.eval_score),
            ]
        })
        .collect();
    write_csv(
        path,
        &header,
        &["batch_index", "phase", "episodes", "mean_return", "policy_loss", "value_loss", "entropy", "eval_score"],
        &rows,
    )
}

pub fn write_sweep_csv(path: &Path, results: &[SweepResult], header: Header) -> Result<()> {
    let Some(first) = results.first() else {
        return Err(Error::invalid("no sweep results to write"));
    };
    let mut columns: Vec<&str> = vec!["index", "method", "kind"];
    columns.extend(first.axes.iter().map(String::as_str));
    columns.extend([
        "probability",
        "p_hat",
        "std",
        "n_shots",
        "log10_infidelity",
        "omega_rad_s",
        "duration_s",
        "seed",
        "t2_s",
    ]);
    let mut rows = Vec::new();
    for r in results {
        if r.axes != first.axes {
            return Err(Error::invalid("sweep results have different axes"));
        }
        for p in &r.points {
            let mut row = vec![p.index.to_string(), r.meta.method.clone(), r.kind.name().to_string()];
            row.extend(p.coords.iter().map(|&c| num(c)));
            row.extend([
                num(p.probability),
                num(p.estimate.p_hat),
                num(p.estimate.std),
                p.estimate.n_shots.to_string(),
                num(p.log_infidelity),
                num(r.meta.omega),
                num(r.meta.duration),
                r.meta.seed.to_string(),
                opt(r.meta.t2),
            ]);
            rows.push(row);
        }
    }
    write_csv(path, &header, &columns, &rows)
}

pub fn write_feedback_csv(path: &Path, cycles: &[FeedbackCycle], delta_max_over_omega: f64, header: Header) -> Result<()> {
    let rows: Vec<Vec<String>> = cycles
        .iter()
        .map(|c| {
            vec![
                c.cycle.to_string(),
                num(c.measured_sz),
                num(c.action),
                num((2.0 * c.action - 1.0) * delta_max_over_omega),
            ]
        })
        .collect();
    write_csv(path, &header, &["cycle", "measured_sz", "action", "delta_over_omega"], &rows)
}

/// Samples as `(time_s, amplitude)` with the plan metadata in a JSON header.
pub fn write_waveform_csv(path: &Path, plan: &PhasePlan, wf: &WaveformSamples, header: Header) -> Result<()> {
    let meta = serde_json::json!({
        "f0_hz": plan.f0,
        "fc_hz": plan.fc,
        "sample_rate_hz": wf.sample_rate,
        "a2": wf.a2,
        "segments": plan.segments,
        "max_phase_jump_rad": crate::waveform::verify_continuity(plan),
    });
    let header = header.with("plan", meta);
    let rows: Vec<Vec<String>> = wf
        .samples
        .iter()
        .enumerate()
        .map(|(k, &a)| vec![num(wf.time(k)), num(a)])
        .collect();
    write_csv(path, &header, &["time_s", "amplitude"], &rows)
}

pub fn write_plan_csv(path: &Path, plan: &PhasePlan, header: Header) -> Result<()> {
    let header = header.with("f0_hz", format!("{:.11e}", plan.f0)).with("fc_hz", format!("{:.11e}", plan.fc));
    let rows: Vec<Vec<String>> = plan
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                format!("{:.11e}", s.delta),
                format!("{:.11e}", s.duration),
                format!("{:.11e}", s.phase_offset),
            ]
        })
        .collect();
    write_csv(path, &header, &["segment", "delta_rad_s", "duration_s", "phase_offset_rad"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sample_seq() -> PulseSequence {
        let omega = TAU * 3300.0;
        let steps = (0..5)
            .map(|i| PulseStep::new((0.1 * i as f64 - 0.2) * omega / 3.0, 15e-6 + i as f64 * 1e-7).unwrap())
            .collect();
        PulseSequence::new(omega, steps).unwrap()
    }

    #[test]
    fn pulse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let seq = sample_seq();
        write_pulse_csv(&path, &seq, Header::new(PULSE_SCHEMA, "deadbeef")).unwrap();
        let (back, h) = read_pulse_csv(&path, None).unwrap();
        assert_eq!(h.get("config_fingerprint"), Some("deadbeef"));
        assert_eq!(h.schema, PULSE_SCHEMA);
        for (a, b) in back.steps.iter().zip(&seq.steps) {
            assert!((a.delta - b.delta).abs() <= 1e-12 * seq.omega);
            assert_eq!(a.duration, b.duration);
        }
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(
            &path,
            "# omega_rad_s: 1.0\nstep_index,delta_over_omega,duration_s\n1,0.5,1e-6\n2,abc,1e-6\n",
        )
        .unwrap();
        match read_pulse_csv(&path, None).unwrap_err() {
            Error::Parse { row, message, .. } => {
                assert_eq!(row, 4);
                assert!(message.contains("delta_over_omega"));
            }
            e => panic!("unexpected {e}"),
        }
        fs::write(&path, "step_index,delta_over_omega,duration_s\n1,0.5,-1\n").unwrap();
        assert!(matches!(read_pulse_csv(&path, Some(1.0)), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(read_pulse_csv(&path, None), Err(Error::Parse { .. })));
        let missing = dir.path().join("none.csv");
        assert!(matches!(read_pulse_csv(&missing, None), Err(Error::Io { .. })));
    }
}

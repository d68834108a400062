//! Line-oriented text formats.
//!
//! - score file: `enroll<TAB>test<TAB>system-tag<TAB>score`
//! - key file: `enroll<TAB>test<TAB>target|nontarget`
//! - quality file: `utterance-id kind value` (space-separated)
//! - i-vector export: `utterance-id v1 v2 ... vR`
//! - trial list: `enroll<TAB>test`
//! - metrics: `condition<TAB>eer<TAB>mindcf100`
//! - DET points: `p_fa p_miss` two-column

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::fusion::TrialLabel;
use crate::quality::{QualityKind, QualityRecord};

/// One line of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub enroll_id: String,
    pub test_id: String,
    pub system: String,
    pub score: f64,
}

/// One line of a key file.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyEntry {
    pub enroll_id: String,
    pub test_id: String,
    pub label: TrialLabel,
}

pub fn write_scores(path: &Path, entries: &[ScoreEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        writeln!(w, "{}\t{}\t{}\t{}", e.enroll_id, e.test_id, e.system, e.score)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreEntry>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(Error::Format(format!(
                "{}: line {}: expected 4 tab-separated fields",
                path.display(),
                lineno + 1
            )));
        }
        out.push(ScoreEntry {
            enroll_id: parts[0].to_string(),
            test_id: parts[1].to_string(),
            system: parts[2].to_string(),
            score: parts[3]
                .parse()
                .map_err(|_| Error::Format(format!("bad score: {}", parts[3])))?,
        });
    }
    Ok(out)
}

pub fn write_key(path: &Path, entries: &[KeyEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        writeln!(w, "{}\t{}\t{}", e.enroll_id, e.test_id, e.label.as_str())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_key(path: &Path) -> Result<Vec<KeyEntry>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!(
                "{}: line {}: expected 3 tab-separated fields",
                path.display(),
                lineno + 1
            )));
        }
        out.push(KeyEntry {
            enroll_id: parts[0].to_string(),
            test_id: parts[1].to_string(),
            label: TrialLabel::parse(parts[2])?,
        });
    }
    Ok(out)
}

pub fn write_quality(path: &Path, records: &[QualityRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in records {
        writeln!(w, "{} {} {}", rec.utterance_id, rec.kind.short_name(), rec.value)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_quality(path: &Path) -> Result<Vec<QualityRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!(
                "{}: line {}: expected `utterance kind value`",
                path.display(),
                lineno + 1
            )));
        }
        let kind = QualityKind::from_short_name(parts[1])
            .ok_or_else(|| Error::Format(format!("unknown quality kind: {}", parts[1])))?;
        out.push(QualityRecord {
            utterance_id: parts[0].to_string(),
            kind,
            value: parts[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad quality value: {}", parts[2])))?,
            duration_s: None,
        });
    }
    Ok(out)
}

pub fn write_ivectors(path: &Path, ivectors: &[(String, Array1<f64>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, y) in ivectors {
        let values = y
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{id} {values}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ivectors(path: &Path) -> Result<Vec<(String, Array1<f64>)>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: empty", lineno + 1)))?
            .to_string();
        let values: Vec<f64> = parts
            .map(|tok| {
                tok.parse()
                    .map_err(|_| Error::Format(format!("bad i-vector value: {tok}")))
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::Format(format!(
                "line {}: i-vector has no values",
                lineno + 1
            )));
        }
        out.push((id, Array1::from_vec(values)));
    }
    Ok(out)
}

pub fn write_trials(path: &Path, trials: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (enroll, test) in trials {
        writeln!(w, "{enroll}\t{test}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<(String, String)>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 2 {
            return Err(Error::Format(format!(
                "{}: line {}: expected `enroll<TAB>test`",
                path.display(),
                lineno + 1
            )));
        }
        out.push((parts[0].to_string(), parts[1].to_string()));
    }
    Ok(out)
}

/// Machine-readable metrics row; `min_dcf` is scaled by 100 on output.
pub fn format_metrics_line(condition: &str, eer: f64, min_dcf: f64) -> String {
    format!("{condition}\t{:.4}\t{:.4}", eer, min_dcf * 100.0)
}

pub fn write_metrics_lines(path: &Path, rows: &[(String, f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (condition, eer, min_dcf) in rows {
        writeln!(w, "{}", format_metrics_line(condition, *eer, *min_dcf))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_det_points(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (p_fa, p_miss) in points {
        writeln!(w, "{p_fa} {p_miss}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_and_key_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spath = dir.path().join("s.tsv");
        let entries = vec![
            ScoreEntry {
                enroll_id: "spk1-s0".into(),
                test_id: "spk2-s1".into(),
                system: "gmm-ubm".into(),
                score: -0.12345678901234567,
            },
            ScoreEntry {
                enroll_id: "spk1-s0".into(),
                test_id: "spk1-s1".into(),
                system: "ivector-gplda".into(),
                score: 3.5,
            },
        ];
        write_scores(&spath, &entries).unwrap();
        assert_eq!(read_scores(&spath).unwrap(), entries);

        let kpath = dir.path().join("k.tsv");
        let key = vec![
            KeyEntry {
                enroll_id: "a".into(),
                test_id: "b".into(),
                label: TrialLabel::Target,
            },
            KeyEntry {
                enroll_id: "a".into(),
                test_id: "c".into(),
                label: TrialLabel::Nontarget,
            },
        ];
        write_key(&kpath, &key).unwrap();
        assert_eq!(read_key(&kpath).unwrap(), key);
    }

    #[test]
    fn quality_round_trip_uses_short_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.txt");
        let records = vec![
            QualityRecord {
                utterance_id: "utt1".into(),
                kind: QualityKind::Kl1,
                value: 2.25,
                duration_s: None,
            },
            QualityRecord {
                utterance_id: "utt2".into(),
                kind: QualityKind::Bh,
                value: 0.178,
                duration_s: None,
            },
        ];
        write_quality(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("utt1 kl-1 2.25"));
        assert_eq!(read_quality(&path).unwrap(), records);
    }

    #[test]
    fn ivectors_and_trials_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ipath = dir.path().join("iv.txt");
        let ivs = vec![
            ("u1".to_string(), Array1::from_vec(vec![0.5, -1.25])),
            ("u2".to_string(), Array1::from_vec(vec![1e-300, 2.0])),
        ];
        write_ivectors(&ipath, &ivs).unwrap();
        let back = read_ivectors(&ipath).unwrap();
        assert_eq!(back, ivs);

        let tpath = dir.path().join("t.tsv");
        let trials = vec![("e1".to_string(), "t1".to_string())];
        write_trials(&tpath, &trials).unwrap();
        assert_eq!(read_trials(&tpath).unwrap(), trials);
    }

    #[test]
    fn metrics_line_scales_dcf() {
        let line = format_metrics_line("2s-2s", 35.25, 0.0969);
        assert_eq!(line, "2s-2s\t35.2500\t9.6900");
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "only two\tfields\n").unwrap();
        assert!(read_scores(&path).is_err());
        std::fs::write(&path, "a\tb\tnot-a-label\n").unwrap();
        assert!(read_key(&path).is_err());
        std::fs::write(&path, "utt unknown-kind 1.0\n").unwrap();
        assert!(read_quality(&path).is_err());
    }
}

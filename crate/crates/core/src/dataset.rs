//! Paired indoor/outdoor panorama manifests and luminance error statistics.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::image_dimensions;
use crate::photometry::{error_stats, ErrorStats, PhotometricRecord, StatsRow};

pub const MANIFEST_COLUMNS: [&str; 8] = [
    "scene_id",
    "indoor_path",
    "outdoor_path",
    "E_in_lux",
    "E_out_lux",
    "L_tgt_cdm2",
    "orientation_deg",
    "timestamp_iso8601",
];
pub const OUTDOOR_TIMESTAMP_COLUMN: &str = "outdoor_timestamp_iso8601";
pub const DEFAULT_PAIR_WINDOW_S: i64 = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEntry {
    pub scene_id: String,
    pub indoor_path: PathBuf,
    pub outdoor_path: PathBuf,
    pub record: PhotometricRecord,
    pub timestamp: DateTime<FixedOffset>,
    pub outdoor_timestamp: Option<DateTime<FixedOffset>>,
}

/// One manifest row as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRow {
    scene_id: String,
    indoor_path: String,
    outdoor_path: String,
    #[serde(rename = "E_in_lux")]
    e_in_lux: f64,
    #[serde(rename = "E_out_lux")]
    e_out_lux: f64,
    #[serde(rename = "L_tgt_cdm2")]
    l_tgt_cdm2: f64,
    orientation_deg: f64,
    timestamp_iso8601: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outdoor_timestamp_iso8601: Option<String>,
}

impl From<&SceneEntry> for ManifestRow {
    fn from(e: &SceneEntry) -> Self {
        Self {
            scene_id: e.scene_id.clone(),
            indoor_path: e.indoor_path.to_string_lossy().into_owned(),
            outdoor_path: e.outdoor_path.to_string_lossy().into_owned(),
            e_in_lux: e.record.indoor_illuminance_lux,
            e_out_lux: e.record.outdoor_illuminance_lux,
            l_tgt_cdm2: e.record.target_luminance_cdm2,
            orientation_deg: e.record.orientation_deg,
            timestamp_iso8601: e.timestamp.to_rfc3339(),
            outdoor_timestamp_iso8601: e.outdoor_timestamp.map(|t| t.to_rfc3339()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifestOptions {
    /// Require both panoramas to exist and be 2:1.
    pub check_files: bool,
    /// Largest allowed gap between indoor and outdoor capture times.
    pub pair_window_s: i64,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self {
            check_files: true,
            pair_window_s: DEFAULT_PAIR_WINDOW_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub scene_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<SceneEntry>,
    pub diagnostics: Vec<RowDiagnostic>,
}

fn parse_time(s: &str) -> std::result::Result<DateTime<FixedOffset>, String> {
    DateTime::parse_from_rfc3339(s.trim()).map_err(|e| format!("bad timestamp '{s}': {e}"))
}

fn check_pano(base: &Path, rel: &Path) -> std::result::Result<(), String> {
    let path = base.join(rel);
    let (w, h) = image_dimensions(&path).map_err(|e| e.to_string())?;
    if w != 2 * h {
        return Err(format!("{} is {w}x{h}, expected 2:1", path.display()));
    }
    Ok(())
}

fn entry_from_row(row: ManifestRow, base: &Path, opts: &ManifestOptions) -> std::result::Result<SceneEntry, String> {
    if row.scene_id.trim().is_empty() {
        return Err("empty scene_id".into());
    }
    let record = PhotometricRecord {
        indoor_illuminance_lux: row.e_in_lux,
        outdoor_illuminance_lux: row.e_out_lux,
        target_luminance_cdm2: row.l_tgt_cdm2,
        orientation_deg: row.orientation_deg,
    };
    record.validate().map_err(|e| e.to_string())?;
    let timestamp = parse_time(&row.timestamp_iso8601)?;
    let outdoor_timestamp = match row.outdoor_timestamp_iso8601.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(parse_time(s)?),
    };
    if let Some(t) = outdoor_timestamp {
        let gap = (t - timestamp).num_seconds().abs();
        if gap > opts.pair_window_s {
            return Err(format!(
                "indoor and outdoor captures are {gap} s apart (window {} s)",
                opts.pair_window_s
            ));
        }
    }
    let entry = SceneEntry {
        scene_id: row.scene_id,
        indoor_path: PathBuf::from(row.indoor_path),
        outdoor_path: PathBuf::from(row.outdoor_path),
        record,
        timestamp,
        outdoor_timestamp,
    };
    if opts.check_files {
        check_pano(base, &entry.indoor_path)?;
        check_pano(base, &entry.outdoor_path)?;
    }
    Ok(entry)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a CSV or JSON manifest. Rows that fail validation are reported in
/// `diagnostics` and skipped; panorama paths are relative to the manifest.
pub fn load_manifest(path: &Path, opts: &ManifestOptions) -> Result<Manifest> {
    let base = path.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<std::result::Result<ManifestRow, String>> = if is_json(path) {
        let values: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        values
            .into_iter()
            .map(|v| serde_json::from_value(v).map_err(|e| e.to_string()))
            .collect()
    } else {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
        if !headers.is_empty() {
            let missing: Vec<&str> = MANIFEST_COLUMNS
                .iter()
                .copied()
                .filter(|c| !headers.iter().any(|h| h == *c))
                .collect();
            if !missing.is_empty() {
                return Err(Error::format(path, format!("missing columns {missing:?}")));
            }
        }
        rdr.deserialize().map(|r| r.map_err(|e: csv::Error| e.to_string())).collect()
    };
    let mut manifest = Manifest::default();
    let mut seen = HashSet::new();
    for (i, row) in rows.into_iter().enumerate() {
        let row_no = i + 1;
        let result = row.map_err(|reason| (None, reason)).and_then(|r| {
            let id = r.scene_id.clone();
            entry_from_row(r, base, opts).map_err(|reason| (Some(id), reason))
        });
        match result {
            Ok(e) if !seen.insert(e.scene_id.clone()) => manifest.diagnostics.push(RowDiagnostic {
                row: row_no,
                scene_id: Some(e.scene_id.clone()),
                reason: "duplicate scene_id".into(),
            }),
            Ok(e) => manifest.entries.push(e),
            Err((scene_id, reason)) => manifest.diagnostics.push(RowDiagnostic {
                row: row_no,
                scene_id,
                reason,
            }),
        }
    }
    if manifest.entries.is_empty() && manifest.diagnostics.is_empty() {
        log::warn!("manifest {} has no entries", path.display());
    }
    for d in &manifest.diagnostics {
        log::warn!("manifest {} row {}: {}", path.display(), d.row, d.reason);
    }
    Ok(manifest)
}

/// Writes CSV or JSON by extension. The outdoor timestamp column is written
/// only when some entry has one.
pub fn save_manifest(path: &Path, entries: &[SceneEntry]) -> Result<()> {
    let rows: Vec<ManifestRow> = entries.iter().map(ManifestRow::from).collect();
    let bytes = if is_json(path) {
        let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
        s.push('\n');
        s.into_bytes()
    } else {
        let with_outdoor = rows.iter().any(|r| r.outdoor_timestamp_iso8601.is_some());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = MANIFEST_COLUMNS.to_vec();
        if with_outdoor {
            header.push(OUTDOOR_TIMESTAMP_COLUMN);
        }
        let to_err = |e: csv::Error| Error::format(path, e);
        w.write_record(&header).map_err(to_err)?;
        for r in &rows {
            let mut rec = vec![
                r.scene_id.clone(),
                r.indoor_path.clone(),
                r.outdoor_path.clone(),
                format!("{:?}", r.e_in_lux),
                format!("{:?}", r.e_out_lux),
                format!("{:?}", r.l_tgt_cdm2),
                format!("{:?}", r.orientation_deg),
                r.timestamp_iso8601.clone(),
            ];
            if with_outdoor {
                rec.push(r.outdoor_timestamp_iso8601.clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(to_err)?;
        }
        w.into_inner().map_err(|e| Error::format(path, e.to_string()))?
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    /// One row per scene with an estimate, sorted by `scene_id`.
    pub rows: Vec<StatsRow>,
    pub summary: ErrorStats,
}

/// Compares low-cost luminance estimates (by scene id) with each entry's
/// reference luminance. Entries without an estimate are skipped.
pub fn dataset_stats(entries: &[SceneEntry], estimates: &BTreeMap<String, f64>) -> Result<DatasetStats> {
    let mut matched: Vec<(&SceneEntry, f64)> = entries
        .iter()
        .filter_map(|e| estimates.get(&e.scene_id).map(|v| (e, *v)))
        .collect();
    if matched.is_empty() {
        return Err(Error::invalid("no scene has both a reference and an estimated luminance"));
    }
    matched.sort_by(|a, b| a.0.scene_id.cmp(&b.0.scene_id));
    let rows: Vec<StatsRow> = matched
        .iter()
        .map(|(e, est)| {
            StatsRow::new(
                e.scene_id.clone(),
                e.record.indoor_illuminance_lux,
                e.record.target_luminance_cdm2,
                *est,
            )
        })
        .collect();
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.l_lowcost_cdm2, r.l_std_cdm2)).collect();
    let summary = error_stats(&pairs)?;
    Ok(DatasetStats { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "scene_id,indoor_path,outdoor_path,E_in_lux,E_out_lux,L_tgt_cdm2,orientation_deg,timestamp_iso8601\n";

    fn no_files() -> ManifestOptions {
        ManifestOptions {
            check_files: false,
            ..Default::default()
        }
    }

    fn entry(id: &str, e_in: f64, l: f64) -> SceneEntry {
        SceneEntry {
            scene_id: id.into(),
            indoor_path: format!("{id}/in.exr").into(),
            outdoor_path: format!("{id}/out.exr").into(),
            record: PhotometricRecord {
                indoor_illuminance_lux: e_in,
                outdoor_illuminance_lux: 10.0 * e_in + 0.1,
                target_luminance_cdm2: l,
                orientation_deg: 123.25,
            },
            timestamp: DateTime::parse_from_rfc3339("2023-05-04T10:11:12+02:00").unwrap(),
            outdoor_timestamp: None,
        }
    }

    #[test]
    fn empty_manifest_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, HEADER).unwrap();
        assert_eq!(load_manifest(&p, &no_files()).unwrap(), Manifest::default());
        std::fs::write(&p, "").unwrap();
        assert!(load_manifest(&p, &no_files()).unwrap().entries.is_empty());
    }

    #[test]
    fn negative_illuminance_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let text = format!(
            "{HEADER}a,a.exr,ao.exr,120.5,9000,15.2,10,2023-05-04T10:11:12Z\n\
             b,b.exr,bo.exr,-3,9000,15.2,10,2023-05-04T10:11:12Z\n"
        );
        std::fs::write(&p, text).unwrap();
        let m = load_manifest(&p, &no_files()).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.diagnostics.len(), 1);
        assert_eq!(m.diagnostics[0].row, 2);
        assert!(m.diagnostics[0].reason.contains("illuminance"), "{:?}", m.diagnostics);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = vec![entry("s01", 0.1 + 0.2, 2.0), entry("s02", 1e-7, 3.5), entry("s03", 812.0, 1.0 / 3.0)];
        for name in ["m.csv", "m.json"] {
            let p = dir.path().join(name);
            save_manifest(&p, &entries).unwrap();
            let back = load_manifest(&p, &no_files()).unwrap();
            assert!(back.diagnostics.is_empty(), "{:?}", back.diagnostics);
            assert_eq!(back.entries, entries);
        }
        let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert!(text.starts_with(HEADER));
        entries[1].outdoor_timestamp = Some(DateTime::parse_from_rfc3339("2023-05-04T10:15:00+02:00").unwrap());
        let p = dir.path().join("t.csv");
        save_manifest(&p, &entries).unwrap();
        assert_eq!(load_manifest(&p, &no_files()).unwrap().entries, entries);
    }

    #[test]
    fn pair_window_and_file_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = entry("late", 10.0, 1.0);
        e.outdoor_timestamp = Some(DateTime::parse_from_rfc3339("2023-05-04T10:40:00+02:00").unwrap());
        let p = dir.path().join("m.csv");
        save_manifest(&p, &[e, entry("nofile", 1.0, 1.0)]).unwrap();
        let m = load_manifest(&p, &ManifestOptions::default()).unwrap();
        assert!(m.entries.is_empty());
        assert!(m.diagnostics[0].reason.contains("apart"));
        assert_eq!(m.diagnostics.len(), 2);
    }

    #[test]
    fn stats_single_perfect_and_half_error() {
        let est: BTreeMap<String, f64> = [("a".to_string(), 2.0)].into();
        let s = dataset_stats(&[entry("a", 5.0, 2.0)], &est).unwrap();
        assert_eq!(s.rows[0].pct_err, Some(0.0));
        let est: BTreeMap<String, f64> = [("a".to_string(), 3.0)].into();
        let s = dataset_stats(&[entry("a", 5.0, 2.0)], &est).unwrap();
        assert_eq!(s.rows[0].pct_err, Some(50.0));
        assert!(dataset_stats(&[], &est).is_err());
    }

    #[test]
    fn injected_scale_errors_are_recovered() {
        let scales = [0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0, 0.75, 1.05];
        let entries: Vec<SceneEntry> = (0..10)
            .map(|i| entry(&format!("s{i:02}"), 50.0 + 10.0 * i as f64, 1.0 + 0.7 * i as f64))
            .collect();
        let est: BTreeMap<String, f64> = entries
            .iter()
            .zip(scales)
            .map(|(e, s)| (e.scene_id.clone(), e.record.target_luminance_cdm2 * s))
            .collect();
        let stats = dataset_stats(&entries, &est).unwrap();
        for (row, s) in stats.rows.iter().zip(scales) {
            assert!((row.pct_err.unwrap() - 100.0 * (s - 1.0f64).abs()).abs() < 1e-9);
        }
        let mut rev = entries.clone();
        rev.reverse();
        assert_eq!(dataset_stats(&rev, &est).unwrap(), stats);
    }
}

//! On-disk dataset format: manifest.json + samples.f32 + labels.csv.
//!
//! The samples blob is row-major little-endian f32, one row per recording;
//! labels.csv row order matches blob order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{GripperConfig, Material, Scenario};

pub const SCHEMA_VERSION: u32 = 1;
pub const LABEL_COLUMNS: [&str; 7] = [
    "sample_id",
    "object_class",
    "size_mm",
    "material",
    "theta_deg",
    "pose_id",
    "noise_level",
];

/// Labels of one recorded sample, one row of labels.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLabel {
    pub sample_id: usize,
    pub object_class: String,
    /// Index into the manifest's class list (derived, not serialized).
    pub class_index: usize,
    pub size_mm: f64,
    pub material: Material,
    pub theta_deg: f64,
    pub pose_id: u32,
    pub noise_level_dba: f64,
}

/// Dataset metadata written alongside the sample blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub n_samples: usize,
    pub sample_len: usize,
    pub sample_rate: u32,
    pub label_columns: Vec<String>,
    pub class_names: Vec<String>,
    /// Parallel to class_names for the 16-object scenario, empty otherwise.
    pub class_categories: Vec<String>,
    pub held_out_sizes_mm: Vec<f64>,
    pub held_out_theta_deg: Vec<f64>,
    pub config: GripperConfig,
    pub config_hash: String,
}

impl Manifest {
    pub fn build(
        scenario: &Scenario,
        config: &GripperConfig,
        seed: u64,
        n_samples: usize,
        sample_len: usize,
        class_names: Vec<String>,
        class_categories: Vec<String>,
    ) -> Self {
        let mut manifest = Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.clone(),
            seed,
            n_samples,
            sample_len,
            sample_rate: config.sample_rate,
            label_columns: LABEL_COLUMNS.iter().map(|s| s.to_string()).collect(),
            class_names,
            class_categories,
            held_out_sizes_mm: match scenario.kind {
                crate::sim::ScenarioKind::Sizes => {
                    let grid = Scenario::size_grid_mm();
                    Scenario::held_out_size_indices()
                        .iter()
                        .map(|&i| grid[i])
                        .collect()
                }
                _ => Vec::new(),
            },
            held_out_theta_deg: match scenario.kind {
                crate::sim::ScenarioKind::Orientation => {
                    let grid = Scenario::theta_grid_deg();
                    Scenario::held_out_theta_indices()
                        .iter()
                        .map(|&i| grid[i])
                        .collect()
                }
                _ => Vec::new(),
            },
            config: config.clone(),
            config_hash: String::new(),
        };
        manifest.config_hash = manifest.compute_hash();
        manifest
    }

    /// Hash over (scenario, seed, config); names output directories and ties
    /// caches to their generating configuration.
    pub fn compute_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            scenario: &'a Scenario,
            seed: u64,
            config: &'a GripperConfig,
        }
        let json = serde_json::to_string(&Hashed {
            scenario: &self.scenario,
            seed: self.seed,
            config: &self.config,
        })
        .expect("manifest serializes");
        short_hash(&json)
    }
}

/// First 12 hex chars of sha256; enough to key artifact directories.
pub fn short_hash(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// A generated dataset: metadata, raw recordings and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub recordings: Vec<Vec<f32>>,
    pub labels: Vec<SampleLabel>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Class index per sample.
    pub fn class_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.class_index).collect()
    }

    /// Pose group key per sample: (class_index, pose_id) flattened so pose
    /// splits never leak near-duplicate samples across folds.
    pub fn pose_ids(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l.pose_id).collect()
    }
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let manifest_json = serde_json::to_string_pretty(&dataset.manifest)?;
    fs::write(dir.join("manifest.json"), manifest_json + "\n")?;

    let mut blob = Vec::with_capacity(dataset.len() * dataset.manifest.sample_len * 4);
    for recording in &dataset.recordings {
        if recording.len() != dataset.manifest.sample_len {
            return Err(Error::Format(format!(
                "recording length {} does not match manifest sample_len {}",
                recording.len(),
                dataset.manifest.sample_len
            )));
        }
        for &v in recording {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(dir.join("samples.f32"))?;
    file.write_all(&blob)?;

    let mut writer = csv::Writer::from_path(dir.join("labels.csv"))
        .map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
    writer
        .write_record(LABEL_COLUMNS)
        .map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
    for label in &dataset.labels {
        writer
            .write_record(&[
                label.sample_id.to_string(),
                label.object_class.clone(),
                label.size_mm.to_string(),
                label.material.name().to_string(),
                label.theta_deg.to_string(),
                label.pose_id.to_string(),
                label.noise_level_dba.to_string(),
            ])
            .map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_json = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_json)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset schema version {}",
            manifest.schema_version
        )));
    }

    let mut blob = Vec::new();
    fs::File::open(dir.join("samples.f32"))?.read_to_end(&mut blob)?;
    let expected = manifest.n_samples * manifest.sample_len * 4;
    if blob.len() != expected {
        return Err(Error::Format(format!(
            "samples.f32 has {} bytes, expected {}",
            blob.len(),
            expected
        )));
    }
    let mut recordings = Vec::with_capacity(manifest.n_samples);
    for i in 0..manifest.n_samples {
        let start = i * manifest.sample_len * 4;
        let row: Vec<f32> = blob[start..start + manifest.sample_len * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        recordings.push(row);
    }

    let mut reader = csv::Reader::from_path(dir.join("labels.csv"))
        .map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
    let mut labels = Vec::with_capacity(manifest.n_samples);
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::Format("labels.csv: short row".into()))
        };
        let object_class = field(1)?.to_string();
        let class_index = manifest
            .class_names
            .iter()
            .position(|c| *c == object_class)
            .ok_or_else(|| {
                Error::Format(format!("labels.csv: class '{object_class}' not in manifest"))
            })?;
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Format(format!("labels.csv: bad number '{s}'")))
        };
        labels.push(SampleLabel {
            sample_id: field(0)?
                .parse()
                .map_err(|_| Error::Format("labels.csv: bad sample_id".into()))?,
            object_class,
            class_index,
            size_mm: parse_f64(field(2)?)?,
            material: Material::parse(field(3)?)?,
            theta_deg: parse_f64(field(4)?)?,
            pose_id: field(5)?
                .parse()
                .map_err(|_| Error::Format("labels.csv: bad pose_id".into()))?,
            noise_level_dba: parse_f64(field(6)?)?,
        });
    }
    if labels.len() != manifest.n_samples {
        return Err(Error::Format(format!(
            "labels.csv has {} rows, expected {}",
            labels.len(),
            manifest.n_samples
        )));
    }

    Ok(Dataset {
        manifest,
        recordings,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_dataset, ScenarioKind};

    #[test]
    fn dataset_round_trips_through_disk() {
        let mut scenario = Scenario::new(ScenarioKind::MaterialsSpheres);
        scenario.poses_per_object = 2;
        scenario.samples_per_pose = 1;
        let config = GripperConfig::default();
        let dataset = generate_dataset(&scenario, &config, 17).unwrap();

        let dir = tempfile::tempdir().unwrap();
        save_dataset(&dataset, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.manifest, dataset.manifest);
        assert_eq!(loaded.labels, dataset.labels);
        assert_eq!(loaded.recordings, dataset.recordings);
    }

    #[test]
    fn serialization_is_byte_identical_across_runs() {
        let mut scenario = Scenario::new(ScenarioKind::Sizes);
        scenario.poses_per_object = 1;
        scenario.samples_per_pose = 1;
        let config = GripperConfig::default();

        let bytes_of = |seed: u64| {
            let ds = generate_dataset(&scenario, &config, seed).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_dataset(&ds, dir.path()).unwrap();
            (
                fs::read(dir.path().join("manifest.json")).unwrap(),
                fs::read(dir.path().join("samples.f32")).unwrap(),
                fs::read(dir.path().join("labels.csv")).unwrap(),
            )
        };
        assert_eq!(bytes_of(9), bytes_of(9));
        assert_ne!(bytes_of(9).1, bytes_of(10).1);
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let mut scenario = Scenario::new(ScenarioKind::MaterialsSpheres);
        scenario.poses_per_object = 1;
        scenario.samples_per_pose = 1;
        let config = GripperConfig::default();
        let dataset = generate_dataset(&scenario, &config, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&dataset, dir.path()).unwrap();
        let blob = fs::read(dir.path().join("samples.f32")).unwrap();
        fs::write(dir.path().join("samples.f32"), &blob[..blob.len() - 4]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }
}

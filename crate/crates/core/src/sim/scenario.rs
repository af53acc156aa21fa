//! Built-in experiment scenarios and dataset generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::generate_log_sweep;
use crate::sim::dataset::{Dataset, Manifest, SampleLabel};
use crate::sim::{
    derive_seed, hash_name, simulate_recording, GripperConfig, Material, Medium, ObjectState,
    PoseJitter, Shape, SignatureSpec,
};

/// Coarse geometry category used by the embedding analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeCategory {
    Spherical,
    Cylindrical,
    Other,
}

impl ShapeCategory {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeCategory::Spherical => "spherical",
            ShapeCategory::Cylindrical => "cylindrical",
            ShapeCategory::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(ShapeCategory::Spherical),
            "cylindrical" => Ok(ShapeCategory::Cylindrical),
            "other" => Ok(ShapeCategory::Other),
            other => Err(Error::Config(format!("unknown shape category '{other}'"))),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            ShapeCategory::Spherical => 0,
            ShapeCategory::Cylindrical => 1,
            ShapeCategory::Other => 2,
        }
    }
}

/// The built-in experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// 16 cube edge lengths spanning 10-30 mm; size regression.
    Sizes,
    /// One bar in 19 rotations, 9-degree steps over [0, 162]; angle regression.
    Orientation,
    /// Four materials as spheres (diameter configurable); classification.
    MaterialsSpheres,
    /// Four materials as thin plates; classification.
    MaterialsPlates,
    /// 16 everyday-object analogs, pose-randomized; classification.
    Ycb16,
    /// One recording per granular medium for the reflected-energy comparison.
    MediaEnergy,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Sizes => "sizes",
            ScenarioKind::Orientation => "orientation",
            ScenarioKind::MaterialsSpheres => "materials_spheres",
            ScenarioKind::MaterialsPlates => "materials_plates",
            ScenarioKind::Ycb16 => "ycb16",
            ScenarioKind::MediaEnergy => "media_energy",
        }
    }

    /// Accepts both the short CLI names and the long grid names.
    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sizes" | "sizes_16_cubes" => Ok(ScenarioKind::Sizes),
            "orientation" | "orientation_19_angles" => Ok(ScenarioKind::Orientation),
            "materials_spheres" => Ok(ScenarioKind::MaterialsSpheres),
            "materials_plates" => Ok(ScenarioKind::MaterialsPlates),
            "ycb16" | "ycb_16" => Ok(ScenarioKind::Ycb16),
            "media_energy" => Ok(ScenarioKind::MediaEnergy),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected one of: sizes, orientation, \
                 materials_spheres, materials_plates, ycb16, media_energy)"
            ))),
        }
    }

    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Sizes,
        ScenarioKind::Orientation,
        ScenarioKind::MaterialsSpheres,
        ScenarioKind::MaterialsPlates,
        ScenarioKind::Ycb16,
        ScenarioKind::MediaEnergy,
    ];
}

/// A scenario with its data-collection protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Random gripper poses recorded per object.
    pub poses_per_object: u32,
    /// Recordings per pose; samples within a pose differ only by
    /// measurement noise.
    pub samples_per_pose: u32,
    /// Ambient noise level during collection.
    pub noise_level_dba: f64,
    /// Sphere diameter for the materials-spheres grid.
    pub sphere_diameter_mm: f64,
    /// Class signature strength for the everyday-object analogs.
    pub class_signature_strength: f64,
    pub category_signature_strength: f64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            poses_per_object: 20,
            samples_per_pose: 2,
            noise_level_dba: 45.0,
            sphere_diameter_mm: 80.0,
            class_signature_strength: 0.20,
            category_signature_strength: 0.40,
        }
    }

    /// The 16-cube edge grid, evenly spaced over [10, 30] mm.
    pub fn size_grid_mm() -> Vec<f64> {
        (0..16).map(|k| 10.0 + 20.0 * k as f64 / 15.0).collect()
    }

    /// Grid indices held out as "unknown cubes" for the size experiment:
    /// the grid members nearest 12.5, 17.5, 22.5 and 27.5 mm.
    pub fn held_out_size_indices() -> [usize; 4] {
        [2, 6, 9, 13]
    }

    /// The 19 bar rotations: 0..162 degrees in 9-degree steps.
    pub fn theta_grid_deg() -> Vec<f64> {
        (0..19).map(|k| 9.0 * k as f64).collect()
    }

    /// Angle indices withheld for testing generalization to unseen rotations
    /// (8 of 19, interleaved so the training set brackets them).
    pub fn held_out_theta_indices() -> [usize; 8] {
        [1, 3, 5, 7, 9, 11, 13, 15]
    }

    fn objects(&self) -> Result<Vec<ObjectState>> {
        match self.kind {
            ScenarioKind::Sizes => Self::size_grid_mm()
                .iter()
                .enumerate()
                .map(|(i, &edge)| {
                    ObjectState::new(
                        format!("cube_{i:02}"),
                        Shape::Cube { edge_mm: edge },
                        Material::Plastic,
                        0.0,
                    )
                })
                .collect(),
            ScenarioKind::Orientation => {
                let bar = Shape::Bar {
                    length_mm: 270.0,
                    width_mm: 15.0,
                    height_mm: 44.0,
                };
                Self::theta_grid_deg()
                    .iter()
                    .map(|&theta| ObjectState::new("bar", bar, Material::Wood, theta))
                    .collect()
            }
            ScenarioKind::MaterialsSpheres => Material::ALL
                .iter()
                .map(|&material| {
                    ObjectState::new(
                        format!("sphere_{}", material.name()),
                        Shape::Sphere {
                            diameter_mm: self.sphere_diameter_mm,
                        },
                        material,
                        0.0,
                    )
                })
                .collect(),
            ScenarioKind::MaterialsPlates => Material::ALL
                .iter()
                .map(|&material| {
                    ObjectState::new(
                        format!("plate_{}", material.name()),
                        Shape::Plate {
                            width_mm: 100.0,
                            length_mm: 100.0,
                        },
                        material,
                        0.0,
                    )
                })
                .collect(),
            ScenarioKind::Ycb16 => Ok(self.analog_objects()),
            ScenarioKind::MediaEnergy => {
                // One reference object; the medium is varied instead.
                Ok(vec![ObjectState::new(
                    "reference_sphere",
                    Shape::Sphere { diameter_mm: 60.0 },
                    Material::Plastic,
                    0.0,
                )?])
            }
        }
    }

    /// The 16 everyday-object analogs: six spherical, six cylindrical, four
    /// diverse. Pairs like golf ball / strawberry are deliberately close in
    /// size, material and category so they remain confusable.
    fn analog_objects(&self) -> Vec<ObjectState> {
        analog_table()
            .iter()
            .enumerate()
            .map(|(index, entry)| {
                ObjectState::new(entry.name, entry.shape, entry.material, 0.0)
                    .expect("analog table entries are valid")
                    .with_signature(SignatureSpec {
                        class_seed: derive_seed(&[0xC1A5, index as u64]),
                        class_strength: self.class_signature_strength,
                        category_seed: derive_seed(&[0xCA7E, entry.category.index() as u64]),
                        category_strength: self.category_signature_strength,
                    })
            })
            .collect()
    }

    /// Category assignment per class, parallel to the class list.
    pub fn class_categories(&self) -> Vec<ShapeCategory> {
        match self.kind {
            ScenarioKind::Ycb16 => analog_table().iter().map(|e| e.category).collect(),
            _ => Vec::new(),
        }
    }
}

struct AnalogEntry {
    name: &'static str,
    category: ShapeCategory,
    shape: Shape,
    material: Material,
}

fn analog_table() -> [AnalogEntry; 16] {
    use Material::*;
    use ShapeCategory::*;
    [
        AnalogEntry {
            name: "orange",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 73.0 },
            material: Plastic,
        },
        AnalogEntry {
            name: "baseball",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 74.0 },
            material: Wood,
        },
        AnalogEntry {
            name: "tennis_ball",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 65.0 },
            material: Plastic,
        },
        AnalogEntry {
            name: "racquetball",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 57.0 },
            material: Plastic,
        },
        AnalogEntry {
            name: "golf_ball",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 43.0 },
            material: Plastic,
        },
        AnalogEntry {
            name: "strawberry",
            category: Spherical,
            shape: Shape::Sphere { diameter_mm: 45.0 },
            material: Plastic,
        },
        AnalogEntry {
            name: "screw",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 10.0,
                length_mm: 45.0,
            },
            material: Metal,
        },
        AnalogEntry {
            name: "spoon",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 15.0,
                length_mm: 150.0,
            },
            material: Metal,
        },
        AnalogEntry {
            name: "glasses_case",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 60.0,
                length_mm: 150.0,
            },
            material: Plastic,
        },
        AnalogEntry {
            name: "marker",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 18.0,
                length_mm: 120.0,
            },
            material: Plastic,
        },
        AnalogEntry {
            name: "screwdriver",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 25.0,
                length_mm: 180.0,
            },
            material: Plastic,
        },
        AnalogEntry {
            name: "banana",
            category: Cylindrical,
            shape: Shape::Cylinder {
                diameter_mm: 35.0,
                length_mm: 180.0,
            },
            material: Wood,
        },
        AnalogEntry {
            name: "foam_brick",
            category: Other,
            shape: Shape::Bar {
                length_mm: 75.0,
                width_mm: 50.0,
                height_mm: 50.0,
            },
            material: Styrofoam,
        },
        AnalogEntry {
            name: "spam_can",
            category: Other,
            shape: Shape::Bar {
                length_mm: 80.0,
                width_mm: 55.0,
                height_mm: 70.0,
            },
            material: Metal,
        },
        AnalogEntry {
            name: "lock",
            category: Other,
            shape: Shape::Bar {
                length_mm: 45.0,
                width_mm: 20.0,
                height_mm: 60.0,
            },
            material: Metal,
        },
        AnalogEntry {
            name: "mug",
            category: Other,
            shape: Shape::Cylinder {
                diameter_mm: 80.0,
                length_mm: 95.0,
            },
            material: Wood,
        },
    ]
}

// Seed-stream tags keeping pose and noise draws independent.
const POSE_TAG: u64 = 0x505345; // "PSE"
const NOISE_TAG: u64 = 0x4E5345; // "NSE"

/// Pose jitter for (object, pose), drawn from the master seed by the fixed
/// splitting rule. Pose 0 of every object is the centered reference pose.
pub fn draw_pose(master_seed: u64, object_class: &str, pose_id: u32) -> PoseJitter {
    let seed = derive_seed(&[
        master_seed,
        POSE_TAG,
        hash_name(object_class),
        u64::from(pose_id),
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PoseJitter {
        z_rotation_deg: rng.gen_range(-90.0..=90.0),
        translation_x_cm: rng.gen_range(-1.0..=1.0),
        translation_y_cm: rng.gen_range(-1.0..=1.0),
        pose_id,
    }
}

/// Measurement-noise seed for (object, pose, sample).
pub fn sample_noise_seed(master_seed: u64, object_class: &str, pose_id: u32, sample: u32) -> u64 {
    derive_seed(&[
        master_seed,
        NOISE_TAG,
        hash_name(object_class),
        u64::from(pose_id),
        u64::from(sample),
    ])
}

/// Generates a labeled dataset for the scenario. Samples are ordered by
/// (object, pose, sample); generation is bit-reproducible and may run in
/// parallel because every sample derives its seeds independently.
pub fn generate_dataset(
    scenario: &Scenario,
    config: &GripperConfig,
    master_seed: u64,
) -> Result<Dataset> {
    config.validate()?;
    let objects = scenario.objects()?;
    let sweep = generate_log_sweep(&config.sweep, config.sample_rate)?;

    struct Job {
        state: ObjectState,
        jitter: PoseJitter,
        noise_seed: u64,
        medium: Medium,
        class_index: usize,
    }

    let jobs: Vec<Job> = if scenario.kind == ScenarioKind::MediaEnergy {
        // One clean recording per medium, fixed reference scene.
        let state = objects[0].clone();
        Medium::ALL
            .iter()
            .enumerate()
            .map(|(i, &medium)| Job {
                state: state.clone(),
                jitter: PoseJitter::zero(),
                noise_seed: 0,
                medium,
                class_index: i,
            })
            .collect()
    } else {
        let mut jobs = Vec::new();
        for (class_index, state) in objects.iter().enumerate() {
            // The orientation scenario is one physical object in 19
            // placements; every placement keeps its own pose draws.
            let pose_key = if scenario.kind == ScenarioKind::Orientation {
                format!("{}@{}", state.object_class, state.orientation_theta)
            } else {
                state.object_class.clone()
            };
            for pose_id in 0..scenario.poses_per_object {
                let jitter = draw_pose(master_seed, &pose_key, pose_id);
                for sample in 0..scenario.samples_per_pose {
                    jobs.push(Job {
                        state: state.clone(),
                        jitter,
                        noise_seed: sample_noise_seed(master_seed, &pose_key, pose_id, sample),
                        medium: config.medium,
                        class_index,
                    });
                }
            }
        }
        jobs
    };

    let media_energy = scenario.kind == ScenarioKind::MediaEnergy;
    let recordings: Vec<Vec<f32>> = jobs
        .par_iter()
        .map(|job| {
            let mut cfg = config.clone();
            cfg.medium = job.medium;
            if media_energy {
                cfg.noise.sigma_at_floor = 0.0;
            }
            simulate_recording(
                &sweep,
                &job.state,
                &job.jitter,
                &cfg,
                scenario.noise_level_dba,
                job.noise_seed,
            )
            .map(|clip| clip.to_f32())
        })
        .collect::<Result<_>>()?;

    let labels: Vec<SampleLabel> = jobs
        .iter()
        .enumerate()
        .map(|(sample_id, job)| SampleLabel {
            sample_id,
            object_class: if media_energy {
                job.medium.name().to_string()
            } else {
                job.state.object_class.clone()
            },
            class_index: job.class_index,
            size_mm: job.state.size_mm,
            material: job.state.material,
            theta_deg: job.state.orientation_theta,
            pose_id: job.jitter.pose_id,
            noise_level_dba: scenario.noise_level_dba,
        })
        .collect();

    let class_names: Vec<String> = if media_energy {
        Medium::ALL.iter().map(|m| m.name().to_string()).collect()
    } else {
        objects
            .iter()
            .map(|o| o.object_class.clone())
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Vec::new(), |mut acc, name| {
                if !acc.contains(&name) {
                    acc.push(name);
                }
                acc
            })
    };

    let sample_len = recordings.first().map(|r| r.len()).unwrap_or(0);
    let manifest = Manifest::build(
        scenario,
        config,
        master_seed,
        recordings.len(),
        sample_len,
        class_names,
        scenario
            .class_categories()
            .iter()
            .map(|c| c.name().to_string())
            .collect(),
    );

    Ok(Dataset {
        manifest,
        recordings,
        labels,
    })
}

/// Reconstructs the object state for one labeled sample, for evaluation-only
/// re-rendering (e.g. at elevated noise levels).
pub fn state_for_label(scenario: &Scenario, label: &SampleLabel) -> Result<ObjectState> {
    let objects = scenario.objects()?;
    match scenario.kind {
        ScenarioKind::Orientation => objects
            .into_iter()
            .find(|o| (o.orientation_theta - label.theta_deg).abs() < 1e-9)
            .ok_or_else(|| Error::Label(format!("no object at theta {}", label.theta_deg))),
        _ => objects
            .into_iter()
            .find(|o| o.object_class == label.object_class)
            .ok_or_else(|| Error::Label(format!("unknown class '{}'", label.object_class))),
    }
}

/// Re-renders one labeled sample at a chosen noise level using the same seed
/// chain as generation, so re-rendering at the original level is an identity.
pub fn rerender_sample(
    scenario: &Scenario,
    config: &GripperConfig,
    master_seed: u64,
    label: &SampleLabel,
    sample_index_in_pose: u32,
    noise_level_dba: f64,
) -> Result<Vec<f32>> {
    let state = state_for_label(scenario, label)?;
    let pose_key = if scenario.kind == ScenarioKind::Orientation {
        format!("{}@{}", state.object_class, state.orientation_theta)
    } else {
        state.object_class.clone()
    };
    let jitter = draw_pose(master_seed, &pose_key, label.pose_id);
    let noise_seed =
        sample_noise_seed(master_seed, &pose_key, label.pose_id, sample_index_in_pose);
    let sweep = generate_log_sweep(&config.sweep, config.sample_rate)?;
    let clip = simulate_recording(&sweep, &state, &jitter, config, noise_level_dba, noise_seed)?;
    Ok(clip.to_f32())
}

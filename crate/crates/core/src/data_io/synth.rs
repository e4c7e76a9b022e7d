use std::f64::consts::{PI, TAU};

use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_transform, jitter, normalize_unit_sphere, random_rotation, PointCloud, RigidTransform, RotationAxes};
use crate::net::SegmentationConfig;

/// Jitter clip used by the generators.
pub const JITTER_CLIP: f64 = 0.05;
pub const MIN_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Sphere,
    /// Axis-aligned box with mildly varying side lengths.
    Cube,
    Cylinder,
    Plane,
    Torus,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Cube,
        ShapeKind::Cylinder,
        ShapeKind::Plane,
        ShapeKind::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cube => "cube",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Plane => "plane",
            ShapeKind::Torus => "torus",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name || (name == "box" && *s == ShapeKind::Cube))
            .ok_or_else(|| Error::invalid(format!("unknown shape `{name}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
}

/// Clouds of one split with class labels and optional per-point part labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCloudSet {
    pub split: Split,
    pub clouds: Vec<PointCloud>,
    pub labels: Vec<usize>,
    pub parts: Option<Vec<Vec<usize>>>,
    pub class_names: Vec<String>,
    pub seed: u64,
}

impl LabeledCloudSet {
    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.clouds.len() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} clouds",
                self.labels.len(),
                self.clouds.len()
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l >= self.class_count()) {
            return Err(Error::InvalidData(format!("label {bad} >= {} classes", self.class_count())));
        }
        if let Some(parts) = &self.parts {
            if parts.len() != self.clouds.len() || parts.iter().zip(&self.clouds).any(|(p, c)| p.len() != c.len()) {
                return Err(Error::InvalidData("part label rows do not match cloud sizes".into()));
            }
        }
        Ok(())
    }

    /// `(cloud, label)` pairs for classification training.
    pub fn classification_items(&self) -> Vec<(PointCloud, usize)> {
        self.clouds.iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    /// `(cloud, category, parts)` triples; empty if the set has no parts.
    pub fn segmentation_items(&self) -> Vec<(PointCloud, usize, Vec<usize>)> {
        match &self.parts {
            None => Vec::new(),
            Some(parts) => self
                .clouds
                .iter()
                .zip(&self.labels)
                .zip(parts)
                .map(|((c, &l), p)| (c.clone(), l, p.clone()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: LabeledCloudSet,
    pub test: LabeledCloudSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ShapeKind>,
    pub n_points: usize,
    pub per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// 5 classes × 125 clouds of 256 points: 500 train / 125 test.
    fn default() -> Self {
        Self {
            classes: ShapeKind::ALL.to_vec(),
            n_points: 256,
            per_class: 125,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartsSpec {
    pub n_points: usize,
    pub per_category: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PartsSpec {
    fn default() -> Self {
        Self {
            n_points: 256,
            per_category: 50,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

/// Independent stream for item `item` of stream `stream` under `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(0x1_0000_0000).wrapping_add(item));
    rng
}

fn unit_sphere_point(rng: &mut ChaCha8Rng) -> Point3<f64> {
    loop {
        let v = nalgebra::Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return Point3::from(v / n);
        }
    }
}

/// Area-uniform samples of one shape before normalization. Spheres have
/// radius exactly 1; the other shapes vary their proportions mildly.
pub fn sample_shape(kind: ShapeKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    match kind {
        ShapeKind::Sphere => (0..n).map(|_| unit_sphere_point(rng)).collect(),
        ShapeKind::Cube => {
            let h = [
                rng.random_range(0.8..1.2),
                rng.random_range(0.8..1.2),
                rng.random_range(0.8..1.2),
            ];
            // face pairs normal to x, y, z with areas 4·h_a·h_b
            let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
            let total: f64 = areas.iter().sum();
            (0..n)
                .map(|_| {
                    let mut u = rng.random::<f64>() * total;
                    let mut axis = 0;
                    while axis < 2 && u >= areas[axis] {
                        u -= areas[axis];
                        axis += 1;
                    }
                    let mut p = [0.0; 3];
                    for (a, v) in p.iter_mut().enumerate() {
                        *v = if a == axis {
                            if rng.random::<bool>() {
                                h[a]
                            } else {
                                -h[a]
                            }
                        } else {
                            rng.random_range(-h[a]..h[a])
                        };
                    }
                    Point3::new(p[0], p[1], p[2])
                })
                .collect()
        }
        ShapeKind::Cylinder => sample_cylinder(n, rng).0,
        ShapeKind::Plane => {
            let (a, b) = (rng.random_range(0.8..1.2), rng.random_range(0.8..1.2));
            (0..n)
                .map(|_| Point3::new(rng.random_range(-a..a), rng.random_range(-b..b), 0.0))
                .collect()
        }
        ShapeKind::Torus => {
            let r_major = 1.0;
            let r_minor = rng.random_range(0.25..0.45);
            let mut pts = Vec::with_capacity(n);
            while pts.len() < n {
                let theta = rng.random_range(0.0..TAU);
                let phi = rng.random_range(0.0..TAU);
                // accept with probability proportional to the local area element
                let w = (r_major + r_minor * theta.cos()) / (r_major + r_minor);
                if rng.random::<f64>() < w {
                    let ring = r_major + r_minor * theta.cos();
                    pts.push(Point3::new(ring * phi.cos(), ring * phi.sin(), r_minor * theta.sin()));
                }
            }
            pts
        }
    }
}

/// Cylinder along z; the flag marks points on the caps.
fn sample_cylinder(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point3<f64>>, Vec<bool>) {
    let r = rng.random_range(0.4..0.6);
    let h = rng.random_range(0.8..1.2);
    let body = 2.0 * PI * r * (2.0 * h);
    let caps = 2.0 * PI * r * r;
    let mut pts = Vec::with_capacity(n);
    let mut on_cap = Vec::with_capacity(n);
    for _ in 0..n {
        let phi = rng.random_range(0.0..TAU);
        if rng.random::<f64>() * (body + caps) < body {
            pts.push(Point3::new(r * phi.cos(), r * phi.sin(), rng.random_range(-h..h)));
            on_cap.push(false);
        } else {
            let rho = r * rng.random::<f64>().sqrt();
            let z = if rng.random::<bool>() { h } else { -h };
            pts.push(Point3::new(rho * phi.cos(), rho * phi.sin(), z));
            on_cap.push(true);
        }
    }
    (pts, on_cap)
}

fn finish_cloud(points: Vec<Point3<f64>>, sigma: f64, jitter_seed: u64) -> Result<PointCloud> {
    let cloud = normalize_unit_sphere(&PointCloud::new(points)?);
    if sigma > 0.0 {
        jitter(&cloud, sigma, JITTER_CLIP, jitter_seed)
    } else {
        Ok(cloud)
    }
}

/// Stratified 80/20 split of `per_class` items per class, each split in
/// seeded shuffled order. Returns item keys `(class, index)`.
fn split_keys(classes: usize, per_class: usize, seed: u64) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut rng = stream_rng(seed, 0, 0);
    let n_train = (per_class * 4).div_ceil(5);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..per_class).collect();
        idx.shuffle(&mut rng);
        train.extend(idx[..n_train].iter().map(|&i| (c, i)));
        test.extend(idx[n_train..].iter().map(|&i| (c, i)));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    (train, test)
}

fn check_common(n_points: usize, per_class: usize, sigma: f64) -> Result<()> {
    if n_points < MIN_POINTS {
        return Err(Error::invalid(format!("n_points = {n_points} is below the minimum of {MIN_POINTS}")));
    }
    if per_class == 0 {
        return Err(Error::invalid("need at least one cloud per class"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma {sigma} must be >= 0")));
    }
    Ok(())
}

/// Labeled shape corpus; a pure function of `spec`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    check_common(spec.n_points, spec.per_class, spec.noise_sigma)?;
    if spec.classes.is_empty() {
        return Err(Error::invalid("no classes requested"));
    }
    let class_names: Vec<String> = spec.classes.iter().map(|c| c.name().to_string()).collect();
    let make = |&(c, i): &(usize, usize)| -> Result<PointCloud> {
        let mut rng = stream_rng(spec.seed, 1 + c as u64, i as u64);
        let pts = sample_shape(spec.classes[c], spec.n_points, &mut rng);
        finish_cloud(pts, spec.noise_sigma, rng.random())
    };
    let (train_keys, test_keys) = split_keys(spec.classes.len(), spec.per_class, spec.seed);
    let build = |keys: &[(usize, usize)], split| -> Result<LabeledCloudSet> {
        Ok(LabeledCloudSet {
            split,
            clouds: keys.iter().map(make).collect::<Result<_>>()?,
            labels: keys.iter().map(|k| k.0).collect(),
            parts: None,
            class_names: class_names.clone(),
            seed: spec.seed,
        })
    };
    Ok(Dataset {
        train: build(&train_keys, Split::Train)?,
        test: build(&test_keys, Split::Test)?,
    })
}

pub const PART_CATEGORIES: [&str; 2] = ["hemispheres", "capped-cylinder"];

/// Parts of [`synth_parts`]: upper/lower hemisphere (0, 1) and cylinder
/// body/caps (2, 3).
pub fn parts_segmentation_config(widths: Vec<usize>) -> SegmentationConfig {
    SegmentationConfig {
        categories: 2,
        parts: 4,
        category_parts: vec![vec![0, 1], vec![2, 3]],
        widths,
    }
}

/// Two-category part corpus with per-point labels fixed before
/// normalization and jitter.
pub fn synth_parts(spec: &PartsSpec) -> Result<Dataset> {
    check_common(spec.n_points, spec.per_category, spec.noise_sigma)?;
    let class_names: Vec<String> = PART_CATEGORIES.iter().map(|s| s.to_string()).collect();
    let make = |&(c, i): &(usize, usize)| -> Result<(PointCloud, Vec<usize>)> {
        let mut rng = stream_rng(spec.seed, 101 + c as u64, i as u64);
        let (pts, labels) = if c == 0 {
            let pts = sample_shape(ShapeKind::Sphere, spec.n_points, &mut rng);
            let labels = pts.iter().map(|p| if p.z >= 0.0 { 0 } else { 1 }).collect();
            (pts, labels)
        } else {
            let (pts, cap) = sample_cylinder(spec.n_points, &mut rng);
            (pts, cap.iter().map(|&b| if b { 3 } else { 2 }).collect())
        };
        Ok((finish_cloud(pts, spec.noise_sigma, rng.random())?, labels))
    };
    let (train_keys, test_keys) = split_keys(2, spec.per_category, spec.seed);
    let build = |keys: &[(usize, usize)], split| -> Result<LabeledCloudSet> {
        let (clouds, parts): (Vec<_>, Vec<_>) = keys.iter().map(make).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Ok(LabeledCloudSet {
            split,
            clouds,
            labels: keys.iter().map(|k| k.0).collect(),
            parts: Some(parts),
            class_names: class_names.clone(),
            seed: spec.seed,
        })
    };
    Ok(Dataset {
        train: build(&train_keys, Split::Train)?,
        test: build(&test_keys, Split::Test)?,
    })
}

/// Rotation-augmentation regime for train / test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "z/z")]
    ZZ,
    #[serde(rename = "z/s")]
    ZS,
    #[serde(rename = "s/s")]
    SS,
    #[serde(rename = "0/s")]
    OS,
    #[serde(rename = "none")]
    None,
}

impl Protocol {
    pub const TABLE: [Protocol; 4] = [Protocol::ZZ, Protocol::ZS, Protocol::SS, Protocol::OS];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::ZZ => "z/z",
            Protocol::ZS => "z/s",
            Protocol::SS => "s/s",
            Protocol::OS => "0/s",
            Protocol::None => "none",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [Protocol::ZZ, Protocol::ZS, Protocol::SS, Protocol::OS, Protocol::None]
            .into_iter()
            .find(|p| p.name() == name.trim())
            .ok_or_else(|| Error::invalid(format!("unknown protocol `{name}` (expected z/z, z/s, s/s, 0/s or none)")))
    }

    /// Comma-separated list such as `z/z,0/s`.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',').filter(|s| !s.trim().is_empty()).map(Self::parse).collect()
    }

    /// Rotation family applied to a split, `None` for no rotation.
    pub fn axes(self, split: Split) -> Option<RotationAxes> {
        use Protocol::*;
        match (self, split) {
            (None, _) | (OS, Split::Train) => Option::None,
            (ZZ, _) | (ZS, Split::Train) => Some(RotationAxes::Z),
            (ZS, Split::Test) | (SS, _) | (OS, Split::Test) => Some(RotationAxes::EulerXyz),
        }
    }
}

/// The rotation `apply_protocol` gives cloud `index` of `split`.
pub fn protocol_rotation(protocol: Protocol, split: Split, index: usize, seed: u64) -> Option<RigidTransform> {
    let axes = protocol.axes(split)?;
    let stream = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let s: u64 = stream_rng(seed, 1000 + stream, index as u64).random();
    Some(random_rotation(axes, s))
}

fn rotate_set(set: &LabeledCloudSet, protocol: Protocol, seed: u64) -> LabeledCloudSet {
    let mut out = set.clone();
    for (i, cloud) in out.clouds.iter_mut().enumerate() {
        if let Some(t) = protocol_rotation(protocol, set.split, i, seed) {
            *cloud = apply_transform(cloud, &t);
        }
    }
    out
}

/// Rotates each cloud once per the protocol. Labels ride with their points.
pub fn apply_protocol(data: &Dataset, protocol: Protocol, seed: u64) -> Dataset {
    Dataset {
        train: rotate_set(&data.train, protocol, seed),
        test: rotate_set(&data.test, protocol, seed),
    }
}

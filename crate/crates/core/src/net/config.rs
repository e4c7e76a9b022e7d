use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which neighbor sets the GSC layers aggregate over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branches {
    /// Euclidean kNN only.
    #[serde(rename = "eu")]
    Euclidean,
    /// Eigenvalue-space kNN only.
    #[serde(rename = "ei")]
    Eigen,
    #[serde(rename = "eu+ei")]
    Both,
}

impl Branches {
    pub fn euclidean(self) -> bool {
        matches!(self, Branches::Euclidean | Branches::Both)
    }

    pub fn eigen(self) -> bool {
        matches!(self, Branches::Eigen | Branches::Both)
    }
}

/// Edge features fed to the first GSC layer.
///
/// The Euclidean branch uses the recipe; the eigen branch always groups
/// `(λ_p - λ_i, λ_p)` over eigen neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputRecipe {
    /// `(x_j - x_i, x_j)`, 6 channels.
    #[serde(rename = "xyz")]
    Coords,
    /// `(x_j - x_i, x_j, λ_j - λ_i, λ_j)`, 12 channels.
    #[serde(rename = "xyz+eig")]
    CoordsEigen,
    /// `(x_j - x_i, x_j, λ_j - λ_i, λ_j, d_ij)`, 13 channels.
    #[serde(rename = "xyz+eig+dist")]
    CoordsEigenDist,
    /// `(λ_j - λ_i, λ_j)`, 6 channels, no coordinates at all.
    #[serde(rename = "eig")]
    EigenOnly,
}

impl InputRecipe {
    pub const ALL: [InputRecipe; 4] = [
        InputRecipe::Coords,
        InputRecipe::CoordsEigen,
        InputRecipe::CoordsEigenDist,
        InputRecipe::EigenOnly,
    ];

    pub fn euclidean_channels(self) -> usize {
        match self {
            InputRecipe::Coords => 6,
            InputRecipe::CoordsEigen => 12,
            InputRecipe::CoordsEigenDist => 13,
            InputRecipe::EigenOnly => 6,
        }
    }

    pub fn eigen_channels(self) -> usize {
        6
    }

    pub fn name(self) -> &'static str {
        match self {
            InputRecipe::Coords => "xyz",
            InputRecipe::CoordsEigen => "xyz+eig",
            InputRecipe::CoordsEigenDist => "xyz+eig+dist",
            InputRecipe::EigenOnly => "eig",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown input recipe `{name}`")))
    }
}

/// Sampler used between encoder levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Fps,
    /// Every `⌊N/m⌋`-th point: the "FPS off" ablation arm.
    Stride,
}

/// One encoder level: its point count and the per-edge MLP widths. The last
/// width is the level's output channel count `C_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub points: usize,
    pub widths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Number of object categories (length of the one-hot label).
    pub categories: usize,
    /// Total number of part labels across all categories.
    pub parts: usize,
    /// Part labels belonging to each category, used by mIoU.
    pub category_parts: Vec<Vec<usize>>,
    /// Hidden widths of the per-point MLP.
    pub widths: Vec<usize>,
}

fn default_power() -> f64 {
    crate::sampling::DEFAULT_INTERPOLATION_POWER
}

/// Everything that determines the network's shape and its non-learned
/// preprocessing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GscConfig {
    pub k1: usize,
    pub k2: usize,
    pub levels: Vec<LevelConfig>,
    pub branches: Branches,
    pub recipe: InputRecipe,
    pub sampler: Sampler,
    /// Hidden widths of the fully-connected classification head.
    pub head_widths: Vec<usize>,
    pub dropout: f64,
    pub classes: usize,
    #[serde(default)]
    pub segmentation: Option<SegmentationConfig>,
    #[serde(default = "default_power")]
    pub interpolation_power: f64,
    /// Standardize each level-1 input channel per cloud.
    #[serde(default)]
    pub standardize_inputs: bool,
}

impl Default for GscConfig {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 20,
            levels: vec![
                LevelConfig {
                    points: 1024,
                    widths: vec![64],
                },
                LevelConfig {
                    points: 512,
                    widths: vec![128],
                },
                LevelConfig {
                    points: 256,
                    widths: vec![256],
                },
            ],
            branches: Branches::Both,
            recipe: InputRecipe::CoordsEigenDist,
            sampler: Sampler::Fps,
            head_widths: vec![128],
            dropout: 0.5,
            classes: 5,
            segmentation: None,
            interpolation_power: default_power(),
            standardize_inputs: false,
        }
    }
}

impl GscConfig {
    /// Defaults scaled down for 256-point clouds on a CPU: levels
    /// 256-128-64 with widths 32-64-128.
    pub fn desk() -> Self {
        let mut c = Self::default();
        for (level, (points, width)) in c.levels.iter_mut().zip([(256, 32), (128, 64), (64, 128)]) {
            level.points = points;
            level.widths = vec![width];
        }
        c.head_widths = vec![64];
        c
    }

    /// Three levels of 64-32-16 points, k = 10, widths 8-16-32 and three
    /// classes: small enough to check every gradient entry numerically.
    pub fn toy() -> Self {
        let mut c = Self::default();
        for (level, (points, width)) in c.levels.iter_mut().zip([(64, 8), (32, 16), (16, 32)]) {
            level.points = points;
            level.widths = vec![width];
        }
        c.k1 = 10;
        c.k2 = 10;
        c.head_widths = vec![16];
        c.classes = 3;
        c
    }

    /// Output width of every level.
    pub fn level_widths(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| *l.widths.last().expect("validated"))
            .collect()
    }

    /// Width of the pooled global descriptor: `Σ_l 2·C_l`.
    pub fn global_width(&self) -> usize {
        self.level_widths().iter().map(|w| 2 * w).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::invalid("config needs at least one level"));
        }
        if self.k1 == 0 || self.k2 == 0 {
            return Err(Error::invalid("k1 and k2 must be positive"));
        }
        let mut prev = usize::MAX;
        for (l, level) in self.levels.iter().enumerate() {
            if level.widths.is_empty() || level.widths.contains(&0) {
                return Err(Error::invalid(format!("level {} widths must be non-empty and positive", l + 1)));
            }
            if self.branches == Branches::Both && level.widths.last().unwrap() % 2 != 0 {
                return Err(Error::invalid(format!(
                    "level {} output width must be even to split across two branches",
                    l + 1
                )));
            }
            if level.points > prev {
                return Err(Error::invalid(format!("level {} has more points than level {}", l + 1, l)));
            }
            let k_max = if self.branches.euclidean() { self.k1 } else { 0 }.max(if self.branches.eigen() {
                self.k2
            } else {
                0
            });
            // descriptors always need k1 Euclidean neighbors
            if level.points <= self.k1.max(k_max) {
                return Err(Error::invalid(format!(
                    "level {} has {} points, needs more than k = {}",
                    l + 1,
                    level.points,
                    self.k1.max(k_max)
                )));
            }
            prev = level.points;
        }
        if self.head_widths.contains(&0) || self.classes == 0 {
            return Err(Error::invalid("head widths and class count must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.interpolation_power > 0.0) {
            return Err(Error::invalid("interpolation power must be positive"));
        }
        if let Some(seg) = &self.segmentation {
            if seg.categories == 0 || seg.parts == 0 || seg.widths.contains(&0) {
                return Err(Error::invalid("segmentation sizes must be positive"));
            }
            if seg.category_parts.len() != seg.categories {
                return Err(Error::invalid("category_parts needs one entry per category"));
            }
            if seg.category_parts.iter().flatten().any(|&p| p >= seg.parts) {
                return Err(Error::invalid("category_parts references an unknown part"));
            }
            if self.levels.iter().skip(1).any(|l| l.points < 3) {
                return Err(Error::invalid("segmentation interpolation needs at least 3 points per level"));
            }
        }
        Ok(())
    }
}

use super::PipelineError;
use crate::constitutive::MaterialSet;
use crate::imaging::{CrackThreshold, ImageFormat, RangePolicy};
use crate::kv::KvFile;
use crate::rve::{GenConfig, NndMetric, RveSpec};
use crate::solver::{LoadSchedule, MeshOptions};
use std::path::{Path, PathBuf};

/// Keys accepted in a pipeline configuration file.
pub const CONFIG_KEYS: &[&str] = &[
    "width",
    "height",
    "n_fibers",
    "fiber_radius",
    "min_gap",
    "boundary",
    "nnd_metric",
    "kl_threshold",
    "perturb_radius",
    "max_iterations",
    "materials",
    "target_strain",
    "increments",
    "max_cutbacks",
    "elems_per_diameter",
    "max_elements",
    "interphase",
    "image_size",
    "stress_range",
    "crack_threshold",
    "image_format",
    "n_samples",
    "n_val",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub spec: RveSpec,
    /// Generator settings. The seed is replaced per sample.
    pub gen: GenConfig,
    /// Material file as written in the config, if any.
    pub materials_path: Option<PathBuf>,
    pub materials: MaterialSet,
    pub schedule: LoadSchedule,
    pub mesh: MeshOptions,
    pub image_size: u32,
    /// `None` means `[0, 1.5·σt]` of the matrix.
    pub stress_range: Option<RangePolicy>,
    pub crack_threshold: CrackThreshold,
    pub image_format: ImageFormat,
    pub n_samples: usize,
    pub n_val: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let spec = RveSpec::default();
        Self {
            spec,
            gen: GenConfig::for_spec(&spec),
            materials_path: None,
            materials: MaterialSet::default(),
            schedule: LoadSchedule::default(),
            mesh: MeshOptions::default(),
            image_size: crate::imaging::IMAGE_SIZE,
            stress_range: None,
            crack_threshold: CrackThreshold::default(),
            image_format: ImageFormat::Png,
            n_samples: 10,
            n_val: 2,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file. A relative `materials` path resolves against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let kv = KvFile::parse(text)?;
        kv.ensure_known(CONFIG_KEYS)?;
        let mut c = Self::default();
        kv.read_into("width", &mut c.spec.width)?;
        kv.read_into("height", &mut c.spec.height)?;
        kv.read_into("n_fibers", &mut c.spec.n_fibers)?;
        kv.read_into("fiber_radius", &mut c.spec.fiber_radius)?;
        kv.read_into("min_gap", &mut c.spec.min_gap)?;
        c.gen = GenConfig::for_spec(&c.spec);
        kv.read_into("boundary", &mut c.gen.boundary)?;
        if let Some(m) = kv.get_str("nnd_metric") {
            c.gen.metric = match m {
                "center" => NndMetric::CenterToCenter,
                "gap" => NndMetric::SurfaceGap,
                _ => return Err(PipelineError::Config(format!("unknown nnd_metric {m:?} (center | gap)"))),
            };
        }
        kv.read_into("kl_threshold", &mut c.gen.kl_threshold)?;
        kv.read_into("perturb_radius", &mut c.gen.perturb_radius)?;
        kv.read_into("max_iterations", &mut c.gen.max_iterations)?;
        if let Some(p) = kv.get_str("materials") {
            let full = base.join(p);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| PipelineError::Config(format!("materials {}: {e}", full.display())))?;
            c.materials = MaterialSet::parse(&text)?;
            c.materials_path = Some(PathBuf::from(p));
        }
        kv.read_into("target_strain", &mut c.schedule.target_strain)?;
        kv.read_into("increments", &mut c.schedule.increments)?;
        kv.read_into("max_cutbacks", &mut c.schedule.max_cutbacks)?;
        kv.read_into("elems_per_diameter", &mut c.mesh.elems_per_diameter)?;
        kv.read_into("max_elements", &mut c.mesh.max_elements)?;
        kv.read_into("interphase", &mut c.mesh.interphase)?;
        kv.read_into("image_size", &mut c.image_size)?;
        if let Some(r) = kv.get_str("stress_range") {
            c.stress_range = match r {
                "fixed" => None,
                "minmax" => Some(RangePolicy::MinMax),
                _ => return Err(PipelineError::Config(format!("unknown stress_range {r:?} (fixed | minmax)"))),
            };
        }
        kv.read_into("crack_threshold", &mut c.crack_threshold)?;
        if let Some(f) = kv.get_str("image_format") {
            c.image_format = match f {
                "png" => ImageFormat::Png,
                "jpeg" | "jpg" => ImageFormat::Jpeg,
                _ => return Err(PipelineError::Config(format!("unknown image_format {f:?} (png | jpeg)"))),
            };
        }
        kv.read_into("n_samples", &mut c.n_samples)?;
        kv.read_into("n_val", &mut c.n_val)?;
        kv.read_into("seed", &mut c.seed)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.spec.validate()?;
        self.gen.validate()?;
        self.schedule.validate()?;
        self.materials.validate()?;
        if self.image_size == 0 {
            return Err(PipelineError::Config("image_size must be positive".into()));
        }
        Ok(())
    }

    pub fn stress_range(&self) -> RangePolicy {
        self.stress_range
            .unwrap_or_else(|| RangePolicy::for_tensile_strength(self.materials.matrix.sigma_t))
    }

    /// Config text that reproduces this run, seed included.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("width", self.spec.width.to_string());
        put("height", self.spec.height.to_string());
        put("n_fibers", self.spec.n_fibers.to_string());
        put("fiber_radius", self.spec.fiber_radius.to_string());
        put("min_gap", self.spec.min_gap.to_string());
        put("boundary", self.gen.boundary.as_str().to_string());
        let metric = match self.gen.metric {
            NndMetric::CenterToCenter => "center",
            NndMetric::SurfaceGap => "gap",
        };
        put("nnd_metric", metric.to_string());
        put("kl_threshold", self.gen.kl_threshold.to_string());
        put("perturb_radius", self.gen.perturb_radius.to_string());
        put("max_iterations", self.gen.max_iterations.to_string());
        if let Some(p) = &self.materials_path {
            put("materials", p.display().to_string());
        }
        put("target_strain", self.schedule.target_strain.to_string());
        put("increments", self.schedule.increments.to_string());
        put("max_cutbacks", self.schedule.max_cutbacks.to_string());
        put("elems_per_diameter", self.mesh.elems_per_diameter.to_string());
        put("max_elements", self.mesh.max_elements.to_string());
        put("interphase", self.mesh.interphase.to_string());
        put("image_size", self.image_size.to_string());
        let range = match self.stress_range {
            Some(RangePolicy::MinMax) => "minmax",
            _ => "fixed",
        };
        put("stress_range", range.to_string());
        let crack = match self.crack_threshold {
            CrackThreshold::Median => "median",
            CrackThreshold::Midrange => "midrange",
        };
        put("crack_threshold", crack.to_string());
        put("image_format", self.image_format.extension().to_string());
        put("n_samples", self.n_samples.to_string());
        put("n_val", self.n_val.to_string());
        put("seed", self.seed.to_string());
        s
    }
}

use super::histogram::{bin_index, kl_raw};
use super::{init_staggered, nnd_from_matrix, BoundaryPolicy, NndHistogram, Rve, RveError, RveSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which distance feeds the NND histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NndMetric {
    #[default]
    CenterToCenter,
    /// Center distance minus one fiber diameter.
    SurfaceGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Maximum displacement of a single perturbation (μm).
    pub perturb_radius: f64,
    /// Shuffle phase ends once accepted moves exceed `phase1_factor · n_fibers`.
    pub phase1_factor: usize,
    pub kl_threshold: f64,
    /// Attempt budget for each phase.
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub boundary: BoundaryPolicy,
    pub metric: NndMetric,
}

impl GenConfig {
    pub fn for_spec(spec: &RveSpec) -> Self {
        Self {
            perturb_radius: 0.5 * spec.fiber_radius,
            phase1_factor: 20,
            kl_threshold: 0.05,
            max_iterations: 200_000,
            rng_seed: 0,
            boundary: BoundaryPolicy::Contained,
            metric: NndMetric::CenterToCenter,
        }
    }

    pub fn validate(&self) -> Result<(), RveError> {
        if !(self.perturb_radius > 0.0) || !self.perturb_radius.is_finite() {
            return Err(RveError::InvalidConfig("perturb_radius must be positive".into()));
        }
        if self.phase1_factor < 1 {
            return Err(RveError::InvalidConfig("phase1_factor must be >= 1".into()));
        }
        if !(self.kl_threshold > 0.0) {
            return Err(RveError::InvalidConfig("kl_threshold must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(RveError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PerturbMode<'a> {
    /// Accept any non-intersecting move.
    Shuffle,
    /// Accept only non-intersecting moves that strictly lower the KL divergence
    /// to `target`.
    Match { target: &'a NndHistogram },
}

/// Seeded perturbation engine. Keeps the distance matrix of the RVE it last
/// operated on so each move only refreshes one row.
pub struct Perturber {
    rng: ChaCha8Rng,
    perturb_radius: f64,
    metric: NndMetric,
    dist: Vec<Vec<f64>>,
    current_kl: Option<f64>,
}

impl Perturber {
    pub fn new(rve: &Rve, config: &GenConfig) -> Result<Self, RveError> {
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            perturb_radius: config.perturb_radius,
            metric: config.metric,
            dist: rve.distance_matrix()?,
            current_kl: None,
        })
    }

    /// Current KL divergence of `rve` against `target` (cached between calls).
    pub fn kl(&mut self, rve: &Rve, target: &NndHistogram) -> f64 {
        if let Some(kl) = self.current_kl {
            return kl;
        }
        let kl = self.kl_of(&self.dist, rve, target);
        self.current_kl = Some(kl);
        kl
    }

    fn kl_of(&self, dist: &[Vec<f64>], rve: &Rve, target: &NndHistogram) -> f64 {
        let offset = match self.metric {
            NndMetric::CenterToCenter => 0.0,
            NndMetric::SurfaceGap => 2.0 * rve.spec.fiber_radius,
        };
        let edges = target.edges();
        let mut counts = vec![0.0; target.bins()];
        let nnd = nnd_from_matrix(dist);
        for v in &nnd {
            counts[bin_index(edges, v - offset)] += 1.0;
        }
        let n = nnd.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        kl_raw(&counts, target.probabilities())
    }

    /// Moves one random fiber by a uniform random vector inside a disk of
    /// radius `perturb_radius`. Rejected moves leave `rve` untouched.
    pub fn perturb_once(&mut self, rve: &mut Rve, mode: PerturbMode<'_>) -> bool {
        let before = match mode {
            PerturbMode::Match { target } => Some(self.kl(rve, target)),
            PerturbMode::Shuffle => None,
        };
        let n = rve.fibers.len();
        let k = self.rng.gen_range(0..n);
        let rho = self.perturb_radius * self.rng.gen::<f64>().sqrt();
        let theta = std::f64::consts::TAU * self.rng.gen::<f64>();
        let old = rve.fibers[k].center;
        let mut c = [old[0] + rho * theta.cos(), old[1] + rho * theta.sin()];
        if rve.boundary == BoundaryPolicy::Periodic {
            c[0] = c[0].rem_euclid(rve.spec.width);
            c[1] = c[1].rem_euclid(rve.spec.height);
            // rem_euclid can round up to the modulus itself.
            if c[0] >= rve.spec.width {
                c[0] = 0.0;
            }
            if c[1] >= rve.spec.height {
                c[1] = 0.0;
            }
        }
        if !rve.center_admissible(c) {
            return false;
        }
        let limit = rve.spec.min_center_distance();
        let mut row = vec![0.0; n];
        for j in 0..n {
            if j == k {
                continue;
            }
            let [dx, dy] = rve.separation(c, rve.fibers[j].center);
            let d = dx.hypot(dy);
            if d < limit {
                return false;
            }
            row[j] = d;
        }

        let previous_row = std::mem::replace(&mut self.dist[k], row);
        for j in 0..n {
            self.dist[j][k] = self.dist[k][j];
        }

        let accept = match mode {
            PerturbMode::Shuffle => {
                self.current_kl = None;
                true
            }
            PerturbMode::Match { target } => {
                let after = self.kl_of(&self.dist, rve, target);
                if before.is_some_and(|b| after < b) {
                    self.current_kl = Some(after);
                    true
                } else {
                    false
                }
            }
        };
        if accept {
            rve.fibers[k].center = c;
        } else {
            self.dist[k] = previous_row;
            for j in 0..n {
                self.dist[j][k] = self.dist[k][j];
            }
        }
        accept
    }
}

#[derive(Debug, Clone)]
pub struct GenOutcome {
    pub rve: Rve,
    /// KL after the shuffle phase followed by the KL after each accepted
    /// matching move.
    pub kl_trace: Vec<f64>,
    pub phase1_accepted: usize,
    pub phase2_attempts: usize,
}

impl GenOutcome {
    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("trace is never empty")
    }
}

/// Two-phase generation: shuffle from the staggered lattice, then match the
/// NND histogram to `target` until the divergence drops to the threshold.
pub fn generate(
    spec: &RveSpec,
    target: &NndHistogram,
    config: &GenConfig,
) -> Result<GenOutcome, RveError> {
    config.validate()?;
    let mut rve = init_staggered(spec, config.boundary)?;
    if rve.fibers.len() < 2 {
        return Err(RveError::TooFewFibers(rve.fibers.len()));
    }
    let mut engine = Perturber::new(&rve, config)?;

    let needed = config.phase1_factor * spec.n_fibers;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted <= needed {
        if attempts == config.max_iterations {
            let kl = engine.kl(&rve, target);
            return Err(RveError::NotConverged {
                phase: "shuffle phase",
                iterations: attempts,
                kl,
                best: Box::new(rve),
                trace: vec![kl],
            });
        }
        attempts += 1;
        if engine.perturb_once(&mut rve, PerturbMode::Shuffle) {
            accepted += 1;
        }
    }

    let mut trace = vec![engine.kl(&rve, target)];
    let mut attempts2 = 0usize;
    while *trace.last().unwrap() > config.kl_threshold {
        if attempts2 == config.max_iterations {
            let kl = *trace.last().unwrap();
            return Err(RveError::NotConverged {
                phase: "matching phase",
                iterations: attempts2,
                kl,
                best: Box::new(rve),
                trace,
            });
        }
        attempts2 += 1;
        if engine.perturb_once(&mut rve, PerturbMode::Match { target }) {
            trace.push(engine.kl(&rve, target));
        }
    }

    Ok(GenOutcome {
        rve,
        kl_trace: trace,
        phase1_accepted: accepted,
        phase2_attempts: attempts2,
    })
}

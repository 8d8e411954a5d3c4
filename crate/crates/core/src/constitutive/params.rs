use super::tensor::Isotropic;
use super::ConstitutiveError;
use crate::kv::{KvError, KvFile};

/// How the viscous damage increment is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DamageRule {
    /// `Δd = dt/(1+μ·dt)·(G − Y)`, exactly as the evolution law is usually
    /// printed. The index then saturates at `(1 − Y₀)/μ`.
    AsPrinted,
    /// `Δd = μ·dt/(1+μ·dt)·(G − Y)`, the Simo–Ju viscous form in which the
    /// index relaxes towards `G` and can reach full damage.
    #[default]
    Relaxation,
}

impl std::str::FromStr for DamageRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "relaxation" => Ok(Self::Relaxation),
            other => Err(format!("unknown damage rule '{other}'")),
        }
    }
}

/// Epoxy matrix. Stresses in MPa, modulus in GPa.
///
/// `hardening_a` and `hardening_b` are the amplitude and exponent of the
/// Ramberg–Osgood tangent `H = a·(σ_Y/σ_von)^b` (tabulated as `H` and `n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixParams {
    pub youngs_gpa: f64,
    pub poisson: f64,
    pub sigma_t: f64,
    pub sigma_c: f64,
    pub hardening_a: f64,
    pub hardening_b: f64,
    pub eps_t: f64,
    pub eps_c: f64,
    pub damage_a: f64,
    pub damage_b: f64,
    pub damage_viscosity: f64,
    pub damage_rule: DamageRule,
    /// Damage threshold `Y` assigned at failure initiation. Must be positive
    /// because evolution requires `Y > 0`.
    pub initial_threshold: f64,
}

impl Default for MatrixParams {
    fn default() -> Self {
        Self {
            youngs_gpa: 3.9,
            poisson: 0.39,
            sigma_t: 62.0,
            sigma_c: 79.0,
            hardening_a: 20000.0,
            hardening_b: 12.0,
            eps_t: 0.04,
            eps_c: 0.35,
            damage_a: 0.95,
            damage_b: 2.0,
            damage_viscosity: 10.0,
            damage_rule: DamageRule::Relaxation,
            initial_threshold: 1e-4,
        }
    }
}

impl MatrixParams {
    pub fn youngs_mpa(&self) -> f64 {
        self.youngs_gpa * 1000.0
    }

    pub fn elasticity(&self) -> Isotropic {
        Isotropic::from_young_poisson(self.youngs_mpa(), self.poisson)
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let bad = |m: &str| Err(ConstitutiveError::InvalidParams(m.to_string()));
        if !(self.youngs_gpa > 0.0) {
            return bad("E must be positive");
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return bad("nu must lie in (0, 0.5)");
        }
        if !(self.sigma_t > 0.0 && self.sigma_c >= self.sigma_t) {
            return bad("need sigma_c >= sigma_t > 0");
        }
        if !(self.eps_t > 0.0 && self.eps_c >= self.eps_t) {
            return bad("need eps_c >= eps_t > 0");
        }
        if !(self.damage_a > 0.0 && self.damage_a < 1.0) {
            return bad("A must lie in (0, 1)");
        }
        if !(self.damage_b > 0.0 && self.damage_viscosity > 0.0) {
            return bad("B and mu must be positive");
        }
        if !(self.hardening_a > 0.0 && self.hardening_b >= 0.0) {
            return bad("hardening amplitude must be positive");
        }
        if !(self.initial_threshold > 0.0 && self.initial_threshold < 1.0) {
            return bad("initial damage threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Carbon fiber, moduli in GPa. Direction 1 runs along the fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberParams {
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub g23: f64,
    pub nu12: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            e1: 233.0,
            e2: 23.1,
            g12: 8.96,
            g23: 8.27,
            nu12: 0.2,
        }
    }
}

impl FiberParams {
    /// Poisson ratio within the transverse plane, `E2/(2·G23) − 1`.
    pub fn nu23(&self) -> f64 {
        self.e2 / (2.0 * self.g23) - 1.0
    }

    /// Isotropic stand-in for the transverse plane: `E = E2`, `ν = ν23`.
    pub fn transverse_elasticity(&self) -> Isotropic {
        Isotropic::from_young_poisson(self.e2 * 1000.0, self.nu23())
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        if [self.e1, self.e2, self.g12, self.g23].iter().any(|v| !(*v > 0.0)) {
            return Err(ConstitutiveError::InvalidParams("fiber moduli must be positive".into()));
        }
        let nu = self.nu23();
        if !(nu > -1.0 && nu < 0.5) {
            return Err(ConstitutiveError::InvalidParams(format!(
                "transverse Poisson ratio {nu} outside (-1, 0.5)"
            )));
        }
        Ok(())
    }
}

/// Bilinear cohesive law: strength in MPa, critical opening in nm, toughness
/// in N/m. `viscosity` multiplies the opening rate (MPa per nm per unit
/// pseudo-time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzmParams {
    pub t_c: f64,
    pub delta_c: f64,
    pub g_c: f64,
    pub viscosity: f64,
}

impl Default for CzmParams {
    fn default() -> Self {
        Self {
            t_c: 70.0,
            delta_c: 1.0,
            g_c: 8.75,
            viscosity: 1e-4 * 70.0,
        }
    }
}

impl CzmParams {
    /// Toughness in MPa·nm (1 N/m = 1000 MPa·nm).
    pub fn g_c_mpa_nm(&self) -> f64 {
        self.g_c * 1000.0
    }

    /// Opening at which traction vanishes, `2·G_c/T_c` (nm).
    pub fn delta_f(&self) -> f64 {
        2.0 * self.g_c_mpa_nm() / self.t_c
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        if !(self.t_c > 0.0 && self.delta_c > 0.0 && self.g_c > 0.0) {
            return Err(ConstitutiveError::InvalidParams("cohesive parameters must be positive".into()));
        }
        if self.viscosity < 0.0 {
            return Err(ConstitutiveError::InvalidParams("viscosity must be >= 0".into()));
        }
        if !(self.g_c_mpa_nm() > 0.5 * self.t_c * self.delta_c) {
            return Err(ConstitutiveError::InvalidParams(
                "G_c must exceed T_c·delta_c/2 for a softening branch".into(),
            ));
        }
        Ok(())
    }
}

/// All constituent parameters of one composite.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaterialSet {
    pub matrix: MatrixParams,
    pub fiber: FiberParams,
    pub interface: CzmParams,
}

pub const MATERIAL_KEYS: &[&str] = &[
    "E", "nu", "sigma_c", "sigma_t", "H", "n", "eps_c", "eps_t", "A", "B", "mu", "damage_rule",
    "Y0", "E1", "E2", "G12", "G23", "nu12", "T_c", "delta_c", "G_c", "zeta",
];

impl MaterialSet {
    /// Reads a flat key-value file using the tabulated parameter names.
    /// Missing keys keep their defaults. Fiber moduli are read in GPa.
    pub fn from_kv(kv: &KvFile) -> Result<Self, ConstitutiveError> {
        kv.ensure_known(MATERIAL_KEYS)?;
        let mut m = Self::default();
        let r = |k: &str, slot: &mut f64| kv.read_into(k, slot);
        r("E", &mut m.matrix.youngs_gpa)?;
        r("nu", &mut m.matrix.poisson)?;
        r("sigma_c", &mut m.matrix.sigma_c)?;
        r("sigma_t", &mut m.matrix.sigma_t)?;
        r("H", &mut m.matrix.hardening_a)?;
        r("n", &mut m.matrix.hardening_b)?;
        r("eps_c", &mut m.matrix.eps_c)?;
        r("eps_t", &mut m.matrix.eps_t)?;
        r("A", &mut m.matrix.damage_a)?;
        r("B", &mut m.matrix.damage_b)?;
        r("mu", &mut m.matrix.damage_viscosity)?;
        r("Y0", &mut m.matrix.initial_threshold)?;
        kv.read_into("damage_rule", &mut m.matrix.damage_rule)?;
        r("E1", &mut m.fiber.e1)?;
        r("E2", &mut m.fiber.e2)?;
        r("G12", &mut m.fiber.g12)?;
        r("G23", &mut m.fiber.g23)?;
        r("nu12", &mut m.fiber.nu12)?;
        r("T_c", &mut m.interface.t_c)?;
        r("delta_c", &mut m.interface.delta_c)?;
        r("G_c", &mut m.interface.g_c)?;
        r("zeta", &mut m.interface.viscosity)?;
        m.validate()?;
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self, ConstitutiveError> {
        Self::from_kv(&KvFile::parse(text)?)
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        self.matrix.validate()?;
        self.fiber.validate()?;
        self.interface.validate()
    }

    pub fn to_kv_string(&self) -> String {
        let m = &self.matrix;
        let f = &self.fiber;
        let c = &self.interface;
        let rule = match m.damage_rule {
            DamageRule::AsPrinted => "as_printed",
            DamageRule::Relaxation => "relaxation",
        };
        format!(
            "# matrix (E in GPa, strengths in MPa)\nE = {}\nnu = {}\nsigma_c = {}\nsigma_t = {}\nH = {}\nn = {}\n\
             eps_c = {}\neps_t = {}\nA = {}\nB = {}\nmu = {}\nY0 = {}\ndamage_rule = {rule}\n\
             # fiber (GPa)\nE1 = {}\nE2 = {}\nG12 = {}\nG23 = {}\nnu12 = {}\n\
             # fiber/matrix interface (MPa, nm, N/m)\nT_c = {}\ndelta_c = {}\nG_c = {}\nzeta = {}\n",
            m.youngs_gpa, m.poisson, m.sigma_c, m.sigma_t, m.hardening_a, m.hardening_b, m.eps_c,
            m.eps_t, m.damage_a, m.damage_b, m.damage_viscosity, m.initial_threshold, f.e1, f.e2,
            f.g12, f.g23, f.nu12, c.t_c, c.delta_c, c.g_c, c.viscosity
        )
    }
}

impl From<KvError> for ConstitutiveError {
    fn from(e: KvError) -> Self {
        ConstitutiveError::InvalidParams(e.to_string())
    }
}

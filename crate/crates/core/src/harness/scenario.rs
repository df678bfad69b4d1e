//! Scenario definition and its TOML file format.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::augmentation::{
    build_augmented, compute_c_sequence, AugmentedSystem, QuadraticOutputSystem,
    DEFAULT_NILPOTENCY_TOL,
};
use crate::error::{Error, Result};
use crate::numerics::IntegrationGrid;
use crate::observability::{PeWindows, DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use crate::observer::{
    ObserverConfig, DEFAULT_M0_SCALE, DEFAULT_THETA, DEFAULT_V_SCALE, DEFAULT_W,
};
use crate::signal::{Primitive, PrimitiveSignal, SmoothSignal};

/// A square matrix given either in full or as a multiple of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    ScaledIdentity(f64),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn resolve(&self, dim: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::ScaledIdentity(s) => Ok(DMatrix::identity(dim, dim) * *s),
            MatrixSpec::Full(rows) => {
                let m = matrix_from_rows(rows, what)?;
                if m.shape() != (dim, dim) {
                    return Err(Error::Config(format!(
                        "{what} must be {dim}x{dim}, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m)
            }
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "{what} must be a non-empty rectangular array of rows"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Observer tuning prior to knowing the extended dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub m0: MatrixSpec,
    pub v: MatrixSpec,
    pub w: f64,
    #[serde(default)]
    pub theta: f64,
}

impl Default for ObserverSpec {
    fn default() -> Self {
        Self {
            m0: MatrixSpec::ScaledIdentity(DEFAULT_M0_SCALE),
            v: MatrixSpec::ScaledIdentity(DEFAULT_V_SCALE),
            w: DEFAULT_W,
            theta: DEFAULT_THETA,
        }
    }
}

impl ObserverSpec {
    pub fn resolve(&self, dim: usize) -> Result<ObserverConfig> {
        let cfg = ObserverConfig {
            m0: self.m0.resolve(dim, "observer.m0")?,
            v: self.v.resolve(dim, "observer.v")?,
            w: self.w,
            theta: self.theta,
        };
        cfg.validate(dim)?;
        Ok(cfg)
    }
}

/// Persistence-of-excitation sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PeSettings {
    pub window: f64,
    pub threshold: f64,
    /// Window starts; `None` means every `window` seconds across the horizon.
    pub starts: Option<Vec<f64>>,
    /// Highest `r_i` index in the determinant condition; `None` means `m + n - 1`.
    pub kappa: Option<usize>,
}

impl Default for PeSettings {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            starts: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: QuadraticOutputSystem,
    pub signal: PrimitiveSignal,
    /// True initial plant state.
    pub x0: DVector<f64>,
    /// Observer initialization; `None` means `ẑ(0) = 0`.
    pub zhat0: Option<DVector<f64>>,
    pub observer: ObserverSpec,
    pub grid: IntegrationGrid,
    pub pe: PeSettings,
    pub max_m: usize,
    pub nilpotency_tol: f64,
}

impl Scenario {
    pub fn augment(&self) -> Result<AugmentedSystem> {
        let cseq = compute_c_sequence(&self.system, self.max_m, self.nilpotency_tol)?;
        build_augmented(&self.system, cseq)
    }

    pub fn observer_config(&self, aug: &AugmentedSystem) -> Result<ObserverConfig> {
        self.observer.resolve(aug.extended_dim())
    }

    pub fn initial_estimate(&self, aug: &AugmentedSystem) -> Result<DVector<f64>> {
        let dim = aug.extended_dim();
        match &self.zhat0 {
            None => Ok(DVector::zeros(dim)),
            Some(z) if z.len() == dim => Ok(z.clone()),
            Some(z) => Err(Error::Config(format!(
                "zhat0 has {} entries, extended state has {dim}",
                z.len()
            ))),
        }
    }

    pub fn kappa(&self, aug: &AugmentedSystem) -> usize {
        self.pe.kappa.unwrap_or(aug.extended_dim() - 1)
    }

    /// PE windows, each checked to lie inside the horizon.
    pub fn windows(&self) -> Result<PeWindows> {
        let windows = match &self.pe.starts {
            Some(starts) => PeWindows::new(self.pe.window, self.pe.threshold, starts.clone())?,
            None => PeWindows::spanning(
                &self.grid,
                self.pe.window,
                self.pe.threshold,
                self.pe.window,
            )?,
        };
        for &start in &windows.starts {
            if !self.grid.contains(start) || !self.grid.contains(start + windows.delta) {
                return Err(Error::Config(format!(
                    "PE window [{start}, {}] leaves the horizon [{}, {}]",
                    start + windows.delta,
                    self.grid.t_start(),
                    self.grid.t_end()
                )));
            }
        }
        Ok(windows)
    }

    /// Checks the cross-field invariants needed for simulation and returns the
    /// augmented system. PE windows are checked by [`Scenario::windows`].
    pub fn validate(&self) -> Result<AugmentedSystem> {
        let aug = self.augment()?;
        let n = aug.n();
        if self.signal.dim() != aug.p() {
            return Err(Error::Config(format!(
                "input has {} channels, B has {} columns",
                self.signal.dim(),
                aug.p()
            )));
        }
        if !self.signal.is_finite() {
            return Err(Error::Config("input primitives must be finite".into()));
        }
        if self.signal.max_order() < aug.m() {
            return Err(Error::Config(format!(
                "input.max_order = {} but the checks need derivatives up to m = {}",
                self.signal.max_order(),
                aug.m()
            )));
        }
        if self.x0.len() != n || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("x0 must hold {n} finite entries")));
        }
        self.initial_estimate(&aug)?;
        self.observer_config(&aug)?;
        Ok(aug)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        file.into_scenario()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_scenario()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile::from(self)).expect("scenario serializes")
    }
}

/// On-disk layout. Unknown keys are rejected at every level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    #[serde(default)]
    pub augmentation: Option<AugmentationSection>,
    pub input: InputSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub observer: Option<ObserverSpec>,
    pub grid: GridSection,
    #[serde(default)]
    pub pe: Option<PeSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSection {
    pub max_m: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub max_order: usize,
    /// One list of primitives per input channel; an empty list is `0`.
    pub channels: Vec<Vec<Primitive>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
    pub zhat0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeSection {
    pub window: Option<f64>,
    pub threshold: Option<f64>,
    pub starts: Option<Vec<f64>>,
    pub kappa: Option<usize>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let system = QuadraticOutputSystem::new(
            matrix_from_rows(&self.system.a, "system.a")?,
            matrix_from_rows(&self.system.b, "system.b")?,
            matrix_from_rows(&self.system.c, "system.c")?,
        )?;
        let aug = self.augmentation.unwrap_or(AugmentationSection {
            max_m: None,
            tolerance: None,
        });
        let pe = self.pe.map_or_else(PeSettings::default, |p| PeSettings {
            window: p.window.unwrap_or(DEFAULT_WINDOW),
            threshold: p.threshold.unwrap_or(DEFAULT_THRESHOLD),
            starts: p.starts,
            kappa: p.kappa,
        });
        Ok(Scenario {
            max_m: aug.max_m.unwrap_or_else(|| system.default_max_m()),
            nilpotency_tol: aug.tolerance.unwrap_or(DEFAULT_NILPOTENCY_TOL),
            system,
            signal: PrimitiveSignal::new(self.input.channels, self.input.max_order),
            x0: DVector::from_vec(self.initial.x0),
            zhat0: self.initial.zhat0.map(DVector::from_vec),
            observer: self.observer.unwrap_or_default(),
            grid: IntegrationGrid::new(self.grid.t_start, self.grid.t_end, self.grid.step)?,
            pe,
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(sc: &Scenario) -> Self {
        ScenarioFile {
            system: SystemSection {
                a: matrix_to_rows(sc.system.a()),
                b: matrix_to_rows(sc.system.b()),
                c: matrix_to_rows(sc.system.c()),
            },
            augmentation: Some(AugmentationSection {
                max_m: Some(sc.max_m),
                tolerance: Some(sc.nilpotency_tol),
            }),
            input: InputSection {
                max_order: sc.signal.max_order(),
                channels: sc.signal.channels().to_vec(),
            },
            initial: InitialSection {
                x0: sc.x0.iter().copied().collect(),
                zhat0: sc.zhat0.as_ref().map(|z| z.iter().copied().collect()),
            },
            observer: Some(sc.observer.clone()),
            grid: GridSection {
                t_start: sc.grid.t_start(),
                t_end: sc.grid.t_end(),
                step: sc.grid.step(),
            },
            pe: Some(PeSection {
                window: Some(sc.pe.window),
                threshold: Some(sc.pe.threshold),
                starts: sc.pe.starts.clone(),
                kappa: sc.pe.kappa,
            }),
        }
    }
}

//! Plain-text `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::PathBuf;

use crate::domain::{initial_design, AdmissibleBounds, DesignField, Grid, InitialDesign};
use crate::error::{Error, Result};
use crate::objective::{graded_quadrature, make_quadrature, AlphaQuadrature, FocusingProblem};
use crate::optimize::OptimizerConfig;
use crate::scalar::{cplx, Real};
use crate::source::default_n_trunc;

const KEYS: &[&str] = &[
    "omega",
    "b",
    "h",
    "h1",
    "nx",
    "ny",
    "alpha_count",
    "n_trunc_extra",
    "rho_r0",
    "rho_r1",
    "rho_i0",
    "rho_i1",
    "init_kind",
    "init_params",
    "max_iter",
    "tol_j",
    "tol_kkt",
    "seed",
    "outdir",
    "analysis_quadrature",
];

const REQUIRED: &[&str] = &["h", "h1", "rho_r0", "rho_r1", "rho_i0", "rho_i1", "init_kind"];

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind<T> {
    Design(InitialDesign<T>),
    /// Design text file.
    File(PathBuf),
}

/// Rule used to integrate over α when reconstructing images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisQuadrature {
    /// Same points as the objective.
    Midpoint,
    /// Graded panels between Wood points, solved separately. Accurate when
    /// the integrand is smooth away from Wood points, i.e. for lossy slabs;
    /// lossless slabs with guided modes put poles on the real α axis.
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub omega: T,
    pub b: T,
    pub h: T,
    pub h1: T,
    pub nx: usize,
    pub ny: usize,
    pub alpha_count: usize,
    pub n_trunc_extra: usize,
    pub bounds: AdmissibleBounds<T>,
    pub init: InitKind<T>,
    pub max_iter: usize,
    pub tol_j: T,
    pub tol_kkt: T,
    pub seed: u64,
    pub outdir: Option<PathBuf>,
    pub analysis_quadrature: AnalysisQuadrature,
}

struct Entry {
    line: usize,
    value: String,
}

fn num<T: Real>(map: &BTreeMap<String, Entry>, key: &str, default: Option<T>) -> Result<T> {
    match map.get(key) {
        Some(e) => {
            let v = e.value.trim();
            let parsed = if v.eq_ignore_ascii_case("pi") {
                Some(T::PI())
            } else {
                v.parse::<T>().ok()
            };
            parsed.filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                line: e.line,
                message: format!("`{key}` expects a number, got `{v}`"),
            })
        }
        None => default.ok_or_else(|| Error::Config(format!("missing required key `{key}`"))),
    }
}

fn count(map: &BTreeMap<String, Entry>, key: &str, default: usize) -> Result<usize> {
    map.get(key).map_or(Ok(default), |e| {
        e.value.trim().parse().map_err(|_| Error::Parse {
            line: e.line,
            message: format!("`{key}` expects a non-negative integer, got `{}`", e.value.trim()),
        })
    })
}

fn positive<T: Real>(key: &str, v: T) -> Result<T> {
    if v > T::zero() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    }
}

impl<T: Real> ExperimentConfig<T> {
    pub fn parse<R: BufRead>(r: R) -> Result<Self> {
        let mut map: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let n = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
                line: n,
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line: n,
                    message: format!("unknown key `{k}`"),
                });
            }
            if let Some(prev) = map.get(k) {
                return Err(Error::Parse {
                    line: n,
                    message: format!("key `{k}` already set on line {}", prev.line),
                });
            }
            map.insert(
                k.to_string(),
                Entry {
                    line: n,
                    value: v.trim().to_string(),
                },
            );
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !map.contains_key(**k)) {
            return Err(Error::Config(format!("missing required key `{missing}`")));
        }

        let omega = positive("omega", num(&map, "omega", Some(T::one()))?)?;
        let b = positive("b", num(&map, "b", Some(T::PI()))?)?;
        let h = positive("h", num(&map, "h", None)?)?;
        let h1 = positive("h1", num(&map, "h1", None)?)?;
        let bounds = AdmissibleBounds::new(
            num(&map, "rho_r0", None)?,
            num(&map, "rho_r1", None)?,
            num(&map, "rho_i0", None)?,
            num(&map, "rho_i1", None)?,
        )?;
        let alpha_count = count(&map, "alpha_count", 20)?;
        if alpha_count == 0 {
            return Err(Error::Config("`alpha_count` must be at least 1".into()));
        }
        let seed = map.get("seed").map_or(Ok(0), |e| {
            e.value.parse::<u64>().map_err(|_| Error::Parse {
                line: e.line,
                message: format!("`seed` expects an unsigned integer, got `{}`", e.value),
            })
        })?;
        let init = parse_init(&map, &bounds, seed)?;
        let analysis_quadrature = match map.get("analysis_quadrature") {
            None => AnalysisQuadrature::Midpoint,
            Some(e) => match e.value.as_str() {
                "midpoint" => AnalysisQuadrature::Midpoint,
                "graded" => AnalysisQuadrature::Graded,
                other => {
                    return Err(Error::Parse {
                        line: e.line,
                        message: format!("`analysis_quadrature` is `midpoint` or `graded`, got `{other}`"),
                    })
                }
            },
        };
        let cfg = Self {
            omega,
            b,
            h,
            h1,
            nx: count(&map, "nx", 64)?,
            ny: count(&map, "ny", 48)?,
            alpha_count,
            n_trunc_extra: count(&map, "n_trunc_extra", 20)?,
            bounds,
            init,
            max_iter: count(&map, "max_iter", 200)?,
            tol_j: num(&map, "tol_j", Some(T::lit(1e-6)))?,
            tol_kkt: num(&map, "tol_kkt", Some(T::lit(1e-4)))?,
            seed,
            outdir: map.get("outdir").map(|e| PathBuf::from(&e.value)),
            analysis_quadrature,
        };
        cfg.grid()?;
        cfg.n_trunc()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid<T>> {
        if self.nx % 2 != 0 {
            return Err(Error::Config(format!("`nx` must be even for x-symmetric designs, got {}", self.nx)));
        }
        Grid::new(self.nx, self.ny, self.b)
    }

    pub fn n_trunc(&self) -> Result<usize> {
        default_n_trunc(self.omega, self.nx, self.n_trunc_extra)
    }

    pub fn quadrature(&self) -> Result<AlphaQuadrature<T>> {
        make_quadrature(self.alpha_count, self.omega, self.n_trunc()?)
    }

    pub fn analysis_quadrature(&self) -> Result<AlphaQuadrature<T>> {
        match self.analysis_quadrature {
            AnalysisQuadrature::Midpoint => self.quadrature(),
            AnalysisQuadrature::Graded => graded_quadrature(self.alpha_count, self.omega, self.n_trunc()?),
        }
    }

    pub fn problem(&self) -> Result<FocusingProblem<T>> {
        FocusingProblem::new(self.grid()?, self.omega, self.h, self.h1, self.n_trunc()?, self.quadrature()?)
    }

    /// Same physics, integrated with the analysis rule.
    pub fn analysis_problem(&self) -> Result<FocusingProblem<T>> {
        FocusingProblem::new(
            self.grid()?,
            self.omega,
            self.h,
            self.h1,
            self.n_trunc()?,
            self.analysis_quadrature()?,
        )
    }

    pub fn optimizer(&self) -> OptimizerConfig<T> {
        OptimizerConfig {
            max_iter: self.max_iter,
            tol_j: self.tol_j,
            tol_kkt: self.tol_kkt,
            ..OptimizerConfig::default()
        }
    }

    /// Initial design, symmetrized and projected.
    pub fn initial_design(&self) -> Result<DesignField<T>> {
        let grid = self.grid()?;
        match &self.init {
            InitKind::Design(kind) => initial_design(kind, grid, self.bounds),
            InitKind::File(path) => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open design `{}`: {e}", path.display())))?;
                let d = DesignField::read_text(std::io::BufReader::new(f))?;
                if d.grid != grid {
                    return Err(Error::Config(format!(
                        "design `{}` is {}x{}, config asks for {}x{}",
                        path.display(),
                        d.grid.nx(),
                        d.grid.ny(),
                        self.nx,
                        self.ny
                    )));
                }
                let d = DesignField::new(grid, d.values, self.bounds)?;
                Ok(d.symmetrize_x()?.project_to_admissible())
            }
        }
    }
}

fn parse_init<T: Real>(map: &BTreeMap<String, Entry>, bounds: &AdmissibleBounds<T>, seed: u64) -> Result<InitKind<T>> {
    let kind = &map["init_kind"];
    let params = map.get("init_params");
    let line = params.map_or(kind.line, |e| e.line);
    let toks: Vec<&str> = params.map_or(Vec::new(), |e| e.value.split_whitespace().collect());
    let nums = |n_min: usize, n_max: usize, what: &str| -> Result<Vec<T>> {
        if toks.len() < n_min || toks.len() > n_max {
            return Err(Error::Parse {
                line,
                message: format!("`init_params` for {} expects {what}", kind.value),
            });
        }
        toks.iter()
            .map(|t| {
                t.parse::<T>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number `{t}` in `init_params`"),
                })
            })
            .collect()
    };
    Ok(match kind.value.as_str() {
        "uniform" => {
            let v = nums(1, 2, "`re [im]`")?;
            InitKind::Design(InitialDesign::Uniform(cplx(v[0], v.get(1).copied().unwrap_or(bounds.rho_i0))))
        }
        "crystal" => {
            let v = nums(4, 4, "`rod_eps background_eps rod_radius lattice`")?;
            InitKind::Design(InitialDesign::PhotonicCrystal {
                rod_eps: v[0],
                background_eps: v[1],
                rod_radius: v[2],
                lattice: v[3],
            })
        }
        "random" => {
            nums(0, 0, "no parameters (the draw uses `seed`)")?;
            InitKind::Design(InitialDesign::Random { seed })
        }
        "file" => {
            if toks.len() != 1 {
                return Err(Error::Parse {
                    line,
                    message: "`init_params` for file expects one path".into(),
                });
            }
            InitKind::File(PathBuf::from(toks[0]))
        }
        other => {
            return Err(Error::Parse {
                line: kind.line,
                message: format!("unknown init_kind `{other}` (uniform, crystal, random, file)"),
            })
        }
    })
}

//! Experiment configuration: flat `key = value` lines grouped under
//! `[experiment]`, `[matrix]`, `[problem]` and `[optimizer]` headers.
//! Keys before the first header belong to `[experiment]`; `#` starts a
//! comment.
//!
//! ```text
//! [experiment]
//! algorithm = diging
//! K = 2000
//! seeds = 0,1,2
//!
//! [matrix]
//! spec = lazy-skewed:7:-0.144:0.6
//!
//! [problem]
//! preset = logreg
//!
//! [optimizer]
//! gamma = 0.01
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{
    build_complete, build_grid, build_lazy_skewed, build_out_degree_matrix, build_ring,
    build_skewed_family, perturb_weights, Digraph, MixingMatrix,
};
use crate::problems::{LogRegParams, ProblemPreset};
use crate::rng::NoiseKey;

/// Where a mixing matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSpec {
    /// `skewed:n[:eps]`
    Skewed { n: usize, eps: f64 },
    /// `lazy-skewed:n:eps:laziness`
    LazySkewed { n: usize, eps: f64, laziness: f64 },
    /// `ring:n`
    Ring(usize),
    /// `grid:RxC`
    Grid(usize, usize),
    /// `complete:n`
    Complete(usize),
    /// `exponential:n`
    Exponential(usize),
    /// A `.csv` dense matrix, or any other file read as an edge list and
    /// weighted by the out-degree rule.
    File(PathBuf),
}

impl MatrixSpec {
    pub fn build(&self) -> Result<MixingMatrix> {
        match self {
            MatrixSpec::Skewed { n, eps } => build_skewed_family(*n, *eps),
            MatrixSpec::LazySkewed { n, eps, laziness } => build_lazy_skewed(*n, *eps, *laziness),
            MatrixSpec::Ring(n) => build_ring(*n),
            MatrixSpec::Grid(r, c) => build_grid(*r, *c),
            MatrixSpec::Complete(n) => build_complete(*n),
            MatrixSpec::Exponential(n) => build_out_degree_matrix(&Digraph::exponential(*n)?),
            MatrixSpec::File(path) => {
                if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    MixingMatrix::load_csv(path)
                } else {
                    build_out_degree_matrix(&Digraph::load_edge_list(path)?)
                }
            }
        }
    }

    pub fn file(&self) -> Option<&Path> {
        match self {
            MatrixSpec::File(p) => Some(p),
            _ => None,
        }
    }
}

impl FromStr for MatrixSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: &str| Error::Config(format!("matrix spec `{s}`: {msg}"));
        let parts: Vec<&str> = s.split(':').collect();
        let count = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing size"))?
                .parse()
                .map_err(|_| bad("size must be a non-negative integer"))
        };
        let real = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing parameter"))?
                .parse()
                .map_err(|_| bad("parameter must be a number"))
        };
        let arity = |lo: usize, hi: usize| {
            if parts.len() < lo || parts.len() > hi {
                Err(bad("wrong number of fields"))
            } else {
                Ok(())
            }
        };
        match parts[0] {
            "skewed" => {
                arity(2, 3)?;
                let eps = if parts.len() == 3 { real(2)? } else { 0.0 };
                Ok(MatrixSpec::Skewed { n: count(1)?, eps })
            }
            "lazy-skewed" => {
                arity(4, 4)?;
                Ok(MatrixSpec::LazySkewed {
                    n: count(1)?,
                    eps: real(2)?,
                    laziness: real(3)?,
                })
            }
            "ring" => {
                arity(2, 2)?;
                Ok(MatrixSpec::Ring(count(1)?))
            }
            "complete" => {
                arity(2, 2)?;
                Ok(MatrixSpec::Complete(count(1)?))
            }
            "exponential" => {
                arity(2, 2)?;
                Ok(MatrixSpec::Exponential(count(1)?))
            }
            "grid" => {
                arity(2, 2)?;
                let (r, c) = parts[1].split_once('x').ok_or_else(|| bad("expected RxC"))?;
                let r = r.parse().map_err(|_| bad("bad row count"))?;
                let c = c.parse().map_err(|_| bad("bad column count"))?;
                Ok(MatrixSpec::Grid(r, c))
            }
            "file" => Ok(MatrixSpec::File(PathBuf::from(&s[5..]))),
            _ if s.is_empty() => Err(bad("empty")),
            _ => Ok(MatrixSpec::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::Skewed { n, eps } => write!(f, "skewed:{n}:{eps:?}"),
            MatrixSpec::LazySkewed { n, eps, laziness } => {
                write!(f, "lazy-skewed:{n}:{eps:?}:{laziness:?}")
            }
            MatrixSpec::Ring(n) => write!(f, "ring:{n}"),
            MatrixSpec::Grid(r, c) => write!(f, "grid:{r}x{c}"),
            MatrixSpec::Complete(n) => write!(f, "complete:{n}"),
            MatrixSpec::Exponential(n) => write!(f, "exponential:{n}"),
            MatrixSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    PushSum,
    Diging,
    MgDiging,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pushsum" => Ok(Algorithm::PushSum),
            "diging" => Ok(Algorithm::Diging),
            "mgdiging" => Ok(Algorithm::MgDiging),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::PushSum => "pushsum",
            Algorithm::Diging => "diging",
            Algorithm::MgDiging => "mgdiging",
        })
    }
}

/// A fixed value or `auto` (theoretical schedule).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Fixed(T),
}

impl<T: FromStr> FromStr for Auto<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Auto::Auto),
            v => v
                .parse()
                .map(Auto::Fixed)
                .map_err(|_| Error::Config(format!("expected a number or `auto`, got `{v}`"))),
        }
    }
}

impl<T: fmt::Debug> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Fixed(v) => write!(f, "{v:?}"),
        }
    }
}

pub type GammaSpec = Auto<f64>;
pub type RoundsSpec = Auto<usize>;

/// Problem family; the node count always follows the matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    LogReg {
        d: usize,
        m: usize,
        rho: f64,
        sigma_h: f64,
        sigma_n: f64,
        data_seed: u64,
    },
    Quadratic {
        d: usize,
        cond: f64,
        hetero: f64,
        sigma: f64,
        data_seed: u64,
    },
    Hard {
        budget: usize,
        l: f64,
        delta: f64,
    },
}

impl ProblemSpec {
    pub fn logreg() -> Self {
        let p = LogRegParams::default();
        ProblemSpec::LogReg {
            d: p.d,
            m: p.m,
            rho: p.rho,
            sigma_h: p.sigma_h,
            sigma_n: p.sigma_n,
            data_seed: p.seed,
        }
    }

    pub fn quadratic() -> Self {
        ProblemSpec::Quadratic {
            d: 5,
            cond: 10.0,
            hetero: 1.0,
            sigma: 0.0,
            data_seed: 0,
        }
    }

    pub fn hard() -> Self {
        ProblemSpec::Hard {
            budget: 300,
            l: 1.0,
            delta: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::LogReg { .. } => "logreg",
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Hard { .. } => "hard",
        }
    }

    /// Concrete preset on `n` nodes.
    pub fn preset(&self, n: usize) -> ProblemPreset {
        match *self {
            ProblemSpec::LogReg {
                d,
                m,
                rho,
                sigma_h,
                sigma_n,
                data_seed,
            } => ProblemPreset::LogReg(LogRegParams {
                n,
                d,
                m,
                rho,
                sigma_h,
                sigma_n,
                seed: data_seed,
            }),
            ProblemSpec::Quadratic {
                d,
                cond,
                hetero,
                sigma,
                data_seed,
            } => ProblemPreset::Quadratic {
                n,
                d,
                cond,
                hetero,
                sigma,
                seed: data_seed,
            },
            ProblemSpec::Hard { budget, l, delta } => ProblemPreset::HardChain {
                n,
                budget,
                l,
                delta,
            },
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("[problem] {key} = `{value}` is not valid here"));
        let real = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        let seed = || value.parse::<u64>().map_err(|_| bad());
        match (self, key) {
            (ProblemSpec::LogReg { d, .. }, "d") | (ProblemSpec::Quadratic { d, .. }, "d") => *d = int()?,
            (ProblemSpec::LogReg { m, .. }, "m") => *m = int()?,
            (ProblemSpec::LogReg { rho, .. }, "rho") => *rho = real()?,
            (ProblemSpec::LogReg { sigma_h, .. }, "sigma_h") => *sigma_h = real()?,
            (ProblemSpec::LogReg { sigma_n, .. }, "sigma_n") => *sigma_n = real()?,
            (ProblemSpec::LogReg { data_seed, .. }, "data_seed")
            | (ProblemSpec::Quadratic { data_seed, .. }, "data_seed") => *data_seed = seed()?,
            (ProblemSpec::Quadratic { cond, .. }, "cond") => *cond = real()?,
            (ProblemSpec::Quadratic { hetero, .. }, "hetero") => *hetero = real()?,
            (ProblemSpec::Quadratic { sigma, .. }, "sigma") => *sigma = real()?,
            (ProblemSpec::Hard { budget, .. }, "budget") => *budget = int()?,
            (ProblemSpec::Hard { l, .. }, "L") => *l = real()?,
            (ProblemSpec::Hard { delta, .. }, "delta") => *delta = real()?,
            _ => return Err(bad()),
        }
        Ok(())
    }

    fn lines(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("preset", self.name().to_string())];
        match self {
            ProblemSpec::LogReg {
                d,
                m,
                rho,
                sigma_h,
                sigma_n,
                data_seed,
            } => out.extend([
                ("d", d.to_string()),
                ("m", m.to_string()),
                ("rho", format!("{rho:?}")),
                ("sigma_h", format!("{sigma_h:?}")),
                ("sigma_n", format!("{sigma_n:?}")),
                ("data_seed", data_seed.to_string()),
            ]),
            ProblemSpec::Quadratic {
                d,
                cond,
                hetero,
                sigma,
                data_seed,
            } => out.extend([
                ("d", d.to_string()),
                ("cond", format!("{cond:?}")),
                ("hetero", format!("{hetero:?}")),
                ("sigma", format!("{sigma:?}")),
                ("data_seed", data_seed.to_string()),
            ]),
            ProblemSpec::Hard { budget, l, delta } => out.extend([
                ("budget", budget.to_string()),
                ("L", format!("{l:?}")),
                ("delta", format!("{delta:?}")),
            ]),
        }
        out
    }
}

/// One experiment: a matrix, a problem, an algorithm and its settings,
/// repeated over a list of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    /// Record every this many iterations.
    pub record_every: usize,
    /// Stop a run once `|grad f(xbar)|` is at most this.
    pub stop_below: Option<f64>,
    pub matrix: MatrixSpec,
    /// `(seed, strength)` for [`perturb_weights`].
    pub perturb: Option<(u64, f64)>,
    pub problem: ProblemSpec,
    pub gamma: GammaSpec,
    pub rounds: RoundsSpec,
    pub batch: usize,
    /// Columns of the Push-Sum payload.
    pub dim: usize,
    /// `(seed, scale)`: optimizer rows start at `scale * N(0, I)` drawn from
    /// `NoiseKey(seed, i, 0, 0)`; `None` starts every node at zero.
    pub init: Option<(u64, f64)>,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, matrix: MatrixSpec, problem: ProblemSpec) -> Self {
        Self {
            label: "run".into(),
            algorithm,
            k: 1000,
            seeds: vec![0],
            output: None,
            record_every: 1,
            stop_below: None,
            matrix,
            perturb: None,
            problem,
            gamma: Auto::Fixed(0.01),
            rounds: Auto::Fixed(1),
            batch: 1,
            dim: 1,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.record_every == 0 || self.batch == 0 || self.dim == 0 {
            return Err(Error::Config("record_every, batch and dim must be positive".into()));
        }
        if let Auto::Fixed(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma = {g} must be a finite non-negative number")));
            }
        }
        if let Some((_, scale)) = self.init {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("init_scale = {scale} must be a finite non-negative number")));
            }
        }
        if self.rounds == Auto::Fixed(0) {
            return Err(Error::Config("R must be at least 1".into()));
        }
        if let Some(p) = self.matrix.file() {
            if !p.exists() {
                return Err(Error::Config(format!("matrix file {} does not exist", p.display())));
            }
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(Error::Config(format!("label `{}` is not a valid file stem", self.label)));
        }
        Ok(())
    }

    /// Starting point of every optimizer run.
    pub fn initial_point(&self, n: usize, d: usize) -> Array2<f64> {
        let mut x0 = Array2::zeros((n, d));
        if let Some((seed, scale)) = self.init {
            let mut buf = vec![0.0; d];
            for (i, mut row) in x0.rows_mut().into_iter().enumerate() {
                NoiseKey::new(seed, i, 0, 0).fill_normal(&mut buf);
                row.iter_mut().zip(&buf).for_each(|(x, b)| *x = scale * b);
            }
        }
        x0
    }

    pub fn build_matrix(&self) -> Result<MixingMatrix> {
        let w = self.matrix.build()?;
        match self.perturb {
            Some((seed, strength)) => perturb_weights(&w, seed, strength),
            None => Ok(w),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // Relative matrix files resolve against the config's directory.
        if let MatrixSpec::File(p) = &cfg.matrix {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.matrix = MatrixSpec::File(dir.join(p));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses config text. File references are not checked here.
    pub fn parse(text: &str) -> Result<Self> {
        let sections = split_sections(text)?;
        let get = |sec: &str, key: &str| sections.get(sec).and_then(|m| m.get(key));
        let problem_name = get("problem", "preset").map(|(_, v)| v.as_str()).unwrap_or("logreg");
        let mut problem = match problem_name {
            "logreg" | "logreg-sec5" => ProblemSpec::logreg(),
            "quadratic" => ProblemSpec::quadratic(),
            "hard" => ProblemSpec::hard(),
            other => return Err(Error::Config(format!("unknown problem preset `{other}`"))),
        };
        let matrix = match get("matrix", "spec") {
            Some((_, v)) => v.parse()?,
            None => return Err(Error::Config("[matrix] spec is required".into())),
        };
        let algorithm = match get("experiment", "algorithm") {
            Some((_, v)) => v.parse()?,
            None => Algorithm::Diging,
        };
        let mut cfg = Self::new(algorithm, matrix, ProblemSpec::logreg());
        for (section, entries) in &sections {
            for (key, (line, value)) in entries {
                let bad = |what: &str| Error::Parse {
                    line: *line,
                    msg: format!("[{section}] {key}: {what}"),
                };
                let int = || value.parse::<usize>().map_err(|_| bad("expected an integer"));
                let real = || value.parse::<f64>().map_err(|_| bad("expected a number"));
                match (section.as_str(), key.as_str()) {
                    ("experiment", "algorithm") | ("matrix", "spec") | ("problem", "preset") => {}
                    ("experiment", "label") => cfg.label = value.clone(),
                    ("experiment", "K") => cfg.k = int()?,
                    ("experiment", "seeds") => cfg.seeds = parse_seeds(value).map_err(|_| bad("expected a,b,c"))?,
                    ("experiment", "output") => cfg.output = Some(PathBuf::from(value)),
                    ("experiment", "record_every") => cfg.record_every = int()?,
                    ("experiment", "stop_below") => cfg.stop_below = Some(real()?),
                    ("experiment", "dim") => cfg.dim = int()?,
                    ("matrix", "perturb") => {
                        let seed = cfg.perturb.map_or(0, |p| p.0);
                        cfg.perturb = Some((seed, real()?));
                    }
                    ("matrix", "perturb_seed") => {
                        let strength = cfg.perturb.map_or(0.0, |p| p.1);
                        cfg.perturb = Some((value.parse().map_err(|_| bad("expected a seed"))?, strength));
                    }
                    ("optimizer", "gamma") => cfg.gamma = value.parse().map_err(|_| bad("expected a number or auto"))?,
                    ("optimizer", "R") => cfg.rounds = value.parse().map_err(|_| bad("expected an integer or auto"))?,
                    ("optimizer", "batch") => cfg.batch = int()?,
                    ("optimizer", "init_scale") => {
                        let seed = cfg.init.map_or(0, |p| p.0);
                        cfg.init = Some((seed, real()?));
                    }
                    ("optimizer", "init_seed") => {
                        let scale = cfg.init.map_or(1.0, |p| p.1);
                        cfg.init = Some((value.parse().map_err(|_| bad("expected a seed"))?, scale));
                    }
                    ("problem", k) => problem.set(k, value).map_err(|_| bad("unknown key or bad value"))?,
                    _ => return Err(bad("unknown key")),
                }
            }
        }
        cfg.problem = problem;
        Ok(cfg)
    }

    /// Canonical text form; [`ExperimentConfig::parse`] reads it back.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[experiment]\n");
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("label", self.label.clone());
        line("algorithm", self.algorithm.to_string());
        line("K", self.k.to_string());
        line(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        if let Some(p) = &self.output {
            line("output", p.display().to_string());
        }
        line("record_every", self.record_every.to_string());
        if let Some(t) = self.stop_below {
            line("stop_below", format!("{t:?}"));
        }
        line("dim", self.dim.to_string());
        out.push_str("\n[matrix]\n");
        out.push_str(&format!("spec = {}\n", self.matrix));
        if let Some((seed, strength)) = self.perturb {
            out.push_str(&format!("perturb = {strength:?}\nperturb_seed = {seed}\n"));
        }
        out.push_str("\n[problem]\n");
        for (k, v) in self.problem.lines() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("\n[optimizer]\n");
        out.push_str(&format!("gamma = {}\nR = {}\nbatch = {}\n", self.gamma, self.rounds, self.batch));
        if let Some((seed, scale)) = self.init {
            out.push_str(&format!("init_scale = {scale:?}\ninit_seed = {seed}\n"));
        }
        out
    }
}

/// Comma-separated seed list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad seed `{s}`")))
        })
        .collect()
}

type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut current = "experiment".to_string();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if !["experiment", "matrix", "problem", "optimizer"].contains(&name) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown section [{name}]"),
                });
            }
            current = name.to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected key = value".into(),
        })?;
        let entry = out.entry(current.clone()).or_default();
        if entry
            .insert(k.trim().to_string(), (line_no, v.trim().to_string()))
            .is_some()
        {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{}`", k.trim()),
            });
        }
    }
    Ok(out)
}

use std::path::{Path, PathBuf};

use nctransport::ncalg::{FloatPoly, NCPoly, Signature, TermDoc, Word};
use nctransport::rmt::ChainConfig;
use nctransport::scalar::Coeff;
use nctransport::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Check,
    Solve,
    Verify,
    Onevar,
    Rmt,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Onevar => "onevar",
            Command::Rmt => "rmt",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnevarBlock {
    pub betas: Vec<f64>,
    pub kmax: usize,
    /// Perturbative order of the moment oracle.
    pub order: usize,
    /// CSV side-file; defaults to the report path with a `.csv` extension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Default for OnevarBlock {
    fn default() -> Self {
        Self {
            betas: vec![1e-4, 1e-3],
            kmax: 8,
            order: 8,
            csv: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmtBlock {
    /// Matrix size `N`.
    pub size: usize,
    pub draws: usize,
    pub chains: usize,
    pub step_size: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for RmtBlock {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            size: 32,
            draws: 200,
            chains: 4,
            step_size: c.step_size,
            steps: c.steps,
            burn_in: c.burn_in,
            thin: c.thin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    pub test_degree: usize,
    /// Degree cap for the Schwinger-Dyson evaluation; the solver's when unset.
    pub eval_dmax: Option<usize>,
    pub lemma_n: usize,
    pub lemma_degree: usize,
    pub lemma_trials: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            test_degree: 3,
            eval_dmax: None,
            lemma_n: 2,
            lemma_degree: 4,
            lemma_trials: 50,
        }
    }
}

/// One run, read from TOML. Every key is optional; unknown keys are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Number of generators.
    pub n: usize,
    /// Potential as `[[letters...], "coefficient"]` pairs, letters 1-based.
    pub w: Vec<TermDoc>,
    /// Multiplies every coefficient of `w`.
    pub beta: Option<f64>,
    pub a: f64,
    pub a_prime: f64,
    pub rho: f64,
    pub dmax: usize,
    pub tol_fix: f64,
    pub max_iter: usize,
    pub tol_series: f64,
    pub override_conditions: bool,
    pub onevar: OnevarBlock,
    pub rmt: RmtBlock,
    pub verify: VerifyBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            command: None,
            seed: 1,
            out: None,
            n: 2,
            w: Vec::new(),
            beta: None,
            a: s.a,
            a_prime: s.a_prime,
            rho: s.rho,
            dmax: s.dmax,
            tol_fix: s.tol_fix,
            max_iter: s.max_iter,
            tol_series: s.tol_series,
            override_conditions: s.override_conditions,
            onevar: OnevarBlock::default(),
            rmt: RmtBlock::default(),
            verify: VerifyBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            a: self.a,
            a_prime: self.a_prime,
            rho: self.rho,
            dmax: self.dmax,
            tol_fix: self.tol_fix,
            max_iter: self.max_iter,
            tol_series: self.tol_series,
            override_conditions: self.override_conditions,
        }
    }

    pub fn chain(&self) -> ChainConfig {
        ChainConfig {
            step_size: self.rmt.step_size,
            steps: self.rmt.steps,
            burn_in: self.rmt.burn_in,
            thin: self.rmt.thin,
            seed: self.seed,
        }
    }

    /// `β·W` in the solver's signature.
    pub fn potential(&self) -> Result<FloatPoly, CliError> {
        let cfg = self.solver();
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let sig = Signature::new(self.n, self.dmax).map_err(|e| CliError::Config(e.to_string()))?;
        let beta = self.beta.unwrap_or(1.0);
        let mut terms = Vec::with_capacity(self.w.len());
        for TermDoc(letters, coeff) in &self.w {
            if letters.len() > self.dmax {
                return Err(CliError::Config(format!(
                    "word {letters:?} is longer than dmax = {}",
                    self.dmax
                )));
            }
            let word = Word::from_one_based(letters, sig).map_err(|e| CliError::Config(e.to_string()))?;
            let c = f64::parse_decimal(coeff).map_err(|e| CliError::Config(format!("coefficient {coeff:?}: {e}")))?;
            terms.push((word, beta * c));
        }
        NCPoly::from_terms(sig, terms).map_err(|e| CliError::Config(e.to_string()))
    }
}

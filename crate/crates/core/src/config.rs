//! Plain text key=value run configuration, shared by the command line
//! front end and any scripted driver. Unknown keys are rejected so typos
//! surface immediately; '#' starts a comment.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Result, TreeError};
use crate::params::DegreeParams;
use crate::prep::PrepMap;
use crate::rules::{RuleName, RuleSet};
use crate::suite::{NumericOptions, SymbolicOptions};

/// Which noise realisation drives the numeric model.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseChoice {
    /// Fixed trigonometric fields; byte-for-byte reproducible.
    Deterministic,
    /// Uniform samples from the given seed.
    Seeded(u64),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub rule: RuleName,
    /// Degree of the smooth noise; None picks the rule set default.
    pub alpha: Option<BigRational>,
    /// Spatial dimension; None picks the rule set default.
    pub d: Option<usize>,
    /// Scaling, time first; None picks the parabolic default.
    pub scaling: Option<Vec<u32>>,
    /// Grid sizes, time first; None picks 48 x 32 ... (spatial 32s).
    pub grid: Option<Vec<usize>>,
    /// Support radius of the kernel cutoff.
    pub cutoff: f64,
    pub noise: NoiseChoice,
    /// Preparation map preset name.
    pub prep: String,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub base_points: usize,
    pub max_noises: u64,
    pub max_edges: u64,
    pub cap: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            rule: RuleName::Gkpz,
            alpha: None,
            d: None,
            scaling: None,
            grid: None,
            cutoff: 0.25,
            noise: NoiseChoice::Deterministic,
            prep: "trivial".to_string(),
            tol_rel: 1e-8,
            tol_abs: 1e-12,
            base_points: 8,
            max_noises: 2,
            max_edges: 5,
            cap: 200_000,
        }
    }
}

/// Parse a rational written as "P/Q" or as a plain integer.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || TreeError::Config(format!("invalid rational '{s}', expected P/Q"));
    let mut parts = s.splitn(2, '/');
    let p: BigInt = parts.next().unwrap().trim().parse().map_err(|_| bad())?;
    let q: BigInt = match parts.next() {
        Some(q) => q.trim().parse().map_err(|_| bad())?,
        None => BigInt::from(1),
    };
    if q == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

/// Parse grid sizes written as "48x32" or "48,32".
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let sizes: Result<Vec<usize>> = s
        .split(|c| c == 'x' || c == 'X' || c == ',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| TreeError::Config(format!("invalid grid spec '{s}'")))
        })
        .collect();
    let sizes = sizes?;
    if sizes.is_empty() {
        return Err(TreeError::Config(format!("invalid grid spec '{s}'")));
    }
    Ok(sizes)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                TreeError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                TreeError::Config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| TreeError::Config(format!("invalid integer '{v}'")))
        };
        let float = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| TreeError::Config(format!("invalid number '{v}'")))
        };
        match key {
            "rule" => self.rule = RuleName::parse(value)?,
            "alpha" => self.alpha = Some(parse_rational(value)?),
            "d" => self.d = Some(num(value)? as usize),
            "scaling" => {
                let s: Result<Vec<u32>> = value
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse()
                            .map_err(|_| TreeError::Config(format!("invalid scaling '{value}'")))
                    })
                    .collect();
                self.scaling = Some(s?);
            }
            "grid" => self.grid = Some(parse_grid(value)?),
            "cutoff" => self.cutoff = float(value)?,
            "noise" => match value {
                "deterministic" => self.noise = NoiseChoice::Deterministic,
                other => {
                    return Err(TreeError::Config(format!(
                        "unknown noise '{other}', expected deterministic or seed = N"
                    )))
                }
            },
            "seed" => self.noise = NoiseChoice::Seeded(num(value)?),
            "prep" => self.prep = value.to_string(),
            "tol" | "tol_rel" => self.tol_rel = float(value)?,
            "tol_abs" => self.tol_abs = float(value)?,
            "base_points" => self.base_points = num(value)? as usize,
            "max_noises" => self.max_noises = num(value)?,
            "max_edges" => self.max_edges = num(value)?,
            "cap" => self.cap = num(value)? as usize,
            other => return Err(TreeError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn rules(&self) -> RuleSet {
        RuleSet::new(self.rule)
    }

    /// Degree parameters for the run: rule set defaults overridden by any
    /// explicit alpha / d / scaling.
    pub fn params(&self) -> Result<DegreeParams> {
        let base = self.rules().default_params();
        let alpha = self.alpha.clone().unwrap_or_else(|| base.alpha.clone());
        let d = self.d.unwrap_or(base.d);
        let scaling = match &self.scaling {
            Some(s) => Some(s.clone()),
            None if d == base.d => Some(base.scaling.clone()),
            None => None,
        };
        DegreeParams::new(alpha, d, scaling)
    }

    pub fn prep_map(&self) -> Result<PrepMap> {
        PrepMap::preset(&self.prep)
    }

    pub fn symbolic_options(&self) -> SymbolicOptions {
        SymbolicOptions {
            max_noises: self.max_noises,
            max_edges: self.max_edges,
            cap: self.cap,
        }
    }

    pub fn numeric_options(&self, d: usize) -> NumericOptions {
        let grid_sizes = self.grid.clone().unwrap_or_else(|| {
            let mut g = vec![48];
            g.extend(std::iter::repeat(32).take(d));
            g
        });
        NumericOptions {
            grid_sizes,
            seed: match self.noise {
                NoiseChoice::Deterministic => None,
                NoiseChoice::Seeded(s) => Some(s),
            },
            base_points: self.base_points,
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            max_noises: self.max_noises,
            max_edges: self.max_edges,
            cap: self.cap,
            cutoff: self.cutoff,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::rat;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# run configuration
rule = gkpz
alpha = -151/100
d = 1
scaling = 2,1
grid = 48x32
cutoff = 0.25
seed = 7
prep = trivial
tol = 1e-8
tol_abs = 1e-12
base_points = 8
max_noises = 2
max_edges = 5
";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.rule, RuleName::Gkpz);
        assert_eq!(cfg.alpha, Some(rat(-151, 100)));
        assert_eq!(cfg.noise, NoiseChoice::Seeded(7));
        assert_eq!(cfg.grid, Some(vec![48, 32]));
        let params = cfg.params().unwrap();
        assert_eq!(params.d, 1);
        let opts = cfg.numeric_options(params.d);
        assert_eq!(opts.grid_sizes, vec![48, 32]);
        assert_eq!(opts.seed, Some(7));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse("frobnicate = 1").is_err());
        assert!(Config::parse("alpha = one half").is_err());
        assert!(Config::parse("grid = 48xx").is_err());
        assert!(Config::parse("rule").is_err());
    }

    #[test]
    fn defaults_follow_the_rule_set() {
        let mut cfg = Config::default();
        cfg.set("rule", "phi43").unwrap();
        let params = cfg.params().unwrap();
        assert_eq!(params.d, 3);
        assert_eq!(params.alpha, rat(-251, 100));
        assert_eq!(cfg.numeric_options(params.d).grid_sizes, vec![48, 32, 32, 32]);
    }
}

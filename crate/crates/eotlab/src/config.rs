//! The flat, line-oriented experiment configuration format.
//!
//! Files consist of `[section]` tags and `key = value` lines; `#` starts a
//! comment. Sections are `[instance]`, `[sweep]`, `[detach]` (optional) and
//! `[output]`. Unknown keys are rejected, defaults are filled in, and
//! `serialize` round-trips through `parse_config` exactly.
//!
//! ```text
//! [instance]
//! id = B
//! dimension = 1
//! source_domain = box 0 1
//! target_domain = box 0 2
//! source_density = uniform
//! target_density = uniform
//! resolution = 128
//!
//! [sweep]
//! epsilons = 0.2 0.1 0.05 0.02 0.01
//! ps = 2 3
//! subset_margin = 0.1
//! tol = 1e-9
//! max_iter = 1000000
//! seed = 0
//!
//! [output]
//! dir = out
//! ```

use crate::marginals::{ConvexDomain, DensitySpec, GeometryError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: malformed syntax: {text}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key '{key}' outside any section")]
    KeyOutsideSection { line: usize, key: String },
    #[error("invalid value for '{key}': {reason}")]
    Invalid { key: String, reason: String },
    #[error("missing required key '{key}' in section [{section}]")]
    Missing { section: String, key: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Domain declaration as written in the config.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Box(Vec<(f64, f64)>),
    Polygon(Vec<[f64; 2]>),
    RegularPolygon {
        center: [f64; 2],
        radius: f64,
        segments: usize,
    },
}

impl DomainSpec {
    pub fn to_domain(&self) -> Result<ConvexDomain, GeometryError> {
        match self {
            DomainSpec::Box(iv) => ConvexDomain::new_box(iv.clone()),
            DomainSpec::Polygon(pts) => ConvexDomain::polygon(pts),
            DomainSpec::RegularPolygon {
                center,
                radius,
                segments,
            } => ConvexDomain::regular_polygon(*center, *radius, *segments),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Box(iv) => iv.len(),
            _ => 2,
        }
    }

    fn parse(key: &str, text: &str) -> Result<Self, ConfigError> {
        let mut parts = text.split_whitespace();
        let head = parts.next().ok_or_else(|| invalid(key, "empty domain"))?;
        let nums: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| invalid(key, format!("bad number '{t}'")))
            })
            .collect::<Result<_, _>>()?;
        match head {
            "box" => {
                if nums.is_empty() || nums.len() % 2 != 0 {
                    return Err(invalid(key, "box needs an even number of bounds"));
                }
                Ok(DomainSpec::Box(
                    nums.chunks(2).map(|c| (c[0], c[1])).collect(),
                ))
            }
            "polygon" => {
                if nums.len() < 6 || nums.len() % 2 != 0 {
                    return Err(invalid(key, "polygon needs at least 3 (x, y) pairs"));
                }
                Ok(DomainSpec::Polygon(
                    nums.chunks(2).map(|c| [c[0], c[1]]).collect(),
                ))
            }
            "regular-polygon" => {
                if nums.len() != 4 {
                    return Err(invalid(key, "regular-polygon needs cx cy radius segments"));
                }
                Ok(DomainSpec::RegularPolygon {
                    center: [nums[0], nums[1]],
                    radius: nums[2],
                    segments: nums[3] as usize,
                })
            }
            other => Err(invalid(key, format!("unknown domain shape '{other}'"))),
        }
    }

    fn serialize(&self) -> String {
        match self {
            DomainSpec::Box(iv) => {
                let mut s = String::from("box");
                for (lo, hi) in iv {
                    s.push_str(&format!(" {lo} {hi}"));
                }
                s
            }
            DomainSpec::Polygon(pts) => {
                let mut s = String::from("polygon");
                for p in pts {
                    s.push_str(&format!(" {} {}", p[0], p[1]));
                }
                s
            }
            DomainSpec::RegularPolygon {
                center,
                radius,
                segments,
            } => {
                format!(
                    "regular-polygon {} {} {radius} {segments}",
                    center[0], center[1]
                )
            }
        }
    }
}

/// Density declaration: a registry name plus numeric parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityConfig {
    Uniform,
    SinePerturbed { amp: f64, freq: f64 },
    Linear { slope: f64 },
    GaussianTruncated { center: Vec<f64>, sigma: f64 },
}

impl DensityConfig {
    pub fn build(&self, domain: &ConvexDomain) -> Result<DensitySpec, ConfigError> {
        match self {
            DensityConfig::Uniform => Ok(DensitySpec::uniform(domain)),
            DensityConfig::SinePerturbed { amp, freq } => {
                if amp.abs() >= 1.0 {
                    return Err(invalid("density", "sine amplitude must satisfy |amp| < 1"));
                }
                if !domain.is_box() {
                    return Err(invalid("density", "sine-perturbed requires a box domain"));
                }
                Ok(DensitySpec::sine_perturbed(domain, *amp, *freq))
            }
            DensityConfig::Linear { slope } => {
                if !domain.is_box() {
                    return Err(invalid("density", "linear requires a box domain"));
                }
                Ok(DensitySpec::linear(domain, *slope))
            }
            DensityConfig::GaussianTruncated { center, sigma } => {
                if !domain.is_box() {
                    return Err(invalid(
                        "density",
                        "gaussian-truncated requires a box domain",
                    ));
                }
                if center.len() != domain.dimension() {
                    return Err(invalid("density", "gaussian center dimension mismatch"));
                }
                if *sigma <= 0.0 {
                    return Err(invalid("density", "gaussian sigma must be positive"));
                }
                Ok(DensitySpec::gaussian_truncated(
                    domain,
                    center.clone(),
                    *sigma,
                ))
            }
        }
    }

    fn parse(key: &str, text: &str, dim: usize) -> Result<Self, ConfigError> {
        let mut parts = text.split_whitespace();
        let head = parts.next().ok_or_else(|| invalid(key, "empty density"))?;
        let nums: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| invalid(key, format!("bad number '{t}'")))
            })
            .collect::<Result<_, _>>()?;
        match head {
            "uniform" => Ok(DensityConfig::Uniform),
            "sine-perturbed" => {
                if nums.len() != 2 {
                    return Err(invalid(key, "sine-perturbed needs amplitude and frequency"));
                }
                Ok(DensityConfig::SinePerturbed {
                    amp: nums[0],
                    freq: nums[1],
                })
            }
            "linear" => {
                if nums.len() != 1 {
                    return Err(invalid(key, "linear needs a slope"));
                }
                Ok(DensityConfig::Linear { slope: nums[0] })
            }
            "gaussian-truncated" => {
                if nums.len() != dim + 1 {
                    return Err(invalid(
                        key,
                        "gaussian-truncated needs center coords and sigma",
                    ));
                }
                Ok(DensityConfig::GaussianTruncated {
                    center: nums[..dim].to_vec(),
                    sigma: nums[dim],
                })
            }
            other => Err(invalid(key, format!("unknown density '{other}'"))),
        }
    }

    fn serialize(&self) -> String {
        match self {
            DensityConfig::Uniform => "uniform".to_string(),
            DensityConfig::SinePerturbed { amp, freq } => format!("sine-perturbed {amp} {freq}"),
            DensityConfig::Linear { slope } => format!("linear {slope}"),
            DensityConfig::GaussianTruncated { center, sigma } => {
                let mut s = String::from("gaussian-truncated");
                for c in center {
                    s.push_str(&format!(" {c}"));
                }
                s.push_str(&format!(" {sigma}"));
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceConfig {
    pub id: String,
    pub dimension: usize,
    pub source_domain: DomainSpec,
    pub target_domain: DomainSpec,
    pub source_density: DensityConfig,
    pub target_density: DensityConfig,
    pub resolution: usize,
}

/// Detachment-check section consumed by the `detach` command.
#[derive(Debug, Clone, PartialEq)]
pub struct DetachConfig {
    pub domain: DomainSpec,
    pub z_samples: usize,
    pub r_samples: usize,
    pub integral_points: usize,
    /// Named checks to run: any of "prop31", "quadratic", "sqrt".
    pub checks: Vec<String>,
    /// Exit-gate floor for the sampled convex-ball ratio.
    pub ratio_floor: f64,
}

impl Default for DetachConfig {
    fn default() -> Self {
        DetachConfig {
            domain: DomainSpec::Box(vec![(0.0, 1.0), (0.0, 1.0)]),
            z_samples: 16,
            r_samples: 16,
            integral_points: 100_000,
            checks: vec!["prop31".into(), "quadratic".into(), "sqrt".into()],
            ratio_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    /// Strictly decreasing after canonicalization.
    pub epsilons: Vec<f64>,
    pub ps: Vec<f64>,
    pub subset_margin: f64,
    /// Hölder exponent for the seminorm column; derived from the measured
    /// reference exponent when absent.
    pub beta: Option<f64>,
    pub tol: f64,
    pub max_iter: u64,
    pub seed: u64,
    pub out_dir: String,
    pub detach: Option<DetachConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inst = &self.instance;
        if inst.id.is_empty() {
            return Err(invalid("id", "instance id must be nonempty"));
        }
        if inst.dimension == 0 || inst.dimension > 2 {
            return Err(invalid("dimension", "supported dimensions are 1 and 2"));
        }
        if inst.source_domain.dimension() != inst.dimension
            || inst.target_domain.dimension() != inst.dimension
        {
            return Err(invalid(
                "dimension",
                "domain dimensions disagree with 'dimension'",
            ));
        }
        if inst.resolution < 8 {
            return Err(invalid(
                "resolution",
                "resolution must be at least 8 per axis",
            ));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "need at least one epsilon"));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(invalid("epsilons", "epsilons must be positive"));
        }
        if self.epsilons.windows(2).any(|w| w[0] <= w[1]) {
            return Err(invalid("epsilons", "epsilons must be strictly decreasing"));
        }
        if self.ps.iter().any(|&p| p < 1.0) {
            return Err(invalid("ps", "p exponents must be >= 1"));
        }
        if !(self.subset_margin > 0.0) {
            return Err(invalid("subset_margin", "margin must be positive"));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b <= 1.0) {
                return Err(invalid("beta", "beta must lie in (0, 1]"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "iteration budget must be positive"));
        }
        Ok(())
    }

    /// Canonical text form; `parse_config(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let i = &self.instance;
        let mut s = String::new();
        s.push_str("[instance]\n");
        s.push_str(&format!("id = {}\n", i.id));
        s.push_str(&format!("dimension = {}\n", i.dimension));
        s.push_str(&format!(
            "source_domain = {}\n",
            i.source_domain.serialize()
        ));
        s.push_str(&format!(
            "target_domain = {}\n",
            i.target_domain.serialize()
        ));
        s.push_str(&format!(
            "source_density = {}\n",
            i.source_density.serialize()
        ));
        s.push_str(&format!(
            "target_density = {}\n",
            i.target_density.serialize()
        ));
        s.push_str(&format!("resolution = {}\n", i.resolution));
        s.push_str("\n[sweep]\n");
        let eps: Vec<String> = self.epsilons.iter().map(|e| e.to_string()).collect();
        s.push_str(&format!("epsilons = {}\n", eps.join(" ")));
        let ps: Vec<String> = self.ps.iter().map(|p| p.to_string()).collect();
        s.push_str(&format!("ps = {}\n", ps.join(" ")));
        s.push_str(&format!("subset_margin = {}\n", self.subset_margin));
        if let Some(b) = self.beta {
            s.push_str(&format!("beta = {b}\n"));
        }
        s.push_str(&format!("tol = {}\n", self.tol));
        s.push_str(&format!("max_iter = {}\n", self.max_iter));
        s.push_str(&format!("seed = {}\n", self.seed));
        if let Some(d) = &self.detach {
            s.push_str("\n[detach]\n");
            s.push_str(&format!("domain = {}\n", d.domain.serialize()));
            s.push_str(&format!("z_samples = {}\n", d.z_samples));
            s.push_str(&format!("r_samples = {}\n", d.r_samples));
            s.push_str(&format!("integral_points = {}\n", d.integral_points));
            s.push_str(&format!("checks = {}\n", d.checks.join(" ")));
            s.push_str(&format!("ratio_floor = {}\n", d.ratio_floor));
        }
        s.push_str("\n[output]\n");
        s.push_str(&format!("dir = {}\n", self.out_dir));
        s
    }
}

/// Parse and validate a configuration, filling defaults (tol 1e-9,
/// max_iter 10^6, seed 0, ps = {2, 3}) and canonicalizing the epsilon
/// schedule to strictly decreasing order.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut section = String::new();
    // raw key-value store per section
    let mut inst: Vec<(usize, String, String)> = Vec::new();
    let mut sweep: Vec<(usize, String, String)> = Vec::new();
    let mut detach: Vec<(usize, String, String)> = Vec::new();
    let mut output: Vec<(usize, String, String)> = Vec::new();
    let mut saw_detach = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            match section.as_str() {
                "instance" | "sweep" | "output" => {}
                "detach" => saw_detach = true,
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            }
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: t.to_string(),
            });
        };
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        match section.as_str() {
            "instance" => inst.push((line, key, val)),
            "sweep" => sweep.push((line, key, val)),
            "detach" => detach.push((line, key, val)),
            "output" => output.push((line, key, val)),
            _ => return Err(ConfigError::KeyOutsideSection { line, key }),
        }
    }

    let take = |store: &[(usize, String, String)],
                section: &str,
                allowed: &[&str]|
     -> Result<(), ConfigError> {
        for (line, key, _) in store {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    line: *line,
                    section: section.to_string(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    };
    take(
        &inst,
        "instance",
        &[
            "id",
            "dimension",
            "source_domain",
            "target_domain",
            "source_density",
            "target_density",
            "resolution",
        ],
    )?;
    take(
        &sweep,
        "sweep",
        &[
            "epsilons",
            "ps",
            "subset_margin",
            "beta",
            "tol",
            "max_iter",
            "seed",
        ],
    )?;
    take(
        &detach,
        "detach",
        &[
            "domain",
            "z_samples",
            "r_samples",
            "integral_points",
            "checks",
            "ratio_floor",
        ],
    )?;
    take(&output, "output", &["dir"])?;

    let get = |store: &[(usize, String, String)], key: &str| -> Option<String> {
        store
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map(|(_, _, v)| v.clone())
    };
    let require = |store: &[(usize, String, String)], section: &str, key: &str| {
        get(store, key).ok_or_else(|| ConfigError::Missing {
            section: section.to_string(),
            key: key.to_string(),
        })
    };

    let parse_f64 = |key: &str, v: &str| {
        v.parse::<f64>()
            .map_err(|_| invalid(key, format!("bad number '{v}'")))
    };
    let parse_usize = |key: &str, v: &str| {
        v.parse::<usize>()
            .map_err(|_| invalid(key, format!("bad integer '{v}'")))
    };
    let parse_list = |key: &str, v: &str| -> Result<Vec<f64>, ConfigError> {
        v.split_whitespace()
            .map(|t| parse_f64(key, t))
            .collect::<Result<Vec<f64>, _>>()
    };

    let dimension = parse_usize("dimension", &require(&inst, "instance", "dimension")?)?;
    let instance = InstanceConfig {
        id: require(&inst, "instance", "id")?,
        dimension,
        source_domain: DomainSpec::parse(
            "source_domain",
            &require(&inst, "instance", "source_domain")?,
        )?,
        target_domain: DomainSpec::parse(
            "target_domain",
            &require(&inst, "instance", "target_domain")?,
        )?,
        source_density: DensityConfig::parse(
            "source_density",
            &get(&inst, "source_density").unwrap_or_else(|| "uniform".into()),
            dimension,
        )?,
        target_density: DensityConfig::parse(
            "target_density",
            &get(&inst, "target_density").unwrap_or_else(|| "uniform".into()),
            dimension,
        )?,
        resolution: parse_usize("resolution", &require(&inst, "instance", "resolution")?)?,
    };

    let mut epsilons = parse_list("epsilons", &require(&sweep, "sweep", "epsilons")?)?;
    epsilons.sort_by(|a, b| b.partial_cmp(a).unwrap());
    epsilons.dedup();

    let ps = match get(&sweep, "ps") {
        Some(v) => parse_list("ps", &v)?,
        None => vec![2.0, 3.0],
    };
    let subset_margin = match get(&sweep, "subset_margin") {
        Some(v) => parse_f64("subset_margin", &v)?,
        None => 0.1,
    };
    let beta = match get(&sweep, "beta") {
        Some(v) => Some(parse_f64("beta", &v)?),
        None => None,
    };
    let tol = match get(&sweep, "tol") {
        Some(v) => parse_f64("tol", &v)?,
        None => 1e-9,
    };
    let max_iter = match get(&sweep, "max_iter") {
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| invalid("max_iter", format!("bad integer '{v}'")))?,
        None => 1_000_000,
    };
    let seed = match get(&sweep, "seed") {
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| invalid("seed", format!("bad integer '{v}'")))?,
        None => 0,
    };
    let out_dir = get(&output, "dir").unwrap_or_else(|| "out".into());

    let detach_cfg = if saw_detach {
        let default = DetachConfig::default();
        Some(DetachConfig {
            domain: match get(&detach, "domain") {
                Some(v) => DomainSpec::parse("domain", &v)?,
                None => default.domain.clone(),
            },
            z_samples: match get(&detach, "z_samples") {
                Some(v) => parse_usize("z_samples", &v)?,
                None => default.z_samples,
            },
            r_samples: match get(&detach, "r_samples") {
                Some(v) => parse_usize("r_samples", &v)?,
                None => default.r_samples,
            },
            integral_points: match get(&detach, "integral_points") {
                Some(v) => parse_usize("integral_points", &v)?,
                None => default.integral_points,
            },
            checks: match get(&detach, "checks") {
                Some(v) => v.split_whitespace().map(str::to_string).collect(),
                None => default.checks.clone(),
            },
            ratio_floor: match get(&detach, "ratio_floor") {
                Some(v) => parse_f64("ratio_floor", &v)?,
                None => default.ratio_floor,
            },
        })
    } else {
        None
    };

    let cfg = ExperimentConfig {
        instance,
        epsilons,
        ps,
        subset_margin,
        beta,
        tol,
        max_iter,
        seed,
        out_dir,
        detach: detach_cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Ready-made instance configurations used by the test and example suite.
pub mod presets {
    use super::*;

    fn base(
        id: &str,
        dimension: usize,
        source_domain: DomainSpec,
        target_domain: DomainSpec,
        source_density: DensityConfig,
        resolution: usize,
        epsilons: Vec<f64>,
    ) -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceConfig {
                id: id.to_string(),
                dimension,
                source_domain,
                target_domain,
                source_density,
                target_density: DensityConfig::Uniform,
                resolution,
            },
            epsilons,
            ps: vec![2.0, 3.0],
            subset_margin: 0.1,
            beta: None,
            tol: 1e-9,
            max_iter: 1_000_000,
            seed: 0,
            out_dir: "out".into(),
            detach: None,
        }
    }

    /// Identity: uniform (0,1) to itself, 128 nodes.
    pub fn instance_a() -> ExperimentConfig {
        base(
            "A",
            1,
            DomainSpec::Box(vec![(0.0, 1.0)]),
            DomainSpec::Box(vec![(0.0, 1.0)]),
            DensityConfig::Uniform,
            128,
            vec![0.2, 0.1, 0.05, 0.02, 0.01],
        )
    }

    /// Stretch: uniform (0,1) to uniform (0,2); the map is 2x, value 1/6.
    pub fn instance_b() -> ExperimentConfig {
        base(
            "B",
            1,
            DomainSpec::Box(vec![(0.0, 1.0)]),
            DomainSpec::Box(vec![(0.0, 2.0)]),
            DensityConfig::Uniform,
            128,
            vec![0.2, 0.1, 0.05, 0.02, 0.01],
        )
    }

    /// Planar identity on the unit square, 12 nodes per axis.
    pub fn instance_c() -> ExperimentConfig {
        base(
            "C",
            2,
            DomainSpec::Box(vec![(0.0, 1.0), (0.0, 1.0)]),
            DomainSpec::Box(vec![(0.0, 1.0), (0.0, 1.0)]),
            DensityConfig::Uniform,
            12,
            vec![0.2, 0.1, 0.05, 0.02, 0.01],
        )
    }

    /// Sine-perturbed source against a uniform target on (0,1).
    pub fn instance_d() -> ExperimentConfig {
        base(
            "D",
            1,
            DomainSpec::Box(vec![(0.0, 1.0)]),
            DomainSpec::Box(vec![(0.0, 1.0)]),
            DensityConfig::SinePerturbed {
                amp: 0.3,
                freq: 1.0,
            },
            128,
            vec![0.2, 0.1, 0.05, 0.02, 0.01],
        )
    }
}

//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    KrEcho,
    KrClassical,
    OscClassical,
    OscSemiclassical,
    OscAllegiance,
    GlauberRoundtrip,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::KrEcho,
        Self::KrClassical,
        Self::OscClassical,
        Self::OscSemiclassical,
        Self::OscAllegiance,
        Self::GlauberRoundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KrEcho => "kr_echo",
            Self::KrClassical => "kr_classical",
            Self::OscClassical => "osc_classical",
            Self::OscSemiclassical => "osc_semiclassical",
            Self::OscAllegiance => "osc_allegiance",
            Self::GlauberRoundtrip => "glauber_roundtrip",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

const COMMON: &[(&str, &str)] = &[("seed", "20240521"), ("output_dir", "runs"), ("threads", "0"), ("plot", "true")];

const KR: &[(&str, &str)] = &[
    ("N", "8192"),
    ("K", "10"),
    ("eps_over_hbar", "1.1"),
    ("packets", "100"),
    ("placement", "random"),
    ("lattice_nx", "10"),
    ("lattice_ny", "10"),
    ("sigma_theta", "auto"),
    ("theta_min", "0.2"),
    ("theta_max", "0.3"),
    ("p_min", "0.3"),
    ("p_max", "0.4"),
    ("steps", "40"),
    ("kick_order", "drift_then_kick"),
    ("split", "asymmetric"),
    ("cross", "false"),
    ("fit_t1", "1"),
    ("fit_t2", "7"),
    ("plateau_from", "25"),
];

const KR_CLASSICAL: &[(&str, &str)] = &[
    ("gamma", "2"),
    ("n_points", "1000000"),
    ("lyapunov_transient", "100"),
    ("lyapunov_iter", "100000"),
];

const OSC: &[(&str, &str)] = &[
    ("omega0", "1"),
    ("hbar", "1e-5"),
    ("dt", "1e-3"),
    ("sample_dt", "0.1"),
    ("drive", "pulse"),
    ("pulse_area", "0.6"),
    ("pulse_width", "0.01"),
    ("harmonics", "40"),
    ("g1", "1.5"),
    ("g2", "1.5"),
    ("chi", "1.0471975511965976"),
    ("modes", ""),
    ("p_kind", "gaussian_ring"),
    ("p_center_re", "3"),
    ("p_center_im", "0"),
    ("p_width", "1e-3"),
    ("n_samples", "10000"),
    ("T", "15"),
];

const OSC_CLASSICAL: &[(&str, &str)] = &[("corr_c", "1")];
const OSC_ALLEGIANCE: &[(&str, &str)] = &[("fgr_sigmas", "0.05,0.1"), ("strong_sigmas", "1,2")];
const OSC_SEMICLASSICAL: &[(&str, &str)] = &[
    ("alpha0_re", "3"),
    ("alpha0_im", "0"),
    ("sigma", "1"),
    ("n_mc", "10000"),
];
const GLAUBER: &[(&str, &str)] = &[
    ("hbar", "0.1"),
    ("width_over_hbar", "10"),
    ("n_max", "400"),
    ("temperature", "0.5"),
    ("omega0", "1"),
    ("thermal_n_max", "200"),
    ("grid_points", "101"),
];

fn defaults(kind: ExperimentKind) -> Vec<(&'static str, &'static str)> {
    let mut v: Vec<(&str, &str)> = COMMON.to_vec();
    match kind {
        ExperimentKind::KrEcho => v.extend_from_slice(KR),
        ExperimentKind::KrClassical => {
            v.extend_from_slice(KR);
            v.extend_from_slice(KR_CLASSICAL);
        }
        ExperimentKind::OscClassical => {
            v.extend_from_slice(OSC);
            v.extend_from_slice(OSC_CLASSICAL);
            // Diffusion is measured on a wide ensemble over a longer run.
            override_default(&mut v, "p_width", "1");
            override_default(&mut v, "T", "30");
        }
        ExperimentKind::OscAllegiance => {
            v.extend_from_slice(OSC);
            v.extend_from_slice(OSC_ALLEGIANCE);
        }
        ExperimentKind::OscSemiclassical => {
            v.extend_from_slice(OSC);
            v.extend_from_slice(OSC_SEMICLASSICAL);
            override_default(&mut v, "T", "8");
        }
        ExperimentKind::GlauberRoundtrip => v.extend_from_slice(GLAUBER),
    }
    v
}

fn override_default(v: &mut [(&'static str, &'static str)], key: &str, value: &'static str) {
    if let Some(e) = v.iter_mut().find(|e| e.0 == key) {
        e.1 = value;
    }
}

/// Fully resolved configuration: every key known to the experiment kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let values = defaults(kind).into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self { kind, values }
    }

    /// Parses `key = value` lines; `#` starts a comment. `kind` is mandatory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let kind = pairs
            .iter()
            .find(|(k, _)| k == "kind")
            .ok_or_else(|| Error::Config("missing `kind`".into()))?
            .1
            .parse()?;
        let mut cfg = Self::new(kind);
        for (k, v) in pairs.into_iter().filter(|(k, _)| k != "kind") {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Reads a config file and applies `key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "kind" {
            return Err(Error::Config("`kind` cannot be overridden".into()));
        }
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key `{key}` for {}", self.kind))),
        }
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("key `{key}` not defined for {}", self.kind)))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| Error::Config(format!("`{key} = {v}` has the wrong type")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse_value(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        // Accept 1e6-style integers.
        match self.parse_value::<usize>(key) {
            Ok(v) => Ok(v),
            Err(e) => {
                let f = self.f64(key).map_err(|_| e)?;
                if f >= 0.0 && f.fract() == 0.0 {
                    Ok(f as usize)
                } else {
                    Err(Error::Config(format!("`{key}` must be a non-negative integer")))
                }
            }
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse_value(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse_value(key)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("`{key}`: bad number `{s}`"))))
            .collect()
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.get("output_dir")?))
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Config text reproducing this exact resolved configuration.
    pub fn to_text(&self) -> String {
        let mut s = format!("kind = {}\n", self.kind);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

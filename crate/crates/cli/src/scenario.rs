//! TOML scenario files.
//!
//! ```toml
//! cells = 2
//! antennas = [3, 3]
//! power = [5.0, 1.0]
//! noise = [1.0, 1.0]
//!
//! [channels.generate]
//! seed = 42
//! distribution = "cn01"
//! ```
//!
//! Explicit channels replace the `generate` table with one entry per ordered
//! cell pair (1-based), each antenna coefficient given as `[re, im]`:
//!
//! ```toml
//! [[channels.explicit]]
//! from = 1
//! to = 2
//! h = [[0.5, 0.0], [0.0, -1.0]]
//! ```

use std::path::Path;

use misoic::random::cn01_network;
use misoic::{CVector, NetworkInstance, C64};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cells: usize,
    pub antennas: Vec<usize>,
    pub power: Vec<f64>,
    pub noise: Vec<f64>,
    pub channels: Channels,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channels {
    pub generate: Option<Generate>,
    pub explicit: Option<Vec<ExplicitChannel>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub seed: u64,
    pub distribution: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitChannel {
    pub from: usize,
    pub to: usize,
    pub h: Vec<[f64; 2]>,
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Generation seed, if the channels are generated.
    pub fn seed(&self) -> Option<u64> {
        self.channels.generate.as_ref().map(|g| g.seed)
    }

    /// Replaces the generation seed. Explicit scenarios have none to replace.
    pub fn with_seed(mut self, seed: u64) -> Result<Self, CliError> {
        match self.channels.generate.as_mut() {
            Some(g) => g.seed = seed,
            None => return Err(CliError::Usage("--seed needs a scenario with generated channels".into())),
        }
        Ok(self)
    }

    pub fn network(&self) -> Result<NetworkInstance, CliError> {
        let k = self.cells;
        let lists = [("antennas", self.antennas.len()), ("power", self.power.len()), ("noise", self.noise.len())];
        for (name, len) in lists {
            if len != k {
                return Err(CliError::Parse(format!("`{name}` lists {len} values for {k} cells")));
            }
        }
        match (&self.channels.generate, &self.channels.explicit) {
            (Some(g), None) => {
                if g.distribution != "cn01" {
                    return Err(CliError::Parse(format!(
                        "unknown channel distribution `{}` (supported: cn01)",
                        g.distribution
                    )));
                }
                Ok(cn01_network(&self.antennas, &self.power, &self.noise, g.seed)?)
            }
            (None, Some(list)) => self.explicit_network(list),
            _ => Err(CliError::Parse("`channels` needs exactly one of `generate` or `explicit`".into())),
        }
    }

    fn explicit_network(&self, list: &[ExplicitChannel]) -> Result<NetworkInstance, CliError> {
        let k = self.cells;
        let mut grid: Vec<Vec<Option<CVector>>> = vec![vec![None; k]; k];
        for (n, c) in list.iter().enumerate() {
            let entry = n + 1;
            if c.from == 0 || c.from > k || c.to == 0 || c.to > k {
                return Err(CliError::Parse(format!(
                    "channel entry {entry}: cells are numbered 1..={k}, got from = {}, to = {}",
                    c.from, c.to
                )));
            }
            let m = self.antennas[c.from - 1];
            if c.h.len() != m {
                return Err(CliError::Parse(format!(
                    "channel entry {entry} ({} -> {}): {} coefficients, cell {} has {m} antennas",
                    c.from,
                    c.to,
                    c.h.len(),
                    c.from
                )));
            }
            let slot = &mut grid[c.from - 1][c.to - 1];
            if slot.is_some() {
                return Err(CliError::Parse(format!("channel entry {entry}: duplicate {} -> {}", c.from, c.to)));
            }
            *slot = Some(CVector::from_iterator(m, c.h.iter().map(|&[re, im]| C64::new(re, im))));
        }
        let channels = grid
            .into_iter()
            .enumerate()
            .map(|(from, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(to, h)| {
                        h.ok_or_else(|| CliError::Parse(format!("missing channel {} -> {}", from + 1, to + 1)))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NetworkInstance::new(self.antennas.clone(), self.power.clone(), self.noise.clone(), channels)?)
    }
}

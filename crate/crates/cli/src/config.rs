use std::fs;
use std::path::{Path, PathBuf};

use nullkirch_core::harness::TestCase;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "nullkirch-out";

/// Run configuration as read from TOML; every key has a command-line counterpart or belongs to a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Ladder rung used by `cone`, `transport` and `evaluate`.
    #[serde(default)]
    pub rung: Option<usize>,
    /// Case used by `cone`, `transport` and `evaluate`; the first case when absent.
    #[serde(default)]
    pub case: Option<String>,
    pub cases: Vec<TestCase>,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub rung: Option<usize>,
    pub case: Option<String>,
}

/// A validated configuration with every override applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub out: PathBuf,
    pub jobs: usize,
    pub rung: usize,
    pub case: Option<String>,
    pub cases: Vec<TestCase>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn resolve(self, o: Overrides) -> Result<Resolved, CliError> {
        if self.cases.is_empty() {
            return Err(CliError::Config("no cases defined".into()));
        }
        for case in &self.cases {
            case.validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let mut names: Vec<&str> = self.cases.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("case names must be unique".into()));
        }
        let jobs = o.jobs.or(self.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        let r = Resolved {
            out: o
                .out
                .or(self.out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            jobs,
            rung: o.rung.or(self.rung).unwrap_or(0),
            case: o.case.or(self.case),
            cases: self.cases,
        };
        r.selected()?;
        Ok(r)
    }
}

impl Resolved {
    /// The case and rung index for the single-case commands.
    pub fn selected(&self) -> Result<(&TestCase, usize), CliError> {
        let case = match &self.case {
            Some(name) => self
                .cases
                .iter()
                .find(|c| &c.name == name)
                .ok_or_else(|| CliError::Config(format!("no case named {name}")))?,
            None => &self.cases[0],
        };
        if self.rung >= case.ladder.len() {
            return Err(CliError::Config(format!(
                "rung {} is beyond the {} rungs of {}",
                self.rung,
                case.ladder.len(),
                case.name
            )));
        }
        Ok((case, self.rung))
    }
}

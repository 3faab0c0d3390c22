use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smdd::bench::TestProblem;
use smdd::engine::{default_n0, AcquisitionMode, DistanceVariant, InitialDesign, SmddConfig};
use smdd::gp::KernelFamily;

use crate::error::{CliError, CliResult};

fn default_a() -> usize {
    5
}

fn default_q() -> f64 {
    smdd::design::DEFAULT_Q
}

fn default_threshold() -> f64 {
    smdd::pca::DEFAULT_PC_THRESHOLD
}

fn default_nu() -> f64 {
    smdd::gp::DEFAULT_NU
}

fn default_test_points() -> usize {
    smdd::metrics::DEFAULT_TEST_POINTS
}

/// JSON run description; unset fields take the engine defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// A built-in problem name, or "external".
    pub problem: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub n0: Option<usize>,
    /// Final design size.
    pub n: usize,
    #[serde(default = "default_a")]
    pub a: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub mode: AcquisitionMode,
    #[serde(default)]
    pub w: Option<f64>,
    #[serde(default = "default_threshold")]
    pub pc_threshold: f64,
    #[serde(default)]
    pub kernel: KernelFamily,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub skip_pca: bool,
    #[serde(default)]
    pub distance: DistanceVariant,
    #[serde(default)]
    pub initial: InitialDesign,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn problem(&self) -> CliResult<Option<TestProblem>> {
        if self.problem.eq_ignore_ascii_case("external") {
            return Ok(None);
        }
        Ok(Some(TestProblem::by_name(&self.problem)?))
    }

    /// Engine configuration, checked against the problem dimensions.
    pub fn engine_config(&self) -> CliResult<SmddConfig> {
        let (k, l) = match self.problem()? {
            Some(p) => {
                for (name, given, actual) in [("k", self.k, p.k), ("l", self.l, p.l)] {
                    if given.is_some_and(|g| g != actual) {
                        return Err(CliError::Usage(format!(
                            "problem {} has {name} = {actual}, config says {}",
                            p.name,
                            given.unwrap_or_default()
                        )));
                    }
                }
                (p.k, p.l)
            }
            None => match (self.k, self.l) {
                (Some(k), Some(l)) => (k, l),
                _ => return Err(CliError::Usage("external problems need k and l".into())),
            },
        };
        let config = SmddConfig {
            k,
            l,
            n0: self.n0.unwrap_or_else(|| default_n0(k, l)),
            n_final: self.n,
            a: self.a,
            q: self.q,
            mode: self.mode,
            w: self.w,
            pc_threshold: self.pc_threshold,
            kernel: self.kernel,
            nu: self.nu,
            skip_pca: self.skip_pca,
            distance: self.distance,
            initial: self.initial,
            seed: self.seed,
        };
        config.validate()?;
        if self.test_points == 0 {
            return Err(CliError::Usage("test_points must be positive".into()));
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfigFile {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn defaults_for_a_builtin_problem() {
        let c = parse(r#"{"problem":"example1","n":40}"#).engine_config().unwrap();
        assert_eq!((c.k, c.l, c.n0, c.a), (2, 2, 20, 5));
        assert_eq!(c.initial, InitialDesign::Maximin);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse(r#"{"problem":"example1","n":20}"#).engine_config().is_err());
        assert!(parse(r#"{"problem":"nope","n":40}"#).engine_config().is_err());
        assert!(parse(r#"{"problem":"example1","n":40,"k":3}"#).engine_config().is_err());
        assert!(parse(r#"{"problem":"external","n":40}"#).engine_config().is_err());
        assert!(serde_json::from_str::<RunConfigFile>(r#"{"problem":"x","n":4,"bogus":1}"#).is_err());
    }

    #[test]
    fn external_problem_with_overrides() {
        let c = parse(r#"{"problem":"external","k":3,"l":53,"n0":30,"n":40,"skip_pca":true,"initial":"id2"}"#)
            .engine_config()
            .unwrap();
        assert_eq!((c.k, c.l, c.n0), (3, 53, 30));
        assert!(c.skip_pca);
        assert_eq!(c.initial, InitialDesign::PoorlyFilled);
    }
}
